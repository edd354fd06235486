//! Linear identification of battery voltage dynamics with DMD and DMDc on
//! Hankel time-delay embeddings, plus a synthetic HPPC data generator.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); records,
//! reports and the cell simulator work in `f64`. The `*64` and `*32` aliases
//! below fix the scalar for the common cases.

pub mod dmd;
pub mod dmdc;
pub mod embedding;
pub mod error;
pub mod evalsweep;
pub mod forecast;
pub mod hppc;
pub mod lowrank;
pub mod scalar;
pub mod timeseries;

pub use dmd::{fit_dmd, simulate_dmd, DmdModel, Spectrum};
pub use dmdc::{fit_dmdc, simulate_dmdc, DmdcModel, DmdcOperators, DmdcVariant};
pub use embedding::{
    build_hankel, build_input_hankel, build_snapshots, init_state, read_voltage, EmbeddingError,
    EmbeddingSpec, SnapshotSet,
};
pub use error::{Error, ModelError};
pub use evalsweep::{
    evaluate, fit_model, rss, sweep_input_embedding, sweep_output_embedding, EvalError, Evaluation,
    FitOptions, FittedModel, ModelKind, RssReport, Schedule, SegmentRss, SweepResult, SweepRow,
};
pub use forecast::{open_loop, rollout_states, Forecast, Propagator};
pub use hppc::{
    age_cell, hppc_protocol, simulate_cell, AgingSpec, CellSpec, ProtocolScript, ProtocolStep,
    SimOptions, SynthError,
};
pub use lowrank::{pinv_apply, truncated_svd, LowRankError, RankPolicy, SvdFactor};
pub use scalar::Real;
pub use timeseries::{
    load_csv, save_csv, split, ColumnMap, SplitSpec, TimeSeries, TimeSeriesError, VoltageWindow,
};

pub type DmdModel64 = DmdModel<f64>;
pub type DmdcModel64 = DmdcModel<f64>;
pub type FittedModel64 = FittedModel<f64>;
pub type SnapshotSet64 = SnapshotSet<f64>;
pub type SvdFactor64 = SvdFactor<f64>;
pub type Spectrum64 = Spectrum<f64>;
pub type Forecast64 = Forecast<f64>;

pub type DmdModel32 = DmdModel<f32>;
pub type DmdcModel32 = DmdcModel<f32>;
pub type FittedModel32 = FittedModel<f32>;
pub type SnapshotSet32 = SnapshotSet<f32>;
pub type SvdFactor32 = SvdFactor<f32>;
pub type Spectrum32 = Spectrum<f32>;
pub type Forecast32 = Forecast<f32>;
