use thiserror::Error;

use crate::embedding::EmbeddingError;
use crate::hppc::SynthError;
use crate::lowrank::LowRankError;
use crate::timeseries::TimeSeriesError;

/// Failures while fitting or running an identified model.
#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    LowRank(#[from] LowRankError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error("degenerate snapshots: the state matrix is all zero")]
    DegenerateSnapshots,
    #[error("snapshot set carries an input block; plain DMD is autonomous")]
    UnexpectedInput,
    #[error("snapshot set has no input block")]
    MissingInput,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("rollout diverged at step {step}")]
    Diverged { step: usize },
    #[error("insufficient history: series has {len} samples, need at least {needed}")]
    SeriesTooShort { len: usize, needed: usize },
}

/// Umbrella error for callers that mix modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    TimeSeries(#[from] TimeSeriesError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    LowRank(#[from] LowRankError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("{0}")]
    Sweep(String),
}
