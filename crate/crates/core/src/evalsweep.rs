//! Residual sum of squares and embedding-dimension sweeps.
//!
//! Every grid point follows the same protocol: fit on the chronological
//! training split, roll the model open-loop over the whole record from the
//! warm-start index, and score the held-out tail only.

use log::warn;
use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dmd::{fit_dmd, DmdModel};
use crate::dmdc::{fit_dmdc, DmdcModel, DmdcVariant};
use crate::embedding::{build_snapshots, EmbeddingSpec};
use crate::error::Error;
use crate::forecast::{open_loop, Forecast, Propagator};
use crate::lowrank::RankPolicy;
use crate::scalar::Real;
use crate::timeseries::{split, SplitSpec, TimeSeries};

/// Absolute tolerance under which two RSS values count as tied.
pub const TIE_ABS: f64 = 1e-12;
/// Relative tolerance under which two RSS values count as tied.
pub const TIE_REL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("length mismatch: {measured} measured vs {predicted} predicted samples")]
    LengthMismatch { measured: usize, predicted: usize },
    #[error("nothing to compare")]
    Empty,
    #[error("sweep grid is empty")]
    EmptyGrid,
    #[error("every grid point was skipped: {}", describe(.0))]
    AllSkipped(Vec<SkippedPoint>),
}

fn describe(points: &[SkippedPoint]) -> String {
    points
        .iter()
        .map(|p| format!("{}: {}", p.param, p.reason))
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRss {
    pub start_s: f64,
    pub end_s: f64,
    pub rss: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RssReport {
    /// `sum (y_k - yhat_k)^2`, volts squared.
    pub rss: f64,
    /// `rss / sum (y_k - mean y)^2`; `None` when the measurement is constant.
    pub nrss: Option<f64>,
    /// Number of compared samples.
    pub horizon: usize,
    pub per_segment: Vec<SegmentRss>,
}

pub fn rss<T: Real>(measured: &[T], predicted: &[T]) -> Result<RssReport, EvalError> {
    if measured.len() != predicted.len() {
        return Err(EvalError::LengthMismatch {
            measured: measured.len(),
            predicted: predicted.len(),
        });
    }
    if measured.is_empty() {
        return Err(EvalError::Empty);
    }
    let n = measured.len() as f64;
    let rss: f64 = measured
        .iter()
        .zip(predicted)
        .map(|(y, p)| {
            let d = y.as_f64() - p.as_f64();
            d * d
        })
        .sum();
    let mean = measured.iter().map(|y| y.as_f64()).sum::<f64>() / n;
    let spread: f64 = measured
        .iter()
        .map(|y| {
            let d = y.as_f64() - mean;
            d * d
        })
        .sum();
    Ok(RssReport {
        rss,
        nrss: (spread > 0.0).then(|| rss / spread),
        horizon: measured.len(),
        per_segment: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Dmd,
    Dmdc,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Dmd => "dmd",
            ModelKind::Dmdc => "dmdc",
        })
    }
}

/// Rank policies and DMDc variant used when fitting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Truncation of `X` (DMD) or `[X; U]` (DMDc).
    pub policy: RankPolicy,
    /// Output basis truncation for the reduced DMDc fit.
    pub output_policy: RankPolicy,
    pub variant: DmdcVariant,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            policy: RankPolicy::RelativeThreshold(1e-10),
            output_policy: RankPolicy::Energy(0.9999),
            variant: DmdcVariant::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FittedModel<T: Real> {
    Dmd(DmdModel<T>),
    Dmdc(DmdcModel<T>),
}

impl<T: Real> FittedModel<T> {
    pub fn kind(&self) -> ModelKind {
        match self {
            FittedModel::Dmd(_) => ModelKind::Dmd,
            FittedModel::Dmdc(_) => ModelKind::Dmdc,
        }
    }

    pub fn fit_residual(&self) -> T {
        match self {
            FittedModel::Dmd(m) => m.fit_residual,
            FittedModel::Dmdc(m) => m.fit_residual,
        }
    }
}

impl<T: Real> Propagator<T> for FittedModel<T> {
    fn embedding(&self) -> EmbeddingSpec {
        match self {
            FittedModel::Dmd(m) => m.embedding(),
            FittedModel::Dmdc(m) => m.embedding(),
        }
    }

    fn input_dim(&self) -> usize {
        match self {
            FittedModel::Dmd(m) => m.input_dim(),
            FittedModel::Dmdc(m) => m.input_dim(),
        }
    }

    fn encode(&self, x: &DVector<T>) -> DVector<T> {
        match self {
            FittedModel::Dmd(m) => m.encode(x),
            FittedModel::Dmdc(m) => m.encode(x),
        }
    }

    fn advance(&self, z: &DVector<T>, u: Option<&DVector<T>>) -> DVector<T> {
        match self {
            FittedModel::Dmd(m) => m.advance(z, u),
            FittedModel::Dmdc(m) => m.advance(z, u),
        }
    }

    fn decode(&self, z: &DVector<T>) -> DVector<T> {
        match self {
            FittedModel::Dmd(m) => m.decode(z),
            FittedModel::Dmdc(m) => m.decode(z),
        }
    }

    fn decode_voltage(&self, z: &DVector<T>) -> T {
        match self {
            FittedModel::Dmd(m) => m.decode_voltage(z),
            FittedModel::Dmdc(m) => m.decode_voltage(z),
        }
    }
}

/// Fits `kind` on the whole of `train`.
pub fn fit_model<T: Real>(
    train: &TimeSeries,
    spec: EmbeddingSpec,
    kind: ModelKind,
    opts: &FitOptions,
) -> Result<FittedModel<T>, Error> {
    let snap = build_snapshots::<T>(train, spec, kind == ModelKind::Dmdc)?;
    Ok(match kind {
        ModelKind::Dmd => FittedModel::Dmd(fit_dmd(&snap, opts.policy)?),
        ModelKind::Dmdc => FittedModel::Dmdc(fit_dmdc(
            &snap,
            opts.variant,
            opts.policy,
            opts.output_policy,
        )?),
    })
}

/// Outcome of fitting on the training split and forecasting the full record.
#[derive(Debug, Clone)]
pub struct Evaluation<T: Real> {
    pub model: FittedModel<T>,
    pub forecast: Forecast<T>,
    /// Index of the first held-out sample.
    pub eval_from: usize,
    /// Scored on the held-out tail (the whole forecast when nothing is held out).
    pub heldout: RssReport,
}

pub fn evaluate<T: Real>(
    series: &TimeSeries,
    spec: EmbeddingSpec,
    kind: ModelKind,
    split_spec: SplitSpec,
    opts: &FitOptions,
) -> Result<Evaluation<T>, Error> {
    let (train, eval) = split(series, split_spec)?;
    let model = fit_model::<T>(&train, spec, kind, opts)?;
    let forecast = open_loop(&model, series)?;
    let eval_from = if eval.is_empty() { 0 } else { train.len() };
    let heldout = forecast.report(series, eval_from)?;
    Ok(Evaluation {
        model,
        forecast,
        eval_from,
        heldout,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: usize,
    pub rss: f64,
    pub nrss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedPoint {
    pub param: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    /// Successful points in ascending parameter order.
    pub grid: Vec<SweepRow>,
    pub skipped: Vec<SkippedPoint>,
    pub best: usize,
    pub model_kind: ModelKind,
}

impl SweepResult {
    pub fn best_row(&self) -> &SweepRow {
        self.grid
            .iter()
            .find(|r| r.param == self.best)
            .expect("best is a grid row")
    }
}

/// Smallest parameter whose RSS ties the minimum.
pub fn argmin(rows: &[SweepRow]) -> Option<usize> {
    let min = rows.iter().map(|r| r.rss).fold(f64::INFINITY, f64::min);
    rows.iter()
        .filter(|r| r.rss - min <= TIE_ABS + TIE_REL * min.abs())
        .map(|r| r.param)
        .min()
}

/// How grid points are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Schedule {
    Serial,
    #[default]
    Parallel,
}

fn run_grid<F>(
    grid: &[usize],
    kind: ModelKind,
    schedule: Schedule,
    point: F,
) -> Result<SweepResult, EvalError>
where
    F: Fn(usize) -> Result<RssReport, Error> + Sync,
{
    let mut params: Vec<usize> = grid.to_vec();
    params.sort_unstable();
    params.dedup();
    if params.is_empty() {
        return Err(EvalError::EmptyGrid);
    }
    let outcomes: Vec<(usize, Result<RssReport, Error>)> = match schedule {
        Schedule::Serial => params.iter().map(|&p| (p, point(p))).collect(),
        Schedule::Parallel => params.par_iter().map(|&p| (p, point(p))).collect(),
    };

    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for (param, outcome) in outcomes {
        match outcome {
            Ok(r) => rows.push(SweepRow {
                param,
                rss: r.rss,
                nrss: r.nrss,
            }),
            Err(e) => {
                warn!("grid point {param} skipped: {e}");
                skipped.push(SkippedPoint {
                    param,
                    reason: e.to_string(),
                });
            }
        }
    }
    let best = argmin(&rows).ok_or_else(|| EvalError::AllSkipped(skipped.clone()))?;
    Ok(SweepResult {
        grid: rows,
        skipped,
        best,
        model_kind: kind,
    })
}

/// Sweeps the output embedding dimension `m` at fixed `ell`.
#[allow(clippy::too_many_arguments)]
pub fn sweep_output_embedding<T: Real>(
    series: &TimeSeries,
    m_grid: &[usize],
    ell: usize,
    tau: usize,
    kind: ModelKind,
    split_spec: SplitSpec,
    opts: &FitOptions,
    schedule: Schedule,
) -> Result<SweepResult, EvalError> {
    run_grid(m_grid, kind, schedule, |m| {
        let ell = if kind == ModelKind::Dmd { 1 } else { ell };
        let spec = EmbeddingSpec::new(m, ell, tau)?;
        Ok(evaluate::<T>(series, spec, kind, split_spec, opts)?.heldout)
    })
}

/// Sweeps the input embedding dimension `ell` of a DMDc model at fixed `m`.
pub fn sweep_input_embedding<T: Real>(
    series: &TimeSeries,
    m: usize,
    ell_grid: &[usize],
    tau: usize,
    split_spec: SplitSpec,
    opts: &FitOptions,
    schedule: Schedule,
) -> Result<SweepResult, EvalError> {
    run_grid(ell_grid, ModelKind::Dmdc, schedule, |ell| {
        let spec = EmbeddingSpec::new(m, ell, tau)?;
        Ok(evaluate::<T>(series, spec, ModelKind::Dmdc, split_spec, opts)?.heldout)
    })
}
