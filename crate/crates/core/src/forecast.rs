//! Open-loop rollout shared by the DMD and DMDc models.
//!
//! A rollout is seeded with the measured Hankel column ending at sample
//! `(m - 1) * tau` and then runs on its own predictions; only the current is
//! taken from data.

use nalgebra::{DMatrix, DVector};

use crate::embedding::{init_state, read_voltage, EmbeddingSpec};
use crate::error::ModelError;
use crate::evalsweep::{rss, RssReport, SegmentRss};
use crate::scalar::Real;
use crate::timeseries::{TimeSeries, VoltageWindow};

/// Rollout aborts once any state entry exceeds this magnitude.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

/// Report windows in seconds from the start of the record: 1-2.5 h, 5-6.5 h
/// and 10-12.5 h.
pub const REPORT_WINDOWS: [(f64, f64); 3] =
    [(3600.0, 9000.0), (18000.0, 23400.0), (36000.0, 45000.0)];

/// A linear model advancing latent coordinates one sample at a time.
pub trait Propagator<T: Real>: Sync {
    fn embedding(&self) -> EmbeddingSpec;

    /// Rows of the input vector; zero for autonomous models.
    fn input_dim(&self) -> usize;

    fn encode(&self, x: &DVector<T>) -> DVector<T>;

    fn advance(&self, z: &DVector<T>, u: Option<&DVector<T>>) -> DVector<T>;

    fn decode(&self, z: &DVector<T>) -> DVector<T>;

    fn decode_voltage(&self, z: &DVector<T>) -> T {
        read_voltage(&self.decode(z))
    }
}

fn guard<T: Real>(z: &DVector<T>, step: usize) -> Result<(), ModelError> {
    let limit = T::of(DIVERGENCE_LIMIT);
    if z.iter().any(|x| !x.is_finite() || x.abs() > limit) {
        return Err(ModelError::Diverged { step });
    }
    Ok(())
}

/// `[x0, x1, ..., x_steps]`, with column `k` of `inputs` driving step `k`.
pub fn rollout_states<T: Real, P: Propagator<T> + ?Sized>(
    model: &P,
    x0: &DVector<T>,
    inputs: Option<&DMatrix<T>>,
    steps: usize,
) -> Result<Vec<DVector<T>>, ModelError> {
    let m = model.embedding().m;
    if x0.len() != m {
        return Err(ModelError::DimensionMismatch(format!(
            "initial state has length {} but the model state is {m}",
            x0.len()
        )));
    }
    let ell = model.input_dim();
    if ell > 0 {
        let u = inputs.ok_or(ModelError::MissingInput)?;
        if u.nrows() != ell || u.ncols() < steps {
            return Err(ModelError::DimensionMismatch(format!(
                "inputs are {}x{} but {ell}x{steps} are required",
                u.nrows(),
                u.ncols()
            )));
        }
    }

    let mut states = Vec::with_capacity(steps + 1);
    states.push(x0.clone());
    let mut z = model.encode(x0);
    for k in 0..steps {
        let u = inputs.filter(|_| ell > 0).map(|u| u.column(k).into_owned());
        z = model.advance(&z, u.as_ref());
        guard(&z, k + 1)?;
        states.push(model.decode(&z));
    }
    Ok(states)
}

/// Voltage predictions for samples `first_index..first_index + voltage.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct Forecast<T: Real> {
    pub first_index: usize,
    pub voltage: Vec<T>,
}

/// Rolls `model` over `series` from the warm-start index `(m - 1) * tau` to
/// the last sample. At least two samples must follow the warm start.
pub fn open_loop<T: Real, P: Propagator<T> + ?Sized>(
    model: &P,
    series: &TimeSeries,
) -> Result<Forecast<T>, ModelError> {
    let spec = model.embedding();
    let start = spec.span();
    let len = series.len();
    if len < start + 3 {
        return Err(ModelError::SeriesTooShort {
            len,
            needed: start + 3,
        });
    }
    let x0 = init_state::<T>(series, spec, start)?;
    let ell = model.input_dim();
    let current: Vec<T> = if ell > 0 {
        series.current().iter().map(|&x| T::of(x)).collect()
    } else {
        Vec::new()
    };

    let steps = len - 1 - start;
    let mut voltage = Vec::with_capacity(steps);
    let mut z = model.encode(&x0);
    let mut u = DVector::zeros(ell);
    for k in 0..steps {
        let newest = start + k;
        let input = if ell > 0 {
            u.copy_from_slice(&current[newest + 1 - ell..=newest]);
            Some(&u)
        } else {
            None
        };
        z = model.advance(&z, input);
        guard(&z, k + 1)?;
        voltage.push(model.decode_voltage(&z));
    }
    Ok(Forecast {
        first_index: start + 1,
        voltage,
    })
}

impl<T: Real> Forecast<T> {
    pub fn end_index(&self) -> usize {
        self.first_index + self.voltage.len()
    }

    /// Predicted voltage on the measured time stamps, with measured current.
    pub fn to_series(&self, series: &TimeSeries) -> Result<TimeSeries, ModelError> {
        let range = self.first_index..self.end_index();
        TimeSeries::with_window(
            series.time()[range.clone()].to_vec(),
            series.current()[range].to_vec(),
            self.voltage.iter().map(|v| v.as_f64()).collect(),
            VoltageWindow::UNBOUNDED,
        )
        .map_err(|_| ModelError::SeriesTooShort {
            len: self.voltage.len(),
            needed: 2,
        })
    }

    /// RSS against the measured voltage over predicted samples at index
    /// `>= from_index`, with per-window breakdown.
    pub fn report(&self, series: &TimeSeries, from_index: usize) -> Result<RssReport, ModelError> {
        let lo = from_index.max(self.first_index);
        let hi = self.end_index();
        if lo >= hi {
            return Err(ModelError::SeriesTooShort {
                len: hi,
                needed: lo + 1,
            });
        }
        let measured = &series.voltage()[lo..hi];
        let predicted: Vec<f64> = self.voltage[lo - self.first_index..]
            .iter()
            .map(|v| v.as_f64())
            .collect();
        let mut report = rss(measured, &predicted).expect("equal non-empty lengths");

        let t0 = series.time()[0];
        for &(a, b) in &REPORT_WINDOWS {
            let idx: Vec<usize> = (lo..hi)
                .filter(|&k| {
                    let rel = series.time()[k] - t0;
                    rel >= a && rel < b
                })
                .collect();
            if idx.is_empty() {
                continue;
            }
            let value = idx
                .iter()
                .map(|&k| {
                    let d = series.voltage()[k] - predicted[k - lo];
                    d * d
                })
                .sum();
            report.per_segment.push(SegmentRss {
                start_s: a,
                end_s: b,
                rss: value,
                samples: idx.len(),
            });
        }
        Ok(report)
    }
}
