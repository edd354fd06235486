//! Synthetic HPPC records from a two-RC equivalent-circuit cell.
//!
//! The current is zero-order held over each sample interval and the circuit
//! state is advanced with one classical RK4 step per output sample. Sample
//! `k` reports the terminal voltage at `t_k` with the current that is applied
//! from `t_k` on, so a pulse shows its full ohmic drop on its first sample.

mod cell;
mod protocol;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::timeseries::{TimeSeries, TimeSeriesError};

pub use cell::{age_cell, AgingSpec, CellSpec, OcvCurve};
pub use protocol::{hppc_block, hppc_protocol, ProtocolScript, ProtocolStep};

/// Margin beyond `[v_min, v_max]` at which a simulation is aborted.
pub const VOLTAGE_ABORT_MARGIN: f64 = 0.1;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid cell: {0}")]
    InvalidCell(String),
    #[error("invalid aging: {0}")]
    InvalidAging(String),
    #[error("invalid protocol step {step}: {reason}")]
    InvalidProtocol { step: usize, reason: String },
    #[error("invalid simulation options: {0}")]
    InvalidOptions(String),
    #[error("terminal voltage {volts:.4} V at t = {time} s left [{lo}, {hi}] during step {step}")]
    VoltageOutOfRange {
        time: f64,
        volts: f64,
        lo: f64,
        hi: f64,
        step: usize,
    },
    #[error("constant-voltage solve failed at t = {time} s")]
    CvSolve { time: f64 },
    #[error("simulation produced {0} samples")]
    TooShort(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimOptions {
    /// Sample interval in seconds.
    pub dt: f64,
    /// State of charge at the start of the script; RC branches start relaxed.
    pub initial_soc: f64,
    /// Standard deviation of additive voltage noise, volts.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            dt: 1.0,
            initial_soc: 1.0,
            noise_sigma: 0.0,
            seed: 0,
        }
    }
}

impl SimOptions {
    fn validate(&self) -> Result<(), SynthError> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(SynthError::InvalidOptions(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(0.0..=1.0).contains(&self.initial_soc) {
            return Err(SynthError::InvalidOptions(format!(
                "initial soc must lie in [0, 1], got {}",
                self.initial_soc
            )));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(SynthError::InvalidOptions(format!(
                "noise sigma must be non-negative, got {}",
                self.noise_sigma
            )));
        }
        Ok(())
    }
}

/// Simulated record plus the state of charge at every sample.
#[derive(Debug, Clone, PartialEq)]
pub struct CellTrace {
    pub series: TimeSeries,
    pub soc: Vec<f64>,
    /// The cell actually simulated, after aging.
    pub cell: CellSpec,
}

#[derive(Debug, Clone, Copy)]
struct State {
    soc: f64,
    v1: f64,
    v2: f64,
}

fn derivative(cell: &CellSpec, i: f64, s: State) -> State {
    State {
        soc: -i / (3600.0 * cell.capacity),
        v1: -s.v1 / (cell.r1 * cell.c1) + i / cell.c1,
        v2: -s.v2 / (cell.r2 * cell.c2) + i / cell.c2,
    }
}

fn axpy(s: State, h: f64, d: State) -> State {
    State {
        soc: s.soc + h * d.soc,
        v1: s.v1 + h * d.v1,
        v2: s.v2 + h * d.v2,
    }
}

fn rk4(cell: &CellSpec, i: f64, s: State, h: f64) -> State {
    let k1 = derivative(cell, i, s);
    let k2 = derivative(cell, i, axpy(s, h / 2.0, k1));
    let k3 = derivative(cell, i, axpy(s, h / 2.0, k2));
    let k4 = derivative(cell, i, axpy(s, h, k3));
    State {
        soc: s.soc + h / 6.0 * (k1.soc + 2.0 * k2.soc + 2.0 * k3.soc + k4.soc),
        v1: s.v1 + h / 6.0 * (k1.v1 + 2.0 * k2.v1 + 2.0 * k3.v1 + k4.v1),
        v2: s.v2 + h / 6.0 * (k1.v2 + 2.0 * k2.v2 + 2.0 * k3.v2 + k4.v2),
    }
}

fn terminal(cell: &CellSpec, i: f64, s: State) -> f64 {
    cell.ocv.eval(s.soc) - i * cell.r0 - s.v1 - s.v2
}

/// Simulates `script` on `spec` aged by `aging`.
pub fn simulate_cell(
    spec: &CellSpec,
    aging: &AgingSpec,
    script: &ProtocolScript,
    opts: &SimOptions,
) -> Result<TimeSeries, SynthError> {
    simulate_cell_trace(spec, aging, script, opts).map(|t| t.series)
}

pub fn simulate_cell_trace(
    spec: &CellSpec,
    aging: &AgingSpec,
    script: &ProtocolScript,
    opts: &SimOptions,
) -> Result<CellTrace, SynthError> {
    opts.validate()?;
    let cell = age_cell(spec, aging)?;
    script.validate(&cell)?;

    let dt = opts.dt;
    let lo = cell.v_min - VOLTAGE_ABORT_MARGIN;
    let hi = cell.v_max + VOLTAGE_ABORT_MARGIN;
    let mut state = State {
        soc: opts.initial_soc,
        v1: 0.0,
        v2: 0.0,
    };
    let mut current = Vec::new();
    let mut voltage = Vec::new();
    let mut soc = Vec::new();

    for (index, step) in script.steps.iter().enumerate() {
        let samples = (step.seconds() / dt).round() as usize;
        for _ in 0..samples {
            let time = voltage.len() as f64 * dt;
            let i = match *step {
                ProtocolStep::CcDischarge { amps, .. } => amps,
                ProtocolStep::CcCharge { amps, .. } => -amps,
                ProtocolStep::Rest { .. } => 0.0,
                ProtocolStep::CvCharge { volts, .. } => {
                    let i = (cell.ocv.eval(state.soc) - state.v1 - state.v2 - volts) / cell.r0;
                    if !i.is_finite() {
                        return Err(SynthError::CvSolve { time });
                    }
                    i.min(0.0)
                }
            };
            let v = terminal(&cell, i, state);
            let stop = match (*step, step.cutoff()) {
                (ProtocolStep::CcDischarge { .. }, Some(c)) => v <= c,
                (ProtocolStep::CcCharge { .. }, Some(c)) => v >= c,
                _ => false,
            };
            if stop {
                break;
            }
            if !(lo..=hi).contains(&v) {
                return Err(SynthError::VoltageOutOfRange {
                    time,
                    volts: v,
                    lo,
                    hi,
                    step: index,
                });
            }
            current.push(i);
            voltage.push(v);
            soc.push(state.soc);
            state = rk4(&cell, i, state, dt);
        }
    }

    if opts.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let noise = Normal::new(0.0, opts.noise_sigma)
            .map_err(|e| SynthError::InvalidOptions(e.to_string()))?;
        for v in &mut voltage {
            *v += noise.sample(&mut rng);
        }
    }

    let series = TimeSeries::from_uniform(0.0, dt, current, voltage).map_err(|e| match e {
        TimeSeriesError::TooShort(n) => SynthError::TooShort(n),
        other => SynthError::InvalidOptions(other.to_string()),
    })?;
    let series = series
        .with_meta("cycles", aging.cycles.to_string())
        .with_meta("dt_s", dt.to_string())
        .with_meta("initial_soc", opts.initial_soc.to_string())
        .with_meta("noise_sigma", opts.noise_sigma.to_string())
        .with_meta("seed", opts.seed.to_string());
    Ok(CellTrace { series, soc, cell })
}
