//! HPPC step schedules.

use serde::{Deserialize, Serialize};

use super::cell::CellSpec;
use super::SynthError;

pub const PULSE_DISCHARGE_AMPS: f64 = 10.0;
pub const PULSE_DISCHARGE_SECONDS: f64 = 10.0;
pub const PULSE_CHARGE_AMPS: f64 = 5.0;
pub const PULSE_CHARGE_SECONDS: f64 = 20.0;
pub const SOC_STEP_SECONDS: f64 = 1080.0;
pub const SOC_STEP_CUTOFF: f64 = 3.95;
pub const LONG_REST_SECONDS: f64 = 3600.0;

/// One scripted step. Current magnitudes are non-negative; the mode gives
/// the direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ProtocolStep {
    CcCharge {
        amps: f64,
        seconds: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cutoff: Option<f64>,
    },
    CvCharge {
        volts: f64,
        seconds: f64,
    },
    Rest {
        seconds: f64,
    },
    CcDischarge {
        amps: f64,
        seconds: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cutoff: Option<f64>,
    },
}

impl ProtocolStep {
    pub fn seconds(&self) -> f64 {
        match *self {
            ProtocolStep::CcCharge { seconds, .. }
            | ProtocolStep::CvCharge { seconds, .. }
            | ProtocolStep::Rest { seconds }
            | ProtocolStep::CcDischarge { seconds, .. } => seconds,
        }
    }

    pub fn cutoff(&self) -> Option<f64> {
        match *self {
            ProtocolStep::CcCharge { cutoff, .. } | ProtocolStep::CcDischarge { cutoff, .. } => {
                cutoff
            }
            _ => None,
        }
    }

    fn validate(&self, index: usize, cell: &CellSpec) -> Result<(), SynthError> {
        let bad = |reason: String| SynthError::InvalidProtocol {
            step: index,
            reason,
        };
        let seconds = self.seconds();
        if !(seconds.is_finite() && seconds > 0.0) {
            return Err(bad(format!("duration must be positive, got {seconds}")));
        }
        match *self {
            ProtocolStep::CcCharge { amps, .. } | ProtocolStep::CcDischarge { amps, .. } => {
                if !(amps.is_finite() && amps >= 0.0) {
                    return Err(bad(format!(
                        "current magnitude must be non-negative, got {amps}"
                    )));
                }
            }
            ProtocolStep::CvCharge { volts, .. } => {
                if !(volts >= cell.v_min && volts <= cell.v_max) {
                    return Err(bad(format!(
                        "hold voltage {volts} outside [{}, {}]",
                        cell.v_min, cell.v_max
                    )));
                }
            }
            ProtocolStep::Rest { .. } => {}
        }
        if let Some(c) = self.cutoff() {
            if !(c >= cell.v_min && c <= cell.v_max) {
                return Err(bad(format!(
                    "cutoff {c} outside [{}, {}]",
                    cell.v_min, cell.v_max
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProtocolScript {
    pub steps: Vec<ProtocolStep>,
}

impl ProtocolScript {
    pub fn validate(&self, cell: &CellSpec) -> Result<(), SynthError> {
        if self.steps.is_empty() {
            return Err(SynthError::InvalidProtocol {
                step: 0,
                reason: "script has no steps".into(),
            });
        }
        self.steps
            .iter()
            .enumerate()
            .try_for_each(|(k, s)| s.validate(k, cell))
    }

    /// Scripted duration, ignoring early cutoffs.
    pub fn total_seconds(&self) -> f64 {
        self.steps.iter().map(ProtocolStep::seconds).sum()
    }
}

/// The SoC block repeated after the charge phase.
pub fn hppc_block() -> [ProtocolStep; 7] {
    [
        ProtocolStep::Rest {
            seconds: LONG_REST_SECONDS,
        },
        ProtocolStep::CcDischarge {
            amps: PULSE_DISCHARGE_AMPS,
            seconds: PULSE_DISCHARGE_SECONDS,
            cutoff: None,
        },
        ProtocolStep::Rest { seconds: 180.0 },
        ProtocolStep::CcCharge {
            amps: PULSE_CHARGE_AMPS,
            seconds: PULSE_CHARGE_SECONDS,
            cutoff: None,
        },
        ProtocolStep::Rest { seconds: 120.0 },
        ProtocolStep::CcDischarge {
            amps: PULSE_DISCHARGE_AMPS,
            seconds: SOC_STEP_SECONDS,
            cutoff: Some(SOC_STEP_CUTOFF),
        },
        ProtocolStep::Rest {
            seconds: LONG_REST_SECONDS,
        },
    ]
}

/// CC charge at C/2 up to `v_max`, a CV hold, then `repetitions` SoC blocks.
pub fn hppc_protocol(spec: &CellSpec, repetitions: usize) -> Result<ProtocolScript, SynthError> {
    if repetitions == 0 {
        return Err(SynthError::InvalidProtocol {
            step: 0,
            reason: "at least one repetition is required".into(),
        });
    }
    let mut steps = vec![
        ProtocolStep::CcCharge {
            amps: spec.capacity / 2.0,
            seconds: 7200.0,
            cutoff: Some(spec.v_max),
        },
        ProtocolStep::CvCharge {
            volts: spec.v_max,
            seconds: 1800.0,
        },
    ];
    for _ in 0..repetitions {
        steps.extend(hppc_block());
    }
    let script = ProtocolScript { steps };
    script.validate(spec)?;
    Ok(script)
}
