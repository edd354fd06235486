//! Two-RC Thevenin cell parameters, OCV curve and aging.

use serde::{Deserialize, Serialize};

use super::SynthError;

/// Piecewise-linear open-circuit voltage over state of charge, clamped
/// outside the first and last knot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcvCurve {
    /// `(soc, volts)` knots with strictly increasing soc.
    pub points: Vec<(f64, f64)>,
}

impl Default for OcvCurve {
    fn default() -> Self {
        Self {
            points: vec![(0.0, 2.5), (0.1, 3.2), (0.5, 3.7), (0.9, 4.05), (1.0, 4.2)],
        }
    }
}

impl OcvCurve {
    pub fn eval(&self, soc: f64) -> f64 {
        let p = &self.points;
        let (first, last) = (p[0], p[p.len() - 1]);
        if soc <= first.0 {
            return first.1;
        }
        if soc >= last.0 {
            return last.1;
        }
        let k = p.partition_point(|&(s, _)| s <= soc);
        let (s0, v0) = p[k - 1];
        let (s1, v1) = p[k];
        v0 + (v1 - v0) * (soc - s0) / (s1 - s0)
    }

    fn validate(&self) -> Result<(), SynthError> {
        if self.points.len() < 2 {
            return Err(SynthError::InvalidCell(
                "OCV curve needs at least two knots".into(),
            ));
        }
        if self
            .points
            .iter()
            .any(|&(s, v)| !s.is_finite() || !v.is_finite())
        {
            return Err(SynthError::InvalidCell("OCV knots must be finite".into()));
        }
        for w in self.points.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(SynthError::InvalidCell(
                    "OCV knots must have strictly increasing soc".into(),
                ));
            }
            if w[1].1 < w[0].1 {
                return Err(SynthError::InvalidCell(
                    "OCV curve must be non-decreasing".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CellSpec {
    /// Ampere-hours.
    pub capacity: f64,
    pub r0: f64,
    pub r1: f64,
    pub c1: f64,
    pub r2: f64,
    pub c2: f64,
    pub ocv: OcvCurve,
    pub v_min: f64,
    pub v_max: f64,
}

impl Default for CellSpec {
    fn default() -> Self {
        Self {
            capacity: 30.0,
            r0: 2e-3,
            r1: 1e-3,
            c1: 1e4,
            r2: 5e-4,
            c2: 1e5,
            ocv: OcvCurve::default(),
            v_min: 2.5,
            v_max: 4.2,
        }
    }
}

impl CellSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let positive = [
            ("capacity", self.capacity),
            ("r0", self.r0),
            ("r1", self.r1),
            ("c1", self.c1),
            ("r2", self.r2),
            ("c2", self.c2),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(SynthError::InvalidCell(format!(
                    "{name} must be positive and finite, got {value}"
                )));
            }
        }
        if !(self.v_min.is_finite() && self.v_max.is_finite() && self.v_min < self.v_max) {
            return Err(SynthError::InvalidCell(format!(
                "voltage limits [{}, {}] are not an interval",
                self.v_min, self.v_max
            )));
        }
        self.ocv.validate()?;
        let (lo, hi) = (self.ocv.eval(0.0), self.ocv.eval(1.0));
        if lo < self.v_min || hi > self.v_max {
            return Err(SynthError::InvalidCell(format!(
                "OCV range [{lo}, {hi}] leaves [{}, {}]",
                self.v_min, self.v_max
            )));
        }
        Ok(())
    }

    /// Time constants `(r1 c1, r2 c2)` in seconds.
    pub fn time_constants(&self) -> (f64, f64) {
        (self.r1 * self.c1, self.r2 * self.c2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgingSpec {
    pub cycles: u32,
    pub capacity_fade_per_cycle: f64,
    pub resistance_growth_per_cycle: f64,
}

impl Default for AgingSpec {
    fn default() -> Self {
        Self {
            cycles: 0,
            capacity_fade_per_cycle: 2e-4,
            resistance_growth_per_cycle: 3e-4,
        }
    }
}

impl AgingSpec {
    pub fn at_cycle(cycles: u32) -> Self {
        Self {
            cycles,
            ..Self::default()
        }
    }
}

/// Capacity fades and resistances grow linearly in the cycle count.
pub fn age_cell(spec: &CellSpec, aging: &AgingSpec) -> Result<CellSpec, SynthError> {
    spec.validate()?;
    let (fade, growth) = (
        aging.capacity_fade_per_cycle,
        aging.resistance_growth_per_cycle,
    );
    if !(fade.is_finite() && fade >= 0.0 && growth.is_finite() && growth >= 0.0) {
        return Err(SynthError::InvalidAging(format!(
            "rates must be non-negative, got fade {fade} and growth {growth}"
        )));
    }
    let n = f64::from(aging.cycles);
    let capacity = spec.capacity * (1.0 - fade * n);
    if capacity <= 0.0 {
        return Err(SynthError::InvalidAging(format!(
            "{} cycles at fade {fade} leave capacity {capacity} Ah",
            aging.cycles
        )));
    }
    let scale = 1.0 + growth * n;
    Ok(CellSpec {
        capacity,
        r0: spec.r0 * scale,
        r1: spec.r1 * scale,
        r2: spec.r2 * scale,
        ..spec.clone()
    })
}
