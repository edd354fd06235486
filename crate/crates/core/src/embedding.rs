//! Time-delay (Hankel) embeddings of the voltage and current signals.
//!
//! Column `j` of the output Hankel stacks `m` samples spaced `tau` apart, the
//! newest at the bottom. The snapshot pair advances by one sample, so `Xp`
//! column `j` equals `X` column `j + 1`. Input columns stack the `ell` newest
//! current samples ending at the same instant as the newest voltage row.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;
use crate::timeseries::TimeSeries;

#[derive(Debug, Error, PartialEq)]
pub enum EmbeddingError {
    #[error("invalid embedding: {0}")]
    InvalidSpec(String),
    #[error("signal of length {len} too short for m={m}, tau={tau}")]
    TooShort { len: usize, m: usize, tau: usize },
    #[error("insufficient history: index {index} needs at least {needed} prior samples")]
    InsufficientHistory { index: usize, needed: usize },
    #[error("index {index} out of range for series of length {len}")]
    OutOfRange { index: usize, len: usize },
    #[error("snapshot matrices disagree: {0}")]
    Shape(String),
}

type Result<T> = std::result::Result<T, EmbeddingError>;

/// Output embedding dimension `m`, input embedding dimension `ell` and row
/// stride `tau` (in samples).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EmbeddingSpec {
    pub m: usize,
    pub ell: usize,
    pub tau: usize,
}

impl EmbeddingSpec {
    pub fn new(m: usize, ell: usize, tau: usize) -> Result<Self> {
        let spec = Self { m, ell, tau };
        spec.check()?;
        Ok(spec)
    }

    /// Output-only embedding (`ell = 1`, unused by plain DMD).
    pub fn output_only(m: usize) -> Result<Self> {
        Self::new(m, 1, 1)
    }

    fn check(&self) -> Result<()> {
        if self.m == 0 {
            return Err(EmbeddingError::InvalidSpec("m must be >= 1".into()));
        }
        if self.tau == 0 {
            return Err(EmbeddingError::InvalidSpec("tau must be >= 1".into()));
        }
        if self.ell == 0 || self.ell > self.m {
            return Err(EmbeddingError::InvalidSpec(format!(
                "ell must satisfy 1 <= ell <= m, got ell={} m={}",
                self.ell, self.m
            )));
        }
        Ok(())
    }

    /// Checks `m * tau < len`.
    pub fn validate_for_len(&self, len: usize) -> Result<()> {
        self.check()?;
        if self.m * self.tau >= len {
            return Err(EmbeddingError::TooShort {
                len,
                m: self.m,
                tau: self.tau,
            });
        }
        Ok(())
    }

    /// Samples spanned by one state vector, minus one: `(m - 1) * tau`.
    pub fn span(&self) -> usize {
        (self.m - 1) * self.tau
    }

    /// Number of snapshot columns for a record of `len` samples.
    pub fn columns(&self, len: usize) -> usize {
        (len - 1) - self.span()
    }
}

/// Embedded snapshot matrices `X`, `X'` and optionally the input block `U`.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSet<T: Real> {
    pub x: DMatrix<T>,
    pub xp: DMatrix<T>,
    pub u: Option<DMatrix<T>>,
    pub spec: EmbeddingSpec,
    pub t0_index: usize,
}

impl<T: Real> SnapshotSet<T> {
    /// Wraps state snapshots that were not produced by a Hankel embedding
    /// (for example directly measured multi-dimensional states).
    pub fn from_matrices(x: DMatrix<T>, xp: DMatrix<T>, u: Option<DMatrix<T>>) -> Result<Self> {
        if x.shape() != xp.shape() {
            return Err(EmbeddingError::Shape(format!(
                "X is {:?} but X' is {:?}",
                x.shape(),
                xp.shape()
            )));
        }
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(EmbeddingError::Shape("empty snapshot matrix".into()));
        }
        if let Some(u) = &u {
            if u.ncols() != x.ncols() || u.nrows() == 0 {
                return Err(EmbeddingError::Shape(format!(
                    "U is {:?} but X has {} columns",
                    u.shape(),
                    x.ncols()
                )));
            }
        }
        let spec = EmbeddingSpec {
            m: x.nrows(),
            ell: u.as_ref().map_or(1, |u| u.nrows()),
            tau: 1,
        };
        Ok(Self {
            x,
            xp,
            u,
            spec,
            t0_index: 0,
        })
    }

    pub fn n(&self) -> usize {
        self.x.ncols()
    }
}

/// `m x n` Hankel matrix with entry `(i, j) = signal[j + i * tau]`.
pub fn build_hankel<T: Real>(signal: &[T], m: usize, tau: usize) -> Result<DMatrix<T>> {
    if m == 0 || tau == 0 {
        return Err(EmbeddingError::InvalidSpec("m and tau must be >= 1".into()));
    }
    let reach = (m - 1) * tau + 1;
    if reach > signal.len() {
        return Err(EmbeddingError::TooShort {
            len: signal.len(),
            m,
            tau,
        });
    }
    let n = signal.len() - (m - 1) * tau;
    Ok(DMatrix::from_fn(m, n, |i, j| signal[j + i * tau]))
}

fn to_real<T: Real>(xs: &[f64]) -> Vec<T> {
    xs.iter().map(|&x| T::of(x)).collect()
}

/// Input Hankel whose column `j` holds the `ell` consecutive samples ending at
/// `first_newest + j`.
pub fn build_input_hankel<T: Real>(
    signal: &[T],
    ell: usize,
    first_newest: usize,
    n: usize,
) -> Result<DMatrix<T>> {
    if first_newest + 1 < ell {
        return Err(EmbeddingError::InsufficientHistory {
            index: first_newest,
            needed: ell - 1,
        });
    }
    if first_newest + n > signal.len() {
        return Err(EmbeddingError::OutOfRange {
            index: first_newest + n - 1,
            len: signal.len(),
        });
    }
    let start = first_newest + 1 - ell;
    Ok(DMatrix::from_fn(ell, n, |i, j| signal[start + j + i]))
}

pub fn build_snapshots<T: Real>(
    series: &TimeSeries,
    spec: EmbeddingSpec,
    with_input: bool,
) -> Result<SnapshotSet<T>> {
    spec.validate_for_len(series.len())?;
    let len = series.len();
    let v: Vec<T> = to_real(series.voltage());
    let x = build_hankel(&v[..len - 1], spec.m, spec.tau)?;
    let xp = build_hankel(&v[1..], spec.m, spec.tau)?;
    let n = x.ncols();
    debug_assert_eq!(n, spec.columns(len));
    let u = if with_input {
        let cur: Vec<T> = to_real(series.current());
        Some(build_input_hankel(&cur, spec.ell, spec.span(), n)?)
    } else {
        None
    };
    Ok(SnapshotSet {
        x,
        xp,
        u,
        spec,
        t0_index: 0,
    })
}

/// Hankel column whose newest entry is sample `at_index`.
pub fn init_state<T: Real>(
    series: &TimeSeries,
    spec: EmbeddingSpec,
    at_index: usize,
) -> Result<DVector<T>> {
    let span = spec.span();
    if at_index < span {
        return Err(EmbeddingError::InsufficientHistory {
            index: at_index,
            needed: span,
        });
    }
    if at_index >= series.len() {
        return Err(EmbeddingError::OutOfRange {
            index: at_index,
            len: series.len(),
        });
    }
    let v = series.voltage();
    Ok(DVector::from_fn(spec.m, |i, _| {
        T::of(v[at_index - (spec.m - 1 - i) * spec.tau])
    }))
}

/// Newest entry of a Hankel state, i.e. the voltage it represents.
pub fn read_voltage<T: Real>(state: &DVector<T>) -> T {
    state[state.len() - 1]
}
