//! Controlled operators `(A, B)` from `X' ~ A X + B U`.
//!
//! The full variant solves `[A B] = X' [X; U]^+` directly. The reduced
//! variant projects onto the leading left singular vectors `Uh` of `X'` and
//! keeps `At = Uh^T A Uh` (`r_x x r_x`) and `Bt = Uh^T B` instead.

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dmd::{map_zero, spectrum_of, Spectrum};
use crate::embedding::{EmbeddingSpec, SnapshotSet};
use crate::error::ModelError;
use crate::evalsweep::RssReport;
use crate::forecast::{open_loop, rollout_states, Propagator};
use crate::lowrank::{pinv_core, truncated_svd, RankPolicy};
use crate::scalar::Real;
use crate::timeseries::TimeSeries;

/// Embedding dimension above which [`DmdcVariant::Auto`] picks the reduced fit.
pub const AUTO_REDUCED_ABOVE: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DmdcVariant {
    Full,
    Reduced,
    /// Full for `m <= 512`, reduced above.
    #[default]
    Auto,
}

impl DmdcVariant {
    pub fn resolve(self, m: usize) -> DmdcVariant {
        match self {
            DmdcVariant::Auto if m > AUTO_REDUCED_ABOVE => DmdcVariant::Reduced,
            DmdcVariant::Auto => DmdcVariant::Full,
            v => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DmdcOperators<T: Real> {
    Full {
        /// `m x m`
        a: DMatrix<T>,
        /// `m x ell`
        b: DMatrix<T>,
    },
    Reduced {
        /// `r_x x r_x`
        a_tilde: DMatrix<T>,
        /// `r_x x ell`
        b_tilde: DMatrix<T>,
        /// `m x r_x` with orthonormal columns.
        basis: DMatrix<T>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DmdcModel<T: Real> {
    pub operators: DmdcOperators<T>,
    pub spec: EmbeddingSpec,
    /// Rank kept for the stacked matrix `[X; U]`.
    pub rank_omega: usize,
    /// Output basis rank, reduced variant only.
    pub rank_output: Option<usize>,
    /// `||X' - A X - B U||_F`, measured through the basis for the reduced fit.
    pub fit_residual: T,
}

impl<T: Real> DmdcModel<T> {
    pub fn variant(&self) -> DmdcVariant {
        match self.operators {
            DmdcOperators::Full { .. } => DmdcVariant::Full,
            DmdcOperators::Reduced { .. } => DmdcVariant::Reduced,
        }
    }

    /// `(A, B)` in Hankel coordinates; the reduced model is lifted to
    /// `(Uh At Uh^T, Uh Bt)`.
    pub fn full_operators(&self) -> (DMatrix<T>, DMatrix<T>) {
        match &self.operators {
            DmdcOperators::Full { a, b } => (a.clone(), b.clone()),
            DmdcOperators::Reduced {
                a_tilde,
                b_tilde,
                basis,
            } => (basis * a_tilde * basis.transpose(), basis * b_tilde),
        }
    }

    /// Operator whose poles describe the model: `A`, or `At` when reduced.
    pub fn state_operator(&self) -> &DMatrix<T> {
        match &self.operators {
            DmdcOperators::Full { a, .. } => a,
            DmdcOperators::Reduced { a_tilde, .. } => a_tilde,
        }
    }
}

fn stacked<T: Real>(snap: &SnapshotSet<T>) -> Result<(DMatrix<T>, &DMatrix<T>), ModelError> {
    let u = snap.u.as_ref().ok_or(ModelError::MissingInput)?;
    if u.ncols() != snap.x.ncols() {
        return Err(ModelError::DimensionMismatch(format!(
            "X has {} columns but U has {}",
            snap.x.ncols(),
            u.ncols()
        )));
    }
    let (m, n) = snap.x.shape();
    let ell = u.nrows();
    let mut omega = DMatrix::zeros(m + ell, n);
    omega.rows_mut(0, m).copy_from(&snap.x);
    omega.rows_mut(m, ell).copy_from(u);
    Ok((omega, u))
}

/// `G = X' Omega^+`, split column-wise into `A | B`.
pub fn fit_dmdc_full<T: Real>(
    snap: &SnapshotSet<T>,
    policy: RankPolicy,
) -> Result<DmdcModel<T>, ModelError> {
    let (omega, u) = stacked(snap)?;
    let m = snap.x.nrows();
    let ell = u.nrows();
    let f = truncated_svd(&omega, policy).map_err(map_zero)?;
    let g = pinv_core(&f, &snap.xp)? * f.left.transpose();
    let a = g.columns(0, m).into_owned();
    let b = g.columns(m, ell).into_owned();
    let fit_residual = (&snap.xp - &g * &omega).norm();
    Ok(DmdcModel {
        operators: DmdcOperators::Full { a, b },
        spec: snap.spec,
        rank_omega: f.rank(),
        rank_output: None,
        fit_residual,
    })
}

/// Projected fit with the output basis taken from the SVD of `X'`.
pub fn fit_dmdc_reduced<T: Real>(
    snap: &SnapshotSet<T>,
    policy_omega: RankPolicy,
    policy_out: RankPolicy,
) -> Result<DmdcModel<T>, ModelError> {
    let (omega, u) = stacked(snap)?;
    let m = snap.x.nrows();
    let ell = u.nrows();
    let f = truncated_svd(&omega, policy_omega).map_err(map_zero)?;
    let out = truncated_svd(&snap.xp, policy_out).map_err(map_zero)?;
    if let RankPolicy::Fixed(r) = policy_out {
        if r > out.rank() {
            warn!(
                "output rank {r} exceeds the rank of X' ({}); clipped",
                out.rank()
            );
        }
    }
    let basis = out.left;
    let ux = f.left.rows(0, m);
    let uu = f.left.rows(m, ell);
    // Uh^T X' V S^-1, shared by both operators
    let core = basis.transpose() * pinv_core(&f, &snap.xp)?;
    let a_tilde = &core * ux.transpose() * &basis;
    let b_tilde = &core * uu.transpose();

    let predicted = &basis * (&a_tilde * (basis.transpose() * &snap.x) + &b_tilde * u);
    let fit_residual = (&snap.xp - predicted).norm();
    Ok(DmdcModel {
        operators: DmdcOperators::Reduced {
            a_tilde,
            b_tilde,
            basis,
        },
        spec: snap.spec,
        rank_omega: f.rank(),
        rank_output: Some(out.singular_values.len()),
        fit_residual,
    })
}

pub fn fit_dmdc<T: Real>(
    snap: &SnapshotSet<T>,
    variant: DmdcVariant,
    policy_omega: RankPolicy,
    policy_out: RankPolicy,
) -> Result<DmdcModel<T>, ModelError> {
    match variant.resolve(snap.x.nrows()) {
        DmdcVariant::Reduced => fit_dmdc_reduced(snap, policy_omega, policy_out),
        _ => fit_dmdc_full(snap, policy_omega),
    }
}

pub fn spectrum<T: Real>(model: &DmdcModel<T>) -> Spectrum<T> {
    spectrum_of(model.state_operator(), 0)
}

impl<T: Real> Propagator<T> for DmdcModel<T> {
    fn embedding(&self) -> EmbeddingSpec {
        self.spec
    }

    fn input_dim(&self) -> usize {
        match &self.operators {
            DmdcOperators::Full { b, .. } => b.ncols(),
            DmdcOperators::Reduced { b_tilde, .. } => b_tilde.ncols(),
        }
    }

    fn encode(&self, x: &DVector<T>) -> DVector<T> {
        match &self.operators {
            DmdcOperators::Full { .. } => x.clone(),
            DmdcOperators::Reduced { basis, .. } => basis.tr_mul(x),
        }
    }

    fn advance(&self, z: &DVector<T>, u: Option<&DVector<T>>) -> DVector<T> {
        let (a, b) = match &self.operators {
            DmdcOperators::Full { a, b } => (a, b),
            DmdcOperators::Reduced {
                a_tilde, b_tilde, ..
            } => (a_tilde, b_tilde),
        };
        let mut next = a * z;
        if let Some(u) = u {
            next.gemv(T::one(), b, u, T::one());
        }
        next
    }

    fn decode(&self, z: &DVector<T>) -> DVector<T> {
        match &self.operators {
            DmdcOperators::Full { .. } => z.clone(),
            DmdcOperators::Reduced { basis, .. } => basis * z,
        }
    }

    fn decode_voltage(&self, z: &DVector<T>) -> T {
        match &self.operators {
            DmdcOperators::Full { .. } => z[z.len() - 1],
            DmdcOperators::Reduced { basis, .. } => basis.row(basis.nrows() - 1).transpose().dot(z),
        }
    }
}

/// States `[x0, x1, ..., x_steps]` with `x_{k+1} = A x_k + B u_k`, where
/// `u_k` is column `k` of `inputs` (`ell x steps`).
pub fn simulate_dmdc<T: Real>(
    model: &DmdcModel<T>,
    x0: &DVector<T>,
    inputs: &DMatrix<T>,
    steps: usize,
) -> Result<Vec<DVector<T>>, ModelError> {
    rollout_states(model, x0, Some(inputs), steps)
}

/// Applies a fixed model to another record: seeds the state from the record's
/// first `m` voltage samples, drives it with the record's current and scores
/// the forecast against the measured voltage.
pub fn transfer<T: Real>(
    model: &DmdcModel<T>,
    aged: &TimeSeries,
) -> Result<(TimeSeries, RssReport), ModelError> {
    transfer_with(model, aged)
}

pub(crate) fn transfer_with<T: Real, P: Propagator<T>>(
    model: &P,
    series: &TimeSeries,
) -> Result<(TimeSeries, RssReport), ModelError> {
    let needed = model.embedding().span() + 3;
    if series.len() < needed {
        return Err(ModelError::SeriesTooShort {
            len: series.len(),
            needed,
        });
    }
    let forecast = open_loop(model, series)?;
    let report = forecast.report(series, 0)?;
    Ok((forecast.to_series(series)?, report))
}
