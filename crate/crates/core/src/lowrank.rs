//! Truncated SVD and pseudoinverse application.
//!
//! Rectangular inputs are first reduced with a Householder QR of the long
//! side, so the SVD itself always runs on a `k x k` triangle with
//! `k = min(p, q)`. Factors are deterministic for a given input: singular
//! values are sorted non-increasing and each left singular vector is signed so
//! that its largest-magnitude entry is non-negative.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error, PartialEq)]
pub enum LowRankError {
    #[error("matrix has no retainable rank (all singular values are zero)")]
    ZeroMatrix,
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("matrix is empty ({0} x {1})")]
    Empty(usize, usize),
    #[error("SVD failed to converge")]
    NoConvergence,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid rank policy: {0}")]
    InvalidPolicy(String),
}

type Result<T> = std::result::Result<T, LowRankError>;

/// How many singular triplets to keep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "snake_case")]
pub enum RankPolicy {
    /// Keep `min(r, rank)` triplets.
    Fixed(usize),
    /// Keep every `sigma_k >= eps * sigma_1`.
    RelativeThreshold(f64),
    /// Smallest `r` whose leading singular values carry fraction `eta` of the
    /// squared Frobenius norm.
    Energy(f64),
}

impl RankPolicy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            RankPolicy::Fixed(0) => Err(LowRankError::InvalidPolicy(
                "fixed rank must be >= 1".into(),
            )),
            RankPolicy::RelativeThreshold(e) if !(e > 0.0 && e < 1.0) => Err(
                LowRankError::InvalidPolicy(format!("threshold must lie in (0, 1), got {e}")),
            ),
            RankPolicy::Energy(e) if !(e > 0.0 && e <= 1.0) => Err(LowRankError::InvalidPolicy(
                format!("energy fraction must lie in (0, 1], got {e}"),
            )),
            _ => Ok(()),
        }
    }
}

impl Default for RankPolicy {
    fn default() -> Self {
        RankPolicy::RelativeThreshold(1e-10)
    }
}

impl fmt::Display for RankPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RankPolicy::Fixed(r) => write!(f, "fixed:{r}"),
            RankPolicy::RelativeThreshold(e) => write!(f, "rel:{e:e}"),
            RankPolicy::Energy(e) => write!(f, "energy:{e}"),
        }
    }
}

impl FromStr for RankPolicy {
    type Err = LowRankError;

    /// Parses `fixed:<r>`, `rel:<eps>` (alias `relative_threshold`) or
    /// `energy:<eta>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || LowRankError::InvalidPolicy(format!("cannot parse rank policy `{s}`"));
        let (mode, value) = s.split_once(':').ok_or_else(bad)?;
        let policy = match mode.trim() {
            "fixed" => RankPolicy::Fixed(value.trim().parse().map_err(|_| bad())?),
            "rel" | "relative_threshold" => {
                RankPolicy::RelativeThreshold(value.trim().parse().map_err(|_| bad())?)
            }
            "energy" => RankPolicy::Energy(value.trim().parse().map_err(|_| bad())?),
            _ => return Err(bad()),
        };
        policy.validate()?;
        Ok(policy)
    }
}

/// Rank-`r` factorization `M ~ left * diag(singular_values) * right^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdFactor<T: Real> {
    /// `p x r`, orthonormal columns.
    pub left: DMatrix<T>,
    /// `r` values, non-increasing and positive.
    pub singular_values: DVector<T>,
    /// `q x r`, orthonormal columns.
    pub right: DMatrix<T>,
    /// Frobenius norm of the discarded singular values.
    pub tail_norm: T,
    /// Rank detected at working precision, before the policy was applied.
    pub numerical_rank: usize,
}

impl<T: Real> SvdFactor<T> {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    pub fn reconstruct(&self) -> DMatrix<T> {
        let mut us = self.left.clone();
        for (mut col, &s) in us.column_iter_mut().zip(self.singular_values.iter()) {
            col *= s;
        }
        us * self.right.transpose()
    }
}

/// Convergence thresholds tried in turn, as multiples of machine epsilon.
const SVD_EPS_LADDER: [f64; 4] = [5.0, 1.0, 50.0, 1000.0];

/// SVD of a square matrix that passes reconstruction and orthogonality
/// checks. nalgebra's solver can stop on wrong factors without reporting it,
/// and whether it does depends on the threshold and on transposition.
fn checked_square_svd<T: Real>(a: &DMatrix<T>) -> Result<(DMatrix<T>, DVector<T>, DMatrix<T>)> {
    let k = a.nrows();
    let eps = T::machine_epsilon();
    let bound = T::of(1e3 * k as f64) * eps;
    let scale = a.norm();
    let identity = DMatrix::<T>::identity(k, k);
    let accept = |u: &DMatrix<T>, s: &DVector<T>, v_t: &DMatrix<T>, target: &DMatrix<T>| {
        let rebuilt = u * DMatrix::from_diagonal(s) * v_t;
        (rebuilt - target).norm() <= bound * scale
            && (u.transpose() * u - &identity).norm() <= bound
            && (v_t * v_t.transpose() - &identity).norm() <= bound
    };
    for mult in SVD_EPS_LADDER {
        for transposed in [false, true] {
            let target = if transposed { a.transpose() } else { a.clone() };
            let Some(svd) = target
                .clone()
                .try_svd_unordered(true, true, eps * T::of(mult), 0)
            else {
                continue;
            };
            let (u, s, v_t) = (
                svd.u.expect("u requested"),
                svd.singular_values,
                svd.v_t.expect("v_t requested"),
            );
            if accept(&u, &s, &v_t, &target) {
                // a^T = U S V^T  =>  a = V S U^T
                return Ok(if transposed {
                    (v_t.transpose(), s, u)
                } else {
                    (u, s, v_t.transpose())
                });
            }
        }
    }
    Err(LowRankError::NoConvergence)
}

/// Thin SVD `(U, s, V)` with `k = min(p, q)` columns, unsorted.
fn thin_svd<T: Real>(m: &DMatrix<T>) -> Result<(DMatrix<T>, DVector<T>, DMatrix<T>)> {
    let (p, q) = m.shape();
    let square_svd = |a: DMatrix<T>| checked_square_svd(&a);
    if p > q {
        // M = Q R, R = Ur S Vr^T
        let qr = m.clone().qr();
        let (ur, s, vr) = square_svd(qr.r())?;
        Ok((qr.q() * ur, s, vr))
    } else if q > p {
        // M^T = Q R  =>  M = Vr S (Q Ur)^T
        let qr = m.transpose().qr();
        let (ur, s, vr) = square_svd(qr.r())?;
        Ok((vr, s, qr.q() * ur))
    } else {
        square_svd(m.clone())
    }
}

/// Number of leading values kept by `policy`, given sorted values.
fn select_rank<T: Real>(sigma: &[T], numerical_rank: usize, policy: RankPolicy) -> usize {
    let s1 = sigma[0];
    let r = match policy {
        RankPolicy::Fixed(r) => r,
        RankPolicy::RelativeThreshold(eps) => {
            let cut = s1 * T::of(eps);
            sigma.iter().take_while(|&&s| s >= cut).count()
        }
        RankPolicy::Energy(eta) => {
            let total = sigma.iter().fold(T::zero(), |acc, &s| acc + s * s);
            let target = total * T::of(eta);
            let mut acc = T::zero();
            let mut r = sigma.len();
            for (k, &s) in sigma.iter().enumerate() {
                acc += s * s;
                if acc >= target {
                    r = k + 1;
                    break;
                }
            }
            r
        }
    };
    r.clamp(1, numerical_rank.max(1))
}

pub fn truncated_svd<T: Real>(m: &DMatrix<T>, policy: RankPolicy) -> Result<SvdFactor<T>> {
    policy.validate()?;
    let (p, q) = m.shape();
    if p == 0 || q == 0 {
        return Err(LowRankError::Empty(p, q));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(LowRankError::NonFinite);
    }

    let (u, s, v) = thin_svd(m)?;
    let mut order: Vec<usize> = (0..s.len()).collect();
    // stable sort keeps the factorization deterministic on ties
    order.sort_by(|&a, &b| s[b].partial_cmp(&s[a]).expect("finite singular values"));
    let sigma: Vec<T> = order.iter().map(|&k| s[k]).collect();

    let s1 = sigma[0];
    if s1 <= T::zero() {
        return Err(LowRankError::ZeroMatrix);
    }
    let tol = s1 * T::of(p.max(q) as f64) * T::machine_epsilon();
    let numerical_rank = sigma.iter().filter(|&&x| x > tol).count();
    let r = select_rank(&sigma, numerical_rank, policy);

    let mut left = DMatrix::zeros(p, r);
    let mut right = DMatrix::zeros(q, r);
    for (dst, &src) in order.iter().take(r).enumerate() {
        let ucol = u.column(src);
        let pivot = ucol
            .iter()
            .enumerate()
            .fold((0, T::zero()), |best, (idx, &x)| {
                if x.abs() > best.1 {
                    (idx, x.abs())
                } else {
                    best
                }
            })
            .0;
        let sign = if ucol[pivot] < T::zero() {
            -T::one()
        } else {
            T::one()
        };
        left.set_column(dst, &(ucol * sign));
        right.set_column(dst, &(v.column(src) * sign));
    }
    let tail_norm = sigma[r..]
        .iter()
        .fold(T::zero(), |acc, &x| acc + x * x)
        .sqrt();

    Ok(SvdFactor {
        left,
        singular_values: DVector::from_column_slice(&sigma[..r]),
        right,
        tail_norm,
        numerical_rank,
    })
}

/// `m2 * V * diag(1/s) * U^T`, i.e. `m2` times the rank-`r` pseudoinverse of
/// the factored matrix.
pub fn pinv_apply<T: Real>(f: &SvdFactor<T>, m2: &DMatrix<T>) -> Result<DMatrix<T>> {
    Ok(pinv_core(f, m2)? * f.left.transpose())
}

/// `m2 * V * diag(1/s)`, the shared prefix of every pseudoinverse product.
pub(crate) fn pinv_core<T: Real>(f: &SvdFactor<T>, m2: &DMatrix<T>) -> Result<DMatrix<T>> {
    if m2.ncols() != f.right.nrows() {
        return Err(LowRankError::DimensionMismatch(format!(
            "operand has {} columns but the factored matrix has {}",
            m2.ncols(),
            f.right.nrows()
        )));
    }
    let mut core = m2 * &f.right;
    for (mut col, &s) in core.column_iter_mut().zip(f.singular_values.iter()) {
        col /= s;
    }
    Ok(core)
}
