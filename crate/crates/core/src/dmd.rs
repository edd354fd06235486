//! Autonomous best-fit operator `A = X' X^+` on Hankel snapshots.

use nalgebra::{Complex, ComplexField, DMatrix, DVector};

use crate::embedding::{EmbeddingSpec, SnapshotSet};
use crate::error::ModelError;
use crate::evalsweep::RssReport;
use crate::forecast::{rollout_states, Propagator};
use crate::lowrank::{pinv_apply, truncated_svd, LowRankError, RankPolicy};
use crate::scalar::Real;
use crate::timeseries::TimeSeries;

#[derive(Debug, Clone, PartialEq)]
pub struct DmdModel<T: Real> {
    /// `m x m` state-transition matrix.
    pub a: DMatrix<T>,
    pub spec: EmbeddingSpec,
    /// `||X' - A X||_F` on the training snapshots.
    pub fit_residual: T,
    pub rank_used: usize,
}

/// Poles of a state-transition matrix, sorted by descending magnitude.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum<T: Real> {
    pub eigenvalues: Vec<Complex<T>>,
    /// Unit-norm eigenvectors for the leading eigenvalues, if requested.
    pub modes: Vec<DVector<Complex<T>>>,
}

impl<T: Real> Spectrum<T> {
    pub fn spectral_radius(&self) -> T {
        self.eigenvalues.first().map_or(T::zero(), |l| l.modulus())
    }
}

pub(crate) fn map_zero(e: LowRankError) -> ModelError {
    match e {
        LowRankError::ZeroMatrix => ModelError::DegenerateSnapshots,
        other => other.into(),
    }
}

pub fn fit_dmd<T: Real>(
    snap: &SnapshotSet<T>,
    policy: RankPolicy,
) -> Result<DmdModel<T>, ModelError> {
    if snap.u.is_some() {
        return Err(ModelError::UnexpectedInput);
    }
    let f = truncated_svd(&snap.x, policy).map_err(map_zero)?;
    let a = pinv_apply(&f, &snap.xp)?;
    let fit_residual = (&snap.xp - &a * &snap.x).norm();
    Ok(DmdModel {
        a,
        spec: snap.spec,
        fit_residual,
        rank_used: f.rank(),
    })
}

/// Eigenvalues of `a` sorted by descending magnitude, conjugate pairs adjacent
/// with the positive imaginary part first.
pub fn eigenvalues<T: Real>(a: &DMatrix<T>) -> Vec<Complex<T>> {
    let mut eig: Vec<Complex<T>> = a.complex_eigenvalues().iter().cloned().collect();
    // snap numerically real eigenvalues onto the real axis
    for l in eig.iter_mut() {
        if l.im.abs() <= T::machine_epsilon() * l.re.abs() {
            l.im = T::zero();
        }
    }
    eig.sort_by(|a, b| {
        b.modulus()
            .partial_cmp(&a.modulus())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(b.im.partial_cmp(&a.im).unwrap_or(std::cmp::Ordering::Equal))
    });
    eig
}

/// Eigenvector for `lambda` by shifted inverse iteration in complex arithmetic.
pub fn eigenvector<T: Real>(a: &DMatrix<T>, lambda: Complex<T>) -> Option<DVector<Complex<T>>> {
    let n = a.nrows();
    let scale = a.norm().max(T::one());
    let delta = scale * T::of(1e-10);
    let shift = lambda + Complex::new(delta, delta);
    let shifted = DMatrix::from_fn(n, n, |i, j| {
        let d = if i == j {
            shift
        } else {
            Complex::new(T::zero(), T::zero())
        };
        Complex::new(a[(i, j)], T::zero()) - d
    });
    let lu = shifted.lu();
    let mut v = DVector::from_element(n, Complex::new(T::one(), T::zero()));
    for _ in 0..4 {
        let w = lu.solve(&v)?;
        let norm = w.norm();
        if !norm.is_finite() || norm == T::zero() {
            return None;
        }
        v = w.unscale(norm);
    }
    // fix the phase so the largest entry is real and positive
    let (idx, _) = v.iter().enumerate().fold((0, T::zero()), |best, (k, c)| {
        if c.modulus() > best.1 {
            (k, c.modulus())
        } else {
            best
        }
    });
    let phase = v[idx].unscale(v[idx].modulus()).conj();
    Some(v.map(|c| c * phase))
}

/// Spectrum with eigenvectors for the `modes` leading poles.
pub fn spectrum_of<T: Real>(a: &DMatrix<T>, modes: usize) -> Spectrum<T> {
    let eigenvalues = eigenvalues(a);
    let modes = eigenvalues
        .iter()
        .take(modes)
        .filter_map(|&l| eigenvector(a, l))
        .collect();
    Spectrum { eigenvalues, modes }
}

pub fn spectrum<T: Real>(model: &DmdModel<T>) -> Spectrum<T> {
    spectrum_of(&model.a, 0)
}

impl<T: Real> Propagator<T> for DmdModel<T> {
    fn embedding(&self) -> EmbeddingSpec {
        self.spec
    }

    fn input_dim(&self) -> usize {
        0
    }

    fn encode(&self, x: &DVector<T>) -> DVector<T> {
        x.clone()
    }

    fn advance(&self, z: &DVector<T>, _u: Option<&DVector<T>>) -> DVector<T> {
        &self.a * z
    }

    fn decode(&self, z: &DVector<T>) -> DVector<T> {
        z.clone()
    }

    fn decode_voltage(&self, z: &DVector<T>) -> T {
        z[z.len() - 1]
    }
}

/// `[x0, A x0, ..., A^steps x0]`.
pub fn simulate_dmd<T: Real>(
    model: &DmdModel<T>,
    x0: &DVector<T>,
    steps: usize,
) -> Result<Vec<DVector<T>>, ModelError> {
    rollout_states(model, x0, None, steps)
}

/// Runs a fixed model on another record, seeded from that record's own
/// first `m` voltage samples.
pub fn transfer<T: Real>(
    model: &DmdModel<T>,
    series: &TimeSeries,
) -> Result<(TimeSeries, RssReport), ModelError> {
    crate::dmdc::transfer_with(model, series)
}
