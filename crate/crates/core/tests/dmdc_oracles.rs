mod oracle;

use battdmd::dmd::eigenvalues;
use battdmd::dmdc::{fit_dmdc_full, fit_dmdc_reduced};
use battdmd::{DmdcOperators, RankPolicy, SnapshotSet};
use nalgebra::{DMatrix, DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_matrix(rng: &mut ChaCha8Rng, p: usize, q: usize) -> DMatrix<f64> {
    DMatrix::from_fn(p, q, |_, _| rng.random_range(-1.0..1.0))
}

fn stable(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let r = random_matrix(rng, n, n);
    let norm = r.norm();
    r * (0.9 / norm)
}

/// Fully observed trajectory of a random stable system driven by white input.
fn controlled_snapshots(
    seed: u64,
    n: usize,
    q: usize,
    len: usize,
) -> (DMatrix<f64>, DMatrix<f64>, SnapshotSet<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a0 = stable(&mut rng, n);
    let b0 = random_matrix(&mut rng, n, q);
    let u = random_matrix(&mut rng, q, len);
    let x0 = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    let x = oracle::state_space(&a0, &b0, &x0, &u);
    let snap = SnapshotSet::from_matrices(
        x.columns(0, len).into_owned(),
        x.columns(1, len).into_owned(),
        Some(u),
    )
    .unwrap();
    (a0, b0, snap)
}

fn sorted_eigs(a: &DMatrix<f64>) -> Vec<(f64, f64)> {
    let mut e: Vec<(f64, f64)> = eigenvalues(a).iter().map(|c| (c.re, c.im)).collect();
    e.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
    e
}

#[test]
fn reduced_spectrum_matches_generator() {
    for seed in 0..10 {
        let (a0, _, snap) = controlled_snapshots(seed, 3, 1, 200);
        let model = fit_dmdc_reduced(&snap, RankPolicy::default(), RankPolicy::Fixed(3)).unwrap();
        let DmdcOperators::Reduced {
            a_tilde,
            b_tilde,
            basis,
        } = &model.operators
        else {
            panic!("expected a reduced model");
        };
        assert_eq!(a_tilde.shape(), (3, 3));
        assert_eq!(b_tilde.shape(), (3, 1));
        assert!((basis.transpose() * basis - DMatrix::identity(3, 3)).norm() < 1e-10);
        for (x, y) in sorted_eigs(a_tilde).iter().zip(sorted_eigs(&a0)) {
            assert!(
                (x.0 - y.0).abs() < 1e-6 && (x.1 - y.1).abs() < 1e-6,
                "{x:?} vs {y:?}"
            );
        }
    }
}

#[test]
fn untruncated_reduced_fit_is_similar_to_full_fit() {
    for seed in 10..20 {
        let (_, _, snap) = controlled_snapshots(seed, 4, 2, 120);
        let full = fit_dmdc_full(&snap, RankPolicy::Fixed(6)).unwrap();
        let reduced = fit_dmdc_reduced(&snap, RankPolicy::Fixed(6), RankPolicy::Fixed(4)).unwrap();
        let (a, b) = full.full_operators();
        let DmdcOperators::Reduced {
            a_tilde,
            b_tilde,
            basis,
        } = &reduced.operators
        else {
            panic!("expected a reduced model");
        };
        assert!((basis * a_tilde * basis.transpose() - &a).norm() < 1e-8);
        assert!((basis * b_tilde - &b).norm() < 1e-8);
    }
}

/// Residual of the best fit `X' ~ w (a w^T X + b U)` for a fixed unit `w`.
fn projected_residual(
    w: &Vector3<f64>,
    x: &DMatrix<f64>,
    xp: &DMatrix<f64>,
    u: &DMatrix<f64>,
) -> f64 {
    let zp = w.transpose() * xp;
    let z = w.transpose() * x;
    // two-regressor least squares through the normal equations
    let (s11, s12, s22) = (z.dot(&z), z.dot(u), u.dot(u));
    let (t1, t2) = (z.dot(&zp), u.dot(&zp));
    let det = s11 * s22 - s12 * s12;
    let (a, b) = if det.abs() > 1e-14 * (s11 * s22).max(1e-300) {
        ((t1 * s22 - t2 * s12) / det, (s11 * t2 - s12 * t1) / det)
    } else {
        (0.0, t2 / s22)
    };
    let inner = (&zp - &z * a - u * b).norm_squared();
    (xp.norm_squared() - zp.norm_squared() + inner)
        .max(0.0)
        .sqrt()
}

#[test]
fn rank_one_reduced_fit_is_best_one_dimensional_projection() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let n = 40;
    let dir = Vector3::new(1.0, 2.0, -1.0).normalize();
    let s: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let u = DMatrix::from_fn(1, n, |_, _| rng.random_range(-1.0..1.0));
    let sp: Vec<f64> = (0..n)
        .map(|k| 0.7 * s[k] + 0.3 * u[(0, k)] + 0.05 * rng.random_range(-1.0..1.0))
        .collect();
    let x = DMatrix::from_fn(3, n, |i, k| dir[i] * s[k]);
    let xp = DMatrix::from_fn(3, n, |i, k| dir[i] * sp[k]);
    let snap = SnapshotSet::from_matrices(x.clone(), xp.clone(), Some(u.clone())).unwrap();
    let model = fit_dmdc_reduced(&snap, RankPolicy::default(), RankPolicy::Fixed(1)).unwrap();
    let DmdcOperators::Reduced { a_tilde, .. } = &model.operators else {
        panic!("expected a reduced model");
    };
    assert_eq!(a_tilde.shape(), (1, 1));

    let mut best = f64::INFINITY;
    let (nt, np) = (400, 800);
    for i in 0..=nt {
        let theta = std::f64::consts::PI * i as f64 / nt as f64;
        for j in 0..np {
            let phi = 2.0 * std::f64::consts::PI * j as f64 / np as f64;
            let w = Vector3::new(
                theta.sin() * phi.cos(),
                theta.sin() * phi.sin(),
                theta.cos(),
            );
            best = best.min(projected_residual(&w, &x, &xp, &u));
        }
    }
    let exact = projected_residual(&dir, &x, &xp, &u);
    assert!(model.fit_residual > 0.0);
    assert!(
        (model.fit_residual - exact).abs() < 1e-10,
        "{} vs {exact}",
        model.fit_residual
    );
    assert!(model.fit_residual <= best + 1e-10);
    assert!(best - model.fit_residual < 1e-3 * xp.norm());
}
