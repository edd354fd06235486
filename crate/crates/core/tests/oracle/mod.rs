//! Independent reference computations for the test suites.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

/// One-sided Jacobi (Hestenes) SVD of `a`, singular values descending.
pub fn jacobi_svd(a: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    if a.nrows() < a.ncols() {
        let (u, s, v) = jacobi_svd(&a.transpose());
        return (v, s, u);
    }
    let (p, q) = a.shape();
    let mut w = a.clone();
    let mut v = DMatrix::<f64>::identity(q, q);
    for _sweep in 0..60 {
        let mut rotated = false;
        for j in 0..q {
            for k in j + 1..q {
                let alpha = w.column(j).norm_squared();
                let beta = w.column(k).norm_squared();
                let gamma = w.column(j).dot(&w.column(k));
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for m in [&mut w, &mut v] {
                    for r in 0..m.nrows() {
                        let (x, y) = (m[(r, j)], m[(r, k)]);
                        m[(r, j)] = c * x - s * y;
                        m[(r, k)] = s * x + c * y;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<usize> = (0..q).collect();
    let norms: Vec<f64> = (0..q).map(|j| w.column(j).norm()).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));
    let mut u = DMatrix::zeros(p, q);
    let mut vs = DMatrix::zeros(q, q);
    let mut s = Vec::with_capacity(q);
    for (dst, &src) in order.iter().enumerate() {
        let sigma = norms[src];
        s.push(sigma);
        if sigma > 0.0 {
            u.set_column(dst, &(w.column(src) / sigma));
        }
        vs.set_column(dst, &v.column(src));
    }
    (u, s, vs)
}

/// Moore-Penrose pseudoinverse from the Jacobi SVD, dropping singular values
/// below `max(p, q) * eps * sigma_max`.
pub fn reference_pinv(a: &DMatrix<f64>) -> DMatrix<f64> {
    let (u, s, v) = jacobi_svd(a);
    let tol = a.nrows().max(a.ncols()) as f64 * f64::EPSILON * s.first().copied().unwrap_or(0.0);
    let mut out = DMatrix::zeros(a.ncols(), a.nrows());
    for (k, &sigma) in s.iter().enumerate() {
        if sigma > tol {
            out += v.column(k) * u.column(k).transpose() / sigma;
        }
    }
    out
}

/// Two-RC cell parameters used by [`replay`]; kept separate from the crate's
/// own types so the oracle does not share code with the simulator.
#[derive(Debug, Clone, Copy)]
pub struct Circuit {
    pub capacity_ah: f64,
    pub r0: f64,
    pub r1: f64,
    pub c1: f64,
    pub r2: f64,
    pub c2: f64,
}

pub fn ocv(soc: f64) -> f64 {
    const KNOTS: [(f64, f64); 5] = [(0.0, 2.5), (0.1, 3.2), (0.5, 3.7), (0.9, 4.05), (1.0, 4.2)];
    if soc <= 0.0 {
        return 2.5;
    }
    if soc >= 1.0 {
        return 4.2;
    }
    for w in KNOTS.windows(2) {
        let ((s0, v0), (s1, v1)) = (w[0], w[1]);
        if soc <= s1 {
            return v0 + (v1 - v0) * (soc - s0) / (s1 - s0);
        }
    }
    unreachable!()
}

/// Terminal voltages obtained by holding each recorded current for one
/// interval and integrating with `substeps` RK4 steps per interval.
pub fn replay(circuit: Circuit, soc0: f64, dt: f64, current: &[f64], substeps: usize) -> Vec<f64> {
    let c = circuit;
    let f = |i: f64, x: [f64; 3]| -> [f64; 3] {
        [
            -i / (3600.0 * c.capacity_ah),
            -x[1] / (c.r1 * c.c1) + i / c.c1,
            -x[2] / (c.r2 * c.c2) + i / c.c2,
        ]
    };
    let add =
        |x: [f64; 3], h: f64, d: [f64; 3]| [x[0] + h * d[0], x[1] + h * d[1], x[2] + h * d[2]];
    let h = dt / substeps as f64;
    let mut x = [soc0, 0.0, 0.0];
    let mut out = Vec::with_capacity(current.len());
    for &i in current {
        out.push(ocv(x[0]) - i * c.r0 - x[1] - x[2]);
        for _ in 0..substeps {
            let k1 = f(i, x);
            let k2 = f(i, add(x, h / 2.0, k1));
            let k3 = f(i, add(x, h / 2.0, k2));
            let k4 = f(i, add(x, h, k3));
            for r in 0..3 {
                x[r] += h / 6.0 * (k1[r] + 2.0 * k2[r] + 2.0 * k3[r] + k4[r]);
            }
        }
    }
    out
}

/// Real part of `sum_j c_j lambda_j^k` for the given complex modes, which
/// must come in conjugate pairs for a real sequence.
/// `(amplitude, pole)` pair, both complex as `(re, im)`.
pub type Mode = ((f64, f64), (f64, f64));

pub fn modal_sequence(modes: &[Mode], len: usize) -> Vec<f64> {
    (0..len)
        .map(|k| {
            modes
                .iter()
                .map(|&((lr, li), (cr, ci))| {
                    let (mag, arg) = ((lr * lr + li * li).sqrt(), li.atan2(lr));
                    let (pr, pi) = (
                        mag.powi(k as i32) * (arg * k as f64).cos(),
                        mag.powi(k as i32) * (arg * k as f64).sin(),
                    );
                    cr * pr - ci * pi
                })
                .sum()
        })
        .collect()
}

/// Rolls `x_{k+1} = A x_k + B u_k` forward from `x0`, returning `x0..x_steps`.
pub fn state_space(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    x0: &DVector<f64>,
    u: &DMatrix<f64>,
) -> DMatrix<f64> {
    let steps = u.ncols();
    let mut x = DMatrix::zeros(a.nrows(), steps + 1);
    x.set_column(0, x0);
    for k in 0..steps {
        let next = a * x.column(k) + b * u.column(k);
        x.set_column(k + 1, &next);
    }
    x
}
