//! Small dense helpers shared by the oracles and the reference solvers.

use nalgebra::{DMatrix, DVector};

/// Largest eigenvalue of `AᵀA` by power iteration.
///
/// Iterates until the Rayleigh quotient stalls at relative precision `tol`
/// (the quotient is nondecreasing for a PSD operator).
pub fn power_iteration_ata(a: &DMatrix<f64>, tol: f64, max_iter: usize) -> f64 {
    let n = a.ncols();
    if n == 0 || a.nrows() == 0 {
        return 0.0;
    }
    // deterministic start with all components nonzero
    let mut v = DVector::from_fn(n, |i, _| 1.0 + 0.01 * ((i * 7919) % 97) as f64);
    v /= v.norm();
    let mut rq = 0.0;
    for _ in 0..max_iter {
        let av = a * &v;
        let w = a.tr_mul(&av);
        let next = v.dot(&w);
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / norm;
        if (next - rq).abs() <= tol * next.abs().max(f64::MIN_POSITIVE) {
            return next.max(rq);
        }
        rq = next;
    }
    rq
}

/// Smallest eigenvalue of `AᵀA`, computed by a symmetric eigendecomposition.
pub fn min_eigen_ata(a: &DMatrix<f64>) -> f64 {
    let ata = a.tr_mul(a);
    ata.symmetric_eigenvalues().min()
}

/// Largest Euclidean row norm of `a`.
pub fn max_row_norm(a: &DMatrix<f64>) -> f64 {
    a.row_iter().map(|r| r.norm()).fold(0.0, f64::max)
}

pub fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// `sign` with `sign(0) = 0`.
pub fn sign0(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Euclidean projection onto `{u ≥ 0, Σu = scale}` (sort-based).
pub fn project_simplex(v: &DVector<f64>, scale: f64) -> DVector<f64> {
    let mut sorted: Vec<f64> = v.iter().copied().collect();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (i, &s) in sorted.iter().enumerate() {
        cumsum += s;
        let t = (cumsum - scale) / (i + 1) as f64;
        if s - t > 0.0 {
            tau = t;
        }
    }
    v.map(|x| (x - tau).max(0.0))
}

/// Numerically stable `log Σ exp(z_i)`.
pub fn log_sum_exp(z: &DVector<f64>) -> f64 {
    let m = z.max();
    if !m.is_finite() {
        return m;
    }
    m + z.iter().map(|&v| (v - m).exp()).sum::<f64>().ln()
}

/// Least-squares slope of `ys` against `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    sxy / sxx
}

/// Log-log slope of `ys` against `xs`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    fit_slope(&lx, &ly)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_iteration_matches_eigendecomposition() {
        let a = DMatrix::from_fn(8, 5, |i, j| ((i * 3 + j * 5) % 7) as f64 - 3.0 + 0.1 * j as f64);
        let l = power_iteration_ata(&a, 1e-15, 100_000);
        let exact = a.tr_mul(&a).symmetric_eigenvalues().max();
        assert!((l - exact).abs() <= 1e-10 * exact);
    }

    #[test]
    fn simplex_projection_sums_to_scale() {
        let v = DVector::from_vec(vec![0.3, -1.0, 2.0, 0.7]);
        let p = project_simplex(&v, 2.0);
        assert!((p.sum() - 2.0).abs() < 1e-12);
        assert!(p.iter().all(|&x| x >= 0.0));
        // already feasible points are fixed
        let q = DVector::from_vec(vec![0.5, 0.5, 1.0]);
        assert!((project_simplex(&q, 2.0) - &q).norm() < 1e-14);
    }

    #[test]
    fn slope_of_power_law() {
        let xs = [1.0, 10.0, 100.0];
        let ys = [3.0, 300.0, 30000.0];
        assert!((loglog_slope(&xs, &ys) - 2.0).abs() < 1e-12);
    }
}
