//! Smoothing of bilinear saddle functions `f(x) = max_{y∈Y} ⟨Ax, y⟩ − J(y)`
//! and the smoothed stochastic sliding driver.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SlideError};
use crate::linalg::{log_sum_exp, max_row_norm, power_iteration_ata};
use crate::oracles::{CompositeProblem, DualBlock, PolyhedralTerm, SmoothFunction};
use crate::prox::GeometryKind;
use crate::run::{RunOptions, RunRecord};
use crate::schedule::{default_d_tilde_stochastic, SlidingSchedule};
use crate::sliding::gs_run;
use crate::stochastic::sgs_run;
use crate::stream::StreamKey;

/// The dual set `Y` with its prox term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DualDomain {
    /// `‖y‖₂ ≤ r` with `v(y) = ½‖y‖²` (ν′ = 1).
    Ball { radius: f64 },
    /// The unit simplex with the entropy (ν′ = 1 w.r.t. ‖·‖₁).
    Simplex,
}

/// `f(x) = max_{y∈Y} ⟨Ax − b, y⟩` and its smooth approximation
/// `f_η(x) = max_{y∈Y} ⟨Ax − b, y⟩ − η d(y)`.
#[derive(Debug, Clone)]
pub struct SaddleSmoother {
    a: DMatrix<f64>,
    b: Option<DVector<f64>>,
    domain: DualDomain,
    primal: GeometryKind,
    a_norm: f64,
    eta: f64,
}

impl SaddleSmoother {
    /// `b = None` means `J = 0`; otherwise `J(y) = ⟨b, y⟩`.
    pub fn new(
        a: DMatrix<f64>,
        b: Option<DVector<f64>>,
        domain: DualDomain,
        primal: GeometryKind,
        eta: f64,
    ) -> Result<Self> {
        if a.nrows() == 0 || a.ncols() == 0 {
            return Err(SlideError::param("A", "must be nonempty"));
        }
        if let Some(b) = &b {
            if b.len() != a.nrows() {
                return Err(SlideError::DimensionMismatch {
                    expected: a.nrows(),
                    got: b.len(),
                });
            }
        }
        if let DualDomain::Ball { radius } = domain {
            if !(radius > 0.0) || !radius.is_finite() {
                return Err(SlideError::param("radius", "must be positive and finite"));
            }
        }
        if a.iter().chain(b.iter().flat_map(|b| b.iter())).any(|v| !v.is_finite()) {
            return Err(SlideError::NonFinite("saddle data"));
        }
        let a_norm = operator_norm(&a, primal, domain);
        let s = SaddleSmoother {
            a,
            b,
            domain,
            primal,
            a_norm,
            eta: 1.0,
        };
        s.with_eta(eta)
    }

    pub fn with_eta(mut self, eta: f64) -> Result<Self> {
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(SlideError::param("eta", "must be positive and finite"));
        }
        self.eta = eta;
        Ok(self)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn domain(&self) -> DualDomain {
        self.domain
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn primal_kind(&self) -> GeometryKind {
        self.primal
    }

    /// Induced norm of `A` from the primal norm to the dual norm of `Y`.
    pub fn operator_norm(&self) -> f64 {
        self.a_norm
    }

    pub fn dual_modulus(&self) -> f64 {
        1.0
    }

    /// `D_Y = max_Y d`.
    pub fn dual_range(&self) -> f64 {
        match self.domain {
            DualDomain::Ball { radius } => 0.5 * radius * radius,
            DualDomain::Simplex => (self.a.nrows() as f64).ln(),
        }
    }

    /// `c_v = argmin_Y v`.
    pub fn dual_center(&self) -> DVector<f64> {
        let m = self.a.nrows();
        match self.domain {
            DualDomain::Ball { .. } => DVector::zeros(m),
            DualDomain::Simplex => DVector::from_element(m, 1.0 / m as f64),
        }
    }

    /// `d(y) = v(y) − v(c_v) − ⟨∇v(c_v), y − c_v⟩`.
    pub fn dual_distance(&self, y: &DVector<f64>) -> f64 {
        match self.domain {
            DualDomain::Ball { .. } => 0.5 * y.norm_squared(),
            DualDomain::Simplex => {
                let m = y.len() as f64;
                y.iter()
                    .filter(|&&v| v > 0.0)
                    .map(|&v| v * (v * m).ln())
                    .sum()
            }
        }
    }

    /// `L_η = ‖A‖²/(ην′)`.
    pub fn smoothed_lipschitz(&self) -> f64 {
        self.a_norm * self.a_norm / (self.eta * self.dual_modulus())
    }

    fn shifted(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut v = &self.a * x;
        if let Some(b) = &self.b {
            v -= b;
        }
        v
    }

    /// `f(x)` by the exact maximum over `Y`.
    pub fn exact_value(&self, x: &DVector<f64>) -> f64 {
        let v = self.shifted(x);
        match self.domain {
            DualDomain::Ball { radius } => radius * v.norm(),
            DualDomain::Simplex => v.max(),
        }
    }

    /// `(f_η(x), ∇f_η(x), y_η(x))`.
    pub fn smoothed_value_grad(&self, x: &DVector<f64>) -> (f64, DVector<f64>, DVector<f64>) {
        let v = self.shifted(x);
        let eta = self.eta;
        let (value, y) = match self.domain {
            DualDomain::Ball { radius } => {
                let mut y = &v / eta;
                let ny = y.norm();
                if ny > radius {
                    y *= radius / ny;
                }
                let value = v.dot(&y) - 0.5 * eta * y.norm_squared();
                (value, y)
            }
            DualDomain::Simplex => {
                let z = &v / eta;
                let lse = log_sum_exp(&z);
                let y = z.map(|zi| (zi - lse).exp());
                let value = eta * (lse - (v.len() as f64).ln());
                (value, y)
            }
        };
        (value, self.a.tr_mul(&y), y)
    }

    /// `f` as `max_{w∈W} ⟨Ax − b, w⟩` for the reference solver.
    pub fn as_polyhedral(&self) -> PolyhedralTerm {
        let m = self.a.nrows();
        let block = match self.domain {
            DualDomain::Ball { radius } => DualBlock::Ball {
                start: 0,
                len: m,
                radius,
            },
            DualDomain::Simplex => DualBlock::Simplex {
                start: 0,
                len: m,
                scale: 1.0,
            },
        };
        PolyhedralTerm {
            c: self.a.clone(),
            d: self.b.clone().unwrap_or_else(|| DVector::zeros(m)),
            blocks: vec![block],
        }
    }
}

fn operator_norm(a: &DMatrix<f64>, primal: GeometryKind, domain: DualDomain) -> f64 {
    let col_max = |p: f64| {
        a.column_iter()
            .map(|c| c.iter().map(|v| v.abs().powf(p)).sum::<f64>().powf(1.0 / p))
            .fold(0.0, f64::max)
    };
    match (primal, domain) {
        (GeometryKind::Euclidean, DualDomain::Ball { .. }) => {
            power_iteration_ata(a, 1e-10, 100_000).sqrt()
        }
        // ℓ2 → ℓ∞
        (GeometryKind::Euclidean, DualDomain::Simplex) => max_row_norm(a),
        // ℓ1 → ℓ2
        (GeometryKind::EntropySimplex, DualDomain::Ball { .. }) => col_max(2.0),
        // ℓ1 → ℓ∞
        (GeometryKind::EntropySimplex, DualDomain::Simplex) => a.amax(),
    }
}

impl SmoothFunction for SaddleSmoother {
    fn dim(&self) -> usize {
        self.a.ncols()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        self.smoothed_value_grad(x).0
    }

    fn gradient_into(&self, x: &DVector<f64>, out: &mut DVector<f64>) {
        let (_, g, _) = self.smoothed_value_grad(x);
        out.copy_from(&g);
    }

    fn lipschitz(&self) -> f64 {
        self.smoothed_lipschitz()
    }

    fn target_value(&self, x: &DVector<f64>) -> f64 {
        self.exact_value(x)
    }

    fn operator_applications(&self) -> u64 {
        2
    }

    fn as_saddle(&self) -> Option<&SaddleSmoother> {
        Some(self)
    }
}

/// `η = (2‖A‖/N)·√(3D_X/(νν′D_Y))`.
pub fn choose_eta(a_norm: f64, n: usize, d_x: f64, d_y: f64, nu: f64, nu_dual: f64) -> Result<f64> {
    for (name, v) in [
        ("A_norm", a_norm),
        ("D_X", d_x),
        ("D_Y", d_y),
        ("nu", nu),
        ("nu_dual", nu_dual),
    ] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(SlideError::param(name, "must be positive and finite"));
        }
    }
    if n == 0 {
        return Err(SlideError::param("N", "must be at least 1"));
    }
    Ok(2.0 * a_norm / n as f64 * (3.0 * d_x / (nu * nu_dual * d_y)).sqrt())
}

/// `4√3‖A‖√(D_X D_Y)/(√(νν′)N)`.
pub fn smoothing_bound(a_norm: f64, n: usize, d_x: f64, d_y: f64, nu: f64, nu_dual: f64) -> f64 {
    4.0 * 3f64.sqrt() * a_norm * (d_x * d_y).sqrt() / ((nu * nu_dual).sqrt() * n as f64)
}

/// The smoothing level used by [`ssgs_run`] for a horizon of `n`.
pub fn smoothing_level(problem: &CompositeProblem, n: usize) -> Result<f64> {
    let s = saddle_of(problem)?;
    choose_eta(
        s.operator_norm(),
        n,
        problem.diameter()?,
        s.dual_range(),
        problem.modulus(),
        s.dual_modulus(),
    )
}

fn saddle_of(problem: &CompositeProblem) -> Result<&SaddleSmoother> {
    problem
        .smooth()
        .as_saddle()
        .ok_or_else(|| SlideError::Unsupported("f is not a saddle function".into()))
}

/// Smoothing stochastic gradient sliding: SGS with `f_η` for the `η` of
/// [`choose_eta`] and `D̃ = 3D_X/(4ν)` unless given. Without a stochastic
/// oracle the exact subgradient is used.
pub fn ssgs_run(
    problem: &CompositeProblem,
    n: usize,
    d_tilde: Option<f64>,
    seed: u64,
    options: &RunOptions,
) -> Result<RunRecord> {
    let s = saddle_of(problem)?;
    let d_x = problem.diameter()?;
    let nu = problem.modulus();
    let eta = smoothing_level(problem, n)?;
    let smoothed = s.clone().with_eta(eta)?;
    let l_eta = smoothed.smoothed_lipschitz();
    let p = problem.with_smooth(Arc::new(smoothed))?;
    let d_tilde = d_tilde.unwrap_or_else(|| default_d_tilde_stochastic(d_x, nu));
    let schedule =
        SlidingSchedule::stochastic_fixed_horizon(l_eta, p.nonsmooth_bound(), p.sigma(), nu, n, d_tilde)?;
    let mut rec = if p.stochastic().is_some() {
        sgs_run(&p, &schedule, n, StreamKey::new(seed), options)?
    } else {
        let mut r = gs_run(&p, &schedule, n, options)?;
        r.seed = Some(seed);
        r
    };
    rec.algorithm = "ssgs".into();
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eta_formula() {
        let e = choose_eta(1.0, 2, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert!((e - 3f64.sqrt()).abs() < 1e-15);
        let e4 = choose_eta(1.0, 4, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert!((e4 - e / 2.0).abs() < 1e-15);
        assert!(choose_eta(0.0, 2, 1.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn ball_at_origin() {
        let s = SaddleSmoother::new(
            DMatrix::identity(2, 2),
            None,
            DualDomain::Ball { radius: 1.0 },
            GeometryKind::Euclidean,
            0.3,
        )
        .unwrap();
        let (v, g, y) = s.smoothed_value_grad(&DVector::zeros(2));
        assert_eq!(v, 0.0);
        assert_eq!(g.norm(), 0.0);
        assert_eq!(y.norm(), 0.0);
    }

    #[test]
    fn heavy_smoothing_collapses_to_center() {
        let s = SaddleSmoother::new(
            DMatrix::identity(2, 2),
            None,
            DualDomain::Ball { radius: 1.0 },
            GeometryKind::Euclidean,
            1e9,
        )
        .unwrap();
        let (v, _, y) = s.smoothed_value_grad(&DVector::from_vec(vec![0.7, -0.2]));
        assert!(v.abs() < 1e-9);
        assert!(y.norm() < 1e-9);
    }

    #[test]
    fn simplex_range_and_center() {
        let s = SaddleSmoother::new(
            DMatrix::identity(4, 4),
            None,
            DualDomain::Simplex,
            GeometryKind::Euclidean,
            1.0,
        )
        .unwrap();
        let c = s.dual_center();
        assert!(s.dual_distance(&c).abs() < 1e-15);
        let vertex = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
        assert!((s.dual_distance(&vertex) - 4f64.ln()).abs() < 1e-15);
        assert!((s.dual_range() - 4f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn induced_norms() {
        let a = DMatrix::from_row_slice(2, 2, &[3.0, 4.0, 0.0, 1.0]);
        let n = |p, d| operator_norm(&a, p, d);
        assert!((n(GeometryKind::Euclidean, DualDomain::Simplex) - 5.0).abs() < 1e-15);
        assert!((n(GeometryKind::EntropySimplex, DualDomain::Simplex) - 4.0).abs() < 1e-15);
        let col = 17f64.sqrt();
        assert!((n(GeometryKind::EntropySimplex, DualDomain::Ball { radius: 1.0 }) - col).abs() < 1e-12);
    }
}
