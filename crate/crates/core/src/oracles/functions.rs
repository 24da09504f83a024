use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};

use super::reference::{DualBlock, PolyhedralTerm};
use super::{NonsmoothFunction, SmoothFunction, StochasticSubgradient};
use crate::error::{Result, SlideError};
use crate::linalg::{min_eigen_ata, power_iteration_ata, sign0};
use crate::prox::{GeometryKind, SimpleTerm};

pub const POWER_TOL: f64 = 1e-10;
const POWER_MAX_ITER: usize = 100_000;

/// `f(x) = c·½‖Ax − b‖² + (μ/2)‖x‖²`.
#[derive(Debug, Clone)]
pub struct QuadraticLoss {
    a: DMatrix<f64>,
    b: DVector<f64>,
    scale: f64,
    mu: f64,
    lambda_max: f64,
    lambda_min: f64,
}

impl QuadraticLoss {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(SlideError::DimensionMismatch {
                expected: a.nrows(),
                got: b.len(),
            });
        }
        if a.ncols() == 0 {
            return Err(SlideError::param("dimension", "must be positive"));
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(SlideError::NonFinite("quadratic data"));
        }
        let lambda_max = power_iteration_ata(&a, POWER_TOL, POWER_MAX_ITER);
        let lambda_min = min_eigen_ata(&a).max(0.0);
        Ok(QuadraticLoss {
            a,
            b,
            scale: 1.0,
            mu: 0.0,
            lambda_max,
            lambda_min,
        })
    }

    pub fn with_scale(mut self, scale: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(SlideError::param("scale", "must be positive and finite"));
        }
        self.scale = scale;
        Ok(self)
    }

    pub fn with_mu(mut self, mu: f64) -> Result<Self> {
        if !(mu >= 0.0) || !mu.is_finite() {
            return Err(SlideError::param("mu", "must be finite and nonnegative"));
        }
        self.mu = mu;
        Ok(self)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn rhs(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// `λ_max(AᵀA)` from power iteration.
    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    /// Strong convexity modulus including the curvature of `AᵀA`, slightly
    /// deflated so that it stays a valid lower bound.
    pub fn curvature_floor(&self) -> f64 {
        let spectral = self.scale * self.lambda_min;
        let slack = 1e-9 * self.scale * self.lambda_max;
        (spectral - slack).max(0.0) + self.mu
    }
}

impl SmoothFunction for QuadraticLoss {
    fn dim(&self) -> usize {
        self.a.ncols()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        let r = &self.a * x - &self.b;
        0.5 * self.scale * r.norm_squared() + 0.5 * self.mu * x.norm_squared()
    }

    fn gradient_into(&self, x: &DVector<f64>, out: &mut DVector<f64>) {
        let r = &self.a * x - &self.b;
        out.gemv_tr(self.scale, &self.a, &r, 0.0);
        if self.mu != 0.0 {
            out.axpy(self.mu, x, 1.0);
        }
    }

    fn lipschitz(&self) -> f64 {
        self.scale * self.lambda_max + self.mu
    }

    fn strong_convexity(&self) -> f64 {
        self.mu
    }

    fn as_quadratic(&self) -> Option<&QuadraticLoss> {
        Some(self)
    }
}

/// The zero function, usable for either component.
#[derive(Debug, Clone)]
pub struct ZeroFunction {
    dim: usize,
    lipschitz: f64,
}

impl ZeroFunction {
    /// `lipschitz` is the constant reported for the smooth role; any positive
    /// value is a valid bound.
    pub fn new(dim: usize, lipschitz: f64) -> Self {
        ZeroFunction { dim, lipschitz }
    }
}

impl SmoothFunction for ZeroFunction {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, _x: &DVector<f64>) -> f64 {
        0.0
    }

    fn gradient_into(&self, _x: &DVector<f64>, out: &mut DVector<f64>) {
        out.fill(0.0);
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
}

impl NonsmoothFunction for ZeroFunction {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, _x: &DVector<f64>) -> f64 {
        0.0
    }

    fn subgradient_into(&self, _x: &DVector<f64>, out: &mut DVector<f64>) {
        out.fill(0.0);
    }

    fn bound(&self) -> f64 {
        0.0
    }

    fn as_simple_term(&self) -> Option<SimpleTerm> {
        Some(SimpleTerm::Zero)
    }
}

/// `h(x) = λ‖Bx‖₁` (`B = I` when no operator is given).
#[derive(Debug, Clone)]
pub struct L1Norm {
    dim: usize,
    lambda: f64,
    op: Option<DMatrix<f64>>,
    bound: f64,
}

impl L1Norm {
    pub fn new(dim: usize, lambda: f64, kind: GeometryKind) -> Result<Self> {
        check_lambda(lambda)?;
        // ‖h'‖_* ≤ λ‖sign‖_*, and the linearization error is at most twice that
        let dual = match kind {
            GeometryKind::Euclidean => (dim as f64).sqrt(),
            GeometryKind::EntropySimplex => 1.0,
        };
        Ok(L1Norm {
            dim,
            lambda,
            op: None,
            bound: 2.0 * lambda * dual,
        })
    }

    /// `λ‖Bx‖₁` under the Euclidean geometry.
    pub fn with_operator(op: DMatrix<f64>, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        let p = op.nrows() as f64;
        let spectral = power_iteration_ata(&op, POWER_TOL, POWER_MAX_ITER).sqrt();
        Ok(L1Norm {
            dim: op.ncols(),
            lambda,
            bound: 2.0 * lambda * p.sqrt() * spectral,
            op: Some(op),
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(SlideError::param("lambda", "must be finite and nonnegative"));
    }
    Ok(())
}

impl NonsmoothFunction for L1Norm {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        match &self.op {
            None => self.lambda * x.lp_norm(1),
            Some(b) => self.lambda * (b * x).lp_norm(1),
        }
    }

    fn subgradient_into(&self, x: &DVector<f64>, out: &mut DVector<f64>) {
        match &self.op {
            None => {
                for (o, v) in out.iter_mut().zip(x.iter()) {
                    *o = self.lambda * sign0(*v);
                }
            }
            Some(b) => {
                let s = (b * x).map(sign0);
                out.gemv_tr(self.lambda, b, &s, 0.0);
            }
        }
    }

    fn bound(&self) -> f64 {
        self.bound
    }

    fn as_simple_term(&self) -> Option<SimpleTerm> {
        match self.op {
            None => Some(SimpleTerm::L1(self.lambda)),
            Some(_) => None,
        }
    }

    fn as_polyhedral(&self) -> Option<PolyhedralTerm> {
        let c = self
            .op
            .clone()
            .unwrap_or_else(|| DMatrix::identity(self.dim, self.dim));
        let rows = c.nrows();
        Some(PolyhedralTerm {
            c,
            d: DVector::zeros(rows),
            blocks: vec![DualBlock::Box {
                start: 0,
                len: rows,
                bound: self.lambda,
            }],
        })
    }
}

/// `h(x) = (1/K) Σᵢ |⟨cᵢ, x⟩ − dᵢ|`, the empirical version of `E|⟨a(ξ),x⟩ − b(ξ)|`.
#[derive(Debug, Clone)]
pub struct AbsLossSum {
    c: DMatrix<f64>,
    d: DVector<f64>,
    max_row: f64,
}

impl AbsLossSum {
    pub fn new(c: DMatrix<f64>, d: DVector<f64>) -> Result<Self> {
        if c.nrows() != d.len() {
            return Err(SlideError::DimensionMismatch {
                expected: c.nrows(),
                got: d.len(),
            });
        }
        if c.nrows() == 0 {
            return Err(SlideError::param("samples", "must be positive"));
        }
        let max_row = crate::linalg::max_row_norm(&c);
        Ok(AbsLossSum { c, d, max_row })
    }

    pub fn samples(&self) -> usize {
        self.c.nrows()
    }

    pub fn max_row_norm(&self) -> f64 {
        self.max_row
    }

    fn residual(&self, i: usize, x: &DVector<f64>) -> f64 {
        self.c.row(i).transpose().dot(x) - self.d[i]
    }
}

impl NonsmoothFunction for AbsLossSum {
    fn dim(&self) -> usize {
        self.c.ncols()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        (&self.c * x - &self.d).lp_norm(1) / self.samples() as f64
    }

    fn subgradient_into(&self, x: &DVector<f64>, out: &mut DVector<f64>) {
        let s = (&self.c * x - &self.d).map(sign0);
        out.gemv_tr(1.0 / self.samples() as f64, &self.c, &s, 0.0);
    }

    fn bound(&self) -> f64 {
        2.0 * self.max_row
    }

    fn as_polyhedral(&self) -> Option<PolyhedralTerm> {
        Some(PolyhedralTerm {
            c: self.c.clone(),
            d: self.d.clone(),
            blocks: vec![DualBlock::Box {
                start: 0,
                len: self.samples(),
                bound: 1.0 / self.samples() as f64,
            }],
        })
    }
}

/// Single-sample subgradient of [`AbsLossSum`]: draw `i` uniformly and
/// return `sign(⟨cᵢ,x⟩ − dᵢ) cᵢ`.
#[derive(Debug, Clone)]
pub struct SampledAbsLoss {
    inner: Arc<AbsLossSum>,
}

impl SampledAbsLoss {
    pub fn new(inner: Arc<AbsLossSum>) -> Self {
        SampledAbsLoss { inner }
    }
}

impl StochasticSubgradient for SampledAbsLoss {
    fn sample_into(&self, x: &DVector<f64>, rng: &mut dyn RngCore, out: &mut DVector<f64>) {
        let i = rng.random_range(0..self.inner.samples());
        let s = sign0(self.inner.residual(i, x));
        for (j, o) in out.iter_mut().enumerate() {
            *o = s * self.inner.c[(i, j)];
        }
    }

    fn sigma(&self) -> f64 {
        2.0 * self.inner.max_row
    }

    fn light_tail(&self) -> bool {
        true
    }
}

/// `H(x,ξ) = h'(x) + σ·r·v`, `r ~ U[0,1]`, `v` uniform on the dual unit sphere.
#[derive(Debug, Clone)]
pub struct NoisySubgradient {
    inner: Arc<dyn NonsmoothFunction>,
    sigma: f64,
    kind: GeometryKind,
}

impl NoisySubgradient {
    pub fn new(inner: Arc<dyn NonsmoothFunction>, sigma: f64, kind: GeometryKind) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(SlideError::param("sigma", "must be finite and nonnegative"));
        }
        Ok(NoisySubgradient { inner, sigma, kind })
    }
}

impl StochasticSubgradient for NoisySubgradient {
    fn sample_into(&self, x: &DVector<f64>, rng: &mut dyn RngCore, out: &mut DVector<f64>) {
        self.inner.subgradient_into(x, out);
        if self.sigma == 0.0 {
            return;
        }
        let n = out.len();
        let r: f64 = rng.random();
        match self.kind {
            GeometryKind::Euclidean => {
                let v = DVector::<f64>::from_fn(n, |_, _| StandardNormal.sample(&mut *rng));
                let nv = v.norm();
                if nv > 0.0 {
                    out.axpy(self.sigma * r / nv, &v, 1.0);
                }
            }
            GeometryKind::EntropySimplex => {
                // uniform on the surface of the ℓ∞ unit cube
                let face = rng.random_range(0..n);
                let side = if rng.random::<bool>() { 1.0 } else { -1.0 };
                for (j, o) in out.iter_mut().enumerate() {
                    let vj = if j == face {
                        side
                    } else {
                        2.0 * rng.random::<f64>() - 1.0
                    };
                    *o += self.sigma * r * vj;
                }
            }
        }
    }

    fn sigma(&self) -> f64 {
        self.sigma
    }

    fn light_tail(&self) -> bool {
        true
    }
}
