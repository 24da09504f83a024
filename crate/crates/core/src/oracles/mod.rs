//! Oracle contracts with exact call counting, concrete oracles, the problem
//! zoo and certified reference optima.

mod functions;
mod reference;
mod zoo;

use std::fmt::Debug;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use nalgebra::DVector;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SlideError};
use crate::prox::{ProxGeometry, SimpleTerm};
use crate::smoothing::SaddleSmoother;

pub use functions::{
    AbsLossSum, L1Norm, NoisySubgradient, QuadraticLoss, SampledAbsLoss, ZeroFunction,
};
pub use reference::{
    certified_lower_bound, reference_optimum, solve_separable, solve_saddle, DualBlock,
    PolyhedralTerm, ReferenceSolution,
};
pub use zoo::{make_problem, problem_families, ProblemSpec};

/// A convex function with `L`-Lipschitz gradient.
pub trait SmoothFunction: Debug + Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &DVector<f64>) -> f64;
    fn gradient_into(&self, x: &DVector<f64>, out: &mut DVector<f64>);
    fn lipschitz(&self) -> f64;
    fn strong_convexity(&self) -> f64 {
        0.0
    }
    /// Value of the function this oracle stands for. Differs from
    /// [`SmoothFunction::value`] only for smooth surrogates.
    fn target_value(&self, x: &DVector<f64>) -> f64 {
        self.value(x)
    }
    /// Linear-operator applications spent by one gradient evaluation.
    fn operator_applications(&self) -> u64 {
        0
    }
    fn as_saddle(&self) -> Option<&SaddleSmoother> {
        None
    }
    fn as_quadratic(&self) -> Option<&QuadraticLoss> {
        None
    }
}

/// A convex function satisfying `h(x) ≤ h(y) + ⟨h'(y), x−y⟩ + M‖x−y‖`.
pub trait NonsmoothFunction: Debug + Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &DVector<f64>) -> f64;
    fn subgradient_into(&self, x: &DVector<f64>, out: &mut DVector<f64>);
    fn bound(&self) -> f64;
    /// `Some` when `h` can be folded into the prox-mapping exactly.
    fn as_simple_term(&self) -> Option<SimpleTerm> {
        None
    }
    /// `h(x) = max_{w∈W} ⟨Cx − d, w⟩` representation used by reference solvers.
    fn as_polyhedral(&self) -> Option<PolyhedralTerm> {
        None
    }
}

/// Unbiased sampler of a subgradient of `h` with variance at most `σ²`.
pub trait StochasticSubgradient: Debug + Send + Sync {
    fn sample_into(&self, x: &DVector<f64>, rng: &mut dyn RngCore, out: &mut DVector<f64>);
    fn sigma(&self) -> f64;
    /// Whether `‖H − h'‖_* ≤ σ` holds surely.
    fn light_tail(&self) -> bool;
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub grad: u64,
    pub subgrad: u64,
    pub stoch: u64,
    pub operator: u64,
}

#[derive(Debug, Default)]
pub struct OracleCounters {
    grad: AtomicU64,
    subgrad: AtomicU64,
    stoch: AtomicU64,
    operator: AtomicU64,
}

impl OracleCounters {
    pub fn snapshot(&self) -> Counts {
        Counts {
            grad: self.grad.load(Ordering::Relaxed),
            subgrad: self.subgrad.load(Ordering::Relaxed),
            stoch: self.stoch.load(Ordering::Relaxed),
            operator: self.operator.load(Ordering::Relaxed),
        }
    }

    pub fn reset(&self) {
        self.grad.store(0, Ordering::Relaxed);
        self.subgrad.store(0, Ordering::Relaxed);
        self.stoch.store(0, Ordering::Relaxed);
        self.operator.store(0, Ordering::Relaxed);
    }
}

/// Certified reference point for gap measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub x: DVector<f64>,
    pub value: f64,
    /// Certified upper bound on `Ψ(x) − Ψ*`.
    pub certified_gap: f64,
}

impl Reference {
    /// A certified lower bound on `Ψ*`.
    pub fn lower(&self) -> f64 {
        self.value - self.certified_gap
    }
}

/// `Ψ = f + h + 𝒳` over `X`, with counted oracle access.
#[derive(Debug, Clone)]
pub struct CompositeProblem {
    name: String,
    geometry: ProxGeometry,
    smooth: Arc<dyn SmoothFunction>,
    nonsmooth: Arc<dyn NonsmoothFunction>,
    stochastic: Option<Arc<dyn StochasticSubgradient>>,
    simple: SimpleTerm,
    reference: Option<Reference>,
    counters: Arc<OracleCounters>,
}

impl CompositeProblem {
    pub fn new(
        name: impl Into<String>,
        geometry: ProxGeometry,
        smooth: Arc<dyn SmoothFunction>,
        nonsmooth: Arc<dyn NonsmoothFunction>,
        simple: SimpleTerm,
    ) -> Result<Self> {
        let n = geometry.dim();
        for got in [smooth.dim(), nonsmooth.dim()] {
            if got != n {
                return Err(SlideError::DimensionMismatch { expected: n, got });
            }
        }
        if !(smooth.lipschitz() > 0.0) || !smooth.lipschitz().is_finite() {
            return Err(SlideError::param("L", "must be positive and finite"));
        }
        if !(nonsmooth.bound() >= 0.0) || !nonsmooth.bound().is_finite() {
            return Err(SlideError::param("M", "must be finite and nonnegative"));
        }
        Ok(CompositeProblem {
            name: name.into(),
            geometry,
            smooth,
            nonsmooth,
            stochastic: None,
            simple,
            reference: None,
            counters: Arc::new(OracleCounters::default()),
        })
    }

    pub fn with_stochastic(mut self, oracle: Arc<dyn StochasticSubgradient>) -> Self {
        self.stochastic = Some(oracle);
        self
    }

    pub fn with_reference(mut self, reference: Reference) -> Self {
        self.reference = Some(reference);
        self
    }

    pub fn with_smooth(&self, smooth: Arc<dyn SmoothFunction>) -> Result<Self> {
        if smooth.dim() != self.dim() {
            return Err(SlideError::DimensionMismatch {
                expected: self.dim(),
                got: smooth.dim(),
            });
        }
        let mut p = self.fork();
        p.smooth = smooth;
        Ok(p)
    }

    /// Same problem with fresh counters.
    pub fn fork(&self) -> Self {
        CompositeProblem {
            counters: Arc::new(OracleCounters::default()),
            ..self.clone()
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.geometry.dim()
    }

    pub fn geometry(&self) -> &ProxGeometry {
        &self.geometry
    }

    pub fn smooth(&self) -> &dyn SmoothFunction {
        self.smooth.as_ref()
    }

    pub fn nonsmooth(&self) -> &dyn NonsmoothFunction {
        self.nonsmooth.as_ref()
    }

    pub fn stochastic(&self) -> Option<&dyn StochasticSubgradient> {
        self.stochastic.as_deref()
    }

    pub fn simple(&self) -> SimpleTerm {
        self.simple
    }

    pub fn reference(&self) -> Option<&Reference> {
        self.reference.as_ref()
    }

    pub fn lipschitz(&self) -> f64 {
        self.smooth.lipschitz()
    }

    pub fn strong_convexity(&self) -> f64 {
        self.smooth.strong_convexity()
    }

    pub fn nonsmooth_bound(&self) -> f64 {
        self.nonsmooth.bound()
    }

    pub fn sigma(&self) -> f64 {
        self.stochastic.as_ref().map_or(0.0, |s| s.sigma())
    }

    pub fn modulus(&self) -> f64 {
        self.geometry.modulus()
    }

    pub fn counts(&self) -> Counts {
        self.counters.snapshot()
    }

    pub fn reset_counts(&self) {
        self.counters.reset()
    }

    pub fn gradient_into(&self, x: &DVector<f64>, out: &mut DVector<f64>) {
        self.counters.grad.fetch_add(1, Ordering::Relaxed);
        self.counters
            .operator
            .fetch_add(self.smooth.operator_applications(), Ordering::Relaxed);
        self.smooth.gradient_into(x, out);
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(self.dim());
        self.gradient_into(x, &mut g);
        g
    }

    pub fn subgradient_into(&self, x: &DVector<f64>, out: &mut DVector<f64>) {
        self.counters.subgrad.fetch_add(1, Ordering::Relaxed);
        self.nonsmooth.subgradient_into(x, out);
    }

    pub fn subgradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(self.dim());
        self.subgradient_into(x, &mut g);
        g
    }

    pub fn stochastic_into(
        &self,
        x: &DVector<f64>,
        rng: &mut dyn RngCore,
        out: &mut DVector<f64>,
    ) -> Result<()> {
        let oracle = self
            .stochastic
            .as_ref()
            .ok_or(SlideError::MissingStochasticOracle)?;
        self.counters.stoch.fetch_add(1, Ordering::Relaxed);
        oracle.sample_into(x, rng, out);
        Ok(())
    }

    /// `Ψ(x)`, uncounted. Smooth surrogates are evaluated at their target.
    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        self.smooth.target_value(x) + self.nonsmooth.value(x) + self.simple.value(x)
    }

    /// `f(x) + h(x) + 𝒳(x)` with `f` as seen by the gradient oracle, uncounted.
    pub fn surrogate_objective(&self, x: &DVector<f64>) -> f64 {
        self.smooth.value(x) + self.nonsmooth.value(x) + self.simple.value(x)
    }

    /// `Ψ(x) − Ψ(x*)` when a reference is attached.
    pub fn gap(&self, x: &DVector<f64>) -> Option<f64> {
        self.reference
            .as_ref()
            .map(|r| self.objective(x) - r.value)
    }

    /// `𝒳 + h` as one simple term, if `h` folds into the prox-mapping.
    pub fn folded_simple_term(&self) -> Option<SimpleTerm> {
        self.nonsmooth
            .as_simple_term()
            .map(|t| t.combine(self.simple))
    }

    /// Default starting point.
    pub fn start(&self) -> DVector<f64> {
        self.geometry.set().center(self.dim())
    }

    /// `D_X = max V(x, y)` over the feasible set.
    pub fn diameter(&self) -> Result<f64> {
        self.geometry.diameter()
    }
}

#[cfg(test)]
mod tests;
