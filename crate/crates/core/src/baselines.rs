//! Comparator methods: proximal gradient and accelerated proximal gradient,
//! the latter with `h` either kept exact in the prox-mapping or linearized.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SlideError};
use crate::oracles::CompositeProblem;
use crate::prox::{Anchor, SimpleTerm, FEASIBILITY_TOL};
use crate::run::{Recorder, RunOptions, RunRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    ProxGradient,
    AccelProxExactH,
    AccelLinearizedH,
}

impl BaselineKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BaselineKind::ProxGradient => "prox_grad",
            BaselineKind::AccelProxExactH => "accel_prox",
            BaselineKind::AccelLinearizedH => "accel_linearized",
        }
    }
}

/// How `β_k` and `γ_k` are chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum StepRule {
    /// Same `(β, γ)` every iteration.
    Constant { beta: f64, gamma: f64 },
    /// `β_k = 2L/(νk)`, `γ_k = 2/(k+2)`.
    Accelerated { lipschitz: f64, modulus: f64 },
    /// `β_k = 2L/(νk) + b√(k+1)`, `γ_k = 2/(k+1)`.
    Linearized { lipschitz: f64, modulus: f64, b: f64 },
    /// Explicit sequences, indexed from `k = 1`.
    Sequence { beta: Vec<f64>, gamma: Vec<f64> },
}

impl StepRule {
    pub fn beta(&self, k: usize) -> f64 {
        let kf = k as f64;
        match self {
            StepRule::Constant { beta, .. } => *beta,
            StepRule::Accelerated { lipschitz, modulus } => 2.0 * lipschitz / (modulus * kf),
            StepRule::Linearized {
                lipschitz,
                modulus,
                b,
            } => 2.0 * lipschitz / (modulus * kf) + b * (kf + 1.0).sqrt(),
            StepRule::Sequence { beta, .. } => beta[k - 1],
        }
    }

    pub fn gamma(&self, k: usize) -> f64 {
        let kf = k as f64;
        match self {
            StepRule::Constant { gamma, .. } => *gamma,
            StepRule::Accelerated { .. } => 2.0 / (kf + 2.0),
            StepRule::Linearized { .. } => 2.0 / (kf + 1.0),
            StepRule::Sequence { gamma, .. } => gamma[k - 1],
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if let StepRule::Sequence { beta, gamma } = self {
            if beta.len() < n || gamma.len() < n {
                return Err(SlideError::param("steps", "sequence shorter than N"));
            }
        }
        for k in 1..=n {
            let (b, g) = (self.beta(k), self.gamma(k));
            if !(b > 0.0) || !b.is_finite() {
                return Err(SlideError::param("beta", format!("β_{k} = {b} is not positive")));
            }
            if !(0.0..=1.0).contains(&g) {
                return Err(SlideError::param("gamma", format!("γ_{k} = {g} is outside [0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineConfig {
    pub kind: BaselineKind,
    pub steps: StepRule,
}

impl BaselineConfig {
    /// Proximal gradient with `β_k = L/ν`.
    pub fn prox_gradient(problem: &CompositeProblem) -> Self {
        BaselineConfig {
            kind: BaselineKind::ProxGradient,
            steps: StepRule::Constant {
                beta: problem.lipschitz() / problem.modulus(),
                gamma: 1.0,
            },
        }
    }

    pub fn accel_exact(problem: &CompositeProblem) -> Self {
        BaselineConfig {
            kind: BaselineKind::AccelProxExactH,
            steps: StepRule::Accelerated {
                lipschitz: problem.lipschitz(),
                modulus: problem.modulus(),
            },
        }
    }

    /// Linearized `h` with `b = M/√(3νD_X)`; needs a bounded `X` when `M > 0`.
    pub fn accel_linearized(problem: &CompositeProblem) -> Result<Self> {
        let m = problem.nonsmooth_bound();
        let nu = problem.modulus();
        let b = if m == 0.0 {
            0.0
        } else {
            m / (3.0 * nu * problem.diameter()?).sqrt()
        };
        Ok(BaselineConfig {
            kind: BaselineKind::AccelLinearizedH,
            steps: StepRule::Linearized {
                lipschitz: problem.lipschitz(),
                modulus: nu,
                b,
            },
        })
    }
}

fn exact_term(problem: &CompositeProblem) -> Result<SimpleTerm> {
    problem.folded_simple_term().ok_or_else(|| {
        SlideError::Unsupported("h cannot be handled exactly by the prox-mapping".into())
    })
}

fn start(problem: &CompositeProblem, options: &RunOptions) -> Result<DVector<f64>> {
    let x = options.start_point(problem);
    let viol = problem.geometry().set().violation(&x);
    if !(viol <= FEASIBILITY_TOL) {
        return Err(SlideError::InfeasibleAnchor(viol));
    }
    Ok(x)
}

/// `x_k = argmin ⟨∇f(x_{k−1}), u⟩ + h(u) + 𝒳(u) + β_k V(x_{k−1}, u)`.
pub fn prox_grad_run(
    problem: &CompositeProblem,
    n: usize,
    steps: &StepRule,
    options: &RunOptions,
) -> Result<RunRecord> {
    if n == 0 {
        return Err(SlideError::param("N", "must be at least 1"));
    }
    steps.validate(n)?;
    let simple = exact_term(problem)?;
    let geometry = problem.geometry();
    let mut x = start(problem, options)?;
    let mut rec = Recorder::new(problem, options, n);
    let mut g = DVector::zeros(problem.dim());
    let mut next = DVector::zeros(problem.dim());
    for k in 1..=n {
        problem.gradient_into(&x, &mut g);
        geometry.composite_prox_into(simple, &g, &[Anchor::new(&x, steps.beta(k))], &mut next)?;
        std::mem::swap(&mut x, &mut next);
        if rec.record(k, &x) {
            break;
        }
    }
    Ok(rec.finish(BaselineKind::ProxGradient.as_str(), "constant", None, x.clone(), x))
}

/// Accelerated proximal gradient with `h` either exact or replaced by
/// `h(x̲_k) + ⟨h'(x̲_k), u − x̲_k⟩`.
pub fn accel_prox_run(
    problem: &CompositeProblem,
    n: usize,
    config: &BaselineConfig,
    options: &RunOptions,
) -> Result<RunRecord> {
    if n == 0 {
        return Err(SlideError::param("N", "must be at least 1"));
    }
    let steps = &config.steps;
    steps.validate(n)?;
    let linearized = match config.kind {
        BaselineKind::ProxGradient => return prox_grad_run(problem, n, steps, options),
        BaselineKind::AccelProxExactH => false,
        BaselineKind::AccelLinearizedH => true,
    };
    let simple = if linearized {
        problem.simple()
    } else {
        exact_term(problem)?
    };
    let geometry = problem.geometry();
    let dim = problem.dim();
    let mut x = start(problem, options)?;
    let mut x_bar = x.clone();
    let mut x_under = DVector::zeros(dim);
    let mut g = DVector::zeros(dim);
    let mut hs = DVector::zeros(dim);
    let mut next = DVector::zeros(dim);
    let mut rec = Recorder::new(problem, options, n);
    for k in 1..=n {
        let gamma = steps.gamma(k);
        x_under.copy_from(&x_bar);
        x_under.axpy(gamma, &x, 1.0 - gamma);
        problem.gradient_into(&x_under, &mut g);
        if linearized {
            problem.subgradient_into(&x_under, &mut hs);
            g += &hs;
        }
        geometry.composite_prox_into(simple, &g, &[Anchor::new(&x, steps.beta(k))], &mut next)?;
        std::mem::swap(&mut x, &mut next);
        x_bar.axpy(gamma, &x, 1.0 - gamma);
        if rec.record(k, &x_bar) {
            break;
        }
    }
    let policy = match steps {
        StepRule::Constant { .. } => "constant",
        StepRule::Accelerated { .. } => "accelerated",
        StepRule::Linearized { .. } => "linearized",
        StepRule::Sequence { .. } => "custom",
    };
    Ok(rec.finish(config.kind.as_str(), policy, None, x_bar, x))
}

/// `(L/ν)·V(x₀,x*)/N` for [`prox_grad_run`] with `β = L/ν`.
pub fn prox_gradient_bound(l: f64, nu: f64, n: usize, v0: f64) -> f64 {
    l * v0 / (nu * n as f64)
}

/// `Γ_N[(1 − γ₁)(Ψ(x₀) − Ψ*) + γ₁β₁V(x₀,x*)]` for the accelerated rule with exact
/// `h`, where `Γ_N = 6/((N+1)(N+2))`, `γ₁ = 2/3`, `β₁ = 2L/ν`.
pub fn accel_exact_bound(l: f64, nu: f64, n: usize, gap0: f64, v0: f64) -> f64 {
    let nf = n as f64;
    6.0 / ((nf + 1.0) * (nf + 2.0)) * (gap0 / 3.0 + 4.0 * l * v0 / (3.0 * nu))
}

/// `Γ_N[Nβ_N D_X + Σ_k k M²/(2(νβ_k − Lγ_k))]` for the linearized rule, with
/// `Γ_N = 2/(N(N+1))`.
pub fn accel_linearized_bound(steps: &StepRule, l: f64, nu: f64, m: f64, n: usize, d_x: f64) -> f64 {
    let nf = n as f64;
    let noise: f64 = (1..=n)
        .map(|k| k as f64 * m * m / (2.0 * (nu * steps.beta(k) - l * steps.gamma(k))))
        .sum();
    2.0 / (nf * (nf + 1.0)) * (nf * steps.beta(n) * d_x + noise)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accelerated_rule_values() {
        let r = StepRule::Accelerated {
            lipschitz: 3.0,
            modulus: 1.0,
        };
        assert_eq!(r.beta(2), 3.0);
        assert_eq!(r.gamma(2), 0.5);
        let l = StepRule::Linearized {
            lipschitz: 3.0,
            modulus: 1.0,
            b: 2.0,
        };
        assert_eq!(l.gamma(1), 1.0);
        assert!((l.beta(3) - (2.0 + 4.0)).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_gamma() {
        let r = StepRule::Constant {
            beta: 1.0,
            gamma: 1.5,
        };
        assert!(r.validate(1).is_err());
    }
}
