//! Deterministic gradient sliding: the prox-sliding inner procedure, the outer
//! loop, and the bound `B_d(N)`.

use nalgebra::DVector;

use crate::error::{Result, SlideError};
use crate::oracles::CompositeProblem;
use crate::prox::{Anchor, FEASIBILITY_TOL};
use crate::run::{Recorder, RunOptions, RunRecord};
use crate::schedule::{PolicyKind, SlidingSchedule};

/// The affine model `g(u) = constant + ⟨slope, u⟩` handed to the inner loop.
/// Only the slope enters the prox-mappings.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineModel {
    pub constant: f64,
    pub slope: DVector<f64>,
}

impl AffineModel {
    pub fn linear(slope: DVector<f64>) -> Self {
        AffineModel {
            constant: 0.0,
            slope,
        }
    }

    pub fn value(&self, u: &DVector<f64>) -> f64 {
        self.constant + self.slope.dot(u)
    }
}

/// Per-step iterates `(u_t, ũ_t)` of one inner run.
#[derive(Debug, Clone, Default)]
pub struct InnerTrace {
    pub u: Vec<DVector<f64>>,
    pub u_tilde: Vec<DVector<f64>>,
}

/// Shared body of the deterministic and stochastic inner procedures.
/// `subgradient(t, u_{t−1}, out)` supplies the first-order information of `h`
/// used at step `t`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn slide_inner<F>(
    problem: &CompositeProblem,
    g: &AffineModel,
    x: &DVector<f64>,
    beta: f64,
    big_t: u64,
    schedule: &SlidingSchedule,
    mut subgradient: F,
    mut trace: Option<&mut InnerTrace>,
) -> Result<(DVector<f64>, DVector<f64>)>
where
    F: FnMut(u64, &DVector<f64>, &mut DVector<f64>) -> Result<()>,
{
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(SlideError::param("beta", "must be positive and finite"));
    }
    if big_t == 0 {
        return Err(SlideError::param("T", "must be at least 1"));
    }
    let n = problem.dim();
    if x.len() != n || g.slope.len() != n {
        return Err(SlideError::DimensionMismatch {
            expected: n,
            got: if x.len() != n { x.len() } else { g.slope.len() },
        });
    }
    let viol = problem.geometry().set().violation(x);
    if !(viol <= FEASIBILITY_TOL) {
        return Err(SlideError::InfeasibleAnchor(viol));
    }
    let geometry = problem.geometry();
    let simple = problem.simple();
    let mut u_prev = x.clone();
    let mut u = DVector::zeros(n);
    let mut u_tilde = x.clone();
    let mut h = DVector::zeros(n);
    let mut lin = DVector::zeros(n);
    for t in 1..=big_t {
        subgradient(t, &u_prev, &mut h)?;
        lin.copy_from(&g.slope);
        lin += &h;
        let anchors = [
            Anchor::new(x, beta),
            Anchor::new(&u_prev, beta * schedule.p(t)),
        ];
        geometry.composite_prox_into(simple, &lin, &anchors, &mut u)?;
        let theta = schedule.theta(t);
        u_tilde.axpy(theta, &u, 1.0 - theta);
        if let Some(tr) = trace.as_deref_mut() {
            tr.u.push(u.clone());
            tr.u_tilde.push(u_tilde.clone());
        }
        std::mem::swap(&mut u_prev, &mut u);
    }
    Ok((u_prev, u_tilde))
}

/// Runs `T` prox-sliding steps from `x` and returns `(u_T, ũ_T)`.
pub fn prox_sliding(
    problem: &CompositeProblem,
    g: &AffineModel,
    x: &DVector<f64>,
    beta: f64,
    big_t: u64,
    schedule: &SlidingSchedule,
) -> Result<(DVector<f64>, DVector<f64>)> {
    slide_inner(
        problem,
        g,
        x,
        beta,
        big_t,
        schedule,
        |_, u, out| {
            problem.subgradient_into(u, out);
            Ok(())
        },
        None,
    )
}

/// [`prox_sliding`] that also returns every `(u_t, ũ_t)`.
pub fn prox_sliding_traced(
    problem: &CompositeProblem,
    g: &AffineModel,
    x: &DVector<f64>,
    beta: f64,
    big_t: u64,
    schedule: &SlidingSchedule,
) -> Result<InnerTrace> {
    let mut trace = InnerTrace::default();
    slide_inner(
        problem,
        g,
        x,
        beta,
        big_t,
        schedule,
        |_, u, out| {
            problem.subgradient_into(u, out);
            Ok(())
        },
        Some(&mut trace),
    )?;
    Ok(trace)
}

/// Shared outer loop of the deterministic and stochastic methods.
pub(crate) fn slide_outer<'a, F>(
    problem: &'a CompositeProblem,
    schedule: &SlidingSchedule,
    n: usize,
    options: &'a RunOptions,
    mut inner: F,
) -> Result<(Recorder<'a>, DVector<f64>, DVector<f64>)>
where
    F: FnMut(usize, &AffineModel, &DVector<f64>, f64, u64) -> Result<(DVector<f64>, DVector<f64>)>,
{
    if n == 0 {
        return Err(SlideError::param("N", "must be at least 1"));
    }
    schedule.validate(problem.lipschitz(), problem.modulus(), n)?;
    // schedules carry their own L; it must dominate the problem's
    if schedule.lipschitz() < problem.lipschitz() * (1.0 - 1e-12) {
        return Err(SlideError::InvalidSchedule(
            "schedule L is below the problem's Lipschitz constant".into(),
        ));
    }
    let mut x = options.start_point(problem);
    let viol = problem.geometry().set().violation(&x);
    if !(viol <= FEASIBILITY_TOL) {
        return Err(SlideError::InfeasibleAnchor(viol));
    }
    let mut rec = Recorder::new(problem, options, n);
    let mut x_bar = x.clone();
    let mut x_under = DVector::zeros(problem.dim());
    let mut model = AffineModel::linear(DVector::zeros(problem.dim()));
    for k in 1..=n {
        let gamma = schedule.gamma(k);
        x_under.copy_from(&x_bar);
        x_under.axpy(gamma, &x, 1.0 - gamma);
        problem.gradient_into(&x_under, &mut model.slope);
        model.constant = 0.0;
        let (x_next, x_tilde) = inner(k, &model, &x, schedule.beta(k), schedule.big_t(k))?;
        x_bar.axpy(gamma, &x_tilde, 1.0 - gamma);
        x = x_next;
        if rec.record(k, &x_bar) {
            break;
        }
    }
    Ok((rec, x_bar, x))
}

/// The gradient sliding method: `N` gradient evaluations and `Σ T_k`
/// subgradient evaluations.
pub fn gs_run(
    problem: &CompositeProblem,
    schedule: &SlidingSchedule,
    n: usize,
    options: &RunOptions,
) -> Result<RunRecord> {
    let (rec, x_bar, x) = slide_outer(problem, schedule, n, options, |_, g, x, beta, t| {
        prox_sliding(problem, g, x, beta, t, schedule)
    })?;
    Ok(rec.finish("gs", schedule.kind().as_str(), None, x_bar, x))
}

/// `Σ_{i=1}^{T} 1/(p_i² P_{i−1}) = 2T + 2H_T` for `p_i = i/2`.
pub fn inner_weight_sum(big_t: u64) -> f64 {
    2.0 * big_t as f64 + 2.0 * harmonic(big_t)
}

/// `Σ_{i=1}^{T} (1/(p_i P_{i−1}))² = Σ_{i=1}^{T} (i+1)²`.
pub fn inner_weight_sq_sum(big_t: u64) -> f64 {
    let t = big_t as f64;
    (t + 1.0) * (t + 2.0) * (2.0 * t + 3.0) / 6.0 - 1.0
}

/// `H_T = Σ_{i≤T} 1/i`, summed exactly for small `T` and by the
/// asymptotic expansion otherwise.
pub fn harmonic(t: u64) -> f64 {
    if t <= 10_000 {
        return (1..=t).rev().map(|i| 1.0 / i as f64).sum();
    }
    const EULER: f64 = 0.577_215_664_901_532_9;
    let x = t as f64;
    let inv2 = 1.0 / (x * x);
    x.ln() + EULER + 0.5 / x - inv2 / 12.0 + inv2 * inv2 / 120.0
}

/// The first term of `B_d(N)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FirstTerm {
    /// `Γ_N β₁ V(x₀, x*)/(1 − P_{T₁})`, for nonincreasing weights.
    Initial(f64),
    /// `γ_N β_N V̄(x*)/(1 − P_{T_N})`, for nondecreasing weights on a compact set.
    Compact(f64),
}

impl FirstTerm {
    pub(crate) fn evaluate(&self, s: &SlidingSchedule, n: usize) -> f64 {
        match *self {
            FirstTerm::Initial(v0) => {
                s.big_gamma(n) * s.beta(1) * v0 / (1.0 - s.big_p(s.big_t(1)))
            }
            FirstTerm::Compact(vbar) => {
                s.gamma(n) * s.beta(n) * vbar / (1.0 - s.big_p(s.big_t(n)))
            }
        }
    }

    /// The natural first term for a policy.
    pub fn for_policy(kind: PolicyKind, v0: f64, vbar: f64) -> Self {
        match kind {
            PolicyKind::CompactSet => FirstTerm::Compact(vbar),
            _ => FirstTerm::Initial(v0),
        }
    }
}

/// `Σ_k Σ_{i≤T_k} γ_k P_{T_k}/(Γ_k β_k (1 − P_{T_k}) p_i² P_{i−1})`.
pub(crate) fn noise_sum(s: &SlidingSchedule, n: usize) -> f64 {
    (1..=n)
        .map(|k| {
            let t = s.big_t(k);
            let pt = s.big_p(t);
            s.gamma(k) * pt / (s.big_gamma(k) * s.beta(k) * (1.0 - pt)) * inner_weight_sum(t)
        })
        .sum()
}

/// `B_d(N)` by direct summation; the nonsmooth constant is the schedule's `M`.
pub fn bound_bd(schedule: &SlidingSchedule, n: usize, first: FirstTerm) -> f64 {
    let m = schedule.nonsmooth();
    let nu = schedule.modulus();
    first.evaluate(schedule, n) + m * m * schedule.big_gamma(n) / (2.0 * nu) * noise_sum(schedule, n)
}

/// `2L/(N(N+1))·[3V₀/ν + 2D̃]`.
pub fn fixed_horizon_bound(l: f64, nu: f64, n: usize, v0: f64, d_tilde: f64) -> f64 {
    let nf = n as f64;
    2.0 * l / (nf * (nf + 1.0)) * (3.0 * v0 / nu + 2.0 * d_tilde)
}

/// `L/((N+1)(N+2))·(27V̄/(2ν) + 8D̃/3)`.
pub fn compact_set_bound(l: f64, nu: f64, n: usize, vbar: f64, d_tilde: f64) -> f64 {
    let nf = n as f64;
    l / ((nf + 1.0) * (nf + 2.0)) * (27.0 * vbar / (2.0 * nu) + 8.0 * d_tilde / 3.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_expansion_matches_summation() {
        let exact: f64 = (1..=20_000u64).rev().map(|i| 1.0 / i as f64).sum();
        assert!((harmonic(20_000) - exact).abs() < 1e-13);
        assert_eq!(harmonic(1), 1.0);
    }

    #[test]
    fn inner_sums_match_definitions() {
        let s = SlidingSchedule::fixed_horizon(1.0, 1.0, 1.0, 1, 1.0).unwrap();
        for t in [1u64, 2, 7, 50] {
            let direct: f64 = (1..=t)
                .map(|i| 1.0 / (s.p(i).powi(2) * s.big_p(i - 1)))
                .sum();
            assert!((inner_weight_sum(t) - direct).abs() < 1e-10 * direct);
            let sq: f64 = (1..=t).map(|i| (1.0 / (s.p(i) * s.big_p(i - 1))).powi(2)).sum();
            assert!((inner_weight_sq_sum(t) - sq).abs() < 1e-9 * sq);
        }
    }

    #[test]
    fn bound_with_zero_m_is_first_term_only() {
        let s = SlidingSchedule::fixed_horizon(2.0, 0.0, 1.0, 4, 1.0).unwrap();
        let b = bound_bd(&s, 4, FirstTerm::Initial(0.7));
        let expect = s.big_gamma(4) * s.beta(1) * 0.7 / (1.0 - s.big_p(s.big_t(1)));
        assert_eq!(b, expect);
    }

    #[test]
    fn bound_single_term_by_hand() {
        // L = M = ν = D̃ = N = 1 gives T₁ = 1, P₁ = 1/3, β₁ = 2, γ₁ = Γ₁ = 1
        let s = SlidingSchedule::fixed_horizon(1.0, 1.0, 1.0, 1, 1.0).unwrap();
        assert_eq!(s.big_t(1), 1);
        let v0 = 0.25;
        // first: 2·0.25/(2/3) = 0.75; second: ½·(1/3)/(2·2/3)·(1/(¼·1)) = 0.5
        let b = bound_bd(&s, 1, FirstTerm::Initial(v0));
        assert!((b - 1.25).abs() < 1e-14);
    }
}
