//! Stochastic gradient sliding, its multi-phase restart for strongly convex
//! problems, and the bounds `B̃_d(N)` and `B_p(N)`.

use nalgebra::DVector;

use crate::error::{Result, SlideError};
use crate::oracles::{CompositeProblem, Counts};
use crate::prox::GeometryKind;
use crate::run::{RunOptions, RunRecord};
use crate::schedule::SlidingSchedule;
use crate::sliding::{inner_weight_sq_sum, noise_sum, slide_inner, slide_outer, AffineModel, FirstTerm};
use crate::stream::StreamKey;

/// Stored deviations `δ_{k,t} = H(u_{k,t−1}, ξ) − h'(u_{k,t−1})`.
#[derive(Debug, Clone, Default)]
pub struct NoiseTrace {
    pub deltas: Vec<DVector<f64>>,
}

/// Stochastic prox-sliding: `T` steps, each consuming one sample drawn from
/// the stream `(key, k, t)`.
#[allow(clippy::too_many_arguments)]
pub fn sprox_sliding(
    problem: &CompositeProblem,
    g: &AffineModel,
    x: &DVector<f64>,
    beta: f64,
    big_t: u64,
    schedule: &SlidingSchedule,
    key: StreamKey,
    k: u64,
) -> Result<(DVector<f64>, DVector<f64>)> {
    sprox_inner(problem, g, x, beta, big_t, schedule, key, k, None)
}

#[allow(clippy::too_many_arguments)]
fn sprox_inner(
    problem: &CompositeProblem,
    g: &AffineModel,
    x: &DVector<f64>,
    beta: f64,
    big_t: u64,
    schedule: &SlidingSchedule,
    key: StreamKey,
    k: u64,
    mut noise: Option<&mut NoiseTrace>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    if problem.stochastic().is_none() {
        return Err(SlideError::MissingStochasticOracle);
    }
    slide_inner(
        problem,
        g,
        x,
        beta,
        big_t,
        schedule,
        |t, u, out| {
            let mut rng = key.rng(k, t);
            problem.stochastic_into(u, &mut rng, out)?;
            if let Some(nt) = noise.as_deref_mut() {
                let mut exact = DVector::zeros(u.len());
                problem.nonsmooth().subgradient_into(u, &mut exact);
                nt.deltas.push(&*out - exact);
            }
            Ok(())
        },
        None,
    )
}

/// The stochastic gradient sliding method.
pub fn sgs_run(
    problem: &CompositeProblem,
    schedule: &SlidingSchedule,
    n: usize,
    key: StreamKey,
    options: &RunOptions,
) -> Result<RunRecord> {
    if problem.stochastic().is_none() {
        return Err(SlideError::MissingStochasticOracle);
    }
    let (rec, x_bar, x) = slide_outer(problem, schedule, n, options, |k, g, x, beta, t| {
        sprox_sliding(problem, g, x, beta, t, schedule, key, k as u64)
    })?;
    Ok(rec.finish("sgs", schedule.kind().as_str(), Some(key.seed), x_bar, x))
}

/// [`sgs_run`] that also stores every noise vector `δ_{k,t}`.
pub fn sgs_run_with_noise(
    problem: &CompositeProblem,
    schedule: &SlidingSchedule,
    n: usize,
    key: StreamKey,
    options: &RunOptions,
) -> Result<(RunRecord, NoiseTrace)> {
    let mut trace = NoiseTrace::default();
    let (rec, x_bar, x) = slide_outer(problem, schedule, n, options, |k, g, x, beta, t| {
        sprox_inner(problem, g, x, beta, t, schedule, key, k as u64, Some(&mut trace))
    })?;
    Ok((
        rec.finish("sgs", schedule.kind().as_str(), Some(key.seed), x_bar, x),
        trace,
    ))
}

/// `B̃_d(N)`: the first term plus `(Γ_N/ν)(M² + σ²)·Σ_k Σ_i …`.
pub fn bound_bd_stochastic(schedule: &SlidingSchedule, n: usize, first: FirstTerm) -> f64 {
    first.evaluate(schedule, n)
        + schedule.noise_energy() * schedule.big_gamma(n) / schedule.modulus()
            * noise_sum(schedule, n)
}

/// `B_p(N)` for the tail bound `P{gap ≥ B̃_d + λB_p} ≤ exp(−2λ²/3) + exp(−λ)`.
pub fn bound_bp(schedule: &SlidingSchedule, n: usize, vbar: f64) -> f64 {
    let sigma = schedule.sigma();
    if sigma == 0.0 {
        return 0.0;
    }
    let nu = schedule.modulus();
    let gn = schedule.big_gamma(n);
    let sq: f64 = (1..=n)
        .map(|k| {
            let t = schedule.big_t(k);
            let pt = schedule.big_p(t);
            let c = schedule.gamma(k) * pt / (schedule.big_gamma(k) * (1.0 - pt));
            c * c * inner_weight_sq_sum(t)
        })
        .sum();
    sigma * gn * (2.0 * vbar / nu * sq).sqrt() + sigma * sigma * gn / nu * noise_sum(schedule, n)
}

/// `exp(−2λ²/3) + exp(−λ)`.
pub fn tail_probability(lambda: f64) -> f64 {
    (-2.0 * lambda * lambda / 3.0).exp() + (-lambda).exp()
}

/// `2L/(N(N+1))·[3V₀/ν + 4D̃]`.
pub fn stochastic_fixed_horizon_bound(l: f64, nu: f64, n: usize, v0: f64, d_tilde: f64) -> f64 {
    let nf = n as f64;
    2.0 * l / (nf * (nf + 1.0)) * (3.0 * v0 / nu + 4.0 * d_tilde)
}

/// `L/((N+1)(N+2))·(27V̄/(2ν) + 16D̃/3)`.
pub fn stochastic_compact_set_bound(l: f64, nu: f64, n: usize, vbar: f64, d_tilde: f64) -> f64 {
    let nf = n as f64;
    l / ((nf + 1.0) * (nf + 2.0)) * (27.0 * vbar / (2.0 * nu) + 16.0 * d_tilde / 3.0)
}

/// Parameters of the multi-phase method.
#[derive(Debug, Clone, PartialEq)]
pub struct MsgsConfig {
    /// `Δ₀ ≥ Ψ(y₀) − Ψ*`.
    pub delta0: f64,
    /// Outer iterations per phase; `⌈4√(2L/(νμ))⌉` when `None`.
    pub n0: Option<usize>,
    pub phases: usize,
}

/// `N₀ = ⌈4√(2L/(νμ))⌉`.
pub fn default_phase_length(l: f64, nu: f64, mu: f64) -> usize {
    (4.0 * (2.0 * l / (nu * mu)).sqrt()).ceil() as usize
}

#[derive(Debug, Clone)]
pub struct PhaseResult {
    pub phase: usize,
    pub y: DVector<f64>,
    pub objective: f64,
    pub gap: Option<f64>,
    pub d_tilde: f64,
    /// Cumulative counts after this phase.
    pub counts: Counts,
}

#[derive(Debug, Clone)]
pub struct MsgsRecord {
    pub n0: usize,
    pub delta0: f64,
    pub seed: u64,
    pub phases: Vec<PhaseResult>,
}

/// `Δ₀ = Ψ(y₀) − Ψ_low`, with `Ψ_low` the certified lower bound of the attached reference.
pub fn default_delta0(problem: &CompositeProblem, y0: &DVector<f64>) -> Result<f64> {
    let r = problem
        .reference()
        .ok_or_else(|| SlideError::param("delta0", "needs a reference optimum or an explicit value"))?;
    Ok((problem.objective(y0) - r.lower()).max(f64::MIN_POSITIVE))
}

/// The multi-phase stochastic gradient sliding method.
pub fn msgs_run(
    problem: &CompositeProblem,
    config: &MsgsConfig,
    seed: u64,
    options: &RunOptions,
) -> Result<MsgsRecord> {
    let mu = problem.strong_convexity();
    if !(mu > 0.0) {
        return Err(SlideError::param("mu", "the multi-phase method needs mu > 0"));
    }
    if problem.geometry().kind() != GeometryKind::Euclidean {
        return Err(SlideError::Unsupported(
            "the multi-phase method needs a quadratically growing prox-function".into(),
        ));
    }
    if !(config.delta0 > 0.0) || !config.delta0.is_finite() {
        return Err(SlideError::param("delta0", "must be positive and finite"));
    }
    if config.phases == 0 {
        return Err(SlideError::param("phases", "must be at least 1"));
    }
    if problem.stochastic().is_none() {
        return Err(SlideError::MissingStochasticOracle);
    }
    let (l, nu, m, sigma) = (
        problem.lipschitz(),
        problem.modulus(),
        problem.nonsmooth_bound(),
        problem.sigma(),
    );
    let n0 = config.n0.unwrap_or_else(|| default_phase_length(l, nu, mu));
    if n0 == 0 {
        return Err(SlideError::param("N0", "must be at least 1"));
    }
    let base = problem.counts();
    let mut y = options.start_point(problem);
    let mut phases = Vec::with_capacity(config.phases);
    let inner_opts = RunOptions {
        start: None,
        record_objective: false,
        record_iterates: false,
        target_gap: None,
    };
    for s in 1..=config.phases {
        let d_tilde = config.delta0 / (nu * mu * 2f64.powi(s as i32));
        let schedule = SlidingSchedule::stochastic_fixed_horizon(l, m, sigma, nu, n0, d_tilde)?;
        let opts = RunOptions {
            start: Some(y),
            ..inner_opts.clone()
        };
        let key = StreamKey::new(seed).with_phase(s as u64);
        let rec = sgs_run(problem, &schedule, n0, key, &opts)?;
        y = rec.output;
        let now = problem.counts();
        let objective = problem.objective(&y);
        phases.push(PhaseResult {
            phase: s,
            objective,
            gap: problem.reference().map(|r| objective - r.value),
            y: y.clone(),
            d_tilde,
            counts: Counts {
                grad: now.grad - base.grad,
                subgrad: now.subgrad - base.subgrad,
                stoch: now.stoch - base.stoch,
                operator: now.operator - base.operator,
            },
        });
    }
    Ok(MsgsRecord {
        n0,
        delta0: config.delta0,
        seed,
        phases,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bp_vanishes_without_noise() {
        let s = SlidingSchedule::fixed_horizon(1.0, 1.0, 1.0, 5, 1.0).unwrap();
        assert_eq!(bound_bp(&s, 5, 3.0), 0.0);
    }

    #[test]
    fn bp_single_term_by_hand() {
        // L = ν = D̃ = N = 1, M = 0, σ = 1: T₁ = 1, P₁ = 1/3, β₁ = 2, Γ₁ = γ₁ = 1
        let s = SlidingSchedule::stochastic_fixed_horizon(1.0, 0.0, 1.0, 1.0, 1, 1.0).unwrap();
        assert_eq!(s.big_t(1), 1);
        let vbar = 0.5;
        // c = (1/3)/(2/3) = ½; Σ(i+1)² = 4; first = √(2·0.5·¼·4) = 1
        // second = (1/1)·½/2·(1/(¼·1)) = 1
        assert!((bound_bp(&s, 1, vbar) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn tail_probability_values() {
        assert!((tail_probability(2.0) - ((-8.0f64 / 3.0).exp() + (-2.0f64).exp())).abs() < 1e-15);
        assert!((tail_probability(2.0) - 0.2047).abs() < 1e-3);
    }

    #[test]
    fn phase_length_formula() {
        // 4√(2·8/1) = 16
        assert_eq!(default_phase_length(8.0, 1.0, 1.0), 16);
    }
}
