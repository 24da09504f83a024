//! Configuration-driven experiments: fixed-horizon runs, accuracy sweeps and
//! the bound checks behind the `verify-bounds` verb.

mod config;
mod report;
mod svg;

use log::{debug, info};
use nalgebra::DVector;
use rayon::prelude::*;

pub use config::{AlgorithmConfig, ExperimentConfig, Format, OutputConfig, SweepConfig, TrialsConfig, ALGORITHMS};
pub use report::{
    aggregate, linear_fit, parse_aggregates, parse_rows, AggregateRow, BoundValue, Check, Derived, Fit,
    Report, ReportRow, BOUND_SLACK,
};
pub use svg::{line_chart, Series};

use crate::baselines::{
    accel_exact_bound, accel_linearized_bound, accel_prox_run, prox_gradient_bound, BaselineConfig,
};
use crate::error::{Result, SlideError};
use crate::oracles::{make_problem, CompositeProblem, Counts, ProblemSpec};
use crate::prox::GeometryKind;
use crate::run::{RunOptions, RunRecord};
use crate::schedule::{
    default_d_tilde_compact, default_d_tilde_fixed, default_d_tilde_stochastic, SlidingSchedule,
};
use crate::sliding::{bound_bd, compact_set_bound, fixed_horizon_bound, gs_run, FirstTerm};
use crate::smoothing::{smoothing_bound, smoothing_level, ssgs_run, DualDomain};
use crate::stochastic::{
    bound_bd_stochastic, default_delta0, msgs_run, sgs_run, stochastic_compact_set_bound,
    stochastic_fixed_horizon_bound, MsgsConfig,
};
use crate::stream::StreamKey;

/// Names accepted by [`ProblemSpec::desk`], with a description.
pub fn presets() -> Vec<(&'static str, &'static str)> {
    let mut v: Vec<_> = crate::oracles::problem_families().to_vec();
    v.push((
        "quad_l1_sweep",
        "quad_l1 with identity operator and a small box, cheap enough for accuracy sweeps",
    ));
    v
}

/// Builds the problem and attaches a certified reference.
pub fn prepare(spec: &ProblemSpec, tol: f64) -> Result<CompositeProblem> {
    let mut p = make_problem(spec)?;
    p.attach_reference(tol)?;
    Ok(p)
}

fn derived_constants(problem: &CompositeProblem, spec: &ProblemSpec) -> Result<Derived> {
    let r = problem.reference().expect("reference attached");
    let geo = problem.geometry();
    let x0 = problem.start();
    let mut d = Derived {
        family: spec.family.clone(),
        dim: problem.dim(),
        lipschitz: problem.lipschitz(),
        nonsmooth_bound: problem.nonsmooth_bound(),
        sigma: problem.sigma(),
        modulus: problem.modulus(),
        strong_convexity: problem.strong_convexity(),
        diameter: problem.diameter().ok(),
        v0: geo.bregman(&x0, &r.x)?,
        vbar: geo.max_bregman(&r.x).ok(),
        psi_star: r.value,
        certified_gap: r.certified_gap,
        initial_gap: problem.objective(&x0) - r.value,
        ..Default::default()
    };
    if let Some(s) = problem.smooth().as_saddle() {
        d.operator_norm = Some(s.operator_norm());
        d.dual_range = Some(s.dual_range());
        d.operator_norm_kind = Some(
            match (s.domain(), s.primal_kind()) {
                (DualDomain::Ball { .. }, _) => "l2->l2 (spectral)",
                (DualDomain::Simplex, GeometryKind::Euclidean) => "l2->linf (max row 2-norm)",
                (DualDomain::Simplex, GeometryKind::EntropySimplex) => "l1->linf (max |entry|)",
            }
            .to_string(),
        );
    }
    Ok(d)
}

fn need_diameter(d: &Derived) -> Result<f64> {
    d.diameter
        .ok_or_else(|| SlideError::config("D_tilde", "X is unbounded; give algorithm.d_tilde"))
}

/// The `D̃` a sliding run uses: configured, else the policy's default.
fn resolve_d_tilde(config: &ExperimentConfig, d: &Derived) -> Result<Option<f64>> {
    if let Some(v) = config.algorithm.d_tilde {
        return Ok(Some(v));
    }
    let nu = d.modulus;
    Ok(match (config.algorithm.name.as_str(), config.policy()) {
        ("gs", "fixed_horizon") => Some(default_d_tilde_fixed(need_diameter(d)?, nu)),
        ("gs" | "sgs", "compact_set") => Some(default_d_tilde_compact(need_diameter(d)?, nu)),
        ("sgs" | "ssgs", "fixed_horizon") => Some(default_d_tilde_stochastic(need_diameter(d)?, nu)),
        _ => None,
    })
}

/// What one trial produced.
#[derive(Default)]
struct TrialOut {
    rows: Vec<ReportRow>,
    bounds: Vec<BoundValue>,
    count_failures: Vec<String>,
}

struct Ctx<'a> {
    config: &'a ExperimentConfig,
    problem: &'a CompositeProblem,
    derived: &'a Derived,
    d_tilde: Option<f64>,
}

impl Ctx<'_> {
    fn row(&self, seed: u64, k: f64, gap: f64, bound: f64, c: Counts, elapsed: f64) -> ReportRow {
        ReportRow {
            trial_seed: seed,
            algorithm: self.config.algorithm.name.clone(),
            policy: self.config.policy().to_string(),
            k_or_epsilon: k,
            gap,
            bound,
            grad_calls: c.grad,
            subgrad_calls: c.subgrad,
            stoch_calls: c.stoch,
            elapsed_ms: self.config.output.timing.then_some(elapsed),
        }
    }

    fn gap(&self, x: &DVector<f64>) -> f64 {
        self.problem.objective(x) - self.derived.psi_star
    }

    fn stochastic(&self) -> bool {
        self.config.algorithm.name == "sgs"
    }

    fn fixed_schedule(&self, n: usize) -> Result<SlidingSchedule> {
        let d = self.derived;
        let dt = self.d_tilde.expect("resolved");
        if self.stochastic() {
            SlidingSchedule::stochastic_fixed_horizon(d.lipschitz, d.nonsmooth_bound, d.sigma, d.modulus, n, dt)
        } else {
            SlidingSchedule::fixed_horizon(d.lipschitz, d.nonsmooth_bound, d.modulus, n, dt)
        }
    }

    fn fixed_bound(&self, n: usize, v0: f64) -> f64 {
        let d = self.derived;
        let dt = self.d_tilde.expect("resolved");
        if self.stochastic() {
            stochastic_fixed_horizon_bound(d.lipschitz, d.modulus, n, v0, dt)
        } else {
            fixed_horizon_bound(d.lipschitz, d.modulus, n, v0, dt)
        }
    }

    fn sliding_run(&self, p: &CompositeProblem, s: &SlidingSchedule, n: usize, seed: u64, opts: &RunOptions) -> Result<RunRecord> {
        if self.stochastic() {
            sgs_run(p, s, n, StreamKey::new(seed), opts)
        } else {
            gs_run(p, s, n, opts)
        }
    }

    /// Checks `grad = k` and inner calls `= Σ_{j≤k} T_j` on the sliding counter.
    fn check_sliding_counts(&self, out: &mut TrialOut, seed: u64, s: &SlidingSchedule, k: usize, c: Counts) {
        let inner = s.total_inner(k);
        let (used, other) = if self.stochastic() {
            (c.stoch, c.subgrad)
        } else {
            (c.subgrad, c.stoch)
        };
        if c.grad != k as u64 || used != inner || other != 0 {
            out.count_failures.push(format!(
                "seed {seed} k {k}: grad {} (want {k}), inner {used} (want {inner}), other {other}",
                c.grad
            ));
        }
    }

    fn trial(&self, seed: u64) -> Result<TrialOut> {
        let p = self.problem.fork();
        let mut out = TrialOut::default();
        let d = self.derived;
        let horizons = self.config.horizons();
        let max_n = horizons.iter().copied().max().unwrap_or(0);
        let traced = RunOptions::default();
        match (self.config.algorithm.name.as_str(), self.config.policy()) {
            ("gs" | "sgs", "fixed_horizon") => {
                for &n in &horizons {
                    let s = self.fixed_schedule(n)?;
                    let rec = self.sliding_run(&p, &s, n, seed, &RunOptions::quiet())?;
                    self.check_sliding_counts(&mut out, seed, &s, n, rec.counts);
                    let gap = self.gap(&rec.output);
                    let bound = self.fixed_bound(n, d.v0);
                    out.rows.push(self.row(seed, n as f64, gap, bound, rec.counts, rec.elapsed_ms));
                    let bd = if self.stochastic() {
                        bound_bd_stochastic(&s, n, FirstTerm::Initial(d.v0))
                    } else {
                        bound_bd(&s, n, FirstTerm::Initial(d.v0))
                    };
                    out.bounds.push(BoundValue {
                        name: "bound_bd".into(),
                        k_or_epsilon: n as f64,
                        value: bd,
                    });
                }
            }
            ("gs" | "sgs", _) => {
                let dt = self.d_tilde.expect("resolved");
                let vbar = d
                    .vbar
                    .ok_or_else(|| SlideError::config("algorithm.policy", "compact_set needs a bounded X"))?;
                let s = if self.stochastic() {
                    SlidingSchedule::stochastic_compact_set(d.lipschitz, d.nonsmooth_bound, d.sigma, d.modulus, dt)?
                } else {
                    SlidingSchedule::compact_set(d.lipschitz, d.nonsmooth_bound, d.modulus, dt)?
                };
                let rec = self.sliding_run(&p, &s, max_n, seed, &traced)?;
                for &n in &horizons {
                    let tp = &rec.trace[n - 1];
                    let c = Counts {
                        grad: tp.grad_calls,
                        subgrad: tp.subgrad_calls,
                        stoch: tp.stoch_calls,
                        operator: 0,
                    };
                    self.check_sliding_counts(&mut out, seed, &s, n, c);
                    let bound = if self.stochastic() {
                        stochastic_compact_set_bound(d.lipschitz, d.modulus, n, vbar, dt)
                    } else {
                        compact_set_bound(d.lipschitz, d.modulus, n, vbar, dt)
                    };
                    let gap = tp.gap.expect("reference attached");
                    out.rows.push(self.row(seed, n as f64, gap, bound, c, tp.elapsed_ms));
                }
            }
            ("msgs", _) => {
                let delta0 = d.delta0.expect("resolved");
                let cfg = MsgsConfig {
                    delta0,
                    n0: d.n0,
                    phases: self.config.phases(),
                };
                let rec = msgs_run(&p, &cfg, seed, &RunOptions::quiet())?;
                for ph in &rec.phases {
                    let want = (ph.phase * rec.n0) as u64;
                    if ph.counts.grad != want {
                        out.count_failures
                            .push(format!("seed {seed} phase {}: grad {} (want {want})", ph.phase, ph.counts.grad));
                    }
                    let bound = delta0 / 2f64.powi(ph.phase as i32);
                    out.rows.push(self.row(seed, ph.phase as f64, self.gap(&ph.y), bound, ph.counts, 0.0));
                }
            }
            ("ssgs", _) => {
                let a = d.operator_norm.ok_or_else(|| {
                    SlideError::config("algorithm.name", "ssgs needs a saddle-function f")
                })?;
                let d_x = need_diameter(d)?;
                for &n in &horizons {
                    let rec = ssgs_run(&p, n, self.d_tilde, seed, &RunOptions::quiet())?;
                    let bound = smoothing_bound(a, n, d_x, d.dual_range.expect("saddle"), d.modulus, 1.0);
                    out.rows.push(self.row(seed, n as f64, self.gap(&rec.output), bound, rec.counts, rec.elapsed_ms));
                }
            }
            (name, _) => {
                let cfg = match name {
                    "prox_grad" => BaselineConfig::prox_gradient(&p),
                    "accel_prox" => BaselineConfig::accel_exact(&p),
                    _ => BaselineConfig::accel_linearized(&p)?,
                };
                let rec = accel_prox_run(&p, max_n, &cfg, &traced)?;
                for &n in &horizons {
                    let tp = &rec.trace[n - 1];
                    let bound = match name {
                        "prox_grad" => prox_gradient_bound(d.lipschitz, d.modulus, n, d.v0),
                        "accel_prox" => accel_exact_bound(d.lipschitz, d.modulus, n, d.initial_gap, d.v0),
                        _ => accel_linearized_bound(
                            &cfg.steps,
                            d.lipschitz,
                            d.modulus,
                            d.nonsmooth_bound,
                            n,
                            need_diameter(d)?,
                        ),
                    };
                    let c = Counts {
                        grad: tp.grad_calls,
                        subgrad: tp.subgrad_calls,
                        stoch: tp.stoch_calls,
                        operator: 0,
                    };
                    out.rows.push(self.row(seed, n as f64, tp.gap.expect("reference attached"), bound, c, tp.elapsed_ms));
                }
            }
        }
        Ok(out)
    }

    /// Smallest `N ≤ cap` with `f(N) ≤ eps`, for `f` nonincreasing.
    fn invert(&self, f: impl Fn(usize) -> f64, eps: f64, cap: usize) -> Result<usize> {
        let mut hi = 1usize;
        while f(hi) > eps {
            if hi >= cap {
                return Err(SlideError::config(
                    "max_iterations",
                    format!("accuracy {eps:e} needs more than {cap} iterations"),
                ));
            }
            hi = (hi * 2).min(cap);
        }
        let mut lo = hi / 2;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if f(mid) <= eps {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi.max(1))
    }

    fn sweep_trial(&self, seed: u64, sweep: &SweepConfig) -> Result<TrialOut> {
        let p = self.problem.fork();
        let mut out = TrialOut::default();
        let d = self.derived;
        let cap = sweep.max_iterations as usize;
        let name = self.config.algorithm.name.as_str();
        if name == "msgs" {
            let delta0 = d.delta0.expect("resolved");
            let last = *sweep.accuracies.last().expect("validated");
            let phases = (delta0 / last).log2().ceil().max(1.0) as usize;
            let cfg = MsgsConfig {
                delta0,
                n0: d.n0,
                phases,
            };
            let rec = msgs_run(&p, &cfg, seed, &RunOptions::quiet())?;
            for &eps in &sweep.accuracies {
                let s = (delta0 / eps).log2().ceil().max(1.0) as usize;
                let ph = &rec.phases[s - 1];
                let bound = delta0 / 2f64.powi(s as i32);
                out.rows.push(self.row(seed, eps, self.gap(&ph.y), bound, ph.counts, 0.0));
            }
            return Ok(out);
        }
        for &eps in &sweep.accuracies {
            let opts = RunOptions {
                target_gap: sweep.stop_at_target.then_some(eps),
                record_objective: sweep.stop_at_target,
                ..Default::default()
            };
            let (rec, bound) = match name {
                "gs" | "sgs" => {
                    if self.config.policy() != "fixed_horizon" {
                        return Err(SlideError::config("algorithm.policy", "sweeps use fixed_horizon"));
                    }
                    let d_x = need_diameter(d)?;
                    let n = self.invert(|n| self.fixed_bound(n, d_x), eps, cap)?;
                    let s = self.fixed_schedule(n)?;
                    debug!("{name} eps {eps:e}: N = {n}, inner = {}", s.total_inner(n));
                    let rec = self.sliding_run(&p, &s, n, seed, &opts)?;
                    let bound = self.fixed_bound(n, d.v0);
                    (rec, bound)
                }
                _ => {
                    let cfg = BaselineConfig::accel_linearized(&p)?;
                    let d_x = need_diameter(d)?;
                    let f = |n| accel_linearized_bound(&cfg.steps, d.lipschitz, d.modulus, d.nonsmooth_bound, n, d_x);
                    let (n, opts) = if sweep.stop_at_target {
                        (cap, opts)
                    } else {
                        (self.invert(f, eps, cap)?, opts)
                    };
                    let rec = accel_prox_run(&p, n, &cfg, &opts)?;
                    let used = rec.trace.last().map_or(n, |t| t.k);
                    (rec, f(used))
                }
            };
            let gap = self.gap(&rec.output);
            let bound = if sweep.stop_at_target { eps } else { bound };
            out.rows.push(self.row(seed, eps, gap, bound, rec.counts, rec.elapsed_ms));
        }
        Ok(out)
    }
}

fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        b = b.num_threads(j);
    }
    let pool = b.build().map_err(|e| SlideError::config("jobs", e.to_string()))?;
    Ok(pool.install(f))
}

fn execute(config: &ExperimentConfig, sweep: Option<&SweepConfig>) -> Result<Report> {
    config.validate()?;
    let spec = config.problem_spec()?;
    info!("preparing {} (n = {}, seed {})", spec.family, spec.n, spec.seed);
    let problem = prepare(&spec, config.output.reference_tol)?;
    let mut derived = derived_constants(&problem, &spec)?;
    let d_tilde = resolve_d_tilde(config, &derived)?;
    derived.d_tilde = d_tilde;
    if config.algorithm.name == "msgs" {
        let mu = derived.strong_convexity;
        if !(mu > 0.0) {
            return Err(SlideError::config("algorithm.name", "msgs needs a strongly convex f"));
        }
        derived.delta0 = Some(match config.algorithm.delta0 {
            Some(v) => v,
            None => default_delta0(&problem, &problem.start())?,
        });
        derived.n0 = Some(config.algorithm.n0.map_or_else(
            || crate::stochastic::default_phase_length(derived.lipschitz, derived.modulus, mu),
            |n| n as usize,
        ));
    }
    if config.algorithm.name == "ssgs" && sweep.is_none() {
        for n in config.horizons() {
            derived.eta.push((n, smoothing_level(&problem, n)?));
        }
    }
    let ctx = Ctx {
        config,
        problem: &problem,
        derived: &derived,
        d_tilde,
    };
    let seeds: Vec<u64> = config.seeds().collect();
    info!(
        "running {} ({}) over {} trial(s)",
        config.algorithm.name,
        config.policy(),
        seeds.len()
    );
    let outs: Vec<TrialOut> = with_pool(config.trials.jobs, || {
        seeds
            .par_iter()
            .map(|&s| match sweep {
                Some(sw) => ctx.sweep_trial(s, sw),
                None => ctx.trial(s),
            })
            .collect::<Result<Vec<_>>>()
    })??;

    let mut rows = Vec::new();
    let mut bounds = Vec::new();
    let mut failures = Vec::new();
    for (i, o) in outs.into_iter().enumerate() {
        rows.extend(o.rows);
        if i == 0 {
            bounds = o.bounds;
        }
        failures.extend(o.count_failures);
    }
    let aggregates = aggregate(&rows);
    let mut checks: Vec<Check> = aggregates
        .iter()
        .map(|a| Check {
            name: format!("{} {} at {}", a.algorithm, a.policy, a.k_or_epsilon),
            value: a.mean_gap,
            bound: a.bound + 2.0 * a.se_gap + BOUND_SLACK,
            holds: a.within_bound(),
        })
        .collect();
    if matches!(config.algorithm.name.as_str(), "gs" | "sgs" | "msgs") && sweep.is_none() {
        for f in &failures {
            debug!("count mismatch: {f}");
        }
        checks.push(Check {
            name: "oracle count identities".into(),
            value: failures.len() as f64,
            bound: 0.0,
            holds: failures.is_empty(),
        });
    }
    let mut fits = Vec::new();
    if let Some(sw) = sweep {
        let name = config.algorithm.name.clone();
        let pts = |f: &dyn Fn(&AggregateRow) -> f64, log2: bool| -> Vec<(f64, f64)> {
            aggregates
                .iter()
                .map(|a| {
                    if log2 {
                        ((derived.delta0.unwrap_or(1.0) / a.k_or_epsilon).log2().ceil().max(1.0), f(a))
                    } else {
                        ((1.0 / a.k_or_epsilon).ln(), f(a).ln())
                    }
                })
                .collect()
        };
        if name == "msgs" {
            let (slope, intercept) = linear_fit(&pts(&|a| a.mean_grad_calls, true));
            fits.push(Fit {
                algorithm: name.clone(),
                series: "grad_calls".into(),
                x: "ceil(log2(delta0/eps))".into(),
                slope,
                intercept,
            });
        } else if sw.accuracies.len() >= 2 {
            for (series, f) in [
                ("grad_calls", &(|a: &AggregateRow| a.mean_grad_calls) as &dyn Fn(&AggregateRow) -> f64),
                ("subgrad_calls", &|a: &AggregateRow| a.mean_subgrad_calls + a.mean_stoch_calls),
            ] {
                let (slope, intercept) = linear_fit(&pts(f, false));
                fits.push(Fit {
                    algorithm: name.clone(),
                    series: series.into(),
                    x: "ln(1/eps)".into(),
                    slope,
                    intercept,
                });
            }
        }
    }
    let report = Report {
        config: config.clone(),
        derived,
        rows,
        aggregates,
        bounds,
        fits,
        checks,
    };
    if let Some(dir) = &config.output.dir {
        report.write(dir, &config.output.formats)?;
        info!("wrote report to {}", dir.display());
    }
    Ok(report)
}

/// Runs every trial at every horizon and writes the configured report files.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Report> {
    if config.sweep.is_some() {
        return Err(SlideError::config("sweep", "use complexity_sweep for sweep configs"));
    }
    execute(config, None)
}

/// For each target accuracy, picks `N` by inverting the method's bound (or
/// runs until the target when `stop_at_target`), and fits call counts against `1/ε`.
pub fn complexity_sweep(config: &ExperimentConfig, accuracies: &[f64]) -> Result<Report> {
    let mut c = config.clone();
    let sweep = match &config.sweep {
        Some(s) => SweepConfig {
            accuracies: accuracies.to_vec(),
            ..s.clone()
        },
        None => SweepConfig {
            accuracies: accuracies.to_vec(),
            stop_at_target: false,
            max_iterations: 1_000_000,
        },
    };
    c.sweep = Some(sweep.clone());
    execute(&c, Some(&sweep))
}

/// The experiments `verify-bounds` runs on a desk instance.
pub fn verification_suite(preset: &str) -> Result<Vec<ExperimentConfig>> {
    let family = ProblemSpec::desk(preset)?.family;
    let mk = |alg: &str, policy: Option<&str>, horizons: &[i64], trials: i64| {
        let mut c = ExperimentConfig::preset(preset, alg, horizons);
        c.algorithm.policy = policy.map(str::to_string);
        c.trials.count = trials;
        c
    };
    Ok(match family.as_str() {
        "quad_l1" => vec![
            mk("gs", None, &[5, 10, 20, 50], 1),
            mk("gs", Some("compact_set"), &[5, 10, 20, 50], 1),
            mk("accel_linearized", None, &[5, 10, 20, 50], 1),
        ],
        "stoch_abs" => vec![
            mk("gs", None, &[5, 10, 20], 1),
            mk("sgs", None, &[5, 10, 20], 50),
        ],
        "strong_quad_l1" => vec![mk("msgs", None, &[], 20)],
        _ => vec![mk("ssgs", None, &[10, 50], 20)],
    })
}

/// Runs [`verification_suite`]; the reports carry the individual checks.
pub fn verify_bounds(preset: &str, jobs: Option<usize>) -> Result<Vec<Report>> {
    verification_suite(preset)?
        .into_iter()
        .map(|mut c| {
            c.trials.jobs = jobs;
            run_experiment(&c)
        })
        .collect()
}
