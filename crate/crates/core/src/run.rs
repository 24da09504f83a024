//! Run records shared by all drivers.

use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::oracles::{CompositeProblem, Counts};

/// What a driver records while it runs.
#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Starting point; the problem's default start when `None`.
    pub start: Option<DVector<f64>>,
    /// Evaluate `Ψ(x̄_k)` after every outer iteration (uncounted).
    pub record_objective: bool,
    /// Keep a copy of every `x̄_k`.
    pub record_iterates: bool,
    /// Stop as soon as the recorded gap is at most this value.
    pub target_gap: Option<f64>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            start: None,
            record_objective: true,
            record_iterates: false,
            target_gap: None,
        }
    }
}

impl RunOptions {
    pub fn quiet() -> Self {
        RunOptions {
            record_objective: false,
            ..Default::default()
        }
    }

    pub fn from_start(start: DVector<f64>) -> Self {
        RunOptions {
            start: Some(start),
            ..Default::default()
        }
    }

    pub(crate) fn start_point(&self, problem: &CompositeProblem) -> DVector<f64> {
        self.start.clone().unwrap_or_else(|| problem.start())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub k: usize,
    pub objective: Option<f64>,
    pub gap: Option<f64>,
    pub grad_calls: u64,
    pub subgrad_calls: u64,
    pub stoch_calls: u64,
    pub elapsed_ms: f64,
    #[serde(skip)]
    pub x_bar: Option<DVector<f64>>,
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub algorithm: String,
    pub policy: String,
    pub seed: Option<u64>,
    pub trace: Vec<TracePoint>,
    pub output: DVector<f64>,
    /// The last prox iterate `x_N` (equal to `output` for single-sequence methods).
    pub last: DVector<f64>,
    pub counts: Counts,
    pub elapsed_ms: f64,
}

impl RunRecord {
    pub fn final_gap(&self) -> Option<f64> {
        self.trace.last().and_then(|p| p.gap)
    }

    pub fn best_objective(&self) -> Option<f64> {
        self.trace
            .iter()
            .filter_map(|p| p.objective)
            .min_by(f64::total_cmp)
    }
}

/// Bookkeeping for one run: start counters, clock and trace.
pub(crate) struct Recorder<'a> {
    problem: &'a CompositeProblem,
    options: &'a RunOptions,
    base: Counts,
    clock: Instant,
    trace: Vec<TracePoint>,
}

impl<'a> Recorder<'a> {
    pub fn new(problem: &'a CompositeProblem, options: &'a RunOptions, capacity: usize) -> Self {
        Recorder {
            problem,
            options,
            base: problem.counts(),
            clock: Instant::now(),
            trace: Vec::with_capacity(capacity),
        }
    }

    pub fn counts(&self) -> Counts {
        let now = self.problem.counts();
        Counts {
            grad: now.grad - self.base.grad,
            subgrad: now.subgrad - self.base.subgrad,
            stoch: now.stoch - self.base.stoch,
            operator: now.operator - self.base.operator,
        }
    }

    /// Appends a trace point; returns `true` once the target gap is reached.
    pub fn record(&mut self, k: usize, x_bar: &DVector<f64>) -> bool {
        let c = self.counts();
        let objective = self
            .options
            .record_objective
            .then(|| self.problem.objective(x_bar));
        let gap = match (objective, self.problem.reference()) {
            (Some(v), Some(r)) => Some(v - r.value),
            _ => None,
        };
        self.trace.push(TracePoint {
            k,
            objective,
            gap,
            grad_calls: c.grad,
            subgrad_calls: c.subgrad,
            stoch_calls: c.stoch,
            elapsed_ms: self.clock.elapsed().as_secs_f64() * 1e3,
            x_bar: self.options.record_iterates.then(|| x_bar.clone()),
        });
        matches!((gap, self.options.target_gap), (Some(g), Some(t)) if g <= t)
    }

    pub fn finish(
        self,
        algorithm: &str,
        policy: &str,
        seed: Option<u64>,
        output: DVector<f64>,
        last: DVector<f64>,
    ) -> RunRecord {
        let counts = self.counts();
        RunRecord {
            algorithm: algorithm.to_string(),
            policy: policy.to_string(),
            seed,
            trace: self.trace,
            output,
            last,
            counts,
            elapsed_ms: self.clock.elapsed().as_secs_f64() * 1e3,
        }
    }
}
