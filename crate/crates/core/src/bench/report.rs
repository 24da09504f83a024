//! Report rows, aggregation and file output.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Format};
use super::svg::{line_chart, Series};
use crate::error::{Result, SlideError};

/// Absolute slack allowed when comparing a gap with its bound.
pub const BOUND_SLACK: f64 = 1e-8;

/// One CSV row: one trial at one checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub trial_seed: u64,
    pub algorithm: String,
    pub policy: String,
    pub k_or_epsilon: f64,
    pub gap: f64,
    pub bound: f64,
    pub grad_calls: u64,
    pub subgrad_calls: u64,
    pub stoch_calls: u64,
    pub elapsed_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub algorithm: String,
    pub policy: String,
    pub k_or_epsilon: f64,
    pub trials: u64,
    pub mean_gap: f64,
    pub se_gap: f64,
    pub bound: f64,
    pub mean_grad_calls: f64,
    pub mean_subgrad_calls: f64,
    pub mean_stoch_calls: f64,
}

impl AggregateRow {
    /// `mean_gap ≤ bound + 2·SE + BOUND_SLACK`.
    pub fn within_bound(&self) -> bool {
        self.mean_gap <= self.bound + 2.0 * self.se_gap + BOUND_SLACK
    }
}

/// Constants the run depended on.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Derived {
    pub family: String,
    pub dim: usize,
    pub lipschitz: f64,
    pub nonsmooth_bound: f64,
    pub sigma: f64,
    pub modulus: f64,
    pub strong_convexity: f64,
    pub diameter: Option<f64>,
    /// `V(x₀, x*)`.
    pub v0: f64,
    /// `max_{x∈X} V(x*, x)`, when `X` is bounded.
    pub vbar: Option<f64>,
    pub psi_star: f64,
    pub certified_gap: f64,
    pub initial_gap: f64,
    pub d_tilde: Option<f64>,
    pub delta0: Option<f64>,
    pub n0: Option<usize>,
    pub operator_norm: Option<f64>,
    pub operator_norm_kind: Option<String>,
    pub dual_range: Option<f64>,
    /// `(N, η)` for each smoothed run.
    pub eta: Vec<(usize, f64)>,
}

/// A named bound value not shown in the CSV `bound` column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundValue {
    pub name: String,
    pub k_or_epsilon: f64,
    pub value: f64,
}

/// Least-squares line `y = slope·x + intercept`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub algorithm: String,
    pub series: String,
    pub x: String,
    pub slope: f64,
    pub intercept: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: ExperimentConfig,
    pub derived: Derived,
    #[serde(skip)]
    pub rows: Vec<ReportRow>,
    pub aggregates: Vec<AggregateRow>,
    pub bounds: Vec<BoundValue>,
    pub fits: Vec<Fit>,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn all_bounds_hold(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }

    pub fn fit(&self, algorithm: &str, series: &str) -> Option<&Fit> {
        self.fits
            .iter()
            .find(|f| f.algorithm == algorithm && f.series == series)
    }

    pub fn rows_csv(&self) -> Result<String> {
        to_csv(&self.rows)
    }

    pub fn aggregates_csv(&self) -> Result<String> {
        to_csv(&self.aggregates)
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Line chart of gaps and bounds, or of calls for sweeps.
    pub fn svg(&self) -> String {
        let mut series = Vec::new();
        let mut keys: Vec<(String, String)> = Vec::new();
        for a in &self.aggregates {
            let key = (a.algorithm.clone(), a.policy.clone());
            if !keys.contains(&key) {
                keys.push(key);
            }
        }
        let sweep = self.config.sweep.is_some();
        for (alg, pol) in &keys {
            let of = |f: &dyn Fn(&AggregateRow) -> f64| -> Vec<(f64, f64)> {
                self.aggregates
                    .iter()
                    .filter(|a| &a.algorithm == alg && &a.policy == pol)
                    .map(|a| {
                        let x = if sweep { 1.0 / a.k_or_epsilon } else { a.k_or_epsilon };
                        (x, f(a))
                    })
                    .collect()
            };
            if sweep {
                series.push(Series::new(format!("{alg} grad"), of(&|a| a.mean_grad_calls), false));
                series.push(Series::new(
                    format!("{alg} subgrad"),
                    of(&|a| a.mean_subgrad_calls + a.mean_stoch_calls),
                    true,
                ));
            } else {
                series.push(Series::new(format!("{alg} {pol} gap"), of(&|a| a.mean_gap), false));
                series.push(Series::new(format!("{alg} {pol} bound"), of(&|a| a.bound), true));
            }
        }
        if sweep {
            line_chart("oracle calls", "1/epsilon", "calls", &series)
        } else {
            line_chart("optimality gap", "k", "gap", &series)
        }
    }

    /// Writes `rows.csv` and `aggregate.csv`, `summary.json`, `chart.svg` as requested.
    pub fn write(&self, dir: &Path, formats: &[Format]) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for f in formats {
            match f {
                Format::Csv => {
                    std::fs::write(dir.join("rows.csv"), self.rows_csv()?)?;
                    std::fs::write(dir.join("aggregate.csv"), self.aggregates_csv()?)?;
                }
                Format::Json => std::fs::write(dir.join("summary.json"), self.summary_json())?,
                Format::Svg => std::fs::write(dir.join("chart.svg"), self.svg())?,
            }
        }
        Ok(())
    }
}

fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| SlideError::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| SlideError::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

fn from_csv<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<T>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .map(|r| r.map_err(|e| SlideError::Io(e.to_string())))
        .collect()
}

pub fn parse_rows(text: &str) -> Result<Vec<ReportRow>> {
    from_csv(text)
}

pub fn parse_aggregates(text: &str) -> Result<Vec<AggregateRow>> {
    from_csv(text)
}

/// Groups rows by `(algorithm, policy, k_or_epsilon)` in order of first appearance.
pub fn aggregate(rows: &[ReportRow]) -> Vec<AggregateRow> {
    let mut order: Vec<(String, String, u64)> = Vec::new();
    let mut groups: HashMap<(String, String, u64), Vec<&ReportRow>> = HashMap::new();
    for r in rows {
        let key = (r.algorithm.clone(), r.policy.clone(), r.k_or_epsilon.to_bits());
        groups
            .entry(key.clone())
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(r);
    }
    order
        .into_iter()
        .map(|key| {
            let g = &groups[&key];
            let n = g.len() as f64;
            let mean = |f: &dyn Fn(&ReportRow) -> f64| g.iter().map(|r| f(r)).sum::<f64>() / n;
            let mean_gap = mean(&|r| r.gap);
            let se_gap = if g.len() > 1 {
                let var = g.iter().map(|r| (r.gap - mean_gap).powi(2)).sum::<f64>() / (n - 1.0);
                (var / n).sqrt()
            } else {
                0.0
            };
            AggregateRow {
                algorithm: key.0,
                policy: key.1,
                k_or_epsilon: f64::from_bits(key.2),
                trials: g.len() as u64,
                mean_gap,
                se_gap,
                bound: mean(&|r| r.bound),
                mean_grad_calls: mean(&|r| r.grad_calls as f64),
                mean_subgrad_calls: mean(&|r| r.subgrad_calls as f64),
                mean_stoch_calls: mean(&|r| r.stoch_calls as f64),
            }
        })
        .collect()
}

/// Least-squares fit through `(x, y)`.
pub fn linear_fit(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(seed: u64, k: f64, gap: f64) -> ReportRow {
        ReportRow {
            trial_seed: seed,
            algorithm: "sgs".into(),
            policy: "fixed_horizon".into(),
            k_or_epsilon: k,
            gap,
            bound: 1.0,
            grad_calls: 3,
            subgrad_calls: 0,
            stoch_calls: 7,
            elapsed_ms: None,
        }
    }

    #[test]
    fn aggregate_mean_and_se() {
        let rows = vec![row(0, 5.0, 1.0), row(1, 5.0, 3.0), row(0, 10.0, 0.5)];
        let a = aggregate(&rows);
        assert_eq!(a.len(), 2);
        assert_eq!(a[0].mean_gap, 2.0);
        // sample sd √2, SE = √2/√2
        assert!((a[0].se_gap - 1.0).abs() < 1e-15);
        assert_eq!(a[1].se_gap, 0.0);
        assert_eq!(a[1].trials, 1);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let rows = vec![row(0, 5.0, 0.1 + 0.2), row(1, 5.0, 1.0 / 3.0), row(2, 5.0, 1e-300)];
        let text = to_csv(&rows).unwrap();
        assert!(text.starts_with(
            "trial_seed,algorithm,policy,k_or_epsilon,gap,bound,grad_calls,subgrad_calls,stoch_calls,elapsed_ms\n"
        ));
        let back = parse_rows(&text).unwrap();
        assert_eq!(back, rows);
        assert_eq!(aggregate(&back), aggregate(&rows));
    }

    #[test]
    fn fit_recovers_line() {
        let pts: Vec<_> = (0..5).map(|i| (i as f64, 2.0 * i as f64 - 1.0)).collect();
        let (s, c) = linear_fit(&pts);
        assert!((s - 2.0).abs() < 1e-14 && (c + 1.0).abs() < 1e-14);
    }
}
