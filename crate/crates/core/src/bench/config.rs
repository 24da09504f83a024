//! Experiment configuration, read from a TOML file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SlideError};
use crate::oracles::ProblemSpec;

/// Algorithms the runner knows.
pub const ALGORITHMS: [&str; 7] = [
    "gs",
    "sgs",
    "msgs",
    "ssgs",
    "prox_grad",
    "accel_prox",
    "accel_linearized",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Name of a desk instance; exclusive with `problem`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemSpec>,
    pub algorithm: AlgorithmConfig,
    #[serde(default)]
    pub trials: TrialsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmConfig {
    pub name: String,
    /// `fixed_horizon` or `compact_set` for the sliding methods.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<String>,
    /// Iteration counts `N` at which gaps are reported.
    #[serde(default)]
    pub horizons: Vec<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_tilde: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n0: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phases: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrialsConfig {
    pub count: i64,
    pub first_seed: u64,
    /// Worker threads; all cores when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
}

impl Default for TrialsConfig {
    fn default() -> Self {
        TrialsConfig {
            count: 1,
            first_seed: 0,
            jobs: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Target accuracies, positive and strictly decreasing.
    pub accuracies: Vec<f64>,
    /// Stop each run at the first iterate within the target.
    #[serde(default)]
    pub stop_at_target: bool,
    /// Iteration cap for anytime methods.
    #[serde(default = "default_max_iterations")]
    pub max_iterations: i64,
}

fn default_max_iterations() -> i64 {
    1_000_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    pub formats: Vec<Format>,
    /// Fill the `elapsed_ms` column. Off by default so reports are byte-identical.
    pub timing: bool,
    pub reference_tol: f64,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: None,
            formats: vec![Format::Csv, Format::Json],
            timing: false,
            reference_tol: 1e-10,
        }
    }
}

impl ExperimentConfig {
    /// A one-trial run of `algorithm` on a desk instance.
    pub fn preset(preset: &str, algorithm: &str, horizons: &[i64]) -> Self {
        ExperimentConfig {
            preset: Some(preset.into()),
            problem: None,
            algorithm: AlgorithmConfig {
                name: algorithm.into(),
                policy: None,
                horizons: horizons.to_vec(),
                d_tilde: None,
                delta0: None,
                n0: None,
                phases: None,
            },
            trials: TrialsConfig::default(),
            sweep: None,
            output: OutputConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let c: ExperimentConfig =
            toml::from_str(text).map_err(|e| SlideError::config("toml", e.message()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn problem_spec(&self) -> Result<ProblemSpec> {
        match (&self.preset, &self.problem) {
            (Some(_), Some(_)) => Err(SlideError::config(
                "preset",
                "give either a preset or a [problem] table, not both",
            )),
            (Some(name), None) => ProblemSpec::desk(name),
            (None, Some(spec)) => Ok(spec.clone()),
            (None, None) => Err(SlideError::config("problem", "missing")),
        }
    }

    /// The policy, defaulting to `fixed_horizon` for the sliding methods.
    pub fn policy(&self) -> &str {
        self.algorithm.policy.as_deref().unwrap_or(match self.algorithm.name.as_str() {
            "gs" | "sgs" | "msgs" | "ssgs" => "fixed_horizon",
            "prox_grad" => "constant",
            "accel_prox" => "accelerated",
            _ => "linearized",
        })
    }

    pub fn horizons(&self) -> Vec<usize> {
        self.algorithm.horizons.iter().map(|&n| n as usize).collect()
    }

    pub fn seeds(&self) -> std::ops::Range<u64> {
        let first = self.trials.first_seed;
        first..first + self.trials.count as u64
    }

    pub fn phases(&self) -> usize {
        self.algorithm.phases.unwrap_or(6) as usize
    }

    pub fn validate(&self) -> Result<()> {
        let a = &self.algorithm;
        if !ALGORITHMS.contains(&a.name.as_str()) {
            return Err(SlideError::config(
                "algorithm.name",
                format!("`{}` is not one of {}", a.name, ALGORITHMS.join(", ")),
            ));
        }
        let policy = self.policy();
        let allowed: &[&str] = match a.name.as_str() {
            "gs" | "sgs" => &["fixed_horizon", "compact_set"],
            "msgs" | "ssgs" => &["fixed_horizon"],
            "prox_grad" => &["constant"],
            "accel_prox" => &["accelerated"],
            _ => &["linearized"],
        };
        if !allowed.contains(&policy) {
            return Err(SlideError::config(
                "algorithm.policy",
                format!("`{policy}` is not valid for {}", a.name),
            ));
        }
        if self.trials.count < 1 {
            return Err(SlideError::config("trials.count", "must be at least 1"));
        }
        if self.trials.jobs == Some(0) {
            return Err(SlideError::config("trials.jobs", "must be at least 1"));
        }
        if let Some(&bad) = a.horizons.iter().find(|&&n| n < 1) {
            return Err(SlideError::config("N", format!("{bad} is not a positive iteration count")));
        }
        let needs_horizons = self.sweep.is_none() && a.name != "msgs";
        if needs_horizons && a.horizons.is_empty() {
            return Err(SlideError::config("N", "at least one horizon is required"));
        }
        if let Some(d) = a.d_tilde {
            if !(d > 0.0) || !d.is_finite() {
                return Err(SlideError::config("D_tilde", "must be positive and finite"));
            }
        }
        if let Some(d) = a.delta0 {
            if !(d > 0.0) || !d.is_finite() {
                return Err(SlideError::config("delta0", "must be positive and finite"));
            }
        }
        if matches!(a.n0, Some(n) if n < 1) {
            return Err(SlideError::config("N0", "must be at least 1"));
        }
        if matches!(a.phases, Some(n) if n < 1) {
            return Err(SlideError::config("phases", "must be at least 1"));
        }
        if let Some(s) = &self.sweep {
            if s.accuracies.is_empty() {
                return Err(SlideError::config("accuracies", "must not be empty"));
            }
            if s.accuracies.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
                return Err(SlideError::config("accuracies", "must be positive"));
            }
            if s.accuracies.windows(2).any(|w| w[1] >= w[0]) {
                return Err(SlideError::config("accuracies", "must be strictly decreasing"));
            }
            if s.max_iterations < 1 {
                return Err(SlideError::config("max_iterations", "must be at least 1"));
            }
            if matches!(a.name.as_str(), "prox_grad" | "accel_prox" | "ssgs") {
                return Err(SlideError::config(
                    "algorithm.name",
                    format!("{} has no target-accuracy mode", a.name),
                ));
            }
        }
        if !(self.output.reference_tol >= 1e-12) {
            return Err(SlideError::config("reference_tol", "must be at least 1e-12"));
        }
        self.problem_spec()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn negative_horizon_names_field() {
        let text = r#"
            preset = "quad_l1"
            [algorithm]
            name = "gs"
            horizons = [5, -1]
        "#;
        let err = ExperimentConfig::from_toml(text).unwrap_err();
        assert!(err.to_string().contains("`N`"), "{err}");
    }

    #[test]
    fn toml_round_trip() {
        let mut c = ExperimentConfig::preset("quad_l1", "gs", &[5, 10]);
        c.sweep = Some(SweepConfig {
            accuracies: vec![1e-1, 1e-2],
            stop_at_target: true,
            max_iterations: 10,
        });
        let back = ExperimentConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_bad_fields() {
        let mut c = ExperimentConfig::preset("quad_l1", "gs", &[5]);
        c.algorithm.policy = Some("accelerated".into());
        assert!(c.validate().unwrap_err().to_string().contains("algorithm.policy"));
        let mut c = ExperimentConfig::preset("quad_l1", "gs", &[5]);
        c.sweep = Some(SweepConfig {
            accuracies: vec![1e-2, 1e-1],
            stop_at_target: false,
            max_iterations: 10,
        });
        assert!(c.validate().unwrap_err().to_string().contains("accuracies"));
        let c = ExperimentConfig::preset("nope", "gs", &[5]);
        assert!(c.validate().is_err());
        assert!(ExperimentConfig::from_toml("[algorithm]\nname = \"gs\"\nbogus = 1").is_err());
    }
}
