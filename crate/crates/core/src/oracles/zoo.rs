//! Desk-scale problem families.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::functions::{AbsLossSum, L1Norm, NoisySubgradient, QuadraticLoss, SampledAbsLoss};
use super::{CompositeProblem, NonsmoothFunction};
use crate::error::{Result, SlideError};
use crate::prox::{FeasibleSet, GeometryKind, ProxGeometry, SimpleTerm};
use crate::smoothing::{DualDomain, SaddleSmoother};
use crate::stream::StreamKey;

/// Stream phase reserved for instance data.
const DATA_PHASE: u64 = u64::MAX;

/// Parameters of a zoo instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSpec {
    pub family: String,
    pub n: usize,
    pub m: usize,
    pub lambda: f64,
    pub mu: f64,
    /// Weight `c` of the quadratic loss `c·½‖Ax − b‖²`.
    pub scale: f64,
    /// Amplitude of the planted sparse signal behind `b`.
    pub signal: f64,
    /// Fraction of nonzero entries (or jumps) in the planted signal.
    pub density: f64,
    /// `B` in `λ‖Bx‖₁`: `"identity"` or `"difference"` (forward differences).
    pub operator: String,
    /// Attach a noisy subgradient oracle with this `σ` (ignored by `stoch_abs`).
    pub sigma: Option<f64>,
    /// Half-width of the box `X = [−r, r]ⁿ`; `None` means `X = ℝⁿ`.
    /// For the entropy geometry, the simplex scale.
    pub radius: Option<f64>,
    /// `"euclidean"` or `"entropy"`.
    pub geometry: String,
    /// Number of data rows of `stoch_abs`.
    pub samples: usize,
    /// Use `A = I` (needs `m = n`).
    pub identity: bool,
    /// Explicit right-hand side `b`.
    pub rhs: Option<Vec<f64>>,
    pub seed: u64,
}

impl Default for ProblemSpec {
    fn default() -> Self {
        ProblemSpec {
            family: "quad_l1".into(),
            n: 50,
            m: 80,
            lambda: 0.1,
            mu: 0.0,
            scale: 1.0,
            signal: 1.0,
            density: 0.1,
            operator: "identity".into(),
            sigma: None,
            radius: None,
            geometry: "euclidean".into(),
            samples: 200,
            identity: false,
            rhs: None,
            seed: 7,
        }
    }
}

impl ProblemSpec {
    pub fn new(family: &str) -> Self {
        ProblemSpec {
            family: family.into(),
            ..Default::default()
        }
    }

    /// A calibrated desk instance.
    ///
    /// Besides the family names, `"quad_l1_sweep"` names a cheaper `quad_l1`
    /// instance (identity operator) used for accuracy sweeps down to `1e-4`.
    pub fn desk(name: &str) -> Result<Self> {
        let spec = match name {
            "quad_l1" => ProblemSpec {
                lambda: 1.2e-2,
                scale: 0.015,
                signal: 0.3,
                operator: "difference".into(),
                radius: Some(1.0),
                ..ProblemSpec::new("quad_l1")
            },
            "quad_l1_sweep" => ProblemSpec {
                lambda: 0.02,
                radius: Some(0.05),
                ..ProblemSpec::new("quad_l1")
            },
            "strong_quad_l1" => ProblemSpec {
                lambda: 0.02,
                mu: 1.0,
                sigma: Some(0.5),
                ..ProblemSpec::new("strong_quad_l1")
            },
            "stoch_abs" => ProblemSpec {
                lambda: 0.1,
                radius: Some(0.5),
                ..ProblemSpec::new("stoch_abs")
            },
            "saddle_linf" => ProblemSpec {
                lambda: 0.01,
                sigma: Some(0.1),
                radius: Some(1.0),
                ..ProblemSpec::new("saddle_linf")
            },
            other => return Err(SlideError::UnknownFamily(other.into())),
        };
        Ok(spec)
    }
}

/// `(name, description)` of every family.
pub fn problem_families() -> &'static [(&'static str, &'static str)] {
    &[
        ("quad_l1", "½‖Ax − b‖² + λ‖x‖₁"),
        ("strong_quad_l1", "½‖Ax − b‖² + (μ/2)‖x‖² + λ‖x‖₁"),
        ("stoch_abs", "½‖Ax − b‖² + λ·mean|⟨cᵢ, x⟩ − dᵢ| with single-row subgradients"),
        ("saddle_linf", "‖Ax − b‖_∞ + λ‖x‖₁ as a max over the simplex"),
    ]
}

fn gaussian(rng: &mut impl Rng, rows: usize, cols: usize, sd: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| sd * rng.sample::<f64, _>(StandardNormal))
}

struct Data {
    a: DMatrix<f64>,
    b: DVector<f64>,
}

fn data(spec: &ProblemSpec, rng: &mut impl Rng) -> Result<Data> {
    let (n, m) = (spec.n, spec.m);
    let a = if spec.identity {
        if m != n {
            return Err(SlideError::param("m", "identity operator needs m = n"));
        }
        DMatrix::identity(n, n)
    } else {
        gaussian(rng, m, n, 1.0 / (m as f64).sqrt())
    };
    let b = match &spec.rhs {
        Some(b) if b.len() != m => {
            return Err(SlideError::DimensionMismatch {
                expected: m,
                got: b.len(),
            })
        }
        Some(b) => DVector::from_column_slice(b),
        None => {
            // planted signal, sparse in B, plus noise
            let support = ((spec.density * n as f64).ceil() as usize).clamp(1, n);
            let mut x = DVector::zeros(n);
            for i in 0..support {
                x[i * n / support] = spec.signal * rng.sample::<f64, _>(StandardNormal);
            }
            if spec.operator == "difference" {
                for i in 1..n {
                    x[i] += x[i - 1];
                }
            }
            &a * x + gaussian(rng, m, 1, 0.1 * spec.signal).column(0)
        }
    };
    Ok(Data { a, b })
}

fn geometry(spec: &ProblemSpec, require_bounded: bool) -> Result<ProxGeometry> {
    let n = spec.n;
    match spec.geometry.as_str() {
        "euclidean" => {
            let set = match spec.radius {
                Some(r) => FeasibleSet::cube(n, r)?,
                None if require_bounded => {
                    return Err(SlideError::param("radius", "this family needs a bounded X"))
                }
                None => FeasibleSet::WholeSpace,
            };
            ProxGeometry::euclidean(n, set)
        }
        "entropy" => ProxGeometry::entropy_simplex(n, spec.radius.unwrap_or(1.0)),
        other => Err(SlideError::param(
            "geometry",
            format!("unknown geometry `{other}`"),
        )),
    }
}

/// Builds a zoo instance; deterministic in `spec`.
pub fn make_problem(spec: &ProblemSpec) -> Result<CompositeProblem> {
    if !problem_families().iter().any(|(f, _)| *f == spec.family) {
        return Err(SlideError::UnknownFamily(spec.family.clone()));
    }
    if spec.n == 0 || spec.m == 0 {
        return Err(SlideError::param("n", "dimensions must be positive"));
    }
    if !(spec.lambda >= 0.0) || !spec.lambda.is_finite() {
        return Err(SlideError::param("lambda", "must be finite and nonnegative"));
    }
    if !(spec.mu >= 0.0) || !spec.mu.is_finite() {
        return Err(SlideError::param("mu", "must be finite and nonnegative"));
    }
    if let Some(r) = spec.radius {
        if !(r > 0.0) || !r.is_finite() {
            return Err(SlideError::param("radius", "must be positive and finite"));
        }
    }
    let mut rng = StreamKey::new(spec.seed).rng(DATA_PHASE, 0);
    let d = data(spec, &mut rng)?;
    let geo = geometry(spec, spec.family == "saddle_linf")?;
    let kind = geo.kind();
    let name = spec.family.clone();

    let problem = match spec.family.as_str() {
        "quad_l1" | "strong_quad_l1" => {
            let mu = if spec.family == "strong_quad_l1" { spec.mu } else { 0.0 };
            if spec.family == "strong_quad_l1" && !(mu > 0.0) {
                return Err(SlideError::param("mu", "strong_quad_l1 needs mu > 0"));
            }
            let f = QuadraticLoss::new(d.a, d.b)?
                .with_scale(spec.scale)?
                .with_mu(mu)?;
            let h = l1_term(spec, kind, &mut rng)?;
            with_noise(
                CompositeProblem::new(name, geo, Arc::new(f), h.clone(), SimpleTerm::Zero)?,
                h,
                spec.sigma,
                kind,
            )?
        }
        "stoch_abs" => {
            if spec.samples == 0 {
                return Err(SlideError::param("samples", "must be positive"));
            }
            let c = gaussian(&mut rng, spec.samples, spec.n, 1.0 / (spec.n as f64).sqrt());
            let x_plant = gaussian(&mut rng, spec.n, 1, 0.5).column(0).into_owned();
            let noise = gaussian(&mut rng, spec.samples, 1, 0.1).column(0).into_owned();
            let dvec = &c * x_plant + noise;
            let h = Arc::new(AbsLossSum::new(c * spec.lambda, dvec * spec.lambda)?);
            let f = QuadraticLoss::new(d.a, d.b)?
                .with_scale(spec.scale)?
                .with_mu(spec.mu)?;
            CompositeProblem::new(name, geo, Arc::new(f), h.clone(), SimpleTerm::Zero)?
                .with_stochastic(Arc::new(SampledAbsLoss::new(h)))
        }
        "saddle_linf" => {
            // ‖v‖_∞ = max over the simplex in ℝ^{2m} of ⟨(v, −v), y⟩
            let m = spec.m;
            let mut a2 = DMatrix::zeros(2 * m, spec.n);
            a2.rows_mut(0, m).copy_from(&d.a);
            a2.rows_mut(m, m).copy_from(&(-&d.a));
            let mut b2 = DVector::zeros(2 * m);
            b2.rows_mut(0, m).copy_from(&d.b);
            b2.rows_mut(m, m).copy_from(&(-&d.b));
            let f = SaddleSmoother::new(a2, Some(b2), DualDomain::Simplex, kind, 1.0)?;
            let h: Arc<dyn NonsmoothFunction> = Arc::new(L1Norm::new(spec.n, spec.lambda, kind)?);
            with_noise(
                CompositeProblem::new(name, geo, Arc::new(f), h.clone(), SimpleTerm::Zero)?,
                h,
                spec.sigma,
                kind,
            )?
        }
        _ => unreachable!("family checked above"),
    };
    Ok(problem)
}

fn l1_term(
    spec: &ProblemSpec,
    kind: GeometryKind,
    rng: &mut impl Rng,
) -> Result<Arc<dyn NonsmoothFunction>> {
    Ok(match spec.operator.as_str() {
        "random" => {
            if kind != GeometryKind::Euclidean {
                return Err(SlideError::param("operator", "needs the euclidean geometry"));
            }
            let b = gaussian(rng, spec.m, spec.n, 1.0 / (spec.m as f64).sqrt());
            Arc::new(L1Norm::with_operator(b, spec.lambda)?)
        }
        "identity" => Arc::new(L1Norm::new(spec.n, spec.lambda, kind)?),
        "difference" => {
            if kind != GeometryKind::Euclidean {
                return Err(SlideError::param("operator", "needs the euclidean geometry"));
            }
            let n = spec.n;
            if n < 2 {
                return Err(SlideError::param("n", "difference operator needs n ≥ 2"));
            }
            let b = DMatrix::from_fn(n - 1, n, |i, j| {
                if j == i + 1 {
                    1.0
                } else if j == i {
                    -1.0
                } else {
                    0.0
                }
            });
            Arc::new(L1Norm::with_operator(b, spec.lambda)?)
        }
        other => {
            return Err(SlideError::param(
                "operator",
                format!("unknown operator `{other}`"),
            ))
        }
    })
}

fn with_noise(
    p: CompositeProblem,
    h: Arc<dyn NonsmoothFunction>,
    sigma: Option<f64>,
    kind: GeometryKind,
) -> Result<CompositeProblem> {
    Ok(match sigma {
        Some(s) => p.with_stochastic(Arc::new(NoisySubgradient::new(h, s, kind)?)),
        None => p,
    })
}
