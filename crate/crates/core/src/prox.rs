//! Distance generating functions, Bregman distances and closed-form composite
//! prox-mappings.
//!
//! Two geometries are supported: the Euclidean one (`ω = ½‖·‖²`, ℓ2 norm) over
//! a box, ball, scaled simplex or the whole space, and the entropy one
//! (`ω = Σ xᵢ log xᵢ`, ℓ1 norm) over a scaled simplex.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SlideError};
use crate::linalg::{project_simplex, soft_threshold};

/// Absolute feasibility tolerance for anchors and iterates.
pub const FEASIBILITY_TOL: f64 = 1e-12;
/// Tolerance used by optimality certificates of prox outputs.
pub const CERTIFICATE_TOL: f64 = 1e-8;
/// Coordinates of entropy anchors are lifted to at least this value before
/// the mirror map is evaluated.
pub const ENTROPY_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryKind {
    Euclidean,
    EntropySimplex,
}

/// The constraint set `X`.
#[derive(Debug, Clone, PartialEq)]
pub enum FeasibleSet {
    WholeSpace,
    Box { lo: DVector<f64>, hi: DVector<f64> },
    Ball { center: DVector<f64>, radius: f64 },
    Simplex { scale: f64 },
}

impl FeasibleSet {
    pub fn boxed(lo: DVector<f64>, hi: DVector<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(SlideError::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        if lo.iter().chain(hi.iter()).any(|v| !v.is_finite()) {
            return Err(SlideError::NonFinite("box bounds"));
        }
        if lo.iter().zip(hi.iter()).any(|(l, h)| l > h) {
            return Err(SlideError::param("box", "lower bound exceeds upper bound"));
        }
        Ok(FeasibleSet::Box { lo, hi })
    }

    /// The cube `[-r, r]ⁿ`.
    pub fn cube(n: usize, r: f64) -> Result<Self> {
        Self::boxed(DVector::from_element(n, -r), DVector::from_element(n, r))
    }

    pub fn ball(center: DVector<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(SlideError::param("radius", "must be positive and finite"));
        }
        Ok(FeasibleSet::Ball { center, radius })
    }

    pub fn simplex(scale: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(SlideError::param("scale", "must be positive and finite"));
        }
        Ok(FeasibleSet::Simplex { scale })
    }

    pub fn is_bounded(&self) -> bool {
        !matches!(self, FeasibleSet::WholeSpace)
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        let expected = match self {
            FeasibleSet::Box { lo, .. } => lo.len(),
            FeasibleSet::Ball { center, .. } => center.len(),
            _ => return Ok(()),
        };
        if expected != n {
            return Err(SlideError::DimensionMismatch { expected, got: n });
        }
        Ok(())
    }

    /// Size of the constraint violation of `x` (0 when feasible).
    pub fn violation(&self, x: &DVector<f64>) -> f64 {
        match self {
            FeasibleSet::WholeSpace => 0.0,
            FeasibleSet::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi.iter()))
                .map(|(v, (l, h))| (l - v).max(v - h).max(0.0))
                .fold(0.0, f64::max),
            FeasibleSet::Ball { center, radius } => ((x - center).norm() - radius).max(0.0),
            FeasibleSet::Simplex { scale } => {
                let neg = (-x.min()).max(0.0);
                neg.max((x.sum() - scale).abs())
            }
        }
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        self.violation(x) <= FEASIBILITY_TOL
    }

    /// Euclidean projection onto the set.
    pub fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            FeasibleSet::WholeSpace => x.clone(),
            FeasibleSet::Box { lo, hi } => x.zip_zip_map(lo, hi, |v, l, h| v.clamp(l, h)),
            FeasibleSet::Ball { center, radius } => {
                let d = x - center;
                let nd = d.norm();
                if nd > *radius {
                    center + d * (radius / nd)
                } else {
                    x.clone()
                }
            }
            FeasibleSet::Simplex { scale } => project_simplex(x, *scale),
        }
    }

    /// A canonical starting point inside the set.
    pub fn center(&self, n: usize) -> DVector<f64> {
        match self {
            FeasibleSet::WholeSpace => DVector::zeros(n),
            FeasibleSet::Box { lo, hi } => (lo + hi) * 0.5,
            FeasibleSet::Ball { center, .. } => center.clone(),
            FeasibleSet::Simplex { scale } => DVector::from_element(n, scale / n as f64),
        }
    }

    /// `min_{z ∈ X} ⟨g, z⟩`, `-∞` when unbounded below.
    pub fn min_linear(&self, g: &DVector<f64>) -> f64 {
        match self {
            FeasibleSet::WholeSpace => {
                if g.iter().all(|&v| v == 0.0) {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            FeasibleSet::Box { lo, hi } => g
                .iter()
                .zip(lo.iter().zip(hi.iter()))
                .map(|(gi, (l, h))| (gi * l).min(gi * h))
                .sum(),
            FeasibleSet::Ball { center, radius } => g.dot(center) - radius * g.norm(),
            FeasibleSet::Simplex { scale } => scale * g.min(),
        }
    }
}

/// The simple convex term `𝒳` handled exactly inside the prox-mapping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimpleTerm {
    Zero,
    L1(f64),
}

impl SimpleTerm {
    pub fn l1(weight: f64) -> Result<Self> {
        if !(weight >= 0.0) || !weight.is_finite() {
            return Err(SlideError::param("lambda", "must be finite and nonnegative"));
        }
        Ok(SimpleTerm::L1(weight))
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        match *self {
            SimpleTerm::Zero => 0.0,
            SimpleTerm::L1(w) => w * x.lp_norm(1),
        }
    }

    /// Sum of two simple terms, when it is still simple.
    pub fn combine(self, other: SimpleTerm) -> SimpleTerm {
        match (self, other) {
            (SimpleTerm::Zero, t) | (t, SimpleTerm::Zero) => t,
            (SimpleTerm::L1(a), SimpleTerm::L1(b)) => SimpleTerm::L1(a + b),
        }
    }

    fn is_zero(&self) -> bool {
        match *self {
            SimpleTerm::Zero => true,
            SimpleTerm::L1(w) => w == 0.0,
        }
    }
}

/// A weighted prox-center `w · V(point, ·)` in a composite prox subproblem.
#[derive(Debug, Clone, Copy)]
pub struct Anchor<'a> {
    pub point: &'a DVector<f64>,
    pub weight: f64,
}

impl<'a> Anchor<'a> {
    pub fn new(point: &'a DVector<f64>, weight: f64) -> Self {
        Anchor { point, weight }
    }
}

/// Norm, distance generating function, modulus and feasible set.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxGeometry {
    kind: GeometryKind,
    dim: usize,
    set: FeasibleSet,
    modulus: f64,
}

impl ProxGeometry {
    pub fn euclidean(dim: usize, set: FeasibleSet) -> Result<Self> {
        if dim == 0 {
            return Err(SlideError::param("dimension", "must be positive"));
        }
        set.check_dim(dim)?;
        Ok(ProxGeometry {
            kind: GeometryKind::Euclidean,
            dim,
            set,
            modulus: 1.0,
        })
    }

    /// Entropy on `{x ≥ 0, Σx = scale}`; the modulus w.r.t. ℓ1 is `1/scale`.
    pub fn entropy_simplex(dim: usize, scale: f64) -> Result<Self> {
        if dim == 0 {
            return Err(SlideError::param("dimension", "must be positive"));
        }
        let set = FeasibleSet::simplex(scale)?;
        Ok(ProxGeometry {
            kind: GeometryKind::EntropySimplex,
            dim,
            set,
            modulus: 1.0 / scale,
        })
    }

    pub fn kind(&self) -> GeometryKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn set(&self) -> &FeasibleSet {
        &self.set
    }

    /// Strong convexity modulus `ν` of `ω` w.r.t. the primal norm.
    pub fn modulus(&self) -> f64 {
        self.modulus
    }

    /// Whether `V(x,z) ≤ ½‖x−z‖²` holds on `X`.
    pub fn grows_quadratically(&self) -> bool {
        self.kind == GeometryKind::Euclidean
    }

    pub fn primal_norm(&self, x: &DVector<f64>) -> f64 {
        match self.kind {
            GeometryKind::Euclidean => x.norm(),
            GeometryKind::EntropySimplex => x.lp_norm(1),
        }
    }

    pub fn dual_norm(&self, x: &DVector<f64>) -> f64 {
        match self.kind {
            GeometryKind::Euclidean => x.norm(),
            GeometryKind::EntropySimplex => x.amax(),
        }
    }

    pub fn is_feasible(&self, x: &DVector<f64>) -> bool {
        x.len() == self.dim && self.set.contains(x)
    }

    pub fn omega(&self, x: &DVector<f64>) -> f64 {
        match self.kind {
            GeometryKind::Euclidean => 0.5 * x.norm_squared(),
            GeometryKind::EntropySimplex => x.iter().map(|&v| xlogx(v)).sum(),
        }
    }

    /// `∇ω(x)`; entropy coordinates are floored at [`ENTROPY_FLOOR`].
    pub fn mirror(&self, x: &DVector<f64>) -> DVector<f64> {
        match self.kind {
            GeometryKind::Euclidean => x.clone(),
            GeometryKind::EntropySimplex => x.map(|v| v.max(ENTROPY_FLOOR).ln() + 1.0),
        }
    }

    fn check_vec(&self, x: &DVector<f64>, what: &'static str) -> Result<()> {
        if x.len() != self.dim {
            return Err(SlideError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(SlideError::NonFinite(what));
        }
        Ok(())
    }

    /// Bregman distance `V(x,z) = ω(z) − ω(x) − ⟨∇ω(x), z − x⟩`.
    pub fn bregman(&self, x: &DVector<f64>, z: &DVector<f64>) -> Result<f64> {
        self.check_vec(x, "x")?;
        self.check_vec(z, "z")?;
        match self.kind {
            GeometryKind::Euclidean => Ok(0.5 * (z - x).norm_squared()),
            GeometryKind::EntropySimplex => {
                if x.iter().any(|&v| v <= 0.0) {
                    return Err(SlideError::BoundaryPoint);
                }
                let v: f64 = x
                    .iter()
                    .zip(z.iter())
                    .map(|(&xi, &zi)| xlogx(zi) - zi * xi.ln() - zi + xi)
                    .sum();
                Ok(v.max(0.0))
            }
        }
    }

    /// Solves `argmin_{u∈X} ⟨g,u⟩ + Σ wᵢ V(xᵢ,u) + 𝒳(u)`.
    pub fn composite_prox(
        &self,
        simple: SimpleTerm,
        g: &DVector<f64>,
        anchors: &[Anchor<'_>],
    ) -> Result<DVector<f64>> {
        let mut out = DVector::zeros(self.dim);
        self.composite_prox_into(simple, g, anchors, &mut out)?;
        Ok(out)
    }

    /// In-place variant of [`ProxGeometry::composite_prox`].
    pub fn composite_prox_into(
        &self,
        simple: SimpleTerm,
        g: &DVector<f64>,
        anchors: &[Anchor<'_>],
        out: &mut DVector<f64>,
    ) -> Result<()> {
        if anchors.is_empty() {
            return Err(SlideError::NoAnchors);
        }
        self.check_vec(g, "linear term")?;
        let mut total = 0.0;
        for a in anchors {
            if !(a.weight > 0.0) || !a.weight.is_finite() {
                return Err(SlideError::InvalidWeight(a.weight));
            }
            if a.point.len() != self.dim {
                return Err(SlideError::DimensionMismatch {
                    expected: self.dim,
                    got: a.point.len(),
                });
            }
            let viol = self.set.violation(a.point);
            if !(viol <= FEASIBILITY_TOL) {
                return Err(SlideError::InfeasibleAnchor(viol));
            }
            total += a.weight;
        }
        if out.len() != self.dim {
            *out = DVector::zeros(self.dim);
        }

        match self.kind {
            GeometryKind::Euclidean => {
                // minimizer of the merged quadratic before 𝒳 and X
                let inv = 1.0 / total;
                for i in 0..self.dim {
                    let mut s = -g[i];
                    for a in anchors {
                        s += a.weight * a.point[i];
                    }
                    out[i] = s * inv;
                }
                match (&self.set, simple) {
                    (_, t) if t.is_zero() => {}
                    (FeasibleSet::WholeSpace | FeasibleSet::Box { .. }, SimpleTerm::L1(lam)) => {
                        let thr = lam * inv;
                        out.apply(|v| *v = soft_threshold(*v, thr));
                    }
                    _ => {
                        return Err(SlideError::Unsupported(
                            "l1 simple term is only supported on the whole space or a box".into(),
                        ))
                    }
                }
                match &self.set {
                    FeasibleSet::WholeSpace => {}
                    FeasibleSet::Box { lo, hi } => {
                        for i in 0..self.dim {
                            out[i] = out[i].clamp(lo[i], hi[i]);
                        }
                    }
                    FeasibleSet::Ball { center, radius } => {
                        let d = &*out - center;
                        let nd = d.norm();
                        if nd > *radius {
                            *out = center + d * (radius / nd);
                        }
                    }
                    FeasibleSet::Simplex { scale } => {
                        *out = project_simplex(out, *scale);
                    }
                }
            }
            GeometryKind::EntropySimplex => {
                if !simple.is_zero() {
                    return Err(SlideError::Unsupported(
                        "entropy geometry does not support an l1 simple term".into(),
                    ));
                }
                let scale = match self.set {
                    FeasibleSet::Simplex { scale } => scale,
                    _ => unreachable!("entropy geometry is always on a simplex"),
                };
                let inv = 1.0 / total;
                for i in 0..self.dim {
                    let mut s = -g[i];
                    for a in anchors {
                        s += a.weight * a.point[i].max(ENTROPY_FLOOR).ln();
                    }
                    out[i] = s * inv;
                }
                let m = out.max();
                out.apply(|v| *v = (*v - m).exp());
                let z = out.sum();
                *out *= scale / z;
            }
        }
        Ok(())
    }

    /// Largest Bregman distance between `u` and the points of `X`.
    ///
    /// Euclidean sets return `max_{x∈X} V(x,u)` exactly (farthest corner of a
    /// box, antipode of a ball, farthest vertex of a simplex). For the entropy
    /// geometry `V(·,u)` is unbounded near the faces of the simplex, so the
    /// finite radius `max_{x∈X} V(u,x) = s·log(s / min uⱼ)` is returned instead.
    pub fn max_bregman(&self, u: &DVector<f64>) -> Result<f64> {
        self.check_vec(u, "u")?;
        if !self.set.is_bounded() {
            return Err(SlideError::Unbounded);
        }
        match (self.kind, &self.set) {
            (GeometryKind::Euclidean, FeasibleSet::Box { lo, hi }) => Ok(0.5
                * u.iter()
                    .zip(lo.iter().zip(hi.iter()))
                    .map(|(v, (l, h))| (v - l).powi(2).max((h - v).powi(2)))
                    .sum::<f64>()),
            (GeometryKind::Euclidean, FeasibleSet::Ball { center, radius }) => {
                Ok(0.5 * ((u - center).norm() + radius).powi(2))
            }
            (GeometryKind::Euclidean, FeasibleSet::Simplex { scale }) => {
                Ok(0.5 * (u.norm_squared() - 2.0 * scale * u.min() + scale * scale))
            }
            (GeometryKind::EntropySimplex, FeasibleSet::Simplex { scale }) => {
                let umin = u.min().max(ENTROPY_FLOOR);
                Ok(scale * (scale / umin).ln())
            }
            _ => Err(SlideError::Unbounded),
        }
    }

    /// `D_X = max_{x,y∈X} V(x,y)`.
    pub fn diameter(&self) -> Result<f64> {
        match (self.kind, &self.set) {
            (GeometryKind::Euclidean, FeasibleSet::Box { lo, hi }) => {
                Ok(0.5 * (hi - lo).norm_squared())
            }
            (GeometryKind::Euclidean, FeasibleSet::Ball { radius, .. }) => Ok(2.0 * radius * radius),
            (GeometryKind::Euclidean, FeasibleSet::Simplex { scale }) => Ok(scale * scale),
            _ => Err(SlideError::Unbounded),
        }
    }
}

fn xlogx(v: f64) -> f64 {
    if v <= 0.0 {
        0.0
    } else {
        v * v.ln()
    }
}
