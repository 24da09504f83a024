//! Certified reference optima.
//!
//! Two solvers are provided. When `h` folds into the prox-mapping the problem
//! is solved by an accelerated proximal gradient method with adaptive
//! restart; otherwise `h` (and a bilinear `f`, if any) is written as a
//! polyhedral maximum and a primal-dual hybrid gradient method with restarts
//! is used. Both stop on a certified bound
//! `Ψ(x) − Ψ* ≤ Ψ(x) − min_{z∈X} m(z)`, where `m` is a global lower model of
//! `Ψ` built from the current primal and dual points.

use nalgebra::{DMatrix, DVector};

use super::{CompositeProblem, Reference, SmoothFunction};
use crate::error::{Result, SlideError};
use crate::linalg::{power_iteration_ata, project_simplex, soft_threshold};
use crate::prox::{FeasibleSet, SimpleTerm};

const CHECK_EVERY: usize = 25;

/// One block of the dual set `W` in `max_{w∈W} ⟨Cx − d, w⟩`.
#[derive(Debug, Clone, PartialEq)]
pub enum DualBlock {
    /// `|wᵢ| ≤ bound`.
    Box { start: usize, len: usize, bound: f64 },
    /// `‖w‖₁ ≤ radius`.
    L1Ball { start: usize, len: usize, radius: f64 },
    /// `w ≥ 0, Σw = scale`.
    Simplex { start: usize, len: usize, scale: f64 },
    /// `‖w‖₂ ≤ radius`.
    Ball { start: usize, len: usize, radius: f64 },
}

impl DualBlock {
    fn range(&self) -> std::ops::Range<usize> {
        let (s, l) = match *self {
            DualBlock::Box { start, len, .. }
            | DualBlock::L1Ball { start, len, .. }
            | DualBlock::Simplex { start, len, .. }
            | DualBlock::Ball { start, len, .. } => (start, len),
        };
        s..s + l
    }

    fn shifted(&self, offset: usize) -> Self {
        let mut b = self.clone();
        match &mut b {
            DualBlock::Box { start, .. }
            | DualBlock::L1Ball { start, .. }
            | DualBlock::Simplex { start, .. }
            | DualBlock::Ball { start, .. } => *start += offset,
        }
        b
    }

    /// `max_{w ∈ block} ⟨v, w⟩`.
    fn support(&self, v: &[f64]) -> f64 {
        match *self {
            DualBlock::Box { bound, .. } => bound * v.iter().map(|x| x.abs()).sum::<f64>(),
            DualBlock::L1Ball { radius, .. } => {
                radius * v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
            }
            DualBlock::Simplex { scale, .. } => {
                scale * v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            }
            DualBlock::Ball { radius, .. } => radius * v.iter().map(|x| x * x).sum::<f64>().sqrt(),
        }
    }

    fn project(&self, v: &mut [f64]) {
        match *self {
            DualBlock::Box { bound, .. } => v.iter_mut().for_each(|x| *x = x.clamp(-bound, bound)),
            DualBlock::L1Ball { radius, .. } => {
                let l1: f64 = v.iter().map(|x| x.abs()).sum();
                if l1 > radius {
                    let abs = DVector::from_iterator(v.len(), v.iter().map(|x| x.abs()));
                    let p = project_simplex(&abs, radius);
                    for (x, pi) in v.iter_mut().zip(p.iter()) {
                        *x = x.signum() * pi;
                    }
                }
            }
            DualBlock::Simplex { scale, .. } => {
                let p = project_simplex(&DVector::from_column_slice(v), scale);
                v.copy_from_slice(p.as_slice());
            }
            DualBlock::Ball { radius, .. } => {
                let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if nv > radius {
                    v.iter_mut().for_each(|x| *x *= radius / nv);
                }
            }
        }
    }

    fn start_point(&self, v: &mut [f64]) {
        match *self {
            DualBlock::Simplex { scale, .. } => {
                let n = v.len() as f64;
                v.iter_mut().for_each(|x| *x = scale / n);
            }
            _ => v.iter_mut().for_each(|x| *x = 0.0),
        }
    }
}

/// `max_{w∈W} ⟨Cx − d, w⟩` with `W` a product of [`DualBlock`]s.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyhedralTerm {
    pub c: DMatrix<f64>,
    pub d: DVector<f64>,
    pub blocks: Vec<DualBlock>,
}

impl PolyhedralTerm {
    pub fn value(&self, x: &DVector<f64>) -> f64 {
        let v = &self.c * x - &self.d;
        self.blocks
            .iter()
            .map(|b| b.support(&v.as_slice()[b.range()]))
            .sum()
    }

    fn stack(terms: Vec<PolyhedralTerm>, n: usize) -> PolyhedralTerm {
        let rows: usize = terms.iter().map(|t| t.c.nrows()).sum();
        let mut c = DMatrix::zeros(rows, n);
        let mut d = DVector::zeros(rows);
        let mut blocks = Vec::new();
        let mut off = 0;
        for t in terms {
            let r = t.c.nrows();
            c.rows_mut(off, r).copy_from(&t.c);
            d.rows_mut(off, r).copy_from(&t.d);
            blocks.extend(t.blocks.iter().map(|b| b.shifted(off)));
            off += r;
        }
        PolyhedralTerm { c, d, blocks }
    }

    fn project(&self, w: &mut DVector<f64>) {
        for b in &self.blocks {
            b.project(&mut w.as_mut_slice()[b.range()]);
        }
    }
}

/// Lower bound `c₀ + min_{z∈X} ⟨a,z⟩ + λ‖z‖₁ + (μ/2)‖z − x‖²`.
///
/// Returns `-∞` when the model is unbounded below on `X`.
pub fn certified_lower_bound(
    set: &FeasibleSet,
    lambda: f64,
    mu: f64,
    x: &DVector<f64>,
    a: &DVector<f64>,
    c0: f64,
) -> f64 {
    let model = |z: &DVector<f64>| a.dot(z) + lambda * z.lp_norm(1) + 0.5 * mu * (z - x).norm_squared();
    let inner = match set {
        FeasibleSet::WholeSpace => (0..x.len())
            .map(|i| scalar_model_min(a[i], lambda, mu, x[i], f64::NEG_INFINITY, f64::INFINITY))
            .sum(),
        FeasibleSet::Box { lo, hi } => (0..x.len())
            .map(|i| scalar_model_min(a[i], lambda, mu, x[i], lo[i], hi[i]))
            .sum(),
        FeasibleSet::Simplex { scale } => {
            // ‖z‖₁ is constant on the simplex
            if mu > 0.0 {
                let z = project_simplex(&(x - a / mu), *scale);
                model(&z)
            } else {
                scale * a.min() + lambda * scale
            }
        }
        FeasibleSet::Ball { center, radius } => {
            // λ‖z‖₁ ≥ 0 is dropped, which keeps the bound valid
            if mu > 0.0 {
                let z = set.project(&(x - a / mu));
                a.dot(&z) + 0.5 * mu * (&z - x).norm_squared()
            } else {
                a.dot(center) - radius * a.norm()
            }
        }
    };
    c0 + inner
}

/// `min_{z∈[lo,hi]} a z + λ|z| + (μ/2)(z − x)²`.
fn scalar_model_min(a: f64, lambda: f64, mu: f64, x: f64, lo: f64, hi: f64) -> f64 {
    let phi = |z: f64| {
        let q = if mu > 0.0 { 0.5 * mu * (z - x) * (z - x) } else { 0.0 };
        a * z + lambda * z.abs() + q
    };
    if mu > 0.0 {
        let z = soft_threshold(x - a / mu, lambda / mu).clamp(lo, hi);
        return phi(z);
    }
    // piecewise linear: slopes a − λ on z < 0 and a + λ on z > 0
    if (lo == f64::NEG_INFINITY && a - lambda > 0.0) || (hi == f64::INFINITY && a + lambda < 0.0)
    {
        return f64::NEG_INFINITY;
    }
    let mut best = f64::INFINITY;
    for z in [lo, hi] {
        if z.is_finite() {
            best = best.min(phi(z));
        }
    }
    if lo <= 0.0 && 0.0 <= hi {
        best = best.min(0.0);
    }
    best
}

/// Output of the reference solvers.
#[derive(Debug, Clone)]
pub struct ReferenceSolution {
    pub x: DVector<f64>,
    pub value: f64,
    pub lower: f64,
    pub iterations: usize,
}

impl ReferenceSolution {
    pub fn certified_gap(&self) -> f64 {
        (self.value - self.lower).max(0.0)
    }

    fn into_reference(self) -> Reference {
        Reference {
            certified_gap: self.certified_gap(),
            x: self.x,
            value: self.value,
        }
    }
}

fn curvature(smooth: &dyn SmoothFunction) -> f64 {
    smooth
        .as_quadratic()
        .map_or(smooth.strong_convexity(), |q| q.curvature_floor())
}

fn simple_lambda(term: SimpleTerm) -> f64 {
    match term {
        SimpleTerm::Zero => 0.0,
        SimpleTerm::L1(l) => l,
    }
}

/// Euclidean prox of `λ‖·‖₁ + ι_X` at `c` with unit weight scaled by `1/step`.
fn prox_step(set: &FeasibleSet, lambda: f64, step: f64, c: &DVector<f64>) -> Result<DVector<f64>> {
    match set {
        FeasibleSet::WholeSpace | FeasibleSet::Box { .. } => {
            let t = lambda * step;
            Ok(set.project(&c.map(|v| soft_threshold(v, t))))
        }
        FeasibleSet::Simplex { .. } => Ok(set.project(c)),
        FeasibleSet::Ball { .. } if lambda == 0.0 => Ok(set.project(c)),
        FeasibleSet::Ball { .. } => Err(SlideError::Unsupported(
            "l1 term over a ball in the reference solver".into(),
        )),
    }
}

/// Accelerated proximal gradient with adaptive restart, for problems whose
/// `h` folds into the simple term.
pub fn solve_separable(
    problem: &CompositeProblem,
    tol: f64,
    max_iter: usize,
) -> Result<ReferenceSolution> {
    let simple = problem.folded_simple_term().ok_or_else(|| {
        SlideError::Unsupported("h is not prox-representable; use the primal-dual solver".into())
    })?;
    if problem.smooth().as_saddle().is_some() {
        return Err(SlideError::Unsupported(
            "bilinear f needs the primal-dual solver".into(),
        ));
    }
    let smooth = problem.smooth();
    let set = problem.geometry().set();
    let lambda = simple_lambda(simple);
    let lip = smooth.lipschitz();
    let mu = curvature(smooth);
    let n = problem.dim();
    let objective = |x: &DVector<f64>| smooth.value(x) + simple.value(x);

    let mut x = set.project(&problem.start());
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut g = DVector::zeros(n);
    let mut best = ReferenceSolution {
        value: objective(&x),
        x: x.clone(),
        lower: f64::NEG_INFINITY,
        iterations: 0,
    };
    for it in 1..=max_iter {
        smooth.gradient_into(&y, &mut g);
        let x_new = prox_step(set, lambda, 1.0 / lip, &(&y - &g / lip))?;
        // gradient-based restart
        if (&y - &x_new).dot(&(&x_new - &x)) > 0.0 {
            t = 1.0;
        }
        let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = &x_new + (&x_new - &x) * ((t - 1.0) / t_new);
        x = x_new;
        t = t_new;

        if it % CHECK_EVERY == 0 || it == max_iter {
            smooth.gradient_into(&x, &mut g);
            let fx = smooth.value(&x);
            let lower = certified_lower_bound(set, lambda, mu, &x, &g, fx - g.dot(&x));
            let value = objective(&x);
            best.lower = best.lower.max(lower);
            if value < best.value {
                best.value = value;
                best.x = x.clone();
            }
            best.iterations = it;
            if best.certified_gap() <= tol {
                return Ok(best);
            }
        }
    }
    Err(SlideError::CertificationFailed {
        tol,
        achieved: best.certified_gap(),
    })
}

/// Restarted primal-dual hybrid gradient on
/// `min_{x∈X} q(x) + λ‖x‖₁ + max_{w∈W} ⟨Cx − d, w⟩`.
pub fn solve_saddle(
    problem: &CompositeProblem,
    tol: f64,
    max_iter: usize,
) -> Result<ReferenceSolution> {
    let n = problem.dim();
    let mut terms = Vec::new();
    let smooth_part: Option<&dyn SmoothFunction> = match problem.smooth().as_saddle() {
        Some(s) => {
            terms.push(s.as_polyhedral());
            None
        }
        None => Some(problem.smooth()),
    };
    let (lambda, poly) = match problem.nonsmooth().as_simple_term() {
        Some(t) => (simple_lambda(t.combine(problem.simple())), None),
        None => {
            let p = problem.nonsmooth().as_polyhedral().ok_or_else(|| {
                SlideError::Unsupported("h has no polyhedral representation".into())
            })?;
            (simple_lambda(problem.simple()), Some(p))
        }
    };
    terms.extend(poly);
    if terms.is_empty() {
        return solve_separable(problem, tol, max_iter);
    }
    let term = PolyhedralTerm::stack(terms, n);
    let set = problem.geometry().set();
    let lip = smooth_part.map_or(0.0, |s| s.lipschitz());
    let mu = smooth_part.map_or(0.0, curvature);
    let c_norm = power_iteration_ata(&term.c, 1e-10, 100_000).sqrt().max(1e-12);

    let q_value = |x: &DVector<f64>| smooth_part.map_or(0.0, |s| s.value(x));
    let q_grad = |x: &DVector<f64>, out: &mut DVector<f64>| match smooth_part {
        Some(s) => s.gradient_into(x, out),
        None => out.fill(0.0),
    };
    let primal = |x: &DVector<f64>| q_value(x) + lambda * x.lp_norm(1) + term.value(x);
    let lower_at = |x: &DVector<f64>, w: &DVector<f64>, g: &mut DVector<f64>| {
        q_grad(x, g);
        let c0 = q_value(x) - g.dot(x) - term.d.dot(w);
        g.gemv_tr(1.0, &term.c, w, 1.0);
        certified_lower_bound(set, lambda, mu, x, g, c0)
    };

    // primal weight balances the step sizes between x and w
    let mut omega = 1.0f64;
    let mut x = set.project(&problem.start());
    let mut w = DVector::zeros(term.c.nrows());
    for b in &term.blocks {
        b.start_point(&mut w.as_mut_slice()[b.range()]);
    }
    let mut g = DVector::zeros(n);
    let mut best = ReferenceSolution {
        value: primal(&x),
        x: x.clone(),
        lower: f64::NEG_INFINITY,
        iterations: 0,
    };
    let mut x_sum = DVector::zeros(n);
    let mut w_sum = DVector::zeros(w.len());
    let mut count = 0usize;
    let mut epoch_gap = f64::INFINITY;
    let mut x_anchor = x.clone();
    let mut w_anchor = w.clone();

    for it in 1..=max_iter {
        let tau = 0.95 / (0.5 * lip + omega * c_norm);
        let sigma = 0.95 * omega / c_norm;
        q_grad(&x, &mut g);
        g.gemv_tr(1.0, &term.c, &w, 1.0);
        let x_new = prox_step(set, lambda, tau, &(&x - &g * tau))?;
        let extrap = &x_new * 2.0 - &x;
        let mut w_new = &w + (&term.c * &extrap - &term.d) * sigma;
        term.project(&mut w_new);
        x = x_new;
        w = w_new;
        x_sum += &x;
        w_sum += &w;
        count += 1;

        if it % CHECK_EVERY == 0 || it == max_iter {
            let xa = &x_sum / count as f64;
            let wa = &w_sum / count as f64;
            let mut candidates = [(x.clone(), w.clone(), 0.0), (xa, wa, 0.0)];
            for cand in candidates.iter_mut() {
                let value = primal(&cand.0);
                let lower = lower_at(&cand.0, &cand.1, &mut g);
                best.lower = best.lower.max(lower);
                if value < best.value {
                    best.value = value;
                    best.x = cand.0.clone();
                }
                cand.2 = value - lower;
            }
            best.iterations = it;
            if best.certified_gap() <= tol {
                return Ok(best);
            }
            let pick = if candidates[0].2 <= candidates[1].2 { 0 } else { 1 };
            let gap = candidates[pick].2;
            if !epoch_gap.is_finite() || gap <= 0.2 * epoch_gap || count >= 20_000 {
                let (xr, wr, _) = candidates[pick].clone();
                // re-balance the primal weight from the movement in the last epoch
                let dx = (&xr - &x_anchor).norm();
                let dw = (&wr - &w_anchor).norm();
                if dx > 1e-10 && dw > 1e-10 {
                    omega = (0.5 * (dw / dx).ln() + 0.5 * omega.ln()).exp();
                }
                x = xr;
                w = wr;
                x_anchor = x.clone();
                w_anchor = w.clone();
                x_sum.fill(0.0);
                w_sum.fill(0.0);
                count = 0;
                epoch_gap = if gap.is_finite() { gap } else { f64::INFINITY };
            }
        }
    }
    Err(SlideError::CertificationFailed {
        tol,
        achieved: best.certified_gap(),
    })
}

/// Computes `(x*, Ψ*)` with `Ψ(x*) − Ψ* ≤ tol` certified.
pub fn reference_optimum(problem: &CompositeProblem, tol: f64) -> Result<Reference> {
    if !(tol >= 1e-12) {
        return Err(SlideError::param("tol", "must be at least 1e-12"));
    }
    let separable =
        problem.folded_simple_term().is_some() && problem.smooth().as_saddle().is_none();
    let sol = if separable {
        solve_separable(problem, tol, 2_000_000)?
    } else {
        solve_saddle(problem, tol, 2_000_000)?
    };
    Ok(sol.into_reference())
}

impl CompositeProblem {
    /// Computes and attaches a certified reference optimum.
    pub fn attach_reference(&mut self, tol: f64) -> Result<&Reference> {
        let r = reference_optimum(self, tol)?;
        self.reference = Some(r);
        Ok(self.reference.as_ref().expect("just attached"))
    }
}
