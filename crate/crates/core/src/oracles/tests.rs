use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::prox::{FeasibleSet, GeometryKind, ProxGeometry, SimpleTerm};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_vec(r: &mut ChaCha8Rng, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| scale * (2.0 * r.random::<f64>() - 1.0))
}

fn quad(seed: u64, n: usize, m: usize) -> QuadraticLoss {
    let mut r = rng(seed);
    let a = DMatrix::from_fn(m, n, |_, _| r.random::<f64>() - 0.5);
    let b = random_vec(&mut r, m, 1.0);
    QuadraticLoss::new(a, b).unwrap()
}

#[test]
fn quadratic_gradient_matches_central_differences() {
    let f = quad(1, 8, 12).with_mu(0.3).unwrap();
    let mut r = rng(2);
    let h = 1e-6;
    for _ in 0..100 {
        let x = random_vec(&mut r, 8, 2.0);
        let mut g = DVector::zeros(8);
        f.gradient_into(&x, &mut g);
        let fd = DVector::from_fn(8, |i, _| {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            (f.value(&xp) - f.value(&xm)) / (2.0 * h)
        });
        let rel = (&fd - &g).norm() / g.norm().max(1.0);
        assert!(rel <= 1e-5, "relative error {rel}");
    }
}

#[test]
fn quadratic_descent_and_strong_convexity() {
    let f = quad(3, 6, 9).with_mu(1.0).unwrap();
    let (l, mu) = (f.lipschitz(), f.strong_convexity());
    assert_eq!(mu, 1.0);
    let mut r = rng(4);
    let mut g = DVector::zeros(6);
    for _ in 0..500 {
        let x = random_vec(&mut r, 6, 3.0);
        let y = random_vec(&mut r, 6, 3.0);
        f.gradient_into(&y, &mut g);
        let lin = f.value(&y) + g.dot(&(&x - &y));
        let d2 = (&x - &y).norm_squared();
        assert!(f.value(&x) <= lin + 0.5 * l * d2 + 1e-9);
        assert!(f.value(&x) >= lin + 0.5 * mu * d2 - 1e-9);
    }
}

#[test]
fn lipschitz_is_largest_eigenvalue() {
    // independent oracle: full symmetric eigendecomposition of AᵀA
    let spec = ProblemSpec {
        lambda: 0.1,
        ..ProblemSpec::new("quad_l1")
    };
    let p = make_problem(&spec).unwrap();
    let q = p.smooth().as_quadratic().unwrap();
    let ata = q.matrix().tr_mul(q.matrix());
    let top = ata.symmetric_eigenvalues().max();
    assert!((p.lipschitz() - top).abs() <= 1e-8 * top);
    assert_eq!(p.dim(), 50);
    assert_eq!(q.matrix().nrows(), 80);
}

fn check_nonsmooth(h: &dyn NonsmoothFunction, geo: &ProxGeometry, seed: u64, spread: f64) {
    let n = h.dim();
    let m = h.bound();
    let mut r = rng(seed);
    let mut s = DVector::zeros(n);
    for _ in 0..500 {
        let x = random_vec(&mut r, n, spread);
        let mut y = random_vec(&mut r, n, spread);
        // push some coordinates onto the kinks
        for i in 0..n {
            if r.random::<f64>() < 0.2 {
                y[i] = 0.0;
            }
        }
        h.subgradient_into(&y, &mut s);
        assert!(geo.dual_norm(&s) <= m + 1e-12);
        let d = geo.primal_norm(&(&x - &y));
        assert!(h.value(&x) <= h.value(&y) + s.dot(&(&x - &y)) + m * d + 1e-9);
        let a: f64 = r.random();
        let z = &x * a + &y * (1.0 - a);
        assert!(h.value(&z) <= a * h.value(&x) + (1.0 - a) * h.value(&y) + 1e-10);
    }
}

#[test]
fn l1_norm_satisfies_nonsmooth_bound() {
    let n = 7;
    let geo = ProxGeometry::euclidean(n, FeasibleSet::WholeSpace).unwrap();
    let h = L1Norm::new(n, 0.4, GeometryKind::Euclidean).unwrap();
    assert!((h.bound() - 2.0 * 0.4 * (n as f64).sqrt()).abs() < 1e-15);
    check_nonsmooth(&h, &geo, 5, 1.0);

    let mut r = rng(6);
    let b = DMatrix::from_fn(4, n, |_, _| r.random::<f64>() - 0.5);
    let hb = L1Norm::with_operator(b, 0.7).unwrap();
    check_nonsmooth(&hb, &geo, 7, 1.0);
}

#[test]
fn l1_norm_bound_is_attained_up_to_sampling() {
    // y slightly negative, x positive in every coordinate: ratio → 2λ√n
    let n = 4;
    let h = L1Norm::new(n, 1.0, GeometryKind::Euclidean).unwrap();
    let y = DVector::from_element(n, -1e-9);
    let x = DVector::from_element(n, 1.0);
    let mut s = DVector::zeros(n);
    h.subgradient_into(&y, &mut s);
    let excess = h.value(&x) - h.value(&y) - s.dot(&(&x - &y));
    let ratio = excess / (&x - &y).norm();
    assert!(ratio > 0.99 * h.bound());
}

#[test]
fn entropy_l1_bound_uses_linf_dual() {
    let n = 5;
    let geo = ProxGeometry::entropy_simplex(n, 1.0).unwrap();
    let h = L1Norm::new(n, 0.3, GeometryKind::EntropySimplex).unwrap();
    assert!((h.bound() - 0.6).abs() < 1e-15);
    check_nonsmooth(&h, &geo, 8, 1.0);
}

#[test]
fn abs_loss_satisfies_nonsmooth_bound() {
    let mut r = rng(9);
    let c = DMatrix::from_fn(20, 6, |_, _| r.random::<f64>() - 0.5);
    let d = random_vec(&mut r, 20, 1.0);
    let h = AbsLossSum::new(c, d).unwrap();
    let geo = ProxGeometry::euclidean(6, FeasibleSet::WholeSpace).unwrap();
    check_nonsmooth(&h, &geo, 10, 2.0);
}

fn empirical_moments(
    oracle: &dyn StochasticSubgradient,
    exact: &DVector<f64>,
    x: &DVector<f64>,
    geo: &ProxGeometry,
    draws: usize,
) -> (DVector<f64>, f64, f64) {
    let n = x.len();
    let mut r = rng(11);
    let mut mean = DVector::zeros(n);
    let mut second = 0.0;
    let mut worst: f64 = 0.0;
    let mut out = DVector::zeros(n);
    for _ in 0..draws {
        oracle.sample_into(x, &mut r, &mut out);
        mean += &out;
        let dev = geo.dual_norm(&(&out - exact));
        second += dev * dev;
        worst = worst.max(dev);
    }
    (mean / draws as f64, second / draws as f64, worst)
}

#[test]
fn noisy_subgradient_is_unbiased_with_bounded_variance() {
    let n = 6;
    let draws = 100_000;
    for (kind, geo) in [
        (
            GeometryKind::Euclidean,
            ProxGeometry::euclidean(n, FeasibleSet::WholeSpace).unwrap(),
        ),
        (
            GeometryKind::EntropySimplex,
            ProxGeometry::entropy_simplex(n, 1.0).unwrap(),
        ),
    ] {
        let h: Arc<dyn NonsmoothFunction> = Arc::new(L1Norm::new(n, 0.5, kind).unwrap());
        let sigma = 0.8;
        let oracle = NoisySubgradient::new(h.clone(), sigma, kind).unwrap();
        assert!(oracle.light_tail());
        let x = DVector::from_vec(vec![0.3, -0.1, 0.0, 0.2, 0.1, 0.3]);
        let mut exact = DVector::zeros(n);
        h.subgradient_into(&x, &mut exact);
        let (mean, var, worst) = empirical_moments(&oracle, &exact, &x, &geo, draws);
        let tol = 4.0 * sigma / (draws as f64).sqrt();
        for i in 0..n {
            assert!((mean[i] - exact[i]).abs() <= tol, "{kind:?} coordinate {i}");
        }
        assert!(var <= sigma * sigma * 1.05);
        assert!(worst <= sigma + 1e-12);
    }
}

#[test]
fn noiseless_oracle_returns_exact_subgradient() {
    let n = 5;
    let h: Arc<dyn NonsmoothFunction> =
        Arc::new(L1Norm::new(n, 0.5, GeometryKind::Euclidean).unwrap());
    let oracle = NoisySubgradient::new(h.clone(), 0.0, GeometryKind::Euclidean).unwrap();
    let mut r = rng(12);
    let mut exact = DVector::zeros(n);
    let mut out = DVector::zeros(n);
    for _ in 0..50 {
        let x = random_vec(&mut r, n, 1.0);
        h.subgradient_into(&x, &mut exact);
        oracle.sample_into(&x, &mut r, &mut out);
        assert_eq!(out, exact);
    }
    assert!(NoisySubgradient::new(h, -1.0, GeometryKind::Euclidean).is_err());
}

#[test]
fn sampled_abs_loss_is_unbiased() {
    let mut r = rng(13);
    let c = DMatrix::from_fn(10, 4, |_, _| r.random::<f64>() - 0.5);
    let d = random_vec(&mut r, 10, 0.5);
    let full = Arc::new(AbsLossSum::new(c, d).unwrap());
    let oracle = SampledAbsLoss::new(full.clone());
    let geo = ProxGeometry::euclidean(4, FeasibleSet::WholeSpace).unwrap();
    let x = random_vec(&mut r, 4, 1.0);
    let mut exact = DVector::zeros(4);
    full.subgradient_into(&x, &mut exact);
    let draws = 100_000;
    let (mean, var, worst) = empirical_moments(&oracle, &exact, &x, &geo, draws);
    let sigma = oracle.sigma();
    for i in 0..4 {
        assert!((mean[i] - exact[i]).abs() <= 4.0 * sigma / (draws as f64).sqrt());
    }
    assert!(var <= sigma * sigma * 1.05);
    assert!(worst <= sigma);
}

#[test]
fn counters_increment_exactly_once_per_call() {
    let spec = ProblemSpec {
        n: 5,
        m: 7,
        sigma: Some(0.1),
        ..ProblemSpec::new("quad_l1")
    };
    let p = make_problem(&spec).unwrap();
    assert_eq!(p.counts(), Counts::default());
    let x = DVector::zeros(5);
    let mut out = DVector::zeros(5);
    p.gradient_into(&x, &mut out);
    assert_eq!((p.counts().grad, p.counts().subgrad, p.counts().stoch), (1, 0, 0));
    p.subgradient_into(&x, &mut out);
    assert_eq!((p.counts().grad, p.counts().subgrad, p.counts().stoch), (1, 1, 0));
    let mut r = rng(0);
    p.stochastic_into(&x, &mut r, &mut out).unwrap();
    assert_eq!((p.counts().grad, p.counts().subgrad, p.counts().stoch), (1, 1, 1));
    // uncounted evaluations
    let _ = p.objective(&x);
    let _ = p.gap(&x);
    assert_eq!((p.counts().grad, p.counts().subgrad, p.counts().stoch), (1, 1, 1));
    let forked = p.fork();
    assert_eq!(forked.counts(), Counts::default());
    p.reset_counts();
    assert_eq!(p.counts(), Counts::default());
}

#[test]
fn missing_stochastic_oracle_is_an_error() {
    let p = make_problem(&ProblemSpec {
        n: 3,
        m: 4,
        ..ProblemSpec::new("quad_l1")
    })
    .unwrap();
    let mut out = DVector::zeros(3);
    let err = p.stochastic_into(&DVector::zeros(3), &mut rng(0), &mut out);
    assert_eq!(err, Err(SlideError::MissingStochasticOracle));
}

#[test]
fn zoo_is_deterministic_and_validates() {
    let spec = ProblemSpec::new("quad_l1");
    let a = make_problem(&spec).unwrap();
    let b = make_problem(&spec).unwrap();
    let x = DVector::from_element(50, 0.1);
    assert_eq!(a.objective(&x), b.objective(&x));
    let other = make_problem(&ProblemSpec { seed: 8, ..spec.clone() }).unwrap();
    assert_ne!(a.objective(&x), other.objective(&x));

    assert!(matches!(
        make_problem(&ProblemSpec::new("nope")),
        Err(SlideError::UnknownFamily(_))
    ));
    assert!(make_problem(&ProblemSpec { lambda: -1.0, ..spec.clone() }).is_err());
    assert!(make_problem(&ProblemSpec { n: 0, ..spec.clone() }).is_err());
    assert!(make_problem(&ProblemSpec { radius: Some(0.0), ..spec.clone() }).is_err());
    assert!(make_problem(&ProblemSpec {
        mu: 0.0,
        ..ProblemSpec::new("strong_quad_l1")
    })
    .is_err());
    assert!(make_problem(&ProblemSpec {
        radius: None,
        ..ProblemSpec::new("saddle_linf")
    })
    .is_err());
    for (family, _) in problem_families() {
        let p = make_problem(&ProblemSpec::desk(family).unwrap()).unwrap();
        assert_eq!(p.name(), *family);
    }
}

#[test]
fn strong_family_reports_mu() {
    let p = make_problem(&ProblemSpec {
        mu: 1.0,
        ..ProblemSpec::new("strong_quad_l1")
    })
    .unwrap();
    assert_eq!(p.strong_convexity(), 1.0);
    let mut r = rng(14);
    let mut g = DVector::zeros(50);
    for _ in 0..200 {
        let x = random_vec(&mut r, 50, 1.0);
        let y = random_vec(&mut r, 50, 1.0);
        p.smooth().gradient_into(&y, &mut g);
        let f = |z: &DVector<f64>| p.smooth().value(z);
        assert!(f(&x) >= f(&y) + g.dot(&(&x - &y)) + 0.5 * (&x - &y).norm_squared() - 1e-9);
    }
}

#[test]
fn stoch_abs_oracle_constants() {
    let p = make_problem(&ProblemSpec::new("stoch_abs")).unwrap();
    let s = p.stochastic().unwrap();
    assert!(s.light_tail());
    assert_eq!(s.sigma(), p.nonsmooth_bound());
}

fn identity_problem(b: Vec<f64>, lambda: f64, radius: Option<f64>) -> CompositeProblem {
    let n = b.len();
    make_problem(&ProblemSpec {
        n,
        m: n,
        identity: true,
        rhs: Some(b),
        lambda,
        radius,
        ..ProblemSpec::new("quad_l1")
    })
    .unwrap()
}

#[test]
fn reference_of_soft_threshold_example() {
    let mut p = identity_problem(vec![2.0, 0.0], 1.0, None);
    let r = p.attach_reference(1e-12).unwrap().clone();
    assert!((r.x[0] - 1.0).abs() < 1e-9 && r.x[1].abs() < 1e-9);
    assert!((r.value - 1.5).abs() < 1e-12);
    assert!(r.certified_gap <= 1e-12);
    assert!(reference_optimum(&p, 1e-13).is_err());
}

#[test]
fn reference_of_zero_problem() {
    let mut p = identity_problem(vec![0.0; 4], 0.0, None);
    let r = p.attach_reference(1e-12).unwrap();
    assert_eq!(r.value, 0.0);
    assert!(r.x.norm() < 1e-12);
}

#[test]
fn separable_and_primal_dual_solvers_agree() {
    let p = make_problem(&ProblemSpec {
        radius: Some(0.5),
        ..ProblemSpec::new("quad_l1")
    })
    .unwrap();
    let a = solve_separable(&p, 1e-10, 2_000_000).unwrap();
    let b = solve_saddle_forced(&p);
    assert!(a.certified_gap() <= 1e-10 && b.certified_gap() <= 1e-10);
    assert!((a.value - b.value).abs() <= 1e-9, "{} vs {}", a.value, b.value);
}

/// Primal-dual solve of a separable problem, by hiding the prox form of `h`.
fn solve_saddle_forced(p: &CompositeProblem) -> ReferenceSolution {
    #[derive(Debug)]
    struct Opaque(L1Norm);
    impl NonsmoothFunction for Opaque {
        fn dim(&self) -> usize {
            self.0.dim()
        }
        fn value(&self, x: &DVector<f64>) -> f64 {
            self.0.value(x)
        }
        fn subgradient_into(&self, x: &DVector<f64>, out: &mut DVector<f64>) {
            self.0.subgradient_into(x, out)
        }
        fn bound(&self) -> f64 {
            self.0.bound()
        }
        fn as_polyhedral(&self) -> Option<PolyhedralTerm> {
            self.0.as_polyhedral()
        }
    }
    let lambda = 0.1;
    let h = Opaque(L1Norm::new(p.dim(), lambda, GeometryKind::Euclidean).unwrap());
    let q = CompositeProblem::new(
        "opaque",
        p.geometry().clone(),
        Arc::new(p.smooth().as_quadratic().unwrap().clone()),
        Arc::new(h),
        SimpleTerm::Zero,
    )
    .unwrap();
    assert!(q.folded_simple_term().is_none());
    solve_saddle(&q, 1e-10, 2_000_000).unwrap()
}

#[test]
fn reference_is_no_worse_than_feasible_samples() {
    let mut p = make_problem(&ProblemSpec::desk("quad_l1").unwrap()).unwrap();
    let r = p.attach_reference(1e-10).unwrap().clone();
    let mut g = rng(15);
    for _ in 0..200 {
        let x = p.geometry().set().project(&random_vec(&mut g, p.dim(), 2.0));
        assert!(r.value <= p.objective(&x) + 1e-12);
    }
}

#[test]
fn certified_lower_bound_examples() {
    // min over [−1,1] of 2z + |z|: attained at z = −1 with value −1
    let set = FeasibleSet::cube(1, 1.0).unwrap();
    let lb = certified_lower_bound(
        &set,
        1.0,
        0.0,
        &DVector::zeros(1),
        &DVector::from_element(1, 2.0),
        0.0,
    );
    assert!((lb + 1.0).abs() < 1e-15);
    // unbounded linear model on the whole space
    let lb = certified_lower_bound(
        &FeasibleSet::WholeSpace,
        0.5,
        0.0,
        &DVector::zeros(1),
        &DVector::from_element(1, 2.0),
        0.0,
    );
    assert_eq!(lb, f64::NEG_INFINITY);
}
