use nalgebra::DVector;
use proptest::prelude::*;
use rand::Rng;
use slide_opt::bench::{aggregate, parse_rows, ReportRow};
use slide_opt::oracles::{make_problem, ProblemSpec};
use slide_opt::run::RunOptions;
use slide_opt::schedule::SlidingSchedule;
use slide_opt::sliding::{bound_bd, gs_run, FirstTerm};
use slide_opt::stream::{stream, StreamKey};

fn small_problem(seed: u64, lambda: f64, radius: f64) -> slide_opt::oracles::CompositeProblem {
    let mut p = make_problem(&ProblemSpec {
        n: 8,
        m: 12,
        lambda,
        radius: Some(radius),
        seed,
        ..ProblemSpec::new("quad_l1")
    })
    .unwrap();
    p.attach_reference(1e-10).unwrap();
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gs_counts_match_schedule(seed in 0u64..1000, n in 1usize..12, d in 0.05f64..5.0, lambda in 0.01f64..0.5) {
        let p = small_problem(seed, lambda, 1.0);
        let s = SlidingSchedule::fixed_horizon(p.lipschitz(), p.nonsmooth_bound(), 1.0, n, d).unwrap();
        let rec = gs_run(&p, &s, n, &RunOptions::quiet()).unwrap();
        prop_assert_eq!(rec.counts.grad, n as u64);
        prop_assert_eq!(rec.counts.subgrad, s.total_inner(n));
    }

    #[test]
    fn gs_gap_is_within_bd(seed in 0u64..1000, n in 1usize..10, lambda in 0.01f64..0.5, radius in 0.1f64..2.0) {
        let p = small_problem(seed, lambda, radius);
        let r = p.reference().unwrap().clone();
        let d_x = p.diameter().unwrap();
        let s = SlidingSchedule::fixed_horizon(p.lipschitz(), p.nonsmooth_bound(), 1.0, n, 1.5 * d_x).unwrap();
        let rec = gs_run(&p, &s, n, &RunOptions::quiet()).unwrap();
        let gap = p.objective(&rec.output) - r.value;
        let v0 = 0.5 * (p.start() - &r.x).norm_squared();
        prop_assert!(gap >= -r.certified_gap - 1e-12);
        prop_assert!(gap <= bound_bd(&s, n, FirstTerm::Initial(v0)) + 1e-8);
        prop_assert!(p.geometry().set().violation(&rec.output) <= 1e-12);
    }

    #[test]
    fn streams_depend_only_on_their_key(seed in any::<u64>(), phase in any::<u64>(), k in any::<u64>(), t in any::<u64>()) {
        let a: u64 = stream(seed, phase, k, t).random();
        let b: u64 = StreamKey::new(seed).with_phase(phase).rng(k, t).random();
        prop_assert_eq!(a, b);
        let c: u64 = stream(seed, phase, k, t.wrapping_add(1)).random();
        prop_assert_ne!(a, c);
    }

    #[test]
    fn report_rows_round_trip(gaps in prop::collection::vec(-1e3f64..1e3, 1..20), k in 1u32..100) {
        let rows: Vec<ReportRow> = gaps
            .iter()
            .enumerate()
            .map(|(i, &g)| ReportRow {
                trial_seed: i as u64,
                algorithm: "gs".into(),
                policy: "fixed_horizon".into(),
                k_or_epsilon: k as f64,
                gap: g / 7.0,
                bound: g.abs() * 3.1,
                grad_calls: k as u64,
                subgrad_calls: 10 * k as u64,
                stoch_calls: 0,
                elapsed_ms: None,
            })
            .collect();
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &rows {
            w.serialize(r).unwrap();
        }
        let text = String::from_utf8(w.into_inner().unwrap()).unwrap();
        let back = parse_rows(&text).unwrap();
        prop_assert_eq!(&back, &rows);
        prop_assert_eq!(aggregate(&back), aggregate(&rows));
    }

    #[test]
    fn objective_is_convex_along_segments(seed in 0u64..500, a in 0.0f64..1.0) {
        let p = make_problem(&ProblemSpec { n: 6, m: 9, seed, ..ProblemSpec::new("stoch_abs") }).unwrap();
        let x = DVector::from_fn(6, |i, _| ((seed + i as u64) % 7) as f64 / 7.0 - 0.4);
        let y = DVector::from_fn(6, |i, _| ((seed * 3 + i as u64) % 5) as f64 / 5.0 - 0.5);
        let z = &x * a + &y * (1.0 - a);
        prop_assert!(p.objective(&z) <= a * p.objective(&x) + (1.0 - a) * p.objective(&y) + 1e-10);
    }
}
