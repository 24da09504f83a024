use slide_opt::bench::{
    aggregate, complexity_sweep, parse_aggregates, parse_rows, run_experiment, ExperimentConfig, Format,
};

fn config(dir: &std::path::Path, alg: &str, preset: &str, horizons: &[i64], trials: i64) -> ExperimentConfig {
    let mut c = ExperimentConfig::preset(preset, alg, horizons);
    c.trials.count = trials;
    c.output.dir = Some(dir.to_path_buf());
    c.output.formats = vec![Format::Csv, Format::Json, Format::Svg];
    c
}

#[test]
fn gs_desk_run_has_one_row_per_horizon_within_bound() {
    let dir = tempfile::tempdir().unwrap();
    let r = run_experiment(&config(dir.path(), "gs", "quad_l1", &[5, 10, 20, 50], 1)).unwrap();
    assert_eq!(r.rows.len(), 4);
    assert!(r.rows.iter().all(|row| row.gap <= row.bound));
    assert!(r.all_bounds_hold());
    for f in ["rows.csv", "aggregate.csv", "summary.json", "chart.svg"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    for key in ["lipschitz", "nonsmooth_bound", "sigma", "diameter", "d_tilde", "psi_star"] {
        assert!(!json["derived"][key].is_null(), "{key} missing from the config echo");
    }
    assert_eq!(json["bounds"].as_array().unwrap().len(), 4);
}

#[test]
fn csv_is_identical_across_job_counts_and_round_trips() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut ca = config(a.path(), "sgs", "stoch_abs", &[5, 10], 40);
    ca.trials.jobs = Some(1);
    let mut cb = config(b.path(), "sgs", "stoch_abs", &[5, 10], 40);
    cb.trials.jobs = Some(4);
    run_experiment(&ca).unwrap();
    let rb = run_experiment(&cb).unwrap();
    let rows_a = std::fs::read(a.path().join("rows.csv")).unwrap();
    let rows_b = std::fs::read(b.path().join("rows.csv")).unwrap();
    assert_eq!(rows_a, rows_b);

    let text = String::from_utf8(rows_b).unwrap();
    let header = text.lines().next().unwrap();
    assert_eq!(
        header,
        "trial_seed,algorithm,policy,k_or_epsilon,gap,bound,grad_calls,subgrad_calls,stoch_calls,elapsed_ms"
    );
    let rows = parse_rows(&text).unwrap();
    assert_eq!(rows.len(), 80);
    let agg_file = parse_aggregates(&std::fs::read_to_string(b.path().join("aggregate.csv")).unwrap()).unwrap();
    assert_eq!(aggregate(&rows), agg_file);
    assert_eq!(agg_file, rb.aggregates);
    assert!(agg_file.iter().all(|a| a.se_gap > 0.0));
}

#[test]
fn timing_column_is_filled_on_request() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = config(dir.path(), "gs", "quad_l1", &[5], 1);
    c.output.timing = true;
    let r = run_experiment(&c).unwrap();
    assert!(r.rows[0].elapsed_ms.is_some());
}

#[test]
fn every_algorithm_runs_on_a_suitable_preset() {
    for (alg, preset, horizons) in [
        ("gs", "stoch_abs", vec![4]),
        ("sgs", "stoch_abs", vec![4]),
        ("msgs", "strong_quad_l1", vec![]),
        ("ssgs", "saddle_linf", vec![10]),
        ("prox_grad", "quad_l1_sweep", vec![5, 10]),
        ("accel_prox", "quad_l1_sweep", vec![5, 10]),
        ("accel_linearized", "quad_l1", vec![5, 10]),
    ] {
        let mut c = ExperimentConfig::preset(preset, alg, &horizons);
        c.trials.count = 2;
        c.algorithm.phases = Some(2);
        let r = run_experiment(&c).unwrap_or_else(|e| panic!("{alg}: {e}"));
        assert!(r.all_bounds_hold(), "{alg}: {:?}", r.checks);
        assert!(!r.rows.is_empty());
    }
}

#[test]
fn malformed_configs_name_the_field() {
    let err = ExperimentConfig::from_toml("preset = \"quad_l1\"\n[algorithm]\nname = \"gs\"\nhorizons = [-3]").unwrap_err();
    assert!(err.to_string().contains("`N`"));
    let err = ExperimentConfig::from_toml("preset = \"quad_l1\"\n[algorithm]\nname = \"gs\"\nhorizons = [3]\n[trials]\ncount = 0")
        .unwrap_err();
    assert!(err.to_string().contains("trials.count"));
    let c = ExperimentConfig::preset("strong_quad_l1", "gs", &[5]);
    let err = run_experiment(&c).unwrap_err();
    assert!(err.to_string().contains("D_tilde"), "{err}");
}

#[test]
fn msgs_sweep_fits_phase_length() {
    let mut c = ExperimentConfig::preset("strong_quad_l1", "msgs", &[]);
    c.algorithm.n0 = Some(7);
    let r = complexity_sweep(&c, &[1e-1, 1e-2, 1e-3]).unwrap();
    let fit = r.fit("msgs", "grad_calls").unwrap();
    assert!((fit.slope - 7.0).abs() < 1e-9, "{}", fit.slope);
}
