use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_slide-opt"))
}

#[test]
fn list_problems_names_every_family() {
    let out = bin().arg("list-problems").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for f in ["quad_l1", "strong_quad_l1", "stoch_abs", "saddle_linf", "quad_l1_sweep"] {
        assert!(text.contains(f));
    }
}

#[test]
fn run_writes_requested_formats() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(
        &cfg,
        "preset = \"stoch_abs\"\n[algorithm]\nname = \"sgs\"\nhorizons = [5]\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .args(["--jobs", "2", "--seed-range", "10..14", "--format", "csv,svg"])
        .env("SLIDE_OPT_LOG", "info")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = std::fs::read_to_string(out_dir.join("rows.csv")).unwrap();
    assert_eq!(rows.lines().count(), 5);
    assert!(rows.lines().nth(1).unwrap().starts_with("10,sgs,fixed_horizon,5.0,"));
    assert!(out_dir.join("chart.svg").exists());
    assert!(!out_dir.join("summary.json").exists());
}

#[test]
fn bad_config_exits_with_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "preset = \"quad_l1\"\n[algorithm]\nname = \"gs\"\nhorizons = [-1]\n").unwrap();
    let out = bin().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`N`"));
}

#[test]
fn verify_bounds_passes_on_stochastic_desk() {
    let out = bin().args(["verify-bounds", "stoch_abs"]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("[ok] oracle count identities"));
    assert!(!text.contains("FAIL"));
}
