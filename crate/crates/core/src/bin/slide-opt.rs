use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::error;
use slide_opt::bench::{
    complexity_sweep, presets, run_experiment, verify_bounds, ExperimentConfig, Format, Report,
};

#[derive(Parser)]
#[command(name = "slide-opt", version, about = "Gradient sliding experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment at fixed horizons.
    Run(Common),
    /// Sweep target accuracies and fit oracle calls against 1/eps.
    Sweep(Common),
    /// Check the convergence bounds and count identities on a desk instance.
    VerifyBounds {
        /// Desk instance name.
        #[arg(default_value = "quad_l1")]
        problem: String,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// List problem families and desk instances.
    ListProblems,
}

#[derive(Args)]
struct Common {
    /// TOML experiment config; the desk quad_l1 instance with gs otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
    /// Half-open seed range, e.g. 0..200.
    #[arg(long, value_parser = parse_range)]
    seed_range: Option<(u64, u64)>,
    #[arg(long, value_enum, value_delimiter = ',')]
    format: Vec<Format>,
}

fn parse_range(s: &str) -> Result<(u64, u64), String> {
    let (a, b) = s.split_once("..").ok_or("expected A..B")?;
    let a: u64 = a.trim().parse().map_err(|e| format!("{e}"))?;
    let b: u64 = b.trim().parse().map_err(|e| format!("{e}"))?;
    if b <= a {
        return Err("empty seed range".into());
    }
    Ok((a, b))
}

fn load(c: &Common, sweep: bool) -> slide_opt::Result<ExperimentConfig> {
    let mut config = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None if sweep => {
            let mut cfg = ExperimentConfig::preset("quad_l1_sweep", "gs", &[]);
            cfg.sweep = Some(slide_opt::bench::SweepConfig {
                accuracies: vec![1e-1, 1e-2, 1e-3, 1e-4],
                stop_at_target: false,
                max_iterations: 1_000_000,
            });
            cfg
        }
        None => ExperimentConfig::preset("quad_l1", "gs", &[5, 10, 20, 50]),
    };
    if let Some(dir) = &c.out {
        config.output.dir = Some(dir.clone());
    }
    if c.jobs.is_some() {
        config.trials.jobs = c.jobs;
    }
    if let Some((a, b)) = c.seed_range {
        config.trials.first_seed = a;
        config.trials.count = (b - a) as i64;
    }
    if !c.format.is_empty() {
        config.output.formats = c.format.clone();
    }
    config.validate()?;
    Ok(config)
}

fn print_report(r: &Report) {
    println!(
        "{} ({}) on {}: L = {:.6e}, M = {:.6e}, sigma = {:.6e}, Psi* = {:.12e}",
        r.config.algorithm.name,
        r.config.policy(),
        r.derived.family,
        r.derived.lipschitz,
        r.derived.nonsmooth_bound,
        r.derived.sigma,
        r.derived.psi_star
    );
    for a in &r.aggregates {
        println!(
            "  {:>10}  gap {:.4e} (se {:.1e})  bound {:.4e}  grad {:.0}  subgrad {:.0}  stoch {:.0}",
            a.k_or_epsilon,
            a.mean_gap,
            a.se_gap,
            a.bound,
            a.mean_grad_calls,
            a.mean_subgrad_calls,
            a.mean_stoch_calls
        );
    }
    for f in &r.fits {
        println!("  fit {} vs {}: slope {:.3}", f.series, f.x, f.slope);
    }
    for c in &r.checks {
        println!(
            "  [{}] {}: {:.4e} <= {:.4e}",
            if c.holds { "ok" } else { "FAIL" },
            c.name,
            c.value,
            c.bound
        );
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SLIDE_OPT_LOG", "error")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::ListProblems => {
            for (name, desc) in presets() {
                println!("{name:16} {desc}");
            }
            return ExitCode::SUCCESS;
        }
        Command::Run(c) => load(&c, false).and_then(|cfg| run_experiment(&cfg)).map(|r| vec![r]),
        Command::Sweep(c) => load(&c, true).and_then(|cfg| {
            let acc = cfg.sweep.as_ref().map(|s| s.accuracies.clone()).ok_or_else(|| {
                slide_opt::SlideError::InvalidConfig {
                    field: "sweep".into(),
                    reason: "the config has no [sweep] table".into(),
                }
            })?;
            complexity_sweep(&cfg, &acc).map(|r| vec![r])
        }),
        Command::VerifyBounds { problem, jobs } => verify_bounds(&problem, jobs),
    };
    match result {
        Ok(reports) => {
            for r in &reports {
                print_report(r);
            }
            if reports.iter().all(Report::all_bounds_hold) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
