//! `tvflow` command line: run the flow, check trajectories against the
//! entropy formulation, and run the experiment suite.

mod theorems;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tvflow::field::ScalarField;
use tvflow::io::{
    load_trajectory, save_trajectory, write_atomic, RunConfig, SolverKind, OUTPUT_ENV,
};
use tvflow::lab::{decay_experiment, decay_exponents, LabConfig};
use tvflow::solver::{evolve, p_continuation, InnerOptions, Snapshots, Source};
use tvflow::verify::{entropy_report, make_test_pair, C_TOL};

#[derive(Parser)]
#[command(name = "tvflow", version, about = "Total variation flow laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the flow and write the trajectory.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the output directory of the run file.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Residuals of a stored trajectory as CSV.
    Verify {
        #[arg(long)]
        config: PathBuf,
        /// Defaults to the output directory of the run file.
        #[arg(long)]
        trajectory: Option<PathBuf>,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run experiments and print one PASS/FAIL line each.
    Theorems {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated subset of the experiments.
        #[arg(long, value_delimiter = ',')]
        only: Option<Vec<String>>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Decay exponents for `(N, r0, r)`, optionally with the dynamic check.
    Decay {
        #[arg(long = "N")]
        n: u32,
        #[arg(long)]
        r0: f64,
        #[arg(long)]
        r: f64,
        /// Run file whose `u0` and time grid drive the dynamic check.
        #[arg(long)]
        run: Option<PathBuf>,
    },
    /// Build and configuration echo.
    Info {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

pub(crate) enum Failure {
    Usage(String),
    Stage(&'static str, tvflow::Error),
    Checks,
}

impl Failure {
    fn exit(self) -> ExitCode {
        match self {
            Failure::Usage(msg) => {
                eprintln!("tvflow: {msg}");
                ExitCode::from(2)
            }
            Failure::Stage(stage, e) => {
                eprintln!("tvflow: {stage} failed: {e}");
                ExitCode::from(1)
            }
            Failure::Checks => ExitCode::from(1),
        }
    }
}

pub(crate) type Outcome = Result<(), Failure>;

pub(crate) fn stage<T>(name: &'static str, r: tvflow::Result<T>) -> Result<T, Failure> {
    r.map_err(|e| Failure::Stage(name, e))
}

pub(crate) fn usage<T>(r: tvflow::Result<T>) -> Result<T, Failure> {
    r.map_err(|e| Failure::Usage(e.to_string()))
}

/// The parsed run file and the directory its relative paths resolve against.
pub(crate) fn read_config(path: &Path) -> Result<(RunConfig, PathBuf), Failure> {
    let text =
        fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let cfg =
        RunConfig::parse(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((cfg, base))
}

pub(crate) fn lab_config(cfg: &RunConfig) -> LabConfig {
    LabConfig::new(cfg.final_time, cfg.tau)
        .with_inner(cfg.inner())
        .with_ladder(cfg.ladder.unwrap_or_default())
}

fn short(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let s = format!("{x:.12}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn solve(config: &Path, output: Option<PathBuf>) -> Outcome {
    let (cfg, base) = read_config(config)?;
    let solve = usage(cfg.to_solve_config(&base))?;
    let traj = match cfg.solver() {
        SolverKind::Rof => stage("solve", evolve(&solve))?,
        SolverKind::Plap => {
            stage(
                "solve",
                p_continuation(&solve, &cfg.p_schedule(), cfg.plap()),
            )?
            .trajectory
        }
    };
    let dir = output.unwrap_or_else(|| cfg.output_dir());
    stage("write", save_trajectory(&dir, &traj))?;
    let worst = traj.step_log().iter().fold(0.0f64, |m, s| m.max(s.gap));
    println!(
        "solved {} steps, {} snapshots, worst inner gap {worst:e}, wrote {}",
        traj.step_log().len(),
        traj.len(),
        dir.display()
    );
    Ok(())
}

fn verify(config: &Path, trajectory: Option<PathBuf>, csv: Option<PathBuf>) -> Outcome {
    let (cfg, base) = read_config(config)?;
    let solve = usage(cfg.to_solve_config(&base))?.with_snapshots(Snapshots::EveryStep);
    let dir = trajectory.unwrap_or_else(|| cfg.output_dir());
    let traj = stage("load", load_trajectory(&dir, &solve.f))?;
    let grid = solve.grid.clone();
    let v0 = match &cfg.pair_u0 {
        Some(s) => usage(s.realize(&grid, &base))?,
        None => ScalarField::zeros(&grid),
    };
    let g = match &cfg.pair_f {
        Some(s) => Source::constant(usage(s.realize(&grid, &base))?),
        None => Source::zero(&grid),
    };
    let pair = stage("test pair", make_test_pair(&g, &v0, &solve))?;
    let report = stage(
        "verify",
        entropy_report(&traj, &solve.f, &pair, &cfg.k_levels()),
    )?;
    let text = report.to_csv();
    match csv {
        Some(path) => stage("write", write_atomic(&path, text.as_bytes()))?,
        None => print!("{text}"),
    }
    let worst = report.max_entropy_residual();
    let allowed = C_TOL * (report.h + report.tau);
    let pass = worst <= allowed;
    eprintln!(
        "{} verify max_entropy_residual={worst:.3e} allowed={allowed:.3e}",
        if pass { "PASS" } else { "FAIL" }
    );
    if pass {
        Ok(())
    } else {
        Err(Failure::Checks)
    }
}

fn decay(n: u32, r0: f64, r: f64, run: Option<PathBuf>) -> Outcome {
    let params = usage(decay_exponents(n, r0, r))?;
    println!(
        "h0={} h1={} C={}",
        short(params.h0),
        short(params.h1),
        short(params.c)
    );
    let Some(path) = run else {
        return Ok(());
    };
    let (cfg, base) = read_config(&path)?;
    let grid = usage(cfg.grid())?;
    let u0 = usage(cfg.u0.realize(&grid, &base))?;
    let report = stage("decay", decay_experiment(&u0, &params, &lab_config(&cfg)))?;
    println!("{}", report.summary_line());
    if report.pass {
        Ok(())
    } else {
        Err(Failure::Checks)
    }
}

fn info(config: Option<PathBuf>) -> Outcome {
    println!("tvflow {}", env!("CARGO_PKG_VERSION"));
    println!(
        "profile: {}",
        if cfg!(debug_assertions) {
            "debug"
        } else {
            "release"
        }
    );
    println!("scalars: f32 f64 (runs in f64)");
    let inner = InnerOptions::<f64>::default();
    println!(
        "inner defaults: method={} gap_tol={:e} max_iters={} check_every={}",
        inner.method.as_str(),
        inner.gap_tol,
        inner.max_iters,
        inner.check_every
    );
    println!("experiments: {}", tvflow::io::config::EXPERIMENTS.join(","));
    println!("output override: ${OUTPUT_ENV}");
    if let Some(path) = config {
        let (cfg, _) = read_config(&path)?;
        let grid = usage(cfg.grid())?;
        println!(
            "grid: {}x{} h={} steps={}",
            grid.nx(),
            grid.ny(),
            grid.h(),
            (cfg.final_time / cfg.tau).round()
        );
        println!("output: {}", cfg.output_dir().display());
        print!("{}", cfg.serialize());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Solve { config, output } => solve(&config, output),
        Command::Verify {
            config,
            trajectory,
            csv,
        } => verify(&config, trajectory, csv),
        Command::Theorems {
            config,
            only,
            output,
        } => theorems::run(&config, only, output),
        Command::Decay { n, r0, r, run } => decay(n, r0, r, run),
        Command::Info { config } => info(config),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => f.exit(),
    }
}
