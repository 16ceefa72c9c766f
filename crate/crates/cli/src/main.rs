mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use seco_core::rocket::solve_problem;
use seco_core::scp::propagation_defects;

use crate::config::RunConfig;

#[derive(Parser)]
#[command(name = "seco", version, about = "Multi-phase rocket landing trajectory optimizer")]
struct Cli {
    /// Increase log verbosity (-v per-iteration progress, -vv solver detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the landing problem and write results.
    Run {
        #[command(flatten)]
        source: ConfigSource,
        /// Output directory (created if missing).
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Machine-readable outputs to write; summary.txt is always written.
        #[arg(long, value_delimiter = ',', default_value = "csv,json")]
        format: Vec<Format>,
        /// Assert a deterministic run. The solver draws no random numbers, so
        /// this only records the intent in the log.
        #[arg(long)]
        seed_free: bool,
    },
    /// Check a trajectory file against the constraints and the dynamics.
    Verify {
        #[arg(long)]
        trajectory: PathBuf,
        #[command(flatten)]
        source: ConfigSource,
    },
    /// Print the default configuration as TOML.
    DefaultConfig,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct ConfigSource {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Use the built-in scenario.
    #[arg(long = "default")]
    use_default: bool,
}

impl ConfigSource {
    fn load(&self) -> Result<RunConfig> {
        let cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

fn run(cfg: &RunConfig, out: &Path, formats: &[Format]) -> Result<bool> {
    let problem = cfg.problem()?;
    let report = solve_problem(&problem, &cfg.scp(), &cfg.pipg())?;
    let feas = problem.check_feasibility(&report.trajectory, cfg.verify_tol);
    let diag = output::diagnostics(&problem, &report, &feas);

    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    if formats.contains(&Format::Csv) {
        output::write_trajectory_csv(&out.join("trajectory.csv"), &problem, &report.trajectory)?;
    }
    if formats.contains(&Format::Json) {
        let path = out.join("diagnostics.json");
        std::fs::write(&path, serde_json::to_string_pretty(&diag)?).with_context(|| format!("writing {}", path.display()))?;
    }
    let summary = output::summary_text(&diag);
    std::fs::write(out.join("summary.txt"), &summary)?;
    print!("{summary}");
    Ok(report.converged)
}

fn verify(cfg: &RunConfig, trajectory: &Path) -> Result<bool> {
    let problem = cfg.problem()?;
    let (traj, spread) = output::read_trajectory_csv(trajectory, &problem)?;
    let feas = problem.check_feasibility(&traj, cfg.verify_tol);
    let defects = propagation_defects(&problem, &traj, cfg.substeps * cfg.check_substeps_factor)?;
    let defect = defects.iter().copied().fold(0.0, f64::max);
    print!("{}", output::feasibility_table(&feas, defect, spread));
    let ok = feas.passes(cfg.verify_tol) && defect <= cfg.defect_tol && spread <= cfg.verify_tol * cfg.scale_time;
    println!("{}", if ok { "PASS" } else { "FAIL" });
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match &cli.command {
        Command::Run { source, out, format, seed_free } => source.load().and_then(|cfg| {
            if *seed_free {
                info!("seed-free run: no random numbers are drawn");
            }
            run(&cfg, out, format)
        }),
        Command::Verify { trajectory, source } => source.load().and_then(|cfg| verify(&cfg, trajectory)),
        Command::DefaultConfig => {
            print!("{}", RunConfig::default().to_toml());
            Ok(true)
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
