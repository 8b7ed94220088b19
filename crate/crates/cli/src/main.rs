//! `interp-solve`: run, sweep and summarize solver experiments.

// `!(x > 0.0)` deliberately rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod experiment;
mod report;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use experiment::Status;

#[derive(Parser)]
#[command(name = "interp-solve", version, about = "Solver experiments for structured inclusion problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one solver and write a trajectory CSV plus a JSON report.
    Run(RunArgs),
    /// Run a parameter grid or figure preset into a directory.
    Sweep(SweepArgs),
    /// Aggregate bound reports from JSON files or directories.
    Report(ReportArgs),
}

/// Flags mirroring the config-file keys; flags override the file.
#[derive(Args, Debug, Default)]
struct ConfigFlags {
    /// `key = value` config file applied before the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// quadratic, polar, forsaken or lne-forsaken.
    #[arg(long, allow_hyphen_values = true)]
    problem: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    a: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    b: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    rho: Option<String>,
    #[arg(long = "L", allow_hyphen_values = true)]
    lipschitz: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    solver: Option<String>,
    /// Stepsize or `auto`.
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<String>,
    /// Inner steps, `auto-best` or `auto-last`.
    #[arg(long, allow_hyphen_values = true)]
    tau: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<String>,
    /// Outer iterations.
    #[arg(long = "K", allow_hyphen_values = true)]
    outer_iters: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    sigma0: Option<String>,
    /// Batch size, `best` (k²) or `last` (k³).
    #[arg(long, allow_hyphen_values = true)]
    batch: Option<String>,
    /// Comma-separated coordinates, `default` or `origin`.
    #[arg(long, allow_hyphen_values = true)]
    z0: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    seed: Option<String>,
    /// Trajectory CSV for `run`, output directory for `sweep`.
    #[arg(long, allow_hyphen_values = true)]
    output: Option<String>,
    /// Comma-separated checks, `auto` or `none`.
    #[arg(long, allow_hyphen_values = true)]
    checks: Option<String>,
    /// Stop once the residual reaches this value.
    #[arg(long, allow_hyphen_values = true)]
    target: Option<String>,
    /// Maximum number of oracle calls.
    #[arg(long, allow_hyphen_values = true)]
    budget: Option<String>,
    /// exact, estimated[:TAU], operator, step or auto.
    #[arg(long, allow_hyphen_values = true)]
    residual: Option<String>,
    #[arg(long = "residual-gamma", allow_hyphen_values = true)]
    residual_gamma: Option<String>,
    /// Record violated convergence conditions as warnings instead of failing.
    #[arg(long)]
    permissive: bool,
}

impl ConfigFlags {
    fn to_config(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        let flags = [
            ("problem", &self.problem),
            ("a", &self.a),
            ("b", &self.b),
            ("rho", &self.rho),
            ("L", &self.lipschitz),
            ("solver", &self.solver),
            ("gamma", &self.gamma),
            ("lambda", &self.lambda),
            ("tau", &self.tau),
            ("alpha", &self.alpha),
            ("K", &self.outer_iters),
            ("sigma0", &self.sigma0),
            ("batch", &self.batch),
            ("z0", &self.z0),
            ("seed", &self.seed),
            ("output", &self.output),
            ("checks", &self.checks),
            ("target", &self.target),
            ("budget", &self.budget),
            ("residual", &self.residual),
            ("residual-gamma", &self.residual_gamma),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)
                    .map_err(|e| e.context(format!("--{key}")))?;
            }
        }
        if self.permissive {
            cfg.permissive = true;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    flags: ConfigFlags,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    flags: ConfigFlags,
    /// Grid axis `key=v1,v2,...` (use `;` between start points); repeatable.
    #[arg(long)]
    grid: Vec<String>,
    /// fig-forsaken or fig-la.
    #[arg(long)]
    preset: Option<String>,
    /// Worker threads.
    #[arg(long, env = "INTERP_SOLVE_JOBS", default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct ReportArgs {
    /// Run reports (`.json`) or directories containing them.
    paths: Vec<PathBuf>,
}

fn run(args: &RunArgs) -> Result<u8> {
    let cfg = args.flags.to_config()?;
    let outcome = experiment::execute(&cfg)?;
    if let Some(e) = &outcome.error {
        eprintln!("interp-solve: {e}");
    }
    Ok(match outcome.status {
        Status::Finished => 0,
        Status::Diverged => 2,
        Status::Failed => 1,
    })
}

fn sweep(args: &SweepArgs) -> Result<u8> {
    let mut cfg = args.flags.to_config()?;
    let dir = match &args.flags.output {
        Some(_) => cfg.output.clone(),
        None if cfg.output == RunConfig::default().output => PathBuf::from("sweep"),
        None => cfg.output.clone(),
    };
    cfg.output = dir.clone();
    let points = match (&args.preset, args.grid.is_empty()) {
        (Some(_), false) => bail!("--preset and --grid are exclusive"),
        (Some(p), true) => sweep::preset_points(p)?,
        (None, _) => {
            let axes = args
                .grid
                .iter()
                .map(|g| sweep::parse_axis(g))
                .collect::<Result<Vec<_>>>()?;
            if axes.is_empty() {
                bail!("sweep needs --grid or --preset");
            }
            sweep::grid_points(&axes)
        }
    };
    let outcomes = sweep::sweep(&cfg, &points, &dir, args.jobs)?;
    for (p, o) in points.iter().zip(&outcomes) {
        if let Err(e) = o {
            eprintln!("interp-solve: run '{}' failed: {e}", p.label);
        }
    }
    Ok(sweep::exit_code(&outcomes) as u8)
}

fn report(args: &ReportArgs) -> Result<u8> {
    let doc = report::aggregate(&args.paths)?;
    println!("{}", serde_json::to_string(&doc)?);
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => run(a),
        Command::Sweep(a) => sweep(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("interp-solve: {e:#}");
            ExitCode::from(1)
        }
    }
}
