//! `qse`: run the estimation pipelines from a JSON configuration.
//!
//! Exit status is 0 on success, 2 for invalid input and 3 when a numerical
//! step fails; the reason is printed as one line on stderr.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;
use qse_core::{Error, Result};

#[derive(Parser)]
#[command(
    name = "qse",
    version,
    about = "Optimal Bayesian estimation of scale parameters with quantum probes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Minimum error, optimal strategy and optimality certificate.
    Solve(Flags),
    /// Thermal-state pipeline with energy-basis diagnostics.
    Thermometry(Flags),
    /// Grade a measurement against the optimum.
    Assess(Flags),
    /// Monte-Carlo trajectories of a repeated measurement.
    Simulate(Flags),
    /// Exact error of a repeated measurement versus shot count.
    #[command(name = "multishot-exact")]
    MultishotExact(Flags),
    /// Averaged bound for several parameters.
    Multiparam(Flags),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Solve(_) => "solve",
            Command::Thermometry(_) => "thermometry",
            Command::Assess(_) => "assess",
            Command::Simulate(_) => "simulate",
            Command::MultishotExact(_) => "multishot-exact",
            Command::Multiparam(_) => "multiparam",
        }
    }

    fn flags(&self) -> &Flags {
        match self {
            Command::Solve(f)
            | Command::Thermometry(f)
            | Command::Assess(f)
            | Command::Simulate(f)
            | Command::MultishotExact(f)
            | Command::Multiparam(f) => f,
        }
    }
}

#[derive(clap::Args)]
struct Flags {
    /// JSON run configuration; relative paths inside it resolve against its directory.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    shots: Option<usize>,
    #[arg(long)]
    trajectories: Option<usize>,
    /// Boltzmann constant.
    #[arg(long)]
    kb: Option<f64>,
    #[arg(long = "grid-n")]
    grid_n: Option<usize>,
    #[arg(long = "theta-min")]
    theta_min: Option<f64>,
    #[arg(long = "theta-max")]
    theta_max: Option<f64>,
    #[arg(long = "theta-u")]
    theta_u: Option<f64>,
}

fn resolved_config(cmd: &Command) -> Result<RunConfig> {
    let f = cmd.flags();
    let mut cfg = match &f.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    match &cfg.command {
        Some(c) if c != cmd.name() => {
            return Err(Error::Validation(format!(
                "config is for `{c}`, not `{}`",
                cmd.name()
            )));
        }
        _ => cfg.command = Some(cmd.name().to_string()),
    }
    if let Some(v) = f.seed {
        cfg.seed = v;
    }
    if let Some(v) = f.shots {
        cfg.shots = v;
    }
    if let Some(v) = f.trajectories {
        cfg.trajectories = v;
    }
    if let Some(v) = f.kb {
        cfg.kb = v;
    }
    if let Some(v) = f.grid_n {
        cfg.grid.n = v;
    }
    if let Some(v) = f.theta_min {
        cfg.grid.theta_min = v;
    }
    if let Some(v) = f.theta_max {
        cfg.grid.theta_max = v;
    }
    if let Some(v) = f.theta_u {
        cfg.theta_u = Some(v);
    }
    if let Some(v) = &f.out {
        cfg.out = Some(v.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("QSE_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| {
        Error::Validation(format!("QSE_THREADS must be a positive integer, got {v:?}"))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Validation(format!("cannot configure thread pool: {e}")))
}

fn run(cmd: &Command) -> Result<Vec<PathBuf>> {
    configure_threads()?;
    let cfg = resolved_config(cmd)?;
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("qse_out"));
    match cmd {
        Command::Solve(_) => commands::solve(&cfg, &out),
        Command::Thermometry(_) => commands::thermometry(&cfg, &out),
        Command::Assess(_) => commands::assess(&cfg, &out),
        Command::Simulate(_) => commands::simulate(&cfg, &out),
        Command::MultishotExact(_) => commands::multishot_exact(&cfg, &out),
        Command::Multiparam(_) => commands::multiparam(&cfg, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let code = if e.is_validation() { 2 } else { 3 };
            eprintln!("error: {}", e.to_string().replace(['\n', '\r'], " "));
            ExitCode::from(code)
        }
    }
}
