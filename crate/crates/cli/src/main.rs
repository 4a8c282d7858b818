use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use quasimorse::Pattern;
use quasimorse_cli::commands::{self, EXIT_INVALID};
use quasimorse_cli::config::{ConfigError, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "quasimorse", version, about = "Quasi-Morse swarm steady states and particle checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// key = value file, or a summary.json from an earlier run
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    pattern: Option<Pattern>,
    #[arg(long, global = true)]
    dim: Option<usize>,
    #[arg(long = "C", global = true)]
    c: Option<f64>,
    #[arg(long, global = true)]
    l: Option<f64>,
    #[arg(long, global = true)]
    k: Option<f64>,
    #[arg(long, global = true)]
    lambda: Option<f64>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long, global = true)]
    beta: Option<f64>,
    #[arg(long, global = true)]
    dr: Option<f64>,
    #[arg(long, global = true)]
    rmax: Option<f64>,
    /// Number of particles
    #[arg(long = "N", global = true)]
    particles: Option<usize>,
    /// Final simulation time
    #[arg(long = "T", global = true)]
    t_end: Option<f64>,
    /// Extra key=value overrides, applied last
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tabulate U, U', U'' and report the regime
    Potential,
    /// Search the support of a flock or mill and fit its density
    Solve,
    /// Run the particle model and histogram the final swarm
    Simulate {
        /// summary.json of a solve run to compare against
        #[arg(long)]
        continuum: Option<PathBuf>,
    },
    /// Classify a grid of (C, l) cells
    Sweep,
}

fn build_config(cli: &Cli) -> Result<RunConfig, ConfigError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = cli.seed {
        cfg.seed = v;
    }
    if let Some(v) = cli.pattern {
        cfg.pattern = v;
    }
    if let Some(v) = cli.dim {
        cfg.dim = v;
    }
    let floats = [
        ("C", cli.c),
        ("l", cli.l),
        ("k", cli.k),
        ("lambda", cli.lambda),
        ("alpha", cli.alpha),
        ("beta", cli.beta),
        ("dr", cli.dr),
        ("rmax", cli.rmax),
        ("T", cli.t_end),
    ];
    for (key, v) in floats {
        if let Some(v) = v {
            cfg.set(key, &v.to_string())?;
        }
    }
    if let Some(n) = cli.particles {
        cfg.particles = n;
    }
    for kv in &cli.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| ConfigError(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        cfg.set(k.trim(), v)?;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let cfg = match build_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_INVALID as u8);
        }
    };
    let out = cli.out.clone().unwrap_or_else(commands::default_out);
    let result = match &cli.command {
        Command::Potential => commands::potential(&cfg, &out),
        Command::Solve => commands::solve(&cfg, &out),
        Command::Simulate { continuum } => commands::simulate(&cfg, &out, continuum.as_deref()),
        Command::Sweep => commands::sweep(&cfg, &out),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code as u8)
        }
    }
}
