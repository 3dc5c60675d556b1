//! `nahm`: batch front end. Exit codes: 0 all checks pass, 1 a check
//! failed, 2 configuration error, 3 computation error.

mod commands;
mod config;
mod output;

use clap::{Parser, Subcommand, ValueEnum};
use commands::Failure;
use config::ConfigError;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "nahm", version, about = "Numerical Nahm transform on the cylinder")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// config file (flat `key = value`, dotted sections)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// output directory; overrides OUTPUT_DIR and `output.dir`
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// perturbation seed; overrides `model.seed`
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// worker threads; overrides `run.workers`
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// inline override, e.g. `--set disc.n_t=81`; repeatable
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// flat spectrum at (w, z) against the truncated operator
    Spectrum,
    /// Fredholm wall map over twists or weights
    Grid,
    /// index and spectral flow at each configured twist
    Index,
    /// monopole field over a box of twists
    Scan,
    /// Higgs pole near a singular point
    Singularity,
    /// exact-sequence rank audit near the singular points
    Audit,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Grid => "grid",
            Command::Index => "index",
            Command::Scan => "scan",
            Command::Singularity => "singularity",
            Command::Audit => "audit",
        }
    }
}

fn config_error(e: ConfigError) -> ExitCode {
    eprintln!("config error: {e}");
    ExitCode::from(2)
}

fn compute_error(e: nahm::Error) -> ExitCode {
    eprintln!("error: {}: {e}", e.name());
    ExitCode::from(3)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let text = match &cli.config {
        Some(p) => match std::fs::read_to_string(p) {
            Ok(t) => t,
            Err(e) => {
                return config_error(ConfigError { location: p.display().to_string(), message: e.to_string() });
            }
        },
        None => String::new(),
    };
    let mut sets = cli.sets.clone();
    if let Some(s) = cli.seed {
        sets.push(format!("model.seed={s}"));
    }
    if let Some(n) = cli.workers {
        sets.push(format!("run.workers={n}"));
    }
    if let Some(f) = cli.format {
        let v = match f {
            Format::Json => "json",
            Format::Csv => "csv",
        };
        sets.push(format!("output.format=\"{v}\""));
    }
    let cfg = match config::parse(&text, &sets) {
        Ok(c) => c,
        Err(e) => return config_error(e),
    };
    let out = cli
        .out
        .clone()
        .or_else(|| std::env::var_os("OUTPUT_DIR").filter(|v| !v.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    if cfg.run.workers > 0 {
        // fails only if a pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.run.workers).build_global();
    }
    let resolved = match config::resolve(cfg, text, out) {
        Ok(r) => r,
        Err(e) => return config_error(e),
    };
    let run = match cli.command {
        Command::Spectrum => commands::spectrum(&resolved),
        Command::Grid => commands::grid(&resolved),
        Command::Index => commands::index(&resolved),
        Command::Scan => commands::scan(&resolved),
        Command::Singularity => commands::singularity(&resolved),
        Command::Audit => commands::audit(&resolved),
    };
    let outcome = match run {
        Ok(o) => o,
        Err(Failure::Config(e)) => return config_error(e),
        Err(Failure::Compute(e)) => return compute_error(e),
    };
    let name = cli.command.name();
    match output::write_summary(&resolved.out, name, resolved.cfg.model.seed, &resolved.cfg, &outcome) {
        Ok(pass) => {
            for c in &outcome.checks {
                println!("{} {name}.{}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => compute_error(e),
    }
}
