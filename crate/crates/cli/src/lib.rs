//! `waveinv`: experiment harness around waveinv-core.
//!
//! Every subcommand loads one TOML configuration (plus `--set` overrides), validates it
//! against the solver preconditions, runs, and leaves its artefacts and a manifest in the
//! output directory.

pub mod binfmt;
pub mod commands;
pub mod config;
pub mod output;
pub mod plot;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::commands::RunError;
use crate::config::{ConfigError, ExperimentConfig};
use crate::output::Output;

pub const DEFAULT_1D: &str = include_str!("../configs/default_1d.toml");
pub const DEFAULT_2D: &str = include_str!("../configs/default_2d.toml");

pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "waveinv", version, about = "Recovering the potential of a semilinear wave equation from boundary data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML configuration; the built-in 1D default when absent.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override a key, e.g. `--set grid.nx=201` (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Output directory (overrides output.dir).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for the parallel loops.
    #[arg(long, global = true, env = "WAVEINV_WORKERS")]
    pub workers: Option<usize>,
    /// Noise seed (overrides noise.seed).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Solve the forward problem for pulse data and store u.
    Forward,
    /// Apply the Dirichlet-to-Neumann map to pulse data.
    Dn,
    /// Evaluate the three terms of the integral identity over a range of ε.
    Identity,
    /// Point estimates (1D) or line estimates plus FBP (2D).
    Reconstruct,
    /// Stability sweep over the configured noise levels (1D).
    Sweep,
    /// Partial Radon transform of the true slice and its FBP round trip.
    Radon,
    /// Fast checks with known answers.
    Selftest,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Forward => "forward",
            Command::Dn => "dn",
            Command::Identity => "identity",
            Command::Reconstruct => "reconstruct",
            Command::Sweep => "sweep",
            Command::Radon => "radon",
            Command::Selftest => "selftest",
        }
    }
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    subcommand: &'a str,
    kind: String,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    key: Option<String>,
}

fn load(cli: &Cli) -> Result<ExperimentConfig, ConfigError> {
    let mut overrides = cli.set.clone();
    if let Some(seed) = cli.seed {
        overrides.push(format!("noise.seed={seed}"));
    }
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p, &overrides)?,
        None => ExperimentConfig::from_toml(DEFAULT_1D, &overrides)?,
    };
    if let Some(out) = &cli.out {
        cfg.output.dir = out.to_string_lossy().into_owned();
    }
    Ok(cfg)
}

/// Output directory for error records when the configuration itself is unusable.
fn fallback_dir(cli: &Cli) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn write_error(out: Output, sub: &str, hash: &str, rec: &ErrorRecord, status: &str) {
    let mut out = out;
    out.task(sub, false, Some(rec.message.clone()));
    if let Err(e) = out.json("error.json", rec).and_then(|_| out.finish(sub, hash, status).map(|_| ())) {
        eprintln!("waveinv: could not write error record: {e}");
    }
}

/// Runs one invocation and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let sub = cli.command.name();
    if let Some(w) = cli.workers {
        if w == 0 {
            eprintln!("waveinv: --workers must be at least 1");
            return EXIT_CONFIG;
        }
        // Fails only when a pool already exists (repeated calls in one process).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(w).build_global();
    }
    let loaded = load(&cli).and_then(|cfg| cfg.validate().map(|st| (cfg, st)));
    let (cfg, setup) = match loaded {
        Ok(v) => v,
        Err(e) => {
            eprintln!("waveinv: configuration error: {e}");
            let dir = fallback_dir(&cli);
            let rec = ErrorRecord { subcommand: sub, kind: "ConfigError".into(), message: e.message.clone(), key: Some(e.path) };
            match Output::new(&dir, &config::Format::all()) {
                Ok(out) => write_error(out, sub, "", &rec, "failed"),
                Err(e) => eprintln!("waveinv: cannot create {}: {e}", dir.display()),
            }
            return EXIT_CONFIG;
        }
    };
    let hash = cfg.hash();
    let mut out = match Output::new(std::path::Path::new(&cfg.output.dir), &cfg.output.formats) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("waveinv: cannot create {}: {e}", cfg.output.dir);
            return EXIT_RUNTIME;
        }
    };
    let result = out.json("config.json", &cfg).map_err(RunError::from).and_then(|_| match cli.command {
        Command::Forward => commands::forward(&cfg, &setup, &mut out),
        Command::Dn => commands::dn(&cfg, &setup, &mut out),
        Command::Identity => commands::identity(&cfg, &setup, &mut out),
        Command::Reconstruct => commands::reconstruct(&cfg, &setup, &mut out),
        Command::Sweep => commands::sweep(&cfg, &setup, &mut out),
        Command::Radon => commands::radon(&cfg, &setup, &mut out),
        Command::Selftest => commands::selftest(&cfg, &setup, &mut out),
    });
    match result {
        Ok(()) => match out.finish(sub, &hash, "ok") {
            Ok(_) => 0,
            Err(e) => {
                eprintln!("waveinv: cannot write manifest: {e}");
                EXIT_RUNTIME
            }
        },
        Err(e) => {
            eprintln!("waveinv: {sub} failed: {e}");
            // config.json is always there; anything beyond it is a partial result.
            let status = if out.written() > 1 { "partial" } else { "failed" };
            let rec = ErrorRecord { subcommand: sub, kind: e.kind(), message: e.to_string(), key: None };
            write_error(out, sub, &hash, &rec, status);
            EXIT_RUNTIME
        }
    }
}
