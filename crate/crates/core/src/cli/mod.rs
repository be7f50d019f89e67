//! Command-line front end: `field`, `chern`, `fs-sweep`, `holonomy` and `validate`.
//!
//! Exit codes: 0 success (warnings allowed), 2 usage error, 3 compute error,
//! 4 validation failure.

pub mod commands;
pub mod config;
pub mod output;
pub mod validate;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use config::{load_config_file, parse_band_range, parse_grid, parse_list, parse_pair, parse_plane, parse_sweep};
use config::{CommandKind, Partial, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_COMPUTE: i32 = 3;
pub const EXIT_VALIDATION: i32 = 4;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("compute error: {0}")]
    Compute(String),
    #[error("validation failed: {0}")]
    Validation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Compute(_) => EXIT_COMPUTE,
            CliError::Validation(_) => EXIT_VALIDATION,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "qgt", version, about = "Quantum geometric tensor, Berry curvature and Chern numbers of lattice models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Per-cell metric and curvature on the momentum grid, one CSV per m.
    Field(RunArgs),
    /// First Chern number by the lattice and direct methods.
    Chern(RunArgs),
    /// Brillouin-zone integrated metric trace against m.
    FsSweep(RunArgs),
    /// Small-loop holonomy against curvature for shrinking loops.
    Holonomy(RunArgs),
    /// Built-in invariant checks.
    Validate(ValidateArgs),
}

#[derive(Debug, Args, Default)]
struct RunArgs {
    /// qwz, doubled-qwz, constant or table:<path>
    #[arg(long)]
    model: Option<String>,
    /// Comma-separated mass values.
    #[arg(long, allow_hyphen_values = true)]
    m: Option<String>,
    /// Grid size, NxN.
    #[arg(long)]
    grid: Option<String>,
    /// Half-open band range a..b of the tracked subspace.
    #[arg(long)]
    band_range: Option<String>,
    /// Finite-difference step.
    #[arg(long)]
    step: Option<f64>,
    /// Energy gap at or below which a point is singular.
    #[arg(long)]
    gap_tol: Option<f64>,
    /// Mass sweep start:stop:step.
    #[arg(long, allow_hyphen_values = true)]
    sweep: Option<String>,
    /// direct, lattice, analytic or projector.
    #[arg(long)]
    method: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or json.
    #[arg(long)]
    format: Option<String>,
    /// Worker threads.
    #[arg(long)]
    workers: Option<usize>,
    /// TOML config file, or a JSON summary written by an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Loop center kx,ky.
    #[arg(long, allow_hyphen_values = true)]
    center: Option<String>,
    /// Comma-separated loop side lengths.
    #[arg(long)]
    sides: Option<String>,
    /// Loop plane as two coordinate indices, e.g. 0,1.
    #[arg(long)]
    plane: Option<String>,
    /// Path points per loop side.
    #[arg(long)]
    segments: Option<usize>,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    /// Worker threads.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, hide = true)]
    inject: Option<String>,
}

fn usage<E: std::fmt::Display>(flag: &'static str) -> impl Fn(E) -> CliError {
    move |e| CliError::Usage(format!("--{flag}: {e}"))
}

impl RunArgs {
    fn partial(&self) -> Result<Partial, CliError> {
        Ok(Partial {
            model: self.model.clone(),
            m: self.m.as_deref().map(parse_list).transpose().map_err(usage("m"))?,
            grid: self.grid.as_deref().map(parse_grid).transpose().map_err(usage("grid"))?,
            band_range: self
                .band_range
                .as_deref()
                .map(parse_band_range)
                .transpose()
                .map_err(usage("band-range"))?,
            gap_tol: self.gap_tol,
            step: self.step,
            sweep: self.sweep.as_deref().map(parse_sweep).transpose().map_err(usage("sweep"))?,
            method: self.method.clone(),
            out: self.out.clone(),
            format: self.format.clone(),
            workers: self.workers,
            center: self.center.as_deref().map(parse_pair).transpose().map_err(usage("center"))?,
            sides: self.sides.as_deref().map(parse_list).transpose().map_err(usage("sides"))?,
            plane: self.plane.as_deref().map(parse_plane).transpose().map_err(usage("plane"))?,
            segments: self.segments,
        })
    }

    fn resolve(&self, kind: CommandKind) -> Result<(RunConfig, config::LoadedModel), CliError> {
        let base = match &self.config {
            Some(path) => load_config_file(path)?,
            None => Partial::default(),
        };
        RunConfig::resolve(base.merged(self.partial()?), kind)
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Compute(format!("cannot start worker pool: {e}")))
}

fn run_command(args: &RunArgs, kind: CommandKind) -> Result<(), CliError> {
    let (config, model) = args.resolve(kind)?;
    std::fs::create_dir_all(&config.out)
        .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", config.out.display())))?;
    let summary = pool(config.workers)?.install(|| match kind {
        CommandKind::Field => commands::field(&config, &model),
        CommandKind::Chern => commands::chern(&config, &model),
        CommandKind::FsSweep => commands::fs_sweep(&config, &model),
        CommandKind::Holonomy => commands::holonomy(&config, &model),
    })?;
    let path = summary.write(&config.out)?;
    for w in &summary.warnings {
        eprintln!("warning: {w}");
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn run_validate(args: &ValidateArgs) -> Result<(), CliError> {
    let mutation = match args.inject.as_deref() {
        None => None,
        Some(s) => Some(
            validate::Mutation::parse(s).ok_or_else(|| CliError::Usage(format!("unknown mutation '{s}'")))?,
        ),
    };
    let workers = args
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    if workers == 0 {
        return Err(CliError::Usage("workers must be at least 1".into()));
    }
    let checks = pool(workers)?.install(|| validate::run_suite(mutation));
    print!("{}", validate::report(&checks));
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(failed.join(", ")))
    }
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Field(a) => run_command(a, CommandKind::Field),
        Command::Chern(a) => run_command(a, CommandKind::Chern),
        Command::FsSweep(a) => run_command(a, CommandKind::FsSweep),
        Command::Holonomy(a) => run_command(a, CommandKind::Holonomy),
        Command::Validate(a) => run_validate(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
