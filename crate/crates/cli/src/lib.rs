//! Command-line driver: parses arguments and the JSON config, runs one
//! command and maps failures to exit codes.

pub mod commands;
pub mod config;
pub mod svg;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad arguments or config. Exit code 1.
    #[error("{0}")]
    Usage(String),
    /// Numerical domain error from the library. Exit code 2.
    #[error(transparent)]
    Domain(#[from] subfinsler::Error),
    /// Output could not be written. Exit code 2.
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    /// A verification check exceeded its tolerance. Exit code 3.
    #[error("verification failed: {0}")]
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Domain(_) | CliError::Io { .. } => 2,
            CliError::Verification(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "subfinsler", version, about = "Homogeneous sub-Finsler geometry on the Heisenberg group")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate I and its fiber derivative; report convexity and the average of I.
    Invariants(CommonArgs),
    /// Integrate geodesics and write their traces.
    Geodesic(CommonArgs),
    /// Locate conjugate points and report the index.
    Conjugate(CommonArgs),
    /// Run a verification suite: structure, conserved, oracle or dido.
    Verify(CommonArgs),
    /// Solve the isoperimetric problem by direct search.
    Dido(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Also write SVG plots.
    #[arg(long)]
    pub svg: bool,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Where a command writes its files.
#[derive(Debug, Clone)]
pub struct Output {
    pub dir: PathBuf,
    pub svg: bool,
}

impl Output {
    pub fn write(&self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(|source| CliError::Io { path: path.clone(), source })?;
        Ok(path)
    }
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let mut config = RunConfig::from_json(&text)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    Ok(config)
}

/// Runs a parsed command, writing the report to `report`.
pub fn execute(command: &Command, report: &mut dyn Write) -> Result<(), CliError> {
    let (Command::Invariants(args)
    | Command::Geodesic(args)
    | Command::Conjugate(args)
    | Command::Verify(args)
    | Command::Dido(args)) = command;
    let config = load_config(&args.config, args.seed)?;
    std::fs::create_dir_all(&args.out).map_err(|source| CliError::Io { path: args.out.clone(), source })?;
    let out = Output { dir: args.out.clone(), svg: args.svg };
    match command {
        Command::Invariants(_) => commands::invariants(&config, &out, report),
        Command::Geodesic(_) => commands::geodesic(&config, &out, report),
        Command::Conjugate(_) => commands::conjugate(&config, &out, report),
        Command::Verify(_) => commands::verify(&config, &out, report),
        Command::Dido(_) => commands::dido(&config, &out, report),
    }
}

/// Full program: argument parsing, execution, exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match execute(&cli.command, &mut lock) {
        Ok(()) => 0,
        Err(e) => {
            let _ = lock.flush();
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
