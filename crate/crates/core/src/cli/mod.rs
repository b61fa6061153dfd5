//! Command-line front end: argument parsing, config merging, the worker
//! pool and exit codes.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::KlsError;
use config::{RunConfig, Samples, ToleranceOverrides};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// Caps the worker pool.
pub const THREADS_ENV: &str = "KLSLAB_THREADS";

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError { code: EXIT_CONFIG, message: message.into() }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        CliError { code: EXIT_FAILURE, message: message.into() }
    }

    pub fn io(e: std::io::Error) -> Self {
        CliError::internal(format!("i/o error: {e}"))
    }

    pub fn config_from(e: KlsError) -> Self {
        CliError::config(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "klslab", version, about = "Inequality checks, Poincaré constants and K. Ball bodies of convex sets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run inequality checkers on bodies and test-function families (JSON report).
    Verify(Flags),
    /// Neumann Poincaré constants of planar bodies over a grid sweep (CSV).
    Poincare2d(Flags),
    /// Volume, Fradelizi and scaling checks of K. Ball bodies (CSV).
    Ballbody(Flags),
    /// Transfer integrals of the l_p product laws against n²AB (CSV).
    LpScaling(Flags),
    /// Finite-volume-ratio quantities of K. Ball bodies (CSV).
    Fvr(Flags),
    /// Spectral estimates and corollary ratios per body (JSON).
    Report(Flags),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Verify(_) => "verify",
            Command::Poincare2d(_) => "poincare2d",
            Command::Ballbody(_) => "ballbody",
            Command::LpScaling(_) => "lp-scaling",
            Command::Fvr(_) => "fvr",
            Command::Report(_) => "report",
        }
    }

    fn flags(&self) -> &Flags {
        match self {
            Command::Verify(f)
            | Command::Poincare2d(f)
            | Command::Ballbody(f)
            | Command::LpScaling(f)
            | Command::Fvr(f)
            | Command::Report(f) => f,
        }
    }
}

/// Flags shared by every subcommand; each one rejects those it does not use.
/// List flags take comma-separated values. Flags override the config file.
#[derive(Debug, Default, Args)]
pub struct Flags {
    /// TOML run config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Body kinds: ball, ellipsoid, cube, lp_ball, simplex, square, disk.
    #[arg(long, value_delimiter = ',')]
    pub body: Option<Vec<String>>,
    /// Measure kinds: mu_p, gaussian, uniform_body.
    #[arg(long, value_delimiter = ',')]
    pub measure: Option<Vec<String>>,
    #[arg(long, alias = "n", value_delimiter = ',')]
    pub dim: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub p: Option<Vec<f64>>,
    /// Sample budget, e.g. 200000 or 2e5.
    #[arg(long, value_parser = Samples::parse)]
    pub samples: Option<Samples>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Grid sizes; the spacing is 1/size.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<usize>>,
    /// Output file, written atomically; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    pub theorems: Option<Vec<String>>,
    /// Test-function families, or `all`.
    #[arg(long, value_delimiter = ',')]
    pub funcs: Option<Vec<String>>,
    #[arg(long)]
    pub functions_per_family: Option<usize>,
    /// Boundary grid size; replaces Monte Carlo by quadrature (n <= 3).
    #[arg(long)]
    pub quadrature: Option<usize>,
    /// Run the fixed inequality suite (verify).
    #[arg(long)]
    pub suite: bool,
    /// Add cube rows (lp-scaling).
    #[arg(long)]
    pub cube: bool,
    /// Standard errors allowed below zero slack in Monte Carlo verdicts.
    #[arg(long)]
    pub z: Option<f64>,
}

impl Flags {
    fn to_config(&self) -> RunConfig {
        let strip = |v: &Option<Vec<String>>| {
            v.as_ref().map(|v| v.iter().map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect())
        };
        RunConfig {
            command: None,
            seed: self.seed,
            samples: self.samples,
            out: self.out.clone(),
            body: strip(&self.body),
            bodies: None,
            measure: strip(&self.measure),
            measures: None,
            dim: self.dim.clone(),
            p: self.p.clone(),
            grid: self.grid.clone(),
            theorems: strip(&self.theorems),
            funcs: strip(&self.funcs),
            functions_per_family: self.functions_per_family,
            quadrature: self.quadrature,
            suite: self.suite.then_some(true),
            cube: self.cube.then_some(true),
            tolerance: self.z.map(|z| ToleranceOverrides { z: Some(z) }),
        }
    }
}

fn threads() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(k) if k >= 1 => Ok(Some(k)),
            _ => Err(CliError::config(format!("{THREADS_ENV} must be a positive integer, got `{s}`"))),
        },
    }
}

/// The config the command runs with: file, then flags on top.
pub fn resolve_config(cmd: &Command) -> Result<RunConfig, CliError> {
    let flags = cmd.flags();
    let mut cfg = match &flags.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
            RunConfig::from_toml(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(c) = &cfg.command {
        if c != cmd.name() {
            return Err(CliError::config(format!("config is for `{c}`, not `{}`", cmd.name())));
        }
    }
    cfg = cfg.overlay(flags.to_config());
    cfg.command = Some(cmd.name().to_string());
    Ok(cfg)
}

/// Runs `command` on a resolved config in the current rayon pool.
pub fn dispatch(command: &str, cfg: &RunConfig) -> Result<commands::Outcome, CliError> {
    match command {
        "verify" => commands::verify(cfg),
        "poincare2d" => commands::poincare2d(cfg),
        "ballbody" => commands::ballbody(cfg),
        "lp-scaling" => commands::lp_scaling(cfg),
        "fvr" => commands::fvr(cfg),
        "report" => commands::report(cfg),
        other => Err(CliError::config(format!("unknown command `{other}`"))),
    }
}

fn execute(cli: &Cli) -> Result<i32, CliError> {
    let cfg = resolve_config(&cli.command)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(k) = threads()? {
        pool = pool.num_threads(k);
    }
    let pool = pool.build().map_err(|e| CliError::internal(e.to_string()))?;
    let outcome = pool.install(|| run_resolved(cli.command.name(), &cfg))?;
    if let Some(text) = outcome.text {
        print!("{text}");
    }
    Ok(outcome.code)
}

/// [`dispatch`], then writes the document to `cfg.out` when one is set;
/// the returned text is `None` in that case.
pub fn run_resolved(command: &str, cfg: &RunConfig) -> Result<commands::Outcome, CliError> {
    let mut outcome = dispatch(command, cfg)?;
    if let (Some(path), Some(text)) = (&cfg.out, &outcome.text) {
        output::write_atomic(path, text.as_bytes()).map_err(CliError::io)?;
        outcome.text = None;
    }
    Ok(outcome)
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(code) => {
            if code == EXIT_FAILURE {
                eprintln!("klslab: some checks failed, see the report");
            }
            code
        }
        Err(e) => {
            let kind = if e.code == EXIT_CONFIG { "config error" } else { "error" };
            eprintln!("klslab: {kind}: {}", e.message);
            e.code
        }
    }
}
