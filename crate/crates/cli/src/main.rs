//! `cop-lqr`: solve, verify, simulate and sweep the child-order-placement model.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid config or arguments, 3 solver fault,
//! 4 verification failure, 5 raw-mode abort limit breached.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cop_lqr::config::Format;

pub const EXIT_IO: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_SOLVER: u8 = 3;
pub const EXIT_VERIFY: u8 = 4;
pub const EXIT_ABORT: u8 = 5;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "COP_LQR_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "cop-lqr",
    version,
    about = "Stochastic LQR child order placement"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the backward recursion and write policy and value tables.
    Solve(Common),
    /// Check the closed-form solution against the numerical oracles.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Verify a solution table from disk instead of solving.
        #[arg(long)]
        tables: Option<PathBuf>,
    },
    /// Monte Carlo the optimal policy from the configured initial state.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Write per-step path logs to this CSV file.
        #[arg(long)]
        paths_out: Option<PathBuf>,
    },
    /// Solve and simulate over a range of one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        axis: Axis,
        /// `start:stop:count`, endpoints included.
        #[arg(long, value_parser = parse_range)]
        range: Range,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Simulation seed; overrides `simulation.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Table format; overrides `output.formats`.
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    Eta,
    GammaTerminal,
    Lambda0,
}

impl Axis {
    pub fn column(self) -> &'static str {
        match self {
            Axis::Eta => "eta",
            Axis::GammaTerminal => "gamma_terminal",
            Axis::Lambda0 => "lambda0",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl Range {
    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let step = (self.stop - self.start) / (self.count - 1) as f64;
        (0..self.count)
            .map(|i| self.start + i as f64 * step)
            .collect()
    }
}

fn parse_range(s: &str) -> Result<Range, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [start, stop, count] = parts[..] else {
        return Err("expected start:stop:count".into());
    };
    let start: f64 = start.parse().map_err(|e| format!("start: {e}"))?;
    let stop: f64 = stop.parse().map_err(|e| format!("stop: {e}"))?;
    let count: usize = count.parse().map_err(|e| format!("count: {e}"))?;
    if !(start.is_finite() && stop.is_finite()) {
        return Err("endpoints must be finite".into());
    }
    if count == 0 {
        return Err("count must be positive".into());
    }
    Ok(Range { start, stop, count })
}

/// A failure carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

fn init_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        Failure::new(
            EXIT_CONFIG,
            format!("{THREADS_ENV} must be a positive integer, got {raw:?}"),
        )
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::new(EXIT_CONFIG, e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_threads().and_then(|()| match cli.command {
        Command::Solve(common) => commands::solve(&common),
        Command::Verify { common, tables } => commands::verify(&common, tables.as_deref()),
        Command::Simulate { common, paths_out } => {
            commands::simulate(&common, paths_out.as_deref())
        }
        Command::Sweep {
            common,
            axis,
            range,
        } => commands::sweep(&common, axis, range),
    });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
