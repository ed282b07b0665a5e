mod args;
mod commands;
mod model;

use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use saltlib::Error;

use args::{Cli, Command};

/// Failure of a CLI invocation, mapped to a process exit code.
#[derive(Debug)]
pub enum CliError {
    Core(Error),
    Usage(String),
    Io(String),
    /// An oracle comparison failed; the report was already written.
    OracleFailed,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) => match e {
                Error::ZenoSuspected { .. } => 2,
                Error::AmbiguousEvent { .. } => 3,
                Error::TangentialEvent { .. } => 4,
                Error::Schema { .. } | Error::InvalidSystem(_) => 5,
                Error::NonFiniteState { .. } => 7,
                Error::DegenerateGuard { .. } => 8,
                Error::NotPeriodic { .. } => 9,
                Error::SplitDistribution { .. } => 10,
                Error::InvalidParameter(_) | Error::DimensionMismatch { .. } => 64,
                _ => 11,
            },
            CliError::OracleFailed => 6,
            CliError::Io(_) => 12,
            CliError::Usage(_) => 64,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::OracleFailed => write!(f, "oracle check failed"),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Write `content` to `path` through a temporary file in the same directory,
/// or to stdout when no path is given.
pub fn write_output(path: Option<&Path>, content: &str) -> CliResult<()> {
    let io = |p: &Path, e: std::io::Error| CliError::Io(format!("{}: {e}", p.display()));
    match path {
        None => {
            let mut out = std::io::stdout().lock();
            match out.write_all(content.as_bytes()).and_then(|_| out.flush()) {
                // A closed pipe means the reader has all it wants.
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                    Err(CliError::Io(format!("stdout: {e}")))
                }
                _ => Ok(()),
            }
        }
        Some(p) => {
            let dir = p.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
            let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io(p, e))?;
            tmp.write_all(content.as_bytes()).map_err(|e| io(p, e))?;
            tmp.persist(p).map_err(|e| io(p, e.error))?;
            Ok(())
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot configure thread pool: {e}")))?;
    }
    match cli.command {
        Command::Simulate(a) => commands::simulate_cmd(a),
        Command::Saltation(a) => commands::saltation(a),
        Command::Monodromy(a) => commands::monodromy_cmd(a),
        Command::Covariance(a) => commands::covariance(a),
        Command::Lqr(a) => commands::lqr(a),
        Command::Verify(a) => commands::verify(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 64 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
