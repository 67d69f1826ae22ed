//! Library surface of the `egoe` command-line tool, exported so the
//! integration and acceptance suites can drive the same code the binary
//! runs.

pub mod commands;
pub mod config;
pub mod output;

/// Top-level failure classes mapped onto exit codes: usage errors exit 1,
/// numerical failures (too many failed members) exit 2.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numerical(String),
    Io(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "io error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Io(_) => 1,
        }
    }
}
