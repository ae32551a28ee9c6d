use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },

    #[error("{}:{line}:{column}: {message}", path.display())]
    Syntax { path: PathBuf, line: usize, column: usize, message: String },

    #[error("{}:{line}:{column}: {source}", path.display())]
    Expression { path: PathBuf, line: usize, column: usize, source: herglotz::Error },

    #[error("{}: missing [{section}] section", path.display())]
    MissingSection { path: PathBuf, section: &'static str },

    #[error("{}: expected {expected} columns for this problem, found {found}", path.display())]
    ColumnMismatch { path: PathBuf, expected: usize, found: usize },

    #[error("{}:{line}: {message}", path.display())]
    Csv { path: PathBuf, line: usize, message: String },

    #[error("{0}")]
    Input(herglotz::Error),

    #[error("{0}")]
    Numerical(herglotz::Error),
}

impl CliError {
    /// 1 for bad input, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical(_) => 2,
            _ => 1,
        }
    }
}

/// Sorts a core error raised while solving or verifying into input or numerical.
pub fn classify(err: herglotz::Error) -> CliError {
    use herglotz::Error as E;
    match err {
        E::NoConvergence(_) | E::NonFiniteState { .. } | E::Domain(_) => CliError::Numerical(err),
        _ => CliError::Input(err),
    }
}
