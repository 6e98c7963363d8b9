use thiserror::Error;

pub type Result<T> = std::result::Result<T, BenchError>;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Core(#[from] slabnop::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    Config(String),
}

impl BenchError {
    /// Process exit code: 1 for bad input, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        use slabnop::Error as E;
        match self {
            BenchError::Core(
                E::Degenerate(_)
                | E::Numerical(_)
                | E::NonFiniteLoss { .. }
                | E::InvalidSample { .. }
                | E::SampleNotConverged { .. },
            ) => EXIT_NUMERICAL,
            _ => EXIT_USAGE,
        }
    }
}

pub(crate) fn config_err(msg: impl Into<String>) -> BenchError {
    BenchError::Config(msg.into())
}
