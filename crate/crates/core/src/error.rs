use std::path::PathBuf;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{what}: {divisor} does not divide {value}")]
    Divisibility {
        what: &'static str,
        divisor: usize,
        value: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: String,
        found: String,
    },

    #[error("design matrix needs {required} bytes, above the configured cap of {cap} bytes")]
    MemoryCap { required: usize, cap: usize },

    #[error("{0} has zero norm; ratio is undefined")]
    ZeroNorm(&'static str),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("step {step}, head {head}: {source}")]
    Simulation {
        step: u32,
        head: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn mismatch(what: &'static str, expected: impl ToString, found: impl ToString) -> Self {
        Error::DimensionMismatch {
            what,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by non-finite values or failed factorizations.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Numerical(_) | Error::ZeroNorm(_) => true,
            Error::Simulation { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
