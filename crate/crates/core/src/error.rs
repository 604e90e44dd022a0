use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can report.
///
/// [`Error::code`] gives a stable, module-qualified identifier used by the
/// command-line front end.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid rank k={k} for dimension p={p}")]
    InvalidRank { k: usize, p: usize },
    #[error("matrix is rank deficient: {0}")]
    RankDeficient(String),
    #[error("covariance has non-positive trace ({0})")]
    ZeroTrace(f64),
    #[error("domain weights sum to {0}, expected 1")]
    InvalidWeights(f64),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("row {row} has no observed entries")]
    NoObservations { row: usize },
    #[error("column {column} is never observed")]
    UnidentifiableColumn { column: usize },
    #[error("loss kind {0} is not valid here")]
    InvalidKind(String),
    #[error("baseline loss is zero; relative deltas are undefined")]
    DegenerateBaseline,
    #[error("schema error: {0}")]
    Schema(String),
    #[error("no usable data: {0}")]
    EmptyData(String),
    #[error("column '{0}' has zero pooled variance")]
    ConstantColumn(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "linalg.invalid_input",
            Error::InvalidRank { .. } => "linalg.invalid_rank",
            Error::RankDeficient(_) => "linalg.rank_deficient",
            Error::ZeroTrace(_) => "losses.zero_trace",
            Error::InvalidWeights(_) => "losses.invalid_weights",
            Error::NumericalFailure(_) => "solvers.numerical_failure",
            Error::NoObservations { .. } => "completion.no_observations",
            Error::UnidentifiableColumn { .. } => "completion.unidentifiable_column",
            Error::InvalidKind(_) => "evaluation.invalid_kind",
            Error::DegenerateBaseline => "evaluation.degenerate_baseline",
            Error::Schema(_) => "io.schema_error",
            Error::EmptyData(_) => "io.empty_data",
            Error::ConstantColumn(_) => "io.constant_column",
            Error::InvalidConfig(_) => "cli.invalid_config",
            Error::Io { .. } => "io.io_error",
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
