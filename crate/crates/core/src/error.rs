use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid time binning: {0}")]
    InvalidBinning(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("covariate `{0}` has zero variance and cannot be standardized")]
    DegenerateCovariate(String),

    #[error("lag window needs {needed} bins of history but only {available} bins exist")]
    InsufficientHistory { needed: usize, available: usize },

    #[error("rasters do not share the same grid and binning")]
    RasterMismatch,

    #[error("panel is empty")]
    EmptyPanel,

    #[error("panel is missing the `{0}` column required by this model variant")]
    MissingColumn(&'static str),

    #[error("gradient length {got} does not match parameter length {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("non-finite gradient entry at index {0}")]
    NonFiniteGradient(usize),

    #[error("non-finite loss at iteration {iteration}")]
    NonFiniteLoss { iteration: usize },

    #[error("feature `{0}` is constant and cannot be smoothed")]
    DegenerateFeature(String),

    #[error("unknown feature `{0}`")]
    UnknownFeature(String),

    #[error("linear algebra failure: {0}")]
    Numerical(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
