use thiserror::Error;

/// Errors raised by the sampling, fitting and bookkeeping routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("domain estimate is empty")]
    EmptyEstimate,

    #[error("hyperbolic cross exceeds the capacity bound of {limit} indices")]
    CapacityExceeded { limit: usize },

    #[error("rank deficient: |R[{column},{column}]| = {value:e} is below {threshold:e}")]
    RankDeficient {
        column: usize,
        value: f64,
        threshold: f64,
    },

    #[error("reciprocal Christoffel function vanishes at active position {position}")]
    ZeroChristoffel { position: usize },

    #[error("unknown test function id {0}")]
    UnknownFunction(u32),

    #[error("sample at grid index {0} lies outside the domain estimate")]
    SampleOutsideEstimate(usize),

    #[error("underdetermined least-squares system: {rows} rows for {cols} unknowns")]
    Underdetermined { rows: usize, cols: usize },

    #[error("{limit} consecutive draws were rejected")]
    RedrawLimit { limit: u64 },

    #[error("reference function has zero norm")]
    ZeroNorm,

    #[error("true discrete domain is empty")]
    EmptyTrueDomain,

    #[error("level {level}: {source}")]
    AtLevel {
        level: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn at_level(self, level: usize) -> Self {
        match self {
            already @ Error::AtLevel { .. } => already,
            other => Error::AtLevel {
                level,
                source: Box::new(other),
            },
        }
    }

    /// The innermost error, with any level context stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtLevel { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
