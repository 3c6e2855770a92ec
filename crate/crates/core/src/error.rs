use thiserror::Error;

/// Errors produced by the forecasting library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("aircraft weight must be a positive tonnage, got {0}")]
    InvalidMtow(f64),

    #[error("zone {zone} has no unit rate for period {period}")]
    MissingUnitRate { zone: String, period: String },

    #[error("distance profile references unknown zone {0}")]
    UnknownZone(String),

    #[error("invalid AIRAC identifier {0:?}")]
    InvalidAirac(String),

    #[error("flight {flight_id}: {message}")]
    InvalidFlight { flight_id: String, message: String },

    #[error("{path}:{line}: {message}")]
    FileFormat {
        path: String,
        line: usize,
        message: String,
    },

    #[error("split ratio must lie strictly between 0 and 1, got {0}")]
    InvalidSplitRatio(f64),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("silhouette undefined for fewer than two clusters")]
    SilhouetteUndefined,

    #[error("cluster {0} has no member flights")]
    EmptyCluster(usize),

    #[error("vector length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid synthetic spec: {0}")]
    InvalidSynthSpec(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error on {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("csv error on {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub(crate) fn json(path: &std::path::Path, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.display().to_string(),
            source,
        }
    }

    pub(crate) fn csv(path: &std::path::Path, source: csv::Error) -> Self {
        Error::Csv {
            path: path.display().to_string(),
            source,
        }
    }
}
