use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid graph: {0}")]
    Graph(String),

    #[error("degenerate line graph: input graph has no edges")]
    DegenerateLineGraph,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("no usable observations")]
    NoUsableObservations,

    #[error(
        "insufficient observations: {rows} usable rows for {coefficients} coefficients \
         (at least {required} required)"
    )]
    InsufficientObservations {
        rows: usize,
        coefficients: usize,
        required: usize,
    },

    #[error("rank-deficient design matrix, collinear columns: {}", .columns.join(", "))]
    RankDeficient { columns: Vec<String> },

    #[error("degenerate Phase I: centred squared forecast errors have zero spread")]
    DegeneratePhaseOne,

    #[error("chart closed: flow already signalled at step {tau}")]
    ChartClosed { tau: usize },

    #[error("data error: {0}")]
    Data(String),

    #[error("duplicate record: {timestamp} {from}->{to}")]
    DuplicateRecord {
        timestamp: String,
        from: String,
        to: String,
    },

    #[error(
        "simulation aborted: {failed} of {total} iterations failed (last error: {last_error})"
    )]
    TooManyFailures {
        failed: usize,
        total: usize,
        last_error: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numeric,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::Json(_) => ErrorKind::Config,
            Error::Graph(_)
            | Error::DimensionMismatch(_)
            | Error::Data(_)
            | Error::DuplicateRecord { .. }
            | Error::Io(_)
            | Error::Csv(_) => ErrorKind::Data,
            Error::DegenerateLineGraph
            | Error::NoUsableObservations
            | Error::InsufficientObservations { .. }
            | Error::RankDeficient { .. }
            | Error::DegeneratePhaseOne
            | Error::ChartClosed { .. }
            | Error::TooManyFailures { .. } => ErrorKind::Numeric,
        }
    }
}
