//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by panel ingestion, estimation, and measure computation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },

    /// A cell failed to parse or is missing. `row` is the 1-based file line
    /// (header is line 1), `column` the header name.
    #[error("unparseable or missing cell at row {row}, column '{column}': {detail}")]
    BadCell {
        row: usize,
        column: String,
        detail: String,
    },

    #[error("invalid panel: {0}")]
    InvalidPanel(String),

    #[error("window out of range: start {start} + length {length} exceeds panel length {len}")]
    WindowOutOfRange {
        start: usize,
        length: usize,
        len: usize,
    },

    #[error("not enough observations: need T - p > n*p + intercept, got T={t}, n={n}, p={p}")]
    NotEnoughData { t: usize, n: usize, p: usize },

    #[error(
        "singular regressor cross-product (condition estimate {condition:.3e}); \
         consider a ridge term"
    )]
    SingularDesign { condition: f64 },

    #[error("degenerate residual variance: sigma[{index},{index}] = {value}")]
    DegenerateVariance { index: usize, value: f64 },

    #[error("frequency band ({lower}, {upper}] contains no grid point at H={grid}; increase the horizon")]
    EmptyBand { lower: f64, upper: f64, grid: usize },

    #[error("invalid frequency band: {0}")]
    InvalidBand(String),

    #[error("bands do not form a partition of (0, pi]: {0}")]
    InvalidPartition(String),

    #[error("model is nonstationary (spectral radius {radius:.6}); {context}")]
    Unstable { radius: f64, context: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("bootstrap exhausted the redraw budget ({attempts} attempts for replication {replication})")]
    BootstrapExhausted { replication: usize, attempts: usize },

    #[error("simulation redraw budget exhausted for cell {cell} after {attempts} attempts")]
    SimulationExhausted { cell: usize, attempts: usize },
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Whether this error reflects bad inputs/configuration rather than a
    /// numerical failure during computation. CLI layers map the former to a
    /// usage exit code and the latter to a numerical-failure code.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Csv { .. }
                | Error::BadCell { .. }
                | Error::InvalidPanel(_)
                | Error::WindowOutOfRange { .. }
                | Error::NotEnoughData { .. }
                | Error::EmptyBand { .. }
                | Error::InvalidBand(_)
                | Error::InvalidPartition(_)
                | Error::InvalidConfig(_)
        )
    }
}
