//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by the library. Variants are shared across modules so
/// pipelines can bubble a single type.
#[derive(Debug, Error)]
pub enum Error {
    /// Two row-aligned inputs disagree on the number of samples.
    #[error("sample counts differ: {left} vs {right}")]
    SampleCountMismatch { left: usize, right: usize },

    /// Matrix shapes are incompatible with the requested operation.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A matrix expected to be symmetric is not, beyond tolerance.
    #[error("matrix not symmetric: max |S - S^T| = {max_asym:.3e} exceeds {tol:.3e}")]
    NotSymmetric { max_asym: f64, tol: f64 },

    /// A matrix is numerically zero where a positive spectrum is required.
    #[error("matrix is numerically zero")]
    ZeroMatrix,

    /// Too few samples for the requested fit.
    #[error("need at least {required} samples, got {actual}")]
    InsufficientSamples { required: usize, actual: usize },

    /// A neighborhood query produced no indices.
    #[error("neighborhood is empty")]
    EmptyNeighborhood,

    /// An anchored metric was requested with no anchors.
    #[error("anchor list is empty")]
    EmptyAnchors,

    /// Time-window neighborhoods are only defined at sample indices.
    #[error("time-window neighborhoods are undefined at off-sample query points")]
    TimeWindowAtMidpoint,

    /// A metric entry was negative beyond the clamping floor.
    #[error("metric entry {value:.3e} is negative beyond the -1e-9 floor")]
    NegativeMetricEntry { value: f64 },

    /// All pairwise distances are zero; no kernel bandwidth exists.
    #[error("metric is degenerate: median pairwise distance is zero")]
    DegenerateMetric,

    /// A kernel row has no mass; normalization is impossible.
    #[error("kernel is degenerate: row {row} has non-positive mass")]
    DegenerateKernel { row: usize },

    /// More embedding coordinates were requested than the data supports.
    #[error("requested {requested} embedding coordinates but only {available} are available")]
    TooManyComponents { requested: usize, available: usize },

    /// A tensor is numerically zero; no rank-1 structure exists.
    #[error("tensor is numerically zero")]
    ZeroTensor,

    /// Input data contains NaN or infinite entries.
    #[error("data contains non-finite values")]
    NonFiniteData,

    /// An input collection is empty where at least one element is required.
    #[error("empty input: {0}")]
    EmptyInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
