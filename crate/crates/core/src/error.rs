use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("p must lie in the open interval (0, 1), got {0}")]
    InvalidProbability(f64),

    #[error("pq must lie in (0, 1/4], got {0}")]
    InvalidProduct(f64),

    #[error("level {level} exceeds the configured cap {cap}")]
    LevelCap { level: u32, cap: u32 },

    #[error("backward-orbit depth {depth} exceeds the configured cap {cap}")]
    DepthCap { depth: u32, cap: u32 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("z = {z} lies on the exceptional set {{1 - p, 1 + p}}")]
    Exceptional { z: f64 },

    #[error("detailed balance violated at edge ({site}, {next}): residual {residual:e}")]
    DetailedBalance {
        site: usize,
        next: usize,
        residual: f64,
    },

    #[error("matrix is not symmetric: |a[{row},{col}] - a[{col},{row}]| = {gap:e}")]
    NotSymmetric { row: usize, col: usize, gap: f64 },

    #[error("root bracket failed for {0}")]
    Bracket(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
