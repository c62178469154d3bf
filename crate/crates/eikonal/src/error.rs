//! Configuration errors shared by problem construction and the solvers.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    /// The centered point source needs an odd `n` so the 8 gridpoints nearest
    /// the cube center are symmetric about it.
    #[error("grid side count n must be odd for the centered source, got n = {0}")]
    EvenGridSide(usize),

    #[error("grid side count n must be at least 2, got n = {0}")]
    GridTooSmall(usize),

    #[error("unknown problem key `{0}` (expected constant | sine20 | sine2 | checkerboard | shellmaze)")]
    UnknownProblem(String),

    #[error("checker count must be at least 1, got {0}")]
    InvalidCheckerCount(usize),

    #[error("exit set is empty")]
    NoExits,

    #[error("exit gridpoint index {index} out of range for {total} gridpoints")]
    ExitOutOfRange { index: usize, total: usize },

    #[error("speed must be positive everywhere; F = {speed} at gridpoint {index}")]
    NonPositiveSpeed { index: usize, speed: f64 },

    #[error("cell width r = {r} must be at least 1 and divide the per-side gridpoint count n+1 = {side}")]
    CellWidthMismatch { r: usize, side: usize },

    #[error("worker count P must be at least 1")]
    NoWorkers,

    #[error("kappa must be finite and non-negative, got {0}")]
    InvalidKappa(f64),
}
