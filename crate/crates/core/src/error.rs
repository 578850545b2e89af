use std::io;

/// Errors raised by the interpolation, solver and I/O layers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("fields or masks live on different grids")]
    GridMismatch,

    #[error("sensor centred at node {center} has no support inside the mask")]
    EmptySupport { center: usize },

    #[error("snapshot set is degenerate (largest norm {norm:e})")]
    DegenerateSnapshot { norm: f64 },

    #[error("no sensor sees the residual at step {step} (|sigma(r)| = {value:e}, |r| = {norm:e})")]
    DegenerateResidual { step: usize, value: f64, norm: f64 },

    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("linear system is singular or not positive definite (pivot {pivot})")]
    SingularSystem { pivot: usize },

    #[error("dictionary exhausted: series {series} needs {needed} sensors, {available} left")]
    DictionaryExhausted {
        series: usize,
        needed: usize,
        available: usize,
    },

    #[error("greedy stopped at {built} terms, {requested} requested")]
    RankDeficient { requested: usize, built: usize },

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// Stable machine-readable tag for the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidGeometry(_) => "InvalidGeometry",
            Error::GridMismatch => "GridMismatch",
            Error::EmptySupport { .. } => "EmptySupport",
            Error::DegenerateSnapshot { .. } => "DegenerateSnapshot",
            Error::DegenerateResidual { .. } => "DegenerateResidual",
            Error::SizeMismatch { .. } => "SizeMismatch",
            Error::SingularSystem { .. } => "SingularSystem",
            Error::DictionaryExhausted { .. } => "DictionaryExhausted",
            Error::RankDeficient { .. } => "RankDeficient",
            Error::Format(_) => "Format",
            Error::Io(_) => "Io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
