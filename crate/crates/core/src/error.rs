use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid mismatch between operands")]
    GridMismatch,

    #[error("spectrum is not dealiased: nonzero coefficient at k = ({0}, {1})")]
    NotDealiased(i32, i32),

    #[error("symbol arity mismatch: expected {expected}, got {got}")]
    Arity { expected: usize, got: usize },

    #[error("symbol is not separable")]
    NotSeparable,

    #[error("symbol is not G4-symmetric (max deviation {0:e})")]
    NotSymmetric(f64),

    #[error("non-finite coefficient after step {step} (t = {time}); possible blowup")]
    Blowup { step: usize, time: f64 },

    #[error("quadrature unresolved: refinement changed the value by {0:.3}%")]
    Quadrature(f64),

    #[error("degenerate data recipe: {0}")]
    DegenerateRecipe(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("report error: {0}")]
    Report(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
