//! Pseudospectral cubic NLS on the two-dimensional torus, together with an
//! I-method laboratory: the smoothing multiplier, exact multilinear lattice
//! sums, the resonance-corrected modified energy and sweep experiments.

pub mod error;
pub mod experiments;
pub mod fft;
pub mod grid;
pub mod io;
pub mod multilinear;
pub mod multiplier;
pub mod solver;
pub mod summation;
pub mod symbols;

pub use error::{Error, Result};
pub use grid::{Field, Freq, Grid2D, Mode, ModeWindow, Spectrum};
pub use multiplier::{IMethodParams, Sign};
