//! Exact-arithmetic toolkit for spectral measures on the p-adic numbers.
//!
//! Everything is computed at finite truncation depth with exact rational and
//! cyclotomic arithmetic: homogeneous trees and their Hadamard duals,
//! truncated singular measures and their spectra, vanishing character sums,
//! zero-sphere classification, the spectral functional equation, dimension
//! estimators, and an exhaustive tiling/spectrality laboratory for Z/p^g Z.

pub mod cyclotomic;
pub mod dimensions;
pub mod distributions;
pub mod error;
pub mod fuglede;
pub mod measures;
pub mod padic;
pub mod spectra;
pub mod trees;

pub use error::{Error, Result};
