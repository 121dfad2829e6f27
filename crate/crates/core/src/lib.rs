//! Numerical toolkit for classical-quantum states: sandwiched Rényi
//! divergences, pinching-based hypothesis tests, achievable-rate formulas for
//! channels with state and an eavesdropper, and Monte Carlo checks of random
//! superposition codebooks.
//!
//! All logarithms are base 2.

pub mod codebook;
pub mod cq;
pub mod divergence;
pub mod error;
pub mod exponents;
pub mod hyptest;
pub mod pinching;
pub mod qmat;
pub mod random;
pub mod rates;

pub use error::{Error, Result};
