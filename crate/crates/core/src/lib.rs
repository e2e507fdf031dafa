//! Joint transmit, RIS and receive beamforming codesign for RIS-assisted
//! array radar.
//!
//! The RIS reflection coefficients are optimized by a Dinkelbach loop whose
//! unimodular quadratic subproblems are solved with a diagonally loaded
//! Riemannian Newton method on the complex circle manifold. Transmit and
//! receive weights have closed-form MVDR updates.
//!
//! Module map:
//! - [`scene`]: array geometry, steering vectors, channels, SINR.
//! - [`manifold`]: complex circle manifold primitives and the real embedding.
//! - [`uqp`]: the Dinkelbach quadratic subproblem and its solvers.
//! - [`codesign`]: the alternating transmit / RIS / receive loop.
//! - [`harness`]: Monte Carlo sweeps, solver comparisons, oracles and output files.

pub mod codesign;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod manifold;
pub mod scene;
pub mod uqp;

pub use error::{Error, Result};

/// Complex scalar used throughout the crate.
pub type C64 = num_complex::Complex64;
/// Dense complex column vector.
pub type CVector = nalgebra::DVector<C64>;
/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;
/// Dense real column vector.
pub type RVector = nalgebra::DVector<f64>;
/// Dense real matrix.
pub type RMatrix = nalgebra::DMatrix<f64>;

/// Power ratio to decibels, `10 log10(x)`.
pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Decibels to power ratio.
pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
