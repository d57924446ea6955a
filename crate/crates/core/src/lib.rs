//! Distribution system state estimation with conditional multivariate complex
//! Gaussian distributions.
//!
//! The crate is `no_std` and only needs `alloc`. It covers the radial network
//! model and direct load flow, correlation and covariance assembly for
//! complex loads, the conditioning step, a single-pass estimator and a
//! weighted least squares baseline.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

use nalgebra::{DMatrix, DVector};

pub type Complex64 = num_complex::Complex<f64>;
pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

mod error;

pub mod cmcgd;
pub mod complexstats;
pub mod estimator;
pub mod linalg;
pub mod netmodel;
pub mod wls;

pub use error::{DsseError, Result};
