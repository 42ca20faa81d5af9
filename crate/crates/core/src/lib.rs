//! Hybrid analog/digital MIMO transceiver design.
//!
//! The crate is organised bottom-up:
//!
//! - [`matdecomp`]: ordered SVD, geometric mean decomposition, Cholesky,
//!   water-filling, majorization predicates and the phase projection.
//! - [`channel`]: clustered mmWave ULA and Rayleigh channel generators,
//!   noise covariance models and the channel CSV dump format.
//! - [`transceiver`]: MSE/SNR matrices, the LMMSE digital processor, the
//!   optimal feedback matrix, optimal rotations and the digital precoder.
//! - [`analog`]: constant-modulus analog precoder/processor designs and
//!   phase quantization.
//! - [`baselines`]: full-digital, OMP and direct phase projection designs.
//! - [`sim`]: Monte-Carlo spectral efficiency and BER sweeps.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analog;
pub mod baselines;
pub mod channel;
mod error;
pub mod linalg;
pub mod matdecomp;
pub mod sim;
pub mod transceiver;

pub use error::{Error, Result};

pub use num_complex::Complex64;

/// Dense complex matrix used throughout the crate.
pub type CMat = nalgebra::DMatrix<Complex64>;
/// Dense complex column vector.
pub type CVec = nalgebra::DVector<Complex64>;
/// Dense real matrix.
pub type RMat = nalgebra::DMatrix<f64>;
