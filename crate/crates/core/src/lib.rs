//! Constrained adaptive sensing with Fourier measurements.
//!
//! Measurement vectors are drawn from a fixed ensemble (the rows of the
//! unitary DFT) to recover signals that are sparse in the Haar wavelet basis
//! or in the canonical basis. The crate provides:
//!
//! - exact DFT and Haar operators ([`transforms`]),
//! - sparse test-signal generators ([`signals`]),
//! - CoSaMP, basis-pursuit denoising and support least squares ([`recovery`]),
//! - the continuous A-optimal design relaxation and its discrete sampler ([`design`]),
//! - nonadaptive, two-stage adaptive and oracle sensing strategies ([`sensing`]),
//! - closed-form 1-sparse Fourier/Haar coherence analysis ([`analysis`]),
//! - a seeded multi-trial experiment harness ([`harness`]).

pub mod analysis;
pub mod design;
mod error;
pub mod harness;
pub mod linalg;
pub mod recovery;
pub mod sensing;
pub mod signals;
pub mod transforms;

pub use error::{Error, Result};
pub use num_complex::Complex64;
