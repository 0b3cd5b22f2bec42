//! Affine filter bank modulation (AFBM) waveform lab.
//!
//! The crate is organised bottom-up:
//!
//! * [`transforms`]: DFT, chirp, DAFT and zero-padded synthesis operators,
//!   both as dense matrices and as FFT-backed fast paths.
//! * [`filterbank`]: prototype filters, the block-Toeplitz synthesis filter
//!   and the compensation vector that restores complex orthogonality.
//! * [`modem`]: constellation mapping, grid placement, the AFBM
//!   transmitter/receiver and an AFDM baseline.
//! * [`channel`]: doubly-dispersive channel construction, chirp parameter
//!   selection, effective channels and MMSE equalization.
//! * [`metrics`]: PAPR, Welch PSD / out-of-band emission, orthogonality SIR
//!   and BER Monte Carlo.

// `!(x > tol)` deliberately rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod csv;
mod error;
pub mod filterbank;
pub mod metrics;
pub mod modem;
pub mod rng;
pub mod transforms;

pub use error::{Error, Result};
pub use num_complex::Complex64;
