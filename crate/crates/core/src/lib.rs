//! Classical predictive surrogates for noisy parametric quantum circuits.
//!
//! The crate is organised bottom-up:
//!
//! * [`circuits`]: gate-level IR with shared, affinely mapped parameter slots,
//!   plus the two application circuit builders.
//! * [`simulator`]: statevector, exact density-matrix and Pauli-trajectory
//!   backends, measurement sampling, observables and dense spectra.
//! * [`shadows`]: randomized Pauli-basis snapshots and local estimators.
//! * [`features`]: trigonometric monomials, frequency sets, the truncated
//!   kernel and the exact coefficient-extraction oracle.
//! * [`surrogate_cs`]: the kernel-mean predictor over shadow-labelled data.
//! * [`surrogate_qs`]: ridge regression over truncated trigonometric features.
//! * [`vqe`] and [`fspt`]: the two downstream workflows.
//! * [`metrics`] and [`harness`]: evaluation, persistence and the CLI tasks.

pub mod backend;
pub mod circuits;
pub mod digest;
pub mod error;
pub mod features;
pub mod fspt;
pub mod harness;
pub mod metrics;
pub mod rng;
pub mod shadows;
pub mod simulator;
pub mod surrogate_cs;
pub mod surrogate_qs;
pub mod testing;
pub mod vqe;

pub use error::{Error, Result};
