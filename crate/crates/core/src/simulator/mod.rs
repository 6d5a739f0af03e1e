//! Quantum circuit backends.
//!
//! * [`run_pure`]: noiseless statevector evolution.
//! * [`run_noisy_exact`]: density-matrix evolution with every gate followed
//!   by its Pauli channel; small systems only, used as the reference.
//! * [`run_noisy_trajectory`]: one Monte Carlo sample of the same channel
//!   composition on a statevector.

mod density;
pub mod kernels;
mod measure;
mod noise;
mod pauli;
mod spectrum;
mod statevector;
mod trajectory;

pub(crate) use density::gate_noise_density;
pub use density::{readout_attenuation, run_noisy_exact, DensityMatrix};
pub use measure::{
    apply_readout_flips, bits_of, rotate_to_bases, sample_measurement, Basis, OutcomeSampler,
};
pub use noise::{PauliDistribution, PauliNoiseSpec};
pub use pauli::{Observable, Pauli, PauliMasks, PauliString};
pub use spectrum::{dense_matrix, exact_spectrum};
pub use statevector::{run_pure, StateVector};
pub use trajectory::{evolve_trajectory, run_noisy_trajectory};

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Largest register the statevector and trajectory backends accept.
pub const MAX_STATEVECTOR_QUBITS: usize = 24;
/// Largest register the density-matrix backend accepts.
pub const MAX_DENSITY_QUBITS: usize = 8;
/// Largest register accepted for dense diagonalization.
pub const MAX_SPECTRUM_QUBITS: usize = 12;

const IMAG_TOLERANCE: f64 = 1e-9;

/// A state that can report Pauli expectation values.
pub trait QuantumState {
    fn num_qubits(&self) -> usize;
    fn pauli_expectation(&self, p: &PauliString) -> Result<f64>;
}

pub(crate) fn check_imag(v: C64) -> Result<f64> {
    if v.im.abs() > IMAG_TOLERANCE {
        return Err(Error::Numerical(format!(
            "expectation has imaginary residue {:.3e}",
            v.im
        )));
    }
    Ok(v.re)
}

/// `Σ_j a_j ⟨P_j⟩` for either backend state.
pub fn expectation<S: QuantumState + ?Sized>(state: &S, o: &Observable) -> Result<f64> {
    if o.num_qubits() != state.num_qubits() {
        return Err(Error::dim(
            "observable width",
            state.num_qubits(),
            o.num_qubits(),
        ));
    }
    o.terms()
        .iter()
        .try_fold(0.0, |acc, (c, p)| Ok(acc + c * state.pauli_expectation(p)?))
}

#[cfg(test)]
mod tests;
