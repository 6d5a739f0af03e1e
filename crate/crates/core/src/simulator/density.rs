//! Exact density-matrix backend, the oracle for every stochastic path.

use num_complex::Complex64 as C64;

use super::kernels::{apply_action, apply_pauli, apply_pauli_conj, gate_action};
use super::noise::PauliNoiseSpec;
use super::pauli::{Pauli, PauliString};
use super::statevector::StateVector;
use super::{check_imag, QuantumState, MAX_DENSITY_QUBITS};
use crate::circuits::{ConcreteCircuit, ConcreteGate, InitialState};
use crate::error::{Error, Result};

/// Density matrix stored with entry `(r, c)` at index `r | (c << n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    n: usize,
    data: Vec<C64>,
}

impl DensityMatrix {
    /// `|ψ⟩⟨ψ|`.
    pub fn from_pure(sv: &StateVector) -> Result<Self> {
        let n = sv.num_qubits();
        if n > MAX_DENSITY_QUBITS {
            return Err(Error::guard(
                "density-matrix qubit",
                n as u128,
                MAX_DENSITY_QUBITS as u128,
            ));
        }
        let amps = sv.amplitudes();
        let dim = amps.len();
        let mut data = vec![C64::new(0.0, 0.0); dim * dim];
        for c in 0..dim {
            for r in 0..dim {
                data[r | (c << n)] = amps[r] * amps[c].conj();
            }
        }
        Ok(DensityMatrix { n, data })
    }

    pub fn initial(tag: InitialState, n: usize) -> Result<Self> {
        if n > MAX_DENSITY_QUBITS {
            return Err(Error::guard(
                "density-matrix qubit",
                n as u128,
                MAX_DENSITY_QUBITS as u128,
            ));
        }
        Self::from_pure(&StateVector::initial(tag, n)?)
    }

    /// Builds from a row-major `2^n × 2^n` matrix without physicality checks.
    pub fn from_matrix_unchecked(n: usize, row_major: &[C64]) -> Result<Self> {
        let dim = 1usize << n;
        if row_major.len() != dim * dim {
            return Err(Error::dim(
                "density matrix entries",
                dim * dim,
                row_major.len(),
            ));
        }
        let mut data = vec![C64::new(0.0, 0.0); dim * dim];
        for r in 0..dim {
            for c in 0..dim {
                data[r | (c << n)] = row_major[r * dim + c];
            }
        }
        Ok(DensityMatrix { n, data })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn entry(&self, r: usize, c: usize) -> C64 {
        self.data[r | (c << self.n)]
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim()).map(|i| self.entry(i, i)).sum()
    }

    /// Largest `|ρ − ρ†|` entry.
    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for r in 0..d {
            for c in 0..d {
                worst = worst.max((self.entry(r, c) - self.entry(c, r).conj()).norm());
            }
        }
        worst
    }

    /// Frobenius distance to another density matrix of equal size.
    pub fn frobenius_distance(&self, other: &DensityMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let d = self.dim();
        let m = nalgebra::DMatrix::from_fn(d, d, |r, c| {
            (self.entry(r, c) + self.entry(c, r).conj()) * 0.5
        });
        m.symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    /// `ρ ↦ U ρ U†`.
    pub fn apply_gate(&mut self, g: &ConcreteGate) {
        let action = gate_action(g.kind, g.angle.unwrap_or(0.0));
        let n = self.n;
        apply_action(&mut self.data, &action, &g.qubits);
        let cols: Vec<usize> = g.qubits.iter().map(|q| q + n).collect();
        apply_action(&mut self.data, &action.conj(), &cols);
    }

    fn conjugated_by(&self, qubits: &[usize], p: &PauliString) -> Vec<C64> {
        let mut out = self.data.clone();
        for (&q, &f) in qubits.iter().zip(&p.0) {
            apply_pauli(&mut out, q, f);
            apply_pauli_conj(&mut out, q + self.n, f);
        }
        out
    }

    /// `ρ ↦ (1 − Σp) ρ + Σ p_P · P ρ P` over strings on `qubits`.
    pub fn apply_pauli_channel(&mut self, qubits: &[usize], dist: &[(PauliString, f64)]) {
        let total: f64 = dist.iter().map(|(_, p)| p).sum();
        if total == 0.0 {
            return;
        }
        let mut acc: Vec<C64> = self.data.iter().map(|v| v * (1.0 - total)).collect();
        for (p, prob) in dist {
            if *prob == 0.0 {
                continue;
            }
            let term = self.conjugated_by(qubits, p);
            for (a, t) in acc.iter_mut().zip(term) {
                *a += t * *prob;
            }
        }
        self.data = acc;
    }

    /// Single-qubit rotation noise `N_P(p_x, p_y, p_z)` on qubit `q`.
    pub fn apply_rotation_noise(&mut self, q: usize, noise: &PauliNoiseSpec) {
        let dist: Vec<(PauliString, f64)> = noise
            .rotation_channel()
            .iter()
            .map(|&(p, prob)| (PauliString(vec![p]), prob))
            .collect();
        self.apply_pauli_channel(&[q], &dist);
    }
}

impl QuantumState for DensityMatrix {
    fn num_qubits(&self) -> usize {
        self.n
    }

    fn pauli_expectation(&self, p: &PauliString) -> Result<f64> {
        if p.len() != self.n {
            return Err(Error::dim("pauli expectation", self.n, p.len()));
        }
        // Tr(Pρ) = Σ_b phase(b) ρ(b, b ⊕ flip).
        let m = p.masks();
        let mut acc = C64::new(0.0, 0.0);
        for b in 0..self.dim() {
            let sign = if (b & m.phase).count_ones().is_multiple_of(2) {
                1.0
            } else {
                -1.0
            };
            acc += self.entry(b, b ^ m.flip) * sign;
        }
        check_imag(acc * C64::i().powu(m.n_y))
    }
}

/// Applies the noise that follows gate `g`.
pub(crate) fn gate_noise_density(
    rho: &mut DensityMatrix,
    g: &ConcreteGate,
    noise: &PauliNoiseSpec,
) -> Result<()> {
    if g.kind.is_rotation() {
        for &q in &g.qubits {
            rho.apply_rotation_noise(q, noise);
        }
    } else {
        let dist = noise.clifford_channel(g.kind.arity())?;
        rho.apply_pauli_channel(&g.qubits, &dist);
    }
    Ok(())
}

/// Exact noisy evolution: every gate is followed by its Pauli channel.
pub fn run_noisy_exact(c: &ConcreteCircuit, noise: &PauliNoiseSpec) -> Result<DensityMatrix> {
    noise.validate()?;
    let mut rho = DensityMatrix::initial(c.initial_state, c.num_qubits)?;
    for g in &c.gates {
        rho.apply_gate(g);
        gate_noise_density(&mut rho, g, noise)?;
    }
    Ok(rho)
}

/// Expectation of a readout-flipped Pauli measurement: each non-identity
/// factor is attenuated by `1 − 2 p_e`.
pub fn readout_attenuation(p: &PauliString, p_e: f64) -> f64 {
    (1.0 - 2.0 * p_e).powi(p.0.iter().filter(|&&f| f != Pauli::I).count() as i32)
}
