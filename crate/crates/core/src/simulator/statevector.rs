//! Noiseless statevector backend.

use num_complex::Complex64 as C64;

use super::kernels::{apply_action, apply_pauli, gate_action};
use super::pauli::{Pauli, PauliString};
use super::{check_imag, QuantumState, MAX_STATEVECTOR_QUBITS};
use crate::circuits::{ConcreteCircuit, ConcreteGate, InitialState};
use crate::error::{Error, Result};

/// Pure state of `n` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n: usize,
    amps: Vec<C64>,
}

fn guard(n: usize) -> Result<()> {
    if n > MAX_STATEVECTOR_QUBITS {
        return Err(Error::guard(
            "statevector qubit",
            n as u128,
            MAX_STATEVECTOR_QUBITS as u128,
        ));
    }
    if n == 0 {
        return Err(Error::invalid("state needs at least one qubit"));
    }
    Ok(())
}

impl StateVector {
    /// `|0…0⟩`.
    pub fn zero(n: usize) -> Result<Self> {
        guard(n)?;
        let mut amps = vec![C64::new(0.0, 0.0); 1 << n];
        amps[0] = C64::new(1.0, 0.0);
        Ok(StateVector { n, amps })
    }

    /// `|+…+⟩`.
    pub fn plus(n: usize) -> Result<Self> {
        guard(n)?;
        let a = (1.0 / (1u64 << n) as f64).sqrt();
        Ok(StateVector {
            n,
            amps: vec![C64::new(a, 0.0); 1 << n],
        })
    }

    pub fn initial(tag: InitialState, n: usize) -> Result<Self> {
        match tag {
            InitialState::AllZero => Self::zero(n),
            InitialState::AllPlus => Self::plus(n),
        }
    }

    /// Wraps normalized amplitudes (length must be a power of two).
    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        let n = amps.len().trailing_zeros() as usize;
        if amps.len() != 1 << n {
            return Err(Error::invalid("amplitude count is not a power of two"));
        }
        guard(n)?;
        let sv = StateVector { n, amps };
        if (sv.norm() - 1.0).abs() > 1e-10 {
            return Err(Error::invalid("amplitudes are not normalized"));
        }
        Ok(sv)
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn apply_gate(&mut self, g: &ConcreteGate) {
        let action = gate_action(g.kind, g.angle.unwrap_or(0.0));
        apply_action(&mut self.amps, &action, &g.qubits);
    }

    pub fn apply_pauli(&mut self, q: usize, p: Pauli) {
        apply_pauli(&mut self.amps, q, p);
    }

    /// Applies factor `i` of `p` to qubit `qubits[i]`.
    pub fn apply_pauli_string(&mut self, qubits: &[usize], p: &PauliString) {
        for (&q, &f) in qubits.iter().zip(&p.0) {
            self.apply_pauli(q, f);
        }
    }

    /// Born probabilities of computational basis states.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Inner product `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }
}

impl QuantumState for StateVector {
    fn num_qubits(&self) -> usize {
        self.n
    }

    fn pauli_expectation(&self, p: &PauliString) -> Result<f64> {
        if p.len() != self.n {
            return Err(Error::dim("pauli expectation", self.n, p.len()));
        }
        let m = p.masks();
        let mut acc = C64::new(0.0, 0.0);
        for (b, amp) in self.amps.iter().enumerate() {
            let sign = if (b & m.phase).count_ones().is_multiple_of(2) {
                1.0
            } else {
                -1.0
            };
            acc += self.amps[b ^ m.flip].conj() * amp * sign;
        }
        let value = acc * C64::i().powu(m.n_y);
        check_imag(value)
    }
}

/// Noiseless simulation `U(x)|init⟩`.
pub fn run_pure(c: &ConcreteCircuit) -> Result<StateVector> {
    let mut sv = StateVector::initial(c.initial_state, c.num_qubits)?;
    for g in &c.gates {
        sv.apply_gate(g);
    }
    Ok(sv)
}
