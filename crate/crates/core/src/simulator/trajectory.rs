//! Monte Carlo Pauli-trajectory backend.

use rand::Rng as _;

use super::noise::PauliNoiseSpec;
use super::pauli::Pauli;
use super::statevector::StateVector;
use crate::circuits::{ConcreteCircuit, ConcreteGate};
use crate::error::Result;
use crate::rng::{self, Rng};

/// Samples and applies the error that follows gate `g`.
pub(crate) fn insert_gate_error(
    sv: &mut StateVector,
    g: &ConcreteGate,
    noise: &PauliNoiseSpec,
    rng: &mut Rng,
) -> Result<()> {
    if g.kind.is_rotation() {
        let total = noise.p_x + noise.p_y + noise.p_z;
        if total == 0.0 {
            return Ok(());
        }
        for &q in &g.qubits {
            let u: f64 = rng.random();
            let p = if u < noise.p_x {
                Pauli::X
            } else if u < noise.p_x + noise.p_y {
                Pauli::Y
            } else if u < total {
                Pauli::Z
            } else {
                Pauli::I
            };
            sv.apply_pauli(q, p);
        }
    } else {
        let dist = noise.clifford_channel(g.kind.arity())?;
        if dist.iter().all(|(_, p)| *p == 0.0) {
            return Ok(());
        }
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (p, prob) in &dist {
            acc += prob;
            if u < acc {
                sv.apply_pauli_string(&g.qubits, p);
                break;
            }
        }
    }
    Ok(())
}

/// Applies `gates` with sampled errors, drawing from `rng`.
pub fn evolve_trajectory(
    sv: &mut StateVector,
    gates: &[ConcreteGate],
    noise: &PauliNoiseSpec,
    rng: &mut Rng,
) -> Result<()> {
    for g in gates {
        sv.apply_gate(g);
        insert_gate_error(sv, g, noise, rng)?;
    }
    Ok(())
}

/// One trajectory of the noisy circuit, seeded by `seed`.
pub fn run_noisy_trajectory(
    c: &ConcreteCircuit,
    noise: &PauliNoiseSpec,
    seed: u64,
) -> Result<StateVector> {
    noise.validate()?;
    let mut rng = rng::stream(seed, &[]);
    let mut sv = StateVector::initial(c.initial_state, c.num_qubits)?;
    evolve_trajectory(&mut sv, &c.gates, noise, &mut rng)?;
    Ok(sv)
}
