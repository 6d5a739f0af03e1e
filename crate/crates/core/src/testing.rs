//! Random circuit generators used by property tests and acceptance runs.

use rand::Rng as _;
use std::f64::consts::PI;

use crate::circuits::{
    AngleSource, ConcreteCircuit, ConcreteGate, GateKind, GateOp, InitialState, ParamCircuit,
};
use crate::rng;

const CLIFFORDS: [GateKind; 6] = [
    GateKind::H,
    GateKind::S,
    GateKind::Sdg,
    GateKind::X,
    GateKind::Cnot,
    GateKind::Cz,
];

const ROTATIONS: [GateKind; 5] = [
    GateKind::Rz,
    GateKind::Rx,
    GateKind::Ry,
    GateKind::Rzz,
    GateKind::Crz,
];

fn pick_qubits(n: usize, arity: usize, r: &mut rng::Rng) -> Vec<usize> {
    let a = r.random_range(0..n);
    if arity == 1 {
        return vec![a];
    }
    let mut b = r.random_range(0..n);
    while b == a {
        b = r.random_range(0..n);
    }
    vec![a, b]
}

/// Random concrete circuit of `len` gates drawn from every gate kind.
pub fn random_concrete_circuit(n: usize, len: usize, seed: u64) -> ConcreteCircuit {
    let mut r = rng::stream(seed, &[0x0C]);
    let kinds: Vec<GateKind> = CLIFFORDS.iter().chain(&ROTATIONS).copied().collect();
    let mut gates = Vec::with_capacity(len);
    while gates.len() < len {
        let kind = kinds[r.random_range(0..kinds.len())];
        if kind.arity() > n {
            continue;
        }
        let qubits = pick_qubits(n, kind.arity(), &mut r);
        let angle = kind.is_rotation().then(|| r.random_range(-PI..PI));
        gates.push(ConcreteGate {
            kind,
            qubits,
            angle,
        });
    }
    ConcreteCircuit::new(n, gates, InitialState::AllZero).expect("generated gates are valid")
}

/// Random parametric circuit with `d` slots, each read by exactly one
/// Pauli rotation (`RX`, `RY`, `RZ` or `RZZ`, identity angle map), with
/// `cliffords_per_slot` random Clifford gates interleaved before each.
///
/// Every expectation value of such a circuit is a polynomial of degree at
/// most one in each `cos x_l`, `sin x_l`.
pub fn random_pauli_rotation_circuit(
    n: usize,
    d: usize,
    cliffords_per_slot: usize,
    seed: u64,
) -> ParamCircuit {
    let mut r = rng::stream(seed, &[0x0D]);
    let rot: &[GateKind] = if n >= 2 {
        &[GateKind::Rx, GateKind::Ry, GateKind::Rz, GateKind::Rzz]
    } else {
        &[GateKind::Rx, GateKind::Ry, GateKind::Rz]
    };
    let cliff: Vec<GateKind> = CLIFFORDS
        .iter()
        .copied()
        .filter(|k| k.arity() <= n)
        .collect();
    let mut gates = Vec::new();
    for slot in 0..d {
        for _ in 0..cliffords_per_slot {
            let kind = cliff[r.random_range(0..cliff.len())];
            gates.push(GateOp::clifford(
                kind,
                &pick_qubits(n, kind.arity(), &mut r),
            ));
        }
        let kind = rot[r.random_range(0..rot.len())];
        gates.push(GateOp::rotation(
            kind,
            &pick_qubits(n, kind.arity(), &mut r),
            AngleSource::slot(slot),
        ));
    }
    let kind = cliff[r.random_range(0..cliff.len())];
    gates.push(GateOp::clifford(
        kind,
        &pick_qubits(n, kind.arity(), &mut r),
    ));
    ParamCircuit::new(n, gates, d, InitialState::AllZero).expect("generated gates are valid")
}
