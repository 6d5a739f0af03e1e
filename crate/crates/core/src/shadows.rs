//! Randomized Pauli-basis snapshots ("classical shadows") and their local
//! estimators.
//!
//! Each snapshot stores, per qubit, the measurement basis (2 bits) and the
//! readout bit. The estimator of a Pauli string `P` takes the value
//! `Π_{i: P_i ≠ I} 3·σ_i` when every non-identity factor was measured in its
//! own basis and `0` otherwise, with `σ_i = ±1` for readout `0`/`1`.

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuits::ConcreteCircuit;
use crate::error::{check_len, Error, Result};
use crate::rng;
use crate::simulator::{
    apply_readout_flips, evolve_trajectory, rotate_to_bases, run_pure, Basis, Observable,
    OutcomeSampler, Pauli, PauliNoiseSpec, PauliString, StateVector, MAX_STATEVECTOR_QUBITS,
};

/// One randomized measurement, packed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ShadowSnapshot {
    bases: u64,
    outcomes: u32,
}

impl ShadowSnapshot {
    pub fn new(bases: &[Basis], outcomes: &[u8]) -> Result<Self> {
        check_len("snapshot outcomes", bases.len(), outcomes.len())?;
        if bases.len() > MAX_STATEVECTOR_QUBITS {
            return Err(Error::guard(
                "snapshot qubit",
                bases.len() as u128,
                MAX_STATEVECTOR_QUBITS as u128,
            ));
        }
        let mut packed = 0u64;
        let mut bits = 0u32;
        for (q, (b, &o)) in bases.iter().zip(outcomes).enumerate() {
            packed |= (b.code() as u64) << (2 * q);
            if o > 1 {
                return Err(Error::invalid("outcome bits must be 0 or 1"));
            }
            bits |= (o as u32) << q;
        }
        Ok(ShadowSnapshot {
            bases: packed,
            outcomes: bits,
        })
    }

    fn from_packed(bases: u64, outcomes: u32) -> Self {
        ShadowSnapshot { bases, outcomes }
    }

    pub fn basis(&self, q: usize) -> Basis {
        Basis::from_code(((self.bases >> (2 * q)) & 3) as u8).expect("packed basis codes are valid")
    }

    pub fn outcome(&self, q: usize) -> u8 {
        ((self.outcomes >> q) & 1) as u8
    }
}

/// `T` snapshots of one prepared state.
#[derive(Clone, Debug, PartialEq)]
pub struct ShadowSet {
    num_qubits: usize,
    snapshots: Vec<ShadowSnapshot>,
}

impl ShadowSet {
    pub fn new(num_qubits: usize, snapshots: Vec<ShadowSnapshot>) -> Result<Self> {
        if snapshots.is_empty() {
            return Err(Error::invalid("a shadow set needs at least one snapshot"));
        }
        if num_qubits == 0 || num_qubits > MAX_STATEVECTOR_QUBITS {
            return Err(Error::invalid("shadow width out of range"));
        }
        Ok(ShadowSet {
            num_qubits,
            snapshots,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn snapshots(&self) -> &[ShadowSnapshot] {
        &self.snapshots
    }

    /// Snapshot records `{b, o}` with base64-packed bases and outcomes.
    pub fn to_records(&self) -> Vec<SnapshotRecord> {
        let n = self.num_qubits;
        self.snapshots
            .iter()
            .map(|s| {
                let mut b = vec![0u8; n.div_ceil(4)];
                let mut o = vec![0u8; n.div_ceil(8)];
                for q in 0..n {
                    b[q / 4] |= s.basis(q).code() << (2 * (q % 4));
                    o[q / 8] |= s.outcome(q) << (q % 8);
                }
                SnapshotRecord {
                    b: B64.encode(b),
                    o: B64.encode(o),
                }
            })
            .collect()
    }

    /// Inverse of [`ShadowSet::to_records`].
    pub fn from_records(num_qubits: usize, records: &[SnapshotRecord]) -> Result<Self> {
        let snapshots = records
            .iter()
            .map(|r| {
                let b = B64
                    .decode(&r.b)
                    .map_err(|e| Error::invalid(format!("bad basis row: {e}")))?;
                let o = B64
                    .decode(&r.o)
                    .map_err(|e| Error::invalid(format!("bad outcome row: {e}")))?;
                if b.len() != num_qubits.div_ceil(4) || o.len() != num_qubits.div_ceil(8) {
                    return Err(Error::invalid("snapshot row has the wrong width"));
                }
                let mut bases = 0u64;
                let mut outcomes = 0u32;
                for q in 0..num_qubits {
                    let code = (b[q / 4] >> (2 * (q % 4))) & 3;
                    Basis::from_code(code)?;
                    bases |= (code as u64) << (2 * q);
                    outcomes |= (((o[q / 8] >> (q % 8)) & 1) as u32) << q;
                }
                Ok(ShadowSnapshot::from_packed(bases, outcomes))
            })
            .collect::<Result<Vec<_>>>()?;
        ShadowSet::new(num_qubits, snapshots)
    }
}

/// JSONL row of one snapshot.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotRecord {
    pub b: String,
    pub o: String,
}

fn random_bases(n: usize, rng: &mut rng::Rng) -> Vec<Basis> {
    (0..n).map(|_| Basis::ALL[rng.random_range(0..3)]).collect()
}

/// Draws one snapshot from an already prepared state.
fn snapshot_of(
    sv: &StateVector,
    bases: Vec<Basis>,
    p_e: f64,
    rng: &mut rng::Rng,
) -> Result<ShadowSnapshot> {
    let n = sv.num_qubits();
    let rotated = rotate_to_bases(sv, &bases)?;
    let outcome = OutcomeSampler::new(&rotated).sample(rng);
    let flipped = apply_readout_flips(outcome, n, p_e, rng);
    let mut packed = 0u64;
    for (q, b) in bases.iter().enumerate() {
        packed |= (b.code() as u64) << (2 * q);
    }
    Ok(ShadowSnapshot::from_packed(packed, flipped as u32))
}

/// Collects `t` snapshots, each from its own noisy trajectory.
///
/// Snapshot `j` draws everything from the stream `(seed, j)`, so the result
/// does not depend on how the work is scheduled.
pub fn collect_shadows(
    c: &ConcreteCircuit,
    noise: &PauliNoiseSpec,
    t: usize,
    seed: u64,
) -> Result<ShadowSet> {
    if t == 0 {
        return Err(Error::invalid("T must be at least 1"));
    }
    noise.validate()?;
    let n = c.num_qubits;
    let ideal = if noise.has_gate_noise() {
        None
    } else {
        Some(run_pure(c)?)
    };
    let snapshots = (0..t as u64)
        .into_par_iter()
        .map(|j| {
            let mut r = rng::stream(seed, &[j]);
            let bases = random_bases(n, &mut r);
            match &ideal {
                Some(sv) => snapshot_of(sv, bases, noise.p_e, &mut r),
                None => {
                    let mut sv = StateVector::initial(c.initial_state, n)?;
                    evolve_trajectory(&mut sv, &c.gates, noise, &mut r)?;
                    snapshot_of(&sv, bases, noise.p_e, &mut r)
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    ShadowSet::new(n, snapshots)
}

/// Precomputed matching rule for one Pauli string.
#[derive(Clone, Copy, Debug)]
struct PauliMatcher {
    mask: u64,
    pattern: u64,
    support: u32,
    scale: f64,
}

impl PauliMatcher {
    fn new(p: &PauliString) -> Self {
        let mut m = PauliMatcher {
            mask: 0,
            pattern: 0,
            support: 0,
            scale: 1.0,
        };
        for (q, &f) in p.0.iter().enumerate() {
            let basis = match f {
                Pauli::I => continue,
                Pauli::X => Basis::X,
                Pauli::Y => Basis::Y,
                Pauli::Z => Basis::Z,
            };
            m.mask |= 3 << (2 * q);
            m.pattern |= (basis.code() as u64) << (2 * q);
            m.support |= 1 << q;
            m.scale *= 3.0;
        }
        m
    }

    fn value(&self, s: &ShadowSnapshot) -> f64 {
        if s.bases & self.mask != self.pattern {
            return 0.0;
        }
        if (s.outcomes & self.support).count_ones().is_multiple_of(2) {
            self.scale
        } else {
            -self.scale
        }
    }
}

/// Single-snapshot estimates of `p`, in snapshot order.
pub fn pauli_snapshot_values(s: &ShadowSet, p: &PauliString) -> Result<Vec<f64>> {
    check_len("shadow Pauli width", s.num_qubits, p.len())?;
    let m = PauliMatcher::new(p);
    Ok(s.snapshots.iter().map(|snap| m.value(snap)).collect())
}

/// Mean single-snapshot estimate of `Tr(ρ P)`.
pub fn estimate_pauli(s: &ShadowSet, p: &PauliString) -> Result<f64> {
    check_len("shadow Pauli width", s.num_qubits, p.len())?;
    let m = PauliMatcher::new(p);
    let total: f64 = s.snapshots.iter().map(|snap| m.value(snap)).sum();
    Ok(total / s.snapshots.len() as f64)
}

/// `Σ_j a_j · estimate_pauli(P_j)`, summed in term order.
pub fn estimate_observable(s: &ShadowSet, o: &Observable) -> Result<f64> {
    check_len("shadow observable width", s.num_qubits, o.num_qubits())?;
    o.terms()
        .iter()
        .try_fold(0.0, |acc, (c, p)| Ok(acc + c * estimate_pauli(s, p)?))
}
