//! Measurement sampling in local Pauli bases.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::kernels::{apply_1q, gate_action, GateAction};
use super::statevector::StateVector;
use crate::circuits::GateKind;
use crate::error::{check_len, Error, Result};
use crate::rng::{self, Rng};

/// Local measurement basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    X,
    Y,
    Z,
}

impl Basis {
    pub const ALL: [Basis; 3] = [Basis::X, Basis::Y, Basis::Z];

    pub fn code(self) -> u8 {
        match self {
            Basis::X => 0,
            Basis::Y => 1,
            Basis::Z => 2,
        }
    }

    pub fn from_code(c: u8) -> Result<Basis> {
        match c {
            0 => Ok(Basis::X),
            1 => Ok(Basis::Y),
            2 => Ok(Basis::Z),
            _ => Err(Error::invalid(format!("invalid basis code {c}"))),
        }
    }
}

fn single(kind: GateKind) -> [[num_complex::Complex64; 2]; 2] {
    match gate_action(kind, 0.0) {
        GateAction::Single(m) => m,
        _ => unreachable!("single-qubit Clifford"),
    }
}

/// Copy of `sv` rotated so that a Z-basis readout measures `bases`.
pub fn rotate_to_bases(sv: &StateVector, bases: &[Basis]) -> Result<StateVector> {
    check_len("measurement bases", sv.num_qubits(), bases.len())?;
    let mut amps = sv.amplitudes().to_vec();
    let h = single(GateKind::H);
    let sdg = single(GateKind::Sdg);
    for (q, b) in bases.iter().enumerate() {
        match b {
            Basis::Z => {}
            Basis::X => apply_1q(&mut amps, q, &h),
            Basis::Y => {
                apply_1q(&mut amps, q, &sdg);
                apply_1q(&mut amps, q, &h);
            }
        }
    }
    StateVector::from_amplitudes(amps)
}

/// Cumulative distribution of computational outcomes.
pub struct OutcomeSampler {
    cdf: Vec<f64>,
}

impl OutcomeSampler {
    pub fn new(sv: &StateVector) -> Self {
        let mut acc = 0.0;
        let cdf = sv
            .amplitudes()
            .iter()
            .map(|a| {
                acc += a.norm_sqr();
                acc
            })
            .collect();
        OutcomeSampler { cdf }
    }

    /// Draws one basis-state index.
    pub fn sample(&self, rng: &mut Rng) -> usize {
        let total = *self.cdf.last().unwrap_or(&1.0);
        let u: f64 = rng.random::<f64>() * total;
        self.cdf
            .partition_point(|&c| c <= u)
            .min(self.cdf.len() - 1)
    }
}

/// Flips each of the low `n` bits of `outcome` with probability `p_e`.
pub fn apply_readout_flips(outcome: usize, n: usize, p_e: f64, rng: &mut Rng) -> usize {
    if p_e == 0.0 {
        return outcome;
    }
    let mut out = outcome;
    for q in 0..n {
        if rng.random::<f64>() < p_e {
            out ^= 1 << q;
        }
    }
    out
}

/// Unpacks the low `n` bits of an outcome index, qubit 0 first.
pub fn bits_of(outcome: usize, n: usize) -> Vec<u8> {
    (0..n).map(|q| ((outcome >> q) & 1) as u8).collect()
}

/// Samples `shots` readouts of `sv` in the given local bases.
pub fn sample_measurement(
    sv: &StateVector,
    bases: &[Basis],
    shots: usize,
    p_e: f64,
    seed: u64,
) -> Result<Vec<Vec<u8>>> {
    if shots == 0 {
        return Err(Error::invalid("shots must be at least 1"));
    }
    if !(0.0..=1.0).contains(&p_e) {
        return Err(Error::invalid(
            "readout flip probability must lie in [0, 1]",
        ));
    }
    let rotated = rotate_to_bases(sv, bases)?;
    let sampler = OutcomeSampler::new(&rotated);
    let n = sv.num_qubits();
    let mut rng = rng::stream(seed, &[]);
    Ok((0..shots)
        .map(|_| {
            let o = sampler.sample(&mut rng);
            bits_of(apply_readout_flips(o, n, p_e, &mut rng), n)
        })
        .collect())
}
