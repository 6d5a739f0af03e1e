//! Pauli noise model.

use serde::{Deserialize, Serialize};

use super::pauli::{Pauli, PauliString};
use crate::error::{Error, Result};

/// Pauli error distribution over the qubits of one gate.
pub type PauliDistribution = Vec<(PauliString, f64)>;

/// Noise attached to a circuit.
///
/// After every rotation gate, each qubit the gate acts on independently
/// suffers an X, Y or Z error with probabilities `p_x`, `p_y`, `p_z`. After
/// every Clifford gate a Pauli string on the gate's qubits is drawn from the
/// Clifford channel, which defaults to the depolarizing-type channel that
/// spreads `p_c` evenly over all non-identity strings of the gate's arity.
/// Measured bits are flipped with probability `p_e`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
pub struct PauliNoiseSpec {
    #[serde(default)]
    pub p_x: f64,
    #[serde(default)]
    pub p_y: f64,
    #[serde(default)]
    pub p_z: f64,
    #[serde(default)]
    pub p_c: f64,
    #[serde(default)]
    pub p_e: f64,
    /// Replacement channel for single-qubit Clifford gates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clifford_1q: Option<Vec<(String, f64)>>,
    /// Replacement channel for two-qubit Clifford gates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clifford_2q: Option<Vec<(String, f64)>>,
}

fn non_identity_strings(width: usize) -> Vec<PauliString> {
    let all = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
    (1..4usize.pow(width as u32))
        .map(|mut code| {
            let mut v = Vec::with_capacity(width);
            for _ in 0..width {
                v.push(all[code % 4]);
                code /= 4;
            }
            PauliString(v)
        })
        .collect()
}

impl PauliNoiseSpec {
    /// Noiseless model.
    pub fn noiseless() -> Self {
        Self::default()
    }

    /// Equal rotation error rates `p` on every axis, Clifford rate `p_c` and readout `p_e`.
    pub fn symmetric(p: f64, p_c: f64, p_e: f64) -> Self {
        PauliNoiseSpec {
            p_x: p,
            p_y: p,
            p_z: p,
            p_c,
            p_e,
            ..Self::default()
        }
    }

    /// Checks probability ranges and custom channel shapes.
    pub fn validate(&self) -> Result<()> {
        let probs = [self.p_x, self.p_y, self.p_z, self.p_c, self.p_e];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::invalid("noise probabilities must lie in [0, 1]"));
        }
        if self.p_x + self.p_y + self.p_z > 1.0 + 1e-12 {
            return Err(Error::invalid("p_x + p_y + p_z exceeds 1"));
        }
        for arity in [1, 2] {
            let dist = self.clifford_channel(arity)?;
            let total: f64 = dist.iter().map(|(_, p)| p).sum();
            if dist.iter().any(|(_, p)| *p < 0.0) || total > 1.0 + 1e-12 {
                return Err(Error::invalid("Clifford channel probabilities are invalid"));
            }
        }
        Ok(())
    }

    /// True when no error of any kind can occur.
    pub fn is_noiseless(&self) -> bool {
        self.p_x == 0.0
            && self.p_y == 0.0
            && self.p_z == 0.0
            && self.p_e == 0.0
            && self
                .clifford_channel(1)
                .is_ok_and(|d| d.iter().all(|(_, p)| *p == 0.0))
            && self
                .clifford_channel(2)
                .is_ok_and(|d| d.iter().all(|(_, p)| *p == 0.0))
    }

    /// True when gate errors can occur (readout flips excluded).
    pub fn has_gate_noise(&self) -> bool {
        let readout_only = PauliNoiseSpec {
            p_e: 0.0,
            ..self.clone()
        };
        !readout_only.is_noiseless()
    }

    /// Error distribution after a rotation, per acted-on qubit.
    pub fn rotation_channel(&self) -> [(Pauli, f64); 3] {
        [
            (Pauli::X, self.p_x),
            (Pauli::Y, self.p_y),
            (Pauli::Z, self.p_z),
        ]
    }

    /// Error distribution after a Clifford gate of the given arity.
    pub fn clifford_channel(&self, arity: usize) -> Result<PauliDistribution> {
        let custom = match arity {
            1 => self.clifford_1q.as_ref(),
            2 => self.clifford_2q.as_ref(),
            _ => {
                return Err(Error::invalid(format!(
                    "no Clifford channel for arity {arity}"
                )))
            }
        };
        match custom {
            Some(list) => list
                .iter()
                .map(|(s, p)| {
                    let ps: PauliString = s.parse()?;
                    if ps.len() != arity {
                        return Err(Error::dim("Clifford channel string", arity, ps.len()));
                    }
                    Ok((ps, *p))
                })
                .collect(),
            None => {
                let strings = non_identity_strings(arity);
                let each = self.p_c / strings.len() as f64;
                Ok(strings.into_iter().map(|s| (s, each)).collect())
            }
        }
    }

    /// Pauli-channel eigenvalues `(q_X, q_Y, q_Z)` of the rotation channel.
    pub fn eigenvalues(&self) -> (f64, f64, f64) {
        (
            1.0 - 2.0 * (self.p_z + self.p_y),
            1.0 - 2.0 * (self.p_z + self.p_x),
            1.0 - 2.0 * (self.p_x + self.p_y),
        )
    }

    /// Contraction factor `1 − 2(min(p_x, p_y) + p_z)` of expansion coefficients.
    pub fn contraction(&self) -> f64 {
        1.0 - 2.0 * (self.p_x.min(self.p_y) + self.p_z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_two_qubit_channel_is_uniform() {
        let n = PauliNoiseSpec::symmetric(0.0, 0.15, 0.0);
        let d = n.clifford_channel(2).unwrap();
        assert_eq!(d.len(), 15);
        assert!(d.iter().all(|(_, p)| (p - 0.01).abs() < 1e-15));
        assert_eq!(n.clifford_channel(1).unwrap().len(), 3);
    }

    #[test]
    fn eigenvalues_match_definition() {
        let n = PauliNoiseSpec {
            p_x: 0.01,
            p_y: 0.02,
            p_z: 0.03,
            ..Default::default()
        };
        let (qx, qy, qz) = n.eigenvalues();
        assert!((qx - 0.9).abs() < 1e-15);
        assert!((qy - 0.92).abs() < 1e-15);
        assert!((qz - 0.94).abs() < 1e-15);
        assert!((n.contraction() - 0.92).abs() < 1e-15);
    }

    #[test]
    fn validation() {
        assert!(PauliNoiseSpec::symmetric(0.4, 0.0, 0.0).validate().is_err());
        assert!(PauliNoiseSpec::symmetric(0.1, 0.1, 0.1).validate().is_ok());
        let custom = PauliNoiseSpec {
            clifford_2q: Some(vec![("XX".into(), 0.1), ("Z".into(), 0.1)]),
            ..Default::default()
        };
        assert!(custom.validate().is_err());
        assert!(PauliNoiseSpec::noiseless().is_noiseless());
        assert!(!PauliNoiseSpec::symmetric(0.0, 0.0, 0.1).has_gate_noise());
    }

    #[test]
    fn toml_round_trip() {
        let n = PauliNoiseSpec::symmetric(0.005, 0.01, 0.0);
        let text = toml::to_string(&n).unwrap();
        let back: PauliNoiseSpec = toml::from_str(&text).unwrap();
        assert_eq!(back, n);
    }
}
