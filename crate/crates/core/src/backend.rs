//! Observable evaluation on the simulator backends.
//!
//! [`Backend::Exact`] uses the statevector for noiseless circuits and the
//! density matrix otherwise. [`Backend::TrajectoryMean`] averages exact
//! expectations over sampled noise trajectories. [`Backend::Shots`] emulates
//! a device: the observable is split into qubit-wise commuting groups and
//! each group is read out `shots` times, every shot from its own trajectory.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuits::ConcreteCircuit;
use crate::error::{check_len, Error, Result};
use crate::rng;
use crate::simulator::{
    apply_readout_flips, evolve_trajectory, expectation, readout_attenuation, rotate_to_bases,
    run_noisy_exact, run_pure, Basis, Observable, OutcomeSampler, Pauli, PauliNoiseSpec,
    StateVector,
};

/// How an expectation value is obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Backend {
    Exact,
    TrajectoryMean { trajectories: usize },
    Shots { shots: usize },
}

impl Backend {
    /// `Shots` for a positive count, `Exact` for the zero sentinel.
    pub fn from_shots(shots: usize) -> Self {
        if shots == 0 {
            Backend::Exact
        } else {
            Backend::Shots { shots }
        }
    }

    /// Circuit executions per evaluation of `o` (0 for classical backends).
    pub fn shots_per_evaluation(&self, o: &Observable) -> u64 {
        match self {
            Backend::Shots { shots } => (*shots as u64) * qubitwise_groups(o).len() as u64,
            _ => 0,
        }
    }
}

/// Expectation estimate with its standard error (0 for exact backends).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

/// Greedy partition of term indices into qubit-wise commuting groups, in
/// first-fit order.
pub fn qubitwise_groups(o: &Observable) -> Vec<Vec<usize>> {
    let mut groups: Vec<(Vec<Pauli>, Vec<usize>)> = Vec::new();
    for (i, (_, p)) in o.terms().iter().enumerate() {
        let fits = |basis: &Vec<Pauli>| {
            basis
                .iter()
                .zip(&p.0)
                .all(|(&a, &b)| a == Pauli::I || b == Pauli::I || a == b)
        };
        match groups.iter_mut().find(|(basis, _)| fits(basis)) {
            Some((basis, members)) => {
                for (slot, &f) in basis.iter_mut().zip(&p.0) {
                    if f != Pauli::I {
                        *slot = f;
                    }
                }
                members.push(i);
            }
            None => groups.push((p.0.clone(), vec![i])),
        }
    }
    groups.into_iter().map(|(_, m)| m).collect()
}

fn group_bases(o: &Observable, members: &[usize]) -> Vec<Basis> {
    let mut bases = vec![Basis::Z; o.num_qubits()];
    for &i in members {
        for (q, &f) in o.terms()[i].1 .0.iter().enumerate() {
            match f {
                Pauli::X => bases[q] = Basis::X,
                Pauli::Y => bases[q] = Basis::Y,
                _ => {}
            }
        }
    }
    bases
}

fn support_mask(p: &[Pauli]) -> usize {
    p.iter()
        .enumerate()
        .filter(|(_, &f)| f != Pauli::I)
        .fold(0, |m, (q, _)| m | (1 << q))
}

/// `O` with each term scaled by its readout attenuation.
fn attenuated(o: &Observable, p_e: f64) -> Result<Observable> {
    if p_e == 0.0 {
        return Ok(o.clone());
    }
    Observable::new(
        o.terms()
            .iter()
            .map(|(a, p)| (a * readout_attenuation(p, p_e), p.clone()))
            .collect(),
    )
}

/// Exact expectation including readout attenuation.
fn exact_value(c: &ConcreteCircuit, o: &Observable, noise: &PauliNoiseSpec) -> Result<f64> {
    let measured = attenuated(o, noise.p_e)?;
    if noise.has_gate_noise() {
        expectation(&run_noisy_exact(c, noise)?, &measured)
    } else {
        expectation(&run_pure(c)?, &measured)
    }
}

/// Estimates `Tr(O ρ)` for the circuit under `noise`.
pub fn evaluate(
    c: &ConcreteCircuit,
    o: &Observable,
    noise: &PauliNoiseSpec,
    backend: Backend,
    seed: u64,
) -> Result<Estimate> {
    check_len("observable width", c.num_qubits, o.num_qubits())?;
    noise.validate()?;
    match backend {
        Backend::Exact => Ok(Estimate {
            value: exact_value(c, o, noise)?,
            std_error: 0.0,
        }),
        Backend::TrajectoryMean { trajectories } => {
            if trajectories == 0 {
                return Err(Error::invalid("trajectory count must be at least 1"));
            }
            if !noise.has_gate_noise() {
                return Ok(Estimate {
                    value: exact_value(c, o, noise)?,
                    std_error: 0.0,
                });
            }
            let measured = attenuated(o, noise.p_e)?;
            let values = (0..trajectories as u64)
                .into_par_iter()
                .map(|t| {
                    let mut r = rng::stream(seed, &[t]);
                    let mut sv = StateVector::initial(c.initial_state, c.num_qubits)?;
                    evolve_trajectory(&mut sv, &c.gates, noise, &mut r)?;
                    expectation(&sv, &measured)
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(mean_and_error(&values))
        }
        Backend::Shots { shots } => {
            if shots == 0 {
                return Err(Error::invalid("shot count must be at least 1"));
            }
            let ideal = if noise.has_gate_noise() {
                None
            } else {
                Some(run_pure(c)?)
            };
            let mut value = 0.0;
            let mut variance = 0.0;
            for (g, members) in qubitwise_groups(o).iter().enumerate() {
                let bases = group_bases(o, members);
                let masks: Vec<(f64, usize)> = members
                    .iter()
                    .map(|&i| (o.terms()[i].0, support_mask(&o.terms()[i].1 .0)))
                    .collect();
                let per_shot = |outcome: usize| -> f64 {
                    masks
                        .iter()
                        .map(|&(a, m)| {
                            if (outcome & m).count_ones().is_multiple_of(2) {
                                a
                            } else {
                                -a
                            }
                        })
                        .sum()
                };
                let samples: Vec<f64> = match &ideal {
                    Some(sv) => {
                        let sampler = OutcomeSampler::new(&rotate_to_bases(sv, &bases)?);
                        let mut r = rng::stream(seed, &[g as u64]);
                        (0..shots)
                            .map(|_| {
                                let o = sampler.sample(&mut r);
                                per_shot(apply_readout_flips(o, c.num_qubits, noise.p_e, &mut r))
                            })
                            .collect()
                    }
                    None => (0..shots as u64)
                        .into_par_iter()
                        .map(|s| {
                            let mut r = rng::stream(seed, &[g as u64, s]);
                            let mut sv = StateVector::initial(c.initial_state, c.num_qubits)?;
                            evolve_trajectory(&mut sv, &c.gates, noise, &mut r)?;
                            let rotated = rotate_to_bases(&sv, &bases)?;
                            let o = OutcomeSampler::new(&rotated).sample(&mut r);
                            Ok(per_shot(apply_readout_flips(
                                o,
                                c.num_qubits,
                                noise.p_e,
                                &mut r,
                            )))
                        })
                        .collect::<Result<Vec<f64>>>()?,
                };
                let est = mean_and_error(&samples);
                value += est.value;
                variance += est.std_error * est.std_error;
            }
            Ok(Estimate {
                value,
                std_error: variance.sqrt(),
            })
        }
    }
}

fn mean_and_error(values: &[f64]) -> Estimate {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std_error = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
    } else {
        0.0
    };
    Estimate {
        value: mean,
        std_error,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::random_concrete_circuit;

    #[test]
    fn grouping_is_qubitwise_commuting() {
        let o = Observable::from_terms(&[
            (1.0, "ZZI"),
            (1.0, "IZZ"),
            (0.5, "XII"),
            (0.5, "IXI"),
            (0.2, "YIY"),
        ])
        .unwrap();
        let groups = qubitwise_groups(&o);
        assert_eq!(groups, vec![vec![0, 1], vec![2, 3], vec![4]]);
    }

    #[test]
    fn shots_converge_to_exact() {
        let c = random_concrete_circuit(3, 25, 4);
        let o = Observable::from_terms(&[(1.0, "ZZI"), (-0.5, "IXI"), (0.3, "YIY"), (0.2, "III")])
            .unwrap();
        for noise in [
            PauliNoiseSpec::noiseless(),
            PauliNoiseSpec::symmetric(0.02, 0.01, 0.02),
        ] {
            let exact = evaluate(&c, &o, &noise, Backend::Exact, 0).unwrap();
            let shots = evaluate(&c, &o, &noise, Backend::Shots { shots: 20_000 }, 9).unwrap();
            assert!(shots.std_error > 0.0);
            assert!(
                (shots.value - exact.value).abs() < 5.0 * shots.std_error,
                "{noise:?}"
            );
            let traj = evaluate(
                &c,
                &o,
                &noise,
                Backend::TrajectoryMean { trajectories: 4000 },
                2,
            )
            .unwrap();
            assert!((traj.value - exact.value).abs() < 5.0 * traj.std_error + 1e-12);
        }
    }

    #[test]
    fn shot_accounting() {
        let o = Observable::from_terms(&[(1.0, "ZZ"), (0.5, "XI"), (0.5, "IX")]).unwrap();
        assert_eq!(Backend::Shots { shots: 100 }.shots_per_evaluation(&o), 200);
        assert_eq!(Backend::Exact.shots_per_evaluation(&o), 0);
        assert_eq!(Backend::from_shots(0), Backend::Exact);
    }
}
