//! Surrogate accuracy on the folded two-qubit benchmark.

use rand::Rng as _;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;
use std::sync::Arc;

use crate::backend::{evaluate, Backend};
use crate::circuits::{build_fold_benchmark, fold_param_circuit};
use crate::error::{Error, Result};
use crate::rng;
use crate::simulator::{Observable, PauliNoiseSpec};
use crate::surrogate_cs::{fit_cs, TrainingDatasetCS};

use super::FoldSection;

/// Surrogate-vs-device error at one folding factor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FoldRow {
    pub p: usize,
    pub mse: f64,
}

/// For each folding factor, trains a shadow kernel surrogate on the folded
/// circuit and measures its squared error against shot estimates of
/// `⟨Z⊗I⟩` at uniformly drawn test inputs.
///
/// Every factor reuses the same training inputs, snapshot seeds and test
/// inputs, so differences between rows come from the circuit alone.
pub fn fold_bench(noise: &PauliNoiseSpec, cfg: &FoldSection, seed: u64) -> Result<Vec<FoldRow>> {
    if cfg.factors.is_empty()
        || cfg.n == 0
        || cfg.t == 0
        || cfg.test_points == 0
        || cfg.test_shots == 0
    {
        return Err(Error::invalid(
            "fold benchmark needs factors, training data and test points",
        ));
    }
    let o = Observable::from_terms(&[(1.0, "ZI")])?;
    let mut r = rng::stream(seed, &[0xF0]);
    let test: Vec<f64> = (0..cfg.test_points)
        .map(|_| r.random_range(-PI..PI))
        .collect();
    let base = build_fold_benchmark();
    cfg.factors
        .iter()
        .map(|&p| {
            let c = fold_param_circuit(&base, p);
            let data =
                TrainingDatasetCS::generate(&c, noise, cfg.n, cfg.t, rng::derive_seed(seed, &[1]))?;
            let model = fit_cs(Arc::new(data), cfg.truncation)?;
            let errs = test
                .par_iter()
                .enumerate()
                .map(|(j, &x)| {
                    let backend = Backend::Shots {
                        shots: cfg.test_shots,
                    };
                    let y = evaluate(
                        &c.bind(&[x])?,
                        &o,
                        noise,
                        backend,
                        rng::derive_seed(seed, &[2, j as u64]),
                    )?
                    .value;
                    Ok((model.predict(&[x], &o)? - y).powi(2))
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(FoldRow {
                p,
                mse: errs.iter().sum::<f64>() / errs.len() as f64,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_benchmark_tracks_cosine() {
        let cfg = FoldSection {
            factors: vec![0, 2],
            n: 200,
            t: 200,
            test_points: 20,
            test_shots: 4000,
            ..Default::default()
        };
        let rows = fold_bench(&PauliNoiseSpec::noiseless(), &cfg, 3).unwrap();
        assert_eq!(rows.iter().map(|r| r.p).collect::<Vec<_>>(), vec![0, 2]);
        // Folding is the identity without noise, so both rows agree up to
        // rounding in the sampled outcomes.
        assert!((rows[0].mse - rows[1].mse).abs() < 1e-3, "{rows:?}");
        assert!(rows[0].mse < 0.05, "{rows:?}");
    }
}
