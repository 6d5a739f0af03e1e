//! Kernel-mean predictor over shadow-labelled training data.
//!
//! Given examples `(x_i, shadows_i)`, the predictor for any observable `O` is
//! `h(x', O) = (1/n) Σ_i κ_Λ(x', x_i) · g(x_i, O)` where `g` is the shadow
//! estimate of `Tr(O ρ(x_i))`.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::{Arc, RwLock};

use crate::circuits::ParamCircuit;
use crate::error::{check_len, Error, Result};
use crate::features::{kernel, kernel_gradient};
use crate::rng;
use crate::shadows::{collect_shadows, estimate_observable, ShadowSet, SnapshotRecord};
use crate::simulator::{Observable, PauliNoiseSpec};

/// Tag for inputs drawn uniformly from `[−π, π]^d`.
pub const UNIFORM_TORUS: &str = "uniform[-pi,pi]";

/// Provenance recorded with a shadow dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMetadata {
    pub circuit_hash: String,
    pub noise: PauliNoiseSpec,
    pub sampling: String,
    pub seed: u64,
}

/// One training input with its snapshots.
#[derive(Clone, Debug, PartialEq)]
pub struct ExampleCS {
    pub x: Vec<f64>,
    pub shadows: ShadowSet,
}

/// Shadow-labelled training set with uniform `d` and `T`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingDatasetCS {
    examples: Vec<ExampleCS>,
    metadata: DatasetMetadata,
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    metadata: DatasetMetadata,
    num_qubits: usize,
    d: usize,
    t: usize,
}

#[derive(Serialize, Deserialize)]
struct ExampleLine {
    x: Vec<f64>,
    snapshots: Vec<SnapshotRecord>,
}

impl TrainingDatasetCS {
    pub fn new(examples: Vec<ExampleCS>, metadata: DatasetMetadata) -> Result<Self> {
        if let Some(first) = examples.first() {
            let (d, t, n) = (
                first.x.len(),
                first.shadows.len(),
                first.shadows.num_qubits(),
            );
            for e in &examples {
                check_len("example parameter length", d, e.x.len())?;
                check_len("example snapshot count", t, e.shadows.len())?;
                check_len("example qubit count", n, e.shadows.num_qubits())?;
                if e.x.iter().any(|v| !v.is_finite()) {
                    return Err(Error::invalid("non-finite training input"));
                }
            }
        }
        Ok(TrainingDatasetCS { examples, metadata })
    }

    /// Draws `n` inputs uniformly from `[−π, π]^d` and collects `t`
    /// snapshots at each.
    pub fn generate(
        circuit: &ParamCircuit,
        noise: &PauliNoiseSpec,
        n: usize,
        t: usize,
        seed: u64,
    ) -> Result<Self> {
        let d = circuit.num_slots();
        let mut r = rng::stream(seed, &[1]);
        let xs: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| r.random_range(-PI..PI)).collect())
            .collect();
        let mut ds = Self::generate_at(circuit, noise, &xs, t, seed)?;
        ds.metadata.sampling = UNIFORM_TORUS.to_string();
        Ok(ds)
    }

    /// Collects `t` snapshots at each of the given inputs.
    pub fn generate_at(
        circuit: &ParamCircuit,
        noise: &PauliNoiseSpec,
        xs: &[Vec<f64>],
        t: usize,
        seed: u64,
    ) -> Result<Self> {
        let examples = xs
            .par_iter()
            .enumerate()
            .map(|(i, x)| {
                let c = circuit.bind(x)?;
                let shadows =
                    collect_shadows(&c, noise, t, rng::derive_seed(seed, &[2, i as u64]))?;
                Ok(ExampleCS {
                    x: x.clone(),
                    shadows,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(
            examples,
            DatasetMetadata {
                circuit_hash: circuit.content_hash()?,
                noise: noise.clone(),
                sampling: "explicit".to_string(),
                seed,
            },
        )
    }

    pub fn examples(&self) -> &[ExampleCS] {
        &self.examples
    }

    pub fn metadata(&self) -> &DatasetMetadata {
        &self.metadata
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Parameter dimension (0 for an empty set).
    pub fn dim(&self) -> usize {
        self.examples.first().map_or(0, |e| e.x.len())
    }

    pub fn num_qubits(&self) -> usize {
        self.examples.first().map_or(0, |e| e.shadows.num_qubits())
    }

    /// The first `n` examples as a new dataset.
    pub fn prefix(&self, n: usize) -> Result<Self> {
        if n > self.len() {
            return Err(Error::invalid(format!(
                "prefix of {n} from {} examples",
                self.len()
            )));
        }
        Ok(TrainingDatasetCS {
            examples: self.examples[..n].to_vec(),
            metadata: self.metadata.clone(),
        })
    }

    /// Writes a header line followed by one JSON object per example.
    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        let header = HeaderLine {
            metadata: self.metadata.clone(),
            num_qubits: self.num_qubits(),
            d: self.dim(),
            t: self.examples.first().map_or(0, |e| e.shadows.len()),
        };
        serde_json::to_writer(&mut w, &header)?;
        writeln!(w)?;
        for e in &self.examples {
            let line = ExampleLine {
                x: e.x.clone(),
                snapshots: e.shadows.to_records(),
            };
            serde_json::to_writer(&mut w, &line)?;
            writeln!(w)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_jsonl(path: &Path) -> Result<Self> {
        let mut lines = BufReader::new(std::fs::File::open(path)?).lines();
        let header: HeaderLine = match lines.next() {
            Some(l) => serde_json::from_str(&l?)?,
            None => return Err(Error::invalid("empty dataset file")),
        };
        let mut examples = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let e: ExampleLine = serde_json::from_str(&line)?;
            check_len("stored example parameter length", header.d, e.x.len())?;
            examples.push(ExampleCS {
                x: e.x,
                shadows: ShadowSet::from_records(header.num_qubits, &e.snapshots)?,
            });
        }
        Self::new(examples, header.metadata)
    }
}

/// Fitted kernel-mean model; immutable apart from its label cache.
#[derive(Debug)]
pub struct SurrogateCS {
    dataset: Arc<TrainingDatasetCS>,
    truncation: usize,
    cache: RwLock<HashMap<String, Arc<Vec<f64>>>>,
}

/// Builds the predictor. No optimization is involved.
pub fn fit_cs(dataset: Arc<TrainingDatasetCS>, truncation: usize) -> Result<SurrogateCS> {
    if dataset.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    Ok(SurrogateCS {
        dataset,
        truncation,
        cache: RwLock::new(HashMap::new()),
    })
}

impl SurrogateCS {
    pub fn dataset(&self) -> &Arc<TrainingDatasetCS> {
        &self.dataset
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn dim(&self) -> usize {
        self.dataset.dim()
    }

    /// Shadow estimates `g(x_i, O)` for every example, computed once per
    /// observable.
    pub fn labels(&self, o: &Observable) -> Result<Arc<Vec<f64>>> {
        let key = o.canonical_key();
        if let Some(v) = self.cache.read().expect("label cache poisoned").get(&key) {
            return Ok(v.clone());
        }
        let values = Arc::new(
            self.dataset
                .examples()
                .par_iter()
                .map(|e| estimate_observable(&e.shadows, o))
                .collect::<Result<Vec<f64>>>()?,
        );
        let mut cache = self.cache.write().expect("label cache poisoned");
        Ok(cache.entry(key).or_insert(values).clone())
    }

    /// `(1/n) Σ_i κ_Λ(x', x_i) g(x_i, O)`.
    pub fn predict(&self, x: &[f64], o: &Observable) -> Result<f64> {
        check_len("prediction input", self.dim(), x.len())?;
        let labels = self.labels(o)?;
        let mut acc = 0.0;
        for (e, g) in self.dataset.examples().iter().zip(labels.iter()) {
            acc += kernel(x, &e.x, self.truncation)? * g;
        }
        Ok(acc / self.dataset.len() as f64)
    }

    /// Predictions for many inputs, in parallel.
    pub fn predict_batch(&self, xs: &[Vec<f64>], o: &Observable) -> Result<Vec<f64>> {
        self.labels(o)?;
        xs.par_iter().map(|x| self.predict(x, o)).collect()
    }

    /// Gradient of [`SurrogateCS::predict`] with respect to `x'`.
    pub fn predict_gradient(&self, x: &[f64], o: &Observable) -> Result<Vec<f64>> {
        check_len("prediction input", self.dim(), x.len())?;
        let labels = self.labels(o)?;
        let mut grad = vec![0.0; x.len()];
        for (e, g) in self.dataset.examples().iter().zip(labels.iter()) {
            for (acc, k) in grad
                .iter_mut()
                .zip(kernel_gradient(x, &e.x, self.truncation)?)
            {
                *acc += k * g;
            }
        }
        let n = self.dataset.len() as f64;
        grad.iter_mut().for_each(|v| *v /= n);
        Ok(grad)
    }

    /// Mean of `|h(x, O) − f_ref|²` over `test`.
    pub fn empirical_risk(&self, test: &[(Vec<f64>, f64)], o: &Observable) -> Result<f64> {
        if test.is_empty() {
            return Err(Error::invalid("test set is empty"));
        }
        let xs: Vec<Vec<f64>> = test.iter().map(|(x, _)| x.clone()).collect();
        let preds = self.predict_batch(&xs, o)?;
        Ok(preds
            .iter()
            .zip(test)
            .map(|(p, (_, y))| (p - y).powi(2))
            .sum::<f64>()
            / test.len() as f64)
    }
}

/// Free-function form of [`SurrogateCS::predict`].
pub fn predict_cs(m: &SurrogateCS, x: &[f64], o: &Observable) -> Result<f64> {
    m.predict(x, o)
}

/// Free-function form of [`SurrogateCS::predict_gradient`].
pub fn predict_cs_gradient(m: &SurrogateCS, x: &[f64], o: &Observable) -> Result<Vec<f64>> {
    m.predict_gradient(x, o)
}

/// Free-function form of [`SurrogateCS::empirical_risk`].
pub fn empirical_risk(m: &SurrogateCS, test: &[(Vec<f64>, f64)], o: &Observable) -> Result<f64> {
    m.empirical_risk(test, o)
}

/// Persisted model: where the dataset lives and the truncation order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurrogateCsFile {
    pub dataset: String,
    #[serde(rename = "lambda")]
    pub truncation: usize,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuits::{build_vqe_ansatz, AngleSource, GateKind, GateOp, InitialState};
    use crate::shadows::ShadowSnapshot;
    use crate::simulator::{expectation, run_noisy_exact, Basis};

    fn meta() -> DatasetMetadata {
        DatasetMetadata {
            circuit_hash: String::new(),
            noise: PauliNoiseSpec::noiseless(),
            sampling: "explicit".into(),
            seed: 0,
        }
    }

    /// Dataset on one qubit whose every snapshot reads Z = +1.
    fn z_plus_dataset(xs: &[Vec<f64>]) -> TrainingDatasetCS {
        let snap = ShadowSnapshot::new(&[Basis::Z], &[0]).unwrap();
        let examples = xs
            .iter()
            .map(|x| ExampleCS {
                x: x.clone(),
                shadows: ShadowSet::new(1, vec![snap; 4]).unwrap(),
            })
            .collect();
        TrainingDatasetCS::new(examples, meta()).unwrap()
    }

    fn small_circuit() -> ParamCircuit {
        ParamCircuit::new(
            2,
            vec![
                GateOp::rotation(GateKind::Ry, &[0], AngleSource::slot(0)),
                GateOp::clifford(GateKind::Cnot, &[0, 1]),
                GateOp::rotation(GateKind::Rx, &[1], AngleSource::slot(1)),
            ],
            2,
            InitialState::AllZero,
        )
        .unwrap()
    }

    #[test]
    fn trivial_examples() {
        let z = Observable::from_terms(&[(1.0, "Z")]).unwrap();
        // Λ = 0 gives the label mean; every label here is 3.
        let m = fit_cs(Arc::new(z_plus_dataset(&[vec![0.1], vec![2.0]])), 0).unwrap();
        assert!((m.predict(&[1.3], &z).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(m.predict_gradient(&[1.3], &z).unwrap(), vec![0.0]);
        // One example: κ(x', x_1) g.
        let m = fit_cs(Arc::new(z_plus_dataset(&[vec![0.4]])), 1).unwrap();
        let expect = (1.0 + 2.0 * (1.1f64 - 0.4).cos()) * 3.0;
        assert!((m.predict(&[1.1], &z).unwrap() - expect).abs() < 1e-12);
        let g = m.predict_gradient(&[1.1], &z).unwrap();
        assert!((g[0] + 2.0 * (1.1f64 - 0.4).sin() * 3.0).abs() < 1e-12);
        // Risk of a constant offset.
        let m = fit_cs(Arc::new(z_plus_dataset(&[vec![0.0]])), 0).unwrap();
        assert!((m.empirical_risk(&[(vec![0.2], 2.5)], &z).unwrap() - 0.25).abs() < 1e-12);
        assert!(m.empirical_risk(&[], &z).is_err());
        assert!(m.predict(&[0.0, 1.0], &z).is_err());
        assert!(fit_cs(Arc::new(z_plus_dataset(&[])), 1).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let c = build_vqe_ansatz(3, 1).unwrap();
        let ds = TrainingDatasetCS::generate(&c, &PauliNoiseSpec::noiseless(), 40, 5, 7).unwrap();
        let o = Observable::from_terms(&[(0.7, "ZZI"), (-0.4, "IXI"), (0.2, "XIX")]).unwrap();
        let m = fit_cs(Arc::new(ds), 2).unwrap();
        let x: Vec<f64> = (0..c.num_slots()).map(|i| 0.3 * i as f64 - 0.5).collect();
        let g = m.predict_gradient(&x, &o).unwrap();
        let h = 1e-5;
        for j in 0..x.len() {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[j] += h;
            xm[j] -= h;
            let fd = (m.predict(&xp, &o).unwrap() - m.predict(&xm, &o).unwrap()) / (2.0 * h);
            assert!((fd - g[j]).abs() < 1e-6);
        }
    }

    #[test]
    fn cache_matches_recomputation_and_is_linear() {
        let c = small_circuit();
        let ds = Arc::new(
            TrainingDatasetCS::generate(&c, &PauliNoiseSpec::symmetric(0.01, 0.01, 0.0), 20, 8, 3)
                .unwrap(),
        );
        let m = fit_cs(ds.clone(), 2).unwrap();
        let o1 = Observable::from_terms(&[(1.0, "ZZ")]).unwrap();
        let o2 = Observable::from_terms(&[(1.0, "XI"), (0.5, "IY")]).unwrap();
        let cached = m.labels(&o1).unwrap();
        for (e, g) in ds.examples().iter().zip(cached.iter()) {
            assert_eq!(*g, estimate_observable(&e.shadows, &o1).unwrap());
        }
        let x = [0.3, -1.2];
        let combo = o1.linear_combination(2.0, &o2, -0.5).unwrap();
        let lhs = m.predict(&x, &combo).unwrap();
        let rhs = 2.0 * m.predict(&x, &o1).unwrap() - 0.5 * m.predict(&x, &o2).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn unbiased_toward_truncated_model() {
        let c = small_circuit();
        let noise = PauliNoiseSpec::symmetric(0.02, 0.01, 0.0);
        let o = Observable::from_terms(&[(1.0, "ZZ"), (0.5, "XI")]).unwrap();
        let xs = vec![vec![0.3, -0.7], vec![1.9, 0.2], vec![-2.4, 2.8]];
        let xq = [0.5, 1.0];
        let lam = 1;
        let target: f64 = xs
            .iter()
            .map(|x| {
                let rho = run_noisy_exact(&c.bind(x).unwrap(), &noise).unwrap();
                kernel(&xq, x, lam).unwrap() * expectation(&rho, &o).unwrap()
            })
            .sum::<f64>()
            / xs.len() as f64;
        let reps = 300;
        let preds: Vec<f64> = (0..reps)
            .into_par_iter()
            .map(|s| {
                let ds = TrainingDatasetCS::generate_at(&c, &noise, &xs, 20, 1000 + s).unwrap();
                fit_cs(Arc::new(ds), lam).unwrap().predict(&xq, &o).unwrap()
            })
            .collect();
        let mean = preds.iter().sum::<f64>() / reps as f64;
        let var = preds.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        assert!((mean - target).abs() < 5.0 * (var / reps as f64).sqrt());
    }

    #[test]
    fn jsonl_round_trip() {
        let c = small_circuit();
        let ds = TrainingDatasetCS::generate(&c, &PauliNoiseSpec::noiseless(), 5, 3, 11).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ds.jsonl");
        ds.write_jsonl(&p).unwrap();
        assert_eq!(TrainingDatasetCS::read_jsonl(&p).unwrap(), ds);
        assert_eq!(ds.metadata().sampling, UNIFORM_TORUS);
        assert_eq!(ds.prefix(2).unwrap().len(), 2);
    }
}
