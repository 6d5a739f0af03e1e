//! Ridge regression over truncated trigonometric features.
//!
//! The model is `h(x) = ⟨Φ(x), w⟩` with `Φ` a frequency set in canonical
//! order, fitted by minimizing `(1/n) Σ (y_i − ⟨Φ(x_i), w⟩)² + λ‖w‖²`.
//! When several gates read the same parameter, features may be collapsed onto
//! the base parameters: each expanded frequency becomes the monomial
//! `Π_j cos(s_j x_j)^{N⁺_j} sin(s_j x_j)^{N⁻_j}`, where `s_j` is the angle
//! scale of slot `j`, and repeated monomials are merged.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::{Beta, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::backend::{evaluate, Backend};
use crate::circuits::{AngleSource, GateKind, ParamCircuit};
use crate::error::{check_len, Error, Result};
use crate::features::{
    collapse, collapsed_image, enumerate_frequency_set, extract_coefficients,
    sample_collapsed_image, CoefficientTable, CollapsedFeatureIndex, FrequencyMode, FrequencySet,
    FrequencySetDescriptor, FrequencyVector, TrigTable,
};
use crate::rng;
use crate::simulator::{Observable, PauliNoiseSpec};

pub use crate::features::sample_feature_subset;

/// Sampling law of one input coordinate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoordinateDistribution {
    Uniform {
        lo: f64,
        hi: f64,
    },
    /// `lo + (hi − lo) · Beta(alpha, beta)`.
    Beta {
        alpha: f64,
        beta: f64,
        lo: f64,
        hi: f64,
    },
}

impl CoordinateDistribution {
    fn validate(&self) -> Result<()> {
        match *self {
            CoordinateDistribution::Uniform { lo, hi }
                if lo < hi && lo.is_finite() && hi.is_finite() =>
            {
                Ok(())
            }
            CoordinateDistribution::Beta {
                alpha,
                beta,
                lo,
                hi,
            } if alpha > 0.0 && beta > 0.0 && lo < hi && lo.is_finite() && hi.is_finite() => Ok(()),
            _ => Err(Error::invalid(format!(
                "invalid coordinate distribution {self:?}"
            ))),
        }
    }

    fn sample(&self, r: &mut rng::Rng) -> f64 {
        match *self {
            CoordinateDistribution::Uniform { lo, hi } => r.random_range(lo..hi),
            CoordinateDistribution::Beta {
                alpha,
                beta,
                lo,
                hi,
            } => {
                let b = Beta::new(alpha, beta).expect("validated shape parameters");
                lo + (hi - lo) * b.sample(r)
            }
        }
    }

    fn max_abs(&self) -> f64 {
        match *self {
            CoordinateDistribution::Uniform { lo, hi }
            | CoordinateDistribution::Beta { lo, hi, .. } => lo.abs().max(hi.abs()),
        }
    }
}

/// Per-coordinate input distribution of a training set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingDescriptor {
    pub coordinates: Vec<CoordinateDistribution>,
}

impl SamplingDescriptor {
    pub fn new(coordinates: Vec<CoordinateDistribution>) -> Result<Self> {
        coordinates.iter().try_for_each(|c| c.validate())?;
        Ok(SamplingDescriptor { coordinates })
    }

    /// Every coordinate uniform on `[lo, hi]`.
    pub fn uniform(d: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![CoordinateDistribution::Uniform { lo, hi }; d])
    }

    pub fn dim(&self) -> usize {
        self.coordinates.len()
    }

    /// Largest `|x_j|` the descriptor can produce.
    pub fn range(&self) -> f64 {
        self.coordinates
            .iter()
            .map(|c| c.max_abs())
            .fold(0.0, f64::max)
    }

    pub fn sample(&self, r: &mut rng::Rng) -> Vec<f64> {
        self.coordinates.iter().map(|c| c.sample(r)).collect()
    }

    /// `n` draws from the stream `(seed, 4)`.
    pub fn sample_n(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut r = rng::stream(seed, &[4]);
        (0..n).map(|_| self.sample(&mut r)).collect()
    }
}

/// One labelled input; `shots = 0` marks an exact label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExampleQS {
    pub x: Vec<f64>,
    pub y: f64,
    pub shots: usize,
}

/// Scalar-labelled training set.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingDatasetQS {
    examples: Vec<ExampleQS>,
    sampling: Option<SamplingDescriptor>,
    label_error: Option<f64>,
}

impl TrainingDatasetQS {
    pub fn new(examples: Vec<ExampleQS>, sampling: Option<SamplingDescriptor>) -> Result<Self> {
        if let Some(first) = examples.first() {
            for e in &examples {
                check_len("example parameter length", first.x.len(), e.x.len())?;
                if !e.y.is_finite() || e.x.iter().any(|v| !v.is_finite()) {
                    return Err(Error::invalid("training example is not finite"));
                }
            }
        }
        Ok(TrainingDatasetQS {
            examples,
            sampling,
            label_error: None,
        })
    }

    /// Draws `n` inputs from `sampling` and labels each with `Tr(O ρ(x))`
    /// averaged over `shots` readouts (exact when `shots = 0`).
    pub fn generate(
        circuit: &ParamCircuit,
        o: &Observable,
        noise: &PauliNoiseSpec,
        sampling: &SamplingDescriptor,
        n: usize,
        shots: usize,
        seed: u64,
    ) -> Result<Self> {
        check_len("sampling dimension", circuit.num_slots(), sampling.dim())?;
        let xs = sampling.sample_n(n, seed);
        let backend = Backend::from_shots(shots);
        let labelled = xs
            .into_par_iter()
            .enumerate()
            .map(|(i, x)| {
                let est = evaluate(
                    &circuit.bind(&x)?,
                    o,
                    noise,
                    backend,
                    rng::derive_seed(seed, &[3, i as u64]),
                )?;
                Ok((
                    ExampleQS {
                        x,
                        y: est.value,
                        shots,
                    },
                    est.std_error,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let label_error = labelled.iter().map(|(_, e)| *e).fold(0.0, f64::max);
        let mut ds = Self::new(
            labelled.into_iter().map(|(e, _)| e).collect(),
            Some(sampling.clone()),
        )?;
        ds.label_error = Some(label_error);
        Ok(ds)
    }

    pub fn examples(&self) -> &[ExampleQS] {
        &self.examples
    }

    pub fn sampling(&self) -> Option<&SamplingDescriptor> {
        self.sampling.as_ref()
    }

    /// Largest per-label standard error observed during generation.
    pub fn label_error(&self) -> Option<f64> {
        self.label_error
    }

    pub fn with_label_error(mut self, e: f64) -> Self {
        self.label_error = Some(e);
        self
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.examples.first().map_or(0, |e| e.x.len())
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        for e in &self.examples {
            serde_json::to_writer(&mut w, e)?;
            writeln!(w)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_jsonl(path: &Path) -> Result<Self> {
        let mut examples = Vec::new();
        for line in BufReader::new(std::fs::File::open(path)?).lines() {
            let line = line?;
            if !line.trim().is_empty() {
                examples.push(serde_json::from_str(&line)?);
            }
        }
        Self::new(examples, None)
    }
}

/// How expanded coordinates map onto base parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollapseSpec {
    /// Base coordinate read by each expanded coordinate.
    pub slot_map: Vec<usize>,
    pub base_dim: usize,
    /// Angle scale `s_j` of base coordinate `j`.
    pub scales: Vec<f64>,
    /// Number of repeated layers, when the circuit is layered.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layers: Option<usize>,
    #[serde(default, skip_serializing_if = "FeatureSpace::is_expanded")]
    pub space: FeatureSpace,
}

/// Where a collapsed model's frequency set is drawn.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSpace {
    /// Members of the expanded set, collapsed and merged afterwards.
    #[default]
    Expanded,
    /// Distinct collapsed indices reachable from the expanded set; sampling
    /// with `m` picks among these directly.
    Image,
}

impl FeatureSpace {
    fn is_expanded(&self) -> bool {
        *self == FeatureSpace::Expanded
    }
}

impl CollapseSpec {
    pub fn new(slot_map: Vec<usize>, base_dim: usize, scales: Vec<f64>) -> Result<Self> {
        check_len("collapse scales", base_dim, scales.len())?;
        if slot_map.iter().any(|&j| j >= base_dim) {
            return Err(Error::invalid("slot map refers past the base dimension"));
        }
        Ok(CollapseSpec {
            slot_map,
            base_dim,
            scales,
            layers: None,
            space: FeatureSpace::Expanded,
        })
    }

    /// `layers` repetitions of `0..base_dim` with unit scales.
    pub fn layered(base_dim: usize, layers: usize) -> Self {
        CollapseSpec {
            slot_map: crate::features::layered_slot_map(base_dim, layers),
            base_dim,
            scales: vec![1.0; base_dim],
            layers: Some(layers),
            space: FeatureSpace::Expanded,
        }
    }

    /// Reads slot occurrences and angle scales off a circuit. Every
    /// occurrence of a slot must use the same `|a|` (halved for `CRZ`, whose
    /// phases rotate at half the angle).
    pub fn from_circuit(c: &ParamCircuit) -> Result<Self> {
        let mut scales: Vec<Option<f64>> = vec![None; c.num_slots()];
        let mut slot_map = Vec::new();
        for g in c.gates() {
            if let Some(AngleSource::Slot { slot, a, .. }) = g.angle {
                let s = if g.kind == GateKind::Crz {
                    a.abs() / 2.0
                } else {
                    a.abs()
                };
                match scales[slot] {
                    None => scales[slot] = Some(s),
                    Some(prev) if (prev - s).abs() <= 1e-12 * prev.max(1.0) => {}
                    Some(prev) => {
                        return Err(Error::invalid(format!(
                            "slot {slot} is read with angle scales {prev} and {s}; collapsed features need one scale"
                        )))
                    }
                }
                slot_map.push(slot);
            }
        }
        let scales = scales.into_iter().map(|s| s.unwrap_or(1.0)).collect();
        Self::new(slot_map, c.num_slots(), scales)
    }

    pub fn expanded_dim(&self) -> usize {
        self.slot_map.len()
    }

    /// The same map with features drawn from the collapsed image.
    pub fn with_space(mut self, space: FeatureSpace) -> Self {
        self.space = space;
        self
    }

    /// Number of expanded coordinates reading each base coordinate.
    pub fn occurrences(&self) -> Vec<u32> {
        let mut caps = vec![0; self.base_dim];
        for &j in &self.slot_map {
            caps[j] += 1;
        }
        caps
    }

    fn scaled(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.scales).map(|(v, s)| v * s).collect()
    }
}

/// Features of a model: either expanded monomials or merged collapsed ones.
#[derive(Clone, Debug, PartialEq)]
enum FeatureBasis {
    Expanded(Vec<FrequencyVector>),
    Collapsed(CollapseSpec, Vec<CollapsedFeatureIndex>),
}

impl FeatureBasis {
    fn build(set: &FrequencySet, spec: Option<&CollapseSpec>) -> Result<Self> {
        match spec {
            None => Ok(FeatureBasis::Expanded(set.members().to_vec())),
            Some(spec) => {
                check_len("collapse slot map", set.dim(), spec.expanded_dim())?;
                let mut seen = HashSet::new();
                let mut out = Vec::new();
                for w in set.members() {
                    let idx = collapse(w, &spec.slot_map, spec.base_dim)?;
                    if seen.insert(idx.clone()) {
                        out.push(idx);
                    }
                }
                Ok(FeatureBasis::Collapsed(spec.clone(), out))
            }
        }
    }

    /// Basis described by `desc`, without materializing the expanded set
    /// when the collapse map samples from the image.
    fn from_descriptor(desc: &FrequencySetDescriptor, spec: Option<&CollapseSpec>) -> Result<Self> {
        match spec {
            Some(spec) if spec.space == FeatureSpace::Image => {
                check_len("collapse slot map", desc.d, spec.expanded_dim())?;
                if desc.truncation > desc.d {
                    return Err(Error::invalid(format!(
                        "truncation {} exceeds dimension {}",
                        desc.truncation, desc.d
                    )));
                }
                let caps = spec.occurrences();
                let members = match desc.mode {
                    FrequencyMode::C => collapsed_image(&caps, desc.truncation)?,
                    FrequencyMode::OmegaSample => {
                        let m = desc
                            .m
                            .ok_or_else(|| Error::invalid("sampled set needs m"))?;
                        let seed = desc
                            .seed
                            .ok_or_else(|| Error::invalid("sampled set needs a seed"))?;
                        sample_collapsed_image(&caps, desc.truncation, m, seed)?
                    }
                    FrequencyMode::S => {
                        return Err(Error::invalid(
                            "the collapsed image is defined for C sets only",
                        ))
                    }
                };
                Ok(FeatureBasis::Collapsed(spec.clone(), members))
            }
            _ => Self::build(&FrequencySet::from_descriptor(desc)?, spec),
        }
    }

    fn len(&self) -> usize {
        match self {
            FeatureBasis::Expanded(v) => v.len(),
            FeatureBasis::Collapsed(_, v) => v.len(),
        }
    }

    fn input_dim(&self, desc: &FrequencySetDescriptor) -> usize {
        match self {
            FeatureBasis::Expanded(_) => desc.d,
            FeatureBasis::Collapsed(spec, _) => spec.base_dim,
        }
    }

    fn row(&self, x: &[f64]) -> Vec<f64> {
        match self {
            FeatureBasis::Expanded(members) => {
                let t = TrigTable::new(x);
                members.iter().map(|w| t.phi(w)).collect()
            }
            FeatureBasis::Collapsed(spec, members) => {
                let t = TrigTable::new(&spec.scaled(x));
                members.iter().map(|idx| t.collapsed(idx)).collect()
            }
        }
    }
}

/// Fitted ridge model.
#[derive(Clone, Debug, PartialEq)]
pub struct SurrogateQS {
    descriptor: FrequencySetDescriptor,
    basis: FeatureBasis,
    weights: Vec<f64>,
    lambda: f64,
    lambda_effective: f64,
}

/// Linear solver used by [`fit_qs_with`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    /// The smaller of the primal and dual systems.
    Auto,
    Primal,
    Dual,
}

/// Per-iteration record of [`fit_qs_iterative`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub train_mse: f64,
    pub validation_mse: Option<f64>,
}

fn design_matrix(basis: &FeatureBasis, xs: &[&[f64]]) -> DMatrix<f64> {
    let rows: Vec<Vec<f64>> = xs.par_iter().map(|x| basis.row(x)).collect();
    let m = basis.len();
    DMatrix::from_fn(xs.len(), m, |i, j| rows[i][j])
}

/// Cholesky solve of the SPD system `(G + λ I) z = b`, escalating the
/// diagonal shift on failure. Returns the solution and the shift used.
fn spd_solve(gram: &DMatrix<f64>, lambda: f64, rhs: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    let n = gram.nrows();
    let base_jitter = 1e-12 * gram.trace().abs().max(1e-300) / n.max(1) as f64;
    let mut shift = lambda;
    for attempt in 0..8 {
        let mut a = gram.clone();
        for i in 0..n {
            a[(i, i)] += shift;
        }
        if let Some(ch) = a.clone().cholesky() {
            let mut z = ch.solve(rhs);
            // One step of iterative refinement.
            let r = rhs - &a * &z;
            z += ch.solve(&r);
            if z.iter().all(|v| v.is_finite()) {
                return Ok((z, shift));
            }
        }
        shift = lambda + base_jitter * 100f64.powi(attempt);
    }
    Err(Error::Numerical(format!(
        "ridge system is not positive definite even with shift {shift:.3e}; increase lambda or remove duplicate inputs"
    )))
}

fn validate_fit_inputs(dataset: &TrainingDatasetQS, lambda: f64) -> Result<()> {
    if dataset.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid("lambda must be positive"));
    }
    Ok(())
}

/// Fits with the automatically chosen solver.
pub fn fit_qs(
    dataset: &TrainingDatasetQS,
    freqset: &FrequencySet,
    lambda: f64,
    collapse: Option<&CollapseSpec>,
) -> Result<SurrogateQS> {
    fit_qs_with(dataset, freqset, lambda, collapse, Solver::Auto)
}

/// Fits by a direct SPD solve of the primal or dual normal equations.
pub fn fit_qs_with(
    dataset: &TrainingDatasetQS,
    freqset: &FrequencySet,
    lambda: f64,
    collapse: Option<&CollapseSpec>,
    solver: Solver,
) -> Result<SurrogateQS> {
    validate_fit_inputs(dataset, lambda)?;
    let basis = FeatureBasis::build(freqset, collapse)?;
    fit_basis(dataset, basis, freqset.descriptor(), lambda, solver)
}

/// Fits from a set descriptor. With a collapse map whose space is
/// [`FeatureSpace::Image`] the expanded set is never materialized, so `d`
/// may be far beyond the enumeration guard.
pub fn fit_qs_described(
    dataset: &TrainingDatasetQS,
    desc: &FrequencySetDescriptor,
    lambda: f64,
    collapse: Option<&CollapseSpec>,
    solver: Solver,
) -> Result<SurrogateQS> {
    validate_fit_inputs(dataset, lambda)?;
    let basis = FeatureBasis::from_descriptor(desc, collapse)?;
    fit_basis(dataset, basis, desc, lambda, solver)
}

fn fit_basis(
    dataset: &TrainingDatasetQS,
    basis: FeatureBasis,
    desc: &FrequencySetDescriptor,
    lambda: f64,
    solver: Solver,
) -> Result<SurrogateQS> {
    check_len(
        "training input dimension",
        basis.input_dim(desc),
        dataset.dim(),
    )?;
    let n = dataset.len();
    let xs: Vec<&[f64]> = dataset.examples().iter().map(|e| e.x.as_slice()).collect();
    let phi = design_matrix(&basis, &xs);
    let y = DVector::from_iterator(n, dataset.examples().iter().map(|e| e.y));
    let nf = n as f64;
    let use_primal = match solver {
        Solver::Primal => true,
        Solver::Dual => false,
        Solver::Auto => basis.len() <= n,
    };
    let (w, shift) = if use_primal {
        let gram = phi.tr_mul(&phi) / nf;
        let rhs = phi.tr_mul(&y) / nf;
        spd_solve(&gram, lambda, &rhs)?
    } else {
        let gram = &phi * phi.transpose() / nf;
        let (alpha, shift) = spd_solve(&gram, lambda, &(&y / nf))?;
        (phi.tr_mul(&alpha), shift)
    };
    Ok(SurrogateQS {
        descriptor: desc.clone(),
        basis,
        weights: w.iter().copied().collect(),
        lambda,
        lambda_effective: shift,
    })
}

/// Plain gradient descent on the ridge objective from `w = 0`, recording the
/// training and validation MSE after every step.
pub fn fit_qs_iterative(
    dataset: &TrainingDatasetQS,
    freqset: &FrequencySet,
    lambda: f64,
    collapse: Option<&CollapseSpec>,
    iterations: usize,
    validation: &[(Vec<f64>, f64)],
) -> Result<(SurrogateQS, Vec<IterationRecord>)> {
    validate_fit_inputs(dataset, lambda)?;
    let basis = FeatureBasis::build(freqset, collapse)?;
    check_len(
        "training input dimension",
        basis.input_dim(freqset.descriptor()),
        dataset.dim(),
    )?;
    let n = dataset.len() as f64;
    let xs: Vec<&[f64]> = dataset.examples().iter().map(|e| e.x.as_slice()).collect();
    let phi = design_matrix(&basis, &xs);
    let y = DVector::from_iterator(dataset.len(), dataset.examples().iter().map(|e| e.y));
    let vx: Vec<&[f64]> = validation.iter().map(|(x, _)| x.as_slice()).collect();
    let vphi = design_matrix(&basis, &vx);
    let vy = DVector::from_iterator(validation.len(), validation.iter().map(|(_, y)| *y));

    // Lipschitz constant of the gradient by power iteration on ΦᵀΦ/n.
    let m = basis.len();
    let mut v = DVector::from_element(m, 1.0 / (m as f64).sqrt());
    let mut top = 0.0;
    for _ in 0..100 {
        let u = phi.tr_mul(&(&phi * &v)) / n;
        top = u.norm();
        if top == 0.0 {
            break;
        }
        v = u / top;
    }
    let step = 1.0 / (2.0 * (top * 1.05 + lambda));

    let mut w = DVector::zeros(m);
    let mut trace = Vec::with_capacity(iterations);
    for it in 1..=iterations {
        let resid = &phi * &w - &y;
        let grad = phi.tr_mul(&resid) * (2.0 / n) + &w * (2.0 * lambda);
        w -= grad * step;
        let train = (&phi * &w - &y).norm_squared() / n;
        let val = (!validation.is_empty())
            .then(|| (&vphi * &w - &vy).norm_squared() / validation.len() as f64);
        trace.push(IterationRecord {
            iteration: it,
            train_mse: train,
            validation_mse: val,
        });
    }
    Ok((
        SurrogateQS {
            descriptor: freqset.descriptor().clone(),
            basis,
            weights: w.iter().copied().collect(),
            lambda,
            lambda_effective: lambda,
        },
        trace,
    ))
}

/// Persisted form of [`SurrogateQS`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurrogateQsRecord {
    pub freqset: FrequencySetDescriptor,
    pub w: Vec<f64>,
    pub lambda: f64,
    pub collapsed: bool,
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub layers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collapse: Option<CollapseSpec>,
}

impl SurrogateQS {
    /// Builds a model with given weights; used for fixed-weight predictors.
    pub fn from_weights(
        freqset: &FrequencySet,
        collapse: Option<&CollapseSpec>,
        weights: Vec<f64>,
        lambda: f64,
    ) -> Result<Self> {
        Self::with_basis(
            FeatureBasis::build(freqset, collapse)?,
            freqset.descriptor(),
            weights,
            lambda,
        )
    }

    fn with_basis(
        basis: FeatureBasis,
        desc: &FrequencySetDescriptor,
        weights: Vec<f64>,
        lambda: f64,
    ) -> Result<Self> {
        check_len("weight vector", basis.len(), weights.len())?;
        if lambda.is_nan() || lambda <= 0.0 {
            return Err(Error::invalid("lambda must be positive"));
        }
        Ok(SurrogateQS {
            descriptor: desc.clone(),
            basis,
            weights,
            lambda,
            lambda_effective: lambda,
        })
    }

    /// Description of the frequency set the features derive from.
    pub fn descriptor(&self) -> &FrequencySetDescriptor {
        &self.descriptor
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Regularization actually used, after any jitter escalation.
    pub fn lambda_effective(&self) -> f64 {
        self.lambda_effective
    }

    pub fn is_collapsed(&self) -> bool {
        matches!(self.basis, FeatureBasis::Collapsed(..))
    }

    pub fn feature_count(&self) -> usize {
        self.basis.len()
    }

    /// Dimension of the inputs accepted by [`SurrogateQS::predict`].
    pub fn input_dim(&self) -> usize {
        self.basis.input_dim(&self.descriptor)
    }

    /// Collapsed feature indices in weight order (empty when expanded).
    pub fn collapsed_features(&self) -> &[CollapsedFeatureIndex] {
        match &self.basis {
            FeatureBasis::Collapsed(_, v) => v,
            FeatureBasis::Expanded(_) => &[],
        }
    }

    pub fn features(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("prediction input", self.input_dim(), x.len())?;
        Ok(self.basis.row(x))
    }

    /// `⟨Φ(x), w⟩`.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        Ok(self
            .features(x)?
            .iter()
            .zip(&self.weights)
            .map(|(a, b)| a * b)
            .sum())
    }

    pub fn predict_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        xs.par_iter().map(|x| self.predict(x)).collect()
    }

    /// Gradient of the ridge objective at the stored weights.
    pub fn objective_gradient(&self, dataset: &TrainingDatasetQS) -> Result<Vec<f64>> {
        let n = dataset.len() as f64;
        let mut g: Vec<f64> = self.weights.iter().map(|w| 2.0 * self.lambda * w).collect();
        for e in dataset.examples() {
            let row = self.features(&e.x)?;
            let r: f64 = row
                .iter()
                .zip(&self.weights)
                .map(|(a, b)| a * b)
                .sum::<f64>()
                - e.y;
            for (gj, fj) in g.iter_mut().zip(&row) {
                *gj += 2.0 * r * fj / n;
            }
        }
        Ok(g)
    }

    pub fn to_record(&self) -> SurrogateQsRecord {
        let collapse = match &self.basis {
            FeatureBasis::Collapsed(spec, _) => Some(spec.clone()),
            FeatureBasis::Expanded(_) => None,
        };
        SurrogateQsRecord {
            freqset: self.descriptor.clone(),
            w: self.weights.clone(),
            lambda: self.lambda,
            collapsed: collapse.is_some(),
            layers: collapse.as_ref().and_then(|c| c.layers),
            collapse,
        }
    }

    pub fn from_record(rec: &SurrogateQsRecord) -> Result<Self> {
        if rec.collapsed != rec.collapse.is_some() {
            return Err(Error::invalid(
                "collapsed flag disagrees with the stored collapse map",
            ));
        }
        let basis = FeatureBasis::from_descriptor(&rec.freqset, rec.collapse.as_ref())?;
        Self::with_basis(basis, &rec.freqset, rec.w.clone(), rec.lambda)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_record())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_record(&serde_json::from_str(text)?)
    }
}

/// Free-function form of [`SurrogateQS::predict`].
pub fn predict_qs(m: &SurrogateQS, x: &[f64]) -> Result<f64> {
    m.predict(x)
}

/// Outcome of [`worst_case_truncation_check`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TruncationReport {
    pub mode: FrequencyMode,
    pub truncation: usize,
    pub range: f64,
    pub d: usize,
    pub contraction: f64,
    pub norm_bound: f64,
    pub measured: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Analytic worst-case truncation bound on `[−R, R]^d`.
pub fn truncation_bound(
    mode: FrequencyMode,
    d: usize,
    truncation: usize,
    contraction: f64,
    norm_bound: f64,
    range: f64,
) -> f64 {
    let base = match mode {
        FrequencyMode::S => std::f64::consts::E * d as f64 * contraction.abs() * range,
        _ => std::f64::consts::E * d as f64 * contraction.abs() * (1.0 + range),
    };
    norm_bound * (base / (truncation as f64 + 1.0)).powi(truncation as i32 + 1)
}

/// Exact expansion coefficients of `x ↦ Tr(O ρ̃(x))` on the exact backend,
/// after checking that the circuit is first order in every parameter.
pub fn oracle_coefficients(
    c: &ParamCircuit,
    o: &Observable,
    noise: &PauliNoiseSpec,
) -> Result<CoefficientTable> {
    let f = |x: &[f64]| Ok(evaluate(&c.bind(x)?, o, noise, Backend::Exact, 0)?.value);
    let table = extract_coefficients(f, c.num_slots())?;
    let mut r = rng::stream(0x0AC1E, &[]);
    for _ in 0..5 {
        let x: Vec<f64> = (0..c.num_slots())
            .map(|_| r.random_range(-3.0..3.0))
            .collect();
        let direct = f(&x)?;
        let recon = table.evaluate(&x)?;
        if (direct - recon).abs() > 1e-9 * (1.0 + direct.abs()) {
            return Err(Error::invalid(
                "circuit expectation is not first order in each parameter; expansion oracle does not apply",
            ));
        }
    }
    Ok(table)
}

fn max_dropped(
    table: &CoefficientTable,
    keep: &HashSet<FrequencyVector>,
    xs: &[Vec<f64>],
) -> Result<f64> {
    let dropped: Vec<(FrequencyVector, f64)> = table
        .iter()
        .filter(|(w, a)| *a != 0.0 && !keep.contains(w))
        .collect();
    xs.iter().try_fold(0.0f64, |acc, x| {
        let t = TrigTable::new(x);
        let v: f64 = dropped.iter().map(|(w, a)| a * t.phi(w)).sum();
        Ok(acc.max(v.abs()))
    })
}

fn box_samples(d: usize, range: f64, samples: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng::stream(seed, &[5]);
    (0..samples)
        .map(|_| {
            (0..d)
                .map(|_| {
                    if range > 0.0 {
                        r.random_range(-range..=range)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

/// Measures `max_x |f_Λ(x) − f(x)|` over `samples` points of `[−R, R]^d` and
/// compares it with [`truncation_bound`].
#[allow(clippy::too_many_arguments)]
pub fn worst_case_truncation_check(
    c: &ParamCircuit,
    o: &Observable,
    noise: &PauliNoiseSpec,
    truncation: usize,
    mode: FrequencyMode,
    range: f64,
    samples: usize,
    seed: u64,
) -> Result<TruncationReport> {
    let d = c.num_slots();
    if mode == FrequencyMode::OmegaSample {
        return Err(Error::invalid("truncation check applies to C and S sets"));
    }
    let table = oracle_coefficients(c, o, noise)?;
    let keep: HashSet<FrequencyVector> = enumerate_frequency_set(d, truncation, mode)?
        .members()
        .iter()
        .cloned()
        .collect();
    let measured = max_dropped(&table, &keep, &box_samples(d, range, samples, seed))?;
    let contraction = noise.contraction();
    let norm_bound = o.norm_bound();
    let bound = truncation_bound(mode, d, truncation, contraction, norm_bound, range);
    Ok(TruncationReport {
        mode,
        truncation,
        range,
        d,
        contraction,
        norm_bound,
        measured,
        bound,
        holds: measured <= bound + 1e-9,
    })
}

/// One row of [`budgeted_truncation_comparison`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BudgetComparison {
    pub budget: usize,
    pub s_truncation: usize,
    pub error_s: f64,
    pub error_c: f64,
}

/// Worst-case errors of `S(Λ)` and of the equally sized canonical prefix of
/// the full `C` ordering, for every `Λ < d`.
pub fn budgeted_truncation_comparison(
    table: &CoefficientTable,
    range: f64,
    samples: usize,
    seed: u64,
) -> Result<Vec<BudgetComparison>> {
    let d = table.dim();
    let xs = box_samples(d, range, samples, seed);
    let full_c = enumerate_frequency_set(d, d, FrequencyMode::C)?;
    (0..d)
        .map(|lam| {
            let s: HashSet<FrequencyVector> = enumerate_frequency_set(d, lam, FrequencyMode::S)?
                .members()
                .iter()
                .cloned()
                .collect();
            let budget = s.len();
            let c: HashSet<FrequencyVector> = full_c.members()[..budget].iter().cloned().collect();
            Ok(BudgetComparison {
                budget,
                s_truncation: lam,
                error_s: max_dropped(table, &s, &xs)?,
                error_c: max_dropped(table, &c, &xs)?,
            })
        })
        .collect()
}
