//! Floquet symmetry-protected phase workflow.
//!
//! Magnetization traces are recorded at every half-period boundary of the
//! Floquet circuit from [`build_fspt_circuit`]. A trace is a matrix with one
//! row per qubit and one column per boundary `k = 1..n_k`. Traces come from
//! the simulator (exact or shot-sampled) or from a [`SurrogateBank`] holding
//! one fitted ridge model per `(qubit, k)` pair.
//!
//! Spectra use single-sided RMS amplitudes on the axis `ω/ω₀ = 2j/n_k`, so a
//! series that flips sign every two samples peaks at `ω/ω₀ = 0.5` with unit
//! height, and the squared amplitudes sum to the mean square of the series.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::circuits::{build_fspt_circuit, fspt_boundaries, ConcreteCircuit, ConcreteGate};
use crate::error::{check_len, Error, Result};
use crate::features::{FrequencyMode, FrequencySetDescriptor};
use crate::rng;
use crate::simulator::{
    apply_readout_flips, evolve_trajectory, gate_noise_density, DensityMatrix, OutcomeSampler,
    PauliNoiseSpec, StateVector,
};
use crate::surrogate_qs::{
    fit_qs_described, CollapseSpec, CoordinateDistribution, ExampleQS, FeatureSpace,
    SamplingDescriptor, Solver, SurrogateQS, SurrogateQsRecord, TrainingDatasetQS,
};

/// `⟨Z_i⟩` after half-period `k`, stored as `trace[i][k - 1]`.
pub type Trace = Vec<Vec<f64>>;

/// Where magnetizations come from.
#[derive(Clone, Copy, Debug)]
pub enum TraceSource<'a> {
    /// Statevector when noiseless, density matrix otherwise.
    Exact,
    /// `shots` Z-basis readouts per boundary, each shot from its own noise
    /// trajectory.
    Trajectory {
        shots: usize,
    },
    Bank(&'a SurrogateBank),
}

/// Backend tag of a scan configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FsptBackend {
    Exact,
    Trajectory { shots: usize },
    SurrogateBank,
}

/// Drive-imperfection values to scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DeltaGrid {
    Values {
        values: Vec<f64>,
    },
    /// `count` evenly spaced points including both ends.
    Range {
        lo: f64,
        hi: f64,
        count: usize,
    },
}

impl DeltaGrid {
    pub fn points(&self) -> Vec<f64> {
        match self {
            DeltaGrid::Values { values } => values.clone(),
            DeltaGrid::Range { lo, hi, count } => match count {
                0 => Vec::new(),
                1 => vec![*lo],
                c => (0..*c)
                    .map(|i| lo + (hi - lo) * i as f64 / (c - 1) as f64)
                    .collect(),
            },
        }
    }
}

impl Default for DeltaGrid {
    fn default() -> Self {
        DeltaGrid::Range {
            lo: 0.01,
            hi: 0.8,
            count: 40,
        }
    }
}

fn default_disorder() -> CoordinateDistribution {
    CoordinateDistribution::Uniform { lo: 0.0, hi: 2.0 }
}

fn default_fraction() -> f64 {
    0.9
}

/// Settings of a subharmonic-variance scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FsptScanConfig {
    #[serde(rename = "N")]
    pub n: usize,
    pub n_k: usize,
    #[serde(default)]
    pub deltas: DeltaGrid,
    /// Disorder draws per grid point.
    pub disorder_samples: usize,
    /// Law of each bulk coupling.
    #[serde(default = "default_disorder")]
    pub disorder: CoordinateDistribution,
    pub backend: FsptBackend,
    /// Variance level, relative to the maximum, that delimits the interval.
    #[serde(default = "default_fraction")]
    pub width_fraction: f64,
    #[serde(default)]
    pub noise: PauliNoiseSpec,
}

impl FsptScanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::invalid("FSPT scans need N >= 3"));
        }
        if self.n_k < 4 {
            return Err(Error::invalid(
                "n_k must be at least 4 for a Fourier analysis",
            ));
        }
        if self.disorder_samples < 2 {
            return Err(Error::invalid(
                "at least 2 disorder samples are needed for a variance",
            ));
        }
        if self.deltas.points().len() < 3 {
            return Err(Error::invalid("the delta grid needs at least 3 points"));
        }
        if !(self.width_fraction > 0.0 && self.width_fraction < 1.0) {
            return Err(Error::invalid("width fraction must lie in (0, 1)"));
        }
        SamplingDescriptor::new(vec![self.disorder.clone()])?;
        self.noise.validate()
    }
}

/// Circuit parameters `(δ, J_2, …, J_{N−1})`.
fn parameters(n: usize, delta: f64, couplings: &[f64]) -> Result<Vec<f64>> {
    check_len("coupling count", n - 2, couplings.len())?;
    let mut x = Vec::with_capacity(n - 1);
    x.push(delta);
    x.extend_from_slice(couplings);
    Ok(x)
}

fn bound_circuit(n: usize, n_k: usize, x: &[f64]) -> Result<(ConcreteCircuit, Vec<usize>)> {
    let circuit = build_fspt_circuit(n, n_k)?;
    let c = circuit.bind(&x[..circuit.num_slots()])?;
    Ok((c, fspt_boundaries(n, n_k)))
}

/// Gate ranges between consecutive boundaries.
fn segments<'c>(gates: &'c [ConcreteGate], boundaries: &[usize]) -> Vec<&'c [ConcreteGate]> {
    let mut start = 0;
    boundaries
        .iter()
        .map(|&end| {
            let s = &gates[start..end];
            start = end;
            s
        })
        .collect()
}

fn z_from_probabilities(p: impl Iterator<Item = f64>, n: usize) -> Vec<f64> {
    let mut z = vec![0.0; n];
    for (b, pb) in p.enumerate() {
        for (q, zq) in z.iter_mut().enumerate() {
            if (b >> q) & 1 == 0 {
                *zq += pb;
            } else {
                *zq -= pb;
            }
        }
    }
    z
}

/// Sets `trace[i][k] = column[i]`.
fn put_column(trace: &mut Trace, k: usize, column: &[f64]) {
    for (row, v) in trace.iter_mut().zip(column) {
        row[k] = *v;
    }
}

fn exact_trace(c: &ConcreteCircuit, boundaries: &[usize], noise: &PauliNoiseSpec) -> Result<Trace> {
    let n = c.num_qubits;
    let readout = 1.0 - 2.0 * noise.p_e;
    let mut trace = vec![vec![0.0; boundaries.len()]; n];
    if noise.has_gate_noise() {
        let mut rho = DensityMatrix::initial(c.initial_state, n)?;
        for (k, seg) in segments(&c.gates, boundaries).into_iter().enumerate() {
            for g in seg {
                rho.apply_gate(g);
                gate_noise_density(&mut rho, g, noise)?;
            }
            let z = z_from_probabilities((0..rho.dim()).map(|b| rho.entry(b, b).re), n);
            put_column(
                &mut trace,
                k,
                &z.iter().map(|v| v * readout).collect::<Vec<_>>(),
            );
        }
    } else {
        let mut sv = StateVector::initial(c.initial_state, n)?;
        for (k, seg) in segments(&c.gates, boundaries).into_iter().enumerate() {
            for g in seg {
                sv.apply_gate(g);
            }
            let z = z_from_probabilities(sv.probabilities().into_iter(), n);
            put_column(
                &mut trace,
                k,
                &z.iter().map(|v| v * readout).collect::<Vec<_>>(),
            );
        }
    }
    Ok(trace)
}

fn add_outcome(acc: &mut [f64], outcome: usize) {
    for (q, a) in acc.iter_mut().enumerate() {
        *a += if (outcome >> q) & 1 == 0 { 1.0 } else { -1.0 };
    }
}

fn sampled_trace(
    c: &ConcreteCircuit,
    boundaries: &[usize],
    noise: &PauliNoiseSpec,
    shots: usize,
    seed: u64,
) -> Result<Trace> {
    if shots == 0 {
        return Err(Error::invalid("shot count must be at least 1"));
    }
    let n = c.num_qubits;
    let n_k = boundaries.len();
    // sums[k][i] accumulates ±1 readouts.
    let sums: Vec<Vec<f64>> = if noise.has_gate_noise() {
        (0..shots as u64)
            .into_par_iter()
            .map(|s| {
                let mut r = rng::stream(seed, &[s]);
                let mut sv = StateVector::initial(c.initial_state, n)?;
                let mut local = vec![vec![0.0; n]; n_k];
                for (k, seg) in segments(&c.gates, boundaries).into_iter().enumerate() {
                    evolve_trajectory(&mut sv, seg, noise, &mut r)?;
                    let o = OutcomeSampler::new(&sv).sample(&mut r);
                    add_outcome(&mut local[k], apply_readout_flips(o, n, noise.p_e, &mut r));
                }
                Ok::<_, Error>(local)
            })
            .try_reduce(
                || vec![vec![0.0; n]; n_k],
                |mut a, b| {
                    for (ra, rb) in a.iter_mut().zip(&b) {
                        for (x, y) in ra.iter_mut().zip(rb) {
                            *x += y;
                        }
                    }
                    Ok(a)
                },
            )?
    } else {
        let mut sv = StateVector::initial(c.initial_state, n)?;
        let mut out = vec![vec![0.0; n]; n_k];
        for (k, seg) in segments(&c.gates, boundaries).into_iter().enumerate() {
            for g in seg {
                sv.apply_gate(g);
            }
            let sampler = OutcomeSampler::new(&sv);
            let mut r = rng::stream(seed, &[k as u64]);
            for _ in 0..shots {
                let o = sampler.sample(&mut r);
                add_outcome(&mut out[k], apply_readout_flips(o, n, noise.p_e, &mut r));
            }
        }
        out
    };
    let mut trace = vec![vec![0.0; n_k]; n];
    for (k, col) in sums.iter().enumerate() {
        put_column(
            &mut trace,
            k,
            &col.iter().map(|v| v / shots as f64).collect::<Vec<_>>(),
        );
    }
    Ok(trace)
}

/// `⟨Z_i⟩` at every half-period boundary for drive imperfection `delta` and
/// bulk couplings `couplings` (`N − 2` values).
pub fn magnetization_trace(
    n: usize,
    delta: f64,
    couplings: &[f64],
    n_k: usize,
    noise: &PauliNoiseSpec,
    source: TraceSource<'_>,
    seed: u64,
) -> Result<Trace> {
    if n_k == 0 {
        return Err(Error::invalid("n_k must be at least 1"));
    }
    noise.validate()?;
    let x = parameters(n, delta, couplings)?;
    match source {
        TraceSource::Exact => {
            let (c, b) = bound_circuit(n, n_k, &x)?;
            exact_trace(&c, &b, noise)
        }
        TraceSource::Trajectory { shots } => {
            let (c, b) = bound_circuit(n, n_k, &x)?;
            sampled_trace(&c, &b, noise, shots, seed)
        }
        TraceSource::Bank(bank) => {
            if bank.n != n || bank.n_k < n_k {
                return Err(Error::invalid(format!(
                    "bank covers N={} and n_k={}, requested N={n} and n_k={n_k}",
                    bank.n, bank.n_k
                )));
            }
            (0..n)
                .map(|i| (1..=n_k).map(|k| bank.predict(i, k, &x)).collect())
                .collect()
        }
    }
}

/// Elementwise disorder mean with its standard error.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AveragedTrace {
    pub mean: Trace,
    pub std_error: Trace,
}

pub fn disorder_average(traces: &[Trace]) -> Result<AveragedTrace> {
    let first = traces
        .first()
        .ok_or_else(|| Error::invalid("no traces to average"))?;
    for t in traces {
        check_len("trace rows", first.len(), t.len())?;
        for (a, b) in first.iter().zip(t) {
            check_len("trace columns", a.len(), b.len())?;
        }
    }
    let s = traces.len() as f64;
    let mut mean = first.iter().map(|r| vec![0.0; r.len()]).collect::<Trace>();
    let mut std_error = mean.clone();
    for (i, row) in first.iter().enumerate() {
        for k in 0..row.len() {
            let m = traces.iter().map(|t| t[i][k]).sum::<f64>() / s;
            mean[i][k] = m;
            if traces.len() > 1 {
                let var = traces.iter().map(|t| (t[i][k] - m).powi(2)).sum::<f64>() / (s - 1.0);
                std_error[i][k] = (var / s).sqrt();
            }
        }
    }
    Ok(AveragedTrace { mean, std_error })
}

/// Single-sided amplitude spectrum.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Spectrum {
    /// `ω/ω₀` of each bin.
    pub frequency: Vec<f64>,
    pub amplitude: Vec<f64>,
}

/// Spectrum of a half-period-sampled series of length `n_k ≥ 4`.
pub fn fourier_spectrum(series: &[f64]) -> Result<Spectrum> {
    let n = series.len();
    if n < 4 {
        return Err(Error::invalid(format!(
            "series of length {n} is too short; need at least 4"
        )));
    }
    let mut buf: Vec<Complex<f64>> = series.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let nf = n as f64;
    let bins = n / 2 + 1;
    let amplitude = (0..bins)
        .map(|j| {
            let edge = j == 0 || (n.is_multiple_of(2) && j == n / 2);
            let scale = if edge { 1.0 } else { std::f64::consts::SQRT_2 };
            scale * buf[j].norm() / nf
        })
        .collect();
    let frequency = (0..bins).map(|j| 2.0 * j as f64 / nf).collect();
    Ok(Spectrum {
        frequency,
        amplitude,
    })
}

/// Spectral amplitude at the bin nearest `ω/ω₀ = 0.5`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SubharmonicPeak {
    pub amplitude: f64,
    pub bin: usize,
    pub frequency: f64,
    /// `frequency − 0.5`; zero when `n_k` is a multiple of 4.
    pub offset: f64,
}

pub fn subharmonic_peak(series: &[f64]) -> Result<SubharmonicPeak> {
    let spec = fourier_spectrum(series)?;
    let n = series.len();
    let bin = ((n as f64) / 4.0).round() as usize;
    let frequency = spec.frequency[bin];
    Ok(SubharmonicPeak {
        amplitude: spec.amplitude[bin],
        bin,
        frequency,
        offset: frequency - 0.5,
    })
}

/// One `(δ, disorder draw)` cell of a scan.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScanRow {
    pub delta: f64,
    pub sample: usize,
    pub peak: f64,
}

/// Output of [`variance_scan`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanReport {
    pub deltas: Vec<f64>,
    pub rows: Vec<ScanRow>,
    /// Sample variance of the boundary peak at each grid point.
    pub variance: Vec<f64>,
    pub delta_star: f64,
    /// Contiguous range around `delta_star` where the variance stays above
    /// `width_fraction` times its maximum.
    pub interval: (f64, f64),
    /// Grid neighbours of `delta_star`.
    pub neighbor_interval: (f64, f64),
}

/// Bulk couplings of draw `(l, s)`.
fn draw_couplings(cfg: &FsptScanConfig, l: usize, s: usize, seed: u64) -> Vec<f64> {
    let sampler = SamplingDescriptor {
        coordinates: vec![cfg.disorder.clone(); cfg.n - 2],
    };
    sampler.sample(&mut rng::stream(seed, &[7, l as u64, s as u64]))
}

/// Variance of the qubit-0 subharmonic peak across disorder draws, for every
/// point of the δ grid.
pub fn variance_scan(
    cfg: &FsptScanConfig,
    bank: Option<&SurrogateBank>,
    seed: u64,
) -> Result<ScanReport> {
    cfg.validate()?;
    let source = match (cfg.backend, bank) {
        (FsptBackend::Exact, _) => TraceSource::Exact,
        (FsptBackend::Trajectory { shots }, _) => TraceSource::Trajectory { shots },
        (FsptBackend::SurrogateBank, Some(b)) => TraceSource::Bank(b),
        (FsptBackend::SurrogateBank, None) => {
            return Err(Error::Config(
                "surrogate-bank scan requires a trained bank".into(),
            ))
        }
    };
    let deltas = cfg.deltas.points();
    let s_count = cfg.disorder_samples;
    let cells: Vec<(usize, usize)> = (0..deltas.len())
        .flat_map(|l| (0..s_count).map(move |s| (l, s)))
        .collect();
    let peaks = cells
        .par_iter()
        .map(|&(l, s)| {
            let couplings = draw_couplings(cfg, l, s, seed);
            let series = match source {
                TraceSource::Bank(b) => {
                    let x = parameters(cfg.n, deltas[l], &couplings)?;
                    b.series(0, &x)?
                }
                _ => {
                    let t = magnetization_trace(
                        cfg.n,
                        deltas[l],
                        &couplings,
                        cfg.n_k,
                        &cfg.noise,
                        source,
                        rng::derive_seed(seed, &[8, l as u64, s as u64]),
                    )?;
                    t.into_iter().next().expect("at least one qubit")
                }
            };
            Ok(subharmonic_peak(&series[..cfg.n_k])?.amplitude)
        })
        .collect::<Result<Vec<f64>>>()?;
    let rows: Vec<ScanRow> = cells
        .iter()
        .zip(&peaks)
        .map(|(&(l, s), &peak)| ScanRow {
            delta: deltas[l],
            sample: s,
            peak,
        })
        .collect();
    let variance: Vec<f64> = peaks
        .chunks(s_count)
        .map(|c| {
            let m = c.iter().sum::<f64>() / s_count as f64;
            c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (s_count - 1) as f64
        })
        .collect();
    let (interval, neighbor_interval, star) =
        critical_region(&deltas, &variance, cfg.width_fraction);
    Ok(ScanReport {
        delta_star: deltas[star],
        deltas,
        rows,
        variance,
        interval,
        neighbor_interval,
    })
}

/// `(fraction interval, neighbour interval, argmax index)` of a variance curve.
pub fn critical_region(
    deltas: &[f64],
    variance: &[f64],
    fraction: f64,
) -> ((f64, f64), (f64, f64), usize) {
    let star = variance
        .iter()
        .enumerate()
        .fold(0, |best, (i, v)| if *v > variance[best] { i } else { best });
    let level = fraction * variance[star];
    let mut lo = star;
    while lo > 0 && variance[lo - 1] >= level {
        lo -= 1;
    }
    let mut hi = star;
    while hi + 1 < variance.len() && variance[hi + 1] >= level {
        hi += 1;
    }
    let neighbors = (
        deltas[star.saturating_sub(1)],
        deltas[(star + 1).min(deltas.len() - 1)],
    );
    ((deltas[lo], deltas[hi]), neighbors, star)
}

// ---------------------------------------------------------------------------
// Surrogate bank

/// One fitted model per `(qubit, half-period)` pair.
#[derive(Clone, Debug)]
pub struct SurrogateBank {
    n: usize,
    n_k: usize,
    /// Indexed by `i * n_k + (k − 1)`.
    models: Vec<Arc<SurrogateQS>>,
}

/// On-disk listing of a bank's model files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BankManifest {
    #[serde(rename = "N")]
    pub n: usize,
    pub n_k: usize,
    /// `files[i][k − 1]`, relative to the manifest directory.
    pub files: Vec<Vec<String>>,
}

impl SurrogateBank {
    pub fn new(n: usize, n_k: usize, models: Vec<SurrogateQS>) -> Result<Self> {
        check_len("bank size", n * n_k, models.len())?;
        Ok(SurrogateBank {
            n,
            n_k,
            models: models.into_iter().map(Arc::new).collect(),
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn half_periods(&self) -> usize {
        self.n_k
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    /// Model of qubit `i` (0-based) at half-period `k` (1-based).
    pub fn model(&self, i: usize, k: usize) -> Result<&SurrogateQS> {
        if i >= self.n || k == 0 || k > self.n_k {
            return Err(Error::invalid(format!(
                "no model for qubit {i}, half-period {k}"
            )));
        }
        Ok(&self.models[i * self.n_k + k - 1])
    }

    /// Prediction from the full parameter vector `(δ, J_2, …)`; the model
    /// reads the prefix its circuit depends on.
    pub fn predict(&self, i: usize, k: usize, x: &[f64]) -> Result<f64> {
        let m = self.model(i, k)?;
        let d = m.input_dim();
        if x.len() < d {
            return Err(Error::dim("bank input", d, x.len()));
        }
        m.predict(&x[..d])
    }

    /// Predicted series of qubit `i` over all half-periods.
    pub fn series(&self, i: usize, x: &[f64]) -> Result<Vec<f64>> {
        (1..=self.n_k).map(|k| self.predict(i, k, x)).collect()
    }

    pub fn save(&self, dir: &Path) -> Result<BankManifest> {
        fs::create_dir_all(dir)?;
        let mut files = vec![Vec::with_capacity(self.n_k); self.n];
        for (i, row) in files.iter_mut().enumerate() {
            for k in 1..=self.n_k {
                let name = format!("model_q{i}_k{k}.json");
                fs::write(dir.join(&name), self.model(i, k)?.to_json()?)?;
                row.push(name);
            }
        }
        let manifest = BankManifest {
            n: self.n,
            n_k: self.n_k,
            files,
        };
        fs::write(
            dir.join("bank.json"),
            serde_json::to_string_pretty(&manifest)?,
        )?;
        Ok(manifest)
    }

    /// Loads the bank whose manifest is `dir/bank.json`.
    pub fn load(dir: &Path) -> Result<Self> {
        let manifest: BankManifest =
            serde_json::from_str(&fs::read_to_string(dir.join("bank.json"))?)?;
        check_len("bank manifest rows", manifest.n, manifest.files.len())?;
        let mut models = Vec::with_capacity(manifest.n * manifest.n_k);
        for row in &manifest.files {
            check_len("bank manifest columns", manifest.n_k, row.len())?;
            for name in row {
                let rec: SurrogateQsRecord =
                    serde_json::from_str(&fs::read_to_string(dir.join(name))?)?;
                models.push(SurrogateQS::from_record(&rec)?);
            }
        }
        Self::new(manifest.n, manifest.n_k, models)
    }
}

fn default_delta_law() -> CoordinateDistribution {
    CoordinateDistribution::Beta {
        alpha: 0.9,
        beta: 2.0,
        lo: 0.0,
        hi: 1.0,
    }
}

/// Settings of [`train_surrogate_bank`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BankConfig {
    #[serde(rename = "N")]
    pub n: usize,
    pub n_k: usize,
    /// Training inputs shared by every model.
    pub samples: usize,
    /// Readouts per label; 0 for exact labels.
    #[serde(default)]
    pub shots: usize,
    #[serde(rename = "lambda_trunc")]
    pub truncation: usize,
    /// Frequencies drawn per half-period; the whole set is used when smaller.
    pub features: usize,
    pub lambda: f64,
    #[serde(default = "default_delta_law")]
    pub delta_law: CoordinateDistribution,
    #[serde(default = "default_disorder")]
    pub coupling_law: CoordinateDistribution,
}

impl BankConfig {
    /// Input distribution over `(δ, J_2, …, J_{N−1})`.
    pub fn sampling(&self) -> Result<SamplingDescriptor> {
        let mut coords = vec![self.delta_law.clone()];
        coords.extend(std::iter::repeat_n(
            self.coupling_law.clone(),
            self.n.saturating_sub(2),
        ));
        SamplingDescriptor::new(coords)
    }
}

/// Feature description for the circuit truncated at half-period `k`: up to
/// `cfg.features` collapsed monomials drawn from the image of `C(Λ)`.
fn feature_space(
    cfg: &BankConfig,
    k: usize,
    seed: u64,
) -> Result<(FrequencySetDescriptor, CollapseSpec)> {
    let spec =
        CollapseSpec::from_circuit(&build_fspt_circuit(cfg.n, k)?)?.with_space(FeatureSpace::Image);
    let d = spec.expanded_dim();
    let desc = FrequencySetDescriptor {
        mode: FrequencyMode::OmegaSample,
        d,
        truncation: cfg.truncation.min(d),
        m: Some(cfg.features),
        seed: Some(rng::derive_seed(seed, &[6, k as u64])),
    };
    Ok((desc, spec))
}

/// Magnetization traces for a batch of parameter vectors.
pub fn label_traces(
    n: usize,
    n_k: usize,
    xs: &[Vec<f64>],
    noise: &PauliNoiseSpec,
    shots: usize,
    seed: u64,
) -> Result<Vec<Trace>> {
    xs.par_iter()
        .enumerate()
        .map(|(j, x)| {
            let source = if shots == 0 {
                TraceSource::Exact
            } else {
                TraceSource::Trajectory { shots }
            };
            magnetization_trace(
                n,
                x[0],
                &x[1..],
                n_k,
                noise,
                source,
                rng::derive_seed(seed, &[5, j as u64]),
            )
        })
        .collect()
}

/// Samples `cfg.samples` inputs, labels them with one simulation each, and
/// fits every `(qubit, half-period)` model on the shared inputs.
pub fn train_surrogate_bank(
    cfg: &BankConfig,
    noise: &PauliNoiseSpec,
    seed: u64,
) -> Result<SurrogateBank> {
    if cfg.n < 3 || cfg.n_k == 0 || cfg.samples == 0 || cfg.features == 0 {
        return Err(Error::invalid(
            "bank needs N >= 3, n_k >= 1, samples >= 1 and features >= 1",
        ));
    }
    let sampling = cfg.sampling()?;
    let xs = sampling.sample_n(cfg.samples, seed);
    let traces = label_traces(cfg.n, cfg.n_k, &xs, noise, cfg.shots, seed)?;
    let spaces = (1..=cfg.n_k)
        .into_par_iter()
        .map(|k| feature_space(cfg, k, seed))
        .collect::<Result<Vec<_>>>()?;
    let models = (0..cfg.n * cfg.n_k)
        .into_par_iter()
        .map(|idx| {
            let (i, k) = (idx / cfg.n_k, idx % cfg.n_k + 1);
            let (desc, spec) = &spaces[k - 1];
            let examples = xs
                .iter()
                .zip(&traces)
                .map(|(x, t)| ExampleQS {
                    x: x[..spec.base_dim].to_vec(),
                    y: t[i][k - 1],
                    shots: cfg.shots,
                })
                .collect();
            let ds = TrainingDatasetQS::new(examples, None)?;
            fit_qs_described(&ds, desc, cfg.lambda, Some(spec), Solver::Auto)
        })
        .collect::<Result<Vec<_>>>()?;
    SurrogateBank::new(cfg.n, cfg.n_k, models)
}

/// Mean squared difference between bank predictions and `reference` traces
/// over every qubit and half-period.
pub fn bank_mse(bank: &SurrogateBank, xs: &[Vec<f64>], reference: &[Trace]) -> Result<f64> {
    check_len("reference traces", xs.len(), reference.len())?;
    let mut acc = 0.0;
    let mut count = 0usize;
    for (x, t) in xs.iter().zip(reference) {
        for (i, row) in t.iter().enumerate().take(bank.n) {
            for (k, y) in row.iter().enumerate().take(bank.n_k) {
                acc += (bank.predict(i, k + 1, x)? - y).powi(2);
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::invalid("no reference values"));
    }
    Ok(acc / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_pulse_flips_every_qubit() {
        let t = magnetization_trace(
            4,
            0.0,
            &[0.3, 1.1],
            4,
            &PauliNoiseSpec::noiseless(),
            TraceSource::Exact,
            0,
        )
        .unwrap();
        for row in &t {
            assert!((row[0] + 1.0).abs() < 1e-12);
        }
        // Edge spins are untouched by the coupling layer.
        for row in [&t[0], &t[3]] {
            assert!((row[1] + 1.0).abs() < 1e-12);
            assert!((row[2] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn alternating_series_has_unit_subharmonic_peak() {
        let series: Vec<f64> = (0..40)
            .map(|k| if (k / 2) % 2 == 0 { -1.0 } else { 1.0 })
            .collect();
        let p = subharmonic_peak(&series).unwrap();
        assert!((p.amplitude - 1.0).abs() < 1e-12);
        assert_eq!((p.bin, p.offset), (10, 0.0));
        let spec = fourier_spectrum(&series).unwrap();
        let best =
            spec.amplitude
                .iter()
                .enumerate()
                .fold(0, |b, (i, v)| if *v > spec.amplitude[b] { i } else { b });
        assert_eq!(spec.frequency[best], 0.5);
        assert_eq!(subharmonic_peak(&[0.0; 8]).unwrap().amplitude, 0.0);
        let odd = subharmonic_peak(&[1.0; 10]).unwrap();
        assert!(
            (odd.offset - (0.4 - 0.5)).abs() < 1e-12 || (odd.offset - (0.6 - 0.5)).abs() < 1e-12
        );
    }

    #[test]
    fn constant_series_is_all_dc() {
        let s = fourier_spectrum(&[0.7; 12]).unwrap();
        assert!((s.amplitude[0] - 0.7).abs() < 1e-12);
        assert!(s.amplitude[1..].iter().all(|a| a.abs() < 1e-12));
        assert_eq!(*s.frequency.last().unwrap(), 1.0);
        assert!(fourier_spectrum(&[1.0; 3]).is_err());
    }

    proptest! {
        #[test]
        fn parseval(series in proptest::collection::vec(-1.0f64..1.0, 4..64)) {
            let s = fourier_spectrum(&series).unwrap();
            let energy: f64 = s.amplitude.iter().map(|a| a * a).sum();
            let mean_sq = series.iter().map(|v| v * v).sum::<f64>() / series.len() as f64;
            prop_assert!((energy - mean_sq).abs() < 1e-10);
        }
    }

    #[test]
    fn disorder_average_examples() {
        let a: Trace = vec![vec![0.5, -0.2], vec![1.0, 0.0]];
        let neg: Trace = a.iter().map(|r| r.iter().map(|v| -v).collect()).collect();
        let one = disorder_average(std::slice::from_ref(&a)).unwrap();
        assert_eq!(one.mean, a);
        let zero = disorder_average(&[a.clone(), neg]).unwrap();
        assert!(zero.mean.iter().flatten().all(|v| *v == 0.0));
        assert!((zero.std_error[0][0] - 0.5).abs() < 1e-12);
        assert!(disorder_average(&[]).is_err());
    }

    #[test]
    fn sampled_traces_match_exact() {
        let noise = PauliNoiseSpec::symmetric(0.01, 0.005, 0.01);
        let exact =
            magnetization_trace(4, 0.2, &[0.4, 1.3], 6, &noise, TraceSource::Exact, 0).unwrap();
        let shots = 4000;
        let sampled = magnetization_trace(
            4,
            0.2,
            &[0.4, 1.3],
            6,
            &noise,
            TraceSource::Trajectory { shots },
            3,
        )
        .unwrap();
        for (re, rs) in exact.iter().zip(&sampled) {
            for (e, s) in re.iter().zip(rs) {
                let sigma = ((1.0 - e * e).max(0.0) / shots as f64).sqrt();
                assert!((e - s).abs() < 5.0 * sigma + 1e-3, "{e} vs {s}");
            }
        }
    }

    #[test]
    fn critical_region_brackets_interior_max() {
        let deltas = [0.1, 0.2, 0.3, 0.4, 0.5];
        let var = [0.1, 0.5, 1.0, 0.95, 0.2];
        let (interval, neighbors, star) = critical_region(&deltas, &var, 0.9);
        assert_eq!(star, 2);
        assert_eq!(interval, (0.3, 0.4));
        assert_eq!(neighbors, (0.2, 0.4));
    }

    #[test]
    fn small_bank_round_trip_and_accuracy() {
        let cfg = BankConfig {
            n: 3,
            n_k: 4,
            samples: 120,
            shots: 0,
            truncation: 4,
            features: 200,
            lambda: 1e-6,
            delta_law: default_delta_law(),
            coupling_law: default_disorder(),
        };
        let noise = PauliNoiseSpec::noiseless();
        let bank = train_surrogate_bank(&cfg, &noise, 11).unwrap();
        assert_eq!(bank.len(), 12);
        let xs = cfg.sampling().unwrap().sample_n(30, 99);
        let refs = label_traces(3, 4, &xs, &noise, 0, 0).unwrap();
        let mse = bank_mse(&bank, &xs, &refs).unwrap();
        assert!(mse < 1e-3, "bank mse {mse}");
        let dir = tempfile::tempdir().unwrap();
        bank.save(dir.path()).unwrap();
        let back = SurrogateBank::load(dir.path()).unwrap();
        assert_eq!(
            back.predict(1, 3, &xs[0]).unwrap(),
            bank.predict(1, 3, &xs[0]).unwrap()
        );
    }

    #[test]
    fn scan_is_deterministic() {
        let cfg = FsptScanConfig {
            n: 3,
            n_k: 8,
            deltas: DeltaGrid::Range {
                lo: 0.05,
                hi: 0.6,
                count: 4,
            },
            disorder_samples: 3,
            disorder: default_disorder(),
            backend: FsptBackend::Exact,
            width_fraction: 0.9,
            noise: PauliNoiseSpec::noiseless(),
        };
        let a = variance_scan(&cfg, None, 5).unwrap();
        let b = variance_scan(&cfg, None, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows.len(), 12);
        let bad = FsptScanConfig {
            backend: FsptBackend::SurrogateBank,
            ..cfg
        };
        assert!(variance_scan(&bad, None, 5).is_err());
    }
}
