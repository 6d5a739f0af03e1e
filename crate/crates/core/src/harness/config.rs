//! Experiment configuration files (TOML, or JSON with the same shape).

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::backend::Backend;
use crate::circuits::{
    build_fold_benchmark, build_fspt_circuit, build_vqe_ansatz, fold_param_circuit, ParamCircuit,
};
use crate::error::{Error, Result};
use crate::features::FrequencyMode;
use crate::fspt::{BankConfig, FsptScanConfig};
use crate::simulator::{Observable, PauliNoiseSpec, PauliString};
use crate::surrogate_qs::{FeatureSpace, SamplingDescriptor};
use crate::vqe::{tfim_observable, OptimizerConfig, SurrogateSettings, TfimSpec};

/// Every task the harness can run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    GenDataCs,
    GenDataQs,
    TrainCs,
    TrainQs,
    Predict,
    VqePretrain,
    VqeFinetune,
    FsptScan,
    Eval,
    OracleCoeffs,
    FoldBench,
}

impl Task {
    pub const ALL: [Task; 11] = [
        Task::GenDataCs,
        Task::GenDataQs,
        Task::TrainCs,
        Task::TrainQs,
        Task::Predict,
        Task::VqePretrain,
        Task::VqeFinetune,
        Task::FsptScan,
        Task::Eval,
        Task::OracleCoeffs,
        Task::FoldBench,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Task::GenDataCs => "gen-data-cs",
            Task::GenDataQs => "gen-data-qs",
            Task::TrainCs => "train-cs",
            Task::TrainQs => "train-qs",
            Task::Predict => "predict",
            Task::VqePretrain => "vqe-pretrain",
            Task::VqeFinetune => "vqe-finetune",
            Task::FsptScan => "fspt-scan",
            Task::Eval => "eval",
            Task::OracleCoeffs => "oracle-coeffs",
            Task::FoldBench => "fold-bench",
        }
    }
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Task::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown task '{s}'")))
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Where the parametric circuit comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CircuitSource {
    /// JSON circuit file.
    File { path: PathBuf },
    VqeAnsatz {
        #[serde(rename = "N")]
        n: usize,
        layers: usize,
    },
    /// FSPT circuit truncated after `k` half-periods.
    Fspt {
        #[serde(rename = "N")]
        n: usize,
        k: usize,
    },
    /// The two-qubit noise-amplification circuit, folded `p` times.
    FoldBenchmark {
        #[serde(default)]
        p: usize,
    },
}

impl CircuitSource {
    pub fn build(&self) -> Result<ParamCircuit> {
        match self {
            CircuitSource::File { path } => {
                ParamCircuit::from_json(&std::fs::read_to_string(path)?)
            }
            CircuitSource::VqeAnsatz { n, layers } => build_vqe_ansatz(*n, *layers),
            CircuitSource::Fspt { n, k } => build_fspt_circuit(*n, *k),
            CircuitSource::FoldBenchmark { p } => {
                Ok(fold_param_circuit(&build_fold_benchmark(), *p))
            }
        }
    }
}

/// Where the measured observable comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservableSource {
    /// JSON list of `{coeff, pauli_string}`.
    File { path: PathBuf },
    Tfim {
        #[serde(rename = "N")]
        n: usize,
        #[serde(rename = "J")]
        j: f64,
        h: f64,
    },
    /// Inline `[coefficient, "XZI…"]` pairs.
    Terms { terms: Vec<(f64, String)> },
}

impl ObservableSource {
    pub fn build(&self) -> Result<Observable> {
        match self {
            ObservableSource::File { path } => {
                Observable::from_json(&std::fs::read_to_string(path)?)
            }
            ObservableSource::Tfim { n, j, h } => tfim_observable(&TfimSpec {
                n: *n,
                j: *j,
                h: *h,
            }),
            ObservableSource::Terms { terms } => Observable::new(
                terms
                    .iter()
                    .map(|(c, s)| Ok((*c, s.parse::<PauliString>()?)))
                    .collect::<Result<Vec<_>>>()?,
            ),
        }
    }
}

/// Dataset generation settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub n: usize,
    /// Snapshots per example (shadow datasets).
    #[serde(rename = "T", default)]
    pub t: usize,
    /// Readouts per label (scalar datasets); 0 gives exact labels.
    #[serde(default)]
    pub shots: usize,
    /// Input law of scalar datasets; uniform on `[−π, π]` per slot when absent.
    #[serde(default)]
    pub sampling: Option<SamplingDescriptor>,
}

/// Model fitting settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub dataset: PathBuf,
    /// Frequency truncation order.
    pub truncation: usize,
    /// Ridge penalty (scalar models only).
    #[serde(default = "default_ridge")]
    pub ridge: f64,
    #[serde(default = "default_mode")]
    pub mode: FrequencyMode,
    /// Sampled frequency count for `OmegaSample`.
    #[serde(default)]
    pub m: Option<usize>,
    /// Fit over the circuit's collapsed monomials instead of one coordinate per slot.
    #[serde(default)]
    pub collapse: bool,
    #[serde(default)]
    pub feature_space: FeatureSpace,
}

fn default_ridge() -> f64 {
    1e-3
}

fn default_mode() -> FrequencyMode {
    FrequencyMode::C
}

/// Model family of a saved model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Cs,
    Qs,
}

/// Batch prediction settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictSection {
    pub model: PathBuf,
    pub kind: ModelKind,
    /// Headerless CSV, one input vector per row.
    pub inputs: PathBuf,
}

/// Device fine-tuning settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FinetuneSection {
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default = "default_backend")]
    pub backend: Backend,
    /// Fine-tune on the noiseless circuit instead of the configured noise.
    #[serde(default)]
    pub noiseless: bool,
}

/// Inputs of the measurement-cost comparison that are not fixed by the run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LedgerSection {
    pub shots_per_evaluation: u64,
    pub baseline_iterations: u64,
}

/// VQE pre-training and fine-tuning settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VqeSection {
    pub tfim: TfimSpec,
    pub layers: usize,
    pub surrogate: SurrogateSettings,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    /// Backend used to measure true deviations.
    #[serde(default = "default_backend")]
    pub eval_backend: Backend,
    #[serde(default)]
    pub finetune: Option<FinetuneSection>,
    #[serde(default)]
    pub ledger: Option<LedgerSection>,
}

fn default_backend() -> Backend {
    Backend::Exact
}

/// Settings of the FSPT scan task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FsptSection {
    pub scan: FsptScanConfig,
    /// Bank to train when the scan backend is the surrogate bank.
    #[serde(default)]
    pub bank: Option<BankConfig>,
    /// Previously saved bank, used instead of training one.
    #[serde(default)]
    pub bank_dir: Option<PathBuf>,
    /// Fresh inputs on which to compare the bank with exact traces.
    #[serde(default)]
    pub holdout: usize,
}

/// One column of a CSV file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnRef {
    pub path: PathBuf,
    pub column: String,
}

/// Metric evaluation settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    pub reference: ColumnRef,
    pub prediction: ColumnRef,
}

/// Noise-amplification benchmark settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FoldSection {
    pub factors: Vec<usize>,
    pub n: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub truncation: usize,
    pub test_points: usize,
    pub test_shots: usize,
}

impl Default for FoldSection {
    fn default() -> Self {
        FoldSection {
            factors: vec![1, 4, 8, 16],
            n: 50,
            t: 1000,
            truncation: 1,
            test_points: 50,
            test_shots: 20_000,
        }
    }
}

/// A complete experiment description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Task,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub noise: PauliNoiseSpec,
    #[serde(default)]
    pub circuit: Option<CircuitSource>,
    #[serde(default)]
    pub observable: Option<ObservableSource>,
    #[serde(default)]
    pub data: Option<DataSection>,
    #[serde(default)]
    pub train: Option<TrainSection>,
    #[serde(default)]
    pub predict: Option<PredictSection>,
    #[serde(default)]
    pub vqe: Option<VqeSection>,
    #[serde(default)]
    pub fspt: Option<FsptSection>,
    #[serde(default)]
    pub eval: Option<EvalSection>,
    #[serde(default)]
    pub fold: Option<FoldSection>,
}

pub(crate) fn section<'a, T>(s: &'a Option<T>, name: &str, task: Task) -> Result<&'a T> {
    s.as_ref()
        .ok_or_else(|| Error::Config(format!("task {task} needs a [{name}] section")))
}

impl ExperimentConfig {
    /// Parses TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
        } else {
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
        }
    }

    /// Reads a config file; relative paths inside it are resolved against
    /// its directory and must exist.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        cfg.validate()?;
        Ok(cfg)
    }

    fn paths_mut(&mut self) -> Vec<&mut PathBuf> {
        let mut out = Vec::new();
        if let Some(CircuitSource::File { path }) = &mut self.circuit {
            out.push(path);
        }
        if let Some(ObservableSource::File { path }) = &mut self.observable {
            out.push(path);
        }
        if let Some(t) = &mut self.train {
            out.push(&mut t.dataset);
        }
        if let Some(p) = &mut self.predict {
            out.push(&mut p.model);
            out.push(&mut p.inputs);
        }
        if let Some(e) = &mut self.eval {
            out.push(&mut e.reference.path);
            out.push(&mut e.prediction.path);
        }
        if let Some(f) = &mut self.fspt {
            if let Some(d) = &mut f.bank_dir {
                out.push(d);
            }
        }
        out
    }

    /// Makes every referenced path (and a relative output directory) absolute
    /// with respect to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in self.paths_mut() {
            fix(p);
        }
        if let Some(o) = &mut self.output_dir {
            fix(o);
        }
    }

    /// Checks that every section the task needs is present and every
    /// referenced file exists.
    pub fn validate(&mut self) -> Result<()> {
        let t = self.task;
        self.noise
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        match t {
            Task::GenDataCs => {
                section(&self.circuit, "circuit", t)?;
                section(&self.data, "data", t)?;
            }
            Task::GenDataQs | Task::OracleCoeffs => {
                section(&self.circuit, "circuit", t)?;
                section(&self.observable, "observable", t)?;
                if t == Task::GenDataQs {
                    section(&self.data, "data", t)?;
                }
            }
            Task::TrainCs => {
                section(&self.train, "train", t)?;
            }
            Task::TrainQs => {
                let tr = section(&self.train, "train", t)?;
                if tr.collapse {
                    section(&self.circuit, "circuit", t)?;
                }
            }
            Task::Predict => {
                let p = section(&self.predict, "predict", t)?;
                if p.kind == ModelKind::Cs {
                    section(&self.observable, "observable", t)?;
                }
            }
            Task::VqePretrain | Task::VqeFinetune => {
                let v = section(&self.vqe, "vqe", t)?;
                if t == Task::VqeFinetune && v.finetune.is_none() {
                    return Err(Error::Config(
                        "vqe-finetune needs a [vqe.finetune] section".into(),
                    ));
                }
            }
            Task::FsptScan => {
                let f = section(&self.fspt, "fspt", t)?;
                f.scan
                    .validate()
                    .map_err(|e| Error::Config(e.to_string()))?;
                if f.scan.backend == crate::fspt::FsptBackend::SurrogateBank
                    && f.bank.is_none()
                    && f.bank_dir.is_none()
                {
                    return Err(Error::Config(
                        "a surrogate-bank scan needs [fspt.bank] or fspt.bank_dir".into(),
                    ));
                }
            }
            Task::Eval => {
                section(&self.eval, "eval", t)?;
            }
            Task::FoldBench => {
                if self.fold.is_none() {
                    self.fold = Some(FoldSection::default());
                }
            }
        }
        for p in self.paths_mut() {
            if !p.exists() {
                return Err(Error::Config(format!(
                    "referenced file {} does not exist",
                    p.display()
                )));
            }
        }
        Ok(())
    }
}
