//! Experiment plumbing: configuration files, task dispatch and artifact
//! output with a hashed manifest.
//!
//! A run writes its tables and a `summary.json` into the output directory,
//! then a `manifest.json` listing every file with its SHA-256 digest. No
//! timestamps are recorded, so identical (config, seed) pairs reproduce
//! byte-identical directories.

mod config;
mod fold;
mod tasks;

pub use config::{
    CircuitSource, ColumnRef, DataSection, EvalSection, ExperimentConfig, FinetuneSection,
    FoldSection, FsptSection, LedgerSection, ModelKind, ObservableSource, PredictSection, Task,
    TrainSection, VqeSection,
};
pub use fold::{fold_bench, FoldRow};

use serde::Serialize;
use std::path::{Path, PathBuf};

use crate::digest::sha256_hex;
use crate::error::{Error, Result};

/// Environment variable that overrides the configured output directory.
pub const OUT_DIR_ENV: &str = "SURROGATE_OUT_DIR";
/// Environment variable that sets the worker thread count.
pub const THREADS_ENV: &str = "SURROGATE_THREADS";

/// Process exit status for an error: 2 for configuration problems, 3 for
/// guard violations, 1 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => 2,
        Error::Guard { .. } => 3,
        _ => 1,
    }
}

/// Command-line overrides of a run.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    /// `--out`; wins over everything else.
    pub out_dir: Option<PathBuf>,
    /// Value of [`OUT_DIR_ENV`]; wins over the config file.
    pub env_out_dir: Option<PathBuf>,
}

impl RunOptions {
    /// Options with the environment override read from the process.
    pub fn from_env(seed: Option<u64>, out_dir: Option<PathBuf>) -> Self {
        RunOptions {
            seed,
            out_dir,
            env_out_dir: std::env::var_os(OUT_DIR_ENV)
                .filter(|v| !v.is_empty())
                .map(PathBuf::from),
        }
    }
}

/// Output directory by precedence: `--out`, environment, config, `./out`.
pub fn resolve_output_dir(opts: &RunOptions, cfg: &ExperimentConfig) -> PathBuf {
    opts.out_dir
        .clone()
        .or_else(|| opts.env_out_dir.clone())
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

/// One file written by a run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ManifestEntry {
    /// Path relative to the output directory, with `/` separators.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Contents of `manifest.json`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Manifest {
    pub task: Task,
    pub seed: u64,
    pub version: String,
    pub config: ExperimentConfig,
    pub files: Vec<ManifestEntry>,
}

/// What a finished run produced.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub out_dir: PathBuf,
    pub manifest: Manifest,
    pub summary: serde_json::Value,
}

/// Ordered writer that hashes every file it creates.
pub(crate) struct Outputs {
    dir: PathBuf,
    files: Vec<ManifestEntry>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub(crate) fn dir(&self) -> &Path {
        &self.dir
    }

    pub(crate) fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, bytes)?;
        self.record(name, bytes);
        Ok(path)
    }

    fn record(&mut self, name: &str, bytes: &[u8]) {
        self.files.retain(|f| f.path != name);
        self.files.push(ManifestEntry {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
    }

    /// Registers a file some other routine wrote below the output directory.
    pub(crate) fn adopt(&mut self, name: &str) -> Result<()> {
        let bytes = std::fs::read(self.dir.join(name))?;
        self.record(name, &bytes);
        Ok(())
    }

    pub(crate) fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Writes a CSV table from a header and rows of display-formatted cells.
    pub(crate) fn csv(
        &mut self,
        name: &str,
        header: &[&str],
        rows: &[Vec<String>],
    ) -> Result<PathBuf> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        self.write(name, &bytes)
    }
}

/// Loads the config at `path` and runs its task.
pub fn run_config(path: &Path, opts: &RunOptions) -> Result<RunReport> {
    let cfg = ExperimentConfig::load(path)?;
    run_experiment(cfg, opts)
}

/// Runs an already loaded (and path-resolved) configuration.
pub fn run_experiment(mut cfg: ExperimentConfig, opts: &RunOptions) -> Result<RunReport> {
    if let Some(s) = opts.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let out_dir = resolve_output_dir(opts, &cfg);
    let mut out = Outputs::new(&out_dir)?;
    let mut summary = tasks::run(&cfg, &mut out)?;
    if let serde_json::Value::Object(m) = &mut summary {
        m.insert("task".into(), serde_json::json!(cfg.task));
        m.insert("seed".into(), serde_json::json!(cfg.seed));
    }
    out.json("summary.json", &summary)?;
    let manifest = Manifest {
        task: cfg.task,
        seed: cfg.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg,
        files: out.files.clone(),
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    std::fs::write(out_dir.join("manifest.json"), text)?;
    Ok(RunReport {
        out_dir,
        manifest,
        summary,
    })
}

pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}
