//! One function per task. Each writes its tables through [`Outputs`] and
//! returns the task-specific part of `summary.json`.

use serde_json::{json, Value};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::features::{FrequencyMode, FrequencySetDescriptor};
use crate::fspt::{
    bank_mse, label_traces, train_surrogate_bank, variance_scan, FsptBackend, SurrogateBank,
};
use crate::metrics::{compute_metrics, KdeCurve};
use crate::rng;
use crate::simulator::PauliNoiseSpec;
use crate::surrogate_cs::{fit_cs, SurrogateCsFile, TrainingDatasetCS};
use crate::surrogate_qs::{
    fit_qs_described, oracle_coefficients, CollapseSpec, SamplingDescriptor, Solver, SurrogateQS,
    TrainingDatasetQS,
};
use crate::vqe::{
    finetune, normalized_deviation, shot_ledger, LedgerInputs, OptimizationResult, VqeTestbed,
};

use super::config::{section, ExperimentConfig, ModelKind, Task};
use super::{fmt_f64, fold_bench, Outputs};

pub(super) fn run(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Value> {
    match cfg.task {
        Task::GenDataCs => gen_data_cs(cfg, out),
        Task::GenDataQs => gen_data_qs(cfg, out),
        Task::TrainCs => train_cs(cfg, out),
        Task::TrainQs => train_qs(cfg, out),
        Task::Predict => predict(cfg, out),
        Task::VqePretrain | Task::VqeFinetune => vqe(cfg, out),
        Task::FsptScan => fspt_scan(cfg, out),
        Task::Eval => eval(cfg, out),
        Task::OracleCoeffs => oracle(cfg, out),
        Task::FoldBench => fold(cfg, out),
    }
}

fn gen_data_cs(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Value> {
    let c = section(&cfg.circuit, "circuit", cfg.task)?.build()?;
    let data = section(&cfg.data, "data", cfg.task)?;
    let ds = TrainingDatasetCS::generate(&c, &cfg.noise, data.n, data.t, cfg.seed)?;
    ds.write_jsonl(&out.dir().join("dataset.jsonl"))?;
    out.adopt("dataset.jsonl")?;
    out.write("circuit.json", c.to_json()?.as_bytes())?;
    Ok(json!({
        "n": ds.len(),
        "T": data.t,
        "d": ds.dim(),
        "num_qubits": c.num_qubits(),
        "circuit_hash": ds.metadata().circuit_hash,
    }))
}

fn gen_data_qs(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Value> {
    let c = section(&cfg.circuit, "circuit", cfg.task)?.build()?;
    let o = section(&cfg.observable, "observable", cfg.task)?.build()?;
    let data = section(&cfg.data, "data", cfg.task)?;
    let sampling = match &data.sampling {
        Some(s) => s.clone(),
        None => {
            SamplingDescriptor::uniform(c.num_slots(), -std::f64::consts::PI, std::f64::consts::PI)?
        }
    };
    let ds =
        TrainingDatasetQS::generate(&c, &o, &cfg.noise, &sampling, data.n, data.shots, cfg.seed)?;
    ds.write_jsonl(&out.dir().join("dataset.jsonl"))?;
    out.adopt("dataset.jsonl")?;
    Ok(json!({
        "n": ds.len(),
        "d": ds.dim(),
        "shots": data.shots,
        "label_error": ds.label_error(),
    }))
}

fn train_cs(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Value> {
    let tr = section(&cfg.train, "train", cfg.task)?;
    let ds = TrainingDatasetCS::read_jsonl(&tr.dataset)?;
    let model = fit_cs(Arc::new(ds), tr.truncation)?;
    let file = SurrogateCsFile {
        dataset: tr.dataset.display().to_string(),
        truncation: tr.truncation,
    };
    out.json("model.json", &file)?;
    Ok(json!({
        "n": model.dataset().len(),
        "d": model.dim(),
        "lambda": model.truncation(),
    }))
}

fn train_qs(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Value> {
    let tr = section(&cfg.train, "train", cfg.task)?;
    let ds = TrainingDatasetQS::read_jsonl(&tr.dataset)?;
    let collapse = if tr.collapse {
        let c = section(&cfg.circuit, "circuit", cfg.task)?.build()?;
        Some(CollapseSpec::from_circuit(&c)?.with_space(tr.feature_space))
    } else {
        None
    };
    let d = collapse.as_ref().map_or(ds.dim(), |s| s.expanded_dim());
    let sampled = tr.mode == FrequencyMode::OmegaSample;
    if sampled && tr.m.is_none() {
        return Err(Error::Config("mode OmegaSample needs train.m".into()));
    }
    let desc = FrequencySetDescriptor {
        mode: tr.mode,
        d,
        truncation: tr.truncation.min(d),
        m: if sampled { tr.m } else { None },
        seed: sampled.then(|| rng::derive_seed(cfg.seed, &[0x51])),
    };
    let model = fit_qs_described(&ds, &desc, tr.ridge, collapse.as_ref(), Solver::Auto)?;
    out.write("model.json", model.to_json()?.as_bytes())?;
    let xs: Vec<Vec<f64>> = ds.examples().iter().map(|e| e.x.clone()).collect();
    let ys: Vec<f64> = ds.examples().iter().map(|e| e.y).collect();
    let fitted = model.predict_batch(&xs)?;
    Ok(json!({
        "n": ds.len(),
        "features": model.feature_count(),
        "train_mse": crate::metrics::mse(&ys, &fitted)?,
    }))
}

fn read_inputs(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    r.records()
        .map(|rec| {
            rec?.iter()
                .map(|v| {
                    v.parse::<f64>().map_err(|e| {
                        Error::invalid(format!("bad number '{v}' in {}: {e}", path.display()))
                    })
                })
                .collect()
        })
        .collect()
}

fn read_column(path: &Path, column: &str) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path)?;
    let idx = r
        .headers()?
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| {
            Error::Config(format!("column '{column}' not found in {}", path.display()))
        })?;
    r.records()
        .map(|rec| {
            let rec = rec?;
            let v = rec.get(idx).unwrap_or("");
            v.trim()
                .parse::<f64>()
                .map_err(|e| Error::invalid(format!("bad number '{v}' in {}: {e}", path.display())))
        })
        .collect()
}

fn predict(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Value> {
    let p = section(&cfg.predict, "predict", cfg.task)?;
    let xs = read_inputs(&p.inputs)?;
    let text = std::fs::read_to_string(&p.model)?;
    let ys = match p.kind {
        ModelKind::Cs => {
            let file: SurrogateCsFile = serde_json::from_str(&text)?;
            let mut data = std::path::PathBuf::from(&file.dataset);
            if data.is_relative() {
                data = p.model.parent().unwrap_or(Path::new(".")).join(data);
            }
            let model = fit_cs(
                Arc::new(TrainingDatasetCS::read_jsonl(&data)?),
                file.truncation,
            )?;
            let o = section(&cfg.observable, "observable", cfg.task)?.build()?;
            model.predict_batch(&xs, &o)?
        }
        ModelKind::Qs => SurrogateQS::from_json(&text)?.predict_batch(&xs)?,
    };
    let d = xs.first().map_or(0, Vec::len);
    let mut header: Vec<String> = vec!["index".into()];
    header.extend((0..d).map(|j| format!("x{j}")));
    header.push("prediction".into());
    let rows: Vec<Vec<String>> = xs
        .iter()
        .zip(&ys)
        .enumerate()
        .map(|(i, (x, y))| {
            let mut r = vec![i.to_string()];
            r.extend(x.iter().map(|v| fmt_f64(*v)));
            r.push(fmt_f64(*y));
            r
        })
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    out.csv("predictions.csv", &header, &rows)?;
    Ok(json!({ "count": ys.len() }))
}

fn trace_rows(r: &OptimizationResult, e0: f64, emax: f64) -> Result<Vec<Vec<String>>> {
    let mut best = f64::INFINITY;
    r.trace
        .iter()
        .map(|t| {
            let dev = normalized_deviation(t.objective, e0, emax)?;
            best = best.min(dev);
            Ok(vec![
                t.iteration.to_string(),
                fmt_f64(t.objective),
                fmt_f64(dev),
                fmt_f64(best),
            ])
        })
        .collect()
}

const TRACE_HEADER: [&str; 4] = ["iteration", "objective", "deviation", "best_deviation"];

fn vqe(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Value> {
    let v = section(&cfg.vqe, "vqe", cfg.task)?;
    let tb = VqeTestbed::new(v.tfim, v.layers, cfg.noise.clone())?;
    let pre = tb.pretrain(&v.surrogate, &v.optimizer, v.eval_backend, cfg.seed)?;
    out.csv(
        "pretrain_trace.csv",
        &TRACE_HEADER,
        &trace_rows(&pre.result, tb.e0, tb.emax)?,
    )?;
    let mut summary = json!({
        "e0": tb.e0,
        "emax": tb.emax,
        "d": tb.dim(),
        "initial_deviation": pre.initial_deviation,
        "pretrained_deviation": pre.pretrained_deviation,
        "pretrain_iterations": pre.result.trace.len() - 1,
        "surrogate_best_objective": pre.result.best_objective,
        "x0": pre.x0,
        "x_pretrained": pre.result.x_best,
    });
    let mut finetune_iterations = 0;
    if cfg.task == Task::VqeFinetune {
        let ft = v
            .finetune
            .as_ref()
            .ok_or_else(|| Error::Config("missing [vqe.finetune]".into()))?;
        let noise = if ft.noiseless {
            PauliNoiseSpec::noiseless()
        } else {
            tb.noise.clone()
        };
        let res = finetune(
            &tb.ansatz,
            &tb.hamiltonian,
            &pre.result.x_best,
            &noise,
            &ft.optimizer,
            ft.backend,
            rng::derive_seed(cfg.seed, &[5]),
        )?;
        let rows = trace_rows(&res, tb.e0, tb.emax)?;
        out.csv("finetune_trace.csv", &TRACE_HEADER, &rows)?;
        let start = normalized_deviation(res.trace[0].objective, tb.e0, tb.emax)?;
        let best = normalized_deviation(res.best_objective, tb.e0, tb.emax)?;
        finetune_iterations = res.trace.len() as u64 - 1;
        let m = summary.as_object_mut().expect("summary is an object");
        m.insert("finetune_start_deviation".into(), json!(start));
        m.insert("finetuned_deviation".into(), json!(best));
        m.insert("improvement".into(), json!(start - best));
        m.insert("finetune_iterations".into(), json!(finetune_iterations));
        m.insert("finetune_shots".into(), json!(res.shots_used));
        m.insert("x_finetuned".into(), json!(res.x_best));
    }
    if let Some(l) = &v.ledger {
        let ledger = shot_ledger(&LedgerInputs {
            n: v.surrogate.n as u64,
            t: v.surrogate.t as u64,
            d: tb.dim() as u64,
            finetune_iterations,
            shots_per_evaluation: l.shots_per_evaluation,
            baseline_iterations: l.baseline_iterations,
        });
        out.json("shot_ledger.json", &ledger)?;
    }
    Ok(summary)
}

fn fspt_scan(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Value> {
    let f = section(&cfg.fspt, "fspt", cfg.task)?;
    let scan = &f.scan;
    let bank = if scan.backend == FsptBackend::SurrogateBank {
        Some(match (&f.bank_dir, &f.bank) {
            (Some(dir), _) => SurrogateBank::load(dir)?,
            (None, Some(b)) => {
                let bank =
                    train_surrogate_bank(b, &scan.noise, rng::derive_seed(cfg.seed, &[0xB]))?;
                let manifest = bank.save(&out.dir().join("bank"))?;
                out.adopt("bank/bank.json")?;
                for name in manifest.files.iter().flatten() {
                    out.adopt(&format!("bank/{name}"))?;
                }
                bank
            }
            (None, None) => return Err(Error::Config("surrogate-bank scan without a bank".into())),
        })
    } else {
        None
    };
    let report = variance_scan(scan, bank.as_ref(), cfg.seed)?;
    let long: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| vec![fmt_f64(r.delta), r.sample.to_string(), fmt_f64(r.peak)])
        .collect();
    out.csv("scan_long.csv", &["delta", "sample", "peak"], &long)?;
    let var: Vec<Vec<String>> = report
        .deltas
        .iter()
        .zip(&report.variance)
        .map(|(d, v)| vec![fmt_f64(*d), fmt_f64(*v)])
        .collect();
    out.csv("scan_variance.csv", &["delta", "variance"], &var)?;
    let mut summary = json!({
        "delta_star": report.delta_star,
        "interval": [report.interval.0, report.interval.1],
        "neighbor_interval": [report.neighbor_interval.0, report.neighbor_interval.1],
    });
    if let (Some(bank), true) = (&bank, f.holdout > 0) {
        let b = f.bank.as_ref().ok_or_else(|| {
            Error::Config("fspt.holdout needs [fspt.bank] for the input law".into())
        })?;
        let xs = b
            .sampling()?
            .sample_n(f.holdout, rng::derive_seed(cfg.seed, &[0xD]));
        let reference = label_traces(
            b.n,
            b.n_k,
            &xs,
            &scan.noise,
            0,
            rng::derive_seed(cfg.seed, &[0xD]),
        )?;
        summary
            .as_object_mut()
            .expect("summary is an object")
            .insert(
                "holdout_mse".into(),
                json!(bank_mse(bank, &xs, &reference)?),
            );
    }
    Ok(summary)
}

fn kde_rows(name: &str, k: &KdeCurve) -> Vec<Vec<String>> {
    k.grid
        .iter()
        .zip(&k.density)
        .map(|(g, d)| vec![name.to_string(), fmt_f64(*g), fmt_f64(*d)])
        .collect()
}

fn eval(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Value> {
    let e = section(&cfg.eval, "eval", cfg.task)?;
    let y = read_column(&e.reference.path, &e.reference.column)?;
    let yhat = read_column(&e.prediction.path, &e.prediction.column)?;
    let report = compute_metrics(&y, &yhat)?;
    let mut kde = kde_rows("reference", &report.kde_reference);
    kde.extend(kde_rows("prediction", &report.kde_prediction));
    out.csv("kde.csv", &["series", "grid", "density"], &kde)?;
    let metrics = json!({
        "count": report.count,
        "mae": report.mae,
        "mse": report.mse,
        "r2": report.r2,
        "pearson": report.pearson,
        "wasserstein": report.wasserstein,
        "bandwidth_reference": report.kde_reference.bandwidth,
        "bandwidth_prediction": report.kde_prediction.bandwidth,
    });
    out.json("metrics.json", &metrics)?;
    Ok(metrics)
}

fn oracle(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Value> {
    let c = section(&cfg.circuit, "circuit", cfg.task)?.build()?;
    let o = section(&cfg.observable, "observable", cfg.task)?.build()?;
    let table = oracle_coefficients(&c, &o, &cfg.noise)?;
    let rows: Vec<Vec<String>> = table
        .iter()
        .map(|(w, a)| vec![w.to_string(), w.hamming().to_string(), fmt_f64(a)])
        .collect();
    out.csv(
        "coefficients.csv",
        &["frequency", "weight", "coefficient"],
        &rows,
    )?;
    Ok(json!({ "d": table.dim(), "rows": rows.len() }))
}

fn fold(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Value> {
    let f = section(&cfg.fold, "fold", cfg.task)?;
    let rows = fold_bench(&cfg.noise, f, cfg.seed)?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.p.to_string(), fmt_f64(r.mse)])
        .collect();
    out.csv("fold.csv", &["p", "mse"], &table)?;
    let non_increasing = rows.windows(2).all(|w| w[1].mse <= w[0].mse);
    Ok(json!({ "rows": rows, "non_increasing": non_increasing }))
}
