//! Agreement metrics between reference values and predictions.

use serde::Serialize;

use crate::error::{check_len, Error, Result};

/// A metric that may be undefined for degenerate inputs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MaybeMetric {
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl MaybeMetric {
    fn defined(v: f64) -> Self {
        MaybeMetric {
            value: Some(v),
            reason: None,
        }
    }

    fn undefined(reason: &str) -> Self {
        MaybeMetric {
            value: None,
            reason: Some(reason.to_string()),
        }
    }
}

/// Gaussian kernel density estimate evaluated on a grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KdeCurve {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
}

/// All agreement metrics for one reference/prediction pair.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsReport {
    pub count: usize,
    pub mae: f64,
    pub mse: f64,
    pub r2: MaybeMetric,
    pub pearson: MaybeMetric,
    pub wasserstein: f64,
    pub kde_reference: KdeCurve,
    pub kde_prediction: KdeCurve,
}

const KDE_GRID_POINTS: usize = 128;

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn mae(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat)?;
    Ok(y.iter().zip(yhat).map(|(a, b)| (a - b).abs()).sum::<f64>() / y.len() as f64)
}

pub fn mse(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat)?;
    Ok(y.iter()
        .zip(yhat)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / y.len() as f64)
}

/// `1 − SS_res / SS_tot`; undefined when the reference is constant.
pub fn r_squared(y: &[f64], yhat: &[f64]) -> Result<MaybeMetric> {
    check_pair(y, yhat)?;
    let m = mean(y);
    let ss_tot: f64 = y.iter().map(|v| (v - m).powi(2)).sum();
    if ss_tot == 0.0 {
        return Ok(MaybeMetric::undefined(
            "reference values have zero variance",
        ));
    }
    let ss_res: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(MaybeMetric::defined(1.0 - ss_res / ss_tot))
}

/// Pearson correlation; undefined when either side is constant.
pub fn pearson(y: &[f64], yhat: &[f64]) -> Result<MaybeMetric> {
    check_pair(y, yhat)?;
    let (my, mp) = (mean(y), mean(yhat));
    let cov: f64 = y.iter().zip(yhat).map(|(a, b)| (a - my) * (b - mp)).sum();
    let vy: f64 = y.iter().map(|a| (a - my).powi(2)).sum();
    let vp: f64 = yhat.iter().map(|b| (b - mp).powi(2)).sum();
    if vy == 0.0 {
        return Ok(MaybeMetric::undefined(
            "reference values have zero variance",
        ));
    }
    if vp == 0.0 {
        return Ok(MaybeMetric::undefined("predictions have zero variance"));
    }
    Ok(MaybeMetric::defined(
        (cov / (vy.sqrt() * vp.sqrt())).clamp(-1.0, 1.0),
    ))
}

/// 1-D Wasserstein-1 distance between two equally sized empirical samples.
pub fn wasserstein(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat)?;
    let mut a = y.to_vec();
    let mut b = yhat.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    Ok(a.iter().zip(&b).map(|(p, q)| (p - q).abs()).sum::<f64>() / a.len() as f64)
}

/// Gaussian KDE with bandwidth `σ · m^{−1/5}` (Scott's rule in 1-D) on a
/// uniform grid spanning the sample range padded by three bandwidths.
pub fn kde(samples: &[f64], lo: f64, hi: f64) -> KdeCurve {
    let m = samples.len() as f64;
    let mu = mean(samples);
    let sd = (samples.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (m - 1.0).max(1.0)).sqrt();
    let bandwidth = if sd > 0.0 {
        sd * m.powf(-0.2)
    } else {
        m.powf(-0.2)
    };
    let (lo, hi) = (lo - 3.0 * bandwidth, hi + 3.0 * bandwidth);
    let grid: Vec<f64> = (0..KDE_GRID_POINTS)
        .map(|i| lo + (hi - lo) * i as f64 / (KDE_GRID_POINTS - 1) as f64)
        .collect();
    let norm = 1.0 / (m * bandwidth * (2.0 * std::f64::consts::PI).sqrt());
    let density = grid
        .iter()
        .map(|g| {
            norm * samples
                .iter()
                .map(|s| (-0.5 * ((g - s) / bandwidth).powi(2)).exp())
                .sum::<f64>()
        })
        .collect();
    KdeCurve {
        grid,
        density,
        bandwidth,
    }
}

fn check_pair(y: &[f64], yhat: &[f64]) -> Result<()> {
    check_len("metric inputs", y.len(), yhat.len())?;
    if y.is_empty() {
        return Err(Error::invalid("metrics need at least one value"));
    }
    if y.iter().chain(yhat).any(|v| !v.is_finite()) {
        return Err(Error::invalid("metric inputs must be finite"));
    }
    Ok(())
}

/// Computes every metric of [`MetricsReport`].
pub fn compute_metrics(y: &[f64], yhat: &[f64]) -> Result<MetricsReport> {
    check_pair(y, yhat)?;
    let lo = y.iter().chain(yhat).copied().fold(f64::INFINITY, f64::min);
    let hi = y
        .iter()
        .chain(yhat)
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(MetricsReport {
        count: y.len(),
        mae: mae(y, yhat)?,
        mse: mse(y, yhat)?,
        r2: r_squared(y, yhat)?,
        pearson: pearson(y, yhat)?,
        wasserstein: wasserstein(y, yhat)?,
        kde_reference: kde(y, lo, hi),
        kde_prediction: kde(yhat, lo, hi),
    })
}

/// Spearman rank correlation (average ranks for ties).
pub fn spearman(a: &[f64], b: &[f64]) -> Result<MaybeMetric> {
    check_pair(a, b)?;
    pearson(&ranks(a), &ranks(b))
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}
