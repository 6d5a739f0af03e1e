//! Trigonometric monomial features.
//!
//! A frequency vector `ω ∈ {−1, 0, +1}^d` selects the monomial
//! `Φ_ω(x) = Π_l {1, cos x_l, sin x_l}` for `ω_l = 0, +1, −1`. This module
//! provides the truncated frequency sets, the kernel
//! `κ_Λ(x, x') = Σ_{‖ω‖₀ ≤ Λ} 2^{‖ω‖₀} Φ_ω(x) Φ_ω(x')`, its gradient, the
//! collapsed features for slot-shared circuits and the exact
//! coefficient-extraction oracle.
//!
//! Canonical order of frequency vectors is by Hamming weight, then
//! lexicographic with symbol order `+ < − < 0`; for `d = 2`, `Λ = 1` this
//! gives `00, +0, −0, 0+, 0−`.

use num_bigint::BigUint;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::HashMap;
use std::f64::consts::FRAC_PI_2;
use std::fmt;

use crate::error::{check_len, Error, Result};
use crate::rng;

/// Largest frequency set that may be materialized.
pub const ENUMERATION_GUARD: u128 = 10_000_000;
/// Largest dimension accepted by [`extract_coefficients`].
pub const EXTRACTION_MAX_DIM: usize = 8;

/// Monomial index `ω ∈ {−1, 0, +1}^d`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FrequencyVector(Vec<i8>);

impl FrequencyVector {
    pub fn new(entries: Vec<i8>) -> Result<Self> {
        if entries.iter().any(|e| !(-1..=1).contains(e)) {
            return Err(Error::invalid("frequency entries must be -1, 0 or +1"));
        }
        Ok(FrequencyVector(entries))
    }

    pub fn zeros(d: usize) -> Self {
        FrequencyVector(vec![0; d])
    }

    pub fn entries(&self) -> &[i8] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// `‖ω‖₀`
    pub fn hamming(&self) -> usize {
        self.0.iter().filter(|&&e| e != 0).count()
    }

    /// Number of sine factors.
    pub fn minus_count(&self) -> usize {
        self.0.iter().filter(|&&e| e == -1).count()
    }

    fn symbol_rank(e: i8) -> u8 {
        match e {
            1 => 0,
            -1 => 1,
            _ => 2,
        }
    }

    /// Canonical comparison: Hamming weight, then lexicographic (`+ < − < 0`).
    pub fn canonical_cmp(&self, other: &Self) -> Ordering {
        self.hamming().cmp(&other.hamming()).then_with(|| {
            self.0
                .iter()
                .map(|&e| Self::symbol_rank(e))
                .cmp(other.0.iter().map(|&e| Self::symbol_rank(e)))
        })
    }
}

impl fmt::Display for FrequencyVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &e in &self.0 {
            let c = match e {
                1 => '+',
                -1 => '-',
                _ => '0',
            };
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Truncation rule of a frequency set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FrequencyMode {
    /// `‖ω‖₀ ≤ Λ`
    C,
    /// At most `Λ` sine factors.
    S,
    /// `m` members drawn uniformly without replacement from the `C` set.
    OmegaSample,
}

/// Serializable description of a frequency set; members are re-derived.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencySetDescriptor {
    pub mode: FrequencyMode,
    pub d: usize,
    #[serde(rename = "lambda")]
    pub truncation: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// An explicit list of frequency vectors in canonical order.
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencySet {
    descriptor: FrequencySetDescriptor,
    members: Vec<FrequencyVector>,
}

impl FrequencySet {
    /// Re-derives the members described by `desc`.
    pub fn from_descriptor(desc: &FrequencySetDescriptor) -> Result<Self> {
        match desc.mode {
            FrequencyMode::C | FrequencyMode::S => {
                enumerate_frequency_set(desc.d, desc.truncation, desc.mode)
            }
            FrequencyMode::OmegaSample => {
                let m = desc
                    .m
                    .ok_or_else(|| Error::invalid("sampled set needs m"))?;
                let seed = desc
                    .seed
                    .ok_or_else(|| Error::invalid("sampled set needs a seed"))?;
                sample_feature_subset(desc.d, desc.truncation, m, seed)
            }
        }
    }

    pub fn descriptor(&self) -> &FrequencySetDescriptor {
        &self.descriptor
    }

    pub fn members(&self) -> &[FrequencyVector] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.descriptor.d
    }

    /// Feature vector `(Φ_ω(x))_ω` in member order.
    pub fn features(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("feature input", self.dim(), x.len())?;
        let trig = TrigTable::new(x);
        Ok(self.members.iter().map(|w| trig.phi(w)).collect())
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

fn binomial_big(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::from(0u32);
    }
    let k = k.min(n - k);
    let mut acc = BigUint::from(1u32);
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

/// Exact size of the `C` or `S` frequency set.
pub fn cardinality(d: usize, truncation: usize, mode: FrequencyMode) -> BigUint {
    let lam = truncation.min(d);
    match mode {
        FrequencyMode::C | FrequencyMode::OmegaSample => (0..=lam)
            .map(|k| binomial_big(d, k) * (BigUint::from(1u32) << k))
            .sum(),
        FrequencyMode::S => (0..=lam)
            .map(|a| binomial_big(d, a) * (BigUint::from(1u32) << (d - a)))
            .sum(),
    }
}

fn cardinality_u128(d: usize, truncation: usize, mode: FrequencyMode) -> Option<u128> {
    u128::try_from(cardinality(d, truncation, mode)).ok()
}

fn enumerate_dfs(
    d: usize,
    pos: usize,
    nonzero_left: usize,
    minus_left: Option<usize>,
    cur: &mut Vec<i8>,
    out: &mut Vec<FrequencyVector>,
) {
    if pos == d {
        if nonzero_left == 0 {
            out.push(FrequencyVector(cur.clone()));
        }
        return;
    }
    let remaining = d - pos;
    if nonzero_left > remaining {
        return;
    }
    if nonzero_left > 0 {
        cur.push(1);
        enumerate_dfs(d, pos + 1, nonzero_left - 1, minus_left, cur, out);
        cur.pop();
        if minus_left.is_none_or(|m| m > 0) {
            cur.push(-1);
            enumerate_dfs(
                d,
                pos + 1,
                nonzero_left - 1,
                minus_left.map(|m| m - 1),
                cur,
                out,
            );
            cur.pop();
        }
    }
    if nonzero_left < remaining {
        cur.push(0);
        enumerate_dfs(d, pos + 1, nonzero_left, minus_left, cur, out);
        cur.pop();
    }
}

/// Materializes the `C` or `S` set in canonical order.
pub fn enumerate_frequency_set(
    d: usize,
    truncation: usize,
    mode: FrequencyMode,
) -> Result<FrequencySet> {
    if truncation > d {
        return Err(Error::invalid(format!(
            "truncation {truncation} exceeds dimension {d}"
        )));
    }
    if mode == FrequencyMode::OmegaSample {
        return Err(Error::invalid(
            "sampled sets are built by sample_feature_subset",
        ));
    }
    let size = cardinality_u128(d, truncation, mode).unwrap_or(u128::MAX);
    if size > ENUMERATION_GUARD {
        return Err(Error::guard(
            "frequency enumeration",
            size,
            ENUMERATION_GUARD,
        ));
    }
    let mut out = Vec::with_capacity(size as usize);
    let mut cur = Vec::with_capacity(d);
    match mode {
        FrequencyMode::C => {
            for h in 0..=truncation {
                enumerate_dfs(d, 0, h, None, &mut cur, &mut out);
            }
        }
        FrequencyMode::S => {
            for h in 0..=d {
                enumerate_dfs(d, 0, h, Some(truncation), &mut cur, &mut out);
            }
        }
        FrequencyMode::OmegaSample => unreachable!(),
    }
    Ok(FrequencySet {
        descriptor: FrequencySetDescriptor {
            mode,
            d,
            truncation,
            m: None,
            seed: None,
        },
        members: out,
    })
}

/// Number of weight-`h` vectors on `len` free positions.
fn shell_count(len: usize, h: usize) -> u128 {
    binomial(len, h) << h
}

/// Canonical rank of `ω` within `C(Λ)` (any `Λ ≥ ‖ω‖₀`).
pub fn rank_in_c(w: &FrequencyVector) -> u128 {
    let d = w.dim();
    let h = w.hamming();
    let mut rank: u128 = (0..h).map(|k| shell_count(d, k)).sum();
    let mut left = h;
    for (pos, &e) in w.0.iter().enumerate() {
        let rest = d - pos - 1;
        match e {
            1 => left -= 1,
            -1 => {
                rank += shell_count(rest, left - 1);
                left -= 1;
            }
            _ => {
                if left > 0 {
                    rank += 2 * shell_count(rest, left - 1);
                }
            }
        }
    }
    rank
}

/// Inverse of [`rank_in_c`] for sets of dimension `d`.
pub fn unrank_in_c(d: usize, mut rank: u128) -> Result<FrequencyVector> {
    let mut h = 0;
    loop {
        if h > d {
            return Err(Error::invalid("rank exceeds the full frequency space"));
        }
        let s = shell_count(d, h);
        if rank < s {
            break;
        }
        rank -= s;
        h += 1;
    }
    let mut out = Vec::with_capacity(d);
    let mut left = h;
    for pos in 0..d {
        let rest = d - pos - 1;
        if left == 0 {
            out.push(0);
            continue;
        }
        let with_sign = shell_count(rest, left - 1);
        if rank < with_sign {
            out.push(1);
            left -= 1;
        } else if rank < 2 * with_sign {
            rank -= with_sign;
            out.push(-1);
            left -= 1;
        } else {
            rank -= 2 * with_sign;
            out.push(0);
        }
    }
    Ok(FrequencyVector(out))
}

/// Uniform draw of `m` distinct members of `C(Λ)`, returned in canonical order.
///
/// A sparse Fisher–Yates shuffle over canonical ranks avoids materializing
/// the full set.
pub fn sample_feature_subset(
    d: usize,
    truncation: usize,
    m: usize,
    seed: u64,
) -> Result<FrequencySet> {
    if truncation > d {
        return Err(Error::invalid(format!(
            "truncation {truncation} exceeds dimension {d}"
        )));
    }
    let total = cardinality_u128(d, truncation, FrequencyMode::C)
        .ok_or_else(|| Error::guard("sampled frequency space", u128::MAX, u128::MAX - 1))?;
    if m as u128 > total {
        return Err(Error::invalid(format!(
            "cannot draw {m} features from a set of {total}"
        )));
    }
    let mut r = rng::stream(seed, &[0xF5]);
    let mut swapped: HashMap<u128, u128> = HashMap::with_capacity(2 * m);
    let mut ranks = Vec::with_capacity(m);
    for i in 0..m as u128 {
        let j = r.random_range(i..total);
        let at_j = *swapped.get(&j).unwrap_or(&j);
        let at_i = *swapped.get(&i).unwrap_or(&i);
        swapped.insert(j, at_i);
        ranks.push(at_j);
    }
    ranks.sort_unstable();
    let members = ranks
        .into_iter()
        .map(|k| unrank_in_c(d, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(FrequencySet {
        descriptor: FrequencySetDescriptor {
            mode: FrequencyMode::OmegaSample,
            d,
            truncation,
            m: Some(m),
            seed: Some(seed),
        },
        members,
    })
}

/// Cached `cos x_l`, `sin x_l`.
pub(crate) struct TrigTable {
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl TrigTable {
    pub(crate) fn new(x: &[f64]) -> Self {
        TrigTable {
            cos: x.iter().map(|v| v.cos()).collect(),
            sin: x.iter().map(|v| v.sin()).collect(),
        }
    }

    pub(crate) fn phi(&self, w: &FrequencyVector) -> f64 {
        w.0.iter().enumerate().fold(1.0, |acc, (l, &e)| match e {
            1 => acc * self.cos[l],
            -1 => acc * self.sin[l],
            _ => acc,
        })
    }

    pub(crate) fn collapsed(&self, idx: &CollapsedFeatureIndex) -> f64 {
        let mut acc = 1.0;
        for j in 0..idx.plus.len() {
            acc *= self.cos[j].powi(idx.plus[j] as i32) * self.sin[j].powi(idx.minus[j] as i32);
        }
        acc
    }
}

/// Trigonometric monomial `Φ_ω(x)`.
pub fn phi(w: &FrequencyVector, x: &[f64]) -> Result<f64> {
    check_len("phi input", w.dim(), x.len())?;
    Ok(TrigTable::new(x).phi(w))
}

/// Cosine and sine powers per base coordinate of a slot-shared circuit.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CollapsedFeatureIndex {
    pub plus: Vec<u32>,
    pub minus: Vec<u32>,
}

impl CollapsedFeatureIndex {
    pub fn new(plus: Vec<u32>, minus: Vec<u32>) -> Result<Self> {
        check_len("collapsed index", plus.len(), minus.len())?;
        Ok(CollapsedFeatureIndex { plus, minus })
    }

    pub fn base_dim(&self) -> usize {
        self.plus.len()
    }

    /// Total degree `Σ_j N⁺_j + N⁻_j`.
    pub fn degree(&self) -> u32 {
        self.plus.iter().chain(&self.minus).sum()
    }
}

/// Collapses an expanded frequency vector using `slot_map[l]` = base
/// coordinate read by expanded coordinate `l`.
pub fn collapse(
    w: &FrequencyVector,
    slot_map: &[usize],
    base_dim: usize,
) -> Result<CollapsedFeatureIndex> {
    check_len("collapse slot map", w.dim(), slot_map.len())?;
    let mut idx = CollapsedFeatureIndex {
        plus: vec![0; base_dim],
        minus: vec![0; base_dim],
    };
    for (&e, &j) in w.0.iter().zip(slot_map) {
        if j >= base_dim {
            return Err(Error::invalid(format!(
                "slot {j} out of range for base dimension {base_dim}"
            )));
        }
        match e {
            1 => idx.plus[j] += 1,
            -1 => idx.minus[j] += 1,
            _ => {}
        }
    }
    Ok(idx)
}

/// Every distinct collapsed index obtained by collapsing a member of
/// `C(Λ)`, where base coordinate `j` is read by `caps[j]` expanded
/// coordinates. Ordered by total degree, then lexicographically on the
/// interleaved `(N⁺_j, N⁻_j)` pairs.
pub fn collapsed_image(caps: &[u32], truncation: usize) -> Result<Vec<CollapsedFeatureIndex>> {
    fn count(caps: &[u32], left: u32, memo: &mut HashMap<(usize, u32), u128>) -> u128 {
        if caps.is_empty() {
            return 1;
        }
        if let Some(&v) = memo.get(&(caps.len(), left)) {
            return v;
        }
        let mut total = 0u128;
        for used in 0..=left.min(caps[0]) {
            // (used + 1) ways to split `used` between N⁺ and N⁻.
            total = total.saturating_add((used as u128 + 1).saturating_mul(count(
                &caps[1..],
                left - used,
                memo,
            )));
        }
        memo.insert((caps.len(), left), total);
        total
    }
    fn fill(
        j: usize,
        caps: &[u32],
        left: u32,
        idx: &mut CollapsedFeatureIndex,
        out: &mut Vec<CollapsedFeatureIndex>,
    ) {
        if j == caps.len() {
            out.push(idx.clone());
            return;
        }
        for a in 0..=left.min(caps[j]) {
            for b in 0..=(left - a).min(caps[j] - a) {
                idx.plus[j] = a;
                idx.minus[j] = b;
                fill(j + 1, caps, left - a - b, idx, out);
            }
        }
        idx.plus[j] = 0;
        idx.minus[j] = 0;
    }
    let degree = u32::try_from(truncation).map_err(|_| Error::invalid("truncation too large"))?;
    let size = count(caps, degree, &mut HashMap::new());
    if size > ENUMERATION_GUARD {
        return Err(Error::guard(
            "collapsed feature count",
            size,
            ENUMERATION_GUARD,
        ));
    }
    let mut out = Vec::with_capacity(size as usize);
    let mut idx = CollapsedFeatureIndex {
        plus: vec![0; caps.len()],
        minus: vec![0; caps.len()],
    };
    fill(0, caps, degree, &mut idx, &mut out);
    out.sort_by_key(|f| f.degree());
    Ok(out)
}

/// `m` members of [`collapsed_image`] drawn uniformly without replacement
/// from the stream `(seed, 0xC0)`, kept in image order. The whole image is
/// returned when it has at most `m` members.
pub fn sample_collapsed_image(
    caps: &[u32],
    truncation: usize,
    m: usize,
    seed: u64,
) -> Result<Vec<CollapsedFeatureIndex>> {
    let image = collapsed_image(caps, truncation)?;
    if m >= image.len() {
        return Ok(image);
    }
    let mut picks =
        rand::seq::index::sample(&mut rng::stream(seed, &[0xC0]), image.len(), m).into_vec();
    picks.sort_unstable();
    Ok(picks.into_iter().map(|i| image[i].clone()).collect())
}

/// Layer-wise slot map: `layers` copies of `0..base_dim`.
pub fn layered_slot_map(base_dim: usize, layers: usize) -> Vec<usize> {
    (0..layers).flat_map(|_| 0..base_dim).collect()
}

/// `Π_j cos(x_j)^{N⁺_j} sin(x_j)^{N⁻_j}`.
pub fn phi_collapsed(idx: &CollapsedFeatureIndex, x_base: &[f64]) -> Result<f64> {
    check_len("collapsed feature input", idx.base_dim(), x_base.len())?;
    Ok(TrigTable::new(x_base).collapsed(idx))
}

fn kernel_z(x: &[f64], xp: &[f64]) -> Vec<f64> {
    x.iter().zip(xp).map(|(a, b)| 2.0 * (a - b).cos()).collect()
}

/// Elementary symmetric polynomials `e_0..e_Λ` of `z`.
fn elementary_symmetric(z: &[f64], truncation: usize) -> Vec<f64> {
    let mut e = vec![0.0; truncation + 1];
    e[0] = 1.0;
    for (l, &zl) in z.iter().enumerate() {
        for k in (1..=truncation.min(l + 1)).rev() {
            e[k] += zl * e[k - 1];
        }
    }
    e
}

/// Truncated kernel `κ_Λ(x, x') = Σ_{k ≤ Λ} e_k(2 cos(x − x'))`.
pub fn kernel(x: &[f64], xp: &[f64], truncation: usize) -> Result<f64> {
    check_len("kernel inputs", x.len(), xp.len())?;
    let lam = truncation.min(x.len());
    Ok(elementary_symmetric(&kernel_z(x, xp), lam).iter().sum())
}

/// Gradient of [`kernel`] with respect to its first argument.
///
/// `∂κ/∂x_j = −2 sin(x_j − x'_j) Σ_{k=1}^{Λ} e_{k−1}(z without z_j)`, where the
/// exclusion polynomials combine prefix and suffix tables.
pub fn kernel_gradient(x: &[f64], xp: &[f64], truncation: usize) -> Result<Vec<f64>> {
    check_len("kernel inputs", x.len(), xp.len())?;
    let d = x.len();
    let lam = truncation.min(d);
    if lam == 0 {
        return Ok(vec![0.0; d]);
    }
    let z = kernel_z(x, xp);
    let width = lam; // degrees 0..lam-1 are needed
                     // prefix[j] = e(z_0..z_{j-1}), suffix[j] = e(z_j..z_{d-1})
    let mut prefix = vec![0.0; (d + 1) * width];
    let mut suffix = vec![0.0; (d + 1) * width];
    prefix[0] = 1.0;
    for j in 0..d {
        let (head, tail) = prefix.split_at_mut((j + 1) * width);
        let prev = &head[j * width..];
        let next = &mut tail[..width];
        next[0] = prev[0];
        for k in 1..width {
            next[k] = prev[k] + z[j] * prev[k - 1];
        }
    }
    suffix[d * width] = 1.0;
    for j in (0..d).rev() {
        let (head, tail) = suffix.split_at_mut((j + 1) * width);
        let next = &tail[..width];
        let cur = &mut head[j * width..];
        cur[0] = next[0];
        for k in 1..width {
            cur[k] = next[k] + z[j] * next[k - 1];
        }
    }
    Ok((0..d)
        .map(|j| {
            let pre = &prefix[j * width..(j + 1) * width];
            let suf = &suffix[(j + 1) * width..(j + 2) * width];
            let mut total = 0.0;
            for k in 0..width {
                // e_k(z without z_j)
                let mut ek = 0.0;
                for a in 0..=k {
                    ek += pre[a] * suf[k - a];
                }
                total += ek;
            }
            -2.0 * (x[j] - xp[j]).sin() * total
        })
        .collect())
}

/// Brute-force kernel by explicit summation over `C(Λ)`; test oracle.
pub fn kernel_bruteforce(x: &[f64], xp: &[f64], truncation: usize) -> Result<f64> {
    check_len("kernel inputs", x.len(), xp.len())?;
    let set = enumerate_frequency_set(x.len(), truncation.min(x.len()), FrequencyMode::C)?;
    let (tx, txp) = (TrigTable::new(x), TrigTable::new(xp));
    Ok(set
        .members()
        .iter()
        .map(|w| (1u64 << w.hamming()) as f64 * tx.phi(w) * txp.phi(w))
        .sum())
}

/// All `3^d` expansion coefficients of a function, indexed by base-3 digits
/// (`0 ↦ ω = 0`, `1 ↦ +1`, `2 ↦ −1`; coordinate `l` has weight `3^l`).
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientTable {
    d: usize,
    values: Vec<f64>,
}

fn digits_to_frequency(mut code: usize, d: usize) -> FrequencyVector {
    let mut v = Vec::with_capacity(d);
    for _ in 0..d {
        v.push(match code % 3 {
            0 => 0,
            1 => 1,
            _ => -1,
        });
        code /= 3;
    }
    FrequencyVector(v)
}

fn frequency_to_digits(w: &FrequencyVector) -> usize {
    w.0.iter().rev().fold(0, |acc, &e| {
        acc * 3
            + match e {
                0 => 0,
                1 => 1,
                _ => 2,
            }
    })
}

impl CoefficientTable {
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `α_ω`.
    pub fn get(&self, w: &FrequencyVector) -> Result<f64> {
        check_len("coefficient lookup", self.d, w.dim())?;
        Ok(self.values[frequency_to_digits(w)])
    }

    /// `(ω, α_ω)` pairs in digit order.
    pub fn iter(&self) -> impl Iterator<Item = (FrequencyVector, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(i, &v)| (digits_to_frequency(i, self.d), v))
    }

    /// `Σ_ω α_ω Φ_ω(x)` over the members accepted by `keep`.
    pub fn evaluate_filtered(
        &self,
        x: &[f64],
        keep: impl Fn(&FrequencyVector) -> bool,
    ) -> Result<f64> {
        check_len("coefficient evaluation", self.d, x.len())?;
        let t = TrigTable::new(x);
        Ok(self
            .iter()
            .filter(|(w, _)| keep(w))
            .map(|(w, a)| a * t.phi(&w))
            .sum())
    }

    /// Full reconstruction `Σ_ω α_ω Φ_ω(x)`.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        self.evaluate_filtered(x, |_| true)
    }

    /// Reconstruction restricted to `‖ω‖₀ ≤ Λ`.
    pub fn evaluate_truncated(&self, x: &[f64], truncation: usize) -> Result<f64> {
        self.evaluate_filtered(x, |w| w.hamming() <= truncation)
    }

    /// `E_x |f − f_Λ|² = Σ_{‖ω‖₀ > Λ} α_ω² 2^{−‖ω‖₀}` for `x` uniform on the torus.
    pub fn truncation_risk_exact(&self, truncation: usize) -> f64 {
        self.iter()
            .filter(|(w, _)| w.hamming() > truncation)
            .map(|(w, a)| a * a / (1u64 << w.hamming()) as f64)
            .sum()
    }
}

/// Recovers every expansion coefficient of `f` from its values on the grid
/// `{0, π/2, π}^d`, inverting the per-coordinate map
/// `(f(0), f(π/2), f(π)) = (c₀ + c₊, c₀ + c₋, c₀ − c₊)`.
pub fn extract_coefficients<F>(f: F, d: usize) -> Result<CoefficientTable>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    if d > EXTRACTION_MAX_DIM {
        return Err(Error::guard(
            "coefficient extraction dimension",
            d as u128,
            EXTRACTION_MAX_DIM as u128,
        ));
    }
    let total = 3usize.pow(d as u32);
    let grid = [0.0, FRAC_PI_2, std::f64::consts::PI];
    let mut values = (0..total)
        .into_par_iter()
        .map(|code| {
            let mut c = code;
            let x: Vec<f64> = (0..d)
                .map(|_| {
                    let v = grid[c % 3];
                    c /= 3;
                    v
                })
                .collect();
            f(&x)
        })
        .collect::<Result<Vec<f64>>>()?;
    for l in 0..d {
        let stride = 3usize.pow(l as u32);
        for base in 0..total {
            if !(base / stride).is_multiple_of(3) {
                continue;
            }
            let (f0, f1, f2) = (
                values[base],
                values[base + stride],
                values[base + 2 * stride],
            );
            let c0 = 0.5 * (f0 + f2);
            values[base] = c0;
            values[base + stride] = 0.5 * (f0 - f2);
            values[base + 2 * stride] = f1 - c0;
        }
    }
    Ok(CoefficientTable { d, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collapsed_image_matches_collapsed_enumeration() {
        let slot_map = [0, 0, 1, 1, 1, 2];
        for truncation in 0..=6 {
            let expanded =
                enumerate_frequency_set(slot_map.len(), truncation, FrequencyMode::C).unwrap();
            let brute: std::collections::HashSet<CollapsedFeatureIndex> = expanded
                .members()
                .iter()
                .map(|w| collapse(w, &slot_map, 3).unwrap())
                .collect();
            let image = collapsed_image(&[2, 3, 1], truncation).unwrap();
            assert_eq!(image.len(), brute.len());
            assert!(image.iter().all(|f| brute.contains(f)));
            assert!(image.windows(2).all(|p| p[0].degree() <= p[1].degree()));
        }
        let all = collapsed_image(&[2, 3, 1], 4).unwrap();
        let sub = sample_collapsed_image(&[2, 3, 1], 4, 10, 7).unwrap();
        assert_eq!(sub.len(), 10);
        assert_eq!(sub, sample_collapsed_image(&[2, 3, 1], 4, 10, 7).unwrap());
        assert_eq!(
            sample_collapsed_image(&[2, 3, 1], 4, 10_000, 7).unwrap(),
            all
        );
    }

    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn fv(s: &str) -> FrequencyVector {
        FrequencyVector(
            s.chars()
                .map(|c| match c {
                    '+' => 1,
                    '-' => -1,
                    _ => 0,
                })
                .collect(),
        )
    }

    #[test]
    fn enumeration_examples() {
        let s = enumerate_frequency_set(2, 1, FrequencyMode::C).unwrap();
        let names: Vec<String> = s.members().iter().map(|w| w.to_string()).collect();
        assert_eq!(names, vec!["00", "+0", "-0", "0+", "0-"]);
        assert_eq!(
            enumerate_frequency_set(3, 2, FrequencyMode::C)
                .unwrap()
                .len(),
            19
        );
        let s = enumerate_frequency_set(2, 0, FrequencyMode::S).unwrap();
        assert_eq!(s.len(), 4);
        assert!(s.members().iter().all(|w| w.minus_count() == 0));
        assert!(enumerate_frequency_set(2, 3, FrequencyMode::C).is_err());
        assert!(matches!(
            enumerate_frequency_set(40, 20, FrequencyMode::C),
            Err(Error::Guard { .. })
        ));
    }

    #[test]
    fn cardinality_examples() {
        assert_eq!(cardinality(11, 2, FrequencyMode::C), BigUint::from(243u32));
        assert_eq!(cardinality(1, 1, FrequencyMode::C), BigUint::from(3u32));
        assert_eq!(cardinality(4, 4, FrequencyMode::C), BigUint::from(81u32));
        assert_eq!(cardinality(4, 0, FrequencyMode::S), BigUint::from(16u32));
        assert_eq!(cardinality(4, 4, FrequencyMode::S), BigUint::from(81u32));
        // Huge values stay exact.
        assert_eq!(
            cardinality(200, 200, FrequencyMode::C),
            BigUint::from(3u32).pow(200)
        );
    }

    #[test]
    fn enumeration_is_sorted_and_complete() {
        for d in 0..=5 {
            for lam in 0..=d {
                for mode in [FrequencyMode::C, FrequencyMode::S] {
                    let s = enumerate_frequency_set(d, lam, mode).unwrap();
                    assert_eq!(BigUint::from(s.len()), cardinality(d, lam, mode));
                    for pair in s.members().windows(2) {
                        assert_eq!(pair[0].canonical_cmp(&pair[1]), Ordering::Less);
                    }
                }
            }
        }
    }

    #[test]
    fn rank_matches_canonical_order() {
        for d in 1..=5 {
            let s = enumerate_frequency_set(d, d, FrequencyMode::C).unwrap();
            for (i, w) in s.members().iter().enumerate() {
                assert_eq!(rank_in_c(w), i as u128);
                assert_eq!(&unrank_in_c(d, i as u128).unwrap(), w);
            }
        }
    }

    #[test]
    fn sampling_examples() {
        let full = enumerate_frequency_set(3, 2, FrequencyMode::C).unwrap();
        let s = sample_feature_subset(3, 2, 19, 5).unwrap();
        assert_eq!(s.members(), full.members());
        let one = sample_feature_subset(6, 2, 1, 9).unwrap();
        assert_eq!(one.len(), 1);
        assert!(one.members()[0].hamming() <= 2);
        let s = sample_feature_subset(7, 7, 1000, 1).unwrap();
        let distinct: std::collections::HashSet<_> = s.members().iter().collect();
        assert_eq!(distinct.len(), 1000);
        assert!(sample_feature_subset(3, 1, 8, 1).is_err());
        let again = FrequencySet::from_descriptor(s.descriptor()).unwrap();
        assert_eq!(again, s);
        // Huge spaces are sampled lazily.
        let big = sample_feature_subset(200, 7, 1000, 3).unwrap();
        assert!(big.members().iter().all(|w| w.hamming() <= 7));
    }

    #[test]
    fn sampling_is_uniform() {
        // Each of the 9 members of C(1) at d = 4 is drawn with probability 3/9.
        let mut counts = HashMap::new();
        let trials = 6000;
        for seed in 0..trials {
            for w in sample_feature_subset(4, 1, 3, seed).unwrap().members() {
                *counts.entry(w.clone()).or_insert(0usize) += 1;
            }
        }
        assert_eq!(counts.len(), 9);
        let p = 3.0 / 9.0;
        let sd = (trials as f64 * p * (1.0 - p)).sqrt();
        for c in counts.values() {
            assert!((*c as f64 - trials as f64 * p).abs() < 5.0 * sd);
        }
    }

    #[test]
    fn phi_examples() {
        assert_eq!(phi(&fv("000"), &[0.3, 1.0, 2.0]).unwrap(), 1.0);
        assert_eq!(phi(&fv("+"), &[0.0]).unwrap(), 1.0);
        assert_eq!(phi(&fv("-"), &[0.0]).unwrap(), 0.0);
        let v = phi(&fv("+-"), &[PI / 3.0, PI / 6.0]).unwrap();
        assert!((v - 0.25).abs() < 1e-15);
        assert!(phi(&fv("+"), &[0.0, 1.0]).is_err());
    }

    #[test]
    fn collapsed_examples() {
        let idx = CollapsedFeatureIndex::new(vec![0, 0], vec![0, 0]).unwrap();
        assert_eq!(phi_collapsed(&idx, &[0.4, 0.9]).unwrap(), 1.0);
        let idx = CollapsedFeatureIndex::new(vec![2], vec![0]).unwrap();
        assert!((phi_collapsed(&idx, &[PI / 3.0]).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn collapsed_matches_expanded() {
        let mut r = rng::stream(4, &[]);
        let base = 3;
        let layers = 3;
        let map = layered_slot_map(base, layers);
        for _ in 0..200 {
            let w = FrequencyVector((0..base * layers).map(|_| r.random_range(-1..=1)).collect());
            let xb: Vec<f64> = (0..base).map(|_| r.random_range(-PI..PI)).collect();
            let xe: Vec<f64> = map.iter().map(|&j| xb[j]).collect();
            let idx = collapse(&w, &map, base).unwrap();
            let a = phi(&w, &xe).unwrap();
            let b = phi_collapsed(&idx, &xb).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn kernel_examples() {
        assert_eq!(kernel(&[0.3, 0.2], &[1.0, -1.0], 0).unwrap(), 1.0);
        assert!((kernel(&[0.7], &[0.7], 1).unwrap() - 3.0).abs() < 1e-15);
        let g = kernel_gradient(&[0.4], &[1.3], 1).unwrap();
        assert!((g[0] + 2.0 * (0.4f64 - 1.3).sin()).abs() < 1e-15);
        assert_eq!(
            kernel_gradient(&[0.4, 0.1], &[1.3, 0.0], 0).unwrap(),
            vec![0.0, 0.0]
        );
    }

    #[test]
    fn kernel_matches_bruteforce() {
        let mut r = rng::stream(2, &[]);
        for d in 0..=8 {
            for lam in 0..=d {
                for _ in 0..5 {
                    let x: Vec<f64> = (0..d).map(|_| r.random_range(-PI..PI)).collect();
                    let y: Vec<f64> = (0..d).map(|_| r.random_range(-PI..PI)).collect();
                    let a = kernel(&x, &y, lam).unwrap();
                    let b = kernel_bruteforce(&x, &y, lam).unwrap();
                    assert!((a - b).abs() < 1e-10 * (1.0 + b.abs()), "d={d} lam={lam}");
                }
            }
        }
    }

    #[test]
    fn kernel_gradient_matches_finite_differences() {
        let mut r = rng::stream(3, &[]);
        for lam in [1, 2, 3, 6] {
            let x: Vec<f64> = (0..6).map(|_| r.random_range(-PI..PI)).collect();
            let y: Vec<f64> = (0..6).map(|_| r.random_range(-PI..PI)).collect();
            let g = kernel_gradient(&x, &y, lam).unwrap();
            let h = 1e-5;
            for j in 0..6 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[j] += h;
                xm[j] -= h;
                let fd =
                    (kernel(&xp, &y, lam).unwrap() - kernel(&xm, &y, lam).unwrap()) / (2.0 * h);
                assert!((fd - g[j]).abs() < 1e-6, "lam={lam} j={j}");
            }
        }
    }

    #[test]
    fn gram_matrix_is_psd() {
        let mut r = rng::stream(5, &[]);
        let pts: Vec<Vec<f64>> = (0..50)
            .map(|_| (0..5).map(|_| r.random_range(-PI..PI)).collect())
            .collect();
        let g = nalgebra::DMatrix::from_fn(50, 50, |i, j| kernel(&pts[i], &pts[j], 2).unwrap());
        assert_eq!(g, g.transpose());
        let min = g
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        assert!(min >= -1e-8);
    }

    #[test]
    fn extraction_examples() {
        let t = extract_coefficients(|x| Ok(x[0].cos()), 1).unwrap();
        assert!((t.get(&fv("+")).unwrap() - 1.0).abs() < 1e-15);
        assert!(t.get(&fv("0")).unwrap().abs() < 1e-15);
        assert!(t.get(&fv("-")).unwrap().abs() < 1e-15);
        let t = extract_coefficients(|x| Ok(0.5 + 0.25 * x[0].sin() * x[1].cos()), 2).unwrap();
        for (w, a) in t.iter() {
            let expect = match w.to_string().as_str() {
                "00" => 0.5,
                "-+" => 0.25,
                _ => 0.0,
            };
            assert!((a - expect).abs() < 1e-15, "{w}");
        }
        assert!(extract_coefficients(|_| Ok(0.0), 9).is_err());
    }

    #[test]
    fn orthogonality_monte_carlo() {
        let d = 3;
        let set = enumerate_frequency_set(d, d, FrequencyMode::C).unwrap();
        let pairs = [
            ("+00", "+00"),
            ("+-0", "+-0"),
            ("+00", "-00"),
            ("0+-", "0+0"),
            ("+++", "+++"),
        ];
        let samples = 1_000_000;
        let mut r = rng::stream(6, &[]);
        let xs: Vec<Vec<f64>> = (0..samples)
            .map(|_| (0..d).map(|_| r.random_range(-PI..PI)).collect())
            .collect();
        for (a, b) in pairs {
            let (wa, wb) = (fv(a), fv(b));
            assert!(set.members().contains(&wa));
            let vals: Vec<f64> = xs
                .iter()
                .map(|x| phi(&wa, x).unwrap() * phi(&wb, x).unwrap())
                .collect();
            let mean = vals.iter().sum::<f64>() / samples as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (samples - 1) as f64;
            let expect = if wa == wb {
                1.0 / (1u64 << wa.hamming()) as f64
            } else {
                0.0
            };
            assert!(
                (mean - expect).abs() < 5.0 * (var / samples as f64).sqrt() + 1e-12,
                "{a},{b}"
            );
        }
    }

    #[test]
    fn truncation_risk_matches_parseval() {
        let f = |x: &[f64]| {
            Ok(0.3 + x[0].cos() * x[1].sin() - 0.5 * x[0].sin() * x[1].sin() * x[2].cos())
        };
        let t = extract_coefficients(f, 3).unwrap();
        assert!((t.truncation_risk_exact(1) - (0.25 + 0.25 * 0.125)).abs() < 1e-14);
        assert!((t.truncation_risk_exact(2) - 0.25 * 0.125).abs() < 1e-14);
        assert_eq!(t.truncation_risk_exact(3), 0.0);
    }

    proptest! {
        #[test]
        fn kernel_is_symmetric(x in proptest::collection::vec(-PI..PI, 6), y in proptest::collection::vec(-PI..PI, 6), lam in 0usize..=6) {
            prop_assert_eq!(kernel(&x, &y, lam).unwrap(), kernel(&y, &x, lam).unwrap());
        }

        #[test]
        fn phi_is_bounded(w in proptest::collection::vec(-1i8..=1, 5), x in proptest::collection::vec(-10.0f64..10.0, 5)) {
            let v = phi(&FrequencyVector::new(w).unwrap(), &x).unwrap();
            prop_assert!(v.abs() <= 1.0);
        }

        #[test]
        fn rank_round_trips(w in proptest::collection::vec(-1i8..=1, 0..12)) {
            let w = FrequencyVector::new(w).unwrap();
            prop_assert_eq!(unrank_in_c(w.dim(), rank_in_c(&w)).unwrap(), w);
        }
    }
}
