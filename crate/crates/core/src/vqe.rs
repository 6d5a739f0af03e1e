//! Ground-state search for the transverse-field Ising chain.
//!
//! Parameters are first optimized against a classical kernel surrogate
//! ([`pretrain`]); optionally they are refined on a simulated device with
//! parameter-shift gradients ([`finetune`]).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, SQRT_2};

use crate::backend::{evaluate, Backend};
use crate::circuits::{AngleSource, ConcreteCircuit, GateKind, ParamCircuit};
use crate::error::{check_len, Error, Result};
use crate::rng;
use crate::simulator::{Observable, PauliNoiseSpec, PauliString};
use crate::surrogate_cs::{fit_cs, SurrogateCS, TrainingDatasetCS};

/// `H = −J Σ Z_i Z_{i+1} − h Σ X_i` on an open chain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TfimSpec {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "J")]
    pub j: f64,
    pub h: f64,
}

/// The chain Hamiltonian: `N − 1` ZZ terms then `N` X terms.
pub fn tfim_observable(spec: &TfimSpec) -> Result<Observable> {
    if spec.n < 2 {
        return Err(Error::invalid("TFIM chain needs at least 2 sites"));
    }
    if !spec.j.is_finite() || !spec.h.is_finite() {
        return Err(Error::invalid("TFIM couplings must be finite"));
    }
    let n = spec.n;
    let mut terms = Vec::with_capacity(2 * n - 1);
    for i in 0..n - 1 {
        let mut p = PauliString::identity(n);
        p.0[i] = crate::simulator::Pauli::Z;
        p.0[i + 1] = crate::simulator::Pauli::Z;
        terms.push((-spec.j, p));
    }
    for i in 0..n {
        terms.push((
            -spec.h,
            PauliString::single(n, i, crate::simulator::Pauli::X),
        ));
    }
    Observable::new(terms)
}

/// When an optimizer run ends.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StopRule {
    /// Stop once the exponential moving average of the objective improves
    /// by less than the threshold, or at the iteration cap.
    #[default]
    Ema,
    /// Always run the full iteration budget.
    FixedIterations,
}

/// ADAM settings and stopping rule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub max_iterations: usize,
    pub ema_decay: f64,
    pub convergence_threshold: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub stop: StopRule,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            learning_rate: 0.1,
            max_iterations: 100,
            ema_decay: 0.9,
            convergence_threshold: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            stop: StopRule::Ema,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if !(self.ema_decay > 0.0 && self.ema_decay < 1.0) {
            return Err(Error::invalid("EMA decay must lie in (0, 1)"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::invalid("ADAM moment decays must lie in [0, 1)"));
        }
        Ok(())
    }
}

struct Adam {
    cfg: OptimizerConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(cfg: OptimizerConfig, d: usize) -> Self {
        Adam {
            cfg,
            m: vec![0.0; d],
            v: vec![0.0; d],
            t: 0,
        }
    }

    fn step(&mut self, x: &mut [f64], g: &[f64]) {
        self.t += 1;
        let c = &self.cfg;
        let b1t = 1.0 - c.beta1.powi(self.t);
        let b2t = 1.0 - c.beta2.powi(self.t);
        for i in 0..x.len() {
            self.m[i] = c.beta1 * self.m[i] + (1.0 - c.beta1) * g[i];
            self.v[i] = c.beta2 * self.v[i] + (1.0 - c.beta2) * g[i] * g[i];
            x[i] -= c.learning_rate * (self.m[i] / b1t) / ((self.v[i] / b2t).sqrt() + c.epsilon);
        }
    }
}

/// EMA-based early stopping.
struct EmaStop {
    decay: f64,
    threshold: f64,
    ema: Option<f64>,
}

impl EmaStop {
    /// Feeds one objective value; true when the run should stop.
    fn update(&mut self, f: f64) -> bool {
        match self.ema {
            None => {
                self.ema = Some(f);
                false
            }
            Some(prev) => {
                let next = self.decay * prev + (1.0 - self.decay) * f;
                self.ema = Some(next);
                prev - next < self.threshold
            }
        }
    }
}

/// One row of an optimization trace.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub objective: f64,
}

/// Result of an optimization run; `x_best` is the argmin over all iterates.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizationResult {
    pub x_best: Vec<f64>,
    pub best_objective: f64,
    pub trace: Vec<TraceRow>,
    pub shots_used: u64,
}

fn optimize<F, G>(
    x0: &[f64],
    cfg: &OptimizerConfig,
    mut objective: F,
    mut gradient: G,
) -> Result<OptimizationResult>
where
    F: FnMut(usize, &[f64]) -> Result<(f64, u64)>,
    G: FnMut(usize, &[f64]) -> Result<(Vec<f64>, u64)>,
{
    cfg.validate()?;
    let mut x = x0.to_vec();
    let mut adam = Adam::new(*cfg, x.len());
    let mut stop = EmaStop {
        decay: cfg.ema_decay,
        threshold: cfg.convergence_threshold,
        ema: None,
    };
    let mut best = (f64::INFINITY, x.clone());
    let mut trace = Vec::new();
    let mut shots = 0;
    for it in 0..=cfg.max_iterations {
        let (f, used) = objective(it, &x)?;
        shots += used;
        if !f.is_finite() {
            return Err(Error::Numerical(format!(
                "objective is not finite at iteration {it}"
            )));
        }
        trace.push(TraceRow {
            iteration: it,
            objective: f,
        });
        if f < best.0 {
            best = (f, x.clone());
        }
        let converged = cfg.stop == StopRule::Ema && stop.update(f) && it > 0;
        if it == cfg.max_iterations || converged {
            break;
        }
        let (g, used) = gradient(it, &x)?;
        shots += used;
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "gradient is not finite at iteration {it}"
            )));
        }
        adam.step(&mut x, &g);
    }
    Ok(OptimizationResult {
        x_best: best.1,
        best_objective: best.0,
        trace,
        shots_used: shots,
    })
}

/// Minimizes the surrogate prediction of `⟨H⟩` with ADAM. Entirely classical.
pub fn pretrain(
    model: &SurrogateCS,
    h: &Observable,
    x0: &[f64],
    cfg: &OptimizerConfig,
) -> Result<OptimizationResult> {
    check_len("pre-training start point", model.dim(), x0.len())?;
    optimize(
        x0,
        cfg,
        |_, x| Ok((model.predict(x, h)?, 0)),
        |_, x| Ok((model.predict_gradient(x, h)?, 0)),
    )
}

/// Four-term shift coefficients for gates whose generator has eigenvalues
/// `{0, ±1/2}` (CRZ).
const CRZ_SHIFT_NEAR: f64 = (SQRT_2 + 1.0) / (4.0 * SQRT_2);
const CRZ_SHIFT_FAR: f64 = (SQRT_2 - 1.0) / (4.0 * SQRT_2);

fn shifted(c: &ConcreteCircuit, gate: usize, delta: f64) -> ConcreteCircuit {
    let mut out = c.clone();
    if let Some(a) = out.gates[gate].angle.as_mut() {
        *a += delta;
    }
    out
}

/// Parameter-shift gradient of `x ↦ Tr(H ρ̃(x))`.
///
/// Every slot-driven gate is shifted on its own; derivatives with respect to
/// the gate angle are combined through the chain rule `∂θ/∂x = a`. Pauli
/// rotations use the two-term rule, CRZ the four-term rule. Returns the
/// gradient and the number of device shots spent.
pub fn parameter_shift_gradient(
    c: &ParamCircuit,
    x: &[f64],
    h: &Observable,
    noise: &PauliNoiseSpec,
    backend: Backend,
    seed: u64,
) -> Result<(Vec<f64>, u64)> {
    let bound = c.bind(x)?;
    let per_eval = backend.shots_per_evaluation(h);
    let occurrences: Vec<(usize, usize, f64, GateKind)> = c
        .gates()
        .iter()
        .enumerate()
        .filter_map(|(i, g)| match g.angle {
            Some(AngleSource::Slot { slot, a, .. }) => Some((i, slot, a, g.kind)),
            _ => None,
        })
        .collect();
    let eval = |circ: &ConcreteCircuit, tag: &[u64]| -> Result<f64> {
        Ok(evaluate(circ, h, noise, backend, rng::derive_seed(seed, tag))?.value)
    };
    let parts = occurrences
        .par_iter()
        .enumerate()
        .map(|(k, &(gate, slot, a, kind))| {
            let k = k as u64;
            let dtheta = if kind == GateKind::Crz {
                let near = eval(&shifted(&bound, gate, FRAC_PI_2), &[k, 0])?
                    - eval(&shifted(&bound, gate, -FRAC_PI_2), &[k, 1])?;
                let far = eval(&shifted(&bound, gate, 3.0 * FRAC_PI_2), &[k, 2])?
                    - eval(&shifted(&bound, gate, -3.0 * FRAC_PI_2), &[k, 3])?;
                CRZ_SHIFT_NEAR * near - CRZ_SHIFT_FAR * far
            } else {
                0.5 * (eval(&shifted(&bound, gate, FRAC_PI_2), &[k, 0])?
                    - eval(&shifted(&bound, gate, -FRAC_PI_2), &[k, 1])?)
            };
            let evals = if kind == GateKind::Crz { 4 } else { 2 };
            Ok((slot, a * dtheta, evals * per_eval))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut grad = vec![0.0; c.num_slots()];
    let mut shots = 0;
    for (slot, g, s) in parts {
        grad[slot] += g;
        shots += s;
    }
    Ok((grad, shots))
}

/// ADAM on parameter-shift gradients measured on `backend`; returns the
/// best measured parameters.
pub fn finetune(
    c: &ParamCircuit,
    h: &Observable,
    x_start: &[f64],
    noise: &PauliNoiseSpec,
    cfg: &OptimizerConfig,
    backend: Backend,
    seed: u64,
) -> Result<OptimizationResult> {
    check_len("fine-tuning start point", c.num_slots(), x_start.len())?;
    let per_eval = backend.shots_per_evaluation(h);
    optimize(
        x_start,
        cfg,
        |it, x| {
            let f = evaluate(
                &c.bind(x)?,
                h,
                noise,
                backend,
                rng::derive_seed(seed, &[it as u64, 0]),
            )?
            .value;
            Ok((f, per_eval))
        },
        |it, x| {
            parameter_shift_gradient(
                c,
                x,
                h,
                noise,
                backend,
                rng::derive_seed(seed, &[it as u64, 1]),
            )
        },
    )
}

/// `|f − E0| / (Emax − E0)`.
pub fn normalized_deviation(f: f64, e0: f64, emax: f64) -> Result<f64> {
    if emax.is_nan() || e0.is_nan() || emax <= e0 {
        return Err(Error::invalid("degenerate spectrum: Emax must exceed E0"));
    }
    Ok((f - e0).abs() / (emax - e0))
}

/// Inputs of the measurement-cost comparison.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerInputs {
    /// Training examples.
    pub n: u64,
    /// Snapshots per training example.
    pub t: u64,
    /// Parameter count of the ansatz.
    pub d: u64,
    /// Fine-tuning iterations after pre-training.
    pub finetune_iterations: u64,
    /// Shots per circuit evaluation on the device.
    pub shots_per_evaluation: u64,
    /// Iterations of the conventional parameter-shift VQE baseline.
    pub baseline_iterations: u64,
}

/// Measurement totals and their ratio to the conventional baseline.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ShotLedger {
    pub dataset_shots: u64,
    pub finetune_shots: u64,
    pub total_shots: u64,
    pub baseline_shots: u64,
    pub ratio: f64,
}

/// Pure accounting: `n·T` dataset shots, `iterations · 2d · shots` for
/// fine-tuning and for the baseline.
pub fn shot_ledger(inp: &LedgerInputs) -> ShotLedger {
    let dataset = inp.n * inp.t;
    let per_iter = 2 * inp.d * inp.shots_per_evaluation;
    let finetune = inp.finetune_iterations * per_iter;
    let baseline = inp.baseline_iterations * per_iter;
    let total = dataset + finetune;
    ShotLedger {
        dataset_shots: dataset,
        finetune_shots: finetune,
        total_shots: total,
        baseline_shots: baseline,
        ratio: if baseline == 0 {
            f64::NAN
        } else {
            total as f64 / baseline as f64
        },
    }
}

/// Ansatz, Hamiltonian, noise and exact spectrum of one VQE experiment.
#[derive(Clone, Debug)]
pub struct VqeTestbed {
    pub spec: TfimSpec,
    pub layers: usize,
    pub noise: PauliNoiseSpec,
    pub ansatz: ParamCircuit,
    pub hamiltonian: Observable,
    pub e0: f64,
    pub emax: f64,
}

impl VqeTestbed {
    pub fn new(spec: TfimSpec, layers: usize, noise: PauliNoiseSpec) -> Result<Self> {
        let hamiltonian = tfim_observable(&spec)?;
        let (e0, emax) = crate::simulator::exact_spectrum(&hamiltonian)?;
        Ok(VqeTestbed {
            spec,
            layers,
            noise,
            ansatz: crate::circuits::build_vqe_ansatz(spec.n, layers)?,
            hamiltonian,
            e0,
            emax,
        })
    }

    pub fn dim(&self) -> usize {
        self.ansatz.num_slots()
    }

    /// `⟨H⟩` of the noisy circuit on `backend`.
    pub fn energy(&self, x: &[f64], backend: Backend, seed: u64) -> Result<f64> {
        Ok(evaluate(
            &self.ansatz.bind(x)?,
            &self.hamiltonian,
            &self.noise,
            backend,
            seed,
        )?
        .value)
    }

    pub fn deviation(&self, x: &[f64], backend: Backend, seed: u64) -> Result<f64> {
        normalized_deviation(self.energy(x, backend, seed)?, self.e0, self.emax)
    }
}

/// Shadow dataset size and truncation of a pre-training surrogate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurrogateSettings {
    pub n: usize,
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(rename = "lambda")]
    pub truncation: usize,
}

/// Everything produced by [`VqeTestbed::pretrain`].
#[derive(Debug)]
pub struct PretrainOutcome {
    pub model: SurrogateCS,
    pub x0: Vec<f64>,
    /// True (noisy) deviation at the random start.
    pub initial_deviation: f64,
    pub result: OptimizationResult,
    /// True (noisy) deviation at the surrogate's best point.
    pub pretrained_deviation: f64,
}

impl VqeTestbed {
    /// Uniform start point on `[−π, π)^d` from the stream `(seed, 2)`.
    pub fn random_point(&self, seed: u64) -> Vec<f64> {
        use rand::Rng as _;
        let mut r = rng::stream(seed, &[2]);
        (0..self.dim())
            .map(|_| r.random_range(-std::f64::consts::PI..std::f64::consts::PI))
            .collect()
    }

    /// Shadow dataset of the noisy ansatz, drawn under `(seed, 1)`.
    pub fn shadow_dataset(&self, n: usize, t: usize, seed: u64) -> Result<TrainingDatasetCS> {
        TrainingDatasetCS::generate(
            &self.ansatz,
            &self.noise,
            n,
            t,
            rng::derive_seed(seed, &[1]),
        )
    }

    /// Collects a shadow dataset, fits the kernel surrogate and minimizes its
    /// energy prediction from a random start. Deviations are measured on
    /// `eval` with noise.
    pub fn pretrain(
        &self,
        settings: &SurrogateSettings,
        cfg: &OptimizerConfig,
        eval: Backend,
        seed: u64,
    ) -> Result<PretrainOutcome> {
        let data = self.shadow_dataset(settings.n, settings.t, seed)?;
        self.pretrain_on(
            std::sync::Arc::new(data),
            settings.truncation,
            cfg,
            eval,
            seed,
        )
    }

    /// [`VqeTestbed::pretrain`] on an existing dataset.
    pub fn pretrain_on(
        &self,
        data: std::sync::Arc<TrainingDatasetCS>,
        truncation: usize,
        cfg: &OptimizerConfig,
        eval: Backend,
        seed: u64,
    ) -> Result<PretrainOutcome> {
        let model = fit_cs(data, truncation)?;
        let x0 = self.random_point(seed);
        let initial_deviation = self.deviation(&x0, eval, rng::derive_seed(seed, &[3]))?;
        let result = pretrain(&model, &self.hamiltonian, &x0, cfg)?;
        let pretrained_deviation =
            self.deviation(&result.x_best, eval, rng::derive_seed(seed, &[4]))?;
        Ok(PretrainOutcome {
            model,
            x0,
            initial_deviation,
            result,
            pretrained_deviation,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuits::{build_vqe_ansatz, GateOp, InitialState};
    use crate::surrogate_cs::{fit_cs, TrainingDatasetCS};
    use rand::Rng as _;
    use std::sync::Arc;

    #[test]
    fn tfim_examples() {
        let o = tfim_observable(&TfimSpec {
            n: 2,
            j: 1.0,
            h: 0.0,
        })
        .unwrap();
        assert_eq!(o.terms()[0], (-1.0, "ZZ".parse().unwrap()));
        let o = tfim_observable(&TfimSpec {
            n: 6,
            j: -0.1,
            h: -0.5,
        })
        .unwrap();
        assert_eq!(o.terms().iter().filter(|t| t.0 == 0.1).count(), 5);
        assert_eq!(o.terms().iter().filter(|t| t.0 == 0.5).count(), 6);
        assert!((o.norm_bound() - 3.5).abs() < 1e-12);
        assert_eq!(o.locality(), 2);
        assert!(tfim_observable(&TfimSpec {
            n: 1,
            j: 1.0,
            h: 1.0
        })
        .is_err());
    }

    #[test]
    fn deviation_examples() {
        assert_eq!(normalized_deviation(-2.0, -2.0, 2.0).unwrap(), 0.0);
        assert_eq!(normalized_deviation(2.0, -2.0, 2.0).unwrap(), 1.0);
        assert!(normalized_deviation(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn ledger_arithmetic() {
        let l = shot_ledger(&LedgerInputs {
            n: 2000,
            t: 10,
            d: 11,
            finetune_iterations: 0,
            shots_per_evaluation: 40_000,
            baseline_iterations: 100,
        });
        assert_eq!(l.dataset_shots, 20_000);
        assert_eq!(l.baseline_shots, 88_000_000);
        assert!((l.ratio * 100.0 - 0.0227).abs() < 1e-4);
    }

    #[test]
    fn shift_rule_on_single_rotation() {
        let c = ParamCircuit::new(
            1,
            vec![GateOp::rotation(GateKind::Rx, &[0], AngleSource::slot(0))],
            1,
            InitialState::AllZero,
        )
        .unwrap();
        let z = Observable::from_terms(&[(1.0, "Z")]).unwrap();
        for x in [-2.0, 0.3, 1.1] {
            let (g, shots) = parameter_shift_gradient(
                &c,
                &[x],
                &z,
                &PauliNoiseSpec::noiseless(),
                Backend::Exact,
                0,
            )
            .unwrap();
            assert!((g[0] + f64::sin(x)).abs() < 1e-12);
            assert_eq!(shots, 0);
        }
    }

    fn finite_difference(
        c: &ParamCircuit,
        x: &[f64],
        h: &Observable,
        noise: &PauliNoiseSpec,
    ) -> Vec<f64> {
        let f = |x: &[f64]| {
            evaluate(&c.bind(x).unwrap(), h, noise, Backend::Exact, 0)
                .unwrap()
                .value
        };
        let step = 1e-5;
        (0..x.len())
            .map(|j| {
                let (mut xp, mut xm) = (x.to_vec(), x.to_vec());
                xp[j] += step;
                xm[j] -= step;
                (f(&xp) - f(&xm)) / (2.0 * step)
            })
            .collect()
    }

    #[test]
    fn shift_rule_matches_finite_differences() {
        let noise = PauliNoiseSpec::symmetric(0.01, 0.01, 0.0);
        let c = build_vqe_ansatz(4, 2).unwrap();
        let h = tfim_observable(&TfimSpec {
            n: 4,
            j: -0.1,
            h: -0.5,
        })
        .unwrap();
        let mut r = rng::stream(1, &[]);
        let x: Vec<f64> = (0..c.num_slots())
            .map(|_| r.random_range(-3.0..3.0))
            .collect();
        let (g, _) = parameter_shift_gradient(&c, &x, &h, &noise, Backend::Exact, 0).unwrap();
        let fd = finite_difference(&c, &x, &h, &noise);
        for (a, b) in g.iter().zip(&fd) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn shift_rule_handles_shared_affine_and_crz_slots() {
        let gates = vec![
            GateOp::clifford(GateKind::H, &[0]),
            GateOp::clifford(GateKind::H, &[1]),
            GateOp::rotation(
                GateKind::Crz,
                &[0, 1],
                AngleSource::Slot {
                    slot: 0,
                    a: 1.5,
                    b: 0.2,
                },
            ),
            GateOp::rotation(
                GateKind::Rx,
                &[1],
                AngleSource::Slot {
                    slot: 0,
                    a: -2.0,
                    b: 3.0,
                },
            ),
            GateOp::rotation(GateKind::Ry, &[0], AngleSource::slot(1)),
            GateOp::rotation(GateKind::Crz, &[1, 0], AngleSource::slot(1)),
        ];
        let c = ParamCircuit::new(2, gates, 2, InitialState::AllZero).unwrap();
        let h = Observable::from_terms(&[(1.0, "XI"), (0.4, "ZY"), (-0.7, "IX")]).unwrap();
        let noise = PauliNoiseSpec::symmetric(0.02, 0.01, 0.0);
        for x in [[0.3, -1.2], [2.0, 0.7]] {
            let (g, _) = parameter_shift_gradient(&c, &x, &h, &noise, Backend::Exact, 0).unwrap();
            let fd = finite_difference(&c, &x, &h, &noise);
            for (a, b) in g.iter().zip(&fd) {
                assert!((a - b).abs() < 1e-6, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn pretrain_contracts() {
        let tb = VqeTestbed::new(
            TfimSpec {
                n: 3,
                j: -0.1,
                h: -0.5,
            },
            1,
            PauliNoiseSpec::noiseless(),
        )
        .unwrap();
        let ds = TrainingDatasetCS::generate(&tb.ansatz, &tb.noise, 50, 4, 1).unwrap();
        let x0: Vec<f64> = vec![0.5; tb.dim()];
        // Λ = 0: constant model, zero gradient, start point returned.
        let m0 = fit_cs(Arc::new(ds.clone()), 0).unwrap();
        let r = pretrain(&m0, &tb.hamiltonian, &x0, &OptimizerConfig::default()).unwrap();
        assert_eq!(r.x_best, x0);
        let m2 = fit_cs(Arc::new(ds), 2).unwrap();
        let cfg = OptimizerConfig {
            stop: StopRule::FixedIterations,
            ..Default::default()
        };
        let r = pretrain(&m2, &tb.hamiltonian, &x0, &cfg).unwrap();
        assert_eq!(r.trace.len(), 101);
        let min = r
            .trace
            .iter()
            .map(|t| t.objective)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(r.best_objective, min);
        assert!(r.best_objective <= r.trace[0].objective);
    }

    #[test]
    fn finetune_bookkeeping() {
        let tb = VqeTestbed::new(
            TfimSpec {
                n: 3,
                j: -0.1,
                h: -0.5,
            },
            1,
            PauliNoiseSpec::noiseless(),
        )
        .unwrap();
        let x0 = vec![0.4; tb.dim()];
        let zero = OptimizerConfig {
            max_iterations: 0,
            ..Default::default()
        };
        let r = finetune(
            &tb.ansatz,
            &tb.hamiltonian,
            &x0,
            &tb.noise,
            &zero,
            Backend::Exact,
            0,
        )
        .unwrap();
        assert_eq!(r.x_best, x0);
        let cfg = OptimizerConfig {
            max_iterations: 30,
            stop: StopRule::FixedIterations,
            ..Default::default()
        };
        let r = finetune(
            &tb.ansatz,
            &tb.hamiltonian,
            &x0,
            &tb.noise,
            &cfg,
            Backend::Exact,
            0,
        )
        .unwrap();
        assert!(r.best_objective <= r.trace[0].objective);
        let r = finetune(
            &tb.ansatz,
            &tb.hamiltonian,
            &x0,
            &tb.noise,
            &zero,
            Backend::Shots { shots: 100 },
            0,
        )
        .unwrap();
        // One objective evaluation with two measurement groups.
        assert_eq!(r.shots_used, 100 * 2);
        let one = OptimizerConfig {
            max_iterations: 1,
            stop: StopRule::FixedIterations,
            ..Default::default()
        };
        let r = finetune(
            &tb.ansatz,
            &tb.hamiltonian,
            &x0,
            &tb.noise,
            &one,
            Backend::Shots { shots: 100 },
            0,
        )
        .unwrap();
        assert_eq!(r.shots_used, 100 * 2 * (2 + 2 * tb.dim() as u64));
    }

    #[test]
    fn pretrain_pipeline_is_reproducible() {
        let tb = VqeTestbed::new(
            TfimSpec {
                n: 3,
                j: -0.1,
                h: -0.5,
            },
            1,
            PauliNoiseSpec::symmetric(0.005, 0.005, 0.0),
        )
        .unwrap();
        let settings = SurrogateSettings {
            n: 60,
            t: 20,
            truncation: 2,
        };
        let a = tb
            .pretrain(&settings, &OptimizerConfig::default(), Backend::Exact, 9)
            .unwrap();
        let b = tb
            .pretrain(&settings, &OptimizerConfig::default(), Backend::Exact, 9)
            .unwrap();
        assert_eq!(a.x0, b.x0);
        assert_eq!(a.result.x_best, b.result.x_best);
        assert_eq!(a.pretrained_deviation, b.pretrained_deviation);
        assert!(a.x0.iter().all(|v| v.abs() <= std::f64::consts::PI));
        assert!((0.0..=1.0).contains(&a.pretrained_deviation));
        assert!(a.result.best_objective <= a.result.trace[0].objective);
    }
}
