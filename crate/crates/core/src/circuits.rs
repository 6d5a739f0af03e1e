//! Circuit intermediate representation and the application circuit builders.
//!
//! A [`ParamCircuit`] is an ordered gate list whose rotation angles are either
//! fixed or read from a parameter slot through an affine map `a * x[slot] + b`.
//! Several gates may read the same slot; that is how layer-wise correlated
//! parameters are expressed. [`ParamCircuit::bind`] resolves every angle and
//! produces a [`ConcreteCircuit`] that the simulators consume.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{check_len, Error, Result};

/// Gate kinds understood by every backend.
///
/// Rotation kinds follow the `exp(-i θ G / 2)` convention with generator
/// `G ∈ {X, Y, Z, Z⊗Z}`. `CRZ` applies `RZ(θ)` to its second qubit when the
/// first qubit is `|1⟩`. `Sdg` is the inverse phase gate and exists so that
/// gate folding stays closed over the IR.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GateKind {
    H,
    S,
    Sdg,
    X,
    #[serde(rename = "CNOT")]
    Cnot,
    #[serde(rename = "CZ")]
    Cz,
    #[serde(rename = "RZ")]
    Rz,
    #[serde(rename = "RX")]
    Rx,
    #[serde(rename = "RY")]
    Ry,
    #[serde(rename = "RZZ")]
    Rzz,
    #[serde(rename = "CRZ")]
    Crz,
}

impl GateKind {
    /// Whether the gate carries an angle.
    pub fn is_rotation(self) -> bool {
        matches!(
            self,
            GateKind::Rz | GateKind::Rx | GateKind::Ry | GateKind::Rzz | GateKind::Crz
        )
    }

    /// Number of qubits the gate acts on.
    pub fn arity(self) -> usize {
        match self {
            GateKind::Cnot | GateKind::Cz | GateKind::Rzz | GateKind::Crz => 2,
            _ => 1,
        }
    }

    /// Kind of the adjoint gate (rotations negate their angle instead).
    pub fn adjoint(self) -> GateKind {
        match self {
            GateKind::S => GateKind::Sdg,
            GateKind::Sdg => GateKind::S,
            k => k,
        }
    }
}

/// Where a rotation angle comes from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum AngleSource {
    /// A constant angle in radians.
    Fixed(f64),
    /// `angle = a * x[slot] + b`.
    Slot { slot: usize, a: f64, b: f64 },
}

impl AngleSource {
    /// Plain slot reference with the identity map.
    pub fn slot(slot: usize) -> Self {
        AngleSource::Slot {
            slot,
            a: 1.0,
            b: 0.0,
        }
    }

    /// Resolves the angle for parameter vector `x` (callers check bounds).
    pub fn resolve(&self, x: &[f64]) -> f64 {
        match *self {
            AngleSource::Fixed(theta) => theta,
            AngleSource::Slot { slot, a, b } => a * x[slot] + b,
        }
    }
}

/// One gate of a parametric circuit.
#[derive(Clone, Debug, PartialEq)]
pub struct GateOp {
    pub kind: GateKind,
    pub qubits: Vec<usize>,
    pub angle: Option<AngleSource>,
}

impl GateOp {
    /// The inverse gate; slot-driven angles negate both map coefficients.
    pub fn adjoint(&self) -> GateOp {
        GateOp {
            kind: self.kind.adjoint(),
            qubits: self.qubits.clone(),
            angle: self.angle.map(|a| match a {
                AngleSource::Fixed(t) => AngleSource::Fixed(-t),
                AngleSource::Slot { slot, a, b } => AngleSource::Slot { slot, a: -a, b: -b },
            }),
        }
    }

    pub fn clifford(kind: GateKind, qubits: &[usize]) -> Self {
        GateOp {
            kind,
            qubits: qubits.to_vec(),
            angle: None,
        }
    }

    pub fn rotation(kind: GateKind, qubits: &[usize], angle: AngleSource) -> Self {
        GateOp {
            kind,
            qubits: qubits.to_vec(),
            angle: Some(angle),
        }
    }
}

/// Initial product state of a circuit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum InitialState {
    /// `|0…0⟩`
    #[default]
    AllZero,
    /// `|+…+⟩`
    AllPlus,
}

/// A gate sequence over `num_qubits` qubits with `num_slots` parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamCircuit {
    num_qubits: usize,
    gates: Vec<GateOp>,
    num_slots: usize,
    initial_state: InitialState,
}

fn validate_gate(kind: GateKind, qubits: &[usize], has_angle: bool, n: usize) -> Result<()> {
    if qubits.len() != kind.arity() {
        return Err(Error::invalid(format!(
            "{kind:?} acts on {} qubits, got {}",
            kind.arity(),
            qubits.len()
        )));
    }
    if let Some(&q) = qubits.iter().find(|&&q| q >= n) {
        return Err(Error::invalid(format!(
            "qubit index {q} out of range for {n} qubits"
        )));
    }
    if qubits.len() == 2 && qubits[0] == qubits[1] {
        return Err(Error::invalid(format!(
            "{kind:?} on repeated qubit {}",
            qubits[0]
        )));
    }
    if kind.is_rotation() != has_angle {
        return Err(Error::invalid(format!(
            "{kind:?} must {}carry an angle",
            if kind.is_rotation() { "" } else { "not " }
        )));
    }
    Ok(())
}

impl ParamCircuit {
    /// Validates and assembles a circuit.
    pub fn new(
        num_qubits: usize,
        gates: Vec<GateOp>,
        num_slots: usize,
        initial_state: InitialState,
    ) -> Result<Self> {
        if num_qubits == 0 {
            return Err(Error::invalid("circuit needs at least one qubit"));
        }
        let mut referenced = vec![false; num_slots];
        for g in &gates {
            validate_gate(g.kind, &g.qubits, g.angle.is_some(), num_qubits)?;
            match g.angle {
                Some(AngleSource::Fixed(t)) if !t.is_finite() => {
                    return Err(Error::invalid("fixed angle is not finite"));
                }
                Some(AngleSource::Slot { slot, a, b }) => {
                    if slot >= num_slots {
                        return Err(Error::invalid(format!(
                            "slot {slot} out of range for {num_slots} slots"
                        )));
                    }
                    if !a.is_finite() || !b.is_finite() {
                        return Err(Error::invalid("affine angle map is not finite"));
                    }
                    referenced[slot] = true;
                }
                _ => {}
            }
        }
        if let Some(s) = referenced.iter().position(|r| !r) {
            return Err(Error::invalid(format!(
                "slot {s} is not referenced by any gate"
            )));
        }
        Ok(ParamCircuit {
            num_qubits,
            gates,
            num_slots,
            initial_state,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn num_slots(&self) -> usize {
        self.num_slots
    }

    pub fn gates(&self) -> &[GateOp] {
        &self.gates
    }

    pub fn initial_state(&self) -> InitialState {
        self.initial_state
    }

    /// Slot index of every slot-driven gate, in gate order.
    ///
    /// Each entry is one occurrence of a parameter in the expanded
    /// (one-coordinate-per-gate) parametrization.
    pub fn slot_occurrences(&self) -> Vec<usize> {
        self.gates
            .iter()
            .filter_map(|g| match g.angle {
                Some(AngleSource::Slot { slot, .. }) => Some(slot),
                _ => None,
            })
            .collect()
    }

    /// Resolves every angle for parameter vector `x`.
    pub fn bind(&self, x: &[f64]) -> Result<ConcreteCircuit> {
        check_len("bind_parameters", self.num_slots, x.len())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(
                "parameter vector contains non-finite entries",
            ));
        }
        let gates = self
            .gates
            .iter()
            .map(|g| ConcreteGate {
                kind: g.kind,
                qubits: g.qubits.clone(),
                angle: g.angle.map(|a| a.resolve(x)),
            })
            .collect();
        Ok(ConcreteCircuit {
            num_qubits: self.num_qubits,
            gates,
            initial_state: self.initial_state,
        })
    }

    /// Serializes to the JSON circuit schema.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&CircuitRecord::from(self))?)
    }

    /// SHA-256 of the compact JSON form; identifies datasets with their circuit.
    pub fn content_hash(&self) -> Result<String> {
        Ok(crate::digest::sha256_hex(
            serde_json::to_string(&CircuitRecord::from(self))?.as_bytes(),
        ))
    }

    /// Parses and validates the JSON circuit schema.
    pub fn from_json(text: &str) -> Result<Self> {
        let rec: CircuitRecord = serde_json::from_str(text)?;
        rec.try_into()
    }
}

/// A gate with its angle resolved.
#[derive(Clone, Debug, PartialEq)]
pub struct ConcreteGate {
    pub kind: GateKind,
    pub qubits: Vec<usize>,
    pub angle: Option<f64>,
}

impl ConcreteGate {
    pub fn adjoint(&self) -> ConcreteGate {
        ConcreteGate {
            kind: self.kind.adjoint(),
            qubits: self.qubits.clone(),
            angle: self.angle.map(|t| -t),
        }
    }
}

/// A circuit with every angle resolved to radians.
#[derive(Clone, Debug, PartialEq)]
pub struct ConcreteCircuit {
    pub num_qubits: usize,
    pub gates: Vec<ConcreteGate>,
    pub initial_state: InitialState,
}

impl ConcreteCircuit {
    /// Builds a concrete circuit from gates, validating each one.
    pub fn new(
        num_qubits: usize,
        gates: Vec<ConcreteGate>,
        initial_state: InitialState,
    ) -> Result<Self> {
        if num_qubits == 0 {
            return Err(Error::invalid("circuit needs at least one qubit"));
        }
        for g in &gates {
            validate_gate(g.kind, &g.qubits, g.angle.is_some(), num_qubits)?;
            if g.angle.is_some_and(|t| !t.is_finite()) {
                return Err(Error::invalid("angle is not finite"));
            }
        }
        Ok(ConcreteCircuit {
            num_qubits,
            gates,
            initial_state,
        })
    }

    /// Replaces every native `RZZ(θ)` by `CNOT · RZ(θ) · CNOT`.
    pub fn lower_rzz(&self) -> ConcreteCircuit {
        let mut gates = Vec::with_capacity(self.gates.len());
        for g in &self.gates {
            if g.kind == GateKind::Rzz {
                let (a, b) = (g.qubits[0], g.qubits[1]);
                let cx = ConcreteGate {
                    kind: GateKind::Cnot,
                    qubits: vec![a, b],
                    angle: None,
                };
                gates.push(cx.clone());
                gates.push(ConcreteGate {
                    kind: GateKind::Rz,
                    qubits: vec![b],
                    angle: g.angle,
                });
                gates.push(cx);
            } else {
                gates.push(g.clone());
            }
        }
        ConcreteCircuit {
            gates,
            ..self.clone()
        }
    }

    /// Replaces every `CRZ(θ)` by `RZ(θ/2) · CNOT · RZ(−θ/2) · CNOT` on the target.
    pub fn lower_crz(&self) -> ConcreteCircuit {
        let mut gates = Vec::with_capacity(self.gates.len());
        for g in &self.gates {
            if g.kind == GateKind::Crz {
                let (c, t) = (g.qubits[0], g.qubits[1]);
                let theta = g.angle.unwrap_or(0.0);
                let cx = ConcreteGate {
                    kind: GateKind::Cnot,
                    qubits: vec![c, t],
                    angle: None,
                };
                gates.push(ConcreteGate {
                    kind: GateKind::Rz,
                    qubits: vec![t],
                    angle: Some(theta / 2.0),
                });
                gates.push(cx.clone());
                gates.push(ConcreteGate {
                    kind: GateKind::Rz,
                    qubits: vec![t],
                    angle: Some(-theta / 2.0),
                });
                gates.push(cx);
            } else {
                gates.push(g.clone());
            }
        }
        ConcreteCircuit {
            gates,
            ..self.clone()
        }
    }

    /// Two-qubit gate count, used for hardware-style accounting.
    pub fn two_qubit_gate_count(&self) -> usize {
        self.gates.iter().filter(|g| g.kind.arity() == 2).count()
    }
}

/// Gate folding `G → G (G† G)^p`, giving `(2p+1)` times the gate count.
pub fn fold_gates(c: &ConcreteCircuit, p: usize) -> ConcreteCircuit {
    let mut gates = Vec::with_capacity(c.gates.len() * (2 * p + 1));
    for g in &c.gates {
        gates.push(g.clone());
        let inv = g.adjoint();
        for _ in 0..p {
            gates.push(inv.clone());
            gates.push(g.clone());
        }
    }
    ConcreteCircuit { gates, ..c.clone() }
}

/// [`fold_gates`] before binding, so the folded circuit keeps its slots.
pub fn fold_param_circuit(c: &ParamCircuit, p: usize) -> ParamCircuit {
    let mut gates = Vec::with_capacity(c.gates.len() * (2 * p + 1));
    for g in &c.gates {
        gates.push(g.clone());
        let inv = g.adjoint();
        for _ in 0..p {
            gates.push(inv.clone());
            gates.push(g.clone());
        }
    }
    ParamCircuit { gates, ..c.clone() }
}

/// Two-qubit noise-amplification benchmark `CRZ(π)·CRZ(π)·RX(x)` with the
/// rotation on qubit 0, which also controls both CRZ gates. Noiseless
/// `⟨Z⊗I⟩ = cos x` from `|00⟩`.
pub fn build_fold_benchmark() -> ParamCircuit {
    let gates = vec![
        GateOp::rotation(GateKind::Rx, &[0], AngleSource::slot(0)),
        GateOp::rotation(GateKind::Crz, &[0, 1], AngleSource::Fixed(PI)),
        GateOp::rotation(GateKind::Crz, &[0, 1], AngleSource::Fixed(PI)),
    ];
    ParamCircuit::new(2, gates, 1, InitialState::AllZero).expect("benchmark circuit is valid")
}

/// Slot index of the `i`-th RX gate in layer `l` of the VQE ansatz.
pub fn vqe_rx_slot(n: usize, l: usize, i: usize) -> usize {
    l * (2 * n - 1) + i
}

/// Slot index of the RZZ gate on `(i, i+1)` in layer `l` of the VQE ansatz.
pub fn vqe_rzz_slot(n: usize, l: usize, i: usize) -> usize {
    l * (2 * n - 1) + n + i
}

/// Trotter-style hardware-efficient ansatz for the transverse-field Ising chain.
///
/// Each of the `layers` layers applies `RX` on every qubit followed by `RZZ`
/// on each nearest-neighbour pair, every gate with its own slot, starting from
/// `|+…+⟩`.
pub fn build_vqe_ansatz(n: usize, layers: usize) -> Result<ParamCircuit> {
    if n < 2 {
        return Err(Error::invalid("VQE ansatz needs at least 2 qubits"));
    }
    if layers < 1 {
        return Err(Error::invalid("VQE ansatz needs at least one layer"));
    }
    let mut gates = Vec::with_capacity(layers * (2 * n - 1));
    for l in 0..layers {
        for i in 0..n {
            gates.push(GateOp::rotation(
                GateKind::Rx,
                &[i],
                AngleSource::slot(vqe_rx_slot(n, l, i)),
            ));
        }
        for i in 0..n - 1 {
            gates.push(GateOp::rotation(
                GateKind::Rzz,
                &[i, i + 1],
                AngleSource::slot(vqe_rzz_slot(n, l, i)),
            ));
        }
    }
    ParamCircuit::new(n, gates, layers * (2 * n - 1), InitialState::AllPlus)
}

fn fspt_drive_layer(n: usize, gates: &mut Vec<GateOp>) {
    for q in 0..n {
        gates.push(GateOp::rotation(
            GateKind::Rx,
            &[q],
            AngleSource::Slot {
                slot: 0,
                a: -2.0,
                b: PI,
            },
        ));
    }
}

fn fspt_coupling_layer(n: usize, gates: &mut Vec<GateOp>) {
    // Qubit q+1 controls a Z rotation on qubit q.
    for q in 0..n - 1 {
        gates.push(GateOp::rotation(
            GateKind::Crz,
            &[q + 1, q],
            AngleSource::Fixed(-PI),
        ));
    }
    for q in 1..n - 1 {
        gates.push(GateOp::rotation(
            GateKind::Ry,
            &[q],
            AngleSource::Slot {
                slot: q,
                a: -2.0,
                b: 0.0,
            },
        ));
    }
    for q in 0..n - 1 {
        gates.push(GateOp::rotation(
            GateKind::Crz,
            &[q + 1, q],
            AngleSource::Fixed(PI),
        ));
    }
}

/// Gate index just after each half-period of the Floquet circuit.
///
/// Entry `k-1` is the number of gates that make up the first `k` layers,
/// which alternate drive (RX) and coupling layers starting with a drive.
pub fn fspt_boundaries(n: usize, n_k: usize) -> Vec<usize> {
    let drive = n;
    let coupling = 2 * (n - 1) + (n - 2);
    let mut total = 0;
    (0..n_k)
        .map(|j| {
            total += if j % 2 == 0 { drive } else { coupling };
            total
        })
        .collect()
}

/// Floquet circuit after `k` half-periods on `n` qubits.
///
/// Slot 0 is the drive imperfection `δ` (every RX reads `π − 2δ`); slots
/// `1..n-1` are the couplings `J_2..J_{n-1}` read by the bulk RY gates as
/// `−2J`. Layers alternate drive and coupling, starting with a drive, so odd
/// `k` ends with a drive layer.
pub fn build_fspt_circuit(n: usize, k: usize) -> Result<ParamCircuit> {
    if n < 3 {
        return Err(Error::invalid("Floquet circuit needs at least 3 qubits"));
    }
    if k < 1 {
        return Err(Error::invalid("Floquet circuit needs k >= 1"));
    }
    let mut gates = Vec::new();
    for j in 0..k {
        if j % 2 == 0 {
            fspt_drive_layer(n, &mut gates);
        } else {
            fspt_coupling_layer(n, &mut gates);
        }
    }
    // With k = 1 the coupling slots are never read; keep them referenced by
    // declaring only the drive slot in that case.
    let num_slots = if k == 1 { 1 } else { n - 1 };
    ParamCircuit::new(n, gates, num_slots, InitialState::AllZero)
}

// ---------------------------------------------------------------------------
// JSON schema

#[derive(Serialize, Deserialize)]
struct GateRecord {
    kind: GateKind,
    qubits: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    slot: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    angle: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    b: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct CircuitRecord {
    num_qubits: usize,
    gates: Vec<GateRecord>,
    num_slots: usize,
    #[serde(default)]
    initial_state: InitialState,
}

impl From<&ParamCircuit> for CircuitRecord {
    fn from(c: &ParamCircuit) -> Self {
        let gates = c
            .gates
            .iter()
            .map(|g| {
                let mut rec = GateRecord {
                    kind: g.kind,
                    qubits: g.qubits.clone(),
                    slot: None,
                    angle: None,
                    a: None,
                    b: None,
                };
                match g.angle {
                    Some(AngleSource::Fixed(t)) => rec.angle = Some(t),
                    Some(AngleSource::Slot { slot, a, b }) => {
                        rec.slot = Some(slot);
                        rec.a = Some(a);
                        rec.b = Some(b);
                    }
                    None => {}
                }
                rec
            })
            .collect();
        CircuitRecord {
            num_qubits: c.num_qubits,
            gates,
            num_slots: c.num_slots,
            initial_state: c.initial_state,
        }
    }
}

impl TryFrom<CircuitRecord> for ParamCircuit {
    type Error = Error;

    fn try_from(rec: CircuitRecord) -> Result<Self> {
        let gates = rec
            .gates
            .into_iter()
            .map(|g| {
                let angle = match (g.slot, g.angle) {
                    (Some(_), Some(_)) => {
                        return Err(Error::invalid("gate has both slot and angle"));
                    }
                    (Some(slot), None) => Some(AngleSource::Slot {
                        slot,
                        a: g.a.unwrap_or(1.0),
                        b: g.b.unwrap_or(0.0),
                    }),
                    (None, Some(t)) => Some(AngleSource::Fixed(t)),
                    (None, None) => None,
                };
                Ok(GateOp {
                    kind: g.kind,
                    qubits: g.qubits,
                    angle,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        ParamCircuit::new(rec.num_qubits, gates, rec.num_slots, rec.initial_state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vqe_slot_counts() {
        let c = build_vqe_ansatz(2, 1).unwrap();
        assert_eq!(c.num_slots(), 3);
        let kinds: Vec<_> = c.gates().iter().map(|g| g.kind).collect();
        assert_eq!(kinds, vec![GateKind::Rx, GateKind::Rx, GateKind::Rzz]);
        assert_eq!(build_vqe_ansatz(6, 1).unwrap().num_slots(), 11);
        assert_eq!(build_vqe_ansatz(20, 1).unwrap().num_slots(), 39);
        assert_eq!(build_vqe_ansatz(4, 3).unwrap().num_slots(), 21);
        assert!(build_vqe_ansatz(1, 1).is_err());
        assert!(build_vqe_ansatz(3, 0).is_err());
    }

    #[test]
    fn fspt_structure() {
        let c = build_fspt_circuit(3, 1).unwrap();
        assert_eq!(c.gates().len(), 3);
        assert!(c.gates().iter().all(|g| g.kind == GateKind::Rx));

        let c = build_fspt_circuit(8, 2).unwrap();
        assert_eq!(c.num_slots(), 7);
        assert_eq!(c.gates().len(), 8 + 2 * 7 + 6);
        // Drive layer comes first in time.
        assert!(c.gates()[..8].iter().all(|g| g.kind == GateKind::Rx));

        let c = build_fspt_circuit(8, 79).unwrap();
        let b = fspt_boundaries(8, 79);
        assert_eq!(*b.last().unwrap(), c.gates().len());
        let drives = c.gates().iter().filter(|g| g.kind == GateKind::Rx).count();
        assert_eq!(drives, 40 * 8);
        assert!(c.gates()[c.gates().len() - 8..]
            .iter()
            .all(|g| g.kind == GateKind::Rx));
        assert!(build_fspt_circuit(2, 3).is_err());
    }

    #[test]
    fn fspt_binding_examples() {
        let c = build_fspt_circuit(4, 2).unwrap();
        let b = c.bind(&[0.0, 0.3, 0.4]).unwrap();
        for g in b.gates.iter().filter(|g| g.kind == GateKind::Rx) {
            assert_eq!(g.angle, Some(PI));
        }
        let b = c.bind(&[0.5, 1.0, 0.0]).unwrap();
        assert_eq!(b.gates[0].angle, Some(PI - 1.0));
        let ry: Vec<_> = b.gates.iter().filter(|g| g.kind == GateKind::Ry).collect();
        assert_eq!(ry[0].qubits, vec![1]);
        assert_eq!(ry[0].angle, Some(-2.0));
    }

    #[test]
    fn zero_vector_binds_zero_angles() {
        let c = build_vqe_ansatz(3, 2).unwrap();
        let b = c.bind(&vec![0.0; c.num_slots()]).unwrap();
        assert!(b.gates.iter().all(|g| g.angle == Some(0.0)));
    }

    #[test]
    fn bind_rejects_bad_input() {
        let c = build_vqe_ansatz(2, 1).unwrap();
        assert!(c.bind(&[0.0; 2]).is_err());
        assert!(c.bind(&[0.0, f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn fold_counts() {
        let c = ConcreteCircuit::new(
            1,
            vec![ConcreteGate {
                kind: GateKind::Rx,
                qubits: vec![0],
                angle: Some(0.7),
            }],
            InitialState::AllZero,
        )
        .unwrap();
        assert_eq!(fold_gates(&c, 0), c);
        let f = fold_gates(&c, 1);
        let angles: Vec<_> = f.gates.iter().map(|g| g.angle.unwrap()).collect();
        assert_eq!(angles, vec![0.7, -0.7, 0.7]);
        assert_eq!(fold_gates(&c, 16).gates.len(), 33);
    }

    #[test]
    fn invalid_gates_are_rejected() {
        let bad = ParamCircuit::new(
            2,
            vec![GateOp::clifford(GateKind::Cnot, &[1, 1])],
            0,
            InitialState::AllZero,
        );
        assert!(bad.is_err());
        let bad = ParamCircuit::new(
            2,
            vec![GateOp::clifford(GateKind::Rx, &[0])],
            0,
            InitialState::AllZero,
        );
        assert!(bad.is_err());
        let unref = ParamCircuit::new(
            1,
            vec![GateOp::rotation(GateKind::Rx, &[0], AngleSource::slot(0))],
            2,
            InitialState::AllZero,
        );
        assert!(unref.is_err());
    }

    #[test]
    fn json_round_trip() {
        let c = build_fspt_circuit(4, 3).unwrap();
        let text = c.to_json().unwrap();
        let back = ParamCircuit::from_json(&text).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn lowering_counts() {
        let c = build_vqe_ansatz(3, 1).unwrap().bind(&[0.1; 5]).unwrap();
        let l = c.lower_rzz();
        assert_eq!(l.gates.len(), 3 + 3 * 2);
        assert_eq!(l.two_qubit_gate_count(), 4);
    }

    #[test]
    fn param_folding_commutes_with_binding() {
        let c = build_fold_benchmark();
        for p in [0, 1, 4] {
            let f = fold_param_circuit(&c, p);
            assert_eq!(f.num_slots(), 1);
            assert_eq!(f.gates().len(), 3 * (2 * p + 1));
            let x = [0.7];
            assert_eq!(f.bind(&x).unwrap(), fold_gates(&c.bind(&x).unwrap(), p));
        }
    }
}
