//! In-place amplitude kernels shared by the statevector and density backends.
//!
//! Buffers are indexed by basis states with qubit `q` stored in bit `q`. The
//! density backend reuses the same kernels by viewing `ρ` as a vector over
//! `2N` bits (rows in the low bits, columns in the high bits).

use num_complex::Complex64 as C64;

use super::pauli::Pauli;
use crate::circuits::GateKind;

pub type Mat2 = [[C64; 2]; 2];

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// How a resolved gate acts on amplitudes.
#[derive(Clone, Copy, Debug)]
pub enum GateAction {
    Single(Mat2),
    /// Diagonal two-qubit gate; entry index is `b0 | (b1 << 1)`.
    Diag2([C64; 4]),
    Cnot,
}

impl GateAction {
    /// Complex conjugate of the gate matrix.
    pub fn conj(&self) -> GateAction {
        match self {
            GateAction::Single(m) => GateAction::Single([
                [m[0][0].conj(), m[0][1].conj()],
                [m[1][0].conj(), m[1][1].conj()],
            ]),
            GateAction::Diag2(d) => {
                GateAction::Diag2([d[0].conj(), d[1].conj(), d[2].conj(), d[3].conj()])
            }
            GateAction::Cnot => GateAction::Cnot,
        }
    }
}

fn phase(theta: f64) -> C64 {
    C64::from_polar(1.0, theta)
}

/// Matrix of a gate kind at the given angle (ignored for Clifford kinds).
pub fn gate_action(kind: GateKind, angle: f64) -> GateAction {
    let (c, s) = ((angle / 2.0).cos(), (angle / 2.0).sin());
    let h = std::f64::consts::FRAC_1_SQRT_2;
    match kind {
        GateKind::H => GateAction::Single([
            [C64::new(h, 0.0), C64::new(h, 0.0)],
            [C64::new(h, 0.0), C64::new(-h, 0.0)],
        ]),
        GateKind::S => GateAction::Single([[ONE, ZERO], [ZERO, I]]),
        GateKind::Sdg => GateAction::Single([[ONE, ZERO], [ZERO, -I]]),
        GateKind::X => GateAction::Single([[ZERO, ONE], [ONE, ZERO]]),
        GateKind::Rx => GateAction::Single([
            [C64::new(c, 0.0), C64::new(0.0, -s)],
            [C64::new(0.0, -s), C64::new(c, 0.0)],
        ]),
        GateKind::Ry => GateAction::Single([
            [C64::new(c, 0.0), C64::new(-s, 0.0)],
            [C64::new(s, 0.0), C64::new(c, 0.0)],
        ]),
        GateKind::Rz => {
            GateAction::Single([[phase(-angle / 2.0), ZERO], [ZERO, phase(angle / 2.0)]])
        }
        GateKind::Cnot => GateAction::Cnot,
        GateKind::Cz => GateAction::Diag2([ONE, ONE, ONE, -ONE]),
        GateKind::Rzz => {
            let (even, odd) = (phase(-angle / 2.0), phase(angle / 2.0));
            GateAction::Diag2([even, odd, odd, even])
        }
        GateKind::Crz => GateAction::Diag2([ONE, phase(-angle / 2.0), ONE, phase(angle / 2.0)]),
    }
}

/// Matrix of a single-qubit Pauli.
pub fn pauli_matrix(p: Pauli) -> Mat2 {
    match p {
        Pauli::I => [[ONE, ZERO], [ZERO, ONE]],
        Pauli::X => [[ZERO, ONE], [ONE, ZERO]],
        Pauli::Y => [[ZERO, -I], [I, ZERO]],
        Pauli::Z => [[ONE, ZERO], [ZERO, -ONE]],
    }
}

pub fn apply_1q(buf: &mut [C64], q: usize, m: &Mat2) {
    let stride = 1usize << q;
    let len = buf.len();
    let mut base = 0;
    while base < len {
        for i in base..base + stride {
            let a = buf[i];
            let b = buf[i + stride];
            buf[i] = m[0][0] * a + m[0][1] * b;
            buf[i + stride] = m[1][0] * a + m[1][1] * b;
        }
        base += 2 * stride;
    }
}

pub fn apply_diag2(buf: &mut [C64], q0: usize, q1: usize, d: &[C64; 4]) {
    for (i, amp) in buf.iter_mut().enumerate() {
        let idx = ((i >> q0) & 1) | (((i >> q1) & 1) << 1);
        *amp *= d[idx];
    }
}

pub fn apply_cnot(buf: &mut [C64], control: usize, target: usize) {
    let cm = 1usize << control;
    let tm = 1usize << target;
    for i in 0..buf.len() {
        if i & cm != 0 && i & tm == 0 {
            buf.swap(i, i | tm);
        }
    }
}

/// Applies a gate action on the given qubit bits.
pub fn apply_action(buf: &mut [C64], action: &GateAction, qubits: &[usize]) {
    match action {
        GateAction::Single(m) => apply_1q(buf, qubits[0], m),
        GateAction::Diag2(d) => apply_diag2(buf, qubits[0], qubits[1], d),
        GateAction::Cnot => apply_cnot(buf, qubits[0], qubits[1]),
    }
}

/// Applies a single-qubit Pauli in place without a general matrix product.
pub fn apply_pauli(buf: &mut [C64], q: usize, p: Pauli) {
    let m = 1usize << q;
    match p {
        Pauli::I => {}
        Pauli::X => {
            for i in 0..buf.len() {
                if i & m == 0 {
                    buf.swap(i, i | m);
                }
            }
        }
        Pauli::Y => {
            for i in 0..buf.len() {
                if i & m == 0 {
                    let a = buf[i];
                    let b = buf[i | m];
                    buf[i] = -I * b;
                    buf[i | m] = I * a;
                }
            }
        }
        Pauli::Z => {
            for (i, amp) in buf.iter_mut().enumerate() {
                if i & m != 0 {
                    *amp = -*amp;
                }
            }
        }
    }
}

/// Applies the complex conjugate of a single-qubit Pauli (`Y* = −Y`).
pub fn apply_pauli_conj(buf: &mut [C64], q: usize, p: Pauli) {
    apply_pauli(buf, q, p);
    if p == Pauli::Y {
        buf.iter_mut().for_each(|a| *a = -*a);
    }
}
