//! Dense matrices and extreme eigenvalues of Pauli-sum observables.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use super::pauli::Observable;
use super::MAX_SPECTRUM_QUBITS;
use crate::error::{Error, Result};

/// Dense `2^N × 2^N` matrix of `o` in the computational basis.
pub fn dense_matrix(o: &Observable) -> Result<DMatrix<C64>> {
    let n = o.num_qubits();
    if n > MAX_SPECTRUM_QUBITS {
        return Err(Error::guard(
            "dense spectrum qubit",
            n as u128,
            MAX_SPECTRUM_QUBITS as u128,
        ));
    }
    let dim = 1usize << n;
    let mut m = DMatrix::<C64>::zeros(dim, dim);
    for (coeff, p) in o.terms() {
        let masks = p.masks();
        let global = C64::i().powu(masks.n_y) * *coeff;
        for b in 0..dim {
            let sign = if (b & masks.phase).count_ones() % 2 == 0 {
                1.0
            } else {
                -1.0
            };
            m[(b ^ masks.flip, b)] += global * sign;
        }
    }
    Ok(m)
}

/// Ground and highest energies `(E0, Emax)`.
pub fn exact_spectrum(o: &Observable) -> Result<(f64, f64)> {
    let m = dense_matrix(o)?;
    let eig: Vec<f64> = if m.iter().all(|v| v.im == 0.0) {
        m.map(|v| v.re)
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .collect()
    } else {
        m.symmetric_eigenvalues().iter().cloned().collect()
    };
    let lo = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Numerical("eigenvalue computation failed".into()));
    }
    Ok((lo, hi))
}
