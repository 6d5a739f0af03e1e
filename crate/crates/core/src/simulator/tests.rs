use super::*;
use crate::circuits::{
    build_vqe_ansatz, fold_gates, ConcreteCircuit, ConcreteGate, GateKind, InitialState,
};
use crate::rng;
use proptest::prelude::*;
use rand::Rng as _;
use std::f64::consts::PI;

fn gate(kind: GateKind, qubits: &[usize], angle: Option<f64>) -> ConcreteGate {
    ConcreteGate {
        kind,
        qubits: qubits.to_vec(),
        angle,
    }
}

fn circuit(n: usize, gates: Vec<ConcreteGate>, init: InitialState) -> ConcreteCircuit {
    ConcreteCircuit::new(n, gates, init).unwrap()
}

fn z(n: usize, q: usize) -> Observable {
    Observable::pauli(PauliString::single(n, q, Pauli::Z)).unwrap()
}

fn random_concrete(n: usize, len: usize, seed: u64) -> ConcreteCircuit {
    crate::testing::random_concrete_circuit(n, len, seed)
}

#[test]
fn rx_gives_cosine() {
    for &x in &[0.0, 0.3, 1.7, -2.5] {
        let c = circuit(
            1,
            vec![gate(GateKind::Rx, &[0], Some(x))],
            InitialState::AllZero,
        );
        let e = expectation(&run_pure(&c).unwrap(), &z(1, 0)).unwrap();
        assert!((e - x.cos()).abs() < 1e-14);
    }
}

#[test]
fn trivial_states() {
    let sv = run_pure(&circuit(3, vec![], InitialState::AllZero)).unwrap();
    assert_eq!(sv.amplitudes()[0].re, 1.0);
    assert!(sv.amplitudes()[1..].iter().all(|a| a.norm() == 0.0));
    let sv = run_pure(&circuit(
        1,
        vec![gate(GateKind::H, &[0], None)],
        InitialState::AllZero,
    ))
    .unwrap();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    assert!((sv.amplitudes()[0].re - h).abs() < 1e-15);
    assert!((sv.amplitudes()[1].re - h).abs() < 1e-15);
    let plus = StateVector::plus(1).unwrap();
    assert!(expectation(&plus, &z(1, 0)).unwrap().abs() < 1e-15);
    let zero = StateVector::zero(1).unwrap();
    assert_eq!(expectation(&zero, &z(1, 0)).unwrap(), 1.0);
}

#[test]
fn guards() {
    assert!(StateVector::zero(25).is_err());
    assert!(DensityMatrix::initial(InitialState::AllZero, 9).is_err());
    let big = Observable::pauli(PauliString::identity(13)).unwrap();
    assert!(exact_spectrum(&big).is_err());
}

#[test]
fn gate_identities() {
    // CRZ(π) = diag(1, 1, -i, i) with control on qubit 0.
    let c = circuit(
        2,
        vec![
            gate(GateKind::H, &[0], None),
            gate(GateKind::H, &[1], None),
            gate(GateKind::Crz, &[0, 1], Some(PI)),
        ],
        InitialState::AllZero,
    );
    let a = run_pure(&c).unwrap();
    let amps = a.amplitudes();
    // index = b0 | b1 << 1
    assert!((amps[0] - num_complex::Complex64::new(0.5, 0.0)).norm() < 1e-14);
    assert!((amps[1] - num_complex::Complex64::new(0.0, -0.5)).norm() < 1e-14);
    assert!((amps[2] - num_complex::Complex64::new(0.5, 0.0)).norm() < 1e-14);
    assert!((amps[3] - num_complex::Complex64::new(0.0, 0.5)).norm() < 1e-14);
}

#[test]
fn rzz_lowering_matches_native() {
    let mut r = rng::stream(11, &[]);
    for _ in 0..100 {
        let theta = r.random_range(-PI..PI);
        let c = circuit(
            2,
            vec![
                gate(GateKind::Ry, &[0], Some(0.4)),
                gate(GateKind::Rx, &[1], Some(-1.1)),
                gate(GateKind::Rzz, &[0, 1], Some(theta)),
            ],
            InitialState::AllPlus,
        );
        let a = run_pure(&c).unwrap();
        let b = run_pure(&c.lower_rzz()).unwrap();
        for (x, y) in a.amplitudes().iter().zip(b.amplitudes()) {
            assert!((x - y).norm() < 1e-12);
        }
    }
}

#[test]
fn crz_lowering_matches_native() {
    for seed in 0..20 {
        let c = random_concrete(3, 15, seed);
        let a = run_pure(&c).unwrap();
        let b = run_pure(&c.lower_crz()).unwrap();
        for (x, y) in a.amplitudes().iter().zip(b.amplitudes()) {
            assert!((x - y).norm() < 1e-12);
        }
    }
}

#[test]
fn folding_preserves_state() {
    for seed in 0..10 {
        let c = random_concrete(4, 12, seed);
        let a = run_pure(&c).unwrap();
        for p in 0..=4 {
            let b = run_pure(&fold_gates(&c, p)).unwrap();
            for (x, y) in a.amplitudes().iter().zip(b.amplitudes()) {
                assert!((x - y).norm() < 1e-10);
            }
        }
    }
}

#[test]
fn noiseless_density_equals_pure() {
    for seed in 0..5 {
        let c = random_concrete(3, 20, seed);
        let rho = run_noisy_exact(&c, &PauliNoiseSpec::noiseless()).unwrap();
        let pure = DensityMatrix::from_pure(&run_pure(&c).unwrap()).unwrap();
        assert!(rho.frobenius_distance(&pure) < 1e-10);
    }
}

#[test]
fn single_qubit_channel_value() {
    let noise = PauliNoiseSpec {
        p_x: 0.03,
        p_y: 0.05,
        p_z: 0.07,
        ..Default::default()
    };
    let c = circuit(
        1,
        vec![gate(GateKind::Rx, &[0], Some(0.0))],
        InitialState::AllZero,
    );
    let rho = run_noisy_exact(&c, &noise).unwrap();
    let e = expectation(&rho, &z(1, 0)).unwrap();
    assert!((e - noise.eigenvalues().2).abs() < 1e-14);
}

#[test]
fn channel_scales_paulis_by_eigenvalues() {
    let noise = PauliNoiseSpec {
        p_x: 0.03,
        p_y: 0.05,
        p_z: 0.11,
        ..Default::default()
    };
    let (qx, qy, qz) = noise.eigenvalues();
    for (p, q) in [(Pauli::X, qx), (Pauli::Y, qy), (Pauli::Z, qz)] {
        let m = kernels::pauli_matrix(p);
        let flat: Vec<_> = m.iter().flatten().cloned().collect();
        let mut rho = DensityMatrix::from_matrix_unchecked(1, &flat).unwrap();
        rho.apply_rotation_noise(0, &noise);
        for r in 0..2 {
            for c in 0..2 {
                assert!((rho.entry(r, c) - m[r][c] * q).norm() < 1e-12);
            }
        }
    }
}

#[test]
fn density_stays_physical() {
    let noise = PauliNoiseSpec::symmetric(0.03, 0.05, 0.0);
    for seed in 0..5 {
        let c = random_concrete(3, 25, seed);
        let rho = run_noisy_exact(&c, &noise).unwrap();
        assert!((rho.trace().re - 1.0).abs() < 1e-10);
        assert!(rho.trace().im.abs() < 1e-10);
        assert!(rho.hermiticity_error() < 1e-10);
        assert!(rho.min_eigenvalue() >= -1e-8);
    }
}

#[test]
fn zero_noise_trajectory_is_pure() {
    let c = random_concrete(4, 30, 3);
    let a = run_pure(&c).unwrap();
    for seed in 0..3 {
        let b = run_noisy_trajectory(&c, &PauliNoiseSpec::noiseless(), seed).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn certain_flip_is_deterministic() {
    let noise = PauliNoiseSpec {
        p_x: 1.0,
        ..Default::default()
    };
    let c = circuit(
        1,
        vec![gate(GateKind::Rz, &[0], Some(0.9))],
        InitialState::AllPlus,
    );
    let x = Observable::from_terms(&[(1.0, "X")]).unwrap();
    let y = Observable::from_terms(&[(1.0, "Y")]).unwrap();
    let ideal = run_pure(&c).unwrap();
    for seed in 0..5 {
        let t = run_noisy_trajectory(&c, &noise, seed).unwrap();
        // X conjugation keeps ⟨X⟩ and flips ⟨Y⟩.
        assert!((expectation(&t, &x).unwrap() - expectation(&ideal, &x).unwrap()).abs() < 1e-14);
        assert!((expectation(&t, &y).unwrap() + expectation(&ideal, &y).unwrap()).abs() < 1e-14);
    }
}

fn fold_benchmark(x: f64) -> ConcreteCircuit {
    circuit(
        2,
        vec![
            gate(GateKind::Rx, &[0], Some(x)),
            gate(GateKind::Crz, &[0, 1], Some(PI)),
            gate(GateKind::Crz, &[0, 1], Some(PI)),
        ],
        InitialState::AllZero,
    )
}

#[test]
fn trajectories_match_exact_channel() {
    let noise = PauliNoiseSpec::symmetric(0.02, 0.02, 0.0);
    let c = fold_benchmark(0.8);
    let o = Observable::from_terms(&[(1.0, "ZI")]).unwrap();
    let exact = expectation(&run_noisy_exact(&c, &noise).unwrap(), &o).unwrap();
    let m = 100_000u64;
    let vals: Vec<f64> = (0..m)
        .map(|s| {
            let sv = run_noisy_trajectory(&c, &noise, rng::derive_seed(5, &[s])).unwrap();
            expectation(&sv, &o).unwrap()
        })
        .collect();
    let mean = vals.iter().sum::<f64>() / m as f64;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
    let se = (var / m as f64).sqrt();
    assert!(
        (mean - exact).abs() < 5.0 * se.max(1e-12),
        "{mean} vs {exact} (se {se})"
    );
}

#[test]
fn trajectories_match_exact_with_clifford_noise() {
    let noise = PauliNoiseSpec::symmetric(0.03, 0.08, 0.0);
    let c = random_concrete(3, 14, 17);
    let o = Observable::from_terms(&[(0.7, "ZZI"), (-0.4, "IXY"), (0.2, "YII")]).unwrap();
    let exact = expectation(&run_noisy_exact(&c, &noise).unwrap(), &o).unwrap();
    let m = 100_000u64;
    let vals: Vec<f64> = (0..m)
        .map(|s| {
            let sv = run_noisy_trajectory(&c, &noise, rng::derive_seed(9, &[s])).unwrap();
            expectation(&sv, &o).unwrap()
        })
        .collect();
    let mean = vals.iter().sum::<f64>() / m as f64;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
    let se = (var / m as f64).sqrt();
    assert!(
        (mean - exact).abs() < 5.0 * se.max(1e-12),
        "{mean} vs {exact} (se {se})"
    );
}

#[test]
fn tfim_expectation_matches_dense_matrix() {
    let o = Observable::from_terms(&[
        (0.1, "ZZII"),
        (0.1, "IZZI"),
        (0.1, "IIZZ"),
        (0.5, "XIII"),
        (0.5, "IXII"),
        (0.5, "IIXI"),
        (0.5, "IIIX"),
    ])
    .unwrap();
    let sv = run_pure(&random_concrete(4, 40, 21)).unwrap();
    let m = dense_matrix(&o).unwrap();
    let psi = nalgebra::DVector::from_column_slice(sv.amplitudes());
    let dense = (psi.adjoint() * &m * &psi)[(0, 0)].re;
    assert!((expectation(&sv, &o).unwrap() - dense).abs() < 1e-10);
    // Complex observable entries go through the same path.
    let oy = Observable::from_terms(&[(0.3, "YIZI"), (-0.2, "XYII")]).unwrap();
    let my = dense_matrix(&oy).unwrap();
    let dense = (psi.adjoint() * &my * &psi)[(0, 0)].re;
    assert!((expectation(&sv, &oy).unwrap() - dense).abs() < 1e-10);
}

#[test]
fn width_mismatch_is_reported() {
    let sv = StateVector::zero(2).unwrap();
    assert!(expectation(&sv, &z(3, 0)).is_err());
}

#[test]
fn spectra() {
    let (lo, hi) = exact_spectrum(&Observable::from_terms(&[(1.0, "Z")]).unwrap()).unwrap();
    assert_eq!((lo, hi), (-1.0, 1.0));
    let (lo, hi) = exact_spectrum(&Observable::from_terms(&[(-1.0, "ZZ")]).unwrap()).unwrap();
    assert!((lo + 1.0).abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);
    let tfim = Observable::from_terms(&[
        (0.1, "ZZII"),
        (0.1, "IZZI"),
        (0.1, "IIZZ"),
        (0.5, "XIII"),
        (0.5, "IXII"),
        (0.5, "IIXI"),
        (0.5, "IIIX"),
    ])
    .unwrap();
    let (lo, hi) = exact_spectrum(&tfim).unwrap();
    // Reference values from an independent numpy diagonalization.
    assert!((lo - -2.015012369228523).abs() < 1e-10);
    assert!((hi - 2.0150123692285233).abs() < 1e-10);
    let (lo, hi) = exact_spectrum(&Observable::from_terms(&[(1.0, "Y")]).unwrap()).unwrap();
    assert!((lo + 1.0).abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);
}

#[test]
fn measurement_examples() {
    let zero = StateVector::zero(1).unwrap();
    let outs = sample_measurement(&zero, &[Basis::Z], 500, 0.0, 1).unwrap();
    assert!(outs.iter().all(|o| o[0] == 0));

    let t = 100_000;
    let outs = sample_measurement(&zero, &[Basis::X], t, 0.0, 2).unwrap();
    let ones = outs.iter().filter(|o| o[0] == 1).count() as f64 / t as f64;
    assert!((ones - 0.5).abs() < 5.0 * (0.25 / t as f64).sqrt());

    let outs = sample_measurement(&zero, &[Basis::Z], t, 0.1, 3).unwrap();
    let ones = outs.iter().filter(|o| o[0] == 1).count() as f64 / t as f64;
    assert!((ones - 0.1).abs() < 3.0 * (0.09 / t as f64).sqrt());
    assert!(sample_measurement(&zero, &[Basis::Z], 0, 0.0, 3).is_err());
}

#[test]
fn basis_rotation_reproduces_x_and_y() {
    let sv = run_pure(&random_concrete(2, 10, 8)).unwrap();
    let t = 100_000;
    for (basis, label) in [(Basis::X, "XI"), (Basis::Y, "YI"), (Basis::Z, "ZI")] {
        let exact = expectation(&sv, &Observable::from_terms(&[(1.0, label)]).unwrap()).unwrap();
        let outs = sample_measurement(&sv, &[basis, Basis::Z], t, 0.0, 4).unwrap();
        let mean = outs.iter().map(|o| 1.0 - 2.0 * o[0] as f64).sum::<f64>() / t as f64;
        let se = ((1.0 - exact * exact).max(1e-12) / t as f64).sqrt();
        assert!(
            (mean - exact).abs() < 5.0 * se,
            "{label}: {mean} vs {exact}"
        );
    }
}

#[test]
fn long_runs_preserve_norm() {
    let c = random_concrete(4, 10_000, 99);
    assert!((run_pure(&c).unwrap().norm() - 1.0).abs() < 1e-10);
    let noise = PauliNoiseSpec::symmetric(0.05, 0.05, 0.0);
    let t = run_noisy_trajectory(&c, &noise, 1).unwrap();
    assert!((t.norm() - 1.0).abs() < 1e-10);
}

#[test]
fn vqe_ansatz_runs() {
    let c = build_vqe_ansatz(4, 1).unwrap();
    let b = c.bind(&[0.0; 7]).unwrap();
    let sv = run_pure(&b).unwrap();
    let x = Observable::from_terms(&[(1.0, "XIII")]).unwrap();
    assert!((expectation(&sv, &x).unwrap() - 1.0).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn random_circuits_keep_norm(seed in any::<u64>(), n in 1usize..5, len in 0usize..40) {
        let c = random_concrete(n, len, seed);
        prop_assert!((run_pure(&c).unwrap().norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn noisy_density_is_normalized(seed in any::<u64>(), p in 0.0f64..0.2, pc in 0.0f64..0.3) {
        let c = random_concrete(2, 12, seed);
        let rho = run_noisy_exact(&c, &PauliNoiseSpec::symmetric(p, pc, 0.0)).unwrap();
        prop_assert!((rho.trace().re - 1.0).abs() < 1e-10);
        prop_assert!(rho.hermiticity_error() < 1e-10);
    }
}
