use std::ffi::{CStr, CString};
use std::ptr;

use qsurrogate_ffi::*;

fn last_error() -> String {
    let p = qs_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn expectation_through_handles() {
    unsafe {
        let mut c = ptr::null_mut();
        assert_eq!(qs_circuit_vqe_ansatz(2, 1, &mut c), QsStatus::Ok);
        assert_eq!(qs_circuit_num_slots(c), 3);
        assert_eq!(qs_circuit_num_qubits(c), 2);
        let json = CString::new(r#"[{"coeff": 1.0, "pauli_string": "XI"}]"#).unwrap();
        let mut o = ptr::null_mut();
        assert_eq!(qs_observable_from_json(json.as_ptr(), &mut o), QsStatus::Ok);
        // From |++⟩ with every angle zero ⟨X⊗I⟩ = 1; readout flips scale it by 1 − 2 p_e.
        let x = [0.0; 3];
        let mut v = 0.0;
        let noise = QsNoise::default();
        assert_eq!(
            qs_expectation(c, x.as_ptr(), 3, o, noise, 0, 1, &mut v),
            QsStatus::Ok
        );
        assert!((v - 1.0).abs() < 1e-12);
        let noise = QsNoise {
            p_e: 0.1,
            ..Default::default()
        };
        assert_eq!(
            qs_expectation(c, x.as_ptr(), 3, o, noise, 0, 1, &mut v),
            QsStatus::Ok
        );
        assert!((v - 0.8).abs() < 1e-12);

        assert_eq!(
            qs_expectation(c, x.as_ptr(), 2, o, noise, 0, 1, &mut v),
            QsStatus::Dimension
        );
        assert!(last_error().contains("dimension"));
        assert_eq!(
            qs_expectation(ptr::null(), x.as_ptr(), 3, o, noise, 0, 1, &mut v),
            QsStatus::NullPointer
        );
        qs_observable_free(o);
        qs_circuit_free(c);
        qs_circuit_free(ptr::null_mut());
    }
}

#[test]
fn kernel_and_parse_errors() {
    unsafe {
        let x = [0.3, -1.2];
        let mut k = 0.0;
        assert_eq!(
            qs_kernel(x.as_ptr(), x.as_ptr(), 2, 2, &mut k),
            QsStatus::Ok
        );
        // On the diagonal every z_j = 2, so κ = 1 + 2·2 + 2·2 = 9.
        assert!((k - 9.0).abs() < 1e-12);
        assert!((k - qsurrogate::features::kernel_bruteforce(&x, &x, 2).unwrap()).abs() < 1e-12);
        let bad = CString::new("{not json").unwrap();
        let mut c = ptr::null_mut();
        assert_eq!(qs_circuit_from_json(bad.as_ptr(), &mut c), QsStatus::Parse);
        assert!(c.is_null());
        let mut m = ptr::null_mut();
        assert_eq!(
            qs_model_from_json(ptr::null(), &mut m),
            QsStatus::NullPointer
        );
        assert!(!CStr::from_ptr(qs_version()).to_bytes().is_empty());
    }
}

#[test]
fn model_round_trip() {
    use qsurrogate::features::{FrequencyMode, FrequencySet, FrequencySetDescriptor};
    use qsurrogate::surrogate_qs::{fit_qs, ExampleQS, TrainingDatasetQS};

    let examples = (0..20)
        .map(|i| {
            let x = vec![i as f64 * 0.3 - 3.0];
            ExampleQS {
                y: x[0].cos(),
                x,
                shots: 0,
            }
        })
        .collect();
    let ds = TrainingDatasetQS::new(examples, None).unwrap();
    let fs = FrequencySet::from_descriptor(&FrequencySetDescriptor {
        mode: FrequencyMode::C,
        d: 1,
        truncation: 1,
        m: None,
        seed: None,
    })
    .unwrap();
    let model = fit_qs(&ds, &fs, 1e-9, None).unwrap();
    let json = CString::new(model.to_json().unwrap()).unwrap();
    unsafe {
        let mut h = ptr::null_mut();
        assert_eq!(qs_model_from_json(json.as_ptr(), &mut h), QsStatus::Ok);
        assert_eq!(qs_model_input_dim(h), 1);
        let x = [0.4];
        let mut y = 0.0;
        assert_eq!(qs_model_predict(h, x.as_ptr(), 1, &mut y), QsStatus::Ok);
        assert!((y - model.predict(&x).unwrap()).abs() < 1e-15);
        assert!((y - 0.4f64.cos()).abs() < 1e-6);
        qs_model_free(h);
    }
}

#[test]
fn run_config_reports_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    std::fs::write(&cfg, "task = \"eval\"\n").unwrap();
    let path = CString::new(cfg.to_str().unwrap()).unwrap();
    assert_eq!(
        unsafe { qs_run_config(path.as_ptr(), ptr::null()) },
        QsStatus::Config
    );
    assert!(last_error().contains("[eval]"));
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/qsurrogate.h");
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("probe.c");
    std::fs::write(
        &src,
        format!(
            "#include \"{header}\"\nint main(void) {{ QsNoise n = {{0}}; QsCircuit *c = 0; \
             return (int)qs_circuit_num_slots(c) + (int)n.p_x + (QS_STATUS_OK); }}\n"
        ),
    )
    .unwrap();
    let Ok(out) = std::process::Command::new("cc")
        .args(["-std=c99", "-fsyntax-only", "-Wall", "-Werror"])
        .arg(&src)
        .output()
    else {
        eprintln!("no C compiler available; skipping header check");
        return;
    };
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}
