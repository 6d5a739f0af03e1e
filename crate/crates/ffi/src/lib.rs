//! C ABI over the `qsurrogate` core crate.
//!
//! Objects cross the boundary as opaque handles created by the `*_from_json`
//! and builder functions and released with the matching `*_free`. Every
//! fallible call returns a [`QsStatus`]; on failure the message is kept per
//! thread and can be read with [`qs_last_error_message`]. Panics are caught
//! and reported as [`QsStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use qsurrogate::backend::{evaluate, Backend};
use qsurrogate::circuits::{build_vqe_ansatz, ParamCircuit};
use qsurrogate::features::kernel;
use qsurrogate::harness::{run_config, RunOptions};
use qsurrogate::simulator::{Observable, PauliNoiseSpec};
use qsurrogate::surrogate_qs::SurrogateQS;
use qsurrogate::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Dimension = 3,
    Guard = 4,
    Numerical = 5,
    Config = 6,
    Io = 7,
    Parse = 8,
    Panic = 9,
}

/// Pauli error rates of the noise model.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct QsNoise {
    pub p_x: f64,
    pub p_y: f64,
    pub p_z: f64,
    /// Clifford-gate error rate.
    pub p_c: f64,
    /// Readout flip probability.
    pub p_e: f64,
}

impl From<QsNoise> for PauliNoiseSpec {
    fn from(n: QsNoise) -> Self {
        PauliNoiseSpec {
            p_x: n.p_x,
            p_y: n.p_y,
            p_z: n.p_z,
            p_c: n.p_c,
            p_e: n.p_e,
            ..Default::default()
        }
    }
}

/// Opaque parametric circuit.
pub struct QsCircuit(ParamCircuit);
/// Opaque weighted Pauli-sum observable.
pub struct QsObservable(Observable);
/// Opaque fitted ridge surrogate.
pub struct QsModel(SurrogateQS);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> QsStatus {
    match e {
        Error::InvalidInput(_) => QsStatus::InvalidInput,
        Error::Dimension { .. } => QsStatus::Dimension,
        Error::Guard { .. } => QsStatus::Guard,
        Error::Numerical(_) => QsStatus::Numerical,
        Error::Config(_) => QsStatus::Config,
        Error::Io(_) => QsStatus::Io,
        Error::Json(_) | Error::Csv(_) => QsStatus::Parse,
    }
}

fn guard<F: FnOnce() -> Result<(), QsStatus>>(f: F) -> QsStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QsStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("panic inside qsurrogate".into());
            QsStatus::Panic
        }
    }
}

trait IntoStatus<T> {
    fn status(self) -> Result<T, QsStatus>;
}

impl<T> IntoStatus<T> for qsurrogate::Result<T> {
    fn status(self) -> Result<T, QsStatus> {
        self.map_err(|e| {
            let s = status_of(&e);
            set_error(e.to_string());
            s
        })
    }
}

fn null_error(what: &str) -> QsStatus {
    set_error(format!("{what} is null"));
    QsStatus::NullPointer
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, QsStatus> {
    if p.is_null() {
        return Err(null_error(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        QsStatus::InvalidInput
    })
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], QsStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null_error(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, QsStatus> {
    p.as_ref().ok_or_else(|| null_error(what))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), QsStatus> {
    if out.is_null() {
        return Err(null_error(what));
    }
    out.write(value);
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn qs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses a circuit from its JSON form.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn qs_circuit_from_json(
    json: *const c_char,
    out: *mut *mut QsCircuit,
) -> QsStatus {
    guard(|| {
        let text = str_arg(json, "json")?;
        let c = ParamCircuit::from_json(text).status()?;
        write_out(out, Box::into_raw(Box::new(QsCircuit(c))), "out")
    })
}

/// Builds the layered TFIM ansatz on `n` qubits.
///
/// # Safety
/// `out` must be a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn qs_circuit_vqe_ansatz(
    n: usize,
    layers: usize,
    out: *mut *mut QsCircuit,
) -> QsStatus {
    guard(|| {
        let c = build_vqe_ansatz(n, layers).status()?;
        write_out(out, Box::into_raw(Box::new(QsCircuit(c))), "out")
    })
}

/// Number of parameter slots, or 0 for NULL.
///
/// # Safety
/// `c` must be NULL or a live circuit handle.
#[no_mangle]
pub unsafe extern "C" fn qs_circuit_num_slots(c: *const QsCircuit) -> usize {
    c.as_ref().map_or(0, |c| c.0.num_slots())
}

/// Number of qubits, or 0 for NULL.
///
/// # Safety
/// `c` must be NULL or a live circuit handle.
#[no_mangle]
pub unsafe extern "C" fn qs_circuit_num_qubits(c: *const QsCircuit) -> usize {
    c.as_ref().map_or(0, |c| c.0.num_qubits())
}

/// Releases a circuit; NULL is ignored.
///
/// # Safety
/// `c` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qs_circuit_free(c: *mut QsCircuit) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Parses an observable from a JSON list of `{coeff, pauli_string}`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn qs_observable_from_json(
    json: *const c_char,
    out: *mut *mut QsObservable,
) -> QsStatus {
    guard(|| {
        let o = Observable::from_json(str_arg(json, "json")?).status()?;
        write_out(out, Box::into_raw(Box::new(QsObservable(o))), "out")
    })
}

/// Releases an observable; NULL is ignored.
///
/// # Safety
/// `o` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qs_observable_free(o: *mut QsObservable) {
    if !o.is_null() {
        drop(Box::from_raw(o));
    }
}

/// Estimates `Tr(O ρ(x))` under `noise`: exactly when `shots` is 0,
/// otherwise from `shots` readouts per measurement group.
///
/// # Safety
/// Handles must be live, `x` must point to `len` doubles and `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn qs_expectation(
    circuit: *const QsCircuit,
    x: *const f64,
    len: usize,
    observable: *const QsObservable,
    noise: QsNoise,
    shots: usize,
    seed: u64,
    out: *mut f64,
) -> QsStatus {
    guard(|| {
        let c = ref_arg(circuit, "circuit")?;
        let o = ref_arg(observable, "observable")?;
        let x = slice_arg(x, len, "x")?;
        let bound = c.0.bind(x).status()?;
        let est = evaluate(
            &bound,
            &o.0,
            &noise.into(),
            Backend::from_shots(shots),
            seed,
        )
        .status()?;
        write_out(out, est.value, "out")
    })
}

/// Truncated trigonometric kernel between two `d`-dimensional points.
///
/// # Safety
/// `x` and `xp` must each point to `d` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qs_kernel(
    x: *const f64,
    xp: *const f64,
    d: usize,
    truncation: usize,
    out: *mut f64,
) -> QsStatus {
    guard(|| {
        let a = slice_arg(x, d, "x")?;
        let b = slice_arg(xp, d, "xp")?;
        write_out(out, kernel(a, b, truncation).status()?, "out")
    })
}

/// Loads a fitted ridge surrogate from its JSON record.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn qs_model_from_json(
    json: *const c_char,
    out: *mut *mut QsModel,
) -> QsStatus {
    guard(|| {
        let m = SurrogateQS::from_json(str_arg(json, "json")?).status()?;
        write_out(out, Box::into_raw(Box::new(QsModel(m))), "out")
    })
}

/// Input dimension of a model, or 0 for NULL.
///
/// # Safety
/// `m` must be NULL or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn qs_model_input_dim(m: *const QsModel) -> usize {
    m.as_ref().map_or(0, |m| m.0.input_dim())
}

/// Evaluates a model at `x`.
///
/// # Safety
/// `m` must be live, `x` must point to `len` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qs_model_predict(
    m: *const QsModel,
    x: *const f64,
    len: usize,
    out: *mut f64,
) -> QsStatus {
    guard(|| {
        let m = ref_arg(m, "model")?;
        let x = slice_arg(x, len, "x")?;
        write_out(out, m.0.predict(x).status()?, "out")
    })
}

/// Releases a model; NULL is ignored.
///
/// # Safety
/// `m` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qs_model_free(m: *mut QsModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Runs the experiment described by the config file at `config_path`.
/// `out_dir` may be NULL to use the configured directory.
///
/// # Safety
/// `config_path` must be a NUL-terminated string; `out_dir` must be NULL or
/// a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn qs_run_config(
    config_path: *const c_char,
    out_dir: *const c_char,
) -> QsStatus {
    guard(|| {
        let path = PathBuf::from(str_arg(config_path, "config_path")?);
        let out = if out_dir.is_null() {
            None
        } else {
            Some(PathBuf::from(str_arg(out_dir, "out_dir")?))
        };
        let opts = RunOptions::from_env(None, out);
        run_config(&path, &opts).status().map(|_| ())
    })
}
