//! C ABI over `symloss`.
//!
//! Every fallible call returns a [`SymlossStatus`]; on failure the message
//! is kept per thread and read with [`symloss_last_error_message`]. Results
//! go through out-pointers, which are left untouched on failure. Handles are
//! opaque and freed with their `_free` function; strings returned by the
//! library are freed with [`symloss_string_free`]. Array arguments may be
//! null only when their length is 0. Panics never cross the boundary.
#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use ndarray::ArrayView2;
use symloss::calibration::{check_calibration, excess_risk_bound};
use symloss::experiment::{run_grid, ExperimentGrid};
use symloss::loss::symmetry_defect;
use symloss::model::Mlp;
use symloss::risk::{auc_objective_from_scores, ber_objective_from_scores, PairPlan};
use symloss::trainer::{auc_from_scores, bac_from_scores};
use symloss::{Error, Loss};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SymlossStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ParseError = 3,
    Unsupported = 4,
    NumericError = 5,
    IoError = 6,
    Panic = 7,
    Internal = 8,
}

/// Calibration facts for one loss.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SymlossCalibration {
    pub symmetric: bool,
    pub calibrated: bool,
    pub inf_pos: f64,
    pub inf_nonpos: f64,
    /// Slope `C` of the linear calibration transform `ψ(θ) = Cθ`.
    pub psi_slope: f64,
}

/// Opaque loss handle.
pub struct SymlossLoss(Loss);

/// Opaque MLP scorer handle.
pub struct SymlossMlp(Mlp);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(SymlossStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e.root() {
            Error::UnknownLoss(_) | Error::BadDescriptor(_) | Error::Parse(_) | Error::Json(_) | Error::Csv(_) | Error::Config { .. } => {
                SymlossStatus::ParseError
            }
            Error::Unsupported(_) => SymlossStatus::Unsupported,
            Error::NonFiniteGradient { .. } => SymlossStatus::NumericError,
            Error::Io(_) => SymlossStatus::IoError,
            _ => SymlossStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(SymlossStatus::InvalidArgument, msg.into())
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SymlossStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            SymlossStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("internal panic: {msg}"));
            SymlossStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure(SymlossStatus::NullPointer, format!("`{what}` is null")))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| Failure(SymlossStatus::NullPointer, format!("`{what}` is null")))
}

unsafe fn slice<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], Failure> {
    if n == 0 {
        Ok(&[])
    } else if p.is_null() {
        Err(Failure(SymlossStatus::NullPointer, format!("`{what}` is null")))
    } else {
        Ok(std::slice::from_raw_parts(p, n))
    }
}

unsafe fn slice_mut<'a, T>(p: *mut T, n: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if n == 0 {
        Ok(&mut [])
    } else if p.is_null() {
        Err(Failure(SymlossStatus::NullPointer, format!("`{what}` is null")))
    } else {
        Ok(std::slice::from_raw_parts_mut(p, n))
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(SymlossStatus::NullPointer, format!("`{what}` is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(SymlossStatus::ParseError, format!("`{what}` is not valid UTF-8")))
}

fn to_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure(SymlossStatus::Internal, "string contains NUL".into()))
}

/// Message for the last failed call on this thread; empty after a success.
/// Valid until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn symloss_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn symloss_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Frees a string returned by the library. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn symloss_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds a loss from a descriptor such as `"sigmoid"` or
/// `"barrier(b=200,r=50)"`.
#[no_mangle]
pub unsafe extern "C" fn symloss_loss_new(descriptor: *const c_char, out_loss: *mut *mut SymlossLoss) -> SymlossStatus {
    guard(|| {
        let slot = out(out_loss, "out_loss")?;
        let loss: Loss = text(descriptor, "descriptor")?.parse()?;
        *slot = Box::into_raw(Box::new(SymlossLoss(loss)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn symloss_loss_free(loss: *mut SymlossLoss) {
    if !loss.is_null() {
        drop(Box::from_raw(loss));
    }
}

/// Canonical descriptor of the loss; free with `symloss_string_free`.
#[no_mangle]
pub unsafe extern "C" fn symloss_loss_descriptor(loss: *const SymlossLoss, out_text: *mut *mut c_char) -> SymlossStatus {
    guard(|| {
        let slot = out(out_text, "out_text")?;
        *slot = to_c_string(deref(loss, "loss")?.0.to_string())?;
        Ok(())
    })
}

/// `ℓ(z)` for each of the `n` margins.
#[no_mangle]
pub unsafe extern "C" fn symloss_loss_eval(loss: *const SymlossLoss, z: *const f64, n: usize, out_values: *mut f64) -> SymlossStatus {
    guard(|| {
        let loss = &deref(loss, "loss")?.0;
        let z = slice(z, n, "z")?;
        let dst = slice_mut(out_values, n, "out_values")?;
        for (d, &v) in dst.iter_mut().zip(z) {
            *d = loss.eval(v);
        }
        Ok(())
    })
}

/// `ℓ'(z)` (a fixed subgradient at kinks) for each of the `n` margins.
/// Fails with `UNSUPPORTED` for the zero-one loss.
#[no_mangle]
pub unsafe extern "C" fn symloss_loss_grad(loss: *const SymlossLoss, z: *const f64, n: usize, out_values: *mut f64) -> SymlossStatus {
    guard(|| {
        let loss = &deref(loss, "loss")?.0;
        let z = slice(z, n, "z")?;
        let grads = z.iter().map(|&v| loss.deriv(v)).collect::<Result<Vec<_>, _>>()?;
        slice_mut(out_values, n, "out_values")?.copy_from_slice(&grads);
        Ok(())
    })
}

/// `ℓ(z) + ℓ(-z)`; constant in `z` exactly for symmetric losses.
#[no_mangle]
pub unsafe extern "C" fn symloss_loss_symmetry_defect(loss: *const SymlossLoss, z: f64, out_value: *mut f64) -> SymlossStatus {
    guard(|| {
        let loss = &deref(loss, "loss")?.0;
        *out(out_value, "out_value")? = symmetry_defect(loss, z);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn symloss_check_calibration(loss: *const SymlossLoss, out_report: *mut SymlossCalibration) -> SymlossStatus {
    guard(|| {
        let slot = out(out_report, "out_report")?;
        let r = check_calibration(&deref(loss, "loss")?.0);
        *slot = SymlossCalibration {
            symmetric: r.symmetric,
            calibrated: r.calibrated,
            inf_pos: r.inf_pos,
            inf_nonpos: r.inf_nonpos,
            psi_slope: r.psi_slope,
        };
        Ok(())
    })
}

/// Zero-one excess risk bound implied by `surrogate_excess`, for calibrated
/// symmetric losses.
#[no_mangle]
pub unsafe extern "C" fn symloss_excess_risk_bound(loss: *const SymlossLoss, surrogate_excess: f64, out_bound: *mut f64) -> SymlossStatus {
    guard(|| {
        let slot = out(out_bound, "out_bound")?;
        *slot = excess_risk_bound(&deref(loss, "loss")?.0, surrogate_excess)?;
        Ok(())
    })
}

fn nonempty(n: usize, what: &str) -> Result<(), Failure> {
    if n == 0 {
        Err(invalid(format!("`{what}` must not be empty")))
    } else {
        Ok(())
    }
}

/// BER objective `½[mean ℓ(g_cp) + mean ℓ(-g_cn)]` on precomputed scores.
#[no_mangle]
pub unsafe extern "C" fn symloss_ber_objective(
    loss: *const SymlossLoss,
    scores_cp: *const f64,
    n_cp: usize,
    scores_cn: *const f64,
    n_cn: usize,
    out_value: *mut f64,
) -> SymlossStatus {
    guard(|| {
        let loss = &deref(loss, "loss")?.0;
        nonempty(n_cp, "scores_cp")?;
        nonempty(n_cn, "scores_cn")?;
        let (gp, gn) = (slice(scores_cp, n_cp, "scores_cp")?, slice(scores_cn, n_cn, "scores_cn")?);
        *out(out_value, "out_value")? = ber_objective_from_scores(loss, gp, gn);
        Ok(())
    })
}

/// AUC objective: mean of `ℓ(g_cp[i] - g_cn[j])` over all pairs.
#[no_mangle]
pub unsafe extern "C" fn symloss_auc_objective(
    loss: *const SymlossLoss,
    scores_cp: *const f64,
    n_cp: usize,
    scores_cn: *const f64,
    n_cn: usize,
    out_value: *mut f64,
) -> SymlossStatus {
    guard(|| {
        let loss = &deref(loss, "loss")?.0;
        nonempty(n_cp, "scores_cp")?;
        nonempty(n_cn, "scores_cn")?;
        let (gp, gn) = (slice(scores_cp, n_cp, "scores_cp")?, slice(scores_cn, n_cn, "scores_cn")?);
        let plan = PairPlan::All { n_cp, n_cn };
        *out(out_value, "out_value")? = auc_objective_from_scores(loss, gp, gn, &plan);
        Ok(())
    })
}

/// Balanced accuracy of `sign(score)` against labels in {-1, +1}; a zero
/// score counts as wrong.
#[no_mangle]
pub unsafe extern "C" fn symloss_eval_bac(scores: *const f64, labels: *const i8, n: usize, out_value: *mut f64) -> SymlossStatus {
    guard(|| {
        let slot = out(out_value, "out_value")?;
        *slot = bac_from_scores(slice(scores, n, "scores")?, slice(labels, n, "labels")?)?;
        Ok(())
    })
}

/// Mann–Whitney AUC of the scores against labels in {-1, +1}; ties count ½.
#[no_mangle]
pub unsafe extern "C" fn symloss_eval_auc(scores: *const f64, labels: *const i8, n: usize, out_value: *mut f64) -> SymlossStatus {
    guard(|| {
        let slot = out(out_value, "out_value")?;
        *slot = auc_from_scores(slice(scores, n, "scores")?, slice(labels, n, "labels")?)?;
        Ok(())
    })
}

/// Fresh one-hidden-layer ReLU MLP (`hidden = 0` gives a linear scorer).
#[no_mangle]
pub unsafe extern "C" fn symloss_mlp_new(input_dim: usize, hidden: usize, seed: u64, out_mlp: *mut *mut SymlossMlp) -> SymlossStatus {
    guard(|| {
        let slot = out(out_mlp, "out_mlp")?;
        if input_dim == 0 {
            return Err(invalid("input_dim must be at least 1"));
        }
        *slot = Box::into_raw(Box::new(SymlossMlp(Mlp::init(input_dim, hidden, seed))));
        Ok(())
    })
}

/// Loads a model from a JSON checkpoint.
#[no_mangle]
pub unsafe extern "C" fn symloss_mlp_from_json(json: *const c_char, out_mlp: *mut *mut SymlossMlp) -> SymlossStatus {
    guard(|| {
        let slot = out(out_mlp, "out_mlp")?;
        let mlp = Mlp::from_json(text(json, "json")?)?;
        *slot = Box::into_raw(Box::new(SymlossMlp(mlp)));
        Ok(())
    })
}

/// JSON checkpoint of the model; free with `symloss_string_free`.
#[no_mangle]
pub unsafe extern "C" fn symloss_mlp_to_json(mlp: *const SymlossMlp, out_json: *mut *mut c_char) -> SymlossStatus {
    guard(|| {
        let slot = out(out_json, "out_json")?;
        *slot = to_c_string(deref(mlp, "mlp")?.0.to_json())?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn symloss_mlp_input_dim(mlp: *const SymlossMlp, out_dim: *mut usize) -> SymlossStatus {
    guard(|| {
        let slot = out(out_dim, "out_dim")?;
        *slot = deref(mlp, "mlp")?.0.input_dim();
        Ok(())
    })
}

/// Scores `n_rows` row-major patterns of width `n_cols` into `out_scores`.
#[no_mangle]
pub unsafe extern "C" fn symloss_mlp_forward(
    mlp: *const SymlossMlp,
    x: *const f64,
    n_rows: usize,
    n_cols: usize,
    out_scores: *mut f64,
) -> SymlossStatus {
    guard(|| {
        let mlp = &deref(mlp, "mlp")?.0;
        let len = n_rows.checked_mul(n_cols).ok_or_else(|| invalid("n_rows * n_cols overflows"))?;
        let view = ArrayView2::from_shape((n_rows, n_cols), slice(x, len, "x")?).map_err(|e| invalid(e.to_string()))?;
        let scores = mlp.forward_batch(view)?;
        slice_mut(out_scores, n_rows, "out_scores")?
            .iter_mut()
            .zip(scores.iter())
            .for_each(|(d, &s)| *d = s);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn symloss_mlp_free(mlp: *mut SymlossMlp) {
    if !mlp.is_null() {
        drop(Box::from_raw(mlp));
    }
}

/// Runs an experiment grid given as JSON (the same format the `symloss
/// experiment` command reads) on up to `jobs` threads (0 = all cores) and
/// returns a JSON array with one `{dataset, loss, pi, pi_prime, objective,
/// seed, bac, auc}` object per run. Free the result with
/// `symloss_string_free`.
#[no_mangle]
pub unsafe extern "C" fn symloss_run_grid_json(config_json: *const c_char, jobs: usize, out_json: *mut *mut c_char) -> SymlossStatus {
    guard(|| {
        let slot = out(out_json, "out_json")?;
        let grid = ExperimentGrid::from_json(text(config_json, "config_json")?)?;
        let jobs = if jobs == 0 {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        } else {
            jobs
        };
        let rows = run_grid(&grid, jobs)?;
        let json = serde_json::to_string(&rows).map_err(Error::from)?;
        *slot = to_c_string(json)?;
        Ok(())
    })
}

