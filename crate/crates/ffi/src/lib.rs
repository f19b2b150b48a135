//! C interface to viscoflow.
//!
//! Every fallible function returns a [`VfStatus`]; on failure the message is
//! available from [`vf_last_error_message`] on the same thread. Handles are
//! opaque and must be released with the matching `_free` function. Strings
//! returned through `char **` out-parameters are owned by the caller and
//! released with [`vf_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use viscoflow::config::{Experiment, ExperimentConfig};
use viscoflow::convex_sets::ConvexSet;
use viscoflow::engine::{IterationTrace, StopCause};
use viscoflow::hilbert::Vector;
use viscoflow::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    DimensionMismatch = 4,
    Hypothesis = 5,
    Numerical = 6,
    OutOfRange = 7,
    BufferTooSmall = 8,
    Internal = 9,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VfStopCause {
    ResidualMet = 0,
    MaxIters = 1,
    Diverged = 2,
    InnerSolverFailure = 3,
}

/// A validated experiment built from a JSON config.
pub struct VfExperiment {
    inner: Experiment,
}

/// The record of one run.
pub struct VfTrace {
    inner: IterationTrace,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn status_of(e: &Error) -> VfStatus {
    match e {
        Error::DimensionMismatch { .. } => VfStatus::DimensionMismatch,
        Error::Hypothesis { .. } => VfStatus::Hypothesis,
        Error::InnerSolver { .. } | Error::NonContraction(_) | Error::NoStableLimit { .. } => VfStatus::Numerical,
        Error::InvalidInput(_) | Error::Config(_) | Error::Json(_) | Error::Io(_) | Error::Csv(_) => {
            VfStatus::Config
        }
    }
}

struct Failure(VfStatus, String);

type FfiResult<T> = Result<T, Failure>;

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> FfiResult<()>) -> VfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            VfStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            VfStatus::Internal
        }
    }
}

fn null() -> Failure {
    Failure(VfStatus::NullPointer, "null pointer argument".into())
}

unsafe fn read_str<'a>(p: *const c_char) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(null());
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(VfStatus::InvalidUtf8, "string is not valid UTF-8".into()))
}

unsafe fn ref_of<'a, T>(p: *const T) -> FfiResult<&'a T> {
    p.as_ref().ok_or_else(null)
}

unsafe fn write_out<T>(out: *mut T, value: T) -> FfiResult<()> {
    if out.is_null() {
        return Err(null());
    }
    out.write(value);
    Ok(())
}

unsafe fn copy_vector(v: &Vector, buf: *mut f64, len: usize) -> FfiResult<()> {
    if buf.is_null() {
        return Err(null());
    }
    if len < v.len() {
        return Err(Failure(VfStatus::BufferTooSmall,
            format!("buffer holds {len} values, {} needed", v.len()),
        ));
    }
    ptr::copy_nonoverlapping(v.as_ptr(), buf, v.len());
    Ok(())
}

unsafe fn read_vector(x: *const f64, len: usize) -> FfiResult<Vector> {
    if x.is_null() {
        return Err(null());
    }
    Ok(Vector::from_column_slice(std::slice::from_raw_parts(x, len)))
}

unsafe fn write_string(out: *mut *mut c_char, s: String) -> FfiResult<()> {
    let c = CString::new(s).map_err(|_| Failure(VfStatus::Internal, "string contains NUL".into()))?;
    write_out(out, c.into_raw())
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn vf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn vf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn vf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses and validates an experiment config.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vf_experiment_from_json(json: *const c_char, out: *mut *mut VfExperiment) -> VfStatus {
    guard(|| {
        let cfg = ExperimentConfig::from_json(read_str(json)?)?;
        let exp = cfg.build()?;
        write_out(out, Box::into_raw(Box::new(VfExperiment { inner: exp })))
    })
}

/// Loads a bundled scenario by name.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vf_experiment_from_scenario(name: *const c_char, out: *mut *mut VfExperiment) -> VfStatus {
    guard(|| {
        let exp = viscoflow::scenarios::load(read_str(name)?)?.build()?;
        write_out(out, Box::into_raw(Box::new(VfExperiment { inner: exp })))
    })
}

/// # Safety
/// `exp` must come from this library and not have been freed. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn vf_experiment_free(exp: *mut VfExperiment) {
    if !exp.is_null() {
        drop(Box::from_raw(exp));
    }
}

/// Dimension of the experiment's space.
///
/// # Safety
/// `exp` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vf_experiment_dim(exp: *const VfExperiment, out: *mut usize) -> VfStatus {
    guard(|| write_out(out, ref_of(exp)?.inner.family.dim()))
}

/// Hex SHA-256 of the canonical config, as an owned string.
///
/// # Safety
/// `exp` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vf_experiment_config_sha256(exp: *const VfExperiment, out: *mut *mut c_char) -> VfStatus {
    guard(|| write_string(out, ref_of(exp)?.inner.config.sha256()))
}

/// Runs the iteration with the config's stop rule. Stopping at the iteration
/// cap, divergence or an inner failure still yields a trace; inspect
/// [`vf_trace_stop_cause`].
///
/// # Safety
/// `exp` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vf_experiment_run(exp: *const VfExperiment, out: *mut *mut VfTrace) -> VfStatus {
    guard(|| {
        let trace = ref_of(exp)?.inner.run()?;
        write_out(out, Box::into_raw(Box::new(VfTrace { inner: trace })))
    })
}

/// Limit of the viscosity path `x_t = t f(x_t) + (1-t) T x_t` as `t -> 0`.
///
/// # Safety
/// `exp` must be a live handle; `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn vf_experiment_q_map(exp: *const VfExperiment, buf: *mut f64, len: usize) -> VfStatus {
    guard(|| {
        let est = ref_of(exp)?.inner.q_map()?;
        copy_vector(&est.limit_vector(), buf, len)
    })
}

/// VI report at `x` as an owned JSON string.
///
/// # Safety
/// `exp` must be a live handle; `x` must hold `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vf_experiment_limit_report_json(
    exp: *const VfExperiment,
    x: *const f64,
    len: usize,
    out: *mut *mut c_char,
) -> VfStatus {
    guard(|| {
        let exp = ref_of(exp)?;
        let rep = exp.inner.limit_report(&read_vector(x, len)?, None)?;
        write_string(out, serde_json::to_string(&rep).map_err(Error::from)?)
    })
}

/// # Safety
/// `trace` must come from this library and not have been freed. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn vf_trace_free(trace: *mut VfTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// Number of steps taken; iterates are indexed `0..=iterations`.
///
/// # Safety
/// `trace` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vf_trace_iterations(trace: *const VfTrace, out: *mut usize) -> VfStatus {
    guard(|| write_out(out, ref_of(trace)?.inner.iterations()))
}

/// # Safety
/// `trace` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vf_trace_dim(trace: *const VfTrace, out: *mut usize) -> VfStatus {
    guard(|| write_out(out, ref_of(trace)?.inner.dim()))
}

/// # Safety
/// `trace` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vf_trace_stop_cause(trace: *const VfTrace, out: *mut VfStopCause) -> VfStatus {
    guard(|| {
        let cause = match ref_of(trace)?.inner.stop_cause {
            StopCause::ResidualMet => VfStopCause::ResidualMet,
            StopCause::MaxIters => VfStopCause::MaxIters,
            StopCause::Diverged => VfStopCause::Diverged,
            StopCause::InnerSolverFailure => VfStopCause::InnerSolverFailure,
        };
        write_out(out, cause)
    })
}

/// Copies iterate `x_n` into `buf`.
///
/// # Safety
/// `trace` must be a live handle; `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn vf_trace_iterate(trace: *const VfTrace, n: usize, buf: *mut f64, len: usize) -> VfStatus {
    guard(|| {
        let t = &ref_of(trace)?.inner;
        let x = t
            .iterates
            .get(n)
            .ok_or_else(|| Failure(VfStatus::OutOfRange, format!("iterate {n} beyond {}", t.iterations())))?;
        copy_vector(x, buf, len)
    })
}

/// `|x_{n+1} - x_n|`.
///
/// # Safety
/// `trace` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vf_trace_step_residual(trace: *const VfTrace, n: usize, out: *mut f64) -> VfStatus {
    guard(|| {
        let t = &ref_of(trace)?.inner;
        let r = *t
            .residuals
            .get(n)
            .ok_or_else(|| Failure(VfStatus::OutOfRange, format!("step {n} beyond {}", t.residuals.len())))?;
        write_out(out, r)
    })
}

/// Euclidean projection of `x` onto the set described by `set_json`.
///
/// # Safety
/// `set_json` must be a NUL-terminated string; `x` and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn vf_project(set_json: *const c_char, x: *const f64, out: *mut f64, len: usize) -> VfStatus {
    guard(|| {
        let set: ConvexSet = serde_json::from_str(read_str(set_json)?).map_err(Error::from)?;
        let p = set.project(&read_vector(x, len)?)?;
        copy_vector(&p, out, len)
    })
}

/// Checks the step-size conditions for a schedule given as JSON; writes the report JSON and sets
/// `*violated` to 1 when the overall verdict is violated.
///
/// # Safety
/// `schedule_json` must be a NUL-terminated string; `out_json` and `violated` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vf_validate_schedule_json(
    schedule_json: *const c_char,
    n_shift: usize,
    prefix: usize,
    out_json: *mut *mut c_char,
    violated: *mut i32,
) -> VfStatus {
    guard(|| {
        if violated.is_null() {
            return Err(null());
        }
        let (rep, code) = viscoflow::cli::validate_schedule(read_str(schedule_json)?, n_shift, prefix)?;
        write_string(out_json, serde_json::to_string(&rep).map_err(Error::from)?)?;
        violated.write(i32::from(code == viscoflow::cli::EXIT_VIOLATED));
        Ok(())
    })
}
