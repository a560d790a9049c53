//! C ABI for `hocbf`.
//!
//! Every entry point returns a [`HocbfStatus`]; on failure the message is
//! kept per thread and read with [`hocbf_last_error`]. Objects are opaque
//! handles created by `*_from_json`, `*_builtin` or `hocbf_run` and released by the
//! matching `*_free`. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hocbf::sensitivity::{alpha_sensitivity, PrimitivePair};
use hocbf::sim::{run_scenario, scenarios, RunSummary, ScenarioConfig, TrajectoryLog};
use hocbf::Error;

/// Result of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HocbfStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// Malformed JSON, unknown name, invalid configuration or geometry.
    InvalidArgument = 3,
    /// Solver failure, singular system or degenerate input.
    Numerical = 4,
    /// An output buffer has the wrong length or an index is out of range.
    BadLength = 5,
    /// A panic was caught; the handle involved should be freed.
    Internal = 6,
}

/// A primitive pair for minimal-scaling queries.
pub struct HocbfPair(PrimitivePair);

/// A validated scenario configuration.
pub struct HocbfScenario(ScenarioConfig);

/// A finished closed-loop rollout.
pub struct HocbfRollout {
    log: TrajectoryLog,
    summary: RunSummary,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(HocbfStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::SolverFailure { .. } | Error::Singular(_) | Error::Degenerate(_) => HocbfStatus::Numerical,
            _ => HocbfStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure(HocbfStatus::InvalidArgument, e.to_string())
    }
}

fn fail<T>(status: HocbfStatus, msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure(status, msg.into()))
}

fn set_last_error(msg: String) {
    // Interior NULs would truncate the C string; replace them.
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Runs `f`, converting errors and panics to a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> HocbfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            HocbfStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg =
                payload.downcast_ref::<&str>().map(|s| s.to_string()).or_else(|| payload.downcast_ref::<String>().cloned()).unwrap_or_else(|| "panic".into());
            set_last_error(format!("internal error: {msg}"));
            HocbfStatus::Internal
        }
    }
}

unsafe fn str_arg<'a>(s: *const c_char) -> Result<&'a str, Failure> {
    if s.is_null() {
        return fail(HocbfStatus::NullPointer, "string argument is null");
    }
    CStr::from_ptr(s).to_str().or_else(|_| fail(HocbfStatus::InvalidUtf8, "string argument is not UTF-8"))
}

unsafe fn handle<'a, T>(p: *const T) -> Result<&'a T, Failure> {
    p.as_ref().map_or_else(|| fail(HocbfStatus::NullPointer, "handle is null"), Ok)
}

unsafe fn out_ptr<'a, T>(p: *mut T) -> Result<&'a mut T, Failure> {
    p.as_mut().map_or_else(|| fail(HocbfStatus::NullPointer, "output pointer is null"), Ok)
}

/// Non-null buffer of exactly `expected` elements.
unsafe fn out_slice<'a>(p: *mut f64, len: usize, expected: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if p.is_null() {
        return fail(HocbfStatus::NullPointer, format!("{what} buffer is null"));
    }
    if len != expected {
        return fail(HocbfStatus::BadLength, format!("{what} buffer has length {len}, expected {expected}"));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

/// Copies `text` NUL-terminated into `buf` when it fits; `needed` receives
/// the byte count including the terminator either way.
unsafe fn write_text(text: &str, buf: *mut c_char, cap: usize, needed: *mut usize) -> Result<(), Failure> {
    let bytes = text.as_bytes();
    if !needed.is_null() {
        *needed = bytes.len() + 1;
    }
    if buf.is_null() || cap < bytes.len() + 1 {
        return fail(HocbfStatus::BadLength, format!("text needs {} bytes", bytes.len() + 1));
    }
    ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, bytes.len());
    *buf.add(bytes.len()) = 0;
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hocbf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Copies the calling thread's last error message into `buf`.
///
/// Returns the number of bytes required including the terminator, or 0 if
/// the last call succeeded. Nothing is written when `cap` is too small.
///
/// # Safety
/// `buf` must be null or valid for `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn hocbf_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| match e.borrow().as_ref() {
        None => 0,
        Some(msg) => {
            let bytes = msg.as_bytes_with_nul();
            if !buf.is_null() && cap >= bytes.len() {
                ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, bytes.len());
            }
            bytes.len()
        }
    })
}

/// Parses a pair `{"a": body, "b": body}` from JSON.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hocbf_pair_from_json(json: *const c_char, out: *mut *mut HocbfPair) -> HocbfStatus {
    guard(|| {
        let out = out_ptr(out)?;
        *out = ptr::null_mut();
        let pair: PrimitivePair = serde_json::from_str(str_arg(json)?)?;
        *out = Box::into_raw(Box::new(HocbfPair(pair)));
        Ok(())
    })
}

/// # Safety
/// `pair` must be null or a handle from [`hocbf_pair_from_json`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hocbf_pair_free(pair: *mut HocbfPair) {
    if !pair.is_null() {
        drop(Box::from_raw(pair));
    }
}

/// Spatial dimension (2 or 3) and length of the stacked parameter vector `θ = [θ_A; θ_B]`.
///
/// # Safety
/// `pair` must be a live handle; outputs must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn hocbf_pair_dims(pair: *const HocbfPair, dim: *mut usize, theta_len: *mut usize) -> HocbfStatus {
    guard(|| {
        let p = &handle(pair)?.0;
        if let Some(d) = dim.as_mut() {
            *d = p.dim();
        }
        if let Some(n) = theta_len.as_mut() {
            *n = p.theta_len();
        }
        Ok(())
    })
}

/// Replaces both frames by the stacked parameter vector `theta`.
///
/// # Safety
/// `pair` must be a live handle; `theta` must be valid for `len` reads.
#[no_mangle]
pub unsafe extern "C" fn hocbf_pair_set_theta(pair: *mut HocbfPair, theta: *const f64, len: usize) -> HocbfStatus {
    guard(|| {
        let p = pair.as_mut().map_or_else(|| fail(HocbfStatus::NullPointer, "handle is null"), Ok)?;
        if theta.is_null() {
            return fail(HocbfStatus::NullPointer, "theta is null");
        }
        if len != p.0.theta_len() {
            return fail(HocbfStatus::BadLength, format!("theta has length {len}, expected {}", p.0.theta_len()));
        }
        p.0 = p.0.with_theta(std::slice::from_raw_parts(theta, len))?;
        Ok(())
    })
}

/// Minimal scaling factor `α*` and, when the buffers are non-null, its
/// gradient (`theta_len`) and row-major Hessian (`theta_len²`) in `θ`.
///
/// # Safety
/// `pair` must be a live handle; `alpha` must be writable; non-null buffers
/// must be valid for their stated lengths.
#[no_mangle]
pub unsafe extern "C" fn hocbf_pair_alpha(
    pair: *const HocbfPair,
    alpha: *mut f64,
    grad: *mut f64,
    grad_len: usize,
    hess: *mut f64,
    hess_len: usize,
) -> HocbfStatus {
    guard(|| {
        let p = &handle(pair)?.0;
        let alpha = out_ptr(alpha)?;
        let n = p.theta_len();
        let grad = if grad.is_null() { None } else { Some(out_slice(grad, grad_len, n, "gradient")?) };
        let hess = if hess.is_null() { None } else { Some(out_slice(hess, hess_len, n * n, "hessian")?) };
        let order = if hess.is_some() { 2 } else { 1 };
        let s = alpha_sensitivity(p, order)?;
        *alpha = s.alpha();
        if let Some(g) = grad {
            g.copy_from_slice(s.grad.as_slice());
        }
        if let (Some(h), Some(m)) = (hess, s.hess.as_ref()) {
            for i in 0..n {
                for j in 0..n {
                    h[i * n + j] = m[(i, j)];
                }
            }
        }
        Ok(())
    })
}

/// Looks up a built-in scenario by name.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hocbf_scenario_builtin(name: *const c_char, out: *mut *mut HocbfScenario) -> HocbfStatus {
    guard(|| {
        let out = out_ptr(out)?;
        *out = ptr::null_mut();
        let name = str_arg(name)?;
        let cfg = match scenarios::builtin(name) {
            Some(c) => c,
            None => return fail(HocbfStatus::InvalidArgument, format!("unknown scenario '{name}'")),
        };
        *out = Box::into_raw(Box::new(HocbfScenario(cfg)));
        Ok(())
    })
}

/// Parses and validates a scenario configuration from JSON.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hocbf_scenario_from_json(json: *const c_char, out: *mut *mut HocbfScenario) -> HocbfStatus {
    guard(|| {
        let out = out_ptr(out)?;
        *out = ptr::null_mut();
        let cfg = ScenarioConfig::from_json(str_arg(json)?)?;
        *out = Box::into_raw(Box::new(HocbfScenario(cfg)));
        Ok(())
    })
}

/// Overrides the step size and horizon; non-positive values keep the current setting.
///
/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hocbf_scenario_set_timing(scenario: *mut HocbfScenario, dt: f64, horizon: f64) -> HocbfStatus {
    guard(|| {
        let s = scenario.as_mut().map_or_else(|| fail(HocbfStatus::NullPointer, "handle is null"), Ok)?;
        let mut cfg = s.0.clone();
        if dt > 0.0 {
            cfg.dt = dt;
        }
        if horizon > 0.0 {
            cfg.horizon = horizon;
        }
        cfg.validate()?;
        s.0 = cfg;
        Ok(())
    })
}

/// Serialises the scenario to JSON (see [`hocbf_last_error`] for the buffer protocol).
///
/// # Safety
/// `scenario` must be a live handle; `buf` must be null or valid for `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn hocbf_scenario_to_json(scenario: *const HocbfScenario, buf: *mut c_char, cap: usize, needed: *mut usize) -> HocbfStatus {
    guard(|| write_text(&serde_json::to_string(&handle(scenario)?.0)?, buf, cap, needed))
}

/// # Safety
/// `scenario` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hocbf_scenario_free(scenario: *mut HocbfScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Runs the closed loop. A rollout that halts still succeeds; inspect the summary.
///
/// # Safety
/// `scenario` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hocbf_run(scenario: *const HocbfScenario, out: *mut *mut HocbfRollout) -> HocbfStatus {
    guard(|| {
        let out = out_ptr(out)?;
        *out = ptr::null_mut();
        let (log, summary) = run_scenario(&handle(scenario)?.0)?;
        *out = Box::into_raw(Box::new(HocbfRollout { log, summary }));
        Ok(())
    })
}

/// # Safety
/// `rollout` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hocbf_rollout_free(rollout: *mut HocbfRollout) {
    if !rollout.is_null() {
        drop(Box::from_raw(rollout));
    }
}

/// Number of logged steps and the lengths of `q` and `v`.
///
/// # Safety
/// `rollout` must be a live handle; outputs must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn hocbf_rollout_dims(rollout: *const HocbfRollout, steps: *mut usize, n_q: *mut usize, n_v: *mut usize) -> HocbfStatus {
    guard(|| {
        let r = handle(rollout)?;
        let first = r.log.records.first();
        if let Some(s) = steps.as_mut() {
            *s = r.log.records.len();
        }
        if let Some(n) = n_q.as_mut() {
            *n = first.map_or(0, |x| x.q.len());
        }
        if let Some(n) = n_v.as_mut() {
            *n = first.map_or(0, |x| x.v.len());
        }
        Ok(())
    })
}

/// Time, configuration, velocity and minimum barrier value at step `k`.
///
/// # Safety
/// `rollout` must be a live handle; `t` and `h_min` must be null or writable;
/// `q` and `v` must be valid for `q_len` and `v_len` writes.
#[no_mangle]
pub unsafe extern "C" fn hocbf_rollout_step(
    rollout: *const HocbfRollout,
    k: usize,
    t: *mut f64,
    q: *mut f64,
    q_len: usize,
    v: *mut f64,
    v_len: usize,
    h_min: *mut f64,
) -> HocbfStatus {
    guard(|| {
        let r = handle(rollout)?;
        let Some(rec) = r.log.records.get(k) else {
            return fail(HocbfStatus::BadLength, format!("step {k} out of range ({} steps)", r.log.records.len()));
        };
        out_slice(q, q_len, rec.q.len(), "q")?.copy_from_slice(rec.q.as_slice());
        out_slice(v, v_len, rec.v.len(), "v")?.copy_from_slice(rec.v.as_slice());
        if let Some(t) = t.as_mut() {
            *t = rec.t;
        }
        if let Some(h) = h_min.as_mut() {
            *h = rec.h_min();
        }
        Ok(())
    })
}

/// Run summary as JSON (see [`hocbf_last_error`] for the buffer protocol).
///
/// # Safety
/// `rollout` must be a live handle; `buf` must be null or valid for `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn hocbf_rollout_summary_json(rollout: *const HocbfRollout, buf: *mut c_char, cap: usize, needed: *mut usize) -> HocbfStatus {
    guard(|| write_text(&serde_json::to_string(&handle(rollout)?.summary)?, buf, cap, needed))
}
