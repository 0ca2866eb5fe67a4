//! C ABI for `tangent-mbd`.
//!
//! Scenarios and trajectories are opaque heap handles owned by the caller
//! and released with their `_free` function. Every fallible call returns a
//! [`TmbdStatus`]; on failure [`tmbd_last_error_message`] describes the
//! error on the calling thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use tangent_mbd::export::write_trajectory;
use tangent_mbd::integrators::{Method, NewmarkParams, StepConfig, Trajectory};
use tangent_mbd::scenarios::{build, Overrides, Scenario};
use tangent_mbd::stability::newmark_dt_limit;
use tangent_mbd::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TmbdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Model = 4,
    StepFailed = 5,
    Io = 6,
    BufferTooSmall = 7,
    OutOfRange = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TmbdMethod {
    TangentNewmark = 0,
    ClassicalIndex3 = 1,
    CentralDifference = 2,
    NewmarkMinimal = 3,
}

fn method_of(code: u32) -> Result<Method, (TmbdStatus, String)> {
    Ok(match code {
        0 => Method::TangentNewmark,
        1 => Method::ClassicalIndex3,
        2 => Method::CentralDifference,
        3 => Method::NewmarkMinimal,
        _ => return Err((TmbdStatus::InvalidArgument, format!("method code {code} is not 0 to 3"))),
    })
}

impl From<Method> for TmbdMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::TangentNewmark => TmbdMethod::TangentNewmark,
            Method::ClassicalIndex3 => TmbdMethod::ClassicalIndex3,
            Method::CentralDifference => TmbdMethod::CentralDifference,
            Method::NewmarkMinimal => TmbdMethod::NewmarkMinimal,
        }
    }
}

/// Integration settings. Fill with [`tmbd_run_options_default`] and adjust.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TmbdRunOptions {
    /// A `TmbdMethod` value.
    pub method: u32,
    pub alpha: f64,
    pub beta: f64,
    pub dt: f64,
    pub t_end: f64,
    pub tol: f64,
    pub tol_c: f64,
    pub max_iters: u32,
    pub record_omega: bool,
}

/// A built scenario: model, initial state and defaults.
pub struct TmbdScenario {
    inner: Scenario,
}

/// The records of one integration run.
pub struct TmbdTrajectory {
    scenario: &'static str,
    inner: Trajectory,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &Error) -> TmbdStatus {
    match e {
        Error::Validation(_) => TmbdStatus::InvalidArgument,
        Error::Config(_) => TmbdStatus::Config,
        Error::SingularMass { .. } | Error::SingularReducedMass { .. } | Error::Model(_) | Error::Assembly { .. } => {
            TmbdStatus::Model
        }
        Error::StepDivergence { .. } => TmbdStatus::StepFailed,
        Error::Io(_) => TmbdStatus::Io,
    }
}

/// Runs `f`, recording its error and catching panics.
fn guard(f: impl FnOnce() -> Result<(), (TmbdStatus, String)>) -> TmbdStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TmbdStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            TmbdStatus::Panic
        }
    }
}

fn lib<T>(r: tangent_mbd::Result<T>) -> Result<T, (TmbdStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (TmbdStatus, String) {
    (TmbdStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (TmbdStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (TmbdStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, (TmbdStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

/// Copies `src` into `dst` when it fits; `len` receives the needed length.
unsafe fn copy_out(src: &[f64], dst: *mut f64, cap: usize, len: *mut usize) -> Result<(), (TmbdStatus, String)> {
    if !len.is_null() {
        *len = src.len();
    }
    if dst.is_null() {
        return Ok(());
    }
    if cap < src.len() {
        return Err((
            TmbdStatus::BufferTooSmall,
            format!("buffer holds {cap} values, {} needed", src.len()),
        ));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
    Ok(())
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn tmbd_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn tmbd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// `(1/ω) √(1/(α/2 − β))`, infinity when unconditionally stable.
#[no_mangle]
pub extern "C" fn tmbd_newmark_dt_limit(omega_max: f64, alpha: f64, beta: f64) -> f64 {
    newmark_dt_limit(omega_max, NewmarkParams { alpha, beta })
}

/// Builds a named scenario with `n_overrides` parameter overrides given as
/// parallel arrays of keys and values.
///
/// # Safety
/// `name` and each of the `n_overrides` keys must be NUL-terminated strings;
/// `keys` and `values` must hold `n_overrides` entries; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tmbd_scenario_new(
    name: *const c_char,
    keys: *const *const c_char,
    values: *const f64,
    n_overrides: usize,
    out: *mut *mut TmbdScenario,
) -> TmbdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let name = str_arg(name, "name")?;
        let mut overrides = Overrides::new();
        if n_overrides > 0 {
            if keys.is_null() || values.is_null() {
                return Err(null("override arrays"));
            }
            for i in 0..n_overrides {
                let k = str_arg(*keys.add(i), "override key")?;
                overrides.insert(k.to_string(), *values.add(i));
            }
        }
        let sc = lib(build(name, &overrides))?;
        *out = Box::into_raw(Box::new(TmbdScenario { inner: sc }));
        Ok(())
    })
}

/// # Safety
/// `sc` must come from [`tmbd_scenario_new`] and not be freed already; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn tmbd_scenario_free(sc: *mut TmbdScenario) {
    if !sc.is_null() {
        drop(Box::from_raw(sc));
    }
}

/// Coordinate and constraint counts; minimal scenarios report zero constraints.
///
/// # Safety
/// `sc` must be a live scenario handle; the outputs may be null.
#[no_mangle]
pub unsafe extern "C" fn tmbd_scenario_dims(
    sc: *const TmbdScenario,
    n_coords: *mut usize,
    n_constraints: *mut usize,
) -> TmbdStatus {
    guard(|| {
        let s = handle(sc, "scenario")?.inner.initial_state();
        if !n_coords.is_null() {
            *n_coords = s.x.len();
        }
        if !n_constraints.is_null() {
            *n_constraints = s.lambda.len();
        }
        Ok(())
    })
}

/// Scenario defaults for method, Newmark parameters, step and horizon.
///
/// # Safety
/// `sc` must be a live scenario handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tmbd_run_options_default(sc: *const TmbdScenario, out: *mut TmbdRunOptions) -> TmbdStatus {
    guard(|| {
        let sc = &handle(sc, "scenario")?.inner;
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = sc.step_config();
        *out = TmbdRunOptions {
            method: TmbdMethod::from(sc.method) as u32,
            alpha: sc.params.alpha,
            beta: sc.params.beta,
            dt: cfg.dt,
            t_end: sc.t_end,
            tol: cfg.tol,
            tol_c: cfg.tol_c,
            max_iters: u32::try_from(cfg.max_iters).unwrap_or(u32::MAX),
            record_omega: false,
        };
        Ok(())
    })
}

/// Largest natural frequency at the scenario's initial state.
///
/// # Safety
/// `sc` must be a live scenario handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tmbd_scenario_omega_max(sc: *const TmbdScenario, out: *mut f64) -> TmbdStatus {
    guard(|| {
        let sc = &handle(sc, "scenario")?.inner;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = lib(sc.initial_omega_max(StepConfig::default().rank_tol))?;
        Ok(())
    })
}

/// Integrates the scenario. A run that diverges still returns `Ok` with a
/// trajectory; query it with [`tmbd_trajectory_diverged`].
///
/// # Safety
/// `sc` must be a live scenario handle, `opts` readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tmbd_scenario_run(
    sc: *const TmbdScenario,
    opts: *const TmbdRunOptions,
    out: *mut *mut TmbdTrajectory,
) -> TmbdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let sc = &handle(sc, "scenario")?.inner;
        let o = *handle(opts, "options")?;
        let mut cfg = StepConfig::new(o.dt);
        cfg.tol = o.tol;
        cfg.tol_c = o.tol_c;
        cfg.max_iters = o.max_iters as usize;
        cfg.record_omega = o.record_omega;
        let params = NewmarkParams {
            alpha: o.alpha,
            beta: o.beta,
        };
        let tr = lib(sc.run(method_of(o.method)?, params, &cfg, o.t_end))?;
        *out = Box::into_raw(Box::new(TmbdTrajectory {
            scenario: sc.name,
            inner: tr,
        }));
        Ok(())
    })
}

/// # Safety
/// `tr` must come from [`tmbd_scenario_run`] and not be freed already; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn tmbd_trajectory_free(tr: *mut TmbdTrajectory) {
    if !tr.is_null() {
        drop(Box::from_raw(tr));
    }
}

/// Number of records, the initial state included. Zero for null.
///
/// # Safety
/// `tr` must be null or a live trajectory handle.
#[no_mangle]
pub unsafe extern "C" fn tmbd_trajectory_len(tr: *const TmbdTrajectory) -> usize {
    tr.as_ref().map_or(0, |t| t.inner.records.len())
}

/// Whether the run stopped early. False for null.
///
/// # Safety
/// `tr` must be null or a live trajectory handle.
#[no_mangle]
pub unsafe extern "C" fn tmbd_trajectory_diverged(tr: *const TmbdTrajectory) -> bool {
    tr.as_ref().is_some_and(|t| t.inner.is_diverged())
}

/// Scalars of record `index`: time, energy, the three constraint residual
/// norms and the iteration count. Any output may be null.
///
/// # Safety
/// `tr` must be a live trajectory handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn tmbd_trajectory_record(
    tr: *const TmbdTrajectory,
    index: usize,
    t: *mut f64,
    energy: *mut f64,
    norms: *mut f64,
    iterations: *mut u32,
) -> TmbdStatus {
    guard(|| {
        let tr = &handle(tr, "trajectory")?.inner;
        let r = tr
            .records
            .get(index)
            .ok_or_else(|| (TmbdStatus::OutOfRange, format!("record {index} of {}", tr.records.len())))?;
        if !t.is_null() {
            *t = r.state.t;
        }
        if !energy.is_null() {
            *energy = r.energy;
        }
        if !norms.is_null() {
            let n = [r.norms.position, r.norms.velocity, r.norms.acceleration];
            ptr::copy_nonoverlapping(n.as_ptr(), norms, 3);
        }
        if !iterations.is_null() {
            *iterations = u32::try_from(r.iterations).unwrap_or(u32::MAX);
        }
        Ok(())
    })
}

/// Copies one vector of record `index`: 0 = x, 1 = ẋ, 2 = ẍ, 3 = λ. With a
/// null `dst` only the length is reported through `len`.
///
/// # Safety
/// `tr` must be a live trajectory handle; `dst` must be null or hold `cap`
/// doubles; `len` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn tmbd_trajectory_vector(
    tr: *const TmbdTrajectory,
    index: usize,
    which: u32,
    dst: *mut f64,
    cap: usize,
    len: *mut usize,
) -> TmbdStatus {
    guard(|| {
        let tr = &handle(tr, "trajectory")?.inner;
        let s = &tr
            .records
            .get(index)
            .ok_or_else(|| (TmbdStatus::OutOfRange, format!("record {index} of {}", tr.records.len())))?
            .state;
        let v = match which {
            0 => &s.x,
            1 => &s.xdot,
            2 => &s.xddot,
            3 => &s.lambda,
            _ => return Err((TmbdStatus::InvalidArgument, format!("vector selector {which} is not 0 to 3"))),
        };
        copy_out(v.as_slice(), dst, cap, len)
    })
}

/// Writes the trajectory as CSV to `path`.
///
/// # Safety
/// `tr` must be a live trajectory handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn tmbd_trajectory_write_csv(tr: *const TmbdTrajectory, path: *const c_char) -> TmbdStatus {
    guard(|| {
        let t = handle(tr, "trajectory")?;
        let path = Path::new(str_arg(path, "path")?);
        let file = std::fs::File::create(path)
            .map_err(|e| (TmbdStatus::Io, format!("cannot write {}: {e}", path.display())))?;
        lib(write_trajectory(std::io::BufWriter::new(file), t.scenario, &t.inner))
    })
}
