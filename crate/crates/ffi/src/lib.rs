//! C ABI for klslab.
//!
//! Bodies and measures are opaque handles: create them with a constructor or
//! `*_from_json`, release them with the matching `*_free`. Every fallible call
//! returns a [`KlsStatus`] and writes results through out-pointers; on failure
//! [`kls_last_error`] holds a message for the calling thread. Strings handed
//! out by the library are released with [`kls_string_free`]. Panics are caught
//! at the boundary and reported as `KLS_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use klslab::ball_body::{check_volume_one, fradelizi_check, kmu_gauge, LogConcaveMeasure, MeasureDescriptor, VolumeRule};
use klslab::body::ConvexBody;
use klslab::cli::config::RunConfig;
use klslab::cli::{run_resolved, CliError, EXIT_CONFIG};
use klslab::KlsError;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KlsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidInput = 3,
    InvalidParameter = 4,
    NonSmoothPoint = 5,
    UnsupportedCurvature = 6,
    Unsupported = 7,
    DegenerateCloud = 8,
    MethodSwitch = 9,
    DegenerateNormal = 10,
    InsufficientSamples = 11,
    InvalidMeasure = 12,
    Precondition = 13,
    InternalConsistency = 14,
    Resolution = 15,
    Domain = 16,
    Config = 17,
    Io = 18,
    /// A command started but failed part way; see [`kls_last_error`].
    RunFailed = 19,
    Panic = 20,
}

/// Opaque convex body.
pub struct KlsBody {
    inner: ConvexBody,
}

/// Opaque log-concave measure.
pub struct KlsMeasure {
    inner: LogConcaveMeasure,
}

enum FfiError {
    Null(&'static str),
    Utf8(&'static str),
    Kls(KlsError),
    Cli(CliError),
}

impl From<KlsError> for FfiError {
    fn from(e: KlsError) -> Self {
        FfiError::Kls(e)
    }
}

impl FfiError {
    fn status(&self) -> KlsStatus {
        match self {
            FfiError::Null(_) => KlsStatus::NullPointer,
            FfiError::Utf8(_) => KlsStatus::InvalidUtf8,
            FfiError::Cli(e) if e.code == EXIT_CONFIG => KlsStatus::Config,
            FfiError::Cli(_) => KlsStatus::RunFailed,
            FfiError::Kls(e) => match e {
                KlsError::InvalidInput(_) => KlsStatus::InvalidInput,
                KlsError::InvalidParameter(_) => KlsStatus::InvalidParameter,
                KlsError::NonSmoothPoint(_) => KlsStatus::NonSmoothPoint,
                KlsError::UnsupportedCurvature(_) => KlsStatus::UnsupportedCurvature,
                KlsError::Unsupported(_) => KlsStatus::Unsupported,
                KlsError::DegenerateCloud(_) => KlsStatus::DegenerateCloud,
                KlsError::MethodSwitch { .. } => KlsStatus::MethodSwitch,
                KlsError::DegenerateNormal(_) => KlsStatus::DegenerateNormal,
                KlsError::InsufficientSamples { .. } => KlsStatus::InsufficientSamples,
                KlsError::InvalidMeasure(_) => KlsStatus::InvalidMeasure,
                KlsError::Precondition(_) => KlsStatus::Precondition,
                KlsError::InternalConsistency(_) => KlsStatus::InternalConsistency,
                KlsError::Resolution(_) => KlsStatus::Resolution,
                KlsError::Domain(_) => KlsStatus::Domain,
                KlsError::Config(_) => KlsStatus::Config,
                KlsError::Io(_) => KlsStatus::Io,
            },
        }
    }

    fn message(&self) -> String {
        match self {
            FfiError::Null(what) => format!("null pointer: {what}"),
            FfiError::Utf8(what) => format!("{what} is not valid UTF-8"),
            FfiError::Kls(e) => e.to_string(),
            FfiError::Cli(e) => e.message.clone(),
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), FfiError>) -> KlsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => KlsStatus::Ok,
        Ok(Err(e)) => {
            set_last_error(&e.message());
            e.status()
        }
        Err(_) => {
            set_last_error("panic inside klslab");
            KlsStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, FfiError> {
    if p.is_null() {
        return Err(FfiError::Null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| FfiError::Utf8(what))
}

unsafe fn slice_arg<'a>(p: *const f64, n: usize, what: &'static str) -> Result<&'a [f64], FfiError> {
    if p.is_null() {
        return Err(FfiError::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, FfiError> {
    p.as_mut().ok_or(FfiError::Null(what))
}

unsafe fn body_arg<'a>(p: *const KlsBody) -> Result<&'a ConvexBody, FfiError> {
    p.as_ref().map(|b| &b.inner).ok_or(FfiError::Null("body"))
}

unsafe fn measure_arg<'a>(p: *const KlsMeasure) -> Result<&'a LogConcaveMeasure, FfiError> {
    p.as_ref().map(|m| &m.inner).ok_or(FfiError::Null("measure"))
}

fn check_dim(expected: usize, n: usize) -> Result<(), FfiError> {
    if expected != n {
        return Err(KlsError::InvalidInput(format!("point has {n} coordinates, expected {expected}")).into());
    }
    Ok(())
}

fn c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).unwrap_or_default().into_raw()
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn kls_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread; empty if none. Valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn kls_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Releases a string returned by the library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn kls_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

fn new_body(out: *mut *mut KlsBody, make: impl FnOnce() -> klslab::Result<ConvexBody>) -> KlsStatus {
    guard(|| {
        let out = unsafe { out_arg(out, "out") }?;
        *out = std::ptr::null_mut();
        *out = Box::into_raw(Box::new(KlsBody { inner: make()? }));
        Ok(())
    })
}

/// Builds a body from a JSON descriptor `{"kind", "dim", "params"}`.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kls_body_from_json(json: *const c_char, out: *mut *mut KlsBody) -> KlsStatus {
    guard(|| {
        let text = str_arg(json, "json")?;
        let out = out_arg(out, "out")?;
        *out = std::ptr::null_mut();
        *out = Box::into_raw(Box::new(KlsBody { inner: ConvexBody::from_json(text)? }));
        Ok(())
    })
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kls_body_ball(dim: usize, radius: f64, out: *mut *mut KlsBody) -> KlsStatus {
    new_body(out, || ConvexBody::ball(dim, radius))
}

/// `[-half_side, half_side]^dim`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kls_body_cube(dim: usize, half_side: f64, out: *mut *mut KlsBody) -> KlsStatus {
    new_body(out, || ConvexBody::cube(dim, half_side))
}

/// `scale · B_p^dim`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kls_body_lp_ball(dim: usize, p: f64, scale: f64, out: *mut *mut KlsBody) -> KlsStatus {
    new_body(out, || ConvexBody::lp_ball(dim, p, scale))
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kls_body_simplex(dim: usize, scale: f64, out: *mut *mut KlsBody) -> KlsStatus {
    new_body(out, || ConvexBody::simplex(dim, scale))
}

/// # Safety
/// `semi_axes` must point to `dim` doubles; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kls_body_ellipsoid(semi_axes: *const f64, dim: usize, out: *mut *mut KlsBody) -> KlsStatus {
    guard(|| {
        let axes = slice_arg(semi_axes, dim, "semi_axes")?;
        let out = out_arg(out, "out")?;
        *out = std::ptr::null_mut();
        *out = Box::into_raw(Box::new(KlsBody { inner: ConvexBody::ellipsoid(axes)? }));
        Ok(())
    })
}

/// Null is ignored.
///
/// # Safety
/// `body` must come from a constructor and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn kls_body_free(body: *mut KlsBody) {
    if !body.is_null() {
        drop(Box::from_raw(body));
    }
}

/// Dimension, or 0 for a null handle.
///
/// # Safety
/// `body` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kls_body_dim(body: *const KlsBody) -> usize {
    body.as_ref().map_or(0, |b| b.inner.dim())
}

/// Human-readable label; release with [`kls_string_free`].
///
/// # Safety
/// `body` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kls_body_label(body: *const KlsBody, out: *mut *mut c_char) -> KlsStatus {
    guard(|| {
        let b = body_arg(body)?;
        *out_arg(out, "out")? = c_string(b.label());
        Ok(())
    })
}

/// JSON descriptor that rebuilds the body; release with [`kls_string_free`].
///
/// # Safety
/// `body` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kls_body_descriptor_json(body: *const KlsBody, out: *mut *mut c_char) -> KlsStatus {
    guard(|| {
        let b = body_arg(body)?;
        let text = serde_json::to_string(&b.descriptor()).map_err(KlsError::from)?;
        *out_arg(out, "out")? = c_string(text);
        Ok(())
    })
}

/// Scalar property of a body.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KlsBodyScalar {
    Volume = 0,
    SurfaceArea = 1,
    InRadius = 2,
    OuterRadius = 3,
}

/// # Safety
/// `body` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kls_body_scalar(body: *const KlsBody, which: KlsBodyScalar, out: *mut f64) -> KlsStatus {
    guard(|| {
        let b = body_arg(body)?;
        let v = match which {
            KlsBodyScalar::Volume => b.volume()?,
            KlsBodyScalar::SurfaceArea => b.surface_area()?,
            KlsBodyScalar::InRadius => b.in_radius()?,
            KlsBodyScalar::OuterRadius => b.outer_radius(),
        };
        *out_arg(out, "out")? = v;
        Ok(())
    })
}

/// Gauge `‖x‖_K`.
///
/// # Safety
/// `x` must point to `n` doubles; `body` a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kls_body_gauge(body: *const KlsBody, x: *const f64, n: usize, out: *mut f64) -> KlsStatus {
    guard(|| {
        let b = body_arg(body)?;
        check_dim(b.dim(), n)?;
        *out_arg(out, "out")? = b.gauge(slice_arg(x, n, "x")?)?;
        Ok(())
    })
}

/// Gradient of the gauge at `x`, written to `grad[0..n]`.
///
/// # Safety
/// `x` and `grad` must point to `n` doubles; `body` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn kls_body_gauge_gradient(
    body: *const KlsBody,
    x: *const f64,
    n: usize,
    grad: *mut f64,
) -> KlsStatus {
    guard(|| {
        let b = body_arg(body)?;
        check_dim(b.dim(), n)?;
        let g = b.gauge_gradient(slice_arg(x, n, "x")?)?;
        if grad.is_null() {
            return Err(FfiError::Null("grad"));
        }
        std::slice::from_raw_parts_mut(grad, n).copy_from_slice(&g);
        Ok(())
    })
}

/// Support function `h_K(θ)`.
///
/// # Safety
/// `theta` must point to `n` doubles; `body` a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kls_body_support(
    body: *const KlsBody,
    theta: *const f64,
    n: usize,
    out: *mut f64,
) -> KlsStatus {
    guard(|| {
        let b = body_arg(body)?;
        check_dim(b.dim(), n)?;
        *out_arg(out, "out")? = b.support(slice_arg(theta, n, "theta")?)?;
        Ok(())
    })
}

/// Mean curvature at the boundary point along `y`.
///
/// # Safety
/// `y` must point to `n` doubles; `body` a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kls_body_mean_curvature(
    body: *const KlsBody,
    y: *const f64,
    n: usize,
    out: *mut f64,
) -> KlsStatus {
    guard(|| {
        let b = body_arg(body)?;
        check_dim(b.dim(), n)?;
        let y = slice_arg(y, n, "y")?;
        let g = b.gauge(y)?;
        if !(g > 0.0) {
            return Err(KlsError::InvalidInput("direction must be nonzero".into()).into());
        }
        let on: Vec<f64> = y.iter().map(|v| v / g).collect();
        *out_arg(out, "out")? = klslab::inequalities::mean_curvature(b, &on)?;
        Ok(())
    })
}

/// Operator norm of the differential of `x ↦ x/‖x‖_K`'s adjoint at `x`.
///
/// # Safety
/// `x` must point to `n` doubles; `body` a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kls_radial_op_norm(body: *const KlsBody, x: *const f64, n: usize, out: *mut f64) -> KlsStatus {
    guard(|| {
        let b = body_arg(body)?;
        check_dim(b.dim(), n)?;
        *out_arg(out, "out")? = klslab::radial_map::op_norm_dt(b, slice_arg(x, n, "x")?)?.op_norm;
        Ok(())
    })
}

/// Neumann Poincaré constant of a planar body at grid spacing `h`, with its
/// error estimate. `error_bound` may be null.
///
/// # Safety
/// `body` must be a live handle; `value` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kls_p_neumann_2d(
    body: *const KlsBody,
    h: f64,
    value: *mut f64,
    error_bound: *mut f64,
) -> KlsStatus {
    guard(|| {
        let b = body_arg(body)?;
        let est = klslab::poincare::p_neumann_2d(b, h)?;
        *out_arg(value, "value")? = est.value;
        if let Some(e) = error_bound.as_mut() {
            *e = est.error_or_zero();
        }
        Ok(())
    })
}

/// Dirichlet Poincaré constant of the unit ball in `R^n`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kls_p_dirichlet_ball(n: usize, out: *mut f64) -> KlsStatus {
    guard(|| {
        *out_arg(out, "out")? = klslab::poincare::p_dirichlet_ball(n)?.estimate.value;
        Ok(())
    })
}

/// Builds a measure from a JSON descriptor such as
/// `{"type": "mu_p", "p": 1.5, "n": 4}`.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kls_measure_from_json(json: *const c_char, out: *mut *mut KlsMeasure) -> KlsStatus {
    guard(|| {
        let text = str_arg(json, "json")?;
        let out = out_arg(out, "out")?;
        *out = std::ptr::null_mut();
        let desc: MeasureDescriptor = serde_json::from_str(text).map_err(KlsError::from)?;
        *out = Box::into_raw(Box::new(KlsMeasure { inner: desc.build()? }));
        Ok(())
    })
}

/// Null is ignored.
///
/// # Safety
/// `measure` must come from [`kls_measure_from_json`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn kls_measure_free(measure: *mut KlsMeasure) {
    if !measure.is_null() {
        drop(Box::from_raw(measure));
    }
}

/// Dimension, or 0 for a null handle.
///
/// # Safety
/// `measure` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kls_measure_dim(measure: *const KlsMeasure) -> usize {
    measure.as_ref().map_or(0, |m| m.inner.dim())
}

/// Gauge of the K. Ball body `K_μ` at `x`.
///
/// # Safety
/// `x` must point to `n` doubles; `measure` a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kls_kmu_gauge(measure: *const KlsMeasure, x: *const f64, n: usize, out: *mut f64) -> KlsStatus {
    guard(|| {
        let m = measure_arg(measure)?;
        check_dim(m.dim(), n)?;
        *out_arg(out, "out")? = kmu_gauge(m, slice_arg(x, n, "x")?)?;
        Ok(())
    })
}

/// Volume of `K_μ` by sphere quadrature with `m` nodes per coordinate
/// (`n <= 3`), or in closed form when `m == 0`.
///
/// # Safety
/// `measure` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kls_kmu_volume(measure: *const KlsMeasure, m: usize, out: *mut f64) -> KlsStatus {
    guard(|| {
        let mu = measure_arg(measure)?;
        let rule = if m == 0 { VolumeRule::ClosedForm } else { VolumeRule::Quadrature(m) };
        *out_arg(out, "out")? = check_volume_one(mu, rule)?.estimate;
        Ok(())
    })
}

/// `sup f / (e^n f(0))` for a barycentred measure.
///
/// # Safety
/// `measure` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kls_fradelizi_ratio(measure: *const KlsMeasure, out: *mut f64) -> KlsStatus {
    guard(|| {
        *out_arg(out, "out")? = fradelizi_check(measure_arg(measure)?)?;
        Ok(())
    })
}

/// Runs a command (`verify`, `poincare2d`, `ballbody`, `lp-scaling`, `fvr`,
/// `report`) on a TOML config, exactly as the `klslab` binary would. When
/// the config names no `out` file, the report is returned in `out_text`
/// (release with [`kls_string_free`]); otherwise `out_text` is set to null.
/// `exit_code` receives the code the binary would exit with. A config error
/// returns `KLS_STATUS_CONFIG`, a failure during the run
/// `KLS_STATUS_RUN_FAILED`; failing verdicts return `KLS_STATUS_OK` with
/// exit code 1.
///
/// # Safety
/// `command` and `config_toml` must be NUL-terminated strings; `out_text`
/// and `exit_code` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn kls_run(
    command: *const c_char,
    config_toml: *const c_char,
    out_text: *mut *mut c_char,
    exit_code: *mut i32,
) -> KlsStatus {
    guard(|| {
        let command = str_arg(command, "command")?;
        let text = str_arg(config_toml, "config_toml")?;
        let out_text = out_arg(out_text, "out_text")?;
        let exit_code = out_arg(exit_code, "exit_code")?;
        *out_text = std::ptr::null_mut();
        let run = || -> Result<_, CliError> {
            let mut cfg = RunConfig::from_toml(text)?;
            if let Some(c) = &cfg.command {
                if c != command {
                    return Err(CliError::config(format!("config is for `{c}`, not `{command}`")));
                }
            }
            cfg.command = Some(command.to_string());
            run_resolved(command, &cfg)
        };
        match run() {
            Ok(outcome) => {
                *exit_code = outcome.code;
                if let Some(t) = outcome.text {
                    *out_text = c_string(t);
                }
                Ok(())
            }
            Err(e) => {
                *exit_code = e.code;
                Err(FfiError::Cli(e))
            }
        }
    })
}
