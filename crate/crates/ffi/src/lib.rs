//! C ABI over the ergodlab kernels.
//!
//! Handles are opaque pointers created by `*_from_json` / `*_new` and released
//! with the matching `*_free`. Every fallible call returns an [`ErgodStatus`];
//! on failure a message is available from [`ergod_last_error`] until the next
//! failing call on the same thread. Panics never cross the boundary.
//!
//! Specs and parameters use the same JSON documents as the CLI configs.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ergodlab::diagnostics::{birkhoff_average, Observable};
use ergodlab::flows::{make_flow, FlowSpec, OrbitState, Point};
use ergodlab::lacunary::LacunaryParams;
use ergodlab::nilflow::{theta_eval, HeisPoint};
use ergodlab::{Error, Frac, TorusPoint};

/// Result codes of the C API.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErgodStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    DimensionMismatch = 4,
    Precondition = 5,
    ResourceLimit = 6,
    Unsupported = 7,
    Overflow = 8,
    BufferTooSmall = 9,
    Internal = 10,
}

/// A parsed flow specification.
pub struct ErgodFlow {
    spec: FlowSpec,
}

/// An orbit in progress.
pub struct ErgodOrbit {
    state: OrbitState,
}

/// Lacunary cocycle parameters.
pub struct ErgodLacunary {
    params: LacunaryParams,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn status_of(e: &Error) -> ErgodStatus {
    match e {
        Error::Malformed(_) | Error::OutOfRange(_) | Error::ZeroDenominator | Error::Config(_) | Error::Io(_) => {
            ErgodStatus::Parse
        }
        Error::DimensionMismatch { .. } => ErgodStatus::DimensionMismatch,
        Error::Overflow(_) => ErgodStatus::Overflow,
        Error::Precondition(_) => ErgodStatus::Precondition,
        Error::ResourceLimit(_) => ErgodStatus::ResourceLimit,
        Error::Unsupported(_) => ErgodStatus::Unsupported,
    }
}

fn guard(f: impl FnOnce() -> Result<(), ErgodStatus>) -> ErgodStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ErgodStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            ErgodStatus::Internal
        }
    }
}

fn fail(e: Error) -> ErgodStatus {
    set_error(e.to_string());
    status_of(&e)
}

unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, ErgodStatus> {
    if s.is_null() {
        set_error("null string argument");
        return Err(ErgodStatus::NullPointer);
    }
    CStr::from_ptr(s).to_str().map_err(|_| {
        set_error("string argument is not UTF-8");
        ErgodStatus::InvalidUtf8
    })
}

unsafe fn read_json<T: serde::de::DeserializeOwned>(s: *const c_char) -> Result<T, ErgodStatus> {
    serde_json::from_str(read_str(s)?).map_err(|e| {
        set_error(e.to_string());
        ErgodStatus::Parse
    })
}

unsafe fn handle<'a, T>(p: *const T) -> Result<&'a T, ErgodStatus> {
    p.as_ref().ok_or_else(|| {
        set_error("null handle");
        ErgodStatus::NullPointer
    })
}

unsafe fn out_ptr<'a, T>(p: *mut T) -> Result<&'a mut T, ErgodStatus> {
    p.as_mut().ok_or_else(|| {
        set_error("null output pointer");
        ErgodStatus::NullPointer
    })
}

/// Message of the last failing call on this thread, or NULL.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ergod_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ergod_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a flow spec (`{"variant": …, "params": …}`).
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ergod_flow_from_json(json: *const c_char, out: *mut *mut ErgodFlow) -> ErgodStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let spec: FlowSpec = read_json(json)?;
        *out = Box::into_raw(Box::new(ErgodFlow { spec }));
        Ok(())
    })
}

/// # Safety
/// `flow` must come from [`ergod_flow_from_json`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn ergod_flow_free(flow: *mut ErgodFlow) {
    if !flow.is_null() {
        drop(Box::from_raw(flow));
    }
}

/// State dimension of a flow.
///
/// # Safety
/// `flow` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ergod_flow_dim(flow: *const ErgodFlow, out: *mut usize) -> ErgodStatus {
    guard(|| {
        *out_ptr(out)? = handle(flow)?.spec.dim();
        Ok(())
    })
}

/// Starts an orbit. `start_json` is a JSON array of coordinates (decimal
/// strings or rationals) or NULL for the origin (the identity coset for
/// Heisenberg flows).
///
/// # Safety
/// `flow` must be a live handle, `start_json` NULL or a NUL-terminated string,
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ergod_orbit_new(
    flow: *const ErgodFlow,
    start_json: *const c_char,
    out: *mut *mut ErgodOrbit,
) -> ErgodStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let spec = &handle(flow)?.spec;
        let start: Point = if start_json.is_null() {
            match spec {
                FlowSpec::Heisenberg(_) => Point::Heis(HeisPoint::IDENTITY),
                _ => Point::Torus(TorusPoint::zeros(spec.dim())),
            }
        } else {
            Point::Torus(read_json(start_json)?)
        };
        let state = make_flow(spec, start).map_err(fail)?;
        *out = Box::into_raw(Box::new(ErgodOrbit { state }));
        Ok(())
    })
}

/// # Safety
/// `orbit` must come from [`ergod_orbit_new`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn ergod_orbit_free(orbit: *mut ErgodOrbit) {
    if !orbit.is_null() {
        drop(Box::from_raw(orbit));
    }
}

/// Writes the current point as reals into `coords[0..len]` and advances one step.
///
/// # Safety
/// `orbit` must be a live handle and `coords` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ergod_orbit_next(orbit: *mut ErgodOrbit, coords: *mut f64, len: usize) -> ErgodStatus {
    guard(|| {
        let orbit = out_ptr(orbit)?;
        if coords.is_null() {
            set_error("null coordinate buffer");
            return Err(ErgodStatus::NullPointer);
        }
        let reals = orbit.state.point().to_reals();
        if len < reals.len() {
            set_error(format!("buffer holds {len} values, need {}", reals.len()));
            return Err(ErgodStatus::BufferTooSmall);
        }
        std::slice::from_raw_parts_mut(coords, reals.len()).copy_from_slice(&reals);
        orbit.state.step();
        Ok(())
    })
}

/// Number of steps taken so far.
///
/// # Safety
/// `orbit` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ergod_orbit_step_index(orbit: *const ErgodOrbit, out: *mut u64) -> ErgodStatus {
    guard(|| {
        *out_ptr(out)? = handle(orbit)?.state.step_index();
        Ok(())
    })
}

/// Birkhoff average of an observable (`{"kind": …}`) over `n` orbit points
/// from the origin.
///
/// # Safety
/// `flow` must be a live handle, `observable_json` NUL-terminated, outputs writable.
#[no_mangle]
pub unsafe extern "C" fn ergod_birkhoff(
    flow: *const ErgodFlow,
    observable_json: *const c_char,
    n: u64,
    out_re: *mut f64,
    out_im: *mut f64,
) -> ErgodStatus {
    guard(|| {
        let spec = &handle(flow)?.spec;
        let obs: Observable = read_json(observable_json)?;
        let (re, im) = (out_ptr(out_re)?, out_ptr(out_im)?);
        let start = match spec {
            FlowSpec::Heisenberg(_) => Point::Heis(HeisPoint::IDENTITY),
            _ => Point::Torus(TorusPoint::zeros(spec.dim())),
        };
        let a = birkhoff_average(spec, start, &obs, n).map_err(fail)?;
        *re = a.re;
        *im = a.im;
        Ok(())
    })
}

/// Parses lacunary parameters (`{"K", "weights", "t", "beta"}`).
///
/// # Safety
/// `json` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ergod_lacunary_from_json(json: *const c_char, out: *mut *mut ErgodLacunary) -> ErgodStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let params: LacunaryParams = read_json(json)?;
        *out = Box::into_raw(Box::new(ErgodLacunary { params }));
        Ok(())
    })
}

/// # Safety
/// `lac` must come from [`ergod_lacunary_from_json`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn ergod_lacunary_free(lac: *mut ErgodLacunary) {
    if !lac.is_null() {
        drop(Box::from_raw(lac));
    }
}

fn circle_point(x: f64) -> Result<Frac, ErgodStatus> {
    if x.is_finite() {
        Ok(Frac::from_real_wrapping(x))
    } else {
        set_error("non-finite circle coordinate");
        Err(ErgodStatus::Precondition)
    }
}

/// The cocycle core `h(x)`; `x` is read modulo 1.
///
/// # Safety
/// `lac` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ergod_lacunary_h_eval(lac: *const ErgodLacunary, x: f64, out: *mut f64) -> ErgodStatus {
    guard(|| {
        let p = &handle(lac)?.params;
        *out_ptr(out)? = p.h_eval(circle_point(x)?);
        Ok(())
    })
}

/// The transfer function `H(x)`; `x` is read modulo 1.
///
/// # Safety
/// `lac` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ergod_lacunary_transfer_eval(lac: *const ErgodLacunary, x: f64, out: *mut f64) -> ErgodStatus {
    guard(|| {
        let p = &handle(lac)?.params;
        *out_ptr(out)? = p.transfer_eval(circle_point(x)?);
        Ok(())
    })
}

/// `F(x, y, z)` with tail tolerance `tol ∈ (0, 1e-3]`.
///
/// # Safety
/// `out_re` and `out_im` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ergod_theta_eval(
    x: f64,
    y: f64,
    z: f64,
    tol: f64,
    out_re: *mut f64,
    out_im: *mut f64,
) -> ErgodStatus {
    guard(|| {
        let (re, im) = (out_ptr(out_re)?, out_ptr(out_im)?);
        if !(x.is_finite() && y.is_finite() && z.is_finite()) {
            set_error("non-finite coordinate");
            return Err(ErgodStatus::Precondition);
        }
        let f = theta_eval(HeisPoint::new(x, y, z), tol).map_err(fail)?;
        *re = f.re;
        *im = f.im;
        Ok(())
    })
}
