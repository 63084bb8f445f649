//! C ABI over `hyperlab`.
//!
//! Every fallible function returns an [`HlStatus`] and writes its result
//! through an out pointer. On failure, [`hl_last_error`] describes the
//! error of the calling thread. Strings returned by the library are freed
//! with [`hl_string_free`]; maps with [`hl_circle_map_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use hyperlab::circle::{CircleContinuum, MorseSmaleCircleMap, Orientation};
use hyperlab::experiment::{ExperimentConfig, Status};
use hyperlab::hyperspace::hausdorff_continua;
use hyperlab::shadowing::{falsify_cf_shadowing, Verdict};
use hyperlab::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NumericalFailure = 3,
    Inconclusive = 4,
    Internal = 5,
}

/// Opaque handle to a Morse-Smale circle map.
pub struct HlCircleMap(MorseSmaleCircleMap);

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HlContinuumKind {
    Point = 0,
    Arc = 1,
    FullCircle = 2,
}

/// A subcontinuum of the circle of length one. `Point` uses `a`; `Arc` is the
/// counterclockwise sweep from `a` to `b`; `FullCircle` ignores both.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HlContinuum {
    pub kind: HlContinuumKind,
    pub a: f64,
    pub b: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HlFalsification {
    pub candidates_tested: u64,
    pub worst_margin: f64,
    pub falsified: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let text = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = text);
}

fn status_of(e: &Error) -> HlStatus {
    match e {
        e if e.is_invalid_input() => HlStatus::InvalidArgument,
        Error::NoConvergence { .. } | Error::SpacingCollapse(_) | Error::AmbiguousMembership { .. } => {
            HlStatus::NumericalFailure
        }
        _ => HlStatus::Internal,
    }
}

/// Runs `body`, turning errors and panics into a status and a stored message.
fn guard(body: impl FnOnce() -> Result<HlStatus, (HlStatus, String)>) -> HlStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(status)) => status,
        Ok(Err((status, message))) => {
            set_error(&message);
            status
        }
        Err(_) => {
            set_error("panic inside hyperlab");
            HlStatus::Internal
        }
    }
}

fn lib_err(e: Error) -> (HlStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (HlStatus, String) {
    (HlStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (HlStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write<T>(out: *mut T, value: T) -> Result<HlStatus, (HlStatus, String)> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(value);
    Ok(HlStatus::Ok)
}

fn to_continuum(c: &HlContinuum) -> Result<CircleContinuum, (HlStatus, String)> {
    if !(c.a.is_finite() && c.b.is_finite()) {
        return Err((HlStatus::InvalidArgument, "continuum endpoints must be finite".into()));
    }
    match c.kind {
        HlContinuumKind::Point => Ok(CircleContinuum::point(c.a)),
        HlContinuumKind::Arc => CircleContinuum::arc(c.a, c.b).map_err(lib_err),
        HlContinuumKind::FullCircle => Ok(CircleContinuum::FullCircle),
    }
}

fn from_continuum(c: &CircleContinuum) -> HlContinuum {
    match c {
        CircleContinuum::Point { p } => HlContinuum {
            kind: HlContinuumKind::Point,
            a: p.coord(),
            b: p.coord(),
        },
        CircleContinuum::Arc { a, b } => HlContinuum {
            kind: HlContinuumKind::Arc,
            a: a.coord(),
            b: b.coord(),
        },
        CircleContinuum::FullCircle => HlContinuum {
            kind: HlContinuumKind::FullCircle,
            a: 0.0,
            b: 0.0,
        },
    }
}

/// Message of the last failed call on this thread. Valid until the next
/// failing call on the same thread; never null.
#[no_mangle]
pub extern "C" fn hl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn hl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a map with `pairs` attractor/repeller pairs.
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn hl_circle_map_new(
    pairs: u32,
    amplitude: f64,
    reversing: bool,
    out: *mut *mut HlCircleMap,
) -> HlStatus {
    guard(|| {
        let orientation = if reversing {
            Orientation::Reversing
        } else {
            Orientation::Preserving
        };
        let m = MorseSmaleCircleMap::new(pairs, amplitude, orientation).map_err(lib_err)?;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        out.write(Box::into_raw(Box::new(HlCircleMap(m))));
        Ok(HlStatus::Ok)
    })
}

/// # Safety
/// `map` must come from [`hl_circle_map_new`] and not be freed twice. Null is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn hl_circle_map_free(map: *mut HlCircleMap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}

/// # Safety
/// `map` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn hl_circle_map_eval(map: *const HlCircleMap, x: f64, out: *mut f64) -> HlStatus {
    guard(|| {
        let m = deref(map, "map")?;
        if !x.is_finite() {
            return Err((HlStatus::InvalidArgument, format!("point {x} is not finite")));
        }
        write(out, m.0.eval(x))
    })
}

/// # Safety
/// `map` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn hl_circle_map_inverse(map: *const HlCircleMap, y: f64, out: *mut f64) -> HlStatus {
    guard(|| {
        let m = deref(map, "map")?;
        if !y.is_finite() {
            return Err((HlStatus::InvalidArgument, format!("point {y} is not finite")));
        }
        write(out, m.0.inverse(y).map_err(lib_err)?)
    })
}

/// Image of a continuum under the induced map.
///
/// # Safety
/// Pointers must be valid; `out` may alias `c`.
#[no_mangle]
pub unsafe extern "C" fn hl_continuum_image(
    map: *const HlCircleMap,
    c: *const HlContinuum,
    out: *mut HlContinuum,
) -> HlStatus {
    guard(|| {
        let m = deref(map, "map")?;
        let c = to_continuum(deref(c, "continuum")?)?;
        write(out, from_continuum(&m.0.continuum_image(&c)))
    })
}

/// Exact Hausdorff distance between two continua.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn hl_hausdorff(a: *const HlContinuum, b: *const HlContinuum, out: *mut f64) -> HlStatus {
    guard(|| {
        let a = to_continuum(deref(a, "first continuum")?)?;
        let b = to_continuum(deref(b, "second continuum")?)?;
        write(out, hausdorff_continua(&a, &b).value)
    })
}

/// Searches for a continuum orbit that epsilon-shadows the spliced
/// delta-pseudo-orbit of the induced map. Returns `Inconclusive` when some
/// candidate survives; `out` is filled in either case.
///
/// # Safety
/// `map` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn hl_falsify_shadowing(
    map: *const HlCircleMap,
    epsilon: f64,
    delta: f64,
    window: usize,
    grid: f64,
    out: *mut HlFalsification,
) -> HlStatus {
    guard(|| {
        let m = deref(map, "map")?;
        let f = falsify_cf_shadowing(&m.0, epsilon, delta, window, grid).map_err(lib_err)?;
        let falsified = f.report.verdict == Verdict::Falsified;
        let summary = HlFalsification {
            candidates_tested: f.report.candidates_tested as u64,
            worst_margin: f.report.worst_margin,
            falsified,
        };
        write(out, summary)?;
        Ok(if falsified {
            HlStatus::Ok
        } else {
            HlStatus::Inconclusive
        })
    })
}

/// Runs the experiment described by a JSON config and returns its report as
/// JSON. Inconclusive runs still produce a report and return `Inconclusive`.
///
/// # Safety
/// `config` must be a nul-terminated string; `out` valid for a pointer write.
/// Free the result with [`hl_string_free`].
#[no_mangle]
pub unsafe extern "C" fn hl_run_config(config: *const c_char, out: *mut *mut c_char) -> HlStatus {
    guard(|| {
        if config.is_null() {
            return Err(null("config"));
        }
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let text = CStr::from_ptr(config)
            .to_str()
            .map_err(|_| (HlStatus::InvalidArgument, "config is not UTF-8".to_string()))?;
        let cfg = ExperimentConfig::from_json(text).map_err(lib_err)?;
        let outcome = cfg.run().map_err(lib_err)?;
        let report = cfg.report(&outcome).map_err(lib_err)?;
        let json = serde_json::to_string(&report).map_err(|e| (HlStatus::Internal, e.to_string()))?;
        out.write(
            CString::new(json)
                .map_err(|e| (HlStatus::Internal, e.to_string()))?
                .into_raw(),
        );
        Ok(match outcome.status {
            Status::Expected => HlStatus::Ok,
            Status::Inconclusive => HlStatus::Inconclusive,
        })
    })
}

/// # Safety
/// `s` must come from this library and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn hl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
