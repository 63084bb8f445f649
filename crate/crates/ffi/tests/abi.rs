use std::ffi::{CStr, CString};
use std::ptr;

use hyperlab_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(hl_last_error()) }
        .to_string_lossy()
        .into_owned()
}

fn new_map(pairs: u32, amplitude: f64) -> *mut HlCircleMap {
    let mut map = ptr::null_mut();
    assert_eq!(
        unsafe { hl_circle_map_new(pairs, amplitude, false, &mut map) },
        HlStatus::Ok
    );
    assert!(!map.is_null());
    map
}

fn arc(a: f64, b: f64) -> HlContinuum {
    HlContinuum {
        kind: HlContinuumKind::Arc,
        a,
        b,
    }
}

#[test]
fn eval_and_inverse_round_trip() {
    let map = new_map(2, 0.05);
    for x in [0.0, 0.13, 0.5, 0.77] {
        let (mut y, mut back) = (f64::NAN, f64::NAN);
        unsafe {
            assert_eq!(hl_circle_map_eval(map, x, &mut y), HlStatus::Ok);
            assert_eq!(hl_circle_map_inverse(map, y, &mut back), HlStatus::Ok);
        }
        let d = (back - x).rem_euclid(1.0);
        assert!(d.min(1.0 - d) < 1e-12, "{x} -> {y} -> {back}");
    }
    unsafe { hl_circle_map_free(map) };
}

#[test]
fn hausdorff_matches_known_values() {
    let mut d = f64::NAN;
    let point = HlContinuum {
        kind: HlContinuumKind::Point,
        a: 0.5,
        b: 0.0,
    };
    unsafe {
        assert_eq!(hl_hausdorff(&point, &arc(0.2, 0.8), &mut d), HlStatus::Ok);
        assert!((d - 0.3).abs() < 1e-12);
        let full = HlContinuum {
            kind: HlContinuumKind::FullCircle,
            a: 0.0,
            b: 0.0,
        };
        assert_eq!(hl_hausdorff(&full, &full, &mut d), HlStatus::Ok);
        assert_eq!(d, 0.0);
    }
}

#[test]
fn image_may_alias_its_input() {
    let map = new_map(1, 0.1);
    let mut c = arc(0.1, 0.2);
    let before = c;
    unsafe {
        assert_eq!(hl_continuum_image(map, &c, &mut c), HlStatus::Ok);
        hl_circle_map_free(map);
    }
    assert_eq!(c.kind, HlContinuumKind::Arc);
    assert_ne!(c, before);
}

#[test]
fn failures_report_status_and_message() {
    let mut d = 0.0;
    let mut map = ptr::null_mut();
    unsafe {
        assert_eq!(hl_hausdorff(ptr::null(), &arc(0.1, 0.2), &mut d), HlStatus::NullPointer);
        assert!(last_error().contains("null"));
        assert_eq!(
            hl_hausdorff(&arc(0.1, 0.1), &arc(0.1, 0.2), &mut d),
            HlStatus::InvalidArgument
        );
        assert_eq!(
            hl_hausdorff(&arc(f64::NAN, 0.1), &arc(0.1, 0.2), &mut d),
            HlStatus::InvalidArgument
        );
        assert_eq!(hl_circle_map_new(0, 0.1, false, &mut map), HlStatus::InvalidArgument);
        assert!(map.is_null());
        assert!(!last_error().is_empty());
        assert_eq!(hl_circle_map_eval(ptr::null(), 0.1, &mut d), HlStatus::NullPointer);
        hl_circle_map_free(ptr::null_mut());
        hl_string_free(ptr::null_mut());
    }
}

#[test]
fn shadowing_is_falsified_through_the_abi() {
    let map = new_map(1, 0.1);
    let mut out = HlFalsification {
        candidates_tested: 0,
        worst_margin: f64::NAN,
        falsified: false,
    };
    let status = unsafe { hl_falsify_shadowing(map, 0.1, 0.01, 60, 1e-3, &mut out) };
    unsafe { hl_circle_map_free(map) };
    assert_eq!(status, HlStatus::Ok);
    assert!(out.falsified);
    assert!(out.candidates_tested > 0);
    assert!(out.worst_margin > 0.0);
}

#[test]
fn run_config_returns_report_json() {
    let config = CString::new(r#"{"experiment": "shadow", "mode": "verify"}"#).unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { hl_run_config(config.as_ptr(), &mut out) }, HlStatus::Ok);
    let text = unsafe { CStr::from_ptr(out) }.to_str().unwrap().to_owned();
    unsafe { hl_string_free(out) };
    let report: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(report["experiment"], "shadow-verify");
    assert_eq!(report["status"], "expected");

    let budget = CString::new(r#"{"experiment": "entropy", "system": "arcs", "budget": 0}"#).unwrap();
    assert_eq!(
        unsafe { hl_run_config(budget.as_ptr(), &mut out) },
        HlStatus::Inconclusive
    );
    unsafe { hl_string_free(out) };

    let bad = CString::new(r#"{"experiment": "shadow", "colour": 1}"#).unwrap();
    assert_eq!(
        unsafe { hl_run_config(bad.as_ptr(), &mut out) },
        HlStatus::InvalidArgument
    );
    assert!(last_error().contains("colour"));
}

#[test]
fn version_is_the_package_version() {
    let v = unsafe { CStr::from_ptr(hl_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
