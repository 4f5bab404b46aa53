// SPDX-License-Identifier: MIT OR Apache-2.0

use std::ffi::CStr;
use std::ptr;

use focus_ffi::*;

fn focus0(threshold: f64) -> *mut FocusDetector {
    let mut det = ptr::null_mut();
    assert_eq!(unsafe { focus_detector_new_focus0(threshold, 0.0, 1.0, &mut det) }, FocusStatus::Ok);
    assert!(!det.is_null());
    det
}

#[test]
fn step_reports_statistic_and_detection() {
    let det = focus0(8.0);
    let mut out = FocusStepOutcome::default();
    for x in [0.1, -0.2, 0.0] {
        assert_eq!(unsafe { focus_detector_step(det, x, &mut out) }, FocusStatus::Ok);
        assert!(!out.detected);
    }
    for _ in 0..3 {
        assert_eq!(unsafe { focus_detector_step(det, 3.0, &mut out) }, FocusStatus::Ok);
    }
    assert!(out.detected && out.statistic >= 8.0);
    assert!(out.has_tau_hat);
    assert_eq!((out.t, out.tau_hat), (6, 3));

    let mut n = 0;
    assert_eq!(unsafe { focus_detector_observations(det, &mut n) }, FocusStatus::Ok);
    assert_eq!(n, 6);
    assert_eq!(unsafe { focus_detector_reset(det) }, FocusStatus::Ok);
    assert_eq!(unsafe { focus_detector_observations(det, &mut n) }, FocusStatus::Ok);
    assert_eq!(n, 0);
    assert_eq!(unsafe { focus_detector_step(det, 0.5, ptr::null_mut()) }, FocusStatus::Ok);
    unsafe { focus_detector_free(det) };
}

#[test]
fn step_many_stops_at_detection() {
    let det = focus0(10.0);
    let mut xs = vec![0.0; 50];
    xs.extend(std::iter::repeat(2.0).take(50));
    let (mut used, mut last) = (0usize, FocusStepOutcome::default());
    let st = unsafe { focus_detector_step_many(det, xs.as_ptr(), xs.len(), &mut used, &mut last) };
    assert_eq!(st, FocusStatus::Ok);
    assert!(last.detected);
    assert!(used > 50 && used < 100);
    assert_eq!(last.t, used as u64);

    let st = unsafe { focus_detector_step_many(det, ptr::null(), 0, &mut used, ptr::null_mut()) };
    assert_eq!((st, used), (FocusStatus::Ok, 0));
    let st = unsafe { focus_detector_step_many(det, ptr::null(), 3, &mut used, ptr::null_mut()) };
    assert_eq!(st, FocusStatus::NullPointer);

    assert_eq!(unsafe { focus_detector_reset(det) }, FocusStatus::Ok);
    let bad = [1.0, f64::NAN, 2.0];
    let st = unsafe { focus_detector_step_many(det, bad.as_ptr(), bad.len(), &mut used, ptr::null_mut()) };
    assert_eq!((st, used), (FocusStatus::NonFiniteInput, 1));
    unsafe { focus_detector_free(det) };
}

#[test]
fn constructors_validate_arguments() {
    let mut det = ptr::null_mut();
    unsafe {
        assert_eq!(focus_detector_new_focus0(-1.0, 0.0, 1.0, &mut det), FocusStatus::InvalidArgument);
        assert_eq!(focus_detector_new_focus0(5.0, 0.0, 0.0, &mut det), FocusStatus::InvalidArgument);
        assert_eq!(focus_detector_new_focus(f64::NAN, 1.0, &mut det), FocusStatus::InvalidArgument);
        assert_eq!(focus_detector_new_rfocus(-2.0, 5.0, 1.0, &mut det), FocusStatus::InvalidArgument);
        assert!(det.is_null());
        assert_eq!(focus_detector_new_focus(5.0, 1.0, ptr::null_mut()), FocusStatus::NullPointer);

        assert_eq!(focus_detector_new_rfocus(f64::INFINITY, 5.0, 1.0, &mut det), FocusStatus::Ok);
        assert_eq!(focus_detector_set_threshold(det, 0.0), FocusStatus::InvalidArgument);
        assert_eq!(focus_detector_set_threshold(det, 2.0), FocusStatus::Ok);
        assert_eq!(focus_detector_step(det, f64::INFINITY, ptr::null_mut()), FocusStatus::NonFiniteInput);
        focus_detector_free(det);
    }
}

#[test]
fn null_handles_are_rejected() {
    let mut n = 0;
    unsafe {
        assert_eq!(focus_detector_step(ptr::null_mut(), 1.0, ptr::null_mut()), FocusStatus::NullPointer);
        assert_eq!(focus_detector_reset(ptr::null_mut()), FocusStatus::NullPointer);
        assert_eq!(focus_detector_set_threshold(ptr::null_mut(), 1.0), FocusStatus::NullPointer);
        assert_eq!(focus_detector_observations(ptr::null(), &mut n), FocusStatus::NullPointer);
        focus_detector_free(ptr::null_mut());
    }
    let det = focus0(1.0);
    assert_eq!(unsafe { focus_detector_observations(det, ptr::null_mut()) }, FocusStatus::NullPointer);
    unsafe { focus_detector_free(det) };
}

#[test]
fn ffi_matches_core_detector() {
    use focus_core::{DetectorConfig, OnlineDetector};
    let data: Vec<f64> =
        (0..300).map(|i| ((i * 37 % 101) as f64 / 50.0 - 1.0) + if i > 150 { 0.8 } else { 0.0 }).collect();
    let mut det = ptr::null_mut();
    assert_eq!(unsafe { focus_detector_new_focus(f64::INFINITY, 1.0, &mut det) }, FocusStatus::Ok);
    let mut core = focus_core::FocusDetector::new(DetectorConfig::focus(f64::INFINITY)).unwrap();
    let mut out = FocusStepOutcome::default();
    for &x in &data {
        assert_eq!(unsafe { focus_detector_step(det, x, &mut out) }, FocusStatus::Ok);
        let o = core.step(x).unwrap();
        assert_eq!(out.statistic, o.statistic);
        assert_eq!(out.has_tau_hat, o.tau_hat.is_some());
    }
    unsafe { focus_detector_free(det) };
}

#[test]
fn status_messages() {
    for (s, want) in [
        (FocusStatus::Ok, "ok"),
        (FocusStatus::NullPointer, "null pointer"),
        (FocusStatus::InvalidArgument, "invalid argument"),
        (FocusStatus::NonFiniteInput, "non-finite input"),
        (FocusStatus::Internal, "internal error"),
    ] {
        let msg = unsafe { CStr::from_ptr(focus_status_message(s)) };
        assert_eq!(msg.to_str().unwrap(), want);
    }
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/focus.h")).unwrap();
    for sym in [
        "FOCUS_H",
        "FOCUS_STATUS_OK",
        "FOCUS_STATUS_NON_FINITE_INPUT",
        "typedef struct FocusDetector FocusDetector",
        "FocusStepOutcome",
        "focus_detector_new_focus0",
        "focus_detector_new_focus",
        "focus_detector_new_rfocus",
        "focus_detector_step",
        "focus_detector_step_many",
        "focus_detector_reset",
        "focus_detector_set_threshold",
        "focus_detector_observations",
        "focus_detector_free",
        "focus_status_message",
    ] {
        assert!(header.contains(sym), "header lacks {sym}");
    }
}
