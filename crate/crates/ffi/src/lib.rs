// SPDX-License-Identifier: MIT OR Apache-2.0

//! C ABI over the focus-core detectors.
//!
//! Detectors are opaque `FocusDetector` handles created by one of the
//! `focus_detector_new_*` functions and released with `focus_detector_free`.
//! Every fallible call returns a `FocusStatus`; outputs go through pointers.
//! The header is generated into `include/focus.h` at build time.

use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};

use focus_core::{DetectorConfig, FocusError, OnlineDetector, RobustConfig, RobustFocus, StepOutcome};

/// Result codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FocusStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NonFiniteInput = 3,
    Internal = 4,
}

impl From<&FocusError> for FocusStatus {
    fn from(e: &FocusError) -> Self {
        match e {
            FocusError::NonFiniteInput { .. } => FocusStatus::NonFiniteInput,
            FocusError::InvalidConfig(_) | FocusError::InvalidInput(_) => FocusStatus::InvalidArgument,
            _ => FocusStatus::Internal,
        }
    }
}

/// Outcome of one observation. `tau_hat` is meaningful only when
/// `has_tau_hat` is true.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FocusStepOutcome {
    pub t: u64,
    pub statistic: f64,
    pub tau_hat: u64,
    pub has_tau_hat: bool,
    pub detected: bool,
}

impl From<StepOutcome> for FocusStepOutcome {
    fn from(o: StepOutcome) -> Self {
        Self {
            t: o.t,
            statistic: o.statistic,
            tau_hat: o.tau_hat.unwrap_or(0),
            has_tau_hat: o.tau_hat.is_some(),
            detected: o.detected,
        }
    }
}

/// Opaque detector handle.
pub struct FocusDetector {
    inner: Box<dyn OnlineDetector>,
}

fn guard(f: impl FnOnce() -> FocusStatus) -> FocusStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or(FocusStatus::Internal)
}

unsafe fn create(
    out: *mut *mut FocusDetector,
    build: impl FnOnce() -> Result<Box<dyn OnlineDetector>, FocusError>,
) -> FocusStatus {
    if out.is_null() {
        return FocusStatus::NullPointer;
    }
    guard(|| match build() {
        Ok(inner) => {
            // SAFETY: `out` is non-null and the caller promises it is writable.
            unsafe { *out = Box::into_raw(Box::new(FocusDetector { inner })) };
            FocusStatus::Ok
        }
        Err(e) => FocusStatus::from(&e),
    })
}

/// Known-mean detector for data with pre-change mean `mean0` and scale `sigma`.
///
/// # Safety
/// `out` must be null or point to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn focus_detector_new_focus0(
    threshold: f64,
    mean0: f64,
    sigma: f64,
    out: *mut *mut FocusDetector,
) -> FocusStatus {
    create(out, || {
        let cfg = DetectorConfig::focus0(threshold).with_pre_change_mean(mean0).with_sigma(sigma);
        Ok(Box::new(focus_core::FocusDetector::new(cfg)?))
    })
}

/// Unknown-mean detector with scale `sigma`.
///
/// # Safety
/// `out` must be null or point to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn focus_detector_new_focus(
    threshold: f64,
    sigma: f64,
    out: *mut *mut FocusDetector,
) -> FocusStatus {
    create(out, || {
        let cfg = DetectorConfig::focus(threshold).with_sigma(sigma);
        Ok(Box::new(focus_core::FocusDetector::new(cfg)?))
    })
}

/// Outlier-robust detector with loss cap `cap` (may be `INFINITY`).
///
/// # Safety
/// `out` must be null or point to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn focus_detector_new_rfocus(
    cap: f64,
    threshold: f64,
    sigma: f64,
    out: *mut *mut FocusDetector,
) -> FocusStatus {
    create(out, || Ok(Box::new(RobustFocus::new(RobustConfig::new(cap, threshold).with_sigma(sigma))?)))
}

/// Feeds one observation. `out` may be null when the outcome is not needed.
///
/// # Safety
/// `det` must be a live handle; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn focus_detector_step(
    det: *mut FocusDetector,
    x: f64,
    out: *mut FocusStepOutcome,
) -> FocusStatus {
    // SAFETY: caller guarantees `det` is null or a live handle.
    let Some(det) = (unsafe { det.as_mut() }) else {
        return FocusStatus::NullPointer;
    };
    guard(|| match det.inner.step(x) {
        Ok(o) => {
            if !out.is_null() {
                // SAFETY: non-null and writable per contract.
                unsafe { *out = o.into() };
            }
            FocusStatus::Ok
        }
        Err(e) => FocusStatus::from(&e),
    })
}

/// Feeds `len` observations, stopping after the first detection. Writes the
/// number consumed to `consumed` and the last outcome to `last` (either may be
/// null).
///
/// # Safety
/// `det` must be a live handle; `xs` must point to `len` readable doubles
/// (or be null with `len == 0`); `consumed` and `last` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn focus_detector_step_many(
    det: *mut FocusDetector,
    xs: *const f64,
    len: usize,
    consumed: *mut usize,
    last: *mut FocusStepOutcome,
) -> FocusStatus {
    // SAFETY: caller guarantees `det` is null or a live handle.
    let Some(det) = (unsafe { det.as_mut() }) else {
        return FocusStatus::NullPointer;
    };
    if xs.is_null() && len > 0 {
        return FocusStatus::NullPointer;
    }
    let data: &[f64] = if len == 0 {
        &[]
    } else {
        // SAFETY: non-null with `len` readable elements per contract.
        unsafe { std::slice::from_raw_parts(xs, len) }
    };
    guard(|| {
        let mut used = 0usize;
        let mut status = FocusStatus::Ok;
        let mut outcome = None;
        for &x in data {
            match det.inner.step(x) {
                Ok(o) => {
                    used += 1;
                    outcome = Some(o);
                    if o.detected {
                        break;
                    }
                }
                Err(e) => {
                    status = FocusStatus::from(&e);
                    break;
                }
            }
        }
        // SAFETY: each pointer is null or writable per contract.
        unsafe {
            if !consumed.is_null() {
                *consumed = used;
            }
            if let (Some(o), false) = (outcome, last.is_null()) {
                *last = o.into();
            }
        }
        status
    })
}

/// Forgets all observations; the configuration is kept.
///
/// # Safety
/// `det` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn focus_detector_reset(det: *mut FocusDetector) -> FocusStatus {
    // SAFETY: caller guarantees `det` is null or a live handle.
    match unsafe { det.as_mut() } {
        Some(d) => guard(|| {
            d.inner.reset();
            FocusStatus::Ok
        }),
        None => FocusStatus::NullPointer,
    }
}

/// # Safety
/// `det` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn focus_detector_set_threshold(det: *mut FocusDetector, threshold: f64) -> FocusStatus {
    // SAFETY: caller guarantees `det` is null or a live handle.
    match unsafe { det.as_mut() } {
        Some(d) => guard(|| match d.inner.set_threshold(threshold) {
            Ok(()) => FocusStatus::Ok,
            Err(e) => FocusStatus::from(&e),
        }),
        None => FocusStatus::NullPointer,
    }
}

/// Number of observations consumed since creation or the last reset.
///
/// # Safety
/// `det` must be null or a live handle; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn focus_detector_observations(det: *const FocusDetector, out: *mut u64) -> FocusStatus {
    // SAFETY: caller guarantees both pointers are null or valid.
    match (unsafe { det.as_ref() }, out.is_null()) {
        (Some(d), false) => {
            unsafe { *out = d.inner.observations() };
            FocusStatus::Ok
        }
        _ => FocusStatus::NullPointer,
    }
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `det` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn focus_detector_free(det: *mut FocusDetector) {
    if !det.is_null() {
        // SAFETY: the handle came from Box::into_raw in `create`.
        drop(unsafe { Box::from_raw(det) });
    }
}

/// Static, NUL-terminated description of a status code.
#[no_mangle]
pub extern "C" fn focus_status_message(status: FocusStatus) -> *const c_char {
    let s: &'static [u8] = match status {
        FocusStatus::Ok => b"ok\0",
        FocusStatus::NullPointer => b"null pointer\0",
        FocusStatus::InvalidArgument => b"invalid argument\0",
        FocusStatus::NonFiniteInput => b"non-finite input\0",
        FocusStatus::Internal => b"internal error\0",
    };
    s.as_ptr().cast()
}
