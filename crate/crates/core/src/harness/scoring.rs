// SPDX-License-Identifier: MIT OR Apache-2.0

//! Windowed precision and recall for labelled anomaly streams.

use serde::{Deserialize, Serialize};

use crate::error::FocusError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowedScore {
    pub precision: f64,
    pub recall: f64,
    /// Truths with at least one detection in their window.
    pub truths_hit: usize,
    /// Scored detections outside every window.
    pub false_positives: usize,
    /// Detections ignored because they fall in the probation prefix.
    pub ignored: usize,
}

/// A detection is correct when it lies within `+- window_frac * n` (inclusive)
/// of some truth. Several detections in one window count once toward recall
/// and none of them is a false positive. Detections at times `<= probation`
/// are ignored.
///
/// `precision = hits / (hits + false positives)`, defined as 1 when nothing is
/// scored; `recall = hits / truths`, defined as 1 when there are no truths.
pub fn evaluate_windowed(
    truth: &[u64],
    detections: &[u64],
    n: u64,
    window_frac: f64,
    probation: u64,
) -> Result<WindowedScore, FocusError> {
    if !(window_frac > 0.0 && window_frac < 0.5) {
        return Err(FocusError::config(format!("window fraction must lie in (0, 0.5), got {window_frac}")));
    }
    let half = window_frac * n as f64;
    let near = |d: u64, t: u64| (d as f64 - t as f64).abs() <= half;

    let mut hit = vec![false; truth.len()];
    let (mut false_positives, mut ignored) = (0, 0);
    for &d in detections {
        if d <= probation {
            ignored += 1;
            continue;
        }
        let mut matched = false;
        for (i, &t) in truth.iter().enumerate() {
            if near(d, t) {
                hit[i] = true;
                matched = true;
            }
        }
        if !matched {
            false_positives += 1;
        }
    }
    let truths_hit = hit.iter().filter(|&&h| h).count();
    let scored = truths_hit + false_positives;
    let precision = if scored == 0 { 1.0 } else { truths_hit as f64 / scored as f64 };
    let recall = if truth.is_empty() { 1.0 } else { truths_hit as f64 / truth.len() as f64 };
    Ok(WindowedScore { precision, recall, truths_hit, false_positives, ignored })
}
