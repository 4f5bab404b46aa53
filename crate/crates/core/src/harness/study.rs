// SPDX-License-Identifier: MIT OR Apache-2.0

//! Quadratic-count and timing studies.

use std::hint::black_box;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{mean_se, replicate_rng, StreamSpec};
use crate::baselines::oracle::yu_oracle;
use crate::curve::{HalfCurve, Orientation};
use crate::detectors::{DetectorConfig, FocusDetector, OnlineDetector};
use crate::error::FocusError;
use crate::robust::{RobustConfig, RobustFocus};

/// Mean number of stored quadratics per side at time `n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountRow {
    /// `"focus0"` (known mean) or `"focus"` (unknown mean).
    pub variant: String,
    pub n: u64,
    pub change: bool,
    pub replicates: usize,
    pub mean: f64,
    pub se: f64,
    /// `1 + sum_{t=1}^{n-1} 1/(t+1)`.
    pub harmonic: f64,
    /// `2 (1 + ln(n/2))`.
    pub change_bound: f64,
}

pub fn harmonic_bound(n: u64) -> f64 {
    1.0 + (1..n).map(|t| 1.0 / (t + 1) as f64).sum::<f64>()
}

pub fn change_bound(n: u64) -> f64 {
    2.0 * (1.0 + (n as f64 / 2.0).ln())
}

fn side_counts(data: &[f64], clamp: bool) -> f64 {
    let mut up = HalfCurve::new(Orientation::Up, clamp);
    let mut down = HalfCurve::new(Orientation::Down, clamp);
    for &x in data {
        // data are finite by construction
        up.advance(x).ok();
        down.advance(x).ok();
    }
    (up.quadratic_count() + down.quadratic_count()) as f64 / 2.0
}

/// Stored-quadratic counts at each `n`, averaged over both sides and over
/// replicates. With `change`, each replicate gets one change at a uniform
/// location in `[1, n-1]` with size uniform in `[0, 4]`.
///
/// The count excludes the zero-line added at time `n`.
pub fn quadratic_count_profile(
    n_values: &[u64],
    replicates: usize,
    change: bool,
    seed: u64,
) -> Result<Vec<CountRow>, FocusError> {
    if replicates < 2 || n_values.iter().any(|&n| n < 2) {
        return Err(FocusError::config("count study needs n >= 2 and at least 2 replicates"));
    }
    let mut rows = Vec::new();
    for &n in n_values {
        let per_rep: Vec<(f64, f64)> = (0..replicates as u64)
            .into_par_iter()
            .map(|r| {
                let mut spec = StreamSpec::null(n, seed, r);
                if change {
                    // a generator stream disjoint from the noise streams
                    let mut rng = replicate_rng(seed ^ 0x9e37_79b9_7f4a_7c15, r);
                    spec = spec.with_change(rng.random_range(1..n), rng.random_range(0.0..=4.0));
                }
                let data: Vec<f64> = spec.iter().collect();
                (side_counts(&data, true), side_counts(&data, false))
            })
            .collect();
        for (variant, pick) in [("focus0", 0), ("focus", 1)] {
            let vals: Vec<f64> = per_rep.iter().map(|p| if pick == 0 { p.0 } else { p.1 }).collect();
            let (mean, se) = mean_se(&vals);
            rows.push(CountRow {
                variant: variant.to_string(),
                n,
                change,
                replicates,
                mean,
                se,
                harmonic: harmonic_bound(n),
                change_bound: change_bound(n),
            });
        }
    }
    Ok(rows)
}

/// Methods the timing study knows how to run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum TimedMethod {
    Focus0,
    Focus,
    RFocus { cap: f64 },
    YuOracle,
}

impl TimedMethod {
    pub fn name(&self) -> String {
        match self {
            TimedMethod::Focus0 => "focus0".into(),
            TimedMethod::Focus => "focus".into(),
            TimedMethod::RFocus { cap } => format!("rfocus(K={cap})"),
            TimedMethod::YuOracle => "yu_oracle".into(),
        }
    }

    fn run(&self, data: &[f64]) -> Result<f64, FocusError> {
        fn drive(mut d: impl OnlineDetector, data: &[f64]) -> Result<f64, FocusError> {
            let mut acc = 0.0;
            for &x in data {
                acc += d.step(x)?.statistic;
            }
            Ok(acc)
        }
        match *self {
            TimedMethod::Focus0 => drive(FocusDetector::new(DetectorConfig::focus0(f64::INFINITY))?, data),
            TimedMethod::Focus => drive(FocusDetector::new(DetectorConfig::focus(f64::INFINITY))?, data),
            TimedMethod::RFocus { cap } => drive(RobustFocus::new(RobustConfig::new(cap, f64::INFINITY))?, data),
            TimedMethod::YuOracle => Ok(yu_oracle(data)?.iter().sum()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub method: String,
    pub n: u64,
    /// Fastest of the repeats, in seconds.
    pub seconds: f64,
}

/// Wall-clock time to process a null stream of each length, best of
/// `repeats`. Runs sequentially so timings do not compete for cores.
pub fn timing_profile(
    method: TimedMethod,
    n_values: &[u64],
    repeats: usize,
    seed: u64,
) -> Result<Vec<TimingRow>, FocusError> {
    let mut rows = Vec::with_capacity(n_values.len());
    for &n in n_values {
        let data: Vec<f64> = StreamSpec::null(n, seed, 0).iter().collect();
        let mut best = f64::INFINITY;
        for _ in 0..repeats.max(1) {
            let start = Instant::now();
            black_box(method.run(black_box(&data))?);
            best = best.min(start.elapsed().as_secs_f64());
        }
        rows.push(TimingRow { method: method.name(), n, seconds: best });
    }
    Ok(rows)
}

/// Least-squares slope of `ln seconds` against `ln n`.
pub fn loglog_slope(rows: &[TimingRow]) -> f64 {
    let pts: Vec<(f64, f64)> =
        rows.iter().filter(|r| r.seconds > 0.0).map(|r| ((r.n as f64).ln(), r.seconds.ln())).collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_values() {
        assert_eq!(harmonic_bound(1), 1.0);
        assert!((harmonic_bound(3) - (1.0 + 0.5 + 1.0 / 3.0)).abs() < 1e-15);
        assert!((harmonic_bound(1024) - 7.509).abs() < 1e-3);
    }

    #[test]
    fn small_count_study_runs() {
        let rows = quadratic_count_profile(&[64], 20, false, 1).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows[0].mean < rows[1].mean);
        assert!(quadratic_count_profile(&[64], 1, false, 1).is_err());
    }

    #[test]
    fn slope_of_exact_power_law() {
        let rows: Vec<TimingRow> = [10u64, 100, 1000]
            .iter()
            .map(|&n| TimingRow { method: "x".into(), n, seconds: 3e-9 * (n as f64).powi(2) })
            .collect();
        assert!((loglog_slope(&rows) - 2.0).abs() < 1e-12);
    }
}
