// SPDX-License-Identifier: MIT OR Apache-2.0

//! Simulation harness: seeded Gaussian streams, run-length and delay studies,
//! threshold calibration, quadratic counts, timing and windowed scoring.
//!
//! Every replicate draws from its own ChaCha8 stream (`seed`, `replicate`), so
//! results do not depend on how replicates are scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detectors::OnlineDetector;
use crate::error::FocusError;

pub mod multi;
pub mod report;
pub mod scoring;
pub mod study;

pub use multi::{multi_detection_delay, multi_run_length_profile, MultiChange};
pub use scoring::{evaluate_windowed, WindowedScore};
pub use study::{loglog_slope, quadratic_count_profile, timing_profile, CountRow, TimedMethod, TimingRow};

/// Name of the generator recorded in output metadata.
pub const RNG_ALGORITHM: &str = "ChaCha8 (rand_chacha), seed_from_u64(seed) + set_stream(replicate)";

pub fn replicate_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

/// One Gaussian stream with at most one mean shift, right after `tau_star`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamSpec {
    pub n: u64,
    /// Last pre-change time; 0 means no change.
    pub tau_star: u64,
    pub mu0: f64,
    pub delta: f64,
    pub sigma: f64,
    pub seed: u64,
    /// Replicate index; selects an independent generator stream.
    pub replicate: u64,
}

impl StreamSpec {
    pub fn null(n: u64, seed: u64, replicate: u64) -> Self {
        Self { n, tau_star: 0, mu0: 0.0, delta: 0.0, sigma: 1.0, seed, replicate }
    }

    pub fn with_change(mut self, tau_star: u64, delta: f64) -> Self {
        self.tau_star = tau_star;
        self.delta = delta;
        self
    }

    pub fn validate(&self) -> Result<(), FocusError> {
        if self.tau_star >= self.n.max(1) {
            return Err(FocusError::config(format!("tau_star {} must be < n {}", self.tau_star, self.n)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) || !self.mu0.is_finite() || !self.delta.is_finite() {
            return Err(FocusError::config("stream mean, change and sigma must be finite with sigma > 0"));
        }
        Ok(())
    }

    /// Lazily generated observations `x_1, x_2, ...`.
    pub fn iter(&self) -> impl Iterator<Item = f64> {
        let mut rng = replicate_rng(self.seed, self.replicate);
        let spec = *self;
        (1..=spec.n).map(move |t| {
            let eps: f64 = rng.sample(StandardNormal);
            let shift = if spec.tau_star > 0 && t > spec.tau_star { spec.delta } else { 0.0 };
            spec.mu0 + shift + spec.sigma * eps
        })
    }
}

/// `x_t = mu0 + delta 1{t > tau_star} + sigma eps_t`.
pub fn generate_stream(spec: &StreamSpec) -> Result<Vec<f64>, FocusError> {
    spec.validate()?;
    Ok(spec.iter().collect())
}

/// Compensated sum of a slice, summed in order.
pub fn kahan_sum(values: &[f64]) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for &v in values {
        let y = v - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Mean and standard error of the mean. NaN when undefined.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let k = values.len();
    if k == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = kahan_sum(values) / k as f64;
    if k == 1 {
        return (mean, f64::NAN);
    }
    let dev: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
    let var = kahan_sum(&dev) / (k - 1) as f64;
    (mean, (var / k as f64).sqrt())
}

/// How a single replicate ended.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ReplicateOutcome {
    /// Run length or detection delay.
    Observed(f64),
    /// No detection before the horizon.
    Censored,
    /// Detection at or before the changepoint.
    FalseAlarm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    /// Per-replicate outcomes, in replicate order.
    pub outcomes: Vec<ReplicateOutcome>,
    pub mean: f64,
    pub se: f64,
    pub censored: usize,
    pub false_alarms: usize,
    /// When set, censored replicates entered `mean` and `se` at this value, so
    /// `mean` is a lower bound.
    pub censored_at: Option<f64>,
}

impl RunSummary {
    pub fn new(outcomes: Vec<ReplicateOutcome>, censored_at: Option<f64>) -> Self {
        let mut values = Vec::with_capacity(outcomes.len());
        let (mut censored, mut false_alarms) = (0, 0);
        for o in &outcomes {
            match *o {
                ReplicateOutcome::Observed(v) => values.push(v),
                ReplicateOutcome::Censored => {
                    censored += 1;
                    if let Some(h) = censored_at {
                        values.push(h);
                    }
                }
                ReplicateOutcome::FalseAlarm => false_alarms += 1,
            }
        }
        let (mean, se) = mean_se(&values);
        Self { outcomes, mean, se, censored, false_alarms, censored_at }
    }

    pub fn replicates(&self) -> usize {
        self.outcomes.len()
    }

    pub fn observed(&self) -> Vec<f64> {
        self.outcomes
            .iter()
            .filter_map(|o| match o {
                ReplicateOutcome::Observed(v) => Some(*v),
                _ => None,
            })
            .collect()
    }
}

/// Times at which the running maximum of a null statistic trace increased,
/// for one replicate. The first step is always recorded.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RecordTrace {
    pub times: Vec<u64>,
    pub values: Vec<f64>,
}

impl RecordTrace {
    /// First time the statistic reaches `threshold`.
    pub fn run_length(&self, threshold: f64) -> Option<u64> {
        let i = self.values.partition_point(|&v| v < threshold);
        self.times.get(i).copied()
    }
}

/// Null record traces for every replicate, up to a common horizon. Lets the
/// run length be read off for any threshold without re-running detectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunLengthProfile {
    pub horizon: u64,
    pub seed: u64,
    pub traces: Vec<RecordTrace>,
}

impl RunLengthProfile {
    /// Runs `factory()` (thresholds are overridden to infinity) on
    /// `replicates` standard Gaussian null streams of length `horizon`.
    pub fn simulate<D, F>(factory: F, replicates: usize, horizon: u64, seed: u64) -> Result<Self, FocusError>
    where
        D: OnlineDetector,
        F: Fn() -> Result<D, FocusError> + Sync,
    {
        if horizon == 0 || replicates == 0 {
            return Err(FocusError::config("horizon and replicates must be positive"));
        }
        let traces = (0..replicates as u64)
            .into_par_iter()
            .map(|r| {
                let mut det = factory()?;
                det.set_threshold(f64::INFINITY)?;
                let mut trace = RecordTrace::default();
                let mut best = f64::NEG_INFINITY;
                for x in StreamSpec::null(horizon, seed, r).iter() {
                    let o = det.step(x)?;
                    if o.statistic > best {
                        best = o.statistic;
                        trace.times.push(o.t);
                        trace.values.push(o.statistic);
                    }
                }
                Ok(trace)
            })
            .collect::<Result<Vec<_>, FocusError>>()?;
        Ok(Self { horizon, seed, traces })
    }

    /// Average run length at `threshold`; censored replicates count as the
    /// horizon.
    pub fn average_run_length(&self, threshold: f64) -> RunSummary {
        let outcomes = self
            .traces
            .iter()
            .map(|tr| match tr.run_length(threshold) {
                Some(t) => ReplicateOutcome::Observed(t as f64),
                None => ReplicateOutcome::Censored,
            })
            .collect();
        RunSummary::new(outcomes, Some(self.horizon as f64))
    }

    /// Thresholds where the run-length estimate can change, ascending.
    fn breakpoints(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.traces.iter().flat_map(|t| t.values.iter().copied()).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    /// Threshold whose estimated ARL is closest to `target_arl`. The estimate is
    /// a non-decreasing step function of the threshold; the search returns the
    /// midpoint of the chosen step.
    pub fn calibrate(&self, target_arl: f64) -> Result<Calibration, FocusError> {
        if !(target_arl >= 1.0) || target_arl >= self.horizon as f64 {
            return Err(FocusError::UnreachableTarget { target: target_arl, horizon: self.horizon });
        }
        let bps = self.breakpoints();
        // Step j covers thresholds in (bps[j-1], bps[j]], with bps[-1] = 0.
        let step_threshold = |j: usize| -> f64 {
            let lo = if j == 0 { 0.0 } else { bps[j - 1] };
            match bps.get(j) {
                Some(&hi) => 0.5 * (lo + hi),
                None => lo + lo.abs().max(1.0),
            }
        };
        let arl_at = |j: usize| self.average_run_length(step_threshold(j)).mean;
        let (mut lo, mut hi) = (0usize, bps.len());
        while lo < hi {
            let mid = (lo + hi) / 2;
            if arl_at(mid) >= target_arl {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        let mut best = lo.min(bps.len());
        if best > 0 && (arl_at(best - 1) - target_arl).abs() < (arl_at(best) - target_arl).abs() {
            best -= 1;
        }
        let threshold = step_threshold(best);
        Ok(Calibration { threshold, target_arl, achieved: self.average_run_length(threshold) })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub threshold: f64,
    pub target_arl: f64,
    pub achieved: RunSummary,
}

/// Mean first-detection time on null streams at a fixed threshold.
pub fn average_run_length<D, F>(
    factory: F,
    threshold: f64,
    replicates: usize,
    horizon: u64,
    seed: u64,
) -> Result<RunSummary, FocusError>
where
    D: OnlineDetector,
    F: Fn() -> Result<D, FocusError> + Sync,
{
    Ok(RunLengthProfile::simulate(factory, replicates, horizon, seed)?.average_run_length(threshold))
}

/// Simulates null profiles and calibrates a threshold to `target_arl`.
pub fn calibrate_threshold<D, F>(
    factory: F,
    target_arl: f64,
    replicates: usize,
    horizon: u64,
    seed: u64,
) -> Result<Calibration, FocusError>
where
    D: OnlineDetector,
    F: Fn() -> Result<D, FocusError> + Sync,
{
    if target_arl >= horizon as f64 {
        return Err(FocusError::UnreachableTarget { target: target_arl, horizon });
    }
    RunLengthProfile::simulate(factory, replicates, horizon, seed)?.calibrate(target_arl)
}

/// Detection delay after a change at `spec.tau_star` of size `spec.delta`, one
/// stream per replicate (the replicate field of `spec` is ignored). Detections
/// at or before the change are false alarms and excluded from the mean.
pub fn detection_delay<D, F>(
    factory: F,
    threshold: f64,
    spec: &StreamSpec,
    replicates: usize,
) -> Result<RunSummary, FocusError>
where
    D: OnlineDetector,
    F: Fn() -> Result<D, FocusError> + Sync,
{
    spec.validate()?;
    let outcomes = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let mut det = factory()?;
            det.set_threshold(threshold)?;
            let rep = StreamSpec { replicate: r, ..*spec };
            for x in rep.iter() {
                let o = det.step(x)?;
                if o.detected {
                    return Ok(if o.t <= spec.tau_star {
                        ReplicateOutcome::FalseAlarm
                    } else {
                        ReplicateOutcome::Observed((o.t - spec.tau_star) as f64)
                    });
                }
            }
            Ok(ReplicateOutcome::Censored)
        })
        .collect::<Result<Vec<_>, FocusError>>()?;
    Ok(RunSummary::new(outcomes, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detectors::{DetectorConfig, FocusDetector};

    fn focus0() -> Result<FocusDetector, FocusError> {
        FocusDetector::new(DetectorConfig::focus0(f64::INFINITY))
    }

    #[test]
    fn streams_are_reproducible() {
        let spec = StreamSpec::null(100, 7, 3);
        assert_eq!(generate_stream(&spec).unwrap(), generate_stream(&spec).unwrap());
        let other = StreamSpec::null(100, 7, 4);
        assert_ne!(generate_stream(&spec).unwrap(), generate_stream(&other).unwrap());
    }

    #[test]
    fn change_is_superimposed_on_null() {
        let null = generate_stream(&StreamSpec::null(50, 1, 0)).unwrap();
        let alt = generate_stream(&StreamSpec::null(50, 1, 0).with_change(20, 2.0)).unwrap();
        for (t, (a, b)) in null.iter().zip(&alt).enumerate() {
            let expect = if t + 1 > 20 { 2.0 } else { 0.0 };
            assert!((b - a - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn pre_change_mean_is_close() {
        let spec = StreamSpec { mu0: 3.0, ..StreamSpec::null(20_000, 11, 0) }.with_change(10_000, 1.0);
        let x = generate_stream(&spec).unwrap();
        let m = kahan_sum(&x[..10_000]) / 10_000.0;
        assert!((m - 3.0).abs() < 4.0 / 100.0);
    }

    #[test]
    fn invalid_spec() {
        assert!(generate_stream(&StreamSpec::null(10, 0, 0).with_change(10, 1.0)).is_err());
    }

    #[test]
    fn run_length_extremes() {
        let prof = RunLengthProfile::simulate(focus0, 8, 200, 5).unwrap();
        let inf = prof.average_run_length(f64::INFINITY);
        assert_eq!(inf.censored, 8);
        let zero = prof.average_run_length(0.0);
        assert_eq!(zero.mean, 1.0);
        assert_eq!(zero.censored, 0);
    }

    #[test]
    fn calibration_hits_target() {
        let prof = RunLengthProfile::simulate(focus0, 100, 20_000, 9).unwrap();
        let c = prof.calibrate(500.0).unwrap();
        assert!((c.achieved.mean - 500.0).abs() / 500.0 < 0.1, "{}", c.achieved.mean);
        let c2 = prof.calibrate(1000.0).unwrap();
        assert!(c2.threshold >= c.threshold);
        assert!(
            prof.calibrate(1.0).unwrap().threshold
                <= prof.traces.iter().map(|t| t.values[0]).fold(f64::INFINITY, f64::min)
        );
        assert!(matches!(prof.calibrate(20_000.0), Err(FocusError::UnreachableTarget { .. })));
    }

    #[test]
    fn delay_accounting() {
        let spec = StreamSpec::null(400, 2, 0).with_change(200, 5.0);
        let s = detection_delay(focus0, 12.0, &spec, 20).unwrap();
        assert_eq!(s.observed().len() + s.censored + s.false_alarms, 20);
        assert!(s.observed().iter().all(|&d| (1.0..=3.0).contains(&d)));
    }

    #[test]
    fn mean_se_examples() {
        let (m, se) = mean_se(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((se - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }
}
