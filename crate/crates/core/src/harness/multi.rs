// SPDX-License-Identifier: MIT OR Apache-2.0

//! Run-length and delay studies for combined multistream statistics.
//!
//! A replicate draws `d` standard Gaussian values per step from its own
//! generator, stream order first.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{replicate_rng, RecordTrace, ReplicateOutcome, RunLengthProfile, RunSummary};
use crate::error::FocusError;
use crate::multistream::{Combiner, MultiConfig, MultiStream};

/// Mean shifts applied to each stream right after `tau_star`.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiChange {
    pub tau_star: u64,
    pub shifts: Vec<f64>,
}

struct Rows {
    rng: rand_chacha::ChaCha8Rng,
    buf: Vec<f64>,
}

impl Rows {
    fn new(d: usize, seed: u64, replicate: u64) -> Self {
        Self { rng: replicate_rng(seed, replicate), buf: vec![0.0; d] }
    }

    fn next(&mut self, t: u64, change: Option<&MultiChange>) -> &[f64] {
        for (i, v) in self.buf.iter_mut().enumerate() {
            let eps: f64 = self.rng.sample(StandardNormal);
            *v = eps + change.filter(|c| t > c.tau_star).map_or(0.0, |c| c.shifts[i]);
        }
        &self.buf
    }
}

/// Null record traces of one combined statistic.
pub fn multi_run_length_profile(
    config: &MultiConfig,
    combiner: Combiner,
    replicates: usize,
    horizon: u64,
    seed: u64,
) -> Result<RunLengthProfile, FocusError> {
    if horizon == 0 || replicates == 0 {
        return Err(FocusError::config("horizon and replicates must be positive"));
    }
    let null = MultiConfig { lambda_max: None, lambda_sum: None, ..config.clone() };
    let traces = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let mut ms = MultiStream::new(&null)?;
            let mut rows = Rows::new(config.d, seed, r);
            let mut trace = RecordTrace::default();
            let mut best = f64::NEG_INFINITY;
            for t in 1..=horizon {
                let s = ms.multi_step(rows.next(t, None))?.statistic(combiner);
                if s > best {
                    best = s;
                    trace.times.push(t);
                    trace.values.push(s);
                }
            }
            Ok(trace)
        })
        .collect::<Result<Vec<_>, FocusError>>()?;
    Ok(RunLengthProfile { horizon, seed, traces })
}

/// Delay of the first crossing of `threshold` by `combiner` after the change,
/// within `n` steps. Crossings at or before the change are false alarms.
pub fn multi_detection_delay(
    config: &MultiConfig,
    combiner: Combiner,
    threshold: f64,
    change: &MultiChange,
    n: u64,
    replicates: usize,
    seed: u64,
) -> Result<RunSummary, FocusError> {
    if change.shifts.len() != config.d || change.tau_star >= n {
        return Err(FocusError::config("change needs one shift per stream and tau_star < n"));
    }
    let cfg = match combiner {
        Combiner::Max => MultiConfig { lambda_max: Some(threshold), lambda_sum: None, ..config.clone() },
        Combiner::Sum => MultiConfig { lambda_max: None, lambda_sum: Some(threshold), ..config.clone() },
    };
    let outcomes = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let mut ms = MultiStream::new(&cfg)?;
            let mut rows = Rows::new(cfg.d, seed, r);
            for t in 1..=n {
                if ms.multi_step(rows.next(t, Some(change)))?.detected() {
                    return Ok(if t <= change.tau_star {
                        ReplicateOutcome::FalseAlarm
                    } else {
                        ReplicateOutcome::Observed((t - change.tau_star) as f64)
                    });
                }
            }
            Ok(ReplicateOutcome::Censored)
        })
        .collect::<Result<Vec<_>, FocusError>>()?;
    Ok(RunSummary::new(outcomes, None))
}
