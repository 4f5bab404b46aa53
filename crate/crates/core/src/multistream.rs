// SPDX-License-Identifier: MIT OR Apache-2.0

//! Independent per-stream detectors combined by the maximum or the sum of their
//! statistics. Changepoint estimates are not forced to coincide across streams.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detectors::{check_threshold, DetectorConfig, FocusDetector, OnlineDetector};
use crate::error::{ensure_finite, FocusError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Combiner {
    Max,
    Sum,
}

#[derive(Clone, Debug)]
pub struct MultiConfig {
    pub d: usize,
    /// Per-stream settings; its threshold is ignored.
    pub detector: DetectorConfig,
    /// `None` disables detection by that combiner.
    pub lambda_max: Option<f64>,
    pub lambda_sum: Option<f64>,
}

impl MultiConfig {
    pub fn new(d: usize, detector: DetectorConfig) -> Self {
        Self { d, detector, lambda_max: None, lambda_sum: None }
    }

    pub fn with_max_threshold(mut self, lambda: f64) -> Self {
        self.lambda_max = Some(lambda);
        self
    }

    pub fn with_sum_threshold(mut self, lambda: f64) -> Self {
        self.lambda_sum = Some(lambda);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiStepOutcome {
    pub t: u64,
    pub max_statistic: f64,
    pub sum_statistic: f64,
    /// Changepoint estimate of the stream with the largest statistic.
    pub tau_hat: Option<u64>,
    /// Index of that stream.
    pub leading_stream: usize,
    pub detected_max: bool,
    pub detected_sum: bool,
}

impl MultiStepOutcome {
    pub fn detected(&self) -> bool {
        self.detected_max || self.detected_sum
    }

    pub fn statistic(&self, combiner: Combiner) -> f64 {
        match combiner {
            Combiner::Max => self.max_statistic,
            Combiner::Sum => self.sum_statistic,
        }
    }
}

/// Streams at or above this count are stepped in parallel.
const PARALLEL_STREAMS: usize = 64;

pub struct MultiStream {
    detectors: Vec<Box<dyn OnlineDetector>>,
    lambda_max: f64,
    lambda_sum: f64,
    t: u64,
}

impl MultiStream {
    pub fn new(config: &MultiConfig) -> Result<Self, FocusError> {
        let detector = DetectorConfig { threshold: f64::INFINITY, ..config.detector.clone() };
        let detectors = (0..config.d)
            .map(|_| FocusDetector::new(detector.clone()).map(|d| Box::new(d) as Box<dyn OnlineDetector>))
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_detectors(detectors, config.lambda_max, config.lambda_sum)
    }

    /// Combines arbitrary detectors. Their own thresholds are set to infinity.
    pub fn from_detectors(
        mut detectors: Vec<Box<dyn OnlineDetector>>,
        lambda_max: Option<f64>,
        lambda_sum: Option<f64>,
    ) -> Result<Self, FocusError> {
        if detectors.is_empty() {
            return Err(FocusError::config("multistream needs at least one stream"));
        }
        for d in &mut detectors {
            d.set_threshold(f64::INFINITY)?;
        }
        let lambda_max = lambda_max.map(check_threshold).transpose()?.unwrap_or(f64::INFINITY);
        let lambda_sum = lambda_sum.map(check_threshold).transpose()?.unwrap_or(f64::INFINITY);
        Ok(Self { detectors, lambda_max, lambda_sum, t: 0 })
    }

    pub fn dimension(&self) -> usize {
        self.detectors.len()
    }

    pub fn thresholds(&self) -> (f64, f64) {
        (self.lambda_max, self.lambda_sum)
    }

    pub fn set_thresholds(&mut self, lambda_max: f64, lambda_sum: f64) -> Result<(), FocusError> {
        self.lambda_max = check_threshold(lambda_max)?;
        self.lambda_sum = check_threshold(lambda_sum)?;
        Ok(())
    }

    pub fn multi_step(&mut self, xs: &[f64]) -> Result<MultiStepOutcome, FocusError> {
        if xs.len() != self.detectors.len() {
            return Err(FocusError::input(format!(
                "expected {} values per step, got {}",
                self.detectors.len(),
                xs.len()
            )));
        }
        for &x in xs {
            ensure_finite(x)?;
        }
        let outcomes = if self.detectors.len() >= PARALLEL_STREAMS {
            self.detectors.par_iter_mut().zip(xs).map(|(d, &x)| d.step(x)).collect::<Result<Vec<_>, _>>()?
        } else {
            self.detectors.iter_mut().zip(xs).map(|(d, &x)| d.step(x)).collect::<Result<Vec<_>, _>>()?
        };
        self.t += 1;

        let mut lead = 0;
        let mut sum = 0.0;
        for (i, o) in outcomes.iter().enumerate() {
            sum += o.statistic;
            if o.statistic > outcomes[lead].statistic {
                lead = i;
            }
        }
        let max = outcomes[lead].statistic;
        let tau_hat = outcomes[lead].tau_hat.or_else(|| (max > 0.0).then_some(0));
        Ok(MultiStepOutcome {
            t: self.t,
            max_statistic: max,
            sum_statistic: sum,
            tau_hat,
            leading_stream: lead,
            detected_max: max >= self.lambda_max,
            detected_sum: sum >= self.lambda_sum,
        })
    }

    pub fn reset(&mut self) {
        self.detectors.iter_mut().for_each(|d| d.reset());
        self.t = 0;
    }
}
