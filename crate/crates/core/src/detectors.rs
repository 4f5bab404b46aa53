// SPDX-License-Identifier: MIT OR Apache-2.0

//! Thresholded online detectors built from a pair of [`HalfCurve`]s.
//!
//! Statistics are reported in half log-likelihood-ratio units throughout, so a
//! known-mean detector's statistic equals `P(n)^2 / 2` where `P(n)` is the
//! Page-CUSUM statistic over all window lengths.

use serde::{Deserialize, Serialize};

use crate::curve::{HalfCurve, MaxResult, Orientation};
use crate::error::{ensure_finite, FocusError};

/// Per-observation detector output.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub t: u64,
    pub statistic: f64,
    pub tau_hat: Option<u64>,
    pub detected: bool,
}

/// Common interface for every streaming detector in the crate.
pub trait OnlineDetector: Send {
    fn step(&mut self, x: f64) -> Result<StepOutcome, FocusError>;

    /// Forget all observations; configuration is kept.
    fn reset(&mut self);

    fn threshold(&self) -> f64;

    fn set_threshold(&mut self, threshold: f64) -> Result<(), FocusError>;

    /// Observations consumed since construction or the last reset.
    fn observations(&self) -> u64;
}

impl<D: OnlineDetector + ?Sized> OnlineDetector for Box<D> {
    fn step(&mut self, x: f64) -> Result<StepOutcome, FocusError> {
        (**self).step(x)
    }
    fn reset(&mut self) {
        (**self).reset()
    }
    fn threshold(&self) -> f64 {
        (**self).threshold()
    }
    fn set_threshold(&mut self, threshold: f64) -> Result<(), FocusError> {
        (**self).set_threshold(threshold)
    }
    fn observations(&self) -> u64 {
        (**self).observations()
    }
}

pub(crate) fn check_threshold(threshold: f64) -> Result<f64, FocusError> {
    // +inf is allowed: it turns a detector into a pure statistic tracker.
    if threshold > 0.0 && !threshold.is_nan() {
        Ok(threshold)
    } else {
        Err(FocusError::config(format!("threshold must be > 0, got {threshold}")))
    }
}

/// Strictly increasing positive grid of post-change means `m_1 < ... < m_P`,
/// used mirrored as `+-m_p`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    points: Vec<f64>,
    ratio: f64,
}

impl Grid {
    /// Grid from explicit points. Points must be positive, strictly increasing
    /// and geometrically spaced.
    pub fn from_points(points: Vec<f64>) -> Result<Self, FocusError> {
        if points.is_empty() {
            return Err(FocusError::config("grid must contain at least one point"));
        }
        if points.iter().any(|&m| !(m > 0.0) || !m.is_finite()) {
            return Err(FocusError::config("grid points must be finite and > 0"));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(FocusError::config("grid points must be strictly increasing"));
        }
        let ratio = if points.len() > 1 { points[1] / points[0] } else { 1.0 };
        if points.windows(2).any(|w| ((w[1] / w[0]) / ratio - 1.0).abs() > 1e-9) {
            return Err(FocusError::config("grid points must have a constant ratio"));
        }
        Ok(Self { points, ratio })
    }

    /// 10-point geometric grid on `[0.1, 10]`.
    pub fn page_10p() -> Self {
        build_geometric_grid(0.1, 10.0, 10).expect("static grid")
    }

    /// 20-point geometric grid on `[0.1, 10]`.
    pub fn page_20p() -> Self {
        build_geometric_grid(0.1, 10.0, 20).expect("static grid")
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.points[0], self.points[self.points.len() - 1])
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `-m_P < ... < -m_1 < m_1 < ... < m_P`.
    pub fn mirrored(&self) -> Vec<f64> {
        self.points.iter().rev().map(|m| -m).chain(self.points.iter().copied()).collect()
    }
}

/// `p` geometrically spaced points from `m_min` to `m_max`, endpoints exact.
pub fn build_geometric_grid(m_min: f64, m_max: f64, p: usize) -> Result<Grid, FocusError> {
    if !(m_min > 0.0 && m_min < m_max && m_max.is_finite()) {
        return Err(FocusError::config(format!("grid bounds must satisfy 0 < m_min < m_max, got [{m_min}, {m_max}]")));
    }
    if p < 2 {
        return Err(FocusError::config(format!("grid needs p >= 2 points, got {p}")));
    }
    let ratio = (m_max / m_min).powf(1.0 / (p - 1) as f64);
    let mut points: Vec<f64> = (0..p).map(|i| m_min * ratio.powi(i as i32)).collect();
    points[p - 1] = m_max;
    Ok(Grid { points, ratio })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Known pre-change mean, exact.
    Focus0,
    /// Unknown pre-change mean, exact.
    Focus,
    /// Known pre-change mean, grid approximation.
    Focus0Approx,
    /// Unknown pre-change mean, grid approximation.
    FocusApprox,
}

impl Variant {
    pub fn known_mean(self) -> bool {
        matches!(self, Variant::Focus0 | Variant::Focus0Approx)
    }

    pub fn approximate(self) -> bool {
        matches!(self, Variant::Focus0Approx | Variant::FocusApprox)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub threshold: f64,
    /// Known-mean variants only.
    pub pre_change_mean: f64,
    pub sigma: f64,
    pub variant: Variant,
    pub grid: Option<Grid>,
    /// Prune-to-P mode for approximate variants.
    pub max_quadratics: Option<usize>,
    /// Maximize only the side the latest observation moved towards. Detection
    /// decisions are unchanged but the reported statistic becomes a lower bound.
    pub active_side_only: bool,
}

impl DetectorConfig {
    pub fn new(variant: Variant, threshold: f64) -> Self {
        Self {
            threshold,
            pre_change_mean: 0.0,
            sigma: 1.0,
            variant,
            grid: None,
            max_quadratics: None,
            active_side_only: false,
        }
    }

    pub fn focus0(threshold: f64) -> Self {
        Self::new(Variant::Focus0, threshold)
    }

    pub fn focus(threshold: f64) -> Self {
        Self::new(Variant::Focus, threshold)
    }

    pub fn with_pre_change_mean(mut self, mu0: f64) -> Self {
        self.pre_change_mean = mu0;
        self
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn with_grid(mut self, grid: Grid) -> Self {
        self.grid = Some(grid);
        self
    }

    pub fn with_max_quadratics(mut self, p: usize) -> Self {
        self.max_quadratics = Some(p);
        self
    }

    pub fn validate(&self) -> Result<(), FocusError> {
        check_threshold(self.threshold)?;
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(FocusError::config(format!("sigma must be finite and > 0, got {}", self.sigma)));
        }
        if !self.pre_change_mean.is_finite() {
            return Err(FocusError::config("pre-change mean must be finite"));
        }
        if self.variant.approximate() && self.grid.is_none() && self.max_quadratics.is_none() {
            return Err(FocusError::config("approximate variants need a grid or max_quadratics"));
        }
        if !self.variant.approximate() && (self.grid.is_some() || self.max_quadratics.is_some()) {
            return Err(FocusError::config("grid options apply to approximate variants only"));
        }
        if self.max_quadratics == Some(0) {
            return Err(FocusError::config("max_quadratics must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
enum Approximation {
    Exact,
    /// Keep the full curve, maximize only grid-owning records.
    MaximizeOnGrid(Vec<f64>),
    /// Keep at most `max_records` per side.
    PruneToP {
        points: Vec<f64>,
        max_records: usize,
    },
}

/// FOCuS detector for a change in mean, either side.
#[derive(Clone, Debug)]
pub struct FocusDetector {
    config: DetectorConfig,
    approx: Approximation,
    up: HalfCurve,
    down: HalfCurve,
}

impl FocusDetector {
    pub fn new(config: DetectorConfig) -> Result<Self, FocusError> {
        config.validate()?;
        let approx = if !config.variant.approximate() {
            Approximation::Exact
        } else {
            let grid = match (&config.grid, config.max_quadratics) {
                (Some(g), _) => g.clone(),
                (None, Some(p)) if p >= 2 => build_geometric_grid(0.1, 10.0, p)?,
                (None, _) => Grid::from_points(vec![1.0])?,
            };
            // Down curves see mirrored data, so both sides are checked against
            // the positive points. Unclamped curves also have negative borders.
            let points = if config.variant.known_mean() { grid.points().to_vec() } else { grid.mirrored() };
            match config.max_quadratics {
                Some(max_records) => Approximation::PruneToP { points, max_records },
                None => Approximation::MaximizeOnGrid(points),
            }
        };
        let clamp = config.variant.known_mean();
        Ok(Self {
            up: HalfCurve::new(Orientation::Up, clamp),
            down: HalfCurve::new(Orientation::Down, clamp),
            config,
            approx,
        })
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.config
    }

    pub fn up(&self) -> &HalfCurve {
        &self.up
    }

    pub fn down(&self) -> &HalfCurve {
        &self.down
    }

    fn normalize(&self, x: f64) -> f64 {
        if self.config.variant.known_mean() {
            (x - self.config.pre_change_mean) / self.config.sigma
        } else {
            x / self.config.sigma
        }
    }

    fn maximize(&self, curve: &HalfCurve) -> MaxResult {
        let known = self.config.variant.known_mean();
        let points = match &self.approx {
            Approximation::Exact => None,
            Approximation::MaximizeOnGrid(p) => Some(p.as_slice()),
            Approximation::PruneToP { points, .. } => Some(points.as_slice()),
        };
        match (known, points) {
            (true, None) => curve.maximize_known(),
            (true, Some(p)) => curve.maximize_known_on_grid(p),
            (false, None) => curve.maximize_unknown(),
            (false, Some(p)) => curve.maximize_unknown_on_grid(p),
        }
    }

    /// Current statistic without consuming an observation.
    pub fn statistic(&self) -> (f64, Option<u64>) {
        self.statistic_for(0.0)
    }

    fn statistic_for(&self, z: f64) -> (f64, Option<u64>) {
        let lazy = self.config.active_side_only;
        let up = if !lazy || z >= 0.0 { Some(self.maximize(&self.up)) } else { None };
        let down = if !lazy || z <= 0.0 { Some(self.maximize(&self.down)) } else { None };
        let best = match (up, down) {
            (Some(u), Some(d)) => {
                if d.value > u.value {
                    d
                } else {
                    u
                }
            }
            (Some(u), None) => u,
            (None, Some(d)) => d,
            (None, None) => unreachable!(),
        };
        let value = if self.config.variant.known_mean() { best.value } else { best.value / 2.0 };
        let tau_hat = (value > 0.0).then_some(best.tau_hat);
        (value, tau_hat)
    }
}

impl OnlineDetector for FocusDetector {
    fn step(&mut self, x: f64) -> Result<StepOutcome, FocusError> {
        let z = self.normalize(ensure_finite(x)?);
        self.up.advance(z)?;
        self.down.advance(z)?;
        if let Approximation::PruneToP { points, max_records } = &self.approx {
            self.up.prune_to(*max_records, points);
            self.down.prune_to(*max_records, points);
        }
        let (statistic, tau_hat) = self.statistic_for(z);
        Ok(StepOutcome { t: self.up.n(), statistic, tau_hat, detected: statistic >= self.config.threshold })
    }

    fn reset(&mut self) {
        let clamp = self.config.variant.known_mean();
        self.up = HalfCurve::new(Orientation::Up, clamp);
        self.down = HalfCurve::new(Orientation::Down, clamp);
    }

    fn threshold(&self) -> f64 {
        self.config.threshold
    }

    fn set_threshold(&mut self, threshold: f64) -> Result<(), FocusError> {
        self.config.threshold = check_threshold(threshold)?;
        Ok(())
    }

    fn observations(&self) -> u64 {
        self.up.n()
    }
}
