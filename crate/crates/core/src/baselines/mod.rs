// SPDX-License-Identifier: MIT OR Apache-2.0

//! Comparator statistics: CUSUM, MOSUM and its variants, the sequential Page
//! recursion on a single mean or a grid of means, and Lorden's reset-window
//! procedure. [`oracle`] holds the brute-force references used in tests.
//!
//! CUSUM and the MOSUM family report `|window sum| / sqrt(window)`; the Page
//! family reports half log-likelihood ratios, like the FOCuS detectors.

use std::collections::VecDeque;

use crate::detectors::{check_threshold, Grid, OnlineDetector, StepOutcome};
use crate::error::{ensure_finite, FocusError};

pub mod oracle;

/// `(x - mean0) / sigma`, shared by every baseline.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Standardize {
    pub mean0: f64,
    pub sigma: f64,
}

impl Default for Standardize {
    fn default() -> Self {
        Self { mean0: 0.0, sigma: 1.0 }
    }
}

impl Standardize {
    pub fn new(mean0: f64, sigma: f64) -> Result<Self, FocusError> {
        if !mean0.is_finite() {
            return Err(FocusError::config(format!("mean0 must be finite, got {mean0}")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(FocusError::config(format!("sigma must be finite and > 0, got {sigma}")));
        }
        Ok(Self { mean0, sigma })
    }

    #[inline]
    fn apply(&self, x: f64) -> Result<f64, FocusError> {
        Ok((ensure_finite(x)? - self.mean0) / self.sigma)
    }
}

fn outcome(t: u64, statistic: f64, tau_hat: Option<u64>, threshold: f64) -> StepOutcome {
    let detected = statistic >= threshold;
    let tau_hat = if detected { Some(tau_hat.unwrap_or(0)) } else { tau_hat };
    StepOutcome { t, statistic, tau_hat, detected }
}

macro_rules! threshold_accessors {
    () => {
        fn threshold(&self) -> f64 {
            self.threshold
        }

        fn set_threshold(&mut self, threshold: f64) -> Result<(), FocusError> {
            self.threshold = check_threshold(threshold)?;
            Ok(())
        }

        fn observations(&self) -> u64 {
            self.n
        }
    };
}

/// `|S(0, n)| / sqrt(n)`.
#[derive(Clone, Debug)]
pub struct Cusum {
    scale: Standardize,
    threshold: f64,
    n: u64,
    sum: f64,
}

impl Cusum {
    pub fn new(threshold: f64, scale: Standardize) -> Result<Self, FocusError> {
        Ok(Self { scale, threshold: check_threshold(threshold)?, n: 0, sum: 0.0 })
    }
}

impl OnlineDetector for Cusum {
    fn step(&mut self, x: f64) -> Result<StepOutcome, FocusError> {
        let z = self.scale.apply(x)?;
        self.n += 1;
        self.sum += z;
        let stat = self.sum.abs() / (self.n as f64).sqrt();
        Ok(outcome(self.n, stat, Some(0), self.threshold))
    }

    fn reset(&mut self) {
        self.n = 0;
        self.sum = 0.0;
    }

    threshold_accessors!();
}

/// `|S(n - w, n)| / sqrt(w)`; zero until `w` observations have arrived.
#[derive(Clone, Debug)]
pub struct Mosum {
    inner: MultiMosum,
}

impl Mosum {
    pub fn new(w: usize, threshold: f64, scale: Standardize) -> Result<Self, FocusError> {
        Ok(Self { inner: MultiMosum::new(vec![w], threshold, scale)? })
    }
}

impl OnlineDetector for Mosum {
    fn step(&mut self, x: f64) -> Result<StepOutcome, FocusError> {
        self.inner.step(x)
    }

    fn reset(&mut self) {
        self.inner.reset()
    }

    fn threshold(&self) -> f64 {
        self.inner.threshold
    }

    fn set_threshold(&mut self, threshold: f64) -> Result<(), FocusError> {
        self.inner.set_threshold(threshold)
    }

    fn observations(&self) -> u64 {
        self.inner.n
    }
}

/// Maximum of several MOSUM statistics; each window contributes only once full.
#[derive(Clone, Debug)]
pub struct MultiMosum {
    windows: Vec<usize>,
    sums: Vec<f64>,
    buffer: VecDeque<f64>,
    scale: Standardize,
    threshold: f64,
    n: u64,
}

impl MultiMosum {
    pub fn new(mut windows: Vec<usize>, threshold: f64, scale: Standardize) -> Result<Self, FocusError> {
        if windows.is_empty() || windows.contains(&0) {
            return Err(FocusError::config("MOSUM windows must be non-empty and >= 1"));
        }
        windows.sort_unstable();
        windows.dedup();
        let longest = *windows.last().unwrap_or(&1);
        Ok(Self {
            sums: vec![0.0; windows.len()],
            windows,
            buffer: VecDeque::with_capacity(longest + 1),
            scale,
            threshold: check_threshold(threshold)?,
            n: 0,
        })
    }

    pub fn windows(&self) -> &[usize] {
        &self.windows
    }
}

impl OnlineDetector for MultiMosum {
    fn step(&mut self, x: f64) -> Result<StepOutcome, FocusError> {
        let z = self.scale.apply(x)?;
        self.n += 1;
        self.buffer.push_front(z);
        let mut best = (0.0, None);
        for (sum, &w) in self.sums.iter_mut().zip(&self.windows) {
            *sum += z;
            if let Some(&old) = self.buffer.get(w) {
                *sum -= old;
            }
            if self.n >= w as u64 {
                let stat = sum.abs() / (w as f64).sqrt();
                if stat > best.0 {
                    best = (stat, Some(self.n - w as u64));
                }
            }
        }
        self.buffer.truncate(*self.windows.last().unwrap_or(&1));
        Ok(outcome(self.n, best.0, best.1, self.threshold))
    }

    fn reset(&mut self) {
        self.sums.iter_mut().for_each(|s| *s = 0.0);
        self.buffer.clear();
        self.n = 0;
    }

    threshold_accessors!();
}

/// Window sizes for a MOSUM bank matched to a grid of change sizes: a change of
/// size `m` accrues half-LR `w m^2 / 2` over `w` points, so `w = ceil(2 design / m^2)`.
pub fn mosum_windows_for_grid(grid: &Grid, design: f64) -> Vec<usize> {
    let mut ws: Vec<usize> = grid.points().iter().map(|m| ((2.0 * design / (m * m)).ceil() as usize).max(1)).collect();
    ws.sort_unstable();
    ws.dedup();
    ws
}

/// `|S(n - floor(k n), n)| / sqrt(n k)`. Keeps every prefix sum.
#[derive(Clone, Debug)]
pub struct Mmosum {
    k: f64,
    prefix: Vec<f64>,
    scale: Standardize,
    threshold: f64,
    n: u64,
}

impl Mmosum {
    pub fn new(k: f64, threshold: f64, scale: Standardize) -> Result<Self, FocusError> {
        if !(k > 0.0 && k < 1.0) {
            return Err(FocusError::config(format!("mMOSUM proportion must lie in (0, 1), got {k}")));
        }
        Ok(Self { k, prefix: vec![0.0], scale, threshold: check_threshold(threshold)?, n: 0 })
    }
}

impl OnlineDetector for Mmosum {
    fn step(&mut self, x: f64) -> Result<StepOutcome, FocusError> {
        let z = self.scale.apply(x)?;
        self.n += 1;
        let total = self.prefix[self.prefix.len() - 1] + z;
        self.prefix.push(total);
        let n = self.n as usize;
        let w = (self.k * n as f64).floor() as usize;
        let stat = if w == 0 { 0.0 } else { (total - self.prefix[n - w]).abs() / (n as f64 * self.k).sqrt() };
        Ok(outcome(self.n, stat, Some((n - w) as u64), self.threshold))
    }

    fn reset(&mut self) {
        self.prefix.truncate(1);
        self.n = 0;
    }

    threshold_accessors!();
}

/// One sequential Page recursion at post-change mean `mu1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PageState {
    pub mu1: f64,
    pub q: f64,
    pub last_reset: u64,
    pub n: u64,
}

impl PageState {
    pub fn new(mu1: f64) -> Result<Self, FocusError> {
        if mu1 == 0.0 || !mu1.is_finite() {
            return Err(FocusError::config(format!("post-change mean must be finite and non-zero, got {mu1}")));
        }
        Ok(Self { mu1, q: 0.0, last_reset: 0, n: 0 })
    }

    /// `q <- max{0, q + mu1 (x - mu1 / 2)}`; `x` is already standardized.
    #[inline]
    pub fn page_step(&mut self, x: f64) -> f64 {
        self.n += 1;
        self.q = (self.q + self.mu1 * (x - self.mu1 / 2.0)).max(0.0);
        if self.q == 0.0 {
            self.last_reset = self.n;
        }
        self.q
    }

    fn clear(&mut self) {
        *self = Self { mu1: self.mu1, q: 0.0, last_reset: 0, n: 0 };
    }
}

/// Page recursion at one fixed post-change mean (in standardized units).
#[derive(Clone, Debug)]
pub struct Page {
    state: PageState,
    scale: Standardize,
    threshold: f64,
    n: u64,
}

impl Page {
    pub fn new(mu1: f64, threshold: f64, scale: Standardize) -> Result<Self, FocusError> {
        Ok(Self { state: PageState::new(mu1)?, scale, threshold: check_threshold(threshold)?, n: 0 })
    }

    pub fn state(&self) -> &PageState {
        &self.state
    }
}

impl OnlineDetector for Page {
    fn step(&mut self, x: f64) -> Result<StepOutcome, FocusError> {
        let z = self.scale.apply(x)?;
        self.n += 1;
        let q = self.state.page_step(z);
        let tau = (q > 0.0).then_some(self.state.last_reset);
        Ok(outcome(self.n, q, tau, self.threshold))
    }

    fn reset(&mut self) {
        self.state.clear();
        self.n = 0;
    }

    threshold_accessors!();
}

/// Maximum of Page recursions at `+m_p` and `-m_p` for every grid point.
#[derive(Clone, Debug)]
pub struct PageGrid {
    states: Vec<PageState>,
    scale: Standardize,
    threshold: f64,
    n: u64,
}

impl PageGrid {
    pub fn new(grid: &Grid, threshold: f64, scale: Standardize) -> Result<Self, FocusError> {
        let states = grid.mirrored().into_iter().map(PageState::new).collect::<Result<Vec<_>, _>>()?;
        if states.is_empty() {
            return Err(FocusError::config("Page grid is empty"));
        }
        Ok(Self { states, scale, threshold: check_threshold(threshold)?, n: 0 })
    }

    pub fn states(&self) -> &[PageState] {
        &self.states
    }
}

impl OnlineDetector for PageGrid {
    fn step(&mut self, x: f64) -> Result<StepOutcome, FocusError> {
        let z = self.scale.apply(x)?;
        self.n += 1;
        let mut best = (0.0, None);
        for st in &mut self.states {
            let q = st.page_step(z);
            if q > best.0 {
                best = (q, Some(st.last_reset));
            }
        }
        Ok(outcome(self.n, best.0, best.1, self.threshold))
    }

    fn reset(&mut self) {
        self.states.iter_mut().for_each(PageState::clear);
        self.n = 0;
    }

    threshold_accessors!();
}

/// Lorden's procedure: a Page recursion at `mu_star` decides how far back to
/// look; the statistic maximizes over every start since its last reset.
#[derive(Clone, Debug)]
pub struct Lorden {
    page: PageState,
    /// Observations after the last reset, oldest first.
    window: VecDeque<f64>,
    cap: Option<usize>,
    scale: Standardize,
    threshold: f64,
    n: u64,
    last_evaluations: u64,
}

impl Lorden {
    pub fn new(mu_star: f64, threshold: f64, scale: Standardize) -> Result<Self, FocusError> {
        if !(mu_star > 0.0) {
            return Err(FocusError::config(format!("mu_star must be > 0, got {mu_star}")));
        }
        Ok(Self {
            page: PageState::new(mu_star)?,
            window: VecDeque::new(),
            cap: None,
            scale,
            threshold: check_threshold(threshold)?,
            n: 0,
            last_evaluations: 0,
        })
    }

    /// Bounds the window; exceeding it drops the oldest observation and makes
    /// `step` return [`FocusError::BufferCapExceeded`] (the step is still applied).
    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = Some(cap.max(1));
        self
    }

    /// Start times examined by the last step.
    pub fn last_evaluations(&self) -> u64 {
        self.last_evaluations
    }

    /// Time of the reset the current window starts from.
    pub fn window_start(&self) -> u64 {
        self.n - self.window.len() as u64
    }
}

impl OnlineDetector for Lorden {
    fn step(&mut self, x: f64) -> Result<StepOutcome, FocusError> {
        let z = self.scale.apply(x)?;
        self.n += 1;
        self.window.push_back(z);
        let mut truncated = false;
        if let Some(cap) = self.cap {
            if self.window.len() > cap {
                self.window.pop_front();
                truncated = true;
            }
        }

        let mut best = (0.0, None);
        let mut tail = 0.0;
        for (k, &v) in self.window.iter().rev().enumerate() {
            tail += v;
            let len = (k + 1) as f64;
            if tail > 0.0 {
                let stat = tail * tail / (2.0 * len);
                if stat > best.0 {
                    best = (stat, Some(self.n - (k + 1) as u64));
                }
            }
        }
        self.last_evaluations = self.window.len() as u64;

        self.page.page_step(z);
        if self.page.q == 0.0 {
            self.window.clear();
        }
        if truncated {
            return Err(FocusError::BufferCapExceeded { cap: self.cap.unwrap_or(0) });
        }
        Ok(outcome(self.n, best.0, best.1, self.threshold))
    }

    fn reset(&mut self) {
        self.page.clear();
        self.window.clear();
        self.n = 0;
        self.last_evaluations = 0;
    }

    threshold_accessors!();
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detectors::build_geometric_grid;

    fn stats(det: &mut impl OnlineDetector, data: &[f64]) -> Vec<f64> {
        data.iter().map(|&x| det.step(x).unwrap().statistic).collect()
    }

    fn close(a: &[f64], b: &[f64]) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < 1e-12, "{a:?} vs {b:?}");
        }
    }

    const INF: f64 = f64::INFINITY;

    #[test]
    fn cusum_examples() {
        let s = Standardize::default();
        close(&stats(&mut Cusum::new(INF, s).unwrap(), &[1.0]), &[1.0]);
        close(&stats(&mut Cusum::new(INF, s).unwrap(), &[1.0, 1.0]), &[1.0, 2f64.sqrt()]);
        close(&stats(&mut Cusum::new(INF, s).unwrap(), &[0.0; 5]), &[0.0; 5]);
    }

    #[test]
    fn mosum_examples() {
        let s = Standardize::default();
        close(&stats(&mut Mosum::new(2, INF, s).unwrap(), &[1.0, 1.0]), &[0.0, 2f64.sqrt()]);
        close(&stats(&mut Mosum::new(1, INF, s).unwrap(), &[-3.0, 0.5]), &[3.0, 0.5]);
        close(&stats(&mut Mosum::new(3, INF, s).unwrap(), &[1.0, -1.0, 0.0]), &[0.0, 0.0, 0.0]);
        assert!(Mosum::new(0, 1.0, s).is_err());
    }

    #[test]
    fn mosum_window_slides() {
        let mut m = Mosum::new(2, INF, Standardize::default()).unwrap();
        close(&stats(&mut m, &[1.0, 2.0, 3.0, -5.0]), &[0.0, 3.0 / 2f64.sqrt(), 5.0 / 2f64.sqrt(), 2.0 / 2f64.sqrt()]);
    }

    #[test]
    fn mmosum_examples() {
        let s = Standardize::default();
        let got = stats(&mut Mmosum::new(0.5, INF, s).unwrap(), &[0.0, 0.0, 2.0, 2.0]);
        assert!((got[3] - 4.0 / 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(got[0], 0.0);
        close(&stats(&mut Mmosum::new(0.5, INF, s).unwrap(), &[0.0; 6]), &[0.0; 6]);
        assert!(Mmosum::new(1.0, 1.0, s).is_err());
        assert!(Mmosum::new(0.0, 1.0, s).is_err());
    }

    #[test]
    fn page_examples() {
        let s = Standardize::default();
        close(&stats(&mut Page::new(1.0, INF, s).unwrap(), &[1.0, -2.0, 1.0]), &[0.5, 0.0, 0.5]);
        close(&stats(&mut Page::new(1.0, INF, s).unwrap(), &[0.0; 4]), &[0.0; 4]);
        close(&stats(&mut Page::new(2.0, INF, s).unwrap(), &[2.0, 2.0]), &[2.0, 4.0]);
        assert!(Page::new(0.0, 1.0, s).is_err());
    }

    #[test]
    fn page_grid_examples() {
        let grid = Grid::from_points(vec![1.0]).unwrap();
        let s = Standardize::default();
        close(&stats(&mut PageGrid::new(&grid, INF, s).unwrap(), &[1.0, -2.0, 1.0]), &[0.5, 1.5, 0.5]);
        let g10 = build_geometric_grid(0.1, 10.0, 10).unwrap();
        close(&stats(&mut PageGrid::new(&g10, INF, s).unwrap(), &[0.0; 3]), &[0.0; 3]);
    }

    #[test]
    fn lorden_single_term_when_resetting_every_step() {
        let mut l = Lorden::new(4.0, INF, Standardize::default()).unwrap();
        for &x in &[-5.0, 0.5, -3.0, 1.0, 0.2] {
            let o = l.step(x).unwrap();
            let expected = if x > 0.0 { x * x / 2.0 } else { 0.0 };
            assert!((o.statistic - expected).abs() < 1e-12);
            assert_eq!(l.last_evaluations(), 1);
        }
    }

    #[test]
    fn lorden_matches_window_brute_force() {
        let data = [0.4, -1.0, 0.9, 1.3, -0.2, 0.8, 1.7, -0.6, 0.3, 1.1];
        let mut l = Lorden::new(1.0, INF, Standardize::default()).unwrap();
        let mut page = PageState::new(1.0).unwrap();
        for (i, &x) in data.iter().enumerate() {
            let n = i + 1;
            let r = page.last_reset as usize;
            let o = l.step(x).unwrap();
            page.page_step(x);
            let mut best: f64 = 0.0;
            for s in r..n {
                let sum: f64 = data[s..n].iter().sum();
                if sum > 0.0 {
                    best = best.max(sum * sum / (2.0 * (n - s) as f64));
                }
            }
            assert!((o.statistic - best).abs() < 1e-12);
            assert_eq!(l.last_evaluations(), (n - r) as u64);
        }
    }

    #[test]
    fn lorden_cap_reports_truncation() {
        let mut l = Lorden::new(0.1, INF, Standardize::default()).unwrap().with_cap(3);
        for _ in 0..3 {
            l.step(1.0).unwrap();
        }
        assert_eq!(l.step(1.0), Err(FocusError::BufferCapExceeded { cap: 3 }));
        assert_eq!(l.observations(), 4);
        assert!(Lorden::new(0.0, 1.0, Standardize::default()).is_err());
    }

    #[test]
    fn standardize_is_applied() {
        let s = Standardize::new(10.0, 2.0).unwrap();
        close(&stats(&mut Page::new(1.0, INF, s).unwrap(), &[12.0, 6.0, 12.0]), &[0.5, 0.0, 0.5]);
        assert!(Standardize::new(0.0, 0.0).is_err());
    }

    #[test]
    fn detected_outcomes_carry_tau() {
        let mut p = Page::new(1.0, 0.4, Standardize::default()).unwrap();
        let o = p.step(1.0).unwrap();
        assert!(o.detected);
        assert_eq!(o.tau_hat, Some(0));
    }

    #[test]
    fn grid_windows() {
        let g = Grid::from_points(vec![1.0, 2.0]).unwrap();
        assert_eq!(mosum_windows_for_grid(&g, 4.0), vec![2, 8]);
    }
}
