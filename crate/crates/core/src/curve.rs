// SPDX-License-Identifier: MIT OR Apache-2.0

//! Functional-pruning representation of the Page recursion over all
//! post-change means.
//!
//! A [`HalfCurve`] stores `Q_n(mu)` for one sign of change as an ordered list
//! of [`QuadraticRecord`]s. Record `(tau, s, l)` stands for the quadratic
//!
//! ```text
//! mu * ((S_n - s) - (n - tau) * mu / 2)
//! ```
//!
//! which is optimal for `mu` in `[l, l_next)`. Only `S_n` and `n` change from one
//! observation to the next; stored triples are never rewritten, so an update is
//! an append plus a pop-from-the-back scan, amortized O(1).
//!
//! The stored `tau`s are vertices of the greatest convex minorant of the walk
//! `(t, S_t)`. [`convex_minorant_vertices`] computes that set directly and is
//! used as an independent check.

use crate::error::{ensure_finite, FocusError};

/// One candidate changepoint: the time it was introduced, the cumulative sum at
/// that time and the left border of the interval of `mu` on which it is optimal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadraticRecord {
    pub tau: u64,
    pub s: f64,
    pub l: f64,
}

impl QuadraticRecord {
    /// Value of this record's quadratic at `mu`, given the current time and sum.
    #[inline]
    pub fn value_at(&self, mu: f64, n: u64, big_s: f64) -> f64 {
        mu * ((big_s - self.s) - (n - self.tau) as f64 * mu / 2.0)
    }

    /// Unconstrained maximum `(S_n - s)^2 / (2 (n - tau))`, or 0 for the zero-line.
    #[inline]
    pub fn peak(&self, n: u64, big_s: f64) -> f64 {
        if self.tau >= n {
            return 0.0;
        }
        let d = big_s - self.s;
        d * d / (2.0 * (n - self.tau) as f64)
    }
}

/// Which sign of change a half-curve tracks. `Down` curves consume sign-flipped
/// observations, so all stored sums and borders live in the mirrored domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Orientation {
    Up,
    Down,
}

impl Orientation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Orientation::Up => x,
            Orientation::Down => -x,
        }
    }
}

/// Counters for the pruning loop.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PruneStats {
    pub insertions: u64,
    pub removals: u64,
    /// Number of times the pruning condition was evaluated, including the
    /// final evaluation that ends each scan.
    pub loop_evaluations: u64,
}

/// Maximum of a half-curve and the record attaining it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaxResult {
    pub value: f64,
    /// `tau` of the maximizing record; the current time when nothing beats the
    /// zero-line.
    pub tau_hat: u64,
}

/// `Q_n(mu)` for one sign of change.
#[derive(Clone, Debug)]
pub struct HalfCurve {
    records: Vec<QuadraticRecord>,
    n: u64,
    big_s: f64,
    orientation: Orientation,
    clamp_at_zero: bool,
    stats: PruneStats,
}

impl HalfCurve {
    /// Half-curve for a known pre-change mean (borders clamped at zero).
    pub fn known_mean(orientation: Orientation) -> Self {
        Self::new(orientation, true)
    }

    /// Half-curve for an unknown pre-change mean (borders unclamped).
    pub fn unknown_mean(orientation: Orientation) -> Self {
        Self::new(orientation, false)
    }

    pub fn new(orientation: Orientation, clamp_at_zero: bool) -> Self {
        // Unclamped curves never drop tau = 0: it is the left end of the hull.
        let l0 = if clamp_at_zero { 0.0 } else { f64::NEG_INFINITY };
        Self {
            records: vec![QuadraticRecord { tau: 0, s: 0.0, l: l0 }],
            n: 0,
            big_s: 0.0,
            orientation,
            clamp_at_zero,
            stats: PruneStats::default(),
        }
    }

    pub fn records(&self) -> &[QuadraticRecord] {
        &self.records
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// Running sum of the oriented observations.
    pub fn cumulative_sum(&self) -> f64 {
        self.big_s
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn clamps_at_zero(&self) -> bool {
        self.clamp_at_zero
    }

    pub fn stats(&self) -> PruneStats {
        self.stats
    }

    /// Number of stored quadratics other than the zero-line added at time `n`.
    pub fn quadratic_count(&self) -> usize {
        self.records.iter().filter(|r| r.tau < self.n).count()
    }

    pub fn taus(&self) -> Vec<u64> {
        self.records.iter().map(|r| r.tau).collect()
    }

    /// Consumes one observation: updates `S_n`, appends the zero-line and pops
    /// every record it dominates.
    pub fn advance(&mut self, x: f64) -> Result<(), FocusError> {
        let x = self.orientation.apply(ensure_finite(x)?);
        self.big_s += x;
        self.n += 1;
        let (tau, s) = (self.n, self.big_s);

        loop {
            self.stats.loop_evaluations += 1;
            match self.records.last() {
                Some(r) if 2.0 * (s - r.s) - (tau - r.tau) as f64 * r.l <= 0.0 => {
                    self.records.pop();
                    self.stats.removals += 1;
                }
                _ => break,
            }
        }

        let l = match self.records.last() {
            Some(r) => {
                let border = 2.0 * (s - r.s) / (tau - r.tau) as f64;
                if self.clamp_at_zero {
                    border.max(0.0)
                } else {
                    border
                }
            }
            None if self.clamp_at_zero => 0.0,
            None => f64::NEG_INFINITY,
        };
        self.records.push(QuadraticRecord { tau, s, l });
        self.stats.insertions += 1;
        Ok(())
    }

    /// `max { 0, max_{mu > 0} Q_n(mu) }` for a known pre-change mean.
    pub fn maximize_known(&self) -> MaxResult {
        self.maximize_known_where(|_| true)
    }

    /// Like [`maximize_known`](Self::maximize_known), restricted to records whose
    /// interval contains one of `points` (sorted ascending, oriented domain).
    pub fn maximize_known_on_grid(&self, points: &[f64]) -> MaxResult {
        self.maximize_known_where(|i| self.interval_holds_point(i, points))
    }

    fn maximize_known_where(&self, keep: impl Fn(usize) -> bool) -> MaxResult {
        let mut best = MaxResult { value: 0.0, tau_hat: self.n };
        for (i, r) in self.records.iter().enumerate() {
            if r.tau >= self.n || self.big_s - r.s <= 0.0 || !keep(i) {
                continue;
            }
            let v = r.peak(self.n, self.big_s);
            if v > best.value {
                best = MaxResult { value: v, tau_hat: r.tau };
            }
        }
        best
    }

    /// Generalized likelihood ratio for a change at any stored `1 <= tau < n`
    /// with the pre-change mean profiled out. Returns the full (not halved)
    /// statistic; zero before two observations.
    pub fn maximize_unknown(&self) -> MaxResult {
        self.maximize_unknown_where(|_| true)
    }

    pub fn maximize_unknown_on_grid(&self, points: &[f64]) -> MaxResult {
        self.maximize_unknown_where(|i| self.interval_holds_point(i, points))
    }

    fn maximize_unknown_where(&self, keep: impl Fn(usize) -> bool) -> MaxResult {
        let mut best = MaxResult { value: 0.0, tau_hat: self.n };
        if self.n < 2 {
            return best;
        }
        let n = self.n as f64;
        for (i, r) in self.records.iter().enumerate() {
            if r.tau == 0 || r.tau >= self.n || !keep(i) {
                continue;
            }
            let v = split_likelihood_ratio(r.tau as f64, r.s, n, self.big_s);
            if v > best.value {
                best = MaxResult { value: v, tau_hat: r.tau };
            }
        }
        best
    }

    /// `Q_n(mu)` from the record owning `mu`. For clamped curves the domain is
    /// `mu >= 0`; below the first border the first record is used.
    pub fn evaluate(&self, mu: f64) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        let idx = self.records.partition_point(|r| r.l <= mu);
        let owner = &self.records[idx.saturating_sub(1)];
        owner.value_at(mu, self.n, self.big_s)
    }

    /// Drops records until at most `max_records` remain, each time removing the
    /// oldest record whose interval holds none of `points`. Its interval is
    /// absorbed by the left neighbour. Stops early if every record holds a point.
    pub fn prune_to(&mut self, max_records: usize, points: &[f64]) {
        while self.records.len() > max_records.max(1) {
            let victim = (0..self.records.len()).find(|&i| !self.interval_holds_point(i, points));
            match victim {
                Some(i) => {
                    self.records.remove(i);
                    self.stats.removals += 1;
                }
                None => break,
            }
        }
    }

    fn interval_holds_point(&self, i: usize, points: &[f64]) -> bool {
        let lo = self.records[i].l;
        let hi = self.records.get(i + 1).map_or(f64::INFINITY, |r| r.l);
        let j = points.partition_point(|&m| m < lo);
        j < points.len() && points[j] < hi
    }
}

/// `tau (s/tau)^2 + (n-tau) ((S-s)/(n-tau))^2 - n (S/n)^2`, evaluated in the
/// equivalent form `tau (n-tau) / n * (mean_before - mean_after)^2`.
#[inline]
pub(crate) fn split_likelihood_ratio(tau: f64, s: f64, n: f64, big_s: f64) -> f64 {
    let gap = s / tau - (big_s - s) / (n - tau);
    tau * (n - tau) / n * gap * gap
}

/// Vertex times of the greatest convex minorant of `(t, S_t)`, `t = 0..=n`,
/// with `S_0 = 0`. Interior collinear points are not vertices.
///
/// This is a plain lower-hull scan that shares no code with [`HalfCurve`].
pub fn convex_minorant_vertices(data: &[f64]) -> Vec<u64> {
    let mut hull: Vec<(f64, f64, u64)> = Vec::with_capacity(16);
    let mut s = 0.0;
    let mut points = Vec::with_capacity(data.len() + 1);
    points.push((0.0, 0.0, 0u64));
    for (i, &x) in data.iter().enumerate() {
        s += x;
        points.push(((i + 1) as f64, s, (i + 1) as u64));
    }
    for p in points {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull.into_iter().map(|p| p.2).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feed(curve: &mut HalfCurve, data: &[f64]) {
        for &x in data {
            curve.advance(x).unwrap();
        }
    }

    fn triples(curve: &HalfCurve) -> Vec<(u64, f64, f64)> {
        curve.records().iter().map(|r| (r.tau, r.s, r.l)).collect()
    }

    /// Naive Page recursion at fixed mu values.
    fn naive_envelope(data: &[f64], mus: &[f64]) -> Vec<f64> {
        let mut q = vec![0.0; mus.len()];
        for &x in data {
            for (qi, &mu) in q.iter_mut().zip(mus) {
                *qi = (*qi + mu * (x - mu / 2.0)).max(0.0);
            }
        }
        q
    }

    #[test]
    fn advance_examples() {
        let mut c = HalfCurve::known_mean(Orientation::Up);
        c.advance(2.0).unwrap();
        assert_eq!(triples(&c), vec![(0, 0.0, 0.0), (1, 2.0, 4.0)]);
        assert_eq!(c.cumulative_sum(), 2.0);

        c.advance(-1.0).unwrap();
        assert_eq!(triples(&c), vec![(0, 0.0, 0.0), (2, 1.0, 1.0)]);
        assert_eq!(c.cumulative_sum(), 1.0);

        let mut c = HalfCurve::known_mean(Orientation::Up);
        feed(&mut c, &[1.0]);
        assert_eq!(triples(&c), vec![(0, 0.0, 0.0), (1, 1.0, 2.0)]);
        c.advance(1.0).unwrap();
        // tie in the pruning condition prunes
        assert_eq!(triples(&c), vec![(0, 0.0, 0.0), (2, 2.0, 2.0)]);
    }

    #[test]
    fn advance_examples_match_pointwise_envelope() {
        let mus: Vec<f64> = (0..=400).map(|i| i as f64 * 0.02).collect();
        for data in [vec![2.0], vec![2.0, -1.0], vec![1.0, 1.0]] {
            let mut c = HalfCurve::known_mean(Orientation::Up);
            feed(&mut c, &data);
            let expected = naive_envelope(&data, &mus);
            for (mu, e) in mus.iter().zip(expected) {
                assert!((c.evaluate(*mu) - e).abs() < 1e-12, "mu={mu}");
            }
        }
    }

    #[test]
    fn total_pruning_resets_border_to_zero() {
        let mut c = HalfCurve::known_mean(Orientation::Up);
        c.advance(-1.0).unwrap();
        assert_eq!(triples(&c), vec![(1, -1.0, 0.0)]);
        assert_eq!(c.maximize_known().value, 0.0);
    }

    #[test]
    fn rejects_non_finite() {
        let mut c = HalfCurve::known_mean(Orientation::Up);
        assert!(matches!(c.advance(f64::NAN), Err(FocusError::NonFiniteInput { .. })));
        assert!(c.advance(f64::INFINITY).is_err());
        assert_eq!(c.n(), 0);
    }

    #[test]
    fn maximize_known_examples() {
        let mut c = HalfCurve::known_mean(Orientation::Up);
        c.advance(2.0).unwrap();
        assert_eq!(c.maximize_known(), MaxResult { value: 2.0, tau_hat: 0 });
        c.advance(-1.0).unwrap();
        assert_eq!(c.maximize_known(), MaxResult { value: 0.25, tau_hat: 0 });

        let mut z = HalfCurve::known_mean(Orientation::Up);
        feed(&mut z, &[0.0; 17]);
        assert_eq!(z.maximize_known().value, 0.0);
    }

    #[test]
    fn maximize_unknown_examples() {
        let mut c = HalfCurve::unknown_mean(Orientation::Up);
        feed(&mut c, &[0.0, 0.0, 3.0]);
        let m = c.maximize_unknown();
        assert!((m.value - 6.0).abs() < 1e-12);
        assert_eq!(m.tau_hat, 2);

        let mut flat = HalfCurve::unknown_mean(Orientation::Down);
        feed(&mut flat, &[1.7; 12]);
        assert!(flat.maximize_unknown().value.abs() < 1e-12);
    }

    #[test]
    fn maximize_unknown_warm_up_is_zero() {
        let mut c = HalfCurve::unknown_mean(Orientation::Up);
        c.advance(5.0).unwrap();
        assert_eq!(c.maximize_unknown().value, 0.0);
    }

    #[test]
    fn evaluate_examples() {
        let mut c = HalfCurve::known_mean(Orientation::Up);
        c.advance(2.0).unwrap();
        assert_eq!(c.evaluate(1.0), 1.5);
        assert_eq!(c.evaluate(5.0), 0.0);
        assert_eq!(c.evaluate(0.0), 0.0);
    }

    #[test]
    fn hull_examples() {
        assert_eq!(convex_minorant_vertices(&[1.0, 1.0, 1.0]), vec![0, 3]);
        assert_eq!(convex_minorant_vertices(&[1.0, -2.0, 1.0]), vec![0, 2, 3]);
        assert_eq!(convex_minorant_vertices(&[-1.0, 2.0, -1.0]), vec![0, 1, 3]);
    }

    #[test]
    fn unknown_curve_taus_are_hull_vertices() {
        let data = [0.3, -1.2, 0.7, 2.2, -0.4, -0.9, 1.1, 0.05, -2.0, 0.6];
        let mut up = HalfCurve::unknown_mean(Orientation::Up);
        feed(&mut up, &data);
        assert_eq!(up.taus(), convex_minorant_vertices(&data));

        let mut down = HalfCurve::unknown_mean(Orientation::Down);
        feed(&mut down, &data);
        let flipped: Vec<f64> = data.iter().map(|x| -x).collect();
        assert_eq!(down.taus(), convex_minorant_vertices(&flipped));
    }

    #[test]
    fn prune_to_keeps_grid_owners() {
        let data = [0.5, 0.1, 0.9, -0.2, 1.4, 0.3, 0.8];
        let points = [0.25, 1.0];
        let mut c = HalfCurve::known_mean(Orientation::Up);
        for &x in &data {
            c.advance(x).unwrap();
            c.prune_to(2, &points);
            assert!(c.records().len() <= 2);
        }
    }

    #[test]
    fn loop_counter_is_pops_plus_one() {
        let mut c = HalfCurve::known_mean(Orientation::Up);
        feed(&mut c, &[1.0, 2.0, 3.0, -10.0]);
        let st = c.stats();
        assert_eq!(st.loop_evaluations, st.removals + 4);
        assert_eq!(st.insertions, 4);
    }
}
