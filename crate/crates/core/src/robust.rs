// SPDX-License-Identifier: MIT OR Apache-2.0

//! Change detection under a capped square loss (biweight), which bounds the
//! influence of any single outlier by `K`.
//!
//! The fit of mean `mu` to an observation is `F(x, mu) = -min{(x - mu)^2, K}`.
//! The detector keeps two piecewise quadratics of `mu`:
//!
//! - `N_n(mu) = sum_{t <= n} F(x_t, mu)`, the no-change fit;
//! - `Q_n(mu) = max{ max N_n, Q_{n-1}(mu) + F(x_n, mu) }`, the best fit with a
//!   change to mean `mu` at some earlier time.
//!
//! The statistic is `(max Q_n - max N_n) / 2`, in the same half-LR units as the
//! other detectors. With `K = inf` it equals the unknown-mean FOCuS statistic.
//!
//! `N_n` is stored with every breakpoint (up to `2n + 1` pieces), so each step
//! costs O(n) in the worst case. `Q_n` stays small in practice.

use crate::detectors::{check_threshold, OnlineDetector, StepOutcome};
use crate::error::{ensure_finite, FocusError};

/// Roots closer than this to an interval boundary snap onto it.
const SNAP: f64 = 1e-12;

/// `-min{(x - mu)^2, cap}`.
pub fn biweight_fit(x: f64, mu: f64, cap: f64) -> f64 {
    let d = x - mu;
    -(d * d).min(cap)
}

/// `a mu^2 + b mu + c` on `[left, next.left)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Piece {
    pub left: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Time the piece's change hypothesis was introduced (changepoint estimate).
    pub origin: u64,
}

impl Piece {
    pub fn constant(left: f64, c: f64, origin: u64) -> Self {
        Self { left, a: 0.0, b: 0.0, c, origin }
    }

    #[inline]
    pub fn eval(&self, mu: f64) -> f64 {
        (self.a * mu + self.b) * mu + self.c
    }

    fn same_shape(&self, other: &Piece) -> bool {
        self.a == other.a && self.b == other.b && self.c == other.c && self.origin == other.origin
    }

    /// Max over `[lo, hi]` (either end may be infinite).
    fn max_on(&self, lo: f64, hi: f64) -> (f64, f64) {
        let mut best = (f64::NEG_INFINITY, lo);
        let mut consider = |mu: f64, v: f64| {
            if v > best.0 {
                best = (v, mu);
            }
        };
        if self.a == 0.0 && self.b == 0.0 {
            return (self.c, lo);
        }
        if self.a < 0.0 {
            let v = -self.b / (2.0 * self.a);
            if v >= lo && v <= hi {
                consider(v, self.eval(v));
            }
        } else if (self.a > 0.0 || self.b > 0.0) && hi.is_infinite()
            || (self.a > 0.0 || self.b < 0.0) && lo.is_infinite()
        {
            // unbounded above on this piece
            return (f64::INFINITY, if hi.is_infinite() { hi } else { lo });
        }
        if lo.is_finite() {
            consider(lo, self.eval(lo));
        }
        if hi.is_finite() {
            consider(hi, self.eval(hi));
        }
        best
    }
}

/// Piecewise quadratic on the whole real line. The first piece starts at
/// `-inf`; boundaries are strictly increasing.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewisePolyFunction {
    pieces: Vec<Piece>,
}

impl PiecewisePolyFunction {
    pub fn constant(c: f64) -> Self {
        Self { pieces: vec![Piece::constant(f64::NEG_INFINITY, c, 0)] }
    }

    pub fn from_pieces(mut pieces: Vec<Piece>) -> Result<Self, FocusError> {
        if pieces.is_empty() {
            return Err(FocusError::input("piecewise function needs at least one piece"));
        }
        if pieces.windows(2).any(|w| w[1].left <= w[0].left) {
            return Err(FocusError::input("piece boundaries must be strictly increasing"));
        }
        pieces[0].left = f64::NEG_INFINITY;
        Ok(Self { pieces })
    }

    /// `mu -> F(x, mu)` with `cap = K`; an infinite cap gives plain `-(x - mu)^2`.
    pub fn biweight(x: f64, cap: f64) -> Self {
        let quad = |left| Piece { left, a: -1.0, b: 2.0 * x, c: -x * x, origin: 0 };
        if cap.is_infinite() {
            return Self { pieces: vec![quad(f64::NEG_INFINITY)] };
        }
        let r = cap.sqrt();
        Self { pieces: vec![Piece::constant(f64::NEG_INFINITY, -cap, 0), quad(x - r), Piece::constant(x + r, -cap, 0)] }
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    fn right_of(&self, i: usize) -> f64 {
        self.pieces.get(i + 1).map_or(f64::INFINITY, |p| p.left)
    }

    pub fn eval(&self, mu: f64) -> f64 {
        let i = self.pieces.partition_point(|p| p.left <= mu).saturating_sub(1);
        self.pieces[i].eval(mu)
    }

    /// Pointwise sum. Origins are taken from `self`.
    pub fn add(&self, other: &Self) -> Self {
        let mut out = Vec::with_capacity(self.pieces.len() + other.pieces.len());
        self.merge_walk(other, |lo, _hi, p, q| {
            out.push(Piece { left: lo, a: p.a + q.a, b: p.b + q.b, c: p.c + q.c, origin: p.origin });
        });
        let mut f = Self { pieces: out };
        f.merge_identical();
        f
    }

    /// Pointwise maximum. On ties the piece from `self` is kept.
    pub fn pointwise_max(&self, other: &Self) -> Self {
        let mut out: Vec<Piece> = Vec::with_capacity(self.pieces.len() + 2);
        self.merge_walk(other, |lo, hi, p, q| {
            let d = Piece { left: lo, a: p.a - q.a, b: p.b - q.b, c: p.c - q.c, origin: 0 };
            let mut cuts = vec![lo];
            for r in quadratic_roots(d.a, d.b, d.c) {
                let clear_lo = lo == f64::NEG_INFINITY || r > lo + SNAP * lo.abs().max(1.0);
                let clear_hi = hi == f64::INFINITY || r < hi - SNAP * hi.abs().max(1.0);
                if r.is_finite() && clear_lo && clear_hi {
                    cuts.push(r);
                }
            }
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
            for (k, &start) in cuts.iter().enumerate() {
                let end = cuts.get(k + 1).copied().unwrap_or(hi);
                let winner = if d.eval(probe(start, end)) >= 0.0 { p } else { q };
                out.push(Piece { left: start, ..*winner });
            }
        });
        let mut f = Self { pieces: out };
        f.merge_identical();
        f
    }

    /// Global maximum and its location. Flat maxima report the leftmost point
    /// (possibly `-inf`).
    pub fn maximum(&self) -> (f64, f64) {
        let mut best = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for (i, p) in self.pieces.iter().enumerate() {
            let (v, at) = p.max_on(p.left, self.right_of(i));
            if v > best.0 {
                best = (v, at);
            }
        }
        best
    }

    /// Index of the piece holding the global maximum.
    fn argmax_piece(&self) -> usize {
        let mut best = (f64::NEG_INFINITY, 0);
        for (i, p) in self.pieces.iter().enumerate() {
            let (v, _) = p.max_on(p.left, self.right_of(i));
            if v > best.0 {
                best = (v, i);
            }
        }
        best.1
    }

    /// Largest jump at a boundary, relative to `max(1, |value|)`.
    pub fn max_discontinuity(&self) -> f64 {
        self.pieces
            .windows(2)
            .map(|w| {
                let at = w[1].left;
                let (l, r) = (w[0].eval(at), w[1].eval(at));
                (l - r).abs() / l.abs().max(r.abs()).max(1.0)
            })
            .fold(0.0, f64::max)
    }

    fn merge_identical(&mut self) {
        self.pieces.dedup_by(|next, prev| prev.same_shape(next));
    }

    /// Walks the common refinement of both boundary sets, calling `visit(lo,
    /// hi, piece_of_self, piece_of_other)` for each cell.
    fn merge_walk(&self, other: &Self, mut visit: impl FnMut(f64, f64, &Piece, &Piece)) {
        let (f, g) = (&self.pieces, &other.pieces);
        let (mut i, mut j) = (0, 0);
        loop {
            let lo = f[i].left.max(g[j].left);
            let fi = self.right_of(i);
            let gj = other.right_of(j);
            let hi = fi.min(gj);
            visit(lo, hi, &f[i], &g[j]);
            if hi == f64::INFINITY {
                break;
            }
            if fi <= hi {
                i += 1;
            }
            if gj <= hi {
                j += 1;
            }
        }
    }
}

/// A point strictly inside `(lo, hi)` to read the sign of a difference.
fn probe(lo: f64, hi: f64) -> f64 {
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => 0.5 * (lo + hi),
        (true, false) => lo + lo.abs().max(1.0),
        (false, true) => hi - hi.abs().max(1.0),
        (false, false) => 0.0,
    }
}

fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    if a == 0.0 {
        return if b == 0.0 { vec![] } else { vec![-c / b] };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return vec![];
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    if q == 0.0 {
        return vec![0.0];
    }
    vec![q / a, c / q]
}

/// `(value, argmax)` of a piecewise function.
pub fn piecewise_max(f: &PiecewisePolyFunction) -> (f64, f64) {
    f.maximum()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RobustConfig {
    /// Loss cap `K`, in squared units of the normalized data. May be `inf`.
    pub cap: f64,
    pub threshold: f64,
    pub sigma: f64,
}

impl RobustConfig {
    pub fn new(cap: f64, threshold: f64) -> Self {
        Self { cap, threshold, sigma: 1.0 }
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn validate(&self) -> Result<(), FocusError> {
        if !(self.cap > 0.0) {
            return Err(FocusError::config(format!("cap must be > 0, got {}", self.cap)));
        }
        check_threshold(self.threshold)?;
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(FocusError::config(format!("sigma must be finite and > 0, got {}", self.sigma)));
        }
        Ok(())
    }
}

/// Detector for a change in mean under the capped square loss.
#[derive(Clone, Debug)]
pub struct RobustFocus {
    config: RobustConfig,
    null_fit: PiecewisePolyFunction,
    change_fit: PiecewisePolyFunction,
    n: u64,
}

impl RobustFocus {
    pub fn new(config: RobustConfig) -> Result<Self, FocusError> {
        config.validate()?;
        Ok(Self {
            config,
            null_fit: PiecewisePolyFunction::constant(0.0),
            change_fit: PiecewisePolyFunction::constant(0.0),
            n: 0,
        })
    }

    pub fn config(&self) -> &RobustConfig {
        &self.config
    }

    pub fn null_fit(&self) -> &PiecewisePolyFunction {
        &self.null_fit
    }

    pub fn change_fit(&self) -> &PiecewisePolyFunction {
        &self.change_fit
    }
}

impl OnlineDetector for RobustFocus {
    fn step(&mut self, x: f64) -> Result<StepOutcome, FocusError> {
        let z = ensure_finite(x)? / self.config.sigma;
        let fit = PiecewisePolyFunction::biweight(z, self.config.cap);
        self.n += 1;

        self.null_fit = self.null_fit.add(&fit);
        let (null_max, _) = self.null_fit.maximum();

        let mut floor = PiecewisePolyFunction::constant(null_max);
        floor.pieces[0].origin = self.n;
        self.change_fit = self.change_fit.add(&fit).pointwise_max(&floor);
        let (change_max, _) = self.change_fit.maximum();

        let statistic = ((change_max - null_max) / 2.0).max(0.0);
        let tau_hat =
            if statistic > 0.0 { Some(self.change_fit.pieces[self.change_fit.argmax_piece()].origin) } else { None };
        Ok(StepOutcome { t: self.n, statistic, tau_hat, detected: statistic >= self.config.threshold })
    }

    fn reset(&mut self) {
        self.null_fit = PiecewisePolyFunction::constant(0.0);
        self.change_fit = PiecewisePolyFunction::constant(0.0);
        self.n = 0;
    }

    fn threshold(&self) -> f64 {
        self.config.threshold
    }

    fn set_threshold(&mut self, threshold: f64) -> Result<(), FocusError> {
        self.config.threshold = check_threshold(threshold)?;
        Ok(())
    }

    fn observations(&self) -> u64 {
        self.n
    }
}
