// SPDX-License-Identifier: MIT OR Apache-2.0

//! Library side of the `focus` command: detector construction from flags,
//! probation-based auto-tuning and streaming detection with restarts.

use std::collections::VecDeque;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::baselines::{Cusum, Lorden, Mmosum, Mosum, Page, PageGrid, Standardize};
use crate::detectors::{build_geometric_grid, DetectorConfig, FocusDetector, Grid, OnlineDetector, Variant};
use crate::error::{ensure_finite, FocusError};
use crate::robust::{RobustConfig, RobustFocus};

pub mod args;
pub mod bench;

pub use args::{BenchArgs, Cli, Command, DetectArgs, Study};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Focus0,
    Focus,
    Rfocus,
    Cusum,
    Mosum,
    Mmosum,
    Page,
    PageGrid,
    Lorden,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Focus0 => "focus0",
            Method::Focus => "focus",
            Method::Rfocus => "rfocus",
            Method::Cusum => "cusum",
            Method::Mosum => "mosum",
            Method::Mmosum => "mmosum",
            Method::Page => "page",
            Method::PageGrid => "page-grid",
            Method::Lorden => "lorden",
        }
    }
}

/// Everything needed to build one detector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub method: Method,
    pub threshold: f64,
    pub mean0: f64,
    pub sigma: f64,
    /// `(m_min, m_max, p)` geometric grid.
    pub grid: Option<(f64, f64, usize)>,
    pub max_quadratics: Option<usize>,
    /// Loss cap for `rfocus`.
    pub cap: f64,
    /// MOSUM window.
    pub window: usize,
    /// mMOSUM proportion.
    pub proportion: f64,
    /// Post-change mean for `page`, `mu_star` for `lorden`.
    pub mu1: f64,
}

impl MethodSpec {
    pub fn new(method: Method, threshold: f64) -> Self {
        Self {
            method,
            threshold,
            mean0: 0.0,
            sigma: 1.0,
            grid: None,
            max_quadratics: None,
            cap: f64::INFINITY,
            window: 50,
            proportion: 0.5,
            mu1: 1.0,
        }
    }

    fn grid(&self) -> Result<Option<Grid>, FocusError> {
        self.grid.map(|(lo, hi, p)| build_geometric_grid(lo, hi, p)).transpose()
    }

    pub fn build(&self) -> Result<Box<dyn OnlineDetector>, FocusError> {
        let scale = Standardize::new(self.mean0, self.sigma)?;
        let lambda = self.threshold;
        Ok(match self.method {
            Method::Focus0 | Method::Focus => {
                let known = self.method == Method::Focus0;
                let approx = self.grid.is_some() || self.max_quadratics.is_some();
                let variant = match (known, approx) {
                    (true, false) => Variant::Focus0,
                    (true, true) => Variant::Focus0Approx,
                    (false, false) => Variant::Focus,
                    (false, true) => Variant::FocusApprox,
                };
                let mut cfg =
                    DetectorConfig::new(variant, lambda).with_pre_change_mean(self.mean0).with_sigma(self.sigma);
                if let Some(g) = self.grid()? {
                    cfg = cfg.with_grid(g);
                }
                if let Some(p) = self.max_quadratics {
                    cfg = cfg.with_max_quadratics(p);
                }
                Box::new(FocusDetector::new(cfg)?)
            }
            Method::Rfocus => Box::new(RobustFocus::new(RobustConfig::new(self.cap, lambda).with_sigma(self.sigma))?),
            Method::Cusum => Box::new(Cusum::new(lambda, scale)?),
            Method::Mosum => Box::new(Mosum::new(self.window, lambda, scale)?),
            Method::Mmosum => Box::new(Mmosum::new(self.proportion, lambda, scale)?),
            Method::Page => Box::new(Page::new(self.mu1, lambda, scale)?),
            Method::PageGrid => {
                let grid = self.grid()?.unwrap_or_else(Grid::page_10p);
                Box::new(PageGrid::new(&grid, lambda, scale)?)
            }
            Method::Lorden => Box::new(Lorden::new(self.mu1, lambda, scale)?),
        })
    }
}

/// Settings and results of probation-based tuning.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AutoTuneConfig {
    pub probation_frac: f64,
    pub kappa: f64,
    pub probation_len: usize,
    pub median: f64,
    pub sigma: f64,
    /// Loss cap on the standardized scale; infinite when nothing lies outside
    /// the fences.
    pub cap: f64,
    pub lambda: f64,
}

pub const MIN_PROBATION: usize = 20;

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Robust location, scale and loss cap from a probation sample.
///
/// - `sigma` is `1.4826 * MAD`, or the sample standard deviation when the MAD
///   is zero.
/// - Fences are `Q1 - 1.5 IQR` and `Q3 + 1.5 IQR`. If any point lies outside,
///   `cap` is the largest squared z-score among points inside; otherwise it is
///   infinite.
pub fn robust_scale(probation: &[f64]) -> Result<(f64, f64, f64), FocusError> {
    if probation.len() < MIN_PROBATION {
        return Err(FocusError::input(format!(
            "probation sample has {} points, need at least {MIN_PROBATION}",
            probation.len()
        )));
    }
    for &x in probation {
        ensure_finite(x)?;
    }
    let mut sorted = probation.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = quantile(&sorted, 0.5);
    let mut dev: Vec<f64> = sorted.iter().map(|x| (x - median).abs()).collect();
    dev.sort_by(f64::total_cmp);
    let mut sigma = 1.4826 * quantile(&dev, 0.5);
    if sigma == 0.0 {
        let n = sorted.len() as f64;
        let mean = sorted.iter().sum::<f64>() / n;
        sigma = (sorted.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    }
    if !(sigma > 0.0) {
        return Err(FocusError::ZeroVariance);
    }
    let (q1, q3) = (quantile(&sorted, 0.25), quantile(&sorted, 0.75));
    let iqr = q3 - q1;
    let (lo, hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside = |x: f64| x >= lo && x <= hi;
    let cap = if sorted.iter().all(|&x| inside(x)) {
        f64::INFINITY
    } else {
        sorted.iter().filter(|&&x| inside(x)).map(|x| ((x - median) / sigma).powi(2)).fold(0.0, f64::max)
    };
    Ok((median, sigma, cap))
}

/// Tunes an R-FOCuS detector on a probation sample: robust scale and cap, then
/// `lambda = kappa * max` of the statistic over the probation data.
pub fn autotune(probation: &[f64], kappa: f64) -> Result<AutoTuneConfig, FocusError> {
    autotune_method(probation, kappa, Method::Rfocus, &MethodSpec::new(Method::Rfocus, f64::INFINITY))
}

/// Like [`autotune`], with the threshold taken from the trace of `method`.
/// The probation data are standardized by the median and robust scale.
pub fn autotune_method(
    probation: &[f64],
    kappa: f64,
    method: Method,
    base: &MethodSpec,
) -> Result<AutoTuneConfig, FocusError> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(FocusError::config(format!("kappa must be finite and > 0, got {kappa}")));
    }
    let (median, sigma, cap) = robust_scale(probation)?;
    let spec = MethodSpec { method, threshold: f64::INFINITY, mean0: 0.0, sigma: 1.0, cap, ..base.clone() };
    let mut det = spec.build()?;
    let mut peak: f64 = 0.0;
    for &x in probation {
        peak = peak.max(det.step((x - median) / sigma)?.statistic);
    }
    if !(peak > 0.0) {
        return Err(FocusError::input("statistic stayed at 0 over the probation sample; cannot set a threshold"));
    }
    Ok(AutoTuneConfig {
        probation_frac: f64::NAN,
        kappa,
        probation_len: probation.len(),
        median,
        sigma,
        cap,
        lambda: kappa * peak,
    })
}

/// One detection, as written to the output stream.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub t: u64,
    pub tau_hat: u64,
    #[serde(rename = "stat")]
    pub statistic: f64,
    #[serde(rename = "threshold")]
    pub threshold_used: f64,
}

/// Which field of a CSV line holds the value.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ColumnSel {
    Index(usize),
    Name(String),
}

impl std::str::FromStr for ColumnSel {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => ColumnSel::Index(i),
            Err(_) => ColumnSel::Name(s.to_string()),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StreamOptions {
    /// Zero-based index or header name; defaults to the last field.
    pub column: Option<ColumnSel>,
    /// Skip unparsable or non-finite lines with a warning instead of aborting.
    pub skip_bad_lines: bool,
    /// Observations kept for replay after a detection.
    pub replay_capacity: usize,
    pub inflate: bool,
    /// `tau_0` for threshold inflation.
    pub initial_changepoint: u64,
}

impl Default for StreamOptions {
    fn default() -> Self {
        Self { column: None, skip_bad_lines: false, replay_capacity: 4096, inflate: true, initial_changepoint: 0 }
    }
}

/// Reads one value per line, or one CSV field per line. A non-numeric first
/// line is taken as a header.
pub struct ValueReader<R> {
    lines: std::io::Lines<R>,
    column: Option<ColumnSel>,
    index: Option<usize>,
    line_no: u64,
    skip_bad: bool,
    pub skipped: u64,
}

impl<R: BufRead> ValueReader<R> {
    pub fn new(input: R, column: Option<ColumnSel>, skip_bad: bool) -> Self {
        let index = match column {
            Some(ColumnSel::Index(i)) => Some(i),
            _ => None,
        };
        Self { lines: input.lines(), column, index, line_no: 0, skip_bad, skipped: 0 }
    }

    fn field<'a>(&self, line: &'a str) -> Option<&'a str> {
        let mut fields = line.split(',');
        match self.index {
            Some(i) => fields.nth(i),
            None => fields.next_back(),
        }
        .map(str::trim)
    }

    fn parse(&self, line: &str) -> Result<f64, FocusError> {
        let bad = || FocusError::Parse { line: self.line_no, text: line.to_string() };
        let v: f64 = self.field(line).ok_or_else(bad)?.parse().map_err(|_| bad())?;
        ensure_finite(v).map_err(|_| bad())
    }
}

impl<R: BufRead> Iterator for ValueReader<R> {
    type Item = Result<f64, FocusError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(e.into())),
            };
            self.line_no += 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if self.line_no == 1 {
                if let Some(ColumnSel::Name(name)) = &self.column {
                    match line.split(',').position(|f| f.trim() == name) {
                        Some(i) => {
                            self.index = Some(i);
                            continue;
                        }
                        None => return Some(Err(FocusError::input(format!("column {name:?} not found in header")))),
                    }
                }
                if self.parse(line).is_err() {
                    continue;
                }
            }
            match self.parse(line) {
                Ok(v) => return Some(Ok(v)),
                Err(e) if self.skip_bad => {
                    log::warn!("{e}; skipping");
                    self.skipped += 1;
                }
                Err(e) => return Some(Err(e)),
            }
        }
    }
}

/// `log(tau_s) / log(tau_s - tau_prev)`, with both arguments floored at 2; 1
/// when `tau_prev` is 0.
pub fn inflation_factor(tau_s: u64, tau_prev: u64) -> f64 {
    if tau_prev == 0 {
        return 1.0;
    }
    let num = (tau_s.max(2) as f64).ln();
    let den = (tau_s.saturating_sub(tau_prev).max(2) as f64).ln();
    (num / den).max(1.0)
}

/// Streaming detector with restart-and-replay after each detection.
pub struct Restarting<W: Write> {
    detector: Box<dyn OnlineDetector>,
    ring: VecDeque<(u64, f64)>,
    capacity: usize,
    /// Global time of the detector's local time 0.
    offset: u64,
    /// Global time of the last observation.
    now: u64,
    threshold: f64,
    last_tau: u64,
    inflate: bool,
    out: W,
    pub records: Vec<DetectionRecord>,
}

impl<W: Write> Restarting<W> {
    pub fn new(detector: Box<dyn OnlineDetector>, start: u64, opts: &StreamOptions, out: W) -> Self {
        Self {
            threshold: detector.threshold(),
            detector,
            ring: VecDeque::with_capacity(opts.replay_capacity.max(1)),
            capacity: opts.replay_capacity.max(1),
            offset: start,
            now: start,
            last_tau: opts.initial_changepoint,
            inflate: opts.inflate,
            out,
            records: Vec::new(),
        }
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn into_output(self) -> W {
        self.out
    }

    pub fn push(&mut self, x: f64) -> Result<(), FocusError> {
        ensure_finite(x)?;
        self.now += 1;
        if self.ring.len() == self.capacity {
            self.ring.pop_front();
        }
        self.ring.push_back((self.now, x));

        let mut queue = VecDeque::from([(self.now, x)]);
        while let Some((i, v)) = queue.pop_front() {
            let o = self.detector.step(v)?;
            if !o.detected {
                continue;
            }
            let tau = self.offset + o.tau_hat.unwrap_or(0);
            let rec = DetectionRecord { t: i, tau_hat: tau, statistic: o.statistic, threshold_used: self.threshold };
            serde_json::to_writer(&mut self.out, &rec).map_err(|e| FocusError::Io(e.to_string()))?;
            self.out.write_all(b"\n")?;
            self.out.flush()?;
            self.records.push(rec);

            self.detector.reset();
            if self.inflate {
                self.threshold *= inflation_factor(tau, self.last_tau);
                self.detector.set_threshold(self.threshold)?;
            }
            self.last_tau = tau;

            let oldest = self.ring.front().map_or(u64::MAX, |r| r.0);
            if tau > self.offset && tau < i && oldest <= tau + 1 {
                self.offset = tau;
                let replay: Vec<(u64, f64)> = self.ring.iter().copied().filter(|&(j, _)| j > tau && j <= i).collect();
                for item in replay.into_iter().rev() {
                    queue.push_front(item);
                }
            } else {
                if tau <= self.offset || tau >= i {
                    log::debug!("restarting at detection time {i} (estimate {tau} gives no progress)");
                } else {
                    log::warn!("changepoint estimate {tau} predates the replay buffer; restarting at {i}");
                }
                self.offset = i;
            }
        }
        Ok(())
    }
}

/// Summary of a streaming run.
#[derive(Clone, Debug, PartialEq)]
pub struct StreamReport {
    pub records: Vec<DetectionRecord>,
    pub observations: u64,
    pub skipped_lines: u64,
    pub tuned: Option<AutoTuneConfig>,
}

/// Probation settings for [`stream_detect`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AutoTuneSettings {
    pub probation_frac: f64,
    pub kappa: f64,
}

/// Runs `spec` over the values in `input`, writing one JSON object per
/// detection to `output`.
///
/// With `tune`, the whole input is read first: the leading `probation_frac`
/// share tunes the detector and detection starts right after it.
pub fn stream_detect<R: BufRead, W: Write>(
    input: R,
    output: W,
    spec: &MethodSpec,
    tune: Option<AutoTuneSettings>,
    opts: &StreamOptions,
) -> Result<StreamReport, FocusError> {
    let mut reader = ValueReader::new(input, opts.column.clone(), opts.skip_bad_lines);
    match tune {
        None => {
            let mut engine = Restarting::new(spec.build()?, 0, opts, output);
            for v in reader.by_ref() {
                engine.push(v?)?;
            }
            Ok(StreamReport {
                observations: engine.now,
                records: engine.records,
                skipped_lines: reader.skipped,
                tuned: None,
            })
        }
        Some(settings) => {
            if !(settings.probation_frac > 0.0 && settings.probation_frac < 1.0) {
                return Err(FocusError::config("probation fraction must lie in (0, 1)"));
            }
            let data = reader.by_ref().collect::<Result<Vec<f64>, _>>()?;
            let w = (settings.probation_frac * data.len() as f64).floor() as usize;
            let mut tuned = autotune_method(&data[..w.min(data.len())], settings.kappa, spec.method, spec)?;
            tuned.probation_frac = settings.probation_frac;
            let tuned_spec = MethodSpec {
                threshold: tuned.lambda,
                mean0: tuned.median,
                sigma: tuned.sigma,
                cap: tuned.cap,
                ..spec.clone()
            };
            let opts = StreamOptions { initial_changepoint: w as u64, ..opts.clone() };
            let mut engine = Restarting::new(tuned_spec.build()?, w as u64, &opts, output);
            for &v in &data[w..] {
                engine.push(v)?;
            }
            Ok(StreamReport {
                observations: data.len() as u64,
                records: engine.records,
                skipped_lines: reader.skipped,
                tuned: Some(tuned),
            })
        }
    }
}
