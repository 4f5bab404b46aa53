// SPDX-License-Identifier: MIT OR Apache-2.0

//! Command-line definitions. Every flag can also be set through an environment
//! variable named `FOCUS_<FLAG>` (upper case, dashes as underscores).

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use super::{stream_detect, AutoTuneSettings, ColumnSel, Method, MethodSpec, StreamOptions};
use crate::error::FocusError;

#[derive(Debug, Parser)]
#[command(
    name = "focus",
    version,
    about = "Online change-in-mean detection over a stream of numbers",
    args_conflicts_with_subcommands = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Option<Command>,

    #[command(flatten)]
    pub detect: DetectArgs,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a simulation study and write CSV/JSON results.
    Bench(BenchArgs),
}

/// `min,max,p` geometric grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridArg(pub f64, pub f64, pub usize);

impl FromStr for GridArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let [lo, hi, p] = parts.as_slice() else {
            return Err(format!("expected min,max,p, got {s:?}"));
        };
        let num = |t: &str| t.parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
        Ok(GridArg(num(lo)?, num(hi)?, p.parse().map_err(|e| format!("{p:?}: {e}"))?))
    }
}

/// Detector parameters shared by detection and the bench studies.
#[derive(Clone, Debug, Args)]
pub struct MethodParams {
    /// Pre-change mean (known-mean methods and baselines).
    #[arg(long, env = "FOCUS_MEAN0", default_value_t = 0.0, allow_hyphen_values = true)]
    pub mean0: f64,

    /// Noise scale used to standardize observations.
    #[arg(long, env = "FOCUS_SIGMA", default_value_t = 1.0)]
    pub sigma: f64,

    /// Geometric grid `min,max,p` (approximate FOCuS, page-grid).
    #[arg(long, env = "FOCUS_GRID")]
    pub grid: Option<GridArg>,

    /// Keep at most P quadratics per side (approximate FOCuS).
    #[arg(long, env = "FOCUS_MAX_QUADRATICS")]
    pub max_quadratics: Option<usize>,

    /// Loss cap K for rfocus, in squared standardized units.
    #[arg(long, env = "FOCUS_CAP")]
    pub cap: Option<f64>,

    /// MOSUM window.
    #[arg(long, env = "FOCUS_WINDOW", default_value_t = 50)]
    pub window: usize,

    /// mMOSUM window proportion.
    #[arg(long, env = "FOCUS_PROPORTION", default_value_t = 0.5)]
    pub proportion: f64,

    /// Post-change mean for page, mu_star for lorden.
    #[arg(long, env = "FOCUS_MU1", default_value_t = 1.0, allow_hyphen_values = true)]
    pub mu1: f64,
}

impl MethodParams {
    pub fn spec(&self, method: Method, threshold: f64) -> MethodSpec {
        MethodSpec {
            method,
            threshold,
            mean0: self.mean0,
            sigma: self.sigma,
            grid: self.grid.map(|g| (g.0, g.1, g.2)),
            max_quadratics: self.max_quadratics,
            cap: self.cap.unwrap_or(f64::INFINITY),
            window: self.window,
            proportion: self.proportion,
            mu1: self.mu1,
        }
    }
}

#[derive(Clone, Debug, Args)]
pub struct DetectArgs {
    #[arg(long, value_enum, env = "FOCUS_METHOD", default_value = "focus0")]
    pub method: Method,

    /// Detection threshold (required unless --autotune).
    #[arg(long, env = "FOCUS_THRESHOLD")]
    pub threshold: Option<f64>,

    #[command(flatten)]
    pub params: MethodParams,

    /// Tune scale, cap and threshold on a probation prefix; reads the whole
    /// input before detecting.
    #[arg(long, env = "FOCUS_AUTOTUNE")]
    pub autotune: bool,

    #[arg(long, env = "FOCUS_PROBATION_FRAC", default_value_t = 0.15)]
    pub probation_frac: f64,

    #[arg(long, env = "FOCUS_KAPPA", default_value_t = 1.5)]
    pub kappa: f64,

    /// CSV field holding the value: zero-based index or header name.
    /// Defaults to the last field.
    #[arg(long, env = "FOCUS_COLUMN")]
    pub column: Option<String>,

    /// Write detections here instead of stdout.
    #[arg(long, env = "FOCUS_OUTPUT")]
    pub output: Option<PathBuf>,

    /// Skip unparsable lines instead of aborting.
    #[arg(long, env = "FOCUS_SKIP_BAD_LINES")]
    pub skip_bad_lines: bool,

    /// Observations kept for replay after a detection.
    #[arg(long, env = "FOCUS_REPLAY_CAPACITY", default_value_t = 4096)]
    pub replay_capacity: usize,

    /// Keep the threshold fixed after detections.
    #[arg(long, env = "FOCUS_NO_INFLATE")]
    pub no_inflate: bool,

    /// Input file; stdin when absent or `-`.
    pub input: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Study {
    Arl,
    Delay,
    Counts,
    Timing,
    Nab,
}

#[derive(Clone, Debug, Args)]
pub struct BenchArgs {
    pub study: Study,

    /// Methods to study (repeatable).
    #[arg(long, value_enum, env = "FOCUS_BENCH_METHOD", value_delimiter = ',', default_value = "focus0")]
    pub method: Vec<Method>,

    #[command(flatten)]
    pub params: MethodParams,

    /// Thresholds for the run-length table; calibrated to --target-arl when absent.
    #[arg(long, env = "FOCUS_LAMBDA", value_delimiter = ',')]
    pub lambda: Vec<f64>,

    /// Stream lengths (counts, timing).
    #[arg(long, env = "FOCUS_N", value_delimiter = ',')]
    pub n: Vec<u64>,

    #[arg(long, env = "FOCUS_REPS", default_value_t = 100)]
    pub reps: usize,

    #[arg(long, env = "FOCUS_SEED", default_value_t = 1)]
    pub seed: u64,

    #[arg(long, env = "FOCUS_HORIZON", default_value_t = 100_000)]
    pub horizon: u64,

    #[arg(long, env = "FOCUS_TARGET_ARL", default_value_t = 10_000.0)]
    pub target_arl: f64,

    /// Change sizes for the delay study.
    #[arg(long, env = "FOCUS_DELTAS", value_delimiter = ',', default_value = "0.25,0.5,1,2")]
    pub deltas: Vec<f64>,

    /// Last pre-change time in the delay study.
    #[arg(long, env = "FOCUS_TAU_STAR", default_value_t = 1_000)]
    pub tau_star: u64,

    /// Observations after the change in the delay study.
    #[arg(long, env = "FOCUS_POST", default_value_t = 10_000)]
    pub post: u64,

    /// Count study with one random change per replicate.
    #[arg(long, env = "FOCUS_CHANGE")]
    pub change: bool,

    /// Timing repeats (the fastest is kept).
    #[arg(long, env = "FOCUS_REPEATS", default_value_t = 3)]
    pub repeats: usize,

    /// Also time the quadratic-cost likelihood-ratio oracle at these lengths.
    #[arg(long, env = "FOCUS_ORACLE_N", value_delimiter = ',')]
    pub oracle_n: Vec<u64>,

    /// Labelled series for the nab study.
    #[arg(long, env = "FOCUS_INPUT")]
    pub input: Option<PathBuf>,

    /// Anomaly times, one per line, for the nab study.
    #[arg(long, env = "FOCUS_TRUTH")]
    pub truth: Option<PathBuf>,

    #[arg(long, env = "FOCUS_PROBATION_FRAC", default_value_t = 0.15)]
    pub probation_frac: f64,

    #[arg(long, env = "FOCUS_KAPPA", default_value_t = 1.5)]
    pub kappa: f64,

    #[arg(long, env = "FOCUS_WINDOW_FRAC", default_value_t = 0.05)]
    pub window_frac: f64,

    /// Existing directory for the outputs.
    #[arg(long, env = "FOCUS_OUT_DIR", default_value = ".")]
    pub out_dir: PathBuf,
}

/// Entry point shared by the binary and tests.
pub fn run(cli: Cli) -> Result<(), FocusError> {
    match cli.command {
        Some(Command::Bench(args)) => super::bench::run_bench(&args),
        None => run_detect(&cli.detect),
    }
}

pub fn run_detect(args: &DetectArgs) -> Result<(), FocusError> {
    let threshold = match (args.threshold, args.autotune) {
        (Some(t), _) => t,
        (None, true) => f64::INFINITY,
        (None, false) => return Err(FocusError::config("--threshold is required unless --autotune is given")),
    };
    let spec = args.params.spec(args.method, threshold);
    let tune = args.autotune.then_some(AutoTuneSettings { probation_frac: args.probation_frac, kappa: args.kappa });
    let opts = StreamOptions {
        column: args.column.as_deref().map(|c| ColumnSel::from_str(c).unwrap_or(ColumnSel::Name(c.to_string()))),
        skip_bad_lines: args.skip_bad_lines,
        replay_capacity: args.replay_capacity,
        inflate: !args.no_inflate,
        initial_changepoint: 0,
    };
    let output: Box<dyn Write> = match &args.output {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    };
    let report = match args.input.as_deref() {
        Some(p) if p.as_os_str() != "-" => stream_detect(BufReader::new(File::open(p)?), output, &spec, tune, &opts)?,
        _ => stream_detect(io::stdin().lock(), output, &spec, tune, &opts)?,
    };
    if let Some(t) = &report.tuned {
        log::info!(
            "tuned on {} observations: median {}, sigma {}, cap {}, threshold {}",
            t.probation_len,
            t.median,
            t.sigma,
            t.cap,
            t.lambda
        );
    }
    log::info!(
        "{} observations, {} detections, {} skipped lines",
        report.observations,
        report.records.len(),
        report.skipped_lines
    );
    Ok(())
}
