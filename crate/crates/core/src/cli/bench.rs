// SPDX-License-Identifier: MIT OR Apache-2.0

//! `focus bench <study>`: drives the harness and writes its tables.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde_json::json;

use super::args::{BenchArgs, Study};
use super::{stream_detect, AutoTuneSettings, Method, MethodSpec, StreamOptions};
use crate::error::FocusError;
use crate::harness::report::{
    write_arl_csv, write_count_csv, write_csv, write_delay_csv, write_metadata, write_timing_csv, ArlRow, DelayRow,
    Metadata,
};
use crate::harness::{
    detection_delay, evaluate_windowed, loglog_slope, quadratic_count_profile, timing_profile, RunLengthProfile,
    StreamSpec, TimedMethod,
};

pub fn run_bench(args: &BenchArgs) -> Result<(), FocusError> {
    if !args.out_dir.is_dir() {
        return Err(FocusError::Io(format!("output directory {} does not exist", args.out_dir.display())));
    }
    match args.study {
        Study::Arl => arl(args),
        Study::Delay => delay(args),
        Study::Counts => counts(args),
        Study::Timing => timing(args),
        Study::Nab => nab(args),
    }
}

fn spec_for(args: &BenchArgs, method: Method) -> MethodSpec {
    args.params.spec(method, f64::INFINITY)
}

fn profile(args: &BenchArgs, method: Method) -> Result<RunLengthProfile, FocusError> {
    let spec = spec_for(args, method);
    RunLengthProfile::simulate(|| spec.build(), args.reps, args.horizon, args.seed)
}

fn arl(args: &BenchArgs) -> Result<(), FocusError> {
    let mut rows = Vec::new();
    let mut calibrated = serde_json::Map::new();
    for &m in &args.method {
        let prof = profile(args, m)?;
        let thresholds = if args.lambda.is_empty() {
            let c = prof.calibrate(args.target_arl)?;
            calibrated.insert(m.name().into(), json!(c.threshold));
            vec![c.threshold]
        } else {
            args.lambda.clone()
        };
        for lambda in thresholds {
            let s = prof.average_run_length(lambda);
            rows.push(ArlRow {
                method: m.name().into(),
                n: args.horizon,
                threshold: lambda,
                arl: s.mean,
                se: s.se,
                censored: s.censored,
            });
        }
    }
    write_arl_csv(&args.out_dir.join("arl.csv"), &rows)?;
    let settings = json!({"horizon": args.horizon, "target_arl": args.target_arl, "calibrated": calibrated});
    write_metadata(&args.out_dir.join("arl.json"), &Metadata::new("arl", args.seed, args.reps, settings))
}

fn delay(args: &BenchArgs) -> Result<(), FocusError> {
    let mut rows = Vec::new();
    let mut calibrated = serde_json::Map::new();
    for &m in &args.method {
        let c = profile(args, m)?.calibrate(args.target_arl)?;
        calibrated
            .insert(m.name().into(), json!({"threshold": c.threshold, "arl": c.achieved.mean, "se": c.achieved.se}));
        let spec = spec_for(args, m);
        for &delta in &args.deltas {
            let stream = StreamSpec::null(args.tau_star + args.post, args.seed, 0).with_change(args.tau_star, delta);
            let s = detection_delay(|| spec.build(), c.threshold, &stream, args.reps)?;
            rows.push(DelayRow {
                method: m.name().into(),
                delta,
                threshold: c.threshold,
                delay: s.mean,
                se: s.se,
                false_alarms: s.false_alarms,
            });
        }
    }
    write_delay_csv(&args.out_dir.join("delay.csv"), &rows)?;
    let settings = json!({
        "horizon": args.horizon,
        "target_arl": args.target_arl,
        "tau_star": args.tau_star,
        "post": args.post,
        "calibrated": calibrated,
    });
    write_metadata(&args.out_dir.join("delay.json"), &Metadata::new("delay", args.seed, args.reps, settings))
}

fn counts(args: &BenchArgs) -> Result<(), FocusError> {
    let ns = if args.n.is_empty() { vec![1024] } else { args.n.clone() };
    let rows = quadratic_count_profile(&ns, args.reps, args.change, args.seed)?;
    write_count_csv(&args.out_dir.join("counts.csv"), &rows)?;
    let settings = json!({"n": ns, "change": args.change});
    write_metadata(&args.out_dir.join("counts.json"), &Metadata::new("counts", args.seed, args.reps, settings))
}

fn timing(args: &BenchArgs) -> Result<(), FocusError> {
    let ns = if args.n.is_empty() { vec![1_000, 10_000, 100_000, 1_000_000] } else { args.n.clone() };
    let mut rows = Vec::new();
    let mut slopes = serde_json::Map::new();
    for &m in &args.method {
        let timed = match m {
            Method::Focus0 => TimedMethod::Focus0,
            Method::Focus => TimedMethod::Focus,
            Method::Rfocus => TimedMethod::RFocus { cap: args.params.cap.unwrap_or(1.0) },
            other => return Err(FocusError::config(format!("timing study does not support {}", other.name()))),
        };
        let r = timing_profile(timed, &ns, args.repeats, args.seed)?;
        slopes.insert(timed.name(), json!(loglog_slope(&r)));
        rows.extend(r);
    }
    if !args.oracle_n.is_empty() {
        let r = timing_profile(TimedMethod::YuOracle, &args.oracle_n, args.repeats, args.seed)?;
        slopes.insert(TimedMethod::YuOracle.name(), json!(loglog_slope(&r)));
        rows.extend(r);
    }
    write_timing_csv(&args.out_dir.join("timing.csv"), &rows)?;
    let settings = json!({"n": ns, "oracle_n": args.oracle_n, "repeats": args.repeats, "loglog_slopes": slopes});
    write_metadata(&args.out_dir.join("timing.json"), &Metadata::new("timing", args.seed, 1, settings))
}

#[derive(serde::Serialize)]
struct NabRow {
    file: String,
    method: String,
    n: u64,
    detections: usize,
    truths: usize,
    truths_hit: usize,
    false_positives: usize,
    precision: f64,
    recall: f64,
}

fn read_truth(path: &Path) -> Result<Vec<u64>, FocusError> {
    fs::read_to_string(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| l.trim().parse().map_err(|_| FocusError::Parse { line: i as u64 + 1, text: l.to_string() }))
        .collect()
}

fn nab(args: &BenchArgs) -> Result<(), FocusError> {
    let (Some(input), Some(truth)) = (&args.input, &args.truth) else {
        return Err(FocusError::config("nab study needs --input and --truth"));
    };
    let truth = read_truth(truth)?;
    let mut rows = Vec::new();
    for &m in &args.method {
        let spec = spec_for(args, m);
        let out = BufWriter::new(File::create(args.out_dir.join(format!("detections-{}.ndjson", m.name())))?);
        let tune = AutoTuneSettings { probation_frac: args.probation_frac, kappa: args.kappa };
        let report =
            stream_detect(BufReader::new(File::open(input)?), out, &spec, Some(tune), &StreamOptions::default())?;
        let probation = report.tuned.as_ref().map_or(0, |t| t.probation_len as u64);
        let times: Vec<u64> = report.records.iter().map(|r| r.t).collect();
        let score = evaluate_windowed(&truth, &times, report.observations, args.window_frac, probation)?;
        rows.push(NabRow {
            file: input.display().to_string(),
            method: m.name().into(),
            n: report.observations,
            detections: times.len(),
            truths: truth.len(),
            truths_hit: score.truths_hit,
            false_positives: score.false_positives,
            precision: score.precision,
            recall: score.recall,
        });
    }
    write_csv(&args.out_dir.join("nab.csv"), &rows)?;
    let settings = json!({"probation_frac": args.probation_frac, "kappa": args.kappa, "window_frac": args.window_frac});
    write_metadata(&args.out_dir.join("nab.json"), &Metadata::new("nab", args.seed, 1, settings))
}
