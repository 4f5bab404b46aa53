// SPDX-License-Identifier: MIT OR Apache-2.0

//! CSV tables and JSON metadata written by the bench studies.
//!
//! Column sets are fixed:
//!
//! - run length: `method,n,threshold,arl,se,censored`
//! - detection delay: `method,delta,threshold,delay,se,false_alarms`
//! - counts: `variant,n,change,replicates,mean,se,harmonic,change_bound`
//! - timing: `method,n,seconds`

use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CountRow, TimingRow, RNG_ALGORITHM};
use crate::error::FocusError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArlRow {
    pub method: String,
    pub n: u64,
    pub threshold: f64,
    pub arl: f64,
    pub se: f64,
    pub censored: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelayRow {
    pub method: String,
    pub delta: f64,
    pub threshold: f64,
    pub delay: f64,
    pub se: f64,
    pub false_alarms: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub study: String,
    pub rng: String,
    pub seed: u64,
    pub replicates: usize,
    pub crate_version: String,
    /// Study-specific settings.
    pub settings: serde_json::Value,
}

impl Metadata {
    pub fn new(study: &str, seed: u64, replicates: usize, settings: serde_json::Value) -> Self {
        Self {
            study: study.to_string(),
            rng: RNG_ALGORITHM.to_string(),
            seed,
            replicates,
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            settings,
        }
    }
}

fn csv_err(e: csv::Error) -> FocusError {
    FocusError::Io(e.to_string())
}

pub fn write_csv<R: Serialize>(path: &Path, rows: &[R]) -> Result<(), FocusError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_arl_csv(path: &Path, rows: &[ArlRow]) -> Result<(), FocusError> {
    write_csv(path, rows)
}

pub fn write_delay_csv(path: &Path, rows: &[DelayRow]) -> Result<(), FocusError> {
    write_csv(path, rows)
}

pub fn write_count_csv(path: &Path, rows: &[CountRow]) -> Result<(), FocusError> {
    write_csv(path, rows)
}

pub fn write_timing_csv(path: &Path, rows: &[TimingRow]) -> Result<(), FocusError> {
    write_csv(path, rows)
}

pub fn write_metadata(path: &Path, meta: &Metadata) -> Result<(), FocusError> {
    let mut f = File::create(path)?;
    let text = serde_json::to_string_pretty(meta).map_err(|e| FocusError::Io(e.to_string()))?;
    f.write_all(text.as_bytes())?;
    f.write_all(b"\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_headers_are_fixed() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("arl.csv");
        write_arl_csv(&p, &[ArlRow { method: "focus0".into(), n: 10, threshold: 1.5, arl: 3.0, se: 0.5, censored: 0 }])
            .unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().next().unwrap(), "method,n,threshold,arl,se,censored");

        let p = dir.path().join("delay.csv");
        write_delay_csv(
            &p,
            &[DelayRow { method: "page".into(), delta: 1.0, threshold: 2.0, delay: 4.0, se: 0.1, false_alarms: 1 }],
        )
        .unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().next().unwrap(), "method,delta,threshold,delay,se,false_alarms");
    }

    #[test]
    fn metadata_records_rng() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("meta.json");
        write_metadata(&p, &Metadata::new("arl", 3, 10, serde_json::json!({"horizon": 100}))).unwrap();
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
        assert!(v["rng"].as_str().unwrap().starts_with("ChaCha8"));
        assert_eq!(v["settings"]["horizon"], 100);
    }
}
