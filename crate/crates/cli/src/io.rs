//! Tabular artifacts. Floats are written in Rust's shortest round-trip form,
//! so files re-parse to the exact same values.

use std::fs;
use std::path::Path;

use serde::Serialize;
use tuner_core::quad_env::{EpisodeResult, N_GAINS};
use tuner_core::safe_bo::BoTrace;
use tuner_core::Dataset;

use crate::error::{config_err, CliError, Result};

fn param_header() -> Vec<String> {
    (1..=N_GAINS).map(|i| format!("p{i}")).collect()
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::Config(format!("{}: {other:?}", path.display())),
    }
}

pub(crate) fn write_rows(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("artifact serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn read_json(path: &Path) -> Result<serde_json::Value> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// `p1..p9,P`, one row per observation.
pub fn write_prior(path: &Path, data: &Dataset) -> Result<()> {
    let mut header = param_header();
    header.push("P".into());
    let rows = data.iter().map(|(x, y)| {
        let mut row: Vec<String> = x.iter().map(f64::to_string).collect();
        row.push(y.to_string());
        row
    });
    write_rows(path, &header, rows)
}

pub fn read_prior(path: &Path) -> Result<Dataset> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut expected = param_header();
    expected.push("P".into());
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.iter().collect::<Vec<_>>() != expected {
        return config_err(format!("{}: header must be `{}`", path.display(), expected.join(",")));
    }
    let mut data = Dataset::new(N_GAINS);
    for (i, rec) in r.records().enumerate() {
        // row 1 is the header
        let row = i + 2;
        let rec = rec.map_err(|e| CliError::Config(format!("{} row {row}: {e}", path.display())))?;
        let values = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| CliError::Config(format!("{} row {row}: {e}", path.display())))?;
        if values.len() != N_GAINS + 1 || values.iter().any(|v| !v.is_finite()) {
            return config_err(format!("{} row {row}: expected {} finite values", path.display(), N_GAINS + 1));
        }
        if values[..N_GAINS].iter().any(|v| !(0.0..=1.0).contains(v)) {
            return config_err(format!("{} row {row}: parameters must lie in [0, 1]", path.display()));
        }
        data.push(values[..N_GAINS].to_vec(), values[N_GAINS])?;
    }
    if data.is_empty() {
        return config_err(format!("{}: no observations", path.display()));
    }
    Ok(data)
}

pub fn trace_header() -> Vec<String> {
    let mut h = vec!["iter".to_string()];
    h.extend(param_header());
    h.extend(["P", "safe", "lb_at_selection", "best_so_far", "stalled"].map(String::from));
    h
}

/// One row per post-prior evaluation; `iter` counts from 1.
pub fn write_trace(path: &Path, trace: &BoTrace) -> Result<()> {
    let rows = trace.records.iter().map(|r| {
        let mut row = vec![(r.iteration + 1).to_string()];
        row.extend(r.params.iter().map(f64::to_string));
        row.push(r.performance.to_string());
        row.push(r.safe.to_string());
        row.push(r.lower_bound.to_string());
        row.push(r.best_so_far.to_string());
        row.push(r.stalled.to_string());
        row
    });
    write_rows(path, &trace_header(), rows)
}

/// The columns of `trace.csv` that reports need.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub performance: f64,
    pub safe: bool,
    pub best_so_far: f64,
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.iter().collect::<Vec<_>>() != trace_header() {
        return config_err(format!("{}: unexpected trace header", path.display()));
    }
    let col = |name: &str| trace_header().iter().position(|h| h == name).expect("known column");
    let (c_iter, c_p, c_safe, c_best) = (col("iter"), col("P"), col("safe"), col("best_so_far"));
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let row = i + 2;
        let bad = |what: &str| CliError::Config(format!("{} row {row}: invalid {what}", path.display()));
        let rec = rec.map_err(|e| CliError::Config(format!("{} row {row}: {e}", path.display())))?;
        rows.push(TraceRow {
            iter: rec[c_iter].parse().map_err(|_| bad("iter"))?,
            performance: rec[c_p].parse().map_err(|_| bad("P"))?,
            safe: rec[c_safe].parse().map_err(|_| bad("safe"))?,
            best_so_far: rec[c_best].parse().map_err(|_| bad("best_so_far"))?,
        });
    }
    Ok(rows)
}

/// `t,x,z,theta,x_ref,z_ref,theta_ref,T1,T2` per control step.
pub fn write_trajectory(path: &Path, result: &EpisodeResult) -> Result<()> {
    let header = ["t", "x", "z", "theta", "x_ref", "z_ref", "theta_ref", "T1", "T2"].map(String::from);
    let rows = result.trace.iter().map(|s| {
        [s.t, s.state.x, s.state.z, s.state.theta, s.x_ref, s.z_ref, s.theta_ref, s.t1, s.t2]
            .iter()
            .map(f64::to_string)
            .collect()
    });
    write_rows(path, &header, rows)
}
