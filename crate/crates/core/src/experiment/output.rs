//! Checkpoint summaries and on-disk layout.
//!
//! ```text
//! <dir>/raw/<experiment>-<series>/<rep>.csv        per-round traces
//! <dir>/raw/<experiment>-<series>/<rep>-nonsep.csv fig1 counters
//! <dir>/instances/<rep>-mu.csv, <rep>-weights.csv
//! <dir>/summary/<experiment>.csv                   regret at checkpoints
//! <dir>/summary/<experiment>-totals.csv            evals, wall time, final regret
//! <dir>/meta.json
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde_json::json;

use super::{ExperimentReport, SeriesResult};
use crate::error::{Error, Result};
use crate::trace::RegretTrace;

/// Fractions of the horizon at which summaries are taken, in percent.
const CHECKPOINT_PERCENT: [u64; 13] = [1, 2, 5, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100];

pub const SUMMARY_HEADER: &str = "series,t,mean_cum_regret,min_cum_regret,max_cum_regret";
pub const TOTALS_HEADER: &str =
    "series,ell,replications,mean_evals_per_round,total_evals,mean_wall_s,min_wall_s,max_wall_s,mean_final_regret";

/// Distinct rounds `ceil(pct/100 * T)`, at least 1.
pub fn checkpoints(horizon: u64) -> Vec<u64> {
    let mut ts: Vec<u64> = CHECKPOINT_PERCENT.iter().map(|p| (p * horizon).div_ceil(100).max(1)).collect();
    ts.dedup();
    ts
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub series: String,
    pub t: u64,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TotalsRow {
    pub series: String,
    pub ell: Option<usize>,
    pub replications: usize,
    pub mean_evals_per_round: f64,
    pub total_evals: u64,
    pub mean_wall_s: f64,
    pub min_wall_s: f64,
    pub max_wall_s: f64,
    pub mean_final_regret: f64,
}

/// Mean, min and max cumulative regret across replications at each checkpoint.
pub fn aggregate(series: &str, traces: &[RegretTrace]) -> Result<Vec<SummaryRow>> {
    let first = traces.first().ok_or_else(|| Error::Aggregation(format!("series {series} has no traces")))?;
    let rounds: Vec<u64> = first.rows().iter().map(|r| r.t).collect();
    if rounds.is_empty() {
        return Err(Error::Aggregation(format!("series {series} has an empty trace")));
    }
    for (i, tr) in traces.iter().enumerate() {
        if tr.len() != rounds.len() || tr.rows().iter().zip(&rounds).any(|(r, &t)| r.t != t) {
            return Err(Error::Aggregation(format!("series {series}: trace {i} has a different round schedule")));
        }
    }
    let horizon = *rounds.last().expect("nonempty");
    Ok(checkpoints(horizon)
        .into_iter()
        .map(|t| {
            let vals: Vec<f64> = traces.iter().map(|tr| tr.regret_at(t)).collect();
            SummaryRow {
                series: series.to_string(),
                t,
                mean: vals.iter().sum::<f64>() / vals.len() as f64,
                min: vals.iter().copied().fold(f64::INFINITY, f64::min),
                max: vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            }
        })
        .collect())
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = format!("{SUMMARY_HEADER}\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{}", r.series, r.t, r.mean, r.min, r.max);
    }
    out
}

pub fn parse_summary_csv(text: &str) -> Result<Vec<SummaryRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(SUMMARY_HEADER) {
        return Err(Error::Aggregation("unexpected summary header".into()));
    }
    lines
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            let bad = || Error::Aggregation(format!("malformed summary row {line:?}"));
            if f.len() != 5 {
                return Err(bad());
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
            Ok(SummaryRow {
                series: f[0].to_string(),
                t: f[1].parse().map_err(|_| bad())?,
                mean: num(f[2])?,
                min: num(f[3])?,
                max: num(f[4])?,
            })
        })
        .collect()
}

pub fn totals(s: &SeriesResult) -> TotalsRow {
    let secs: Vec<f64> = s.walls.iter().map(|w| w.as_secs_f64()).collect();
    TotalsRow {
        series: s.name.clone(),
        ell: s.ell,
        replications: s.traces.len(),
        mean_evals_per_round: s.mean_evals_per_round(),
        total_evals: s.traces.iter().map(RegretTrace::total_evals).sum(),
        mean_wall_s: secs.iter().sum::<f64>() / secs.len() as f64,
        min_wall_s: secs.iter().copied().fold(f64::INFINITY, f64::min),
        max_wall_s: secs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean_final_regret: s.mean_final_regret(),
    }
}

pub fn totals_csv(rows: &[TotalsRow]) -> String {
    let mut out = format!("{TOTALS_HEADER}\n");
    for r in rows {
        let ell = r.ell.map_or(String::new(), |l| l.to_string());
        let _ = writeln!(
            out,
            "{},{ell},{},{},{},{},{},{},{}",
            r.series,
            r.replications,
            r.mean_evals_per_round,
            r.total_evals,
            r.mean_wall_s,
            r.min_wall_s,
            r.max_wall_s,
            r.mean_final_regret
        );
    }
    out
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Directory holding one series' raw traces.
pub fn raw_dir(dir: &Path, experiment: &str, series: &str) -> std::path::PathBuf {
    dir.join("raw").join(format!("{experiment}-{series}"))
}

/// Reads back `replications` raw traces of one series.
pub fn read_raw_traces(dir: &Path, experiment: &str, series: &str, replications: usize) -> Result<Vec<RegretTrace>> {
    (0..replications)
        .map(|rep| {
            let path = raw_dir(dir, experiment, series).join(format!("{rep}.csv"));
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            RegretTrace::from_csv(&text)
        })
        .collect()
}

/// Writes raw traces, summaries and metadata under `dir`.
pub fn write_report(report: &ExperimentReport, dir: &Path) -> Result<()> {
    let exp = report.config.experiment.name();
    let mut summary = Vec::new();
    let mut total_rows = Vec::new();
    for s in &report.series {
        let raw = raw_dir(dir, exp, &s.name);
        for (rep, tr) in s.traces.iter().enumerate() {
            write(&raw.join(format!("{rep}.csv")), &tr.to_csv())?;
        }
        for (rep, ns) in s.nonsep.iter().enumerate() {
            if let Some(ns) = ns {
                let mut out = String::from("t,nonsep_count,reference\n");
                for (i, c) in ns.counts.iter().enumerate() {
                    let t = (i + 1) as f64;
                    let _ = writeln!(out, "{},{c},{}", i + 1, t.ln() / (ns.delta_min * ns.delta_min));
                }
                write(&raw.join(format!("{rep}-nonsep.csv")), &out)?;
            }
        }
        summary.extend(aggregate(&s.name, &s.traces)?);
        total_rows.push(totals(s));
    }
    write(&dir.join("summary").join(format!("{exp}.csv")), &summary_csv(&summary))?;
    write(&dir.join("summary").join(format!("{exp}-totals.csv")), &totals_csv(&total_rows))?;

    for r in &report.replications {
        let mut mu = String::from("arm,mu\n");
        for (i, x) in r.instance.mu.as_slice().iter().enumerate() {
            let _ = writeln!(mu, "{i},{x}");
        }
        write(&dir.join("instances").join(format!("{}-mu.csv", r.index)), &mu)?;
        if let Some(w) = &r.instance.weights {
            write(&dir.join("instances").join(format!("{}-weights.csv", r.index)), &w.to_csv())?;
        }
    }

    let fig1: Vec<_> = report
        .series
        .iter()
        .filter_map(|s| s.nonsep.iter().flatten().next().map(|_| s))
        .flat_map(|s| {
            s.nonsep.iter().enumerate().filter_map(move |(rep, ns)| {
                ns.as_ref().map(|ns| json!({"series": s.name, "replication": rep, "threshold": ns.threshold, "delta_min": ns.delta_min}))
            })
        })
        .collect();
    let meta = json!({
        "experiment": exp,
        "library_version": env!("CARGO_PKG_VERSION"),
        "config_hash": report.config_hash,
        "seed": report.config.seed,
        "replications": report.replications.iter().map(|r| json!({
            "index": r.index,
            "instance_seed": r.instance_seed.0,
            "algorithm_seed": r.algorithm_seed.0,
            "gap": r.margin,
            "generation_attempts": r.attempts,
        })).collect::<Vec<_>>(),
        "series": report.series.iter().map(|s| json!({
            "name": s.name,
            "algorithm": s.kind.name(),
            "ell": s.ell,
        })).collect::<Vec<_>>(),
        "fig1_references": fig1,
        "config": report.config.to_toml(),
    });
    write(&dir.join("meta.json"), &serde_json::to_string_pretty(&meta).expect("json value serializes"))
}
