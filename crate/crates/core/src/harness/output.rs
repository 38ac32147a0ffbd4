//! CSV files written by the harness.

use std::path::Path;

use crate::diagnostics::{aggregate_traces, SummaryRow};
use crate::error::{Error, Result};
use crate::scheduler::Trace;

pub const SUMMARY_HEADER: [&str; 5] = ["batch", "method", "mean", "stderr", "n_trials"];

/// 17 significant digits, enough to round-trip any `f64`.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            path: path.into(),
            row: 0,
            message: format!("{other:?}"),
        },
    }
}

/// One row per selection: `method, trial, t, batch, x_1..x_d, y,
/// best_so_far, simple_regret` (empty regret when the optimum is unknown).
pub fn write_trace(path: &Path, traces: &[(usize, Trace)]) -> Result<()> {
    let dim = traces.first().map_or(0, |(_, t)| t.dim);
    if traces.iter().any(|(_, t)| t.dim != dim) {
        return Err(Error::InvalidArgument("traces have different input dimensions".into()));
    }
    let err = csv_err(path);
    let mut w = csv::Writer::from_path(path).map_err(&err)?;
    let mut header: Vec<String> = ["method", "trial", "t", "batch"].map(String::from).to_vec();
    header.extend((1..=dim).map(|i| format!("x_{i}")));
    header.extend(["y", "best_so_far", "simple_regret"].map(String::from));
    w.write_record(&header).map_err(&err)?;
    for (trial, trace) in traces {
        for r in &trace.records {
            let mut row = vec![
                trace.method.clone(),
                trial.to_string(),
                r.t.to_string(),
                r.batch.to_string(),
            ];
            row.extend(r.x.iter().map(|v| num(*v)));
            row.push(num(r.y));
            row.push(num(r.best_so_far));
            row.push(r.simple_regret.map(num).unwrap_or_default());
            w.write_record(&row).map_err(&err)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Per-method, per-batch mean and standard error of the simple regret (or of
/// the best value when the optimum is unknown).
pub fn summarize(traces: &[(usize, Trace)]) -> Result<Vec<SummaryRow>> {
    let mut methods: Vec<&str> = traces.iter().map(|(_, t)| t.method.as_str()).collect();
    methods.sort_unstable();
    methods.dedup();
    let mut rows = Vec::new();
    for m in methods {
        let recs: Vec<&[_]> = traces
            .iter()
            .filter(|(_, t)| t.method == m)
            .map(|(_, t)| t.records.as_slice())
            .collect();
        rows.extend(aggregate_traces(m, &recs)?);
    }
    Ok(rows)
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let err = csv_err(path);
    let mut w = csv::Writer::from_path(path).map_err(&err)?;
    w.write_record(SUMMARY_HEADER).map_err(&err)?;
    for r in rows {
        w.write_record([
            r.batch.to_string(),
            r.method.clone(),
            num(r.mean),
            num(r.stderr),
            r.n_trials.to_string(),
        ])
        .map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let err = csv_err(path);
    let mut r = csv::Reader::from_path(path).map_err(&err)?;
    let header = r.headers().map_err(&err)?.clone();
    let mut idx = [0usize; 5];
    for (k, name) in SUMMARY_HEADER.iter().enumerate() {
        idx[k] = header.iter().position(|h| h == *name).ok_or_else(|| Error::Parse {
            path: path.into(),
            row: 1,
            message: format!("missing column {name:?}"),
        })?;
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(&err)?;
        let line = i + 2;
        let bad = |c: &str| Error::Parse {
            path: path.into(),
            row: line,
            message: format!("bad {c} value"),
        };
        let get = |k: usize| rec.get(idx[k]).unwrap_or("");
        rows.push(SummaryRow {
            batch: get(0).parse().map_err(|_| bad("batch"))?,
            method: get(1).to_string(),
            mean: get(2).parse().map_err(|_| bad("mean"))?,
            stderr: get(3).parse().map_err(|_| bad("stderr"))?,
            n_trials: get(4).parse().map_err(|_| bad("n_trials"))?,
        });
    }
    Ok(rows)
}
