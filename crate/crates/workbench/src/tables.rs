//! Delimited-text exports: training records, similarity tables and
//! convergence tables.

use rhirl_core::evaluation::{ConvergenceTable, GroupReport};
use rhirl_core::rhirl::TrainingRecord;

use crate::error::{Result, WorkbenchError};

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv is utf-8")
}

fn num(v: f64) -> String {
    format!("{v}")
}

pub fn training_csv(record: &TrainingRecord) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["iteration", "log_likelihood", "step_size_used"]).unwrap();
    for r in &record.iterations {
        w.write_record([r.iteration.to_string(), num(r.log_likelihood), num(r.step_size_used)])
            .unwrap();
    }
    finish(w)
}

pub const SUMMARY_HEADER: [&str; 6] = ["Group", "Mean", "Std. Dev", "Median", "Min", "Max"];

/// One row per report, in the given order. Std. Dev is the population value.
pub fn summary_csv(reports: &[GroupReport]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SUMMARY_HEADER).unwrap();
    for r in reports {
        let s = &r.stats;
        w.write_record([
            r.group_id.clone(),
            num(s.mean),
            num(s.std_dev),
            num(s.median),
            num(s.min),
            num(s.max),
        ])
        .unwrap();
    }
    finish(w)
}

pub fn similarities_csv(report: &GroupReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["policy_trace_id", "player_trace_id", "jaccard"]).unwrap();
    for s in &report.similarities {
        w.write_record([s.policy_trace_id.clone(), s.player_trace_id.clone(), num(s.jaccard)])
            .unwrap();
    }
    finish(w)
}

/// `iteration,h=1,h=2,...`; a blank cell where a series has ended.
pub fn convergence_csv(table: &ConvergenceTable) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["iteration".to_string()];
    header.extend(table.horizons.iter().map(|h| format!("h={h}")));
    w.write_record(&header).unwrap();
    for (i, row) in table.rows.iter().enumerate() {
        let mut rec = vec![i.to_string()];
        rec.extend(row.iter().map(|v| v.map(num).unwrap_or_default()));
        w.write_record(&rec).unwrap();
    }
    finish(w)
}

/// Inverse of [`convergence_csv`]; group and `β` are supplied by the caller.
pub fn parse_convergence_csv(text: &str, group: &str, beta: f64) -> Result<ConvergenceTable> {
    let bad = |m: String| WorkbenchError::Invalid(format!("convergence table: {m}"));
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let headers = r.headers().map_err(|e| bad(e.to_string()))?.clone();
    if headers.get(0) != Some("iteration") {
        return Err(bad("first column must be `iteration`".to_string()));
    }
    let horizons = headers
        .iter()
        .skip(1)
        .map(|h| {
            h.strip_prefix("h=")
                .and_then(|v| v.parse::<usize>().ok())
                .ok_or_else(|| bad(format!("bad column {h:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let row = rec
            .iter()
            .skip(1)
            .map(|c| {
                if c.is_empty() {
                    Ok(None)
                } else {
                    c.parse::<f64>().map(Some).map_err(|_| bad(format!("bad value {c:?}")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        if row.len() != horizons.len() {
            return Err(bad("ragged row".to_string()));
        }
        rows.push(row);
    }
    Ok(ConvergenceTable {
        group: group.to_string(),
        beta,
        horizons,
        rows,
    })
}
