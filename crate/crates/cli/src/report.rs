//! Benchmark rows, their summary and the derived files.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{io_err, CliError, Result};
use crate::io::create;

pub const ROWS_HEADER: &str = "setting,replicate,method,h2,lo,hi,status,wall_time_s,support_size";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Failed,
}

/// One estimator call in one benchmark cell. Failed rows have no estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub setting: String,
    pub replicate: usize,
    pub method: String,
    pub h2: Option<f64>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub status: Status,
    pub wall_time_s: f64,
    pub support_size: Option<usize>,
}

/// Plot-ready record: one successful estimate with the truth of its cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LongRow {
    pub setting: String,
    pub method: String,
    pub replicate: usize,
    pub h2: f64,
    pub true_h2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailureRow {
    pub setting: String,
    pub replicate: usize,
    pub method: String,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub setting: String,
    pub method: String,
    pub n_ok: usize,
    pub n_failed: usize,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub mean_width: Option<f64>,
    pub failure_rate: f64,
}

/// Per `(setting, method)` statistics over the rows, groups in order of first
/// appearance. `sd` uses divisor `k - 1` (0 for a single estimate);
/// `mean_width` averages `hi - lo` over successful rows with an interval.
pub fn summarize(rows: &[Row]) -> Vec<SummaryRow> {
    let mut order: Vec<(String, String)> = Vec::new();
    let mut groups: HashMap<(String, String), Vec<&Row>> = HashMap::new();
    for row in rows {
        let key = (row.setting.clone(), row.method.clone());
        groups
            .entry(key.clone())
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(row);
    }
    order
        .into_iter()
        .map(|key| {
            let members = &groups[&key];
            let values: Vec<f64> = members.iter().filter_map(|r| r.h2).collect();
            let widths: Vec<f64> = members
                .iter()
                .filter(|r| r.status == Status::Ok)
                .filter_map(|r| Some(r.hi? - r.lo?))
                .collect();
            let n_ok = values.len();
            let n_failed = members.len() - n_ok;
            let mean = (n_ok > 0).then(|| values.iter().sum::<f64>() / n_ok as f64);
            let sd = mean.map(|m| {
                if n_ok < 2 {
                    0.0
                } else {
                    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n_ok - 1) as f64).sqrt()
                }
            });
            let mean_width = (!widths.is_empty()).then(|| widths.iter().sum::<f64>() / widths.len() as f64);
            SummaryRow {
                setting: key.0,
                method: key.1,
                n_ok,
                n_failed,
                mean,
                sd,
                mean_width,
                failure_rate: n_failed as f64 / members.len() as f64,
            }
        })
        .collect()
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"))
}

/// Aligned plain-text rendering of a summary.
pub fn render_table(summary: &[SummaryRow]) -> String {
    let header = ["setting", "method", "ok", "failed", "mean", "sd", "width", "fail_rate"];
    let body: Vec<[String; 8]> = summary
        .iter()
        .map(|s| {
            [
                s.setting.clone(),
                s.method.clone(),
                s.n_ok.to_string(),
                s.n_failed.to_string(),
                cell(s.mean),
                cell(s.sd),
                cell(s.mean_width),
                format!("{:.3}", s.failure_rate),
            ]
        })
        .collect();
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in &body {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let mut line = |cells: Vec<&str>| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(k, (c, w))| if k < 2 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(header.to_vec());
    for row in &body {
        line(row.iter().map(String::as_str).collect());
    }
    out
}

pub fn write_csv_to<W: Write, T: Serialize>(out: W, records: &[T], header: &[&str]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(header)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(io_err("csv output"))?;
    Ok(())
}

pub fn write_csv<T: Serialize>(path: &Path, records: &[T], header: &[&str]) -> Result<()> {
    write_csv_to(create(path)?, records, header)
}

pub const SUMMARY_HEADER: [&str; 8] = ["setting", "method", "n_ok", "n_failed", "mean", "sd", "mean_width", "failure_rate"];
pub const LONG_HEADER: [&str; 5] = ["setting", "method", "replicate", "h2", "true_h2"];
pub const FAILURE_HEADER: [&str; 4] = ["setting", "replicate", "method", "error"];

pub fn rows_header() -> Vec<&'static str> {
    ROWS_HEADER.split(',').collect()
}

fn read_csv<R: Read, T: DeserializeOwned>(input: R, source: &str, expected: &[&str]) -> Result<Vec<T>> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(input);
    let header = rdr.headers()?.clone();
    if header.iter().ne(expected.iter().copied()) {
        return Err(CliError::Parse {
            source_name: source.to_string(),
            line: 1,
            column: 0,
            message: format!("expected header '{}'", expected.join(",")),
        });
    }
    let mut out = Vec::new();
    for (k, rec) in rdr.deserialize().enumerate() {
        out.push(rec.map_err(|e: csv::Error| CliError::Parse {
            source_name: source.to_string(),
            line: e.position().map_or(k + 2, |p| p.line() as usize),
            column: 0,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Parses a rows file, checking that status and estimate agree on every row.
pub fn parse_rows<R: Read>(input: R, source: &str) -> Result<Vec<Row>> {
    let rows: Vec<Row> = read_csv(input, source, &rows_header())?;
    for (k, r) in rows.iter().enumerate() {
        let consistent = match r.status {
            Status::Ok => r.h2.is_some(),
            Status::Failed => r.h2.is_none() && r.lo.is_none() && r.hi.is_none(),
        };
        if !consistent {
            return Err(CliError::Parse {
                source_name: source.to_string(),
                line: k + 2,
                column: 4,
                message: "status and estimate disagree".into(),
            });
        }
    }
    Ok(rows)
}

pub fn read_rows(path: &Path) -> Result<Vec<Row>> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    parse_rows(std::io::BufReader::new(file), &path.display().to_string())
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    read_csv(std::io::BufReader::new(file), &path.display().to_string(), &SUMMARY_HEADER)
}
