use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::stats::{average_improvement, average_ranks, rank_rows, AccuracyTable, ReportGrid};
use super::EvalReport;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Json,
    Csv,
    Markdown,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            _ => Err(Error::InvalidArgument(format!("unknown report format `{s}`"))),
        }
    }
}

/// Writes `bytes` to a temporary sibling of `path` and renames it into
/// place, so readers never observe a partially written file.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(
        ".{}.tmp-{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

fn pct(v: f64) -> String {
    format!("{:.2}", 100.0 * v)
}

/// Table of `mean ± stdev` cells in percent, followed by the average
/// improvement over the plain column and the average rank per column.
pub fn render_markdown(reports: &[EvalReport]) -> Result<String> {
    let grid = ReportGrid::build(reports)?;
    let table = AccuracyTable::from_reports(reports)?;
    let mut out = String::new();

    let _ = write!(out, "| Dataset |");
    for s in &grid.strategies {
        let _ = write!(out, " {s} |");
    }
    let _ = write!(out, "\n|---|");
    for _ in &grid.strategies {
        let _ = write!(out, "---|");
    }
    out.push('\n');
    for (label, row) in grid.rows.iter().zip(&grid.cells) {
        let _ = write!(out, "| {label} |");
        for r in row {
            let _ = write!(out, " {} ± {} |", pct(r.mean), pct(r.stdev));
        }
        out.push('\n');
    }

    let _ = write!(out, "| Average improvement (%) |");
    let plain = table.column("plain");
    for j in 0..table.algorithms.len() {
        let cell = match plain {
            Some(p) => {
                let base: Vec<f64> = table.values.iter().map(|r| r[p]).collect();
                let alg: Vec<f64> = table.values.iter().map(|r| r[j]).collect();
                match average_improvement(&alg, &base) {
                    Ok(v) => format!("{v:.2}"),
                    Err(_) => "n/a".into(),
                }
            }
            None => "n/a".into(),
        };
        let _ = write!(out, " {cell} |");
    }
    out.push('\n');

    let _ = write!(out, "| Average rank |");
    for r in average_ranks(&rank_rows(&table.values)) {
        let _ = write!(out, " {r:.2} |");
    }
    out.push('\n');
    Ok(out)
}

fn render_csv(table: &AccuracyTable) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::InvalidArgument(format!("csv: {e}"));
    let mut header = vec!["dataset".to_string()];
    header.extend(table.algorithms.iter().cloned());
    w.write_record(&header).map_err(csv_err)?;
    for (d, row) in table.datasets.iter().zip(&table.values) {
        let mut rec = vec![d.clone()];
        rec.extend(row.iter().map(|v| format!("{v:?}")));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.into_inner()
        .map_err(|e| Error::InvalidArgument(format!("csv: {e}")))
}

/// Writes reports as a JSON array, a CSV accuracy matrix, or a markdown
/// table.
pub fn emit_report(reports: &[EvalReport], format: ReportFormat, path: impl AsRef<Path>) -> Result<()> {
    let bytes = match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(reports)?;
            s.push('\n');
            s.into_bytes()
        }
        ReportFormat::Csv => render_csv(&AccuracyTable::from_reports(reports)?)?,
        ReportFormat::Markdown => render_markdown(reports)?.into_bytes(),
    };
    write_atomic(path, &bytes)
}

/// Reads a report file holding either one report or an array of them.
pub fn read_reports(path: impl AsRef<Path>) -> Result<Vec<EvalReport>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        Many(Vec<EvalReport>),
        One(Box<EvalReport>),
    }
    let parsed: OneOrMany = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        msg: e.to_string(),
    })?;
    Ok(match parsed {
        OneOrMany::Many(v) => v,
        OneOrMany::One(r) => vec![*r],
    })
}

pub fn read_accuracy_csv(path: impl AsRef<Path>) -> Result<AccuracyTable> {
    let path = path.as_ref();
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))?;
    let header = r.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    let algorithms: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut datasets = Vec::new();
    let mut values = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| parse_err(line, e.to_string()))?;
        datasets.push(rec.get(0).unwrap_or_default().to_string());
        let row = rec
            .iter()
            .skip(1)
            .map(|v| v.trim().parse::<f64>().map_err(|e| parse_err(line, format!("`{v}`: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        values.push(row);
    }
    AccuracyTable::new(datasets, algorithms, values)
}
