//! Report tables: one row per class, an IoU/OA column pair per method, and a
//! closing Overall row.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{HarnessError, Result};
use crate::eval::RunRecord;

pub const BASELINE_COLUMN: &str = "SAM (Baseline)";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Markdown,
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(HarnessError::config(format!("unknown report format {other:?}"))),
        }
    }
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Markdown => "md",
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        }
    }
}

/// Header and rows of the report table, values already formatted.
pub fn report_table(record: &RunRecord) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header = vec!["Dataset".to_string(), "Class".to_string()];
    if record.baseline.is_some() {
        header.push(format!("{BASELINE_COLUMN} IoU"));
        header.push(format!("{BASELINE_COLUMN} OA"));
    }
    for s in &record.strategies {
        header.push(format!("{} IoU", s.strategy.display()));
        header.push(format!("{} OA", s.strategy.display()));
    }

    let fmt = |v: f64| format!("{v:.3}");
    let missing = || "-".to_string();
    let mut rows = Vec::new();
    for class in &record.classes {
        let mut row = vec![record.dataset.clone(), class.label.clone()];
        if let Some(b) = &record.baseline {
            match b.classes.iter().find(|c| c.class_id == class.id) {
                Some(c) => row.extend([fmt(c.iou), fmt(c.oa)]),
                None => row.extend([missing(), missing()]),
            }
        }
        for s in &record.strategies {
            match s.report.classes.iter().find(|c| c.class_id == class.id) {
                Some(c) => row.extend([fmt(c.iou), fmt(c.oa)]),
                None => row.extend([missing(), missing()]),
            }
        }
        rows.push(row);
    }
    let mut overall = vec![record.dataset.clone(), "Overall".to_string()];
    if let Some(b) = &record.baseline {
        overall.extend([fmt(b.best_iou), fmt(b.best_oa)]);
    }
    for s in &record.strategies {
        overall.extend([fmt(s.report.miou), fmt(s.report.oa)]);
    }
    rows.push(overall);
    (header, rows)
}

pub fn emit_report(record: &RunRecord, format: ReportFormat) -> Result<Vec<u8>> {
    match format {
        ReportFormat::Json => {
            let mut out = serde_json::to_vec_pretty(record)?;
            out.push(b'\n');
            Ok(out)
        }
        ReportFormat::Csv => {
            let (header, rows) = report_table(record);
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(&header)?;
            for r in &rows {
                w.write_record(r)?;
            }
            w.into_inner()
                .map_err(|e| HarnessError::config(format!("csv buffer: {e}")))
        }
        ReportFormat::Markdown => {
            let (header, rows) = report_table(record);
            let mut out = String::new();
            let line = |cells: &[String]| format!("| {} |\n", cells.join(" | "));
            out.push_str(&line(&header));
            let rule: Vec<String> = header
                .iter()
                .enumerate()
                .map(|(i, _)| if i < 2 { "---".to_string() } else { "---:".to_string() })
                .collect();
            out.push_str(&line(&rule));
            for r in &rows {
                out.push_str(&line(r));
            }
            if !record.failures.is_empty() {
                let _ = write!(out, "\n{} item(s) failed:\n\n", record.failures.len());
                for f in &record.failures {
                    let _ = writeln!(out, "- `{}`: {}", f.item, f.error.replace('\n', " "));
                }
            }
            Ok(out.into_bytes())
        }
    }
}

/// Parses a JSON report back into a record.
pub fn parse_json_report(bytes: &[u8]) -> Result<RunRecord> {
    Ok(serde_json::from_slice(bytes)?)
}
