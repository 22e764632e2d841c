//! Evaluation report files: JSON (lossless) and a fixed-header CSV.

use std::path::Path;

use craniotk_core::metrics::EvaluationReport;

use crate::{Error, Result};

pub const CSV_HEADER: &str = "case_id,subset,dice,hd_mm";

pub fn report_to_json(report: &EvaluationReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

pub fn report_from_json(text: &str) -> Result<EvaluationReport> {
    serde_json::from_str(text).map_err(|e| Error::Format(format!("report: {e}")))
}

/// One row per case; an undefined HD is an empty cell.
pub fn report_to_csv(report: &EvaluationReport) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in &report.rows {
        let hd = r.hd_mm.map(|v| format!("{v:?}")).unwrap_or_default();
        s.push_str(&format!("{},{},{:?},{}\n", csv_field(&r.case_id), r.subset.name(), r.dice, hd));
    }
    s
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn write_report(report: &EvaluationReport, json_path: &Path, csv_path: &Path) -> Result<()> {
    std::fs::write(json_path, report_to_json(report)).map_err(|e| Error::io(json_path, e))?;
    std::fs::write(csv_path, report_to_csv(report)).map_err(|e| Error::io(csv_path, e))
}
