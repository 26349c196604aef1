use std::path::Path;

use testforge_core::eval::{render_csv, render_json, render_markdown, EvalReport};

use crate::config::ReportFormat;
use crate::error::TfResult;
use crate::store::write_atomic;

pub const MARKDOWN_FILE: &str = "report.md";

/// `id` with everything outside `[A-Za-z0-9._-]` replaced by `_`.
pub fn file_safe(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') { c } else { '_' })
        .collect()
}

/// Base name (no extension) of the per-report CSV and JSON files.
pub fn report_stem(report: &EvalReport) -> String {
    format!("report_{}_{}", file_safe(&report.suite_name), file_safe(&report.subject_model_id))
}

/// Writes one report in the requested formats under `dir`.
pub fn emit_report(report: &EvalReport, formats: &[ReportFormat], dir: &Path) -> TfResult<()> {
    emit_reports(std::slice::from_ref(report), formats, dir)
}

/// Markdown goes into a single suites-by-subjects table; CSV and JSON are
/// written per report.
pub fn emit_reports(reports: &[EvalReport], formats: &[ReportFormat], dir: &Path) -> TfResult<()> {
    for format in formats {
        match format {
            ReportFormat::Markdown => write_atomic(&dir.join(MARKDOWN_FILE), render_markdown(reports).as_bytes())?,
            ReportFormat::Csv => {
                for r in reports {
                    write_atomic(&dir.join(format!("{}.csv", report_stem(r))), render_csv(r).as_bytes())?;
                }
            }
            ReportFormat::Json => {
                for r in reports {
                    write_atomic(&dir.join(format!("{}.json", report_stem(r))), render_json(r).as_bytes())?;
                }
            }
        }
    }
    Ok(())
}
