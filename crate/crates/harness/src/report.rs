//! CSV and markdown report emission. Both are pure functions of the reports.

use std::fmt::Write;

use vcod_core::metrics::MetricReport;

use crate::eval::EvalOutcome;

pub const MARKDOWN_HEADER: [&str; 6] = ["S_α↑", "F_β^w↑", "E_φ↑", "M↓", "mDic↑", "mIoU↑"];
pub const CSV_HEADER: &str = "name,frames,s_alpha,f_beta_w,e_phi,mae,m_dice,m_iou";

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub label: String,
    pub report: MetricReport,
}

/// Per-sequence rows followed by an `overall` row.
pub fn rows(outcome: &EvalOutcome) -> Vec<ReportRow> {
    outcome
        .sequences
        .iter()
        .map(|s| ReportRow {
            label: s.name.clone(),
            report: s.report,
        })
        .chain(std::iter::once(ReportRow {
            label: "overall".into(),
            report: outcome.overall,
        }))
        .collect()
}

/// Three decimals as in published tables; negative zero prints as `0.000`.
pub fn fixed3(v: f64) -> String {
    format!("{:.3}", v + 0.0)
}

pub fn markdown_row(label: &str, values: [f64; 6]) -> String {
    let cells: Vec<String> = values.iter().map(|&v| fixed3(v)).collect();
    format!("| {label} | {} |", cells.join(" | "))
}

pub fn markdown(rows: &[ReportRow]) -> String {
    let mut out = format!("| Sequence | {} |\n", MARKDOWN_HEADER.join(" | "));
    out.push_str(&format!("|---|{}\n", "---:|".repeat(6)));
    for r in rows {
        out.push_str(&markdown_row(&r.label, r.report.as_array()));
        out.push('\n');
    }
    out
}

pub fn csv(rows: &[ReportRow]) -> String {
    let mut out = format!("{CSV_HEADER}\n");
    for r in rows {
        let label = if r.label.contains([',', '"', '\n']) {
            format!("\"{}\"", r.label.replace('"', "\"\""))
        } else {
            r.label.clone()
        };
        write!(out, "{label},{}", r.report.frame_count).expect("writing to a String");
        for v in r.report.as_array() {
            write!(out, ",{:.6}", v + 0.0).expect("writing to a String");
        }
        out.push('\n');
    }
    out
}
