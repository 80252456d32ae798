//! CSV rows, the summary table and overlay rendering.

use lesionseg::metrics::{CaseMetrics, MetricReport, METRIC_NAMES};
use lesionseg::{BinaryMask, GrayImage};

pub const CSV_HEADER: &str = "case,method,dsc,ji,hd_mm,pr,re";

/// Gray level of the predicted contour in overlays.
pub const PRED_LEVEL: u8 = 255;
/// Gray level of the reference contour in overlays.
pub const TRUTH_LEVEL: u8 = 0;

pub fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

/// Keep free text inside a single CSV cell.
pub fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| match c {
            ',' => ';',
            '\n' | '\r' => ' ',
            c => c,
        })
        .collect()
}

pub fn metrics_row(case: &str, method: &str, m: &CaseMetrics) -> String {
    let cells: Vec<String> = m.as_array().iter().map(|&v| cell(v)).collect();
    format!(
        "{},{},{}",
        sanitize(case),
        sanitize(method),
        cells.join(",")
    )
}

/// Names of the metrics that came out undefined.
pub fn undefined(m: &CaseMetrics) -> Vec<&'static str> {
    m.as_array()
        .iter()
        .zip(METRIC_NAMES)
        .filter(|(v, _)| v.is_none())
        .map(|(_, n)| n)
        .collect()
}

pub fn summary_cells(report: Option<&MetricReport>) -> Vec<String> {
    (0..METRIC_NAMES.len())
        .map(|i| {
            report
                .and_then(|r| r.summary[i])
                .map(|s| s.to_string())
                .unwrap_or_default()
        })
        .collect()
}

/// Fixed-width table with one row per method and mean±std per metric.
pub fn summary_table(rows: &[(String, Option<MetricReport>)]) -> String {
    let head = ["Method", "DSC", "JI", "HD (mm)", "PR", "RE"];
    let mut lines = vec![head
        .to_vec()
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>()];
    for (name, report) in rows {
        let mut l = vec![name.clone()];
        l.extend(summary_cells(report.as_ref()).into_iter().map(|c| {
            if c.is_empty() {
                "-".into()
            } else {
                c
            }
        }));
        lines.push(l);
    }
    let widths: Vec<usize> = (0..head.len())
        .map(|c| {
            lines
                .iter()
                .map(|l| l[c].chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for l in &lines {
        let padded: Vec<String> = l
            .iter()
            .zip(&widths)
            .map(|(s, &w)| format!("{s}{}", " ".repeat(w - s.chars().count())))
            .collect();
        out.push_str(padded.join("  ").trim_end());
        out.push('\n');
    }
    out
}

/// The image rescaled into `[32, 223]` with 1-pixel contours on top: the
/// reference in black, the prediction in white.
pub fn overlay(img: &GrayImage, pred: &BinaryMask, truth: Option<&BinaryMask>) -> Vec<u8> {
    let w = img.width();
    let mut out: Vec<u8> = img
        .pixels()
        .iter()
        .map(|v| (32.0 + v * 191.0).round() as u8)
        .collect();
    if let Some(t) = truth {
        for (i, j) in t.boundary() {
            out[j * w + i] = TRUTH_LEVEL;
        }
    }
    for (i, j) in pred.boundary() {
        out[j * w + i] = PRED_LEVEL;
    }
    out
}
