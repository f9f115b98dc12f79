//! Report rendering: a JSON document and an aligned text table.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;

use crate::numfmt::{format_significant, round_json};

use super::run::Report;
use super::sweep::{ConvergenceReport, SweepResult};

/// Significant digits in documents.
pub const DOCUMENT_DIGITS: usize = 12;
/// Significant digits in tables.
pub const TABLE_DIGITS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Document,
    Table,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "document" | "json" => Ok(ReportFormat::Document),
            "table" | "text" => Ok(ReportFormat::Table),
            _ => Err(format!("unknown format '{s}' (expected json or table)")),
        }
    }
}

/// Pretty JSON with every float rounded to 12 significant digits.
pub fn to_document<T: Serialize>(value: &T) -> String {
    let mut v = serde_json::to_value(value).expect("report types serialize to JSON");
    round_json(&mut v, DOCUMENT_DIGITS);
    let mut s = serde_json::to_string_pretty(&v).expect("JSON values serialize");
    s.push('\n');
    s
}

pub fn parse_report(text: &str) -> Result<Report, serde_json::Error> {
    serde_json::from_str(text)
}

fn num(x: f64) -> String {
    format_significant(x, TABLE_DIGITS)
}

/// Left-aligned columns separated by two spaces.
fn render_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: &[String]| {
        let mut s = String::new();
        for (i, (cell, w)) in cells.iter().zip(&widths).enumerate() {
            if i + 1 == cells.len() {
                s.push_str(cell);
            } else {
                let _ = write!(s, "{cell:<w$}  ");
            }
        }
        s.trim_end().to_string()
    };
    let mut out = String::new();
    out.push_str(&line(&header.iter().map(|h| h.to_string()).collect::<Vec<_>>()));
    out.push('\n');
    out.push_str(&line(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>()));
    out.push('\n');
    for row in rows {
        out.push_str(&line(row));
        out.push('\n');
    }
    out
}

pub fn emit_report(r: &Report, format: ReportFormat) -> String {
    match format {
        ReportFormat::Document => to_document(r),
        ReportFormat::Table => report_table(r),
    }
}

fn report_table(r: &Report) -> String {
    let a = &r.aggregates;
    let e = &r.engine;
    let mut out = String::new();
    let _ = writeln!(out, "scenario:  {}", r.name);
    let _ = writeln!(out, "ambient:   {} ({:?}, dim {})", e.ambient, e.ambient_kind, e.ambient_dim);
    let _ = writeln!(out, "immersion: {} (dim {})", e.immersion, e.dim);
    let _ = writeln!(out, "points:    {} evaluated, {} failed", a.evaluated_points, a.failed_points);
    let _ = writeln!(
        out,
        "|H|:       max {}  min {}  cmc {}",
        num(a.max_h),
        num(a.min_h),
        if a.cmc.is_cmc { "yes" } else { "no" }
    );
    let _ = writeln!(out, "residual:  max {}  mean {}", num(a.max_residual_general), num(a.mean_residual_general));
    let _ = writeln!(out, "verdict:   {:?}", a.verdict);
    out.push('\n');
    let expected = |label: &str| r.config.expect.get(label).cloned().unwrap_or_default();
    let rows: Vec<Vec<String>> = r
        .checks
        .iter()
        .map(|c| {
            let (name, value) = match &c.headline {
                Some(h) => (h.name.clone(), num(h.value)),
                None => (String::new(), String::new()),
            };
            vec![c.label.clone(), c.op.clone(), c.verdict.clone(), name, value, expected(&c.label)]
        })
        .collect();
    out.push_str(&render_table(&["check", "op", "verdict", "quantity", "value", "expected"], &rows));
    if let Some(x) = &r.expectation {
        out.push('\n');
        if x.matched {
            out.push_str("expectations: all met\n");
        } else {
            for m in &x.mismatches {
                let _ = writeln!(out, "expectation failed: {} expected {} got {}", m.label, m.expected, m.actual);
            }
        }
    }
    out
}

pub fn emit_sweep(s: &SweepResult, format: ReportFormat) -> String {
    match format {
        ReportFormat::Document => to_document(s),
        ReportFormat::Table => {
            let mut out = String::new();
            let _ = writeln!(out, "scenario:  {}", s.scenario);
            let _ = writeln!(out, "sweep:     {} over [{}, {}], objective {}", s.param, num(s.lo), num(s.hi), s.objective);
            out.push('\n');
            let rows: Vec<Vec<String>> = s
                .samples
                .iter()
                .map(|x| vec![num(x.value), num(x.objective), format!("{:?}", x.verdict), x.failed_points.to_string()])
                .collect();
            out.push_str(&render_table(&[&s.param, "objective", "verdict", "failed"], &rows));
            out.push('\n');
            let rows: Vec<Vec<String>> = s
                .roots
                .iter()
                .map(|x| vec![format!("{:.12}", x.value), format!("{:?}", x.kind), num(x.max_h), format!("{:?}", x.verdict)])
                .collect();
            out.push_str(&render_table(&["root", "kind", "max |H|", "verdict"], &rows));
            for n in &s.notes {
                let _ = writeln!(out, "note: {n}");
            }
            out
        }
    }
}

pub fn emit_convergence(c: &ConvergenceReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Document => to_document(c),
        ReportFormat::Table => {
            let mut out = String::new();
            let _ = writeln!(out, "scenario:  {}", c.scenario);
            let steps: Vec<String> = c.steps.iter().map(|h| num(*h)).collect();
            let _ = writeln!(out, "steps:     {}", steps.join(", "));
            out.push('\n');
            let rows: Vec<Vec<String>> = c
                .points
                .iter()
                .map(|p| {
                    let u: Vec<String> = p.u.iter().map(|x| num(*x)).collect();
                    let finest = p.errors.last().map_or(String::new(), |e| num(e.error));
                    let order = p.observed_order.map_or_else(|| "-".to_string(), num);
                    vec![u.join(", "), finest, order, p.error.clone().unwrap_or_default()]
                })
                .collect();
            out.push_str(&render_table(&["point", "finest error", "order", "error"], &rows));
            let _ = writeln!(out, "\nminimum observed order: {}", c.min_order.map_or_else(|| "-".to_string(), num));
            for n in &c.notes {
                let _ = writeln!(out, "note: {n}");
            }
            out
        }
    }
}
