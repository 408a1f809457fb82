//! Result rows, CSV and SVG output.
//!
//! CSV files have the fixed header `scheme,sweep,x,fer,ci_half,n_trials,wall_ms`
//! and follow RFC 4180: a field is quoted only if it contains a comma, a quote
//! or a line break. Analytic rows leave `ci_half` and `n_trials` empty, and
//! `wall_ms` is empty unless timing was requested.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::BenchError;

pub const CSV_HEADER: &str = "scheme,sweep,x,fer,ci_half,n_trials,wall_ms";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scheme: String,
    /// Name of the swept variable.
    pub sweep: String,
    pub x: f64,
    pub fer: f64,
    pub ci_half: Option<f64>,
    pub n_trials: Option<u64>,
    pub wall_ms: Option<u64>,
}

impl ResultRow {
    pub fn is_analytic(&self) -> bool {
        self.n_trials.is_none()
    }
}

pub fn csv_string(rows: &[ResultRow]) -> Result<String, BenchError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let body = String::from_utf8(w.into_inner().map_err(|e| BenchError::Io(e.to_string()))?)
        .expect("csv output is utf-8");
    Ok(format!("{CSV_HEADER}\n{body}"))
}

pub fn write_csv(path: &Path, rows: &[ResultRow]) -> Result<(), BenchError> {
    std::fs::write(path, csv_string(rows)?).map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))
}

pub fn read_csv(path: &Path) -> Result<Vec<ResultRow>, BenchError> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    if header.join(",") != CSV_HEADER {
        return Err(BenchError::Io(format!("{}: unexpected header {header:?}", path.display())));
    }
    r.deserialize().map(|row| row.map_err(BenchError::from)).collect()
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];
const W: f64 = 720.0;
const H: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn tick_label(v: f64) -> String {
    let s = format!("{:.4}", v);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

/// A log-scale plot of FER against `x`, one line per (scheme, sweep).
/// Points with FER 0 cannot be placed on a log axis and are left out.
pub fn svg_string(rows: &[ResultRow], title: &str) -> String {
    let positive = rows.iter().map(|r| r.fer).filter(|f| *f > 0.0);
    let lo_fer = positive.fold(f64::INFINITY, f64::min);
    let lo = if lo_fer.is_finite() { lo_fer.log10().floor().max(-12.0) } else { -6.0 };
    let lo = lo.min(-1.0);
    let (mut x0, mut x1) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r.x), b.max(r.x)));
    if !x0.is_finite() {
        (x0, x1) = (0.0, 1.0);
    } else if x0 == x1 {
        (x0, x1) = (x0 - 0.5, x1 + 0.5);
    }
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let px = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let py = |f: f64| TOP + (0.0 - f.log10().max(lo)) / (0.0 - lo) * ph;

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#, LEFT + pw / 2.0, escape(title));
    let _ = writeln!(s, r##"<g stroke="#dddddd" stroke-width="1">"##);
    let decades = (-lo) as i32;
    for d in 0..=decades {
        let y = TOP + d as f64 / decades as f64 * ph;
        let _ = writeln!(s, r#"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}"/>"#, LEFT + pw);
    }
    let xticks = 5;
    for i in 0..=xticks {
        let x = LEFT + i as f64 / xticks as f64 * pw;
        let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}"/>"#, TOP + ph);
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    for d in 0..=decades {
        let y = TOP + d as f64 / decades as f64 * ph;
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.2}" text-anchor="end">1e{}</text>"#, LEFT - 6.0, y + 4.0, -d);
    }
    for i in 0..=xticks {
        let v = x0 + i as f64 / xticks as f64 * (x1 - x0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.1}" text-anchor="middle">{}</text>"#, px(v), TOP + ph + 18.0, tick_label(v));
    }
    let xlabel = rows.first().map_or("x", |r| r.sweep.as_str());
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, H - 10.0, escape(xlabel));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">FER</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );

    let mut series: Vec<(String, Vec<&ResultRow>)> = Vec::new();
    for r in rows {
        let key = if rows.iter().any(|o| o.sweep != r.sweep) { format!("{} ({})", r.scheme, r.sweep) } else { r.scheme.clone() };
        match series.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(r),
            None => series.push((key, vec![r])),
        }
    }
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let dash = if pts.iter().all(|r| r.is_analytic()) { r#" stroke-dasharray="6 4""# } else { "" };
        let coords: Vec<String> =
            pts.iter().filter(|r| r.fer > 0.0).map(|r| format!("{:.2},{:.2}", px(r.x), py(r.fer))).collect();
        if coords.len() > 1 {
            let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"/>"#, coords.join(" "));
        }
        for r in pts.iter().filter(|r| r.fer > 0.0) {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, px(r.x), py(r.fer));
        }
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let lx = LEFT + pw + 12.0;
        let _ = writeln!(s, r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"{dash}/>"#, lx + 22.0);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, lx + 28.0, ly + 4.0, escape(name));
    }
    s.push_str("</svg>\n");
    s
}

pub fn write_svg(path: &Path, rows: &[ResultRow], title: &str) -> Result<(), BenchError> {
    std::fs::write(path, svg_string(rows, title)).map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))
}
