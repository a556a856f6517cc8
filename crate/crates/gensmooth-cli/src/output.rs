//! Serialization of results: CSV tables, JSON documents, and SVG plots.

use crate::config::SCHEMA_VERSION;
use gensmooth::experiments::{CouplingReport, FailureReport, RateTable};
use gensmooth::numerics::fmt_float;
use serde::Serialize;
use std::fmt::Write;
use std::path::Path;

/// Wrapper written around every JSON result so `report` can identify it.
#[derive(Debug, Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub schema_version: u32,
    pub command: &'a str,
    pub name: &'a str,
    pub seed: u64,
    pub result: &'a T,
}

impl<'a, T: Serialize> Envelope<'a, T> {
    pub fn new(command: &'a str, name: &'a str, seed: u64, result: &'a T) -> Self {
        Envelope {
            schema_version: SCHEMA_VERSION,
            command,
            name,
            seed,
            result,
        }
    }
}

/// Pretty JSON with a trailing newline. Floats use the shortest
/// representation that round-trips.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("results serialize");
    s.push('\n');
    s
}

/// One row per algorithm of a divergence study.
pub fn failure_csv(reports: &[FailureReport]) -> String {
    let mut out = String::from("algorithm,empirical,empirical_se,n,bound,t0,delta,pass\n");
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.algorithm,
            fmt_float(r.empirical.value),
            fmt_float(r.empirical.se),
            r.empirical.n,
            fmt_float(r.bound),
            fmt_float(r.t0),
            fmt_float(r.delta),
            r.pass
        );
    }
    out
}

/// Violation counts of the coupling check.
pub fn coupling_csv(c: &CouplingReport) -> String {
    format!(
        "paths,coupling_violations,bad_step_violations,pre_escape_violations\n{},{},{},{}\n",
        c.paths, c.coupling_violations, c.bad_step_violations, c.pre_escape_violations
    )
}

/// `(T, quantile)` pairs for plotting.
pub fn plot_csv(table: &RateTable) -> String {
    let mut out = String::from("T,quantile\n");
    for r in &table.rows {
        let _ = writeln!(out, "{},{}", r.horizon, fmt_float(r.quantile.value));
    }
    out
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// A log-log line plot of positive points with decade grid lines.
///
/// Points with a non-positive coordinate are dropped.
pub fn svg_loglog(points: &[(f64, f64)], title: &str, x_label: &str, y_label: &str) -> String {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.log10(), y.log10()))
        .collect();
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    if !pts.is_empty() {
        let (mut x0, mut x1, mut y0, mut y1) = (
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
        );
        for &(x, y) in &pts {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        let (x0, x1) = (x0.floor(), x1.ceil().max(x0.floor() + 1.0));
        let (y0, y1) = (y0.floor(), y1.ceil().max(y0.floor() + 1.0));
        let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
        let py = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);
        for e in (x0 as i32)..=(x1 as i32) {
            let x = px(f64::from(e));
            let _ = writeln!(
                out,
                r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#ddd"/><text x="{x:.2}" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="11">1e{e}</text>"##,
                MARGIN,
                HEIGHT - MARGIN,
                HEIGHT - MARGIN + 16.0
            );
        }
        for e in (y0 as i32)..=(y1 as i32) {
            let y = py(f64::from(e));
            let _ = writeln!(
                out,
                r##"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end" font-family="sans-serif" font-size="11">1e{e}</text>"##,
                MARGIN,
                WIDTH - MARGIN,
                MARGIN - 6.0,
                y + 4.0
            );
        }
        let path: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let _ = writeln!(
            out,
            r##"<polyline fill="none" stroke="#1f77b4" stroke-width="2" points="{}"/>"##,
            path.join(" ")
        );
        for &(x, y) in &pts {
            let _ = writeln!(
                out,
                r##"<circle cx="{:.2}" cy="{:.2}" r="3" fill="#1f77b4"/>"##,
                px(x),
                py(y)
            );
        }
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="13">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 14.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" text-anchor="middle" font-family="sans-serif" font-size="13" transform="rotate(-90 16 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    );
    out.push_str("</svg>\n");
    out
}

/// Write `contents` to `dir/file`, creating `dir` if needed.
pub fn write_file(dir: &Path, file: &str, contents: &str) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(file), contents)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svg_has_one_marker_per_point() {
        let svg = svg_loglog(
            &[(256.0, 1e-2), (512.0, 5e-3), (1024.0, 2.4e-3)],
            "a < b",
            "T",
            "q",
        );
        assert_eq!(svg.matches("<circle").count(), 3);
        assert!(svg.contains("a &lt; b"));
        assert!(svg.ends_with("</svg>\n"));
    }

    #[test]
    fn svg_tolerates_empty_input() {
        let svg = svg_loglog(&[(0.0, 1.0)], "t", "x", "y");
        assert!(!svg.contains("<polyline"));
    }

    #[test]
    fn csv_uses_lf_and_header() {
        let c = CouplingReport {
            paths: 3,
            coupling_violations: 0,
            bad_step_violations: 0,
            pre_escape_violations: 0,
        };
        let s = coupling_csv(&c);
        assert!(!s.contains('\r'));
        assert_eq!(s.lines().count(), 2);
    }
}
