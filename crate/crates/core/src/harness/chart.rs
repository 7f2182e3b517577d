//! Minimal SVG line charts for sweep summaries: one panel for PSNR, one
//! for stalls, one polyline per scheduler mode.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scheduler::Mode;

use super::sweep::{summarize, SummaryPoint, SweepRow};

const PANEL_W: f64 = 360.0;
const PANEL_H: f64 = 240.0;
const MARGIN: f64 = 48.0;

fn color(mode: Mode) -> &'static str {
    match mode {
        Mode::QoeAware => "#1f77b4",
        Mode::Baseline => "#d62728",
    }
}

fn bounds(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn panel(
    out: &mut String,
    x0: f64,
    title: &str,
    xlabel: &str,
    points: &[SummaryPoint],
    metric: fn(&SummaryPoint) -> f64,
) {
    // Grid values are placed at equal spacing: the omega grid is roughly
    // geometric and includes 0, so neither linear nor log axes read well.
    let mut xs: Vec<f64> = points.iter().map(|p| p.value).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let (ylo, yhi) = bounds(points.iter().map(metric));
    let n = xs.len().max(2) as f64 - 1.0;
    let px = |v: f64| {
        let i = xs.iter().position(|&x| x == v).unwrap_or(0) as f64;
        x0 + MARGIN + i / n * (PANEL_W - 2.0 * MARGIN)
    };
    let py = |v: f64| MARGIN + (yhi - v) / (yhi - ylo) * (PANEL_H - 2.0 * MARGIN);

    let _ = writeln!(out, r#"<g class="panel" data-metric="{title}">"#);
    let _ = writeln!(
        out,
        r##"<rect x="{:.1}" y="{MARGIN:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="#888"/>"##,
        x0 + MARGIN,
        PANEL_W - 2.0 * MARGIN,
        PANEL_H - 2.0 * MARGIN
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="13">{title}</text>"#,
        x0 + PANEL_W / 2.0
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="11">{xlabel}</text>"#,
        x0 + PANEL_W / 2.0,
        PANEL_H - 8.0
    );
    for &x in &xs {
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="9">{}</text>"#,
            px(x),
            PANEL_H - MARGIN + 14.0,
            x
        );
    }
    for (v, y) in [(ylo, PANEL_H - MARGIN), (yhi, MARGIN)] {
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-size="9">{:.2}</text>"#,
            x0 + MARGIN - 4.0,
            y + 3.0,
            v
        );
    }
    for mode in [Mode::QoeAware, Mode::Baseline] {
        let pts: Vec<String> = points
            .iter()
            .filter(|p| p.mode == mode && metric(p).is_finite())
            .map(|p| format!("{:.2},{:.2}", px(p.value), py(metric(p))))
            .collect();
        if pts.is_empty() {
            continue;
        }
        let _ = writeln!(
            out,
            r#"<polyline class="series" data-mode="{mode}" fill="none" stroke="{}" stroke-width="2" points="{}"/>"#,
            color(mode),
            pts.join(" ")
        );
    }
    let _ = writeln!(out, "</g>");
}

/// Renders the seed-averaged sweep summary as a standalone SVG document.
pub fn format_chart(rows: &[SweepRow]) -> Result<String> {
    let Some(first) = rows.first() else {
        return Err(Error::InvalidInput("cannot chart an empty sweep table".into()));
    };
    let points = summarize(rows);
    let width = 2.0 * PANEL_W;
    let height = PANEL_H + 24.0;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let xlabel = first.variable.as_str();
    panel(&mut out, 0.0, "mean PSNR (dB)", xlabel, &points, |p| p.mean_psnr_db);
    panel(&mut out, PANEL_W, "stall events", xlabel, &points, |p| p.mean_stalls);
    for (i, mode) in [Mode::QoeAware, Mode::Baseline].into_iter().enumerate() {
        let y = PANEL_H + 8.0 + 12.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{y:.1}" font-size="10" fill="{}">{mode}</text>"#,
            MARGIN,
            color(mode)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn emit_chart(rows: &[SweepRow], path: &Path) -> Result<()> {
    let svg = format_chart(rows)?;
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}
