//! Hand-written SVG: matrix heatmaps and line plots.
//!
//! Output contains no timestamps or random ids, so re-rendering the same
//! data gives the same bytes.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::detectors::ScoreMatrix;
use crate::error::{Error, Result};
use crate::modmatrix::{format_sig, MatrixEntryRef, ModificationMatrix};

const CELL_W: f64 = 6.0;
const CELL_H: f64 = 6.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_TOP: f64 = 40.0;
const LEGEND_H: f64 = 60.0;

/// Colour ramp stops, dark to light.
const RAMP: [(f64, [u8; 3]); 5] = [
    (0.0, [68, 1, 84]),
    (0.25, [59, 82, 139]),
    (0.5, [33, 145, 140]),
    (0.75, [94, 201, 98]),
    (1.0, [253, 231, 37]),
];

fn ramp(t: f64) -> String {
    let t = if t.is_nan() { 0.0 } else { t.clamp(0.0, 1.0) };
    let k = RAMP.windows(2).position(|w| t <= w[1].0).unwrap_or(RAMP.len() - 2);
    let ((t0, c0), (t1, c1)) = (RAMP[k], RAMP[k + 1]);
    let f = (t - t0) / (t1 - t0);
    let mix = |a: u8, b: u8| (f64::from(a) + f * (f64::from(b) - f64::from(a))).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(c0[0], c1[0]), mix(c0[1], c1[1]), mix(c0[2], c1[2]))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// What a heatmap draws.
pub enum HeatmapSource<'a> {
    Matrix(&'a ModificationMatrix),
    Scores(&'a ScoreMatrix),
}

impl HeatmapSource<'_> {
    fn parts(&self) -> (String, Vec<String>, Vec<String>, &DMatrix<f64>) {
        match self {
            HeatmapSource::Matrix(m) => (
                format!("{} changes per day per 1000 voters", m.change_type()),
                m.locales().to_vec(),
                m.intervals().iter().map(|iv| iv.start.to_string()).collect(),
                m.values(),
            ),
            HeatmapSource::Scores(s) => (
                format!("{} scores ({})", s.change_type(), s.method()),
                s.locales().to_vec(),
                s.intervals().iter().map(|iv| iv.start.to_string()).collect(),
                s.scores(),
            ),
        }
    }
}

/// Heatmap with rows = locales, columns = intervals and a linear colour
/// scale between the finite minimum and maximum. `+inf` cells take the top
/// colour. Highlighted cells get a white outline.
pub fn heatmap_svg(
    title: &str,
    rows: &[String],
    cols: &[String],
    grid: &DMatrix<f64>,
    highlight: &BTreeSet<MatrixEntryRef>,
) -> Result<String> {
    let (nr, nc) = grid.shape();
    if nr == 0 || nc == 0 {
        return Err(Error::Precondition("cannot render an empty matrix".into()));
    }
    let finite: Vec<f64> = grid.iter().copied().filter(|x| x.is_finite()).collect();
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if finite.is_empty() { (0.0, 0.0) } else { (lo, hi) };
    let span = hi - lo;
    let scale = |x: f64| {
        if x == f64::INFINITY {
            1.0
        } else if span > 0.0 {
            (x - lo) / span
        } else {
            0.0
        }
    };

    let width = MARGIN_LEFT + nc as f64 * CELL_W + 20.0;
    let height = MARGIN_TOP + nr as f64 * CELL_H + LEGEND_H;
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif">"#
    )
    .unwrap();
    writeln!(s, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##).unwrap();
    writeln!(s, r#"<text x="{MARGIN_LEFT}" y="20" font-size="13">{}</text>"#, escape(title)).unwrap();

    let label_every = nr.div_ceil(25).max(1);
    for (i, label) in rows.iter().enumerate().filter(|(i, _)| i % label_every == 0) {
        let y = MARGIN_TOP + (i as f64 + 0.8) * CELL_H;
        writeln!(
            s,
            r#"<text x="{}" y="{y}" font-size="6" text-anchor="end">{}</text>"#,
            MARGIN_LEFT - 3.0,
            escape(label)
        )
        .unwrap();
    }
    let col_every = nc.div_ceil(10).max(1);
    for (j, label) in cols.iter().enumerate().filter(|(j, _)| j % col_every == 0) {
        let x = MARGIN_LEFT + j as f64 * CELL_W;
        writeln!(s, r#"<text x="{x}" y="{}" font-size="6">{}</text>"#, MARGIN_TOP - 4.0, escape(label)).unwrap();
    }

    writeln!(s, "<g shape-rendering=\"crispEdges\">").unwrap();
    for i in 0..nr {
        for j in 0..nc {
            let v = grid[(i, j)];
            writeln!(
                s,
                r#"<rect class="cell" x="{}" y="{}" width="{CELL_W}" height="{CELL_H}" fill="{}"><title>{} {}: {}</title></rect>"#,
                MARGIN_LEFT + j as f64 * CELL_W,
                MARGIN_TOP + i as f64 * CELL_H,
                ramp(scale(v)),
                escape(rows.get(i).map(String::as_str).unwrap_or("")),
                escape(cols.get(j).map(String::as_str).unwrap_or("")),
                format_sig(v, 6)
            )
            .unwrap();
        }
    }
    writeln!(s, "</g>").unwrap();
    for e in highlight {
        if e.locale_index >= nr || e.interval_index >= nc {
            return Err(Error::Precondition(format!(
                "highlighted entry ({}, {}) is outside the {nr}×{nc} matrix",
                e.locale_index, e.interval_index
            )));
        }
        writeln!(
            s,
            r##"<rect class="highlight" x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#ffffff" stroke-width="1.5"/>"##,
            MARGIN_LEFT + e.interval_index as f64 * CELL_W - 1.0,
            MARGIN_TOP + e.locale_index as f64 * CELL_H - 1.0,
            CELL_W + 2.0,
            CELL_H + 2.0
        )
        .unwrap();
    }

    let ly = MARGIN_TOP + nr as f64 * CELL_H + 20.0;
    writeln!(s, r#"<defs><linearGradient id="ramp" x1="0" x2="1" y1="0" y2="0">"#).unwrap();
    for (t, _) in RAMP {
        writeln!(s, r#"<stop offset="{t}" stop-color="{}"/>"#, ramp(t)).unwrap();
    }
    writeln!(s, "</linearGradient></defs>").unwrap();
    let legend_fill = if span > 0.0 { "url(#ramp)".to_string() } else { ramp(0.0) };
    writeln!(
        s,
        r#"<rect class="legend" x="{MARGIN_LEFT}" y="{ly}" width="150" height="10" fill="{legend_fill}"/>"#
    )
    .unwrap();
    if span > 0.0 {
        writeln!(s, r#"<text x="{MARGIN_LEFT}" y="{}" font-size="9">min {}</text>"#, ly + 22.0, format_sig(lo, 6)).unwrap();
        writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="9" text-anchor="end">max {}</text>"#,
            MARGIN_LEFT + 150.0,
            ly + 22.0,
            format_sig(hi, 6)
        )
        .unwrap();
    } else {
        writeln!(
            s,
            r#"<text x="{MARGIN_LEFT}" y="{}" font-size="9">min = max = {}</text>"#,
            ly + 22.0,
            format_sig(lo, 6)
        )
        .unwrap();
    }
    writeln!(s, "</svg>").unwrap();
    Ok(s)
}

pub fn render_heatmap(source: HeatmapSource<'_>, path: impl AsRef<Path>, highlight: &BTreeSet<MatrixEntryRef>) -> Result<()> {
    let (title, rows, cols, grid) = source.parts();
    let svg = heatmap_svg(&title, &rows, &cols, grid, highlight)?;
    std::fs::write(path, svg)?;
    Ok(())
}

const SERIES_COLOURS: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

/// Line plot of named `(x, y)` series with a legend.
pub fn line_plot_svg(title: &str, x_label: &str, y_label: &str, series: &[(String, Vec<(f64, f64)>)], y_range: Option<(f64, f64)>) -> String {
    let (w, h) = (640.0, 400.0);
    let (left, right, top, bottom) = (60.0, 150.0, 40.0, 50.0);
    let points = series.iter().flat_map(|(_, p)| p.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in points {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if let Some((a, b)) = y_range {
        y0 = a;
        y1 = b;
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let pw = w - left - right;
    let ph = h - top - bottom;
    let px = |x: f64| left + (x - x0) / (x1 - x0) * pw;
    let py = |y: f64| top + ph - (y - y0) / (y1 - y0) * ph;

    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif">"#).unwrap();
    writeln!(s, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##).unwrap();
    writeln!(s, r#"<text x="{left}" y="22" font-size="14">{}</text>"#, escape(title)).unwrap();
    writeln!(
        s,
        r##"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#333333"/>"##
    )
    .unwrap();
    for t in 0..=4 {
        let f = f64::from(t) / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        writeln!(s, r#"<text x="{}" y="{}" font-size="10" text-anchor="middle">{}</text>"#, px(xv), top + ph + 15.0, format_sig(xv, 3)).unwrap();
        writeln!(s, r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{}</text>"#, left - 5.0, py(yv) + 3.0, format_sig(yv, 3)).unwrap();
    }
    writeln!(s, r#"<text x="{}" y="{}" font-size="11" text-anchor="middle">{}</text>"#, left + pw / 2.0, h - 12.0, escape(x_label)).unwrap();
    writeln!(
        s,
        r#"<text x="15" y="{}" font-size="11" text-anchor="middle" transform="rotate(-90 15 {})">{}</text>"#,
        top + ph / 2.0,
        top + ph / 2.0,
        escape(y_label)
    )
    .unwrap();
    for (k, (name, pts)) in series.iter().enumerate() {
        let colour = SERIES_COLOURS[k % SERIES_COLOURS.len()];
        let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        writeln!(
            s,
            r#"<polyline class="series" fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#,
            path.join(" ")
        )
        .unwrap();
        let ly = top + 12.0 + k as f64 * 16.0;
        writeln!(
            s,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{colour}" stroke-width="2"/><text x="{}" y="{}" font-size="10">{}</text>"#,
            left + pw + 10.0,
            left + pw + 30.0,
            left + pw + 35.0,
            ly + 3.0,
            escape(name)
        )
        .unwrap();
    }
    writeln!(s, "</svg>").unwrap();
    s
}
