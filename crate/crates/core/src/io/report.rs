//! CSV tables with a schema sidecar, and small SVG plots.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::error::Result;

/// One result table: `(name, description)` per column and rows of cells
/// already formatted.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<(&'static str, &'static str)>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, columns: &[(&'static str, &'static str)]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.to_vec(),
            rows: vec![],
        }
    }

    /// Appends a row of numbers in shortest round-trip form.
    pub fn push(&mut self, row: &[f64]) {
        self.rows.push(row.iter().map(|x| (x + 0.0).to_string()).collect());
    }

    pub fn push_cells(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Scale {
    Linear,
    Log,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    /// Optional symmetric error bar per point.
    pub errors: Option<Vec<f64>>,
    /// Draw markers only.
    pub scatter: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_scale: Scale,
    pub y_scale: Scale,
    pub series: Vec<Series>,
    /// Horizontal reference line.
    pub reference: Option<f64>,
    pub note: Option<String>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ReportOptions {
    /// Leave out the generation-time comment so reruns are byte-identical.
    pub no_timestamp: bool,
}

/// Writes `<name>.csv` and `<name>.schema.txt`, plus `<name>.svg` when a
/// plot is given and the table has rows. Returns the written paths.
pub fn emit_report(dir: &Path, table: &Table, plot: Option<&Plot>, opts: &ReportOptions) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let csv_path = dir.join(format!("{}.csv", table.name));
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record(table.columns.iter().map(|c| c.0))?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    w.flush()?;
    let schema_path = dir.join(format!("{}.schema.txt", table.name));
    let mut schema = format!("# columns of {}.csv, in order\n", table.name);
    for (name, desc) in &table.columns {
        writeln!(schema, "{name}: {desc}").unwrap();
    }
    fs::write(&schema_path, schema)?;
    let mut out = vec![csv_path, schema_path];
    if let (Some(plot), false) = (plot, table.is_empty()) {
        let svg_path = dir.join(format!("{}.svg", table.name));
        fs::write(&svg_path, render_svg(plot, opts))?;
        out.push(svg_path);
    }
    Ok(out)
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

struct Axis {
    scale: Scale,
    lo: f64,
    hi: f64,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, scale: Scale) -> Self {
        let t = |v: f64| if scale == Scale::Log { v.log10() } else { v };
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| v.is_finite() && (scale == Scale::Linear || *v > 0.0)) {
            lo = lo.min(t(v));
            hi = hi.max(t(v));
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        let pad = if hi > lo { 0.05 * (hi - lo) } else { 0.5 };
        Self {
            scale,
            lo: lo - pad,
            hi: hi + pad,
        }
    }

    fn unit(&self, v: f64) -> f64 {
        let v = if self.scale == Scale::Log { v.log10() } else { v };
        (v - self.lo) / (self.hi - self.lo)
    }

    fn ticks(&self) -> Vec<f64> {
        match self.scale {
            Scale::Log => (self.lo.ceil() as i32..=self.hi.floor() as i32)
                .map(|e| 10f64.powi(e))
                .collect(),
            Scale::Linear => {
                let span = self.hi - self.lo;
                let raw = span / 5.0;
                let mag = 10f64.powf(raw.log10().floor());
                let step = [1.0, 2.0, 5.0, 10.0]
                    .iter()
                    .map(|m| m * mag)
                    .find(|s| span / s <= 6.0)
                    .unwrap_or(10.0 * mag);
                let first = (self.lo / step).ceil() as i64;
                let last = (self.hi / step).floor() as i64;
                (first..=last).map(|i| i as f64 * step).collect()
            }
        }
    }
}

fn render_svg(plot: &Plot, opts: &ReportOptions) -> String {
    let xs = plot.series.iter().flat_map(|s| s.points.iter().map(|p| p.0));
    let ys = plot.series.iter().flat_map(|s| {
        let e = s.errors.clone().unwrap_or_default();
        s.points.iter().enumerate().flat_map(move |(i, p)| {
            let d = e.get(i).copied().unwrap_or(0.0);
            [p.1 - d, p.1 + d]
        })
    });
    let xa = Axis::fit(xs, plot.x_scale);
    let ya = Axis::fit(ys.chain(plot.reference), plot.y_scale);
    let px = |x: f64| LEFT + xa.unit(x) * (W - LEFT - RIGHT);
    let py = |y: f64| H - BOTTOM - ya.unit(y) * (H - TOP - BOTTOM);
    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#).unwrap();
    if !opts.no_timestamp {
        let now = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        writeln!(s, "<!-- generated at unix time {now} -->").unwrap();
    }
    writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
    writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        W / 2.0,
        escape(&plot.title)
    )
    .unwrap();
    let (x0, x1, y0, y1) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
    writeln!(
        s,
        r#"<rect x="{x0}" y="{y0}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        x1 - x0,
        y1 - y0
    )
    .unwrap();
    for t in xa.ticks() {
        let x = px(t);
        writeln!(s, r#"<line x1="{x:.2}" y1="{y1}" x2="{x:.2}" y2="{}" stroke="black"/><text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#, y1 + 5.0, y1 + 18.0, tick_label(t)).unwrap();
    }
    for t in ya.ticks() {
        let y = py(t);
        writeln!(s, r#"<line x1="{}" y1="{y:.2}" x2="{x0}" y2="{y:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, x0 - 5.0, x0 - 8.0, y + 4.0, tick_label(t)).unwrap();
    }
    writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        H - 12.0,
        escape(&plot.x_label)
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(&plot.y_label)
    )
    .unwrap();
    if let Some(r) = plot.reference {
        let y = py(r);
        writeln!(
            s,
            r##"<line x1="{x0}" y1="{y:.2}" x2="{x1}" y2="{y:.2}" stroke="#888" stroke-dasharray="4 3"/>"##
        )
        .unwrap();
    }
    for (k, series) in plot.series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        if !series.scatter && series.points.len() > 1 {
            let pts: Vec<String> = series
                .points
                .iter()
                .map(|p| format!("{:.2},{:.2}", px(p.0), py(p.1)))
                .collect();
            writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                pts.join(" ")
            )
            .unwrap();
        }
        for (i, p) in series.points.iter().enumerate() {
            let (x, y) = (px(p.0), py(p.1));
            if let Some(e) = series.errors.as_ref().and_then(|e| e.get(i)) {
                writeln!(
                    s,
                    r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="{color}"/>"#,
                    py(p.1 - e),
                    py(p.1 + e)
                )
                .unwrap();
            }
            if series.scatter || series.points.len() <= 20 {
                writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{color}"/>"#).unwrap();
            }
        }
        writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            x0 + 10.0,
            y0 + 16.0 * (k as f64 + 1.0),
            escape(&series.label)
        )
        .unwrap();
    }
    if let Some(note) = &plot.note {
        writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            x1 - 8.0,
            y1 - 10.0,
            escape(note)
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

fn tick_label(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e4).contains(&a) {
        format!("{v:.0e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
