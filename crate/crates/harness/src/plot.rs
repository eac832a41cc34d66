//! Self-contained SVG plots of the study CSVs.
//!
//! Output depends only on the CSV contents: numbers are printed with fixed
//! precision and series are drawn in file order, so identical input gives
//! identical bytes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sirlab_core::stats::log_log_fit;

use crate::error::{HarnessError, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

#[derive(Debug, Clone, Copy)]
struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| v.is_finite() && (!log || *v > 0.0)) {
            let v = if log { v.log10() } else { v };
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            return Axis { lo: 0.0, hi: 1.0, log };
        }
        if hi - lo < 1e-12 {
            let pad = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
            lo -= pad;
            hi += pad;
        } else {
            let pad = 0.05 * (hi - lo);
            lo -= pad;
            hi += pad;
        }
        Axis { lo, hi, log }
    }

    fn unit(&self, v: f64) -> f64 {
        let v = if self.log { v.log10() } else { v };
        (v - self.lo) / (self.hi - self.lo)
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            let (a, b) = (self.lo.ceil() as i32, self.hi.floor() as i32);
            return (a..=b).map(|e| (10f64.powi(e), format!("1e{e}"))).collect();
        }
        (0..=4)
            .map(|k| {
                let v = self.lo + (self.hi - self.lo) * k as f64 / 4.0;
                (v, format_tick(v))
            })
            .collect()
    }
}

fn format_tick(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e4).contains(&a) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

struct Canvas {
    body: String,
    x: Axis,
    y: Axis,
}

impl Canvas {
    fn new(title: &str, xlabel: &str, ylabel: &str, x: Axis, y: Axis) -> Self {
        let mut c = Canvas { body: String::new(), x, y };
        let pw = WIDTH - LEFT - RIGHT;
        let ph = HEIGHT - TOP - BOTTOM;
        let _ = writeln!(c.body, r##"<rect x="{LEFT:.1}" y="{TOP:.1}" width="{pw:.1}" height="{ph:.1}" fill="none" stroke="#333"/>"##);
        let _ = writeln!(c.body, r#"<text x="{:.1}" y="24.0" text-anchor="middle" font-size="15">{}</text>"#, WIDTH / 2.0, escape(title));
        let _ = writeln!(c.body, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="12">{}</text>"#, LEFT + pw / 2.0, HEIGHT - 12.0, escape(xlabel));
        let _ = writeln!(
            c.body,
            r#"<text x="16.0" y="{:.1}" text-anchor="middle" font-size="12" transform="rotate(-90 16.0 {:.1})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            escape(ylabel)
        );
        for (v, label) in x.ticks() {
            let px = c.px(v);
            let _ = writeln!(c.body, r##"<line x1="{px:.1}" y1="{:.1}" x2="{px:.1}" y2="{:.1}" stroke="#333"/>"##, HEIGHT - BOTTOM, HEIGHT - BOTTOM + 5.0);
            let _ = writeln!(c.body, r#"<text x="{px:.1}" y="{:.1}" text-anchor="middle" font-size="10">{label}</text>"#, HEIGHT - BOTTOM + 17.0);
        }
        for (v, label) in y.ticks() {
            let py = c.py(v);
            let _ = writeln!(c.body, r##"<line x1="{:.1}" y1="{py:.1}" x2="{LEFT:.1}" y2="{py:.1}" stroke="#333"/>"##, LEFT - 5.0);
            let _ = writeln!(c.body, r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-size="10">{label}</text>"#, LEFT - 8.0, py + 3.0);
        }
        c
    }

    fn px(&self, v: f64) -> f64 {
        LEFT + self.x.unit(v) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, v: f64) -> f64 {
        HEIGHT - BOTTOM - self.y.unit(v) * (HEIGHT - TOP - BOTTOM)
    }

    fn polyline(&mut self, pts: &[(f64, f64)], color: &str, dashed: bool) {
        let mut s = String::new();
        for (x, y) in pts {
            let _ = write!(s, "{:.2},{:.2} ", self.px(*x), self.py(*y));
        }
        let dash = if dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(self.body, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#, s.trim_end());
    }

    fn markers(&mut self, pts: &[(f64, f64)], color: &str) {
        for (x, y) in pts {
            let _ = writeln!(self.body, r#"<circle cx="{:.2}" cy="{:.2}" r="3.0" fill="{color}"/>"#, self.px(*x), self.py(*y));
        }
    }

    fn rect(&mut self, x0: f64, x1: f64, y0: f64, y1: f64, color: &str) {
        let (a, b) = (self.px(x0), self.px(x1));
        let (c, d) = (self.py(y0), self.py(y1));
        let _ = writeln!(
            self.body,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{color}"/>"#,
            a.min(b),
            c.min(d),
            (b - a).abs(),
            (d - c).abs()
        );
    }

    fn note(&mut self, row: usize, text: &str, color: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{:.1}" y="{:.1}" font-size="12" fill="{color}">{}</text>"#,
            LEFT + 10.0,
            TOP + 18.0 + 16.0 * row as f64,
            escape(text)
        );
    }

    fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH:.0}\" height=\"{HEIGHT:.0}\" viewBox=\"0 0 {WIDTH:.0} {HEIGHT:.0}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            self.body
        )
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    fn numbers(&self, col: usize, path: &Path) -> Result<Vec<f64>> {
        self.rows
            .iter()
            .enumerate()
            .map(|(k, r)| {
                r[col].parse::<f64>().map_err(|_| HarnessError::Schema {
                    path: path.to_path_buf(),
                    message: format!("row {}: `{}` in column `{}` is not a number", k + 2, r[col], self.header[col]),
                })
            })
            .collect()
    }
}

fn read_table(path: &Path) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(false).from_path(path)?;
    let mut records = reader.records();
    let header = match records.next() {
        Some(h) => h?.iter().map(str::to_string).collect(),
        None => Vec::new(),
    };
    let rows = records.map(|r| r.map(|r| r.iter().map(str::to_string).collect())).collect::<std::result::Result<_, _>>()?;
    Ok(Table { header, rows })
}

fn empty_plot(title: &str, warning: &str) -> String {
    let axis = Axis { lo: 0.0, hi: 1.0, log: false };
    let mut c = Canvas::new(title, "", "", axis, axis);
    c.note(0, warning, "#b00");
    c.finish()
}

/// Counts per compartment against time.
fn counts_plot(t: &Table, path: &Path) -> Result<String> {
    let time = t.numbers(t.column("t").expect("checked"), path)?;
    let names = ["S_count", "I_count", "R_count"];
    let series: Vec<Vec<f64>> = names
        .iter()
        .map(|n| t.numbers(t.column(n).expect("checked"), path))
        .collect::<Result<_>>()?;
    let x = Axis::fit(time.iter().copied(), false);
    let y = Axis::fit(series.iter().flatten().copied(), false);
    let mut c = Canvas::new("Compartment counts", "t", "count", x, y);
    for (k, (s, name)) in series.iter().zip(["S", "I", "R"]).enumerate() {
        let pts: Vec<(f64, f64)> = time.iter().copied().zip(s.iter().copied()).collect();
        c.polyline(&pts, COLORS[k], false);
        c.note(k, name, COLORS[k]);
    }
    Ok(c.finish())
}

/// Log-log error against population size with the least-squares slope.
fn rate_plot(t: &Table, path: &Path) -> Result<String> {
    let n = t.numbers(t.column("n").expect("checked"), path)?;
    let e = t.numbers(t.column("rms_error").expect("checked"), path)?;
    let x = Axis::fit(n.iter().copied(), true);
    let y = Axis::fit(e.iter().copied(), true);
    let mut c = Canvas::new("Dictionary-coordinate error against N", "N", "RMS error", x, y);
    let pts: Vec<(f64, f64)> = n.iter().copied().zip(e.iter().copied()).collect();
    c.polyline(&pts, COLORS[0], false);
    c.markers(&pts, COLORS[0]);
    match log_log_fit(&n, &e) {
        Some(fit) => {
            let line: Vec<(f64, f64)> = [n[0], n[n.len() - 1]]
                .iter()
                .map(|&v| (v, (fit.intercept + fit.slope * v.ln()).exp()))
                .collect();
            c.polyline(&line, COLORS[1], true);
            c.note(0, &format!("fitted slope {:.4}", fit.slope), COLORS[1]);
        }
        None => c.note(0, "fewer than two sizes: no slope", "#b00"),
    }
    Ok(c.finish())
}

/// Empirical against theoretical diagonal covariances, at the largest `n`
/// and latest `t` when those columns are present.
fn covariance_plot(t: &Table, path: &Path) -> Result<String> {
    let mut keep: Vec<usize> = (0..t.rows.len()).collect();
    for key in ["n", "t"] {
        if let Some(col) = t.column(key) {
            let v = t.numbers(col, path)?;
            let top = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            keep.retain(|&k| v[k] == top);
        }
    }
    if let Some(col) = t.column("variant") {
        let first = keep.first().map(|&k| t.rows[k][col].clone());
        keep.retain(|&k| Some(&t.rows[k][col]) == first.as_ref());
    }
    let i = t.numbers(t.column("i").expect("checked"), path)?;
    let j = t.numbers(t.column("j").expect("checked"), path)?;
    let emp = t.numbers(t.column("empirical").expect("checked"), path)?;
    let theo = t.numbers(t.column("theoretical").expect("checked"), path)?;
    keep.retain(|&k| i[k] == j[k]);
    if keep.is_empty() {
        return Ok(empty_plot("Covariance comparison", "no diagonal entries to plot"));
    }
    let x = Axis { lo: -0.5, hi: keep.len() as f64 - 0.5, log: false };
    let y = Axis::fit(keep.iter().flat_map(|&k| [emp[k], theo[k], 0.0]), false);
    let mut c = Canvas::new("Coordinate variances: empirical and theoretical", "coordinate index", "variance", x, y);
    for (slot, &k) in keep.iter().enumerate() {
        let s = slot as f64;
        c.rect(s - 0.4, s, 0.0, emp[k], COLORS[0]);
        c.rect(s, s + 0.4, 0.0, theo[k], COLORS[1]);
    }
    c.note(0, "empirical", COLORS[0]);
    c.note(1, "theoretical", COLORS[1]);
    Ok(c.finish())
}

/// Renders one SVG per CSV into `out`, named after the CSV, choosing the plot
/// from the header. Header-only or empty files give empty axes with a warning.
pub fn emit_plots(csvs: &[PathBuf], out: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out).map_err(|source| HarnessError::File { path: out.to_path_buf(), source })?;
    let mut written = Vec::with_capacity(csvs.len());
    for path in csvs {
        let table = read_table(path)?;
        let has = |cols: &[&str]| cols.iter().all(|c| table.column(c).is_some());
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("plot");
        let svg = if table.header.is_empty() {
            empty_plot(stem, "warning: empty CSV, nothing to plot")
        } else if has(&["t", "S_count", "I_count", "R_count"]) {
            if table.rows.is_empty() {
                empty_plot("Compartment counts", "warning: no rows")
            } else {
                counts_plot(&table, path)?
            }
        } else if has(&["n", "rms_error"]) {
            if table.rows.is_empty() {
                empty_plot("Dictionary-coordinate error against N", "warning: no rows")
            } else {
                rate_plot(&table, path)?
            }
        } else if has(&["i", "j", "empirical", "theoretical"]) {
            if table.rows.is_empty() {
                empty_plot("Covariance comparison", "warning: no rows")
            } else {
                covariance_plot(&table, path)?
            }
        } else {
            return Err(HarnessError::Schema {
                path: path.clone(),
                message: format!("unrecognized columns {:?}", table.header),
            });
        };
        let target = out.join(format!("{stem}.svg"));
        std::fs::write(&target, svg).map_err(|source| HarnessError::File { path: target.clone(), source })?;
        written.push(target);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_ticks_cover_decades() {
        let a = Axis::fit([10.0, 1000.0].into_iter(), true);
        let t: Vec<String> = a.ticks().into_iter().map(|(_, l)| l).collect();
        assert_eq!(t, ["1e1", "1e2", "1e3"]);
    }

    #[test]
    fn degenerate_range_is_padded() {
        let a = Axis::fit([2.0, 2.0].into_iter(), false);
        assert!(a.hi > a.lo);
    }
}
