//! Static SVG plots of round reports.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use dcs_core::activeloop::ROUNDS_HEADER;

use crate::{CliError, Result};

/// Columns drawn as metric-vs-round lines.
pub const LINE_METRICS: [&str; 6] = ["topk_max", "topk_median", "topk_mean", "query_mean", "diversity", "novelty"];

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];
const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;

/// Parsed `rounds.csv`. Blank cells become `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundsTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl RoundsTable {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let bad = |reason: String| CliError::MalformedReport { path: origin.to_string(), reason };
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let header = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
        let columns: Vec<String> = header.iter().map(str::to_string).collect();
        if columns.join(",") != ROUNDS_HEADER {
            return Err(bad(format!("unexpected header {:?}", columns.join(","))));
        }
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| bad(e.to_string()))?;
            let row = record
                .iter()
                .map(|cell| {
                    if cell.is_empty() {
                        Ok(None)
                    } else {
                        cell.parse::<f64>().map(Some).map_err(|_| bad(format!("bad number {cell:?}")))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            if row[0].is_none() {
                return Err(bad("blank round".into()));
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(bad("no data rows".into()));
        }
        Ok(Self { columns, rows })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    fn index(&self, column: &str) -> usize {
        self.columns.iter().position(|c| c == column).expect("known column")
    }

    /// `(round, value)` pairs with a value in `column`.
    pub fn series(&self, column: &str) -> Vec<(f64, f64)> {
        let (r, c) = (self.index("round"), self.index(column));
        self.rows.iter().filter_map(|row| Some((row[r]?, row[c]?))).collect()
    }
}

/// Across-input statistics of one metric at one round.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BandPoint {
    pub round: f64,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

/// Per-round mean and extrema of `column` over all tables reporting it.
pub fn band(tables: &[RoundsTable], column: &str) -> Vec<BandPoint> {
    let mut by_round: std::collections::BTreeMap<i64, Vec<f64>> = Default::default();
    for t in tables {
        for (r, v) in t.series(column) {
            by_round.entry(r as i64).or_default().push(v);
        }
    }
    by_round
        .into_iter()
        .map(|(r, vs)| BandPoint {
            round: r as f64,
            mean: vs.iter().sum::<f64>() / vs.len() as f64,
            min: vs.iter().copied().fold(f64::INFINITY, f64::min),
            max: vs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            count: vs.len(),
        })
        .collect()
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn new(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Self {
        let span = |it: &mut dyn Iterator<Item = f64>| {
            let (lo, hi) = it.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi - lo < 1e-12 {
                (lo - 0.5, hi + 0.5)
            } else {
                let pad = 0.05 * (hi - lo);
                (lo - pad, hi + pad)
            }
        };
        let (x0, x1) = span(&mut xs.clone());
        let (y0, y1) = span(&mut ys.clone());
        Self { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - 2.0 * MARGIN)
    }

    fn axes(&self, svg: &mut String, title: &str, xlabel: &str, ylabel: &str) {
        let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
        let _ = writeln!(
            svg,
            r#"<rect x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            r - l,
            b - t
        );
        for i in 0..=4 {
            let f = i as f64 / 4.0;
            let (xv, yv) = (self.x0 + f * (self.x1 - self.x0), self.y0 + f * (self.y1 - self.y0));
            let (x, y) = (self.px(xv), self.py(yv));
            let _ = writeln!(svg, r#"<line x1="{x:.2}" y1="{b}" x2="{x:.2}" y2="{}" stroke="black"/>"#, b + 4.0);
            let _ = writeln!(svg, r#"<text x="{x:.2}" y="{}" font-size="11" text-anchor="middle">{}</text>"#, b + 16.0, tick(xv));
            let _ = writeln!(svg, r#"<line x1="{}" y1="{y:.2}" x2="{l}" y2="{y:.2}" stroke="black"/>"#, l - 4.0);
            let _ = writeln!(svg, r#"<text x="{}" y="{:.2}" font-size="11" text-anchor="end">{}</text>"#, l - 6.0, y + 4.0, tick(yv));
        }
        let _ = writeln!(svg, r#"<text x="{}" y="24" font-size="15" text-anchor="middle">{}</text>"#, WIDTH / 2.0, escape(title));
        let _ = writeln!(svg, r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">{}</text>"#, WIDTH / 2.0, HEIGHT - 18.0, escape(xlabel));
        let _ = writeln!(
            svg,
            r#"<text x="16" y="{0}" font-size="12" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
            HEIGHT / 2.0,
            escape(ylabel)
        );
    }
}

fn tick(v: f64) -> String {
    if v.abs() >= 100.0 || v == v.round() {
        format!("{v:.0}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn open_svg() -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    )
}

/// Mean line of `column`, with a shaded min–max band when more than one
/// input is given.
pub fn line_svg(tables: &[RoundsTable], column: &str) -> String {
    let points = band(tables, column);
    let frame = Frame::new(
        points.iter().map(|p| p.round),
        points.iter().flat_map(|p| [p.min, p.max]),
    );
    let mut svg = open_svg();
    frame.axes(&mut svg, column, "round", column);
    if tables.len() > 1 && !points.is_empty() {
        let upper = points.iter().map(|p| format!("{:.2},{:.2}", frame.px(p.round), frame.py(p.max)));
        let lower = points.iter().rev().map(|p| format!("{:.2},{:.2}", frame.px(p.round), frame.py(p.min)));
        let poly: Vec<String> = upper.chain(lower).collect();
        let _ = writeln!(
            svg,
            r#"<polygon class="band" points="{}" fill="{}" fill-opacity="0.25" stroke="none"/>"#,
            poly.join(" "),
            PALETTE[0]
        );
    }
    let line: Vec<String> = points.iter().map(|p| format!("{:.2},{:.2}", frame.px(p.round), frame.py(p.mean))).collect();
    let _ = writeln!(
        svg,
        r#"<polyline class="mean" points="{}" fill="none" stroke="{}" stroke-width="2"/>"#,
        line.join(" "),
        PALETTE[0]
    );
    for p in &points {
        let _ = writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{}"/>"#, frame.px(p.round), frame.py(p.mean), PALETTE[0]);
    }
    svg.push_str("</svg>\n");
    svg
}

/// Scatter of `y_column` against `x_column`, one colour per input and one
/// point per round.
pub fn scatter_svg(tables: &[RoundsTable], x_column: &str, y_column: &str) -> String {
    let series: Vec<Vec<(f64, f64)>> = tables
        .iter()
        .map(|t| {
            let xs = t.series(x_column);
            let ys = t.series(y_column);
            xs.iter()
                .filter_map(|&(r, x)| ys.iter().find(|&&(r2, _)| r2 == r).map(|&(_, y)| (x, y)))
                .collect()
        })
        .collect();
    let all = series.iter().flatten();
    let frame = Frame::new(all.clone().map(|p| p.0), all.map(|p| p.1));
    let mut svg = open_svg();
    frame.axes(&mut svg, &format!("{y_column} vs {x_column}"), x_column, y_column);
    for (i, s) in series.iter().enumerate() {
        for &(x, y) in s {
            let _ = writeln!(
                svg,
                r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="{}" fill-opacity="0.8"/>"#,
                frame.px(x),
                frame.py(y),
                PALETTE[i % PALETTE.len()]
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

/// Renders all plots for the given round reports into `out_dir`. Every input
/// is parsed before anything is written.
pub fn plot_reports(paths: &[PathBuf], out_dir: &Path) -> Result<Vec<PathBuf>> {
    if paths.is_empty() {
        return Err(CliError::Config("no round reports given".into()));
    }
    let tables = paths.iter().map(|p| RoundsTable::read(p)).collect::<Result<Vec<_>>>()?;
    render(&tables, out_dir)
}

/// Writes line and scatter plots for parsed tables.
pub fn render(tables: &[RoundsTable], out_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<(String, String)> = LINE_METRICS
        .iter()
        .map(|m| (format!("{m}.svg"), line_svg(tables, m)))
        .collect();
    files.push(("score_vs_diversity.svg".into(), scatter_svg(tables, "diversity", "topk_mean")));
    files.push(("score_vs_novelty.svg".into(), scatter_svg(tables, "novelty", "topk_mean")));
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    for (name, svg) in files {
        let path = out_dir.join(name);
        fs::write(&path, svg)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(rows: &[&str]) -> RoundsTable {
        let text = format!("{ROUNDS_HEADER}\n{}\n", rows.join("\n"));
        RoundsTable::parse(&text, "t").unwrap()
    }

    #[test]
    fn blank_cells_and_series() {
        let t = table(&["0,1,1,1,,,0.5,0,,,0", "1,2,1.5,1.2,0.9,0.4,0.6,1,0.01,0.1,0"]);
        assert_eq!(t.series("query_max"), vec![(1.0, 0.9)]);
        assert_eq!(t.series("topk_max"), vec![(0.0, 1.0), (1.0, 2.0)]);
    }

    #[test]
    fn malformed_inputs_rejected() {
        assert!(RoundsTable::parse("", "e").is_err());
        assert!(RoundsTable::parse(&format!("{ROUNDS_HEADER}\n"), "e").is_err());
        assert!(RoundsTable::parse("a,b\n1,2\n", "e").is_err());
        assert!(RoundsTable::parse(&format!("{ROUNDS_HEADER}\n0,x,1,1,,,0,0,,,0\n"), "e").is_err());
        assert!(RoundsTable::parse(&format!("{ROUNDS_HEADER}\n0,1\n"), "e").is_err());
    }

    #[test]
    fn single_input_has_no_band() {
        let t = table(&["0,1,1,1,,,0.5,0,,,0", "1,2,1.5,1.2,0.9,0.4,0.6,1,0.01,0.1,0"]);
        let svg = line_svg(std::slice::from_ref(&t), "topk_max");
        assert!(!svg.contains("class=\"band\""));
        assert!(svg.contains("class=\"mean\""));
        let svg = line_svg(&[t.clone(), t], "topk_max");
        assert!(svg.contains("class=\"band\""));
    }

    #[test]
    fn render_is_deterministic() {
        let t = table(&["0,1,1,1,,,0.5,0,,,0"]);
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let fa = render(std::slice::from_ref(&t), a.path()).unwrap();
        render(std::slice::from_ref(&t), b.path()).unwrap();
        assert_eq!(fa.len(), 8);
        for f in fa {
            let name = f.file_name().unwrap();
            assert_eq!(fs::read(&f).unwrap(), fs::read(b.path().join(name)).unwrap());
        }
    }
}
