//! Plain SVG renderings of run outputs. Every plot is a pure function of the
//! files it reads, so identical inputs give byte-identical SVG.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("{0}: {1}")]
    Io(PathBuf, std::io::Error),
    #[error("{file}: {msg}")]
    Parse { file: String, msg: String },
    #[error("no plottable input found in {0}")]
    NoInput(PathBuf),
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
const W: f64 = 640.0;
const H: f64 = 400.0;
const MARGIN: [f64; 4] = [60.0, 20.0, 30.0, 50.0]; // left, right, top, bottom

/// A named polyline in data coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

/// Multi-series line chart with axes, ticks and a legend.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let pts = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts.filter(|p| p.0.is_finite() && p.1.is_finite()) {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-12 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let [ml, mr, mt, mb] = MARGIN;
    let (pw, ph) = (W - ml - mr, H - mt - mb);
    let sx = |x: f64| ml + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| mt + ph - (y - y0) / (y1 - y0) * ph;

    let mut svg = header(W, H);
    let _ = writeln!(svg, r#"<text x="{:.1}" y="18" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, esc(title));
    let _ = writeln!(
        svg,
        r#"<rect x="{ml:.1}" y="{mt:.1}" width="{pw:.1}" height="{ph:.1}" fill="none" stroke="black"/>"#
    );
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let (px, py) = (sx(xv), sy(yv));
        let _ = writeln!(
            svg,
            r#"<line x1="{px:.1}" y1="{:.1}" x2="{px:.1}" y2="{:.1}" stroke="black"/><text x="{px:.1}" y="{:.1}" text-anchor="middle" font-size="10">{}</text>"#,
            mt + ph,
            mt + ph + 4.0,
            mt + ph + 16.0,
            tick(xv)
        );
        let _ = writeln!(
            svg,
            r#"<line x1="{:.1}" y1="{py:.1}" x2="{ml:.1}" y2="{py:.1}" stroke="black"/><text x="{:.1}" y="{:.1}" text-anchor="end" font-size="10">{}</text>"#,
            ml - 4.0,
            ml - 6.0,
            py + 3.0,
            tick(yv)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="12">{}</text>"#,
        ml + pw / 2.0,
        H - 12.0,
        esc(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{:.1}" text-anchor="middle" font-size="12" transform="rotate(-90 14 {:.1})">{}</text>"#,
        mt + ph / 2.0,
        mt + ph / 2.0,
        esc(y_label)
    );
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut d = String::new();
        for &(x, y) in s.points.iter().filter(|p| p.0.is_finite() && p.1.is_finite()) {
            let _ = write!(d, "{:.1},{:.1} ", sx(x), sy(y));
        }
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"#,
            d.trim_end()
        );
        let ly = mt + 12.0 + 14.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}" font-size="10">{}</text>"#,
            ml + pw - 110.0,
            ml + pw - 90.0,
            ml + pw - 85.0,
            ly + 3.0,
            esc(&s.name)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Occupancy raster (PGM, first row on top) with roadmap edges and the
/// driven trajectory overlaid.
pub fn map_overlay(pgm: &str, resolution: f64, edges: &[((f64, f64), (f64, f64))], path: &[(f64, f64)]) -> Result<String, String> {
    let mut it = pgm.split_ascii_whitespace();
    if it.next() != Some("P2") {
        return Err("expected an ASCII PGM (P2)".into());
    }
    let mut num = || it.next().and_then(|v| v.parse::<usize>().ok()).ok_or("truncated PGM");
    let (w, h, _max) = (num()?, num()?, num()?);
    let vals: Vec<usize> = (0..w * h).map(|_| num()).collect::<Result<_, _>>()?;
    let scale = (800.0 / w as f64).min(800.0 / h as f64).max(1.0);
    let (sw, sh) = (w as f64 * scale, h as f64 * scale);
    let to_px = |x: f64, y: f64| (x / resolution * scale, sh - y / resolution * scale);

    let mut svg = header(sw, sh);
    for (row, chunk) in vals.chunks(w).enumerate() {
        // run-length encode each row
        let mut col = 0;
        while col < w {
            let v = chunk[col];
            let start = col;
            while col < w && chunk[col] == v {
                col += 1;
            }
            let g = 255 - v.min(255);
            let _ = writeln!(
                svg,
                r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="rgb({g},{g},{g})"/>"#,
                start as f64 * scale,
                row as f64 * scale,
                (col - start) as f64 * scale,
                scale
            );
        }
    }
    for &((ax, ay), (bx, by)) in edges {
        let (a, b) = (to_px(ax, ay), to_px(bx, by));
        let _ = writeln!(
            svg,
            r##"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#17becf" stroke-width="0.6"/>"##,
            a.0, a.1, b.0, b.1
        );
    }
    if !path.is_empty() {
        let mut d = String::new();
        for &(x, y) in path {
            let p = to_px(x, y);
            let _ = write!(d, "{:.1},{:.1} ", p.0, p.1);
        }
        let _ = writeln!(
            svg,
            r##"<polyline fill="none" stroke="#d62728" stroke-width="1.2" points="{}"/>"##,
            d.trim_end()
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn header(w: f64, h: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.0} {h:.0}\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    )
}

fn tick(v: f64) -> String {
    if v.abs() >= 1000.0 || v == v.trunc() {
        format!("{v:.0}")
    } else if v.abs() >= 10.0 {
        format!("{v:.1}")
    } else {
        format!("{v:.2}")
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Header-indexed CSV rows (no quoting beyond simple double-quoted fields).
struct Csv {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Csv {
    fn parse(text: &str) -> Self {
        let mut lines = text.lines().filter(|l| !l.is_empty());
        let header = lines.next().map(split_csv).unwrap_or_default();
        Self { header, rows: lines.map(split_csv).collect() }
    }

    fn col(&self, name: &str, file: &str) -> Result<usize, PlotError> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| PlotError::Parse { file: file.into(), msg: format!("missing column '{name}'") })
    }

    fn num(&self, row: &[String], col: usize, file: &str) -> Result<f64, PlotError> {
        row.get(col)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| PlotError::Parse { file: file.into(), msg: format!("bad number in column {col}") })
    }
}

fn split_csv(line: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    for ch in line.chars() {
        match ch {
            '"' => quoted = !quoted,
            ',' if !quoted => out.push(std::mem::take(&mut cur)),
            c => cur.push(c),
        }
    }
    out.push(cur);
    out
}

fn read(dir: &Path, name: &str) -> Result<Option<String>, PlotError> {
    let p = dir.join(name);
    match std::fs::read_to_string(&p) {
        Ok(s) => Ok(Some(s)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(PlotError::Io(p, e)),
    }
}

/// Renders every plot whose inputs exist in `input`:
/// `metrics.csv` → entropy curve, `entropy.csv` (compare) → one chart per
/// case with a curve per strategy and seed, `frontier_bench.csv` → detection
/// cost, `ce_trace.csv` → optimizer convergence, `map.pgm` + `map.json` +
/// `graph.json` + `trajectory.csv` → map overlay. Returns the written files.
pub fn emit_plots(input: &Path, output: &Path) -> Result<Vec<PathBuf>, PlotError> {
    let mut plots: Vec<(String, String)> = Vec::new();

    if let Some(text) = read(input, "metrics.csv")? {
        let csv = Csv::parse(&text);
        let (t, h) = (csv.col("sim_time", "metrics.csv")?, csv.col("normalized_entropy", "metrics.csv")?);
        let points =
            csv.rows.iter().map(|r| Ok((csv.num(r, t, "metrics.csv")?, csv.num(r, h, "metrics.csv")?))).collect::<Result<_, PlotError>>()?;
        let series = [Series { name: "normalized entropy".into(), points }];
        plots.push(("entropy.svg".into(), line_chart("Map entropy", "time [s]", "normalized entropy", &series)));
    }

    if let Some(text) = read(input, "entropy.csv")? {
        let f = "entropy.csv";
        let csv = Csv::parse(&text);
        let (c, s, seed) = (csv.col("case", f)?, csv.col("strategy", f)?, csv.col("seed", f)?);
        let (t, h) = (csv.col("sim_time", f)?, csv.col("normalized_entropy", f)?);
        let mut cases: BTreeMap<String, Vec<Series>> = BTreeMap::new();
        for r in &csv.rows {
            let name = format!("{} #{}", r[s], r[seed]);
            let list = cases.entry(r[c].clone()).or_default();
            if list.last().is_none_or(|l| l.name != name) {
                list.push(Series { name, points: Vec::new() });
            }
            list.last_mut().expect("just pushed").points.push((csv.num(r, t, f)?, csv.num(r, h, f)?));
        }
        for (case, series) in cases {
            let title = format!("Map entropy: {case}");
            plots.push((format!("entropy_{}.svg", file_safe(&case)), line_chart(&title, "time [s]", "normalized entropy", &series)));
        }
    }

    if let Some(text) = read(input, "frontier_bench.csv")? {
        let f = "frontier_bench.csv";
        let csv = Csv::parse(&text);
        let (st, p, u) = (csv.col("step", f)?, csv.col("ops_pruned", f)?, csv.col("ops_unpruned", f)?);
        let mut pruned = Series { name: "with pruning".into(), points: Vec::new() };
        let mut unpruned = Series { name: "without pruning".into(), points: Vec::new() };
        for r in &csv.rows {
            let x = csv.num(r, st, f)?;
            pruned.points.push((x, csv.num(r, p, f)?));
            unpruned.points.push((x, csv.num(r, u, f)?));
        }
        plots.push(("detection_cost.svg".into(), line_chart("Frontier detection cost", "step", "operations", &[pruned, unpruned])));
    }

    if let Some(text) = read(input, "ce_trace.csv")? {
        let f = "ce_trace.csv";
        let csv = Csv::parse(&text);
        let (d, it, b) = (csv.col("decision", f)?, csv.col("iteration", f)?, csv.col("best_reward", f)?);
        let mut series: Vec<Series> = Vec::new();
        for r in &csv.rows {
            let name = format!("decision {}", r[d]);
            if series.last().is_none_or(|s| s.name != name) {
                series.push(Series { name, points: Vec::new() });
            }
            series.last_mut().expect("just pushed").points.push((csv.num(r, it, f)?, csv.num(r, b, f)?));
        }
        // the longest trace shows the convergence best
        if let Some(best) = series.iter().max_by_key(|s| s.points.len()) {
            let chart = line_chart("Cross-entropy convergence", "iteration", "best reward", std::slice::from_ref(best));
            plots.push(("ce_convergence.svg".into(), chart));
        }
    }

    if let (Some(pgm), Some(meta)) = (read(input, "map.pgm")?, read(input, "map.json")?) {
        let bad = |file: &str, msg: String| PlotError::Parse { file: file.into(), msg };
        let meta: serde_json::Value = serde_json::from_str(&meta).map_err(|e| bad("map.json", e.to_string()))?;
        let resolution = meta["resolution"].as_f64().ok_or_else(|| bad("map.json", "missing resolution".into()))?;
        let mut edges = Vec::new();
        if let Some(g) = read(input, "graph.json")? {
            let g: serde_json::Value = serde_json::from_str(&g).map_err(|e| bad("graph.json", e.to_string()))?;
            let mut pos = BTreeMap::new();
            for n in g["nodes"].as_array().into_iter().flatten() {
                if let (Some(id), Some(x), Some(y)) = (n["id"].as_u64(), n["x"].as_f64(), n["y"].as_f64()) {
                    pos.insert(id, (x, y));
                }
            }
            for e in g["edges"].as_array().into_iter().flatten() {
                if let (Some(a), Some(b)) = (e[0].as_u64().and_then(|a| pos.get(&a)), e[1].as_u64().and_then(|b| pos.get(&b))) {
                    edges.push((*a, *b));
                }
            }
        }
        let mut path = Vec::new();
        if let Some(text) = read(input, "trajectory.csv")? {
            let f = "trajectory.csv";
            let csv = Csv::parse(&text);
            let (x, y) = (csv.col("x", f)?, csv.col("y", f)?);
            for r in &csv.rows {
                path.push((csv.num(r, x, f)?, csv.num(r, y, f)?));
            }
        }
        plots.push(("map.svg".into(), map_overlay(&pgm, resolution, &edges, &path).map_err(|m| bad("map.pgm", m))?));
    }

    if plots.is_empty() {
        return Err(PlotError::NoInput(input.to_path_buf()));
    }
    std::fs::create_dir_all(output).map_err(|e| PlotError::Io(output.to_path_buf(), e))?;
    let mut written = Vec::new();
    for (name, svg) in plots {
        let p = output.join(name);
        std::fs::write(&p, svg).map_err(|e| PlotError::Io(p.clone(), e))?;
        written.push(p);
    }
    Ok(written)
}

fn file_safe(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}
