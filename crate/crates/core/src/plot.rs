//! Deterministic SVG line charts of aggregate competence and wasted-trial
//! curves.
//!
//! Output depends only on the CSV contents: numbers are printed with fixed
//! precision and series keep their order of first appearance.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 300.0;
const MARGIN_L: f64 = 55.0;
const MARGIN_R: f64 = 70.0;
const MARGIN_T: f64 = 35.0;
const MARGIN_B: f64 = 45.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// One line with its confidence band.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    /// `(x, mean, low, high)`.
    pub points: Vec<(f64, f64, f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub title: String,
    pub y_label: String,
    pub series: Vec<Series>,
    /// Fixed y range; derived from the data when `None`.
    pub y_range: Option<(f64, f64)>,
}

fn read_rows(path: &Path, columns: &[&str]) -> Result<Vec<Vec<String>>> {
    if !path.exists() {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
        ));
    }
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let headers = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
    let idx: Vec<usize> = columns
        .iter()
        .map(|c| {
            headers.iter().position(|h| h == *c).ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                message: format!("missing column `{c}`"),
            })
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        rows.push(idx.iter().map(|i| rec.get(*i).unwrap_or("").to_string()).collect());
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput {
            path: path.to_path_buf(),
            message: "no data rows".into(),
        });
    }
    Ok(rows)
}

fn num(path: &Path, s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        message: format!("not a number: `{s}`"),
    })
}

/// Competence series per goal from a `competence_agg.csv`.
pub fn load_competence(path: &Path) -> Result<Vec<Series>> {
    let rows = read_rows(path, &["trial_index", "goal", "mean", "ci_low", "ci_high"])?;
    let mut order: Vec<String> = Vec::new();
    let mut by_goal: BTreeMap<String, Vec<(f64, f64, f64, f64)>> = BTreeMap::new();
    for r in &rows {
        if !by_goal.contains_key(&r[1]) {
            order.push(r[1].clone());
        }
        by_goal.entry(r[1].clone()).or_default().push((
            num(path, &r[0])?,
            num(path, &r[2])?,
            num(path, &r[3])?,
            num(path, &r[4])?,
        ));
    }
    Ok(order
        .into_iter()
        .map(|label| {
            let points = by_goal.remove(&label).unwrap_or_default();
            Series { label, points }
        })
        .collect())
}

/// The cumulative wasted-trial series from a `wasted_agg.csv`.
pub fn load_wasted(path: &Path) -> Result<Series> {
    let rows = read_rows(path, &["interval_end", "mean", "ci_low", "ci_high"])?;
    let points = rows
        .iter()
        .map(|r| Ok((num(path, &r[0])?, num(path, &r[1])?, num(path, &r[2])?, num(path, &r[3])?)))
        .collect::<Result<_>>()?;
    Ok(Series {
        label: "wasted".into(),
        points,
    })
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn nice_step(span: f64) -> f64 {
    if span <= 0.0 {
        return 1.0;
    }
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    let nice = if f < 1.5 {
        1.0
    } else if f < 3.5 {
        2.0
    } else if f < 7.5 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn render_panel(svg: &mut String, panel: &Panel, ox: f64, oy: f64) {
    let all = panel.series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, m, lo, hi) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(lo.min(m));
        y1 = y1.max(hi.max(m));
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if let Some(r) = panel.y_range {
        (y0, y1) = r;
    } else {
        y0 = y0.min(0.0);
        if y1 <= y0 {
            y1 = y0 + 1.0;
        }
    }
    let pw = PANEL_W - MARGIN_L - MARGIN_R;
    let ph = PANEL_H - MARGIN_T - MARGIN_B;
    let sx = |x: f64| ox + MARGIN_L + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| oy + MARGIN_T + (1.0 - (y.clamp(y0, y1) - y0) / (y1 - y0)) * ph;

    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="14">{}</text>"#,
        ox + MARGIN_L + pw / 2.0,
        oy + 20.0,
        escape(&panel.title)
    );
    let _ = writeln!(
        svg,
        r##"<rect x="{:.2}" y="{:.2}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="#444"/>"##,
        ox + MARGIN_L,
        oy + MARGIN_T
    );
    let xs = nice_step(x1 - x0);
    let mut t = (x0 / xs).ceil() * xs;
    while t <= x1 + 1e-9 {
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="10">{}</text>"#,
            sx(t),
            oy + MARGIN_T + ph + 14.0,
            t
        );
        t += xs;
    }
    let ys = nice_step(y1 - y0);
    let mut t = (y0 / ys).ceil() * ys;
    while t <= y1 + 1e-9 {
        let _ = writeln!(
            svg,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end" font-size="10">{}</text>"##,
            ox + MARGIN_L,
            ox + MARGIN_L + pw,
            ox + MARGIN_L - 4.0,
            sy(t) + 3.0,
            (t * 1000.0).round() / 1000.0,
            y = sy(t),
        );
        t += ys;
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="11">trial</text>"#,
        ox + MARGIN_L + pw / 2.0,
        oy + PANEL_H - 10.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{x:.2}" y="{y:.2}" text-anchor="middle" font-size="11" transform="rotate(-90 {x:.2} {y:.2})">{}</text>"#,
        escape(&panel.y_label),
        x = ox + 14.0,
        y = oy + MARGIN_T + ph / 2.0,
    );

    for (i, s) in panel.series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        if s.points.is_empty() {
            continue;
        }
        let mut band = String::new();
        for &(x, _, _, hi) in &s.points {
            let _ = write!(band, "{:.2},{:.2} ", sx(x), sy(hi));
        }
        for &(x, _, lo, _) in s.points.iter().rev() {
            let _ = write!(band, "{:.2},{:.2} ", sx(x), sy(lo));
        }
        let _ = writeln!(
            svg,
            r#"<polygon points="{}" fill="{color}" fill-opacity="0.18" stroke="none"/>"#,
            band.trim_end()
        );
        let line: Vec<String> = s
            .points
            .iter()
            .map(|&(x, m, _, _)| format!("{:.2},{:.2}", sx(x), sy(m)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline class="series" data-label="{}" points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            escape(&s.label),
            line.join(" ")
        );
        let ly = oy + MARGIN_T + 12.0 + 16.0 * i as f64;
        let lx = ox + MARGIN_L + pw + 10.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}" font-size="11">{}</text>"#,
            lx + 16.0,
            lx + 20.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
}

/// Renders panels side by side into one SVG document.
pub fn render(panels: &[Panel]) -> String {
    let width = PANEL_W * panels.len().max(1) as f64;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{PANEL_H:.0}" viewBox="0 0 {width:.0} {PANEL_H:.0}" font-family="sans-serif">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (i, p) in panels.iter().enumerate() {
        render_panel(&mut svg, p, PANEL_W * i as f64, 0.0);
    }
    svg.push_str("</svg>\n");
    svg
}

fn panel_title(dir: &Path) -> String {
    let cfg = dir.join("config.toml");
    if let Ok(c) = crate::config::ExperimentConfig::from_path(&cfg) {
        return format!("{} ({})", c.system, dir.file_name().and_then(|n| n.to_str()).unwrap_or(""));
    }
    dir.file_name()
        .and_then(|n| n.to_str())
        .unwrap_or("results")
        .to_string()
}

/// Builds `competence.svg` (one panel per input directory) and `wasted.svg`
/// (side-by-side panels) in `out`. Every input is read before anything is
/// written, so a missing or empty CSV leaves no output behind.
pub fn plot_dirs(inputs: &[PathBuf], out: &Path) -> Result<Vec<PathBuf>> {
    if inputs.is_empty() {
        return Err(Error::Config("no input directories given".into()));
    }
    let mut comp = Vec::new();
    let mut wasted = Vec::new();
    for dir in inputs {
        let title = panel_title(dir);
        comp.push(Panel {
            title: title.clone(),
            y_label: "competence".into(),
            series: load_competence(&dir.join("competence_agg.csv"))?,
            y_range: Some((0.0, 1.0)),
        });
        wasted.push(Panel {
            title,
            y_label: "cumulative wasted trials".into(),
            series: vec![load_wasted(&dir.join("wasted_agg.csv"))?],
            y_range: None,
        });
    }
    let files = [
        (out.join("competence.svg"), render(&comp)),
        (out.join("wasted.svg"), render(&wasted)),
    ];
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut written = Vec::new();
    for (path, text) in files {
        let tmp = path.with_extension("svg.tmp");
        std::fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
