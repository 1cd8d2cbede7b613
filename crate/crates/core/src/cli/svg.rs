//! Minimal static SVG line charts.

use std::fmt::Write;

pub const PALETTE: [&str; 8] = [
    "#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub color: String,
    pub dashed: bool,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>, color: &str) -> Self {
        Self {
            label: label.into(),
            points,
            color: color.into(),
            dashed: false,
        }
    }

    pub fn dashed(mut self) -> Self {
        self.dashed = true;
        self
    }
}

#[derive(Debug, Clone, Default)]
pub struct Panel {
    pub title: String,
    pub xlabel: String,
    pub ylabel: String,
    pub series: Vec<Series>,
    /// Horizontal reference lines: value and label.
    pub hlines: Vec<(f64, String)>,
}

impl Panel {
    pub fn new(title: &str, xlabel: &str, ylabel: &str) -> Self {
        Self {
            title: title.into(),
            xlabel: xlabel.into(),
            ylabel: ylabel.into(),
            ..Self::default()
        }
    }

    pub fn with(mut self, s: Series) -> Self {
        self.series.push(s);
        self
    }

    pub fn hline(mut self, y: f64, label: &str) -> Self {
        self.hlines.push((y, label.into()));
        self
    }

    fn bounds(&self) -> Option<(f64, f64, f64, f64)> {
        let pts = self
            .series
            .iter()
            .flat_map(|s| s.points.iter())
            .filter(|(x, y)| x.is_finite() && y.is_finite());
        let mut b: Option<(f64, f64, f64, f64)> = None;
        for &(x, y) in pts {
            b = Some(match b {
                None => (x, x, y, y),
                Some((x0, x1, y0, y1)) => (x0.min(x), x1.max(x), y0.min(y), y1.max(y)),
            });
        }
        let (x0, x1, mut y0, mut y1) = b?;
        for (y, _) in &self.hlines {
            y0 = y0.min(*y);
            y1 = y1.max(*y);
        }
        Some((x0, x1, y0, y1))
    }
}

fn nice_step(range: f64) -> f64 {
    let raw = range / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    let m = if f < 1.5 {
        1.0
    } else if f < 3.5 {
        2.0
    } else if f < 7.5 {
        5.0
    } else {
        10.0
    };
    m * mag
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi - lo > 1e-12 * (lo.abs() + hi.abs()).max(1.0) {
        (lo, hi)
    } else {
        let d = lo.abs().max(1.0) * 0.05;
        (lo - d, hi + d)
    }
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let step = nice_step(hi - lo);
    let start = (lo / step).ceil() as i64;
    let end = (hi / step).floor() as i64;
    (start..=end).map(|k| k as f64 * step).collect()
}

fn label(v: f64) -> String {
    let s = if v.abs() >= 1e5 || (v != 0.0 && v.abs() < 1e-3) {
        format!("{v:.1e}")
    } else {
        format!("{:.3}", v)
    };
    if s.contains('.') && !s.contains('e') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

const W: f64 = 460.0;
const H: f64 = 320.0;
const ML: f64 = 70.0;
const MR: f64 = 20.0;
const MT: f64 = 30.0;
const MB: f64 = 45.0;

fn panel_svg(out: &mut String, p: &Panel, ox: f64, oy: f64) {
    let pw = W - ML - MR;
    let ph = H - MT - MB;
    let _ = writeln!(
        out,
        r#"<g transform="translate({ox},{oy})"><text x="{}" y="18" text-anchor="middle" font-size="13">{}</text>"#,
        W / 2.0,
        escape(&p.title)
    );
    let _ = writeln!(
        out,
        r##"<rect x="{ML}" y="{MT}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>"##
    );
    let Some((x0, x1, y0, y1)) = p.bounds() else {
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">no data</text></g>"#, W / 2.0, H / 2.0);
        return;
    };
    let (x0, x1) = padded(x0, x1);
    let (y0, y1) = padded(y0, y1);
    let sx = |x: f64| ML + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| MT + ph - (y - y0) / (y1 - y0) * ph;
    for t in ticks(x0, x1) {
        let _ = writeln!(
            out,
            r##"<line x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}" stroke="#ddd"/><text x="{0:.2}" y="{3:.2}" text-anchor="middle" font-size="10">{4}</text>"##,
            sx(t),
            MT,
            MT + ph,
            MT + ph + 14.0,
            label(t)
        );
    }
    for t in ticks(y0, y1) {
        let _ = writeln!(
            out,
            r##"<line x1="{1:.2}" y1="{0:.2}" x2="{2:.2}" y2="{0:.2}" stroke="#ddd"/><text x="{3:.2}" y="{4:.2}" text-anchor="end" font-size="10">{5}</text>"##,
            sy(t),
            ML,
            ML + pw,
            ML - 4.0,
            sy(t) + 3.0,
            label(t)
        );
    }
    for (y, name) in &p.hlines {
        let _ = writeln!(
            out,
            r##"<line x1="{ML}" y1="{0:.2}" x2="{1:.2}" y2="{0:.2}" stroke="#000" stroke-dasharray="2,3"/><text x="{2:.2}" y="{3:.2}" text-anchor="end" font-size="9">{4}</text>"##,
            sy(*y),
            ML + pw,
            ML + pw - 3.0,
            sy(*y) - 3.0,
            escape(name)
        );
    }
    for s in &p.series {
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        if pts.is_empty() {
            continue;
        }
        let dash = if s.dashed { r#" stroke-dasharray="6,4""# } else { "" };
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5"{dash} points="{}"/>"#,
            s.color,
            pts.join(" ")
        );
    }
    let mut ly = MT + 12.0;
    for s in p.series.iter().filter(|s| !s.label.is_empty()) {
        let dash = if s.dashed { r#" stroke-dasharray="6,4""# } else { "" };
        let _ = writeln!(
            out,
            r#"<line x1="{0:.2}" y1="{1:.2}" x2="{2:.2}" y2="{1:.2}" stroke="{3}" stroke-width="1.5"{dash}/><text x="{4:.2}" y="{5:.2}" font-size="10">{6}</text>"#,
            ML + 6.0,
            ly,
            ML + 26.0,
            s.color,
            ML + 30.0,
            ly + 3.0,
            escape(&s.label)
        );
        ly += 13.0;
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="11">{}</text>"#,
        ML + pw / 2.0,
        H - 8.0,
        escape(&p.xlabel)
    );
    let _ = writeln!(
        out,
        r#"<text x="14" y="{0:.2}" text-anchor="middle" font-size="11" transform="rotate(-90 14 {0:.2})">{1}</text></g>"#,
        MT + ph / 2.0,
        escape(&p.ylabel)
    );
}

/// Lays panels out in a grid of `cols` columns.
pub fn render(title: &str, panels: &[Panel], cols: usize) -> String {
    let cols = cols.max(1).min(panels.len().max(1));
    let rows = panels.len().div_ceil(cols).max(1);
    let (w, h) = (W * cols as f64, H * rows as f64 + 30.0);
    let mut out = format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif">
<rect width="100%" height="100%" fill="white"/>
<text x="{}" y="20" text-anchor="middle" font-size="15">{}</text>
"#,
        w / 2.0,
        escape(title)
    );
    for (i, p) in panels.iter().enumerate() {
        panel_svg(&mut out, p, (i % cols) as f64 * W, 30.0 + (i / cols) as f64 * H);
    }
    out.push_str("</svg>\n");
    out
}

/// Long-format CSV of every plotted point: `panel,series,x,y`.
pub fn data_csv(panels: &[Panel]) -> String {
    let mut out = String::from("panel,series,x,y\n");
    for p in panels {
        for s in &p.series {
            for (x, y) in &s.points {
                let _ = writeln!(out, "\"{}\",\"{}\",{x},{y}", p.title.replace('"', "'"), s.label.replace('"', "'"));
            }
        }
    }
    out
}
