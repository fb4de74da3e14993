//! Static SVG line charts of trace columns.

use std::fmt::Write;

use thiserror::Error;

use crate::csvio::Table;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 130.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlotError {
    #[error("no series selected")]
    NoSeries,
    #[error("no column named `{0}`")]
    UnknownSeries(String),
    #[error("the table has no `t` column")]
    MissingTime,
    #[error("the table has no rows")]
    Empty,
}

/// Round tick spacing giving about `target` intervals over `span`.
fn tick_step(span: f64, target: f64) -> f64 {
    let raw = span / target;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let nice = if norm < 1.5 {
        1.0
    } else if norm < 3.5 {
        2.0
    } else if norm < 7.5 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

struct Axis {
    lo: f64,
    hi: f64,
    step: f64,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>) -> Self {
        let (mut lo, mut hi) = values
            .filter(|v| v.is_finite())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
            lo -= 0.5;
            hi += 0.5;
        }
        let step = tick_step(hi - lo, 5.0);
        Axis {
            lo: (lo / step).floor() * step,
            hi: (hi / step).ceil() * step,
            step,
        }
    }

    fn ticks(&self) -> Vec<f64> {
        let n = ((self.hi - self.lo) / self.step).round() as i64;
        (0..=n).map(|i| self.lo + i as f64 * self.step).collect()
    }

    fn decimals(&self) -> usize {
        (-self.step.log10().floor()).max(0.0) as usize
    }

    fn map(&self, v: f64, from: f64, to: f64) -> f64 {
        from + (v - self.lo) / (self.hi - self.lo) * (to - from)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// One polyline per selected column against `t`, with ticks and a legend.
/// `None` selects every column except `t`.
pub fn plot_svg(table: &Table, series: Option<&[String]>) -> Result<String, PlotError> {
    let t = table.column("t").ok_or(PlotError::MissingTime)?;
    if t.is_empty() {
        return Err(PlotError::Empty);
    }
    let names: Vec<String> = match series {
        Some(s) => s.to_vec(),
        None => table.names.iter().filter(|n| *n != "t").cloned().collect(),
    };
    if names.is_empty() {
        return Err(PlotError::NoSeries);
    }
    let columns: Vec<&[f64]> = names
        .iter()
        .map(|n| table.column(n).ok_or_else(|| PlotError::UnknownSeries(n.clone())))
        .collect::<Result<_, _>>()?;

    let x = Axis::fit(t.iter().copied());
    let y = Axis::fit(columns.iter().flat_map(|c| c.iter().copied()));
    let (x0, x1) = (LEFT, WIDTH - RIGHT);
    let (y0, y1) = (HEIGHT - BOTTOM, TOP);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r##"<rect x="{x0}" y="{y1}" width="{:.2}" height="{:.2}" fill="none" stroke="#333"/>"##,
        x1 - x0,
        y0 - y1
    );
    for v in x.ticks() {
        let px = x.map(v, x0, x1);
        let _ = writeln!(
            s,
            r##"<line x1="{px:.2}" y1="{y0}" x2="{px:.2}" y2="{:.2}" stroke="#333"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{:.*}</text>"##,
            y0 + 5.0,
            y0 + 20.0,
            x.decimals(),
            v
        );
    }
    for v in y.ticks() {
        let py = y.map(v, y0, y1);
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{py:.2}" x2="{x0}" y2="{py:.2}" stroke="#333"/><text x="{:.2}" y="{:.2}" text-anchor="end">{:.*}</text>"##,
            x0 - 5.0,
            x0 - 8.0,
            py + 4.0,
            y.decimals(),
            v
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">t</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 10.0
    );
    for (i, (name, col)) in names.iter().zip(&columns).enumerate() {
        let color = COLORS[i % COLORS.len()];
        let points: Vec<String> = t
            .iter()
            .zip(col.iter())
            .filter(|(a, b)| a.is_finite() && b.is_finite())
            .map(|(a, b)| format!("{:.2},{:.2}", x.map(*a, x0, x1), y.map(*b, y0, y1)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            points.join(" ")
        );
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            x1 + 15.0,
            x1 + 40.0,
            x1 + 45.0,
            ly + 4.0,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}
