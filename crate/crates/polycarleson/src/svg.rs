//! Self-contained log-log scatter plots with error bars and a fitted line.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

#[derive(Clone, Debug)]
pub struct Series {
    pub label: String,
    /// `(x, y, σ_y)`; nonpositive values are skipped.
    pub points: Vec<(f64, f64, f64)>,
    /// `ln y = intercept + slope · ln x`.
    pub fit: Option<(f64, f64)>,
}

#[derive(Clone, Debug)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

struct Axis {
    lo: f64,
    hi: f64,
}

impl Axis {
    fn new(values: impl Iterator<Item = f64>) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| *v > 0.0 && v.is_finite()) {
            lo = lo.min(v.log10());
            hi = hi.max(v.log10());
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-9 {
            lo -= 0.5;
            hi += 0.5;
        }
        let pad = 0.05 * (hi - lo);
        Self { lo: lo - pad, hi: hi + pad }
    }

    fn frac(&self, v: f64) -> f64 {
        (v.log10() - self.lo) / (self.hi - self.lo)
    }

    /// Integer powers of ten inside the range, or every half decade when
    /// there are fewer than two.
    fn ticks(&self) -> Vec<f64> {
        let step = if self.hi - self.lo < 2.0 { 0.5 } else { 1.0 };
        let mut t = (self.lo / step).ceil() * step;
        let mut out = Vec::new();
        while t <= self.hi {
            out.push(t);
            t += step;
        }
        out
    }
}

fn tick_label(e: f64) -> String {
    if (e - e.round()).abs() < 1e-9 {
        format!("1e{}", e.round() as i64)
    } else {
        format!("{:.2e}", 10f64.powf(e))
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Plot {
    pub fn render(&self) -> String {
        let xs = Axis::new(self.series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
        let ys = Axis::new(
            self.series
                .iter()
                .flat_map(|s| s.points.iter().flat_map(|p| [p.1, p.1 - p.2, p.1 + p.2])),
        );
        let pw = W - LEFT - RIGHT;
        let ph = H - TOP - BOTTOM;
        let px = |x: f64| LEFT + pw * xs.frac(x);
        let py = |y: f64| TOP + ph * (1.0 - ys.frac(y));
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            W / 2.0,
            esc(&self.title)
        );
        let _ = writeln!(
            s,
            r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>"##
        );
        for t in xs.ticks() {
            let x = LEFT + pw * (t - xs.lo) / (xs.hi - xs.lo);
            let _ = writeln!(
                s,
                r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}" stroke="#ddd"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
                TOP + ph,
                TOP + ph + 16.0,
                tick_label(t)
            );
        }
        for t in ys.ticks() {
            let y = TOP + ph * (1.0 - (t - ys.lo) / (ys.hi - ys.lo));
            let _ = writeln!(
                s,
                r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
                LEFT + pw,
                LEFT - 6.0,
                y + 4.0,
                tick_label(t)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            H - 14.0,
            esc(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            esc(&self.y_label)
        );
        for (k, series) in self.series.iter().enumerate() {
            let color = COLORS[k % COLORS.len()];
            let pts: Vec<_> = series.points.iter().filter(|p| p.0 > 0.0 && p.1 > 0.0).collect();
            for &&(x, y, e) in &pts {
                let lo = if y - e > 0.0 { y - e } else { y / 10f64.powf(ys.hi - ys.lo) };
                let _ = writeln!(
                    s,
                    r#"<line x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}" stroke="{color}"/><circle cx="{0:.2}" cy="{3:.2}" r="3.5" fill="{color}"/>"#,
                    px(x),
                    py(lo).min(TOP + ph),
                    py(y + e).max(TOP),
                    py(y)
                );
            }
            let mut legend = esc(&series.label);
            if let Some((slope, intercept)) = series.fit {
                let (x0, x1) = pts
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
                if x0.is_finite() {
                    let f = |x: f64| (intercept + slope * x.ln()).exp();
                    let _ = writeln!(
                        s,
                        r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-dasharray="6 4"/>"#,
                        px(x0),
                        py(f(x0)),
                        px(x1),
                        py(f(x1))
                    );
                }
                legend = format!("{legend}: slope = {slope:.3}");
            }
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" fill="{color}">{legend}</text>"#,
                LEFT + 10.0,
                TOP + 18.0 + 16.0 * k as f64
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_points_line_and_slope() {
        let pts: Vec<(f64, f64, f64)> = (4..10)
            .map(|k| {
                let d = 2f64.powi(-k);
                (d, d.powi(3), 0.01 * d.powi(3))
            })
            .collect();
        let svg = Plot {
            title: "z1 z2 <β = 0>".into(),
            x_label: "δ".into(),
            y_label: "volume".into(),
            series: vec![Series {
                label: "product2".into(),
                points: pts,
                fit: Some((3.0, 0.0)),
            }],
        }
        .render();
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<circle").count(), 6);
        assert!(svg.contains("slope = 3.000"));
        assert!(svg.contains("&lt;β = 0&gt;"));
        assert!(!svg.contains("NaN"));
    }

    #[test]
    fn survives_empty_series() {
        let svg = Plot {
            title: String::new(),
            x_label: String::new(),
            y_label: String::new(),
            series: vec![Series {
                label: "none".into(),
                points: vec![],
                fit: Some((1.0, 0.0)),
            }],
        }
        .render();
        assert!(!svg.contains("NaN"));
    }
}
