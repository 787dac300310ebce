//! Minimal SVG line plots and heatmaps.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 420.0;
const PAD_L: f64 = 70.0;
const PAD_R: f64 = 90.0;
const PAD_T: f64 = 40.0;
const PAD_B: f64 = 55.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

struct Axes {
    x: (f64, f64),
    y: (f64, f64),
}

impl Axes {
    fn new(x: (f64, f64), y: (f64, f64)) -> Self {
        let widen = |(lo, hi): (f64, f64)| if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
        Self {
            x: widen(x),
            y: widen(y),
        }
    }

    fn px(&self, x: f64) -> f64 {
        PAD_L + (x - self.x.0) / (self.x.1 - self.x.0) * (W - PAD_L - PAD_R)
    }

    fn py(&self, y: f64) -> f64 {
        H - PAD_B - (y - self.y.0) / (self.y.1 - self.y.0) * (H - PAD_T - PAD_B)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn frame(out: &mut String, ax: &Axes, title: &str, xlabel: &str, ylabel: &str) {
    let (x0, x1) = (ax.px(ax.x.0), ax.px(ax.x.1));
    let (y0, y1) = (ax.py(ax.y.0), ax.py(ax.y.1));
    let _ = writeln!(
        out,
        r#"<rect x="{x0:.1}" y="{y1:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
        x1 - x0,
        y0 - y1
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let xv = ax.x.0 + f * (ax.x.1 - ax.x.0);
        let yv = ax.y.0 + f * (ax.y.1 - ax.y.0);
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">{}</text>"#,
            ax.px(xv),
            y0 + 16.0,
            fmt_tick(xv)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">{}</text>"#,
            x0 - 6.0,
            ax.py(yv) + 4.0,
            fmt_tick(yv)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="24" font-size="14" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        escape(title)
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        H - 12.0,
        escape(xlabel)
    );
    let _ = writeln!(
        out,
        r#"<text x="18" y="{:.1}" font-size="12" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(ylabel)
    );
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 || (1e-2..1e4).contains(&v.abs()) {
        format!("{:.3}", v)
            .trim_end_matches('0')
            .trim_end_matches('.')
            .to_string()
    } else {
        format!("{v:.1e}")
    }
}

fn range(it: impl Iterator<Item = f64>) -> (f64, f64) {
    it.filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// One polyline per named series.
pub fn line_plot(series: &[(String, Vec<(f64, f64)>)], title: &str, xlabel: &str, ylabel: &str) -> String {
    let pts = || series.iter().flat_map(|(_, p)| p.iter());
    let mut ax = Axes::new(range(pts().map(|p| p.0)), range(pts().map(|p| p.1)));
    if !ax.x.0.is_finite() {
        ax = Axes::new((0.0, 1.0), (0.0, 1.0));
    }
    let mut out = format!(r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    out.push('\n');
    frame(&mut out, &ax, title, xlabel, ylabel);
    for (i, (name, p)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = p
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(x, y)| format!("{:.2},{:.2}", ax.px(*x), ax.py(*y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            path.join(" ")
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" fill="{color}">{}</text>"#,
            W - PAD_R + 8.0,
            PAD_T + 14.0 * (i as f64 + 1.0),
            escape(name)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn color_map(t: f64) -> String {
    // Blue through white to red.
    let t = t.clamp(0.0, 1.0);
    let (r, g, b) = if t < 0.5 {
        let u = t / 0.5;
        (u, u, 1.0)
    } else {
        let u = (t - 0.5) / 0.5;
        (1.0, 1.0 - u, 1.0 - u)
    };
    format!(
        "#{:02x}{:02x}{:02x}",
        (r * 255.0) as u8,
        (g * 255.0) as u8,
        (b * 255.0) as u8
    )
}

/// Heatmap of `values[i][j]` at `(xs[i], ys[j])`.
pub fn heatmap(xs: &[f64], ys: &[f64], values: &[Vec<f64>], title: &str, xlabel: &str, ylabel: &str) -> String {
    let ax = Axes::new(range(xs.iter().cloned()), range(ys.iter().cloned()));
    let (lo, hi) = range(values.iter().flatten().cloned());
    let (lo, hi) = if lo.is_finite() && hi > lo {
        (lo, hi)
    } else {
        (0.0, 1.0)
    };
    let mut out = format!(r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    out.push('\n');
    let half = |v: &[f64], i: usize| {
        if v.len() < 2 {
            0.5
        } else if i + 1 < v.len() {
            (v[i + 1] - v[i]) / 2.0
        } else {
            (v[i] - v[i - 1]) / 2.0
        }
    };
    for (i, &x) in xs.iter().enumerate() {
        for (j, &y) in ys.iter().enumerate() {
            let v = values[i][j];
            if !v.is_finite() {
                continue;
            }
            let (dx, dy) = (half(xs, i), half(ys, j));
            let (l, r) = (ax.px(x - dx), ax.px(x + dx));
            let (t, b) = (ax.py(y + dy), ax.py(y - dy));
            let _ = writeln!(
                out,
                r#"<rect x="{l:.2}" y="{t:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                (r - l).abs() + 0.3,
                (b - t).abs() + 0.3,
                color_map((v - lo) / (hi - lo))
            );
        }
    }
    frame(&mut out, &ax, title, xlabel, ylabel);
    let bar_x = W - PAD_R + 20.0;
    for k in 0..50 {
        let t = k as f64 / 49.0;
        let y = H - PAD_B - t * (H - PAD_T - PAD_B);
        let _ = writeln!(
            out,
            r#"<rect x="{bar_x:.1}" y="{:.2}" width="14" height="6" fill="{}"/>"#,
            y - 6.0,
            color_map(t)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-size="10">{}</text>"#,
        bar_x + 18.0,
        PAD_T + 4.0,
        fmt_tick(hi)
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-size="10">{}</text>"#,
        bar_x + 18.0,
        H - PAD_B,
        fmt_tick(lo)
    );
    out.push_str("</svg>\n");
    out
}
