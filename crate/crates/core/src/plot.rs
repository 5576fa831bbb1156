//! Minimal SVG output: line charts with shaded bands and heat maps.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 120.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Clone, Debug, Default)]
pub struct Series {
    pub name: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Optional (lower, upper) band around `y`.
    pub band: Option<(Vec<f64>, Vec<f64>)>,
    /// Scatter points drawn on top, e.g. reference data.
    pub markers: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, Default)]
pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        MARGIN_L + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - MARGIN_L - MARGIN_R)
    }
    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN_B - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - MARGIN_T - MARGIN_B)
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(title));
}

fn axes(out: &mut String, f: &Frame, x_label: &str, y_label: &str) {
    let (l, r, t, b) = (MARGIN_L, WIDTH - MARGIN_R, MARGIN_T, HEIGHT - MARGIN_B);
    let _ = writeln!(out, r#"<path d="M{l} {t}V{b}H{r}" fill="none" stroke="black"/>"#);
    for i in 0..=4 {
        let xv = f.x0 + (f.x1 - f.x0) * i as f64 / 4.0;
        let yv = f.y0 + (f.y1 - f.y0) * i as f64 / 4.0;
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, f.px(xv), b + 16.0, tick(xv));
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, l - 6.0, f.py(yv) + 4.0, tick(yv));
    }
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, (l + r) / 2.0, HEIGHT - 10.0, escape(x_label));
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        (t + b) / 2.0,
        (t + b) / 2.0,
        escape(y_label)
    );
}

fn tick(v: f64) -> String {
    if v.abs() >= 100.0 || v == 0.0 {
        format!("{v:.0}")
    } else if v.abs() >= 1.0 {
        format!("{v:.2}")
    } else {
        format!("{v:.3}")
    }
}

impl LinePlot {
    pub fn render(&self) -> String {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for s in &self.series {
            xs.extend_from_slice(&s.x);
            ys.extend_from_slice(&s.y);
            if let Some((lo, hi)) = &s.band {
                ys.extend(lo.iter().chain(hi).copied());
            }
            for &(x, y) in &s.markers {
                xs.push(x);
                ys.push(y);
            }
        }
        let fin = |v: &Vec<f64>| v.iter().copied().filter(|x| x.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |a, x| (a.0.min(x), a.1.max(x)));
        let (x0, x1) = padded(fin(&xs).0, fin(&xs).1);
        let (y0, y1) = padded(fin(&ys).0, fin(&ys).1);
        let f = Frame { x0, x1, y0, y1 };

        let mut out = String::new();
        header(&mut out, &self.title);
        axes(&mut out, &f, &self.x_label, &self.y_label);
        for (k, s) in self.series.iter().enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            if let Some((lo, hi)) = &s.band {
                let mut d = String::new();
                for (i, (&x, &u)) in s.x.iter().zip(hi).enumerate() {
                    let _ = write!(d, "{}{:.2} {:.2}", if i == 0 { "M" } else { "L" }, f.px(x), f.py(u));
                }
                for (&x, &l) in s.x.iter().zip(lo).rev() {
                    let _ = write!(d, "L{:.2} {:.2}", f.px(x), f.py(l));
                }
                let _ = writeln!(out, r#"<path class="band" d="{d}Z" fill="{color}" fill-opacity="0.2" stroke="none"/>"#);
            }
            let pts: Vec<String> = s.x.iter().zip(&s.y).map(|(&x, &y)| format!("{:.2},{:.2}", f.px(x), f.py(y))).collect();
            let _ = writeln!(out, r#"<polyline class="mean" points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, pts.join(" "));
            for &(x, y) in &s.markers {
                let _ = writeln!(out, r#"<circle class="reference" cx="{:.2}" cy="{:.2}" r="3" fill="black"/>"#, f.px(x), f.py(y));
            }
            let ly = MARGIN_T + 16.0 * k as f64 + 10.0;
            let lx = WIDTH - MARGIN_R + 10.0;
            let _ = writeln!(out, r#"<rect x="{lx}" y="{:.1}" width="12" height="3" fill="{color}"/>"#, ly - 4.0);
            let _ = writeln!(out, r#"<text x="{}" y="{ly:.1}">{}</text>"#, lx + 16.0, escape(&s.name));
        }
        out.push_str("</svg>\n");
        out
    }
}

/// Heat map of `values` (row-major, `ys.len()` rows by `xs.len()` columns).
/// `None` cells are drawn hatched grey.
pub fn heatmap(title: &str, x_label: &str, y_label: &str, xs: &[f64], ys: &[f64], values: &[Option<f64>]) -> String {
    assert_eq!(values.len(), xs.len() * ys.len(), "heat map shape");
    let (x0, x1) = edges(xs);
    let (y0, y1) = edges(ys);
    let f = Frame { x0, x1, y0, y1 };
    let (lo, hi) = values.iter().flatten().copied().fold((f64::INFINITY, f64::NEG_INFINITY), |a, v| (a.0.min(v), a.1.max(v)));

    let mut out = String::new();
    header(&mut out, title);
    out.push_str(
        "<defs><pattern id=\"invalid\" width=\"6\" height=\"6\" patternUnits=\"userSpaceOnUse\">\
         <rect width=\"6\" height=\"6\" fill=\"#bbbbbb\"/><path d=\"M0 6L6 0\" stroke=\"#666666\"/></pattern></defs>\n",
    );
    let cw = (f.px(x1) - f.px(x0)) / xs.len().max(1) as f64;
    let ch = (f.py(y0) - f.py(y1)) / ys.len().max(1) as f64;
    for (i, _) in ys.iter().enumerate() {
        for (j, _) in xs.iter().enumerate() {
            let x = MARGIN_L + cw * j as f64;
            let y = HEIGHT - MARGIN_B - ch * (i + 1) as f64;
            match values[i * xs.len() + j] {
                Some(v) => {
                    let t = if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
                    let _ = writeln!(out, r#"<rect class="cell" x="{x:.2}" y="{y:.2}" width="{cw:.2}" height="{ch:.2}" fill="{}"/>"#, ramp(t));
                }
                None => {
                    let _ = writeln!(out, r#"<rect class="invalid" x="{x:.2}" y="{y:.2}" width="{cw:.2}" height="{ch:.2}" fill="url(#invalid)"/>"#);
                }
            }
        }
    }
    axes(&mut out, &f, x_label, y_label);
    let lx = WIDTH - MARGIN_R + 20.0;
    for k in 0..=10 {
        let t = k as f64 / 10.0;
        let y = HEIGHT - MARGIN_B - t * (HEIGHT - MARGIN_T - MARGIN_B);
        let _ = writeln!(out, r#"<rect x="{lx}" y="{:.1}" width="16" height="{:.1}" fill="{}"/>"#, y - 24.0, 24.0, ramp(t));
    }
    if lo.is_finite() {
        let _ = writeln!(out, r#"<text x="{}" y="{}">{}</text>"#, lx + 20.0, HEIGHT - MARGIN_B, tick(lo));
        let _ = writeln!(out, r#"<text x="{}" y="{}">{}</text>"#, lx + 20.0, MARGIN_T + 10.0, tick(hi));
    }
    out.push_str("</svg>\n");
    out
}

fn edges(v: &[f64]) -> (f64, f64) {
    match v {
        [] => (0.0, 1.0),
        [x] => (x - 0.5, x + 0.5),
        _ => {
            let h0 = (v[1] - v[0]) / 2.0;
            let h1 = (v[v.len() - 1] - v[v.len() - 2]) / 2.0;
            (v[0] - h0, v[v.len() - 1] + h1)
        }
    }
}

/// Blue to yellow.
fn ramp(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let stops = [(68.0, 1.0, 84.0), (59.0, 82.0, 139.0), (33.0, 145.0, 140.0), (94.0, 201.0, 98.0), (253.0, 231.0, 37.0)];
    let s = t * (stops.len() - 1) as f64;
    let i = (s.floor() as usize).min(stops.len() - 2);
    let u = s - i as f64;
    let c = |a: f64, b: f64| (a + (b - a) * u).round() as u8;
    let (a, b) = (stops[i], stops[i + 1]);
    format!("#{:02x}{:02x}{:02x}", c(a.0, b.0), c(a.1, b.1), c(a.2, b.2))
}
