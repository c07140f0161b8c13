//! SVG 1.1 phase portraits.
//!
//! Output is deterministic: layers and elements are written in a fixed
//! order and every number is printed with 6 significant digits.

use std::fmt::Write;

use qbl_core::dynamics::{separatrices, LimitCycle};
use qbl_core::equilibria::{Census, EquilibriumKind};
use qbl_core::integrate::IntegratorOptions;
use qbl_core::model::{field, predator_isocline, prey_isocline};
use qbl_core::{ModelParams, PhasePoint};

use crate::config::Window;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
const GLYPHS_X: usize = 25;
const GLYPHS_Y: usize = 19;
const CURVE_SAMPLES: usize = 400;
const SEPARATRIX_TIME: f64 = 60.0;

/// Formats `v` with 6 significant digits, without trailing zeros.
pub fn sig6(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return "0".into();
    }
    let mag = v.abs().log10().floor() as i32;
    let decimals = (5 - mag).max(0) as usize;
    let mut s = format!("{v:.decimals$}");
    if s.contains('.') {
        s = s.trim_end_matches('0').trim_end_matches('.').to_string();
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

/// `[-0.5, 1.5 max(1/λ, x of A₂)] × [-1.5 δ/μ, 2]`.
pub fn default_window(p: &ModelParams, census: &Census) -> Window {
    let x_a2 = census.a1_s_a2().map(|t| t[2].location.x).unwrap_or(0.0);
    let x1 = 1.5 * (1.0 / p.lambda()).max(x_a2);
    let y0 = if p.mu() > 0.0 { -1.5 * p.delta() / p.mu() } else { -1.0 };
    Window { x: (-0.5, x1), y: (y0.min(-0.1), 2.0) }
}

struct Canvas {
    w: Window,
}

impl Canvas {
    fn px(&self, q: PhasePoint) -> (f64, f64) {
        let u = (q.x - self.w.x.0) / (self.w.x.1 - self.w.x.0) * WIDTH;
        let v = (self.w.y.1 - q.y) / (self.w.y.1 - self.w.y.0) * HEIGHT;
        (u, v)
    }

    fn pt(&self, q: PhasePoint) -> String {
        let (u, v) = self.px(q);
        format!("{},{}", sig6(u), sig6(v))
    }

    /// Splits a curve into the runs that stay inside the window.
    fn runs(&self, pts: impl IntoIterator<Item = Option<PhasePoint>>) -> Vec<Vec<PhasePoint>> {
        let mut out = vec![Vec::new()];
        for q in pts {
            match q {
                Some(q) if q.is_finite() && self.w.contains(q.x, q.y) => out.last_mut().unwrap().push(q),
                _ => {
                    if !out.last().unwrap().is_empty() {
                        out.push(Vec::new());
                    }
                }
            }
        }
        out.retain(|r| r.len() > 1);
        out
    }

    fn polylines(&self, svg: &mut String, class: &str, runs: &[Vec<PhasePoint>]) {
        for r in runs {
            let pts: Vec<String> = r.iter().map(|&q| self.pt(q)).collect();
            let _ = writeln!(svg, r#"<polyline class="{class}" points="{}"/>"#, pts.join(" "));
        }
    }
}

fn kind_class(k: EquilibriumKind) -> &'static str {
    match k {
        EquilibriumKind::Saddle => "saddle",
        EquilibriumKind::StableNode => "stable-node",
        EquilibriumKind::UnstableNode => "unstable-node",
        EquilibriumKind::StableFocus => "stable-focus",
        EquilibriumKind::UnstableFocus => "unstable-focus",
        EquilibriumKind::CenterOrWeakFocus => "center-or-weak-focus",
        EquilibriumKind::SaddleNode => "saddle-node",
        EquilibriumKind::Degenerate => "degenerate",
    }
}

const STYLE: &str = "\
.glyph{stroke:#9a9a9a;stroke-width:1}
.isocline-prey{fill:none;stroke:#2b7bb9;stroke-width:1.5}
.isocline-predator{fill:none;stroke:#d7191c;stroke-width:1.5}
.ellipse{fill:none;stroke:#6a3d9a;stroke-width:1;stroke-dasharray:4 3}
.separatrix{fill:none;stroke:#333;stroke-width:1}
.cycle{fill:none;stroke:#1a9641;stroke-width:2}
.eq{stroke:#000;stroke-width:1}
.saddle{fill:#fff}
.stable-node,.stable-focus{fill:#000}
.unstable-node,.unstable-focus{fill:#fdae61}
.center-or-weak-focus,.saddle-node,.degenerate{fill:#bbb}
";

/// Renders the portrait of the (rotated) field at `p`. `rotated` selects the
/// field used for glyphs and separatrices.
pub fn render_portrait(p: &ModelParams, census: &Census, cycles: &[LimitCycle], window: Window, rotated: bool) -> String {
    let cv = Canvas { w: window };
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{}" height="{}" viewBox="0 0 {} {}">"#,
        WIDTH, HEIGHT, WIDTH, HEIGHT
    );
    let _ = writeln!(
        svg,
        "<desc>alpha={} beta={} delta={} lambda={} mu={} gamma={} window=[{},{}]x[{},{}]</desc>",
        sig6(p.alpha()),
        sig6(p.beta()),
        sig6(p.delta()),
        sig6(p.lambda()),
        sig6(p.mu()),
        sig6(p.gamma()),
        sig6(window.x.0),
        sig6(window.x.1),
        sig6(window.y.0),
        sig6(window.y.1)
    );
    let _ = writeln!(svg, "<style type=\"text/css\"><![CDATA[\n{STYLE}]]></style>");
    let _ = writeln!(svg, r##"<rect width="{WIDTH}" height="{HEIGHT}" fill="#fff"/>"##);

    // direction field
    let _ = writeln!(svg, r#"<g id="direction-field">"#);
    let len = 0.4 * (WIDTH / GLYPHS_X as f64).min(HEIGHT / GLYPHS_Y as f64);
    for j in 0..GLYPHS_Y {
        for i in 0..GLYPHS_X {
            let x = window.x.0 + (i as f64 + 0.5) / GLYPHS_X as f64 * (window.x.1 - window.x.0);
            let y = window.y.0 + (j as f64 + 0.5) / GLYPHS_Y as f64 * (window.y.1 - window.y.0);
            let f = field(p, PhasePoint::new(x, y), rotated);
            let n = f.norm();
            if !(n > 0.0) || !n.is_finite() {
                continue;
            }
            let (u, v) = cv.px(PhasePoint::new(x, y));
            // screen y points down
            let (du, dv) = (len * f.dx / n, -len * f.dy / n);
            let _ = writeln!(
                svg,
                r#"<line class="glyph" x1="{}" y1="{}" x2="{}" y2="{}"/>"#,
                sig6(u - 0.5 * du),
                sig6(v - 0.5 * dv),
                sig6(u + 0.5 * du),
                sig6(v + 0.5 * dv)
            );
        }
    }
    let _ = writeln!(svg, "</g>");

    // isoclines and ellipse
    let xs: Vec<f64> = (0..=CURVE_SAMPLES)
        .map(|k| window.x.0 + (window.x.1 - window.x.0) * k as f64 / CURVE_SAMPLES as f64)
        .collect();
    let _ = writeln!(svg, r#"<g id="isoclines">"#);
    let prey = cv.runs(xs.iter().map(|&x| Some(PhasePoint::new(x, prey_isocline(p, x)))));
    cv.polylines(&mut svg, "isocline-prey", &prey);
    let pred = cv.runs(xs.iter().map(|&x| predator_isocline(p, x).map(|y| PhasePoint::new(x, y))));
    cv.polylines(&mut svg, "isocline-predator", &pred);
    let _ = writeln!(svg, "</g>");

    let _ = writeln!(svg, r#"<g id="ellipse">"#);
    if let Some(e) = ellipse(p) {
        let runs = cv.runs(e.into_iter().map(Some));
        cv.polylines(&mut svg, "ellipse", &runs);
    }
    let _ = writeln!(svg, "</g>");

    // separatrices
    let _ = writeln!(svg, r#"<g id="separatrices">"#);
    let opts = IntegratorOptions { blowup_radius: 1e3, ..IntegratorOptions::default().with_tolerances(1e-8, 1e-10) };
    for s in census.saddles() {
        let Ok(branches) = separatrices(p, s, rotated, SEPARATRIX_TIME, &opts) else { continue };
        for b in &branches {
            let class = if b.unstable { "separatrix unstable" } else { "separatrix stable" };
            let runs = cv.runs(b.orbit.points().map(Some));
            cv.polylines(&mut svg, class, &runs);
        }
    }
    let _ = writeln!(svg, "</g>");

    // cycles
    let _ = writeln!(svg, r#"<g id="cycles">"#);
    for c in cycles {
        let l = c.oriented_loop();
        if l.len() < 3 {
            continue;
        }
        let mut d = String::new();
        for (k, &q) in l.iter().enumerate() {
            let (u, v) = cv.px(q);
            let _ = write!(d, "{}{},{} ", if k == 0 { "M" } else { "L" }, sig6(u), sig6(v));
        }
        d.push('Z');
        let _ = writeln!(
            svg,
            r#"<path class="cycle {}" data-period="{}" d="{d}"/>"#,
            c.stability,
            sig6(c.period)
        );
    }
    let _ = writeln!(svg, "</g>");

    // equilibria on top
    let _ = writeln!(svg, r#"<g id="equilibria">"#);
    for e in &census.finite {
        if !window.contains(e.location.x, e.location.y) {
            continue;
        }
        let (u, v) = cv.px(e.location);
        let _ = writeln!(
            svg,
            r#"<circle class="eq {}" cx="{}" cy="{}" r="4"><title>{} ({}, {})</title></circle>"#,
            kind_class(e.kind),
            sig6(u),
            sig6(v),
            kind_class(e.kind),
            sig6(e.location.x),
            sig6(e.location.y)
        );
    }
    let _ = writeln!(svg, "</g>");
    svg.push_str("</svg>\n");
    svg
}

/// Closed polyline of `y(δ + μy) = x(1 - λx)`: upper branch left to right,
/// lower branch back. `None` unless μ, λ > 0 (otherwise not an ellipse).
fn ellipse(p: &ModelParams) -> Option<Vec<PhasePoint>> {
    let (d, l, m) = (p.delta(), p.lambda(), p.mu());
    if !(m > 0.0 && l > 0.0) {
        return None;
    }
    // the discriminant δ² + 4μx(1 - λx) is nonnegative between its roots
    let r = (1.0 + d * d * l / m).sqrt();
    let (a, b) = ((1.0 - r) / (2.0 * l), (1.0 + r) / (2.0 * l));
    let n = CURVE_SAMPLES;
    let y = |x: f64, sign: f64| {
        let disc = (d * d + 4.0 * m * x * (1.0 - l * x)).max(0.0);
        (-d + sign * disc.sqrt()) / (2.0 * m)
    };
    // cosine spacing resolves the vertical tangents at the ends
    let xs: Vec<f64> = (0..=n).map(|k| a + (b - a) * 0.5 * (1.0 - (std::f64::consts::PI * k as f64 / n as f64).cos())).collect();
    let mut pts: Vec<PhasePoint> = xs.iter().map(|&x| PhasePoint::new(x, y(x, 1.0))).collect();
    pts.extend(xs.iter().rev().map(|&x| PhasePoint::new(x, y(x, -1.0))));
    Some(pts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use qbl_core::model::ellipse_residual;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(123.456789), "123.457");
        assert_eq!(sig6(0.000123456789), "0.000123457");
        assert_eq!(sig6(-2.0), "-2");
        assert_eq!(sig6(1234567.0), "1234567");
        assert_eq!(sig6(-0.0000001), "-0.0000001");
    }

    #[test]
    fn ellipse_points_satisfy_equation() {
        let p = ModelParams::new(0.0, 0.0, 0.4, 1.2, 0.8).unwrap();
        for q in ellipse(&p).unwrap() {
            assert!(ellipse_residual(&p, q).abs() < 1e-9, "{q:?}");
        }
    }
}
