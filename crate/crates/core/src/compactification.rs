//! Singular points at infinity in the charts `u = y/x, z = 1/x` and
//! `v = x/y, z = 1/y`.
//!
//! The induced chart fields are the planar field written in chart
//! coordinates and multiplied by `z^(d-1)`, d the degree of the stage
//! (2, 3 or 4). For z > 0 the rescaling preserves time direction.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{ModelParams, Stage};
use crate::poly::Poly;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Chart {
    #[serde(rename = "u-chart")]
    U,
    #[serde(rename = "v-chart")]
    V,
}

impl std::fmt::Display for Chart {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Chart::U => "u-chart",
            Chart::V => "v-chart",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InfiniteKind {
    Node,
    Saddle,
    SaddleNode,
    TripleNode,
    OtherDegenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfiniteSingularity {
    pub chart: Chart,
    pub coordinate: f64,
    #[serde(rename = "type")]
    pub kind: InfiniteKind,
    /// Root multiplicity in the chart equation.
    pub multiplicity: usize,
    /// Verdict on the z < 0 side of the chart.
    pub kind_lower: InfiniteKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

/// The chart equations on the equator, with the stage-independent overall
/// factor dropped: `(1-μ)u² + (1+λ)u`, `μu² - λu`, and `(1+λ)v² + (1-μ)v`,
/// `λv³ - μv²`, `λv⁴ - μv³`.
pub fn chart_polynomial(p: &ModelParams, chart: Chart) -> Poly {
    let (l, m) = (p.lambda(), p.mu());
    match (p.stage(), chart) {
        (Stage::Quadratic, Chart::U) => Poly::new(vec![0.0, 1.0 + l, 1.0 - m]),
        (Stage::Quadratic, Chart::V) => Poly::new(vec![0.0, 1.0 - m, 1.0 + l]),
        (_, Chart::U) => Poly::new(vec![0.0, -l, m]),
        (Stage::Cubic, Chart::V) => Poly::new(vec![0.0, 0.0, -m, l]),
        (Stage::Quartic, Chart::V) => Poly::new(vec![0.0, 0.0, 0.0, -m, l]),
    }
}

/// Induced field `(ẇ, ż)` of the chart at `(w, z)`, where w is u or v.
pub fn chart_field(p: &ModelParams, chart: Chart, w: f64, z: f64) -> (f64, f64) {
    let (a, b, d, l, m) = (p.alpha(), p.beta(), p.delta(), p.lambda(), p.mu());
    let stage = p.stage();
    let zd = z.powi(stage.degree() as i32 - 2);
    match chart {
        Chart::U => {
            let at = match stage {
                Stage::Quartic => (z + b) * z + a,
                Stage::Cubic => b + z,
                Stage::Quadratic => 1.0,
            };
            let pt = (z - l) * at - w * zd;
            let qt = -w * ((d * z + m * w) * at - zd);
            (qt - w * pt, -z * pt)
        }
        Chart::V => {
            let bt = match stage {
                Stage::Quartic => a * w * w + b * w * z + z * z,
                Stage::Cubic => b * w + z,
                Stage::Quadratic => 1.0,
            };
            let ph = w * ((z - l * w) * bt - zd);
            let qh = -((d * z + m) * bt - w * zd);
            (ph - w * qh, -z * qh)
        }
    }
}

/// Real roots of the chart equations with multiplicities. All u-chart
/// roots are kept; the v-chart contributes only v = 0, since its other
/// roots are the u-chart directions with v = 1/u.
pub fn infinite_roots(p: &ModelParams) -> Result<Vec<(Chart, f64, usize)>> {
    let mut out = Vec::new();
    for chart in [Chart::U, Chart::V] {
        let poly = chart_polynomial(p, chart);
        if poly.is_zero() {
            return Err(Error::DegenerateChart(format!("{chart} equation vanishes identically")));
        }
        for (r, k) in poly.real_roots_with_multiplicity(1e-6)? {
            if chart == Chart::V && r != 0.0 {
                continue;
            }
            out.push((chart, r, k));
        }
    }
    Ok(out)
}

pub fn infinite_census(p: &ModelParams) -> Result<Vec<InfiniteSingularity>> {
    let mut out: Vec<InfiniteSingularity> = infinite_roots(p)?
        .into_iter()
        .map(|(chart, coordinate, multiplicity)| {
            let s = InfiniteSingularity {
                chart,
                coordinate,
                kind: InfiniteKind::OtherDegenerate,
                multiplicity,
                kind_lower: InfiniteKind::OtherDegenerate,
                diagnostic: None,
            };
            classify_infinite(p, &s).unwrap_or_else(|e| InfiniteSingularity {
                diagnostic: Some(e.to_string()),
                ..s
            })
        })
        .collect();
    out.sort_by(|a, b| {
        (a.chart as u8).cmp(&(b.chart as u8)).then(a.coordinate.total_cmp(&b.coordinate))
    });
    Ok(out)
}

/// Fills in the type of `s`. Hyperbolic points are typed by the chart
/// Jacobian, which is triangular on the invariant equator. Otherwise each
/// half-disc is split into sectors by its characteristic directions and
/// the sectors are typed from the radial flow on their boundary rays, at
/// radii 1e-3 and 1e-4.
pub fn classify_infinite(p: &ModelParams, s: &InfiniteSingularity) -> Result<InfiniteSingularity> {
    let c = s.coordinate;
    let h = 1e-6 * (1.0 + c.abs());
    let a = (chart_field(p, s.chart, c + h, 0.0).0 - chart_field(p, s.chart, c - h, 0.0).0) / (2.0 * h);
    let b = (chart_field(p, s.chart, c, h).1 - chart_field(p, s.chart, c, -h).1) / (2.0 * h);
    let scale = a.abs().max(b.abs()).max(1.0);
    let hyperbolic = s.multiplicity == 1 && a.abs() > 1e-7 * scale && b.abs() > 1e-7 * scale;
    let mut out = s.clone();
    if hyperbolic {
        // z -> -z flips the time direction only when the degree is even
        let kind = if a * b > 0.0 { InfiniteKind::Node } else { InfiniteKind::Saddle };
        out.kind = kind;
        out.kind_lower = kind;
        out.diagnostic = None;
        return Ok(out);
    }
    let mut notes = Vec::new();
    let upper = half_disc_kind(p, s, 1.0, &mut notes)?;
    let lower = half_disc_kind(p, s, -1.0, &mut notes)?;
    out.kind = upper;
    out.kind_lower = lower;
    out.diagnostic = if notes.is_empty() { None } else { Some(notes.join("; ")) };
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sector {
    Hyperbolic,
    Parabolic,
}

/// Sectors of the half-disc of radius `r` on the `side` of the equator,
/// ordered by angle. Characteristic directions are the two equator rays,
/// sign changes of the angular flow component over 512 rays, and the
/// vertical ray when it is an invariant axis of the plane. Adjacent
/// parabolic sectors are merged.
pub fn half_disc_sectors(p: &ModelParams, chart: Chart, c: f64, side: f64, r: f64) -> Vec<Sector> {
    const RAYS: usize = 512;
    let comps = |th: f64| {
        let (dw, dz) = (r * th.cos(), side * r * th.sin());
        let (fw, fz) = chart_field(p, chart, c + dw, dz);
        (fw * dw + fz * dz, dw * fz - dz * fw)
    };
    let mut dirs = vec![0.0];
    let axis = c == 0.0;
    let mut prev = comps(PI / RAYS as f64).1;
    for k in 2..RAYS {
        let th = PI * k as f64 / RAYS as f64;
        let ang = comps(th).1;
        if ang != 0.0 && prev != 0.0 && (ang > 0.0) != (prev > 0.0) {
            let mid = th - 0.5 * PI / RAYS as f64;
            if !(axis && (mid - 0.5 * PI).abs() < 2.0 * PI / RAYS as f64) {
                dirs.push(mid);
            }
        }
        if ang != 0.0 {
            prev = ang;
        }
    }
    if axis {
        dirs.push(0.5 * PI);
    }
    dirs.push(PI);
    dirs.sort_by(f64::total_cmp);
    let signs: Vec<bool> = dirs.iter().map(|&th| comps(th).0 > 0.0).collect();
    let mut out: Vec<Sector> = Vec::new();
    for w in signs.windows(2) {
        let k = if w[0] == w[1] { Sector::Parabolic } else { Sector::Hyperbolic };
        // adjacent parabolic sectors form a single one
        if !(k == Sector::Parabolic && out.last() == Some(&Sector::Parabolic)) {
            out.push(k);
        }
    }
    out
}

fn half_disc_kind(
    p: &ModelParams,
    s: &InfiniteSingularity,
    side: f64,
    notes: &mut Vec<String>,
) -> Result<InfiniteKind> {
    let s1 = half_disc_sectors(p, s.chart, s.coordinate, side, 1e-3);
    let s2 = half_disc_sectors(p, s.chart, s.coordinate, side, 1e-4);
    if s1 != s2 {
        return Err(Error::Unclassifiable(format!(
            "{} {}: sectors {s1:?} vs {s2:?} at radii 1e-3 and 1e-4",
            s.chart, s.coordinate
        )));
    }
    let hyp = s1.iter().filter(|&&k| k == Sector::Hyperbolic).count();
    let kind = match (hyp, s1.len() - hyp, s.multiplicity) {
        (0, _, 1) => InfiniteKind::Node,
        (0, _, 3) => InfiniteKind::TripleNode,
        (1, par, 2) if par >= 1 => InfiniteKind::SaddleNode,
        (h, 0, 1) if h >= 1 => InfiniteKind::Saddle,
        (h, par, k) => {
            notes.push(format!(
                "{h} hyperbolic and {par} parabolic sectors with multiplicity {k} on the {} side",
                if side > 0.0 { "z > 0" } else { "z < 0" }
            ));
            InfiniteKind::OtherDegenerate
        }
    };
    Ok(kind)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn find(v: &[InfiniteSingularity], chart: Chart, c: f64) -> &InfiniteSingularity {
        v.iter()
            .find(|s| s.chart == chart && (s.coordinate - c).abs() < 1e-9)
            .unwrap_or_else(|| panic!("no {chart} point at {c}: {v:?}"))
    }

    #[test]
    fn quadratic_directions() {
        let p = ModelParams::new(0.0, 0.0, 0.3, 1.5, 2.0).unwrap();
        let v = infinite_census(&p).unwrap();
        assert_eq!(v.len(), 3, "{v:?}");
        find(&v, Chart::U, 0.0);
        find(&v, Chart::V, 0.0);
        let s = find(&v, Chart::U, 2.5 / 1.0);
        assert_eq!(s.kind, InfiniteKind::Saddle);
    }

    #[test]
    fn quadratic_mu_one_drops_a_direction() {
        let p = ModelParams::new(0.0, 0.0, 0.3, 1.5, 1.0).unwrap();
        assert_eq!(infinite_census(&p).unwrap().len(), 2);
    }

    #[test]
    fn cubic_types() {
        let p = ModelParams::new(0.0, 0.7, 0.3, 1.5, 0.5).unwrap();
        let v = infinite_census(&p).unwrap();
        assert_eq!(find(&v, Chart::U, 0.0).kind, InfiniteKind::Node);
        assert_eq!(find(&v, Chart::U, 3.0).kind, InfiniteKind::Saddle);
        let e = find(&v, Chart::V, 0.0);
        assert_eq!(e.multiplicity, 2);
        assert_eq!(e.kind, InfiniteKind::SaddleNode);
    }

    #[test]
    fn quartic_types() {
        let p = ModelParams::new(1.2, -0.5, 0.3, 1.5, 0.5).unwrap();
        let v = infinite_census(&p).unwrap();
        assert_eq!(find(&v, Chart::U, 0.0).kind, InfiniteKind::Node);
        assert_eq!(find(&v, Chart::U, 3.0).kind, InfiniteKind::Saddle);
        let e = find(&v, Chart::V, 0.0);
        assert_eq!(e.multiplicity, 3);
        assert_eq!(e.kind, InfiniteKind::TripleNode);
    }

    #[test]
    fn chart_field_vanishes_on_roots() {
        let p = ModelParams::new(1.2, -0.5, 0.3, 1.5, 0.5).unwrap();
        for (chart, c, _) in infinite_roots(&p).unwrap() {
            let (fw, fz) = chart_field(&p, chart, c, 0.0);
            assert!(fw.abs() < 1e-12 && fz == 0.0);
        }
    }
}
