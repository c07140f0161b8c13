//! Finite singular points: enumeration, classification by linearization,
//! Poincaré indices by contour winding, and the configuration checks
//! (index identity, saddle/antisaddle alternation, Berlinskii).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::compactification::{infinite_census, InfiniteKind, InfiniteSingularity};
use crate::error::{Error, Result};
use crate::model::{eval_field, eval_jacobian, field, prey_isocline, Jacobian2, ModelParams, PhasePoint};
use crate::poly::Poly;

/// Points closer than this are the same equilibrium.
pub const DEDUP_DISTANCE: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EquilibriumKind {
    Saddle,
    StableNode,
    UnstableNode,
    StableFocus,
    UnstableFocus,
    CenterOrWeakFocus,
    SaddleNode,
    Degenerate,
}

impl EquilibriumKind {
    pub fn is_saddle(self) -> bool {
        self == EquilibriumKind::Saddle
    }

    /// Node, focus, or center: anything elementary that is not a saddle.
    pub fn is_antisaddle(self) -> bool {
        matches!(
            self,
            EquilibriumKind::StableNode
                | EquilibriumKind::UnstableNode
                | EquilibriumKind::StableFocus
                | EquilibriumKind::UnstableFocus
                | EquilibriumKind::CenterOrWeakFocus
        )
    }

    pub fn is_node(self) -> bool {
        matches!(self, EquilibriumKind::StableNode | EquilibriumKind::UnstableNode)
    }

    pub fn is_focus(self) -> bool {
        matches!(self, EquilibriumKind::StableFocus | EquilibriumKind::UnstableFocus)
    }

    pub fn is_simple(self) -> bool {
        self.is_saddle() || self.is_antisaddle()
    }

    /// Index implied by the type; `None` for fully degenerate points.
    pub fn index(self) -> Option<i32> {
        match self {
            EquilibriumKind::Saddle => Some(-1),
            EquilibriumKind::SaddleNode => Some(0),
            EquilibriumKind::Degenerate => None,
            _ => Some(1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub location: PhasePoint,
    pub eigenvalues: [Complex64; 2],
    pub kind: EquilibriumKind,
    pub index: i32,
    /// Norm of the field at `location`.
    pub residual: f64,
    /// Winding number of the field on a small circle around the point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contour_index: Option<i32>,
}

impl Equilibrium {
    /// Classifies the point with the (possibly rotated) Jacobian of `p`.
    pub fn at(p: &ModelParams, location: PhasePoint) -> Equilibrium {
        let j = eval_jacobian(p, location, true);
        let (kind, eigenvalues) = classify(&j);
        let index = kind.index().unwrap_or_else(|| {
            contour_index(p, &circle(location, 1e-3 * (1.0 + location.norm()), 256), true)
                .unwrap_or(0)
        });
        Equilibrium {
            location,
            eigenvalues,
            kind,
            index,
            residual: eval_field(p, location).norm(),
            contour_index: None,
        }
    }

    pub fn jacobian(&self, p: &ModelParams) -> Jacobian2 {
        eval_jacobian(p, self.location, true)
    }
}

/// Classification from the linearization. Zero eigenvalues are those below
/// `1e-6·max(1, |other|)`; a complex pair with `|trace| < 1e-8·(1 + |det|)`
/// is a center or weak focus.
pub fn classify(j: &Jacobian2) -> (EquilibriumKind, [Complex64; 2]) {
    let ev = j.eigenvalues();
    let kind = if ev[0].im != 0.0 {
        let tr = j.trace();
        if tr.abs() < 1e-8 * (1.0 + j.determinant().abs()) {
            EquilibriumKind::CenterOrWeakFocus
        } else if tr < 0.0 {
            EquilibriumKind::StableFocus
        } else {
            EquilibriumKind::UnstableFocus
        }
    } else {
        let (a, b) = (ev[0].re, ev[1].re);
        let za = a.abs() < 1e-6 * b.abs().max(1.0);
        let zb = b.abs() < 1e-6 * a.abs().max(1.0);
        match (za, zb) {
            (true, true) => EquilibriumKind::Degenerate,
            (true, false) | (false, true) => EquilibriumKind::SaddleNode,
            _ if a * b < 0.0 => EquilibriumKind::Saddle,
            _ if a < 0.0 => EquilibriumKind::StableNode,
            _ => EquilibriumKind::UnstableNode,
        }
    };
    (kind, ev)
}

/// Newton iterations on `(P, Q) = 0`; stops early when the Jacobian is
/// (nearly) singular, as at saddle-nodes.
pub fn polish(p: &ModelParams, mut pt: PhasePoint, iterations: usize) -> PhasePoint {
    for _ in 0..iterations {
        let f = eval_field(p, pt);
        if f.norm() == 0.0 {
            break;
        }
        let j = eval_jacobian(p, pt, false);
        let det = j.determinant();
        let scale = (j.pxx.abs() + j.pxy.abs()) * (j.qyx.abs() + j.qyy.abs());
        if det.abs() <= 1e-12 * scale.max(1e-300) {
            break;
        }
        let dx = (f.dx * j.qyy - f.dy * j.pxy) / det;
        let dy = (j.pxx * f.dy - j.qyx * f.dx) / det;
        let next = PhasePoint::new(pt.x - dx, pt.y - dy);
        if !next.is_finite() || eval_field(p, next).norm() > f.norm() {
            break;
        }
        pt = next;
    }
    pt
}

/// Singular points on the coordinate axes: the origin, `(0, -δ/μ)` for
/// μ > 0, `(1/λ, 0)`, and the real zeros of `αx² + βx + 1` on y = 0.
pub fn axis_equilibria(p: &ModelParams) -> Vec<Equilibrium> {
    let mut pts = vec![PhasePoint::new(0.0, 0.0), PhasePoint::new(1.0 / p.lambda(), 0.0)];
    if p.mu() > 0.0 {
        pts.push(PhasePoint::new(0.0, -p.delta() / p.mu()));
    }
    let (a, b) = (p.alpha(), p.beta());
    if a > 0.0 {
        let disc = b * b - 4.0 * a;
        if disc == 0.0 {
            pts.push(PhasePoint::new(-b / (2.0 * a), 0.0));
        } else if disc > 0.0 {
            // stable quadratic formula
            let q = -0.5 * (b + b.signum() * disc.sqrt());
            pts.push(PhasePoint::new(q / a, 0.0));
            pts.push(PhasePoint::new(1.0 / q, 0.0));
        }
    } else if b != 0.0 {
        pts.push(PhasePoint::new(-1.0 / b, 0.0));
    }
    let mut out: Vec<Equilibrium> = Vec::new();
    for pt in pts {
        if out.iter().all(|e| e.location.dist(&pt) > DEDUP_DISTANCE) {
            out.push(Equilibrium::at(p, pt));
        }
    }
    sort_points(&mut out);
    out
}

/// Univariate polynomial whose real roots are the x-coordinates of the
/// off-axis singular points: substituting the prey isocline
/// `y = (1 - λx)A(x)` into `(δ + μy)A(x) = x`.
pub fn interior_polynomial(p: &ModelParams) -> Poly {
    let a = Poly::new(vec![1.0, p.beta(), p.alpha()]);
    let la = &Poly::linear(1.0, -p.lambda()) * &a;
    let inner = &Poly::constant(p.delta()) + &(&la * p.mu());
    &(&a * &inner) - &Poly::linear(0.0, 1.0)
}

pub fn interior_equilibria(p: &ModelParams) -> Result<Vec<Equilibrium>> {
    let g = interior_polynomial(p);
    let scale = g.root_scale();
    interior_equilibria_scaled(p, scale)
}

/// As [`interior_equilibria`] with an explicit internal normalization
/// `x = scale·ξ` for the root finder.
pub fn interior_equilibria_scaled(p: &ModelParams, scale: f64) -> Result<Vec<Equilibrium>> {
    let g = interior_polynomial(p);
    let roots = g.real_roots_scaled(scale)?;
    let axis = axis_equilibria(p);
    let la = &Poly::linear(1.0, -p.lambda()) * &Poly::new(vec![1.0, p.beta(), p.alpha()]);
    let dla = la.derivative();
    let mut out: Vec<Equilibrium> = Vec::new();
    for x0 in roots {
        let mut pt = PhasePoint::new(x0, la.eval(x0));
        // Newton on the isocline system itself, then on the full field.
        for _ in 0..6 {
            let f1 = pt.y - la.eval(pt.x);
            let f2 = pt.y * (p.delta() + p.mu() * pt.y) - pt.x * (1.0 - p.lambda() * pt.x);
            let (a11, a12) = (-dla.eval(pt.x), 1.0);
            let (a21, a22) = (-(1.0 - 2.0 * p.lambda() * pt.x), p.delta() + 2.0 * p.mu() * pt.y);
            let det = a11 * a22 - a12 * a21;
            if det.abs() < 1e-14 {
                break;
            }
            let dx = (f1 * a22 - f2 * a12) / det;
            let dy = (a11 * f2 - a21 * f1) / det;
            let next = PhasePoint::new(pt.x - dx, pt.y - dy);
            if !next.is_finite() {
                break;
            }
            pt = next;
            if dx.abs().max(dy.abs()) < 1e-15 * (1.0 + pt.norm()) {
                break;
            }
        }
        pt = polish(p, pt, 4);
        let on_axis = pt.y.abs() <= DEDUP_DISTANCE
            || axis.iter().any(|e| e.location.dist(&pt) <= DEDUP_DISTANCE);
        if on_axis || out.iter().any(|e| e.location.dist(&pt) <= DEDUP_DISTANCE) {
            continue;
        }
        out.push(Equilibrium::at(p, pt));
    }
    sort_points(&mut out);
    Ok(out)
}

fn sort_points(v: &mut [Equilibrium]) {
    v.sort_by(|a, b| {
        a.location.x.total_cmp(&b.location.x).then(a.location.y.total_cmp(&b.location.y))
    });
}

/// Positively oriented polygonal circle.
pub fn circle(center: PhasePoint, radius: f64, n: usize) -> Vec<PhasePoint> {
    (0..n)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / n as f64;
            PhasePoint::new(center.x + radius * t.cos(), center.y + radius * t.sin())
        })
        .collect()
}

fn wrap_angle(a: f64) -> f64 {
    let mut a = a % (2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    } else if a <= -PI {
        a += 2.0 * PI;
    }
    a
}

/// Winding number of the field direction along a closed, positively
/// oriented polyline (the last vertex connects back to the first).
/// Segments are subdivided until every angle increment is below π/4.
pub fn contour_index(p: &ModelParams, curve: &[PhasePoint], rotated: bool) -> Result<i32> {
    let raw = contour_winding(p, curve, rotated)?;
    let j = raw.round();
    if (raw - j).abs() > 1e-3 {
        return Err(Error::AmbiguousWinding(raw));
    }
    Ok(j as i32)
}

/// Unrounded winding number (total angle / 2π).
pub fn contour_winding(p: &ModelParams, curve: &[PhasePoint], rotated: bool) -> Result<f64> {
    if curve.len() < 3 {
        return Err(Error::Config("contour needs at least three vertices".into()));
    }
    let angle = |pt: PhasePoint| -> Result<f64> {
        let f = field(p, pt, rotated);
        if f.norm() < 1e-12 {
            return Err(Error::SingularOnContour { x: pt.x, y: pt.y });
        }
        Ok(f.dy.atan2(f.dx))
    };
    fn segment(
        angle: &dyn Fn(PhasePoint) -> Result<f64>,
        a: PhasePoint,
        b: PhasePoint,
        ta: f64,
        tb: f64,
        depth: u32,
    ) -> Result<f64> {
        let d = wrap_angle(tb - ta);
        if d.abs() <= PI / 4.0 || depth >= 24 {
            return Ok(d);
        }
        let m = PhasePoint::new(0.5 * (a.x + b.x), 0.5 * (a.y + b.y));
        let tm = angle(m)?;
        Ok(segment(angle, a, m, ta, tm, depth + 1)? + segment(angle, m, b, tm, tb, depth + 1)?)
    }
    let mut total = 0.0;
    let first = angle(curve[0])?;
    let mut prev = first;
    for k in 0..curve.len() {
        let a = curve[k];
        let b = curve[(k + 1) % curve.len()];
        let tb = if k + 1 == curve.len() { first } else { angle(b)? };
        total += segment(&angle, a, b, prev, tb, 0)?;
        prev = tb;
    }
    Ok(total / (2.0 * PI))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Census {
    pub params: ModelParams,
    pub finite: Vec<Equilibrium>,
    pub infinite: Vec<InfiniteSingularity>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl Census {
    pub fn saddles(&self) -> impl Iterator<Item = &Equilibrium> {
        self.finite.iter().filter(|e| e.kind.is_saddle())
    }

    pub fn antisaddles(&self) -> impl Iterator<Item = &Equilibrium> {
        self.finite.iter().filter(|e| e.kind.is_antisaddle())
    }

    /// Off-axis points in the open first quadrant, sorted by x.
    pub fn first_quadrant(&self) -> Vec<&Equilibrium> {
        self.finite.iter().filter(|e| e.location.x > 0.0 && e.location.y > 0.0).collect()
    }

    /// The ordered triple (A₁, S, A₂) when the first quadrant holds exactly
    /// an antisaddle, a saddle and an antisaddle in that x-order.
    pub fn a1_s_a2(&self) -> Option<[&Equilibrium; 3]> {
        let q = self.first_quadrant();
        if q.len() == 3 && q[0].kind.is_antisaddle() && q[1].kind.is_saddle() && q[2].kind.is_antisaddle()
        {
            Some([q[0], q[1], q[2]])
        } else {
            None
        }
    }

    pub fn all_finite_simple(&self) -> bool {
        self.finite.iter().all(|e| e.kind.is_simple())
    }
}

/// Assembles finite and infinite singular points and attaches winding
/// numbers on small circles as a cross-check of the class-based indices.
pub fn full_census(p: &ModelParams) -> Result<Census> {
    let mut finite = axis_equilibria(p);
    for e in interior_equilibria(p)? {
        if finite.iter().all(|f| f.location.dist(&e.location) > DEDUP_DISTANCE) {
            finite.push(e);
        }
    }
    sort_points(&mut finite);
    let locs: Vec<PhasePoint> = finite.iter().map(|e| e.location).collect();
    for (i, e) in finite.iter_mut().enumerate() {
        let nearest = locs
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, l)| l.dist(&e.location))
            .fold(f64::INFINITY, f64::min);
        let r = (1e-3 * (1.0 + e.location.norm())).min(0.25 * nearest);
        e.contour_index = contour_index(p, &circle(e.location, r, 256), true).ok();
    }
    let infinite = infinite_census(p)?;
    let mut warnings = Vec::new();
    let q: Vec<&Equilibrium> =
        finite.iter().filter(|e| e.location.x > 0.0 && e.location.y > 0.0).collect();
    if q.len() == 3 {
        let alternates = q[0].kind.is_antisaddle() && q[1].kind.is_saddle() && q[2].kind.is_antisaddle();
        if !alternates {
            warnings.push(format!(
                "first-quadrant points do not follow the antisaddle/saddle/antisaddle order: {:?}",
                q.iter().map(|e| e.kind).collect::<Vec<_>>()
            ));
        }
    }
    Ok(Census { params: *p, finite, infinite, warnings })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "detail", rename_all = "lowercase")]
pub enum Verdict {
    Pass(String),
    Fail(String),
    Inapplicable(String),
}

impl Verdict {
    pub fn is_pass(&self) -> bool {
        matches!(self, Verdict::Pass(_))
    }
    pub fn is_fail(&self) -> bool {
        matches!(self, Verdict::Fail(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigurationReport {
    pub index_identity: Verdict,
    pub alternation: Verdict,
    pub berlinskii: Verdict,
}

impl ConfigurationReport {
    pub fn any_failure(&self) -> bool {
        self.index_identity.is_fail() || self.alternation.is_fail() || self.berlinskii.is_fail()
    }
}

/// Counts entering `N + N_f + N_c + N' = C + C' + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct IndexCounts {
    pub nodes: usize,
    pub foci: usize,
    pub centers: usize,
    pub saddles: usize,
    pub infinite_nodes: usize,
    pub infinite_saddles: usize,
}

impl IndexCounts {
    pub fn of(c: &Census) -> IndexCounts {
        let mut k = IndexCounts::default();
        for e in &c.finite {
            match e.kind {
                EquilibriumKind::StableNode | EquilibriumKind::UnstableNode => k.nodes += 1,
                EquilibriumKind::StableFocus | EquilibriumKind::UnstableFocus => k.foci += 1,
                EquilibriumKind::CenterOrWeakFocus => k.centers += 1,
                EquilibriumKind::Saddle => k.saddles += 1,
                _ => {}
            }
        }
        for s in &c.infinite {
            match s.kind {
                InfiniteKind::Node | InfiniteKind::TripleNode => k.infinite_nodes += 1,
                InfiniteKind::Saddle => k.infinite_saddles += 1,
                _ => {}
            }
        }
        k
    }

    pub fn lhs(&self) -> usize {
        self.nodes + self.foci + self.centers + self.infinite_nodes
    }

    pub fn rhs(&self) -> usize {
        self.saddles + self.infinite_saddles + 1
    }
}

pub fn verify_configuration(c: &Census) -> ConfigurationReport {
    ConfigurationReport {
        index_identity: check_index_identity(c),
        alternation: check_alternation(c),
        berlinskii: check_berlinskii(c),
    }
}

fn check_index_identity(c: &Census) -> Verdict {
    if !c.all_finite_simple() {
        return Verdict::Inapplicable("census has multiple finite points".into());
    }
    if c.infinite.iter().any(|s| s.kind == InfiniteKind::OtherDegenerate) {
        return Verdict::Inapplicable("census has an unresolved infinite point".into());
    }
    let k = IndexCounts::of(c);
    let detail = format!(
        "N={} Nf={} Nc={} N'={} | C={} C'={}",
        k.nodes, k.foci, k.centers, k.infinite_nodes, k.saddles, k.infinite_saddles
    );
    if k.lhs() == k.rhs() {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

/// Branches checked: the prey isocline `y = (1 - λx)A(x)` (a graph over x)
/// and the invariant line x = 0.
fn check_alternation(c: &Census) -> Verdict {
    if !c.all_finite_simple() {
        return Verdict::Inapplicable("census has multiple finite points".into());
    }
    let p = &c.params;
    let mut isocline: Vec<&Equilibrium> = c
        .finite
        .iter()
        .filter(|e| {
            let y = prey_isocline(p, e.location.x);
            (e.location.y - y).abs() <= 1e-7 * (1.0 + y.abs())
        })
        .collect();
    isocline.sort_by(|a, b| a.location.x.total_cmp(&b.location.x));
    let mut y_axis: Vec<&Equilibrium> = c.finite.iter().filter(|e| e.location.x == 0.0).collect();
    y_axis.sort_by(|a, b| a.location.y.total_cmp(&b.location.y));

    let mut failures = Vec::new();
    for (name, branch) in [("prey isocline", &isocline), ("x = 0", &y_axis)] {
        for w in branch.windows(2) {
            if w[0].kind.is_saddle() == w[1].kind.is_saddle() {
                failures.push(format!(
                    "{name}: {:?} at ({:.6}, {:.6}) followed by {:?} at ({:.6}, {:.6})",
                    w[0].kind, w[0].location.x, w[0].location.y, w[1].kind, w[1].location.x,
                    w[1].location.y
                ));
            }
        }
    }
    if failures.is_empty() {
        Verdict::Pass(format!(
            "{} points on the prey isocline, {} on x = 0",
            isocline.len(),
            y_axis.len()
        ))
    } else {
        Verdict::Fail(failures.join("; "))
    }
}

fn cross(o: PhasePoint, a: PhasePoint, b: PhasePoint) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Indices (into `pts`) of the convex hull vertices in counterclockwise order.
fn convex_hull(pts: &[PhasePoint]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..pts.len()).collect();
    idx.sort_by(|&a, &b| pts[a].x.total_cmp(&pts[b].x).then(pts[a].y.total_cmp(&pts[b].y)));
    let mut lower: Vec<usize> = Vec::new();
    for &i in &idx {
        while lower.len() >= 2
            && cross(pts[lower[lower.len() - 2]], pts[lower[lower.len() - 1]], pts[i]) <= 0.0
        {
            lower.pop();
        }
        lower.push(i);
    }
    let mut upper: Vec<usize> = Vec::new();
    for &i in idx.iter().rev() {
        while upper.len() >= 2
            && cross(pts[upper[upper.len() - 2]], pts[upper[upper.len() - 1]], pts[i]) <= 0.0
        {
            upper.pop();
        }
        upper.push(i);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn check_berlinskii(c: &Census) -> Verdict {
    let p = &c.params;
    if p.alpha() != 0.0 || p.beta() != 0.0 {
        return Verdict::Inapplicable("not a quadratic instance".into());
    }
    if c.finite.len() != 4 || !c.all_finite_simple() {
        return Verdict::Inapplicable(format!(
            "needs four simple finite points, found {}",
            c.finite.len()
        ));
    }
    let pts: Vec<PhasePoint> = c.finite.iter().map(|e| e.location).collect();
    let saddle: Vec<bool> = c.finite.iter().map(|e| e.kind.is_saddle()).collect();
    let hull = convex_hull(&pts);
    match hull.len() {
        4 => {
            let ok = saddle[hull[0]] == saddle[hull[2]]
                && saddle[hull[1]] == saddle[hull[3]]
                && saddle[hull[0]] != saddle[hull[1]];
            if ok {
                Verdict::Pass("convex quadrilateral with saddles on one diagonal".into())
            } else {
                Verdict::Fail("convex quadrilateral with mixed diagonals".into())
            }
        }
        3 => {
            let inner = (0..4).find(|i| !hull.contains(i)).unwrap();
            let ok = hull.iter().all(|&h| saddle[h] != saddle[inner]);
            let what = if saddle[inner] { "saddle" } else { "antisaddle" };
            if ok {
                Verdict::Pass(format!("triangle with an interior {what}"))
            } else {
                Verdict::Fail(format!("triangle with an interior {what} but mixed vertices"))
            }
        }
        _ => Verdict::Inapplicable("collinear points".into()),
    }
}
