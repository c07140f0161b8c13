//! Orbits, saddle separatrices, Poincaré return maps and limit cycles.

use serde::{Deserialize, Serialize};

use crate::equilibria::Equilibrium;
use crate::error::{Error, Result};
use crate::integrate::{bracket_root, run, Control, IntegratorOptions, Step};
use crate::model::{eval_jacobian, field, ModelParams, PhasePoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TerminalReason {
    TimeLimit,
    BlowUp,
    EquilibriumCapture,
    SectionEventCount,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Orbit {
    pub states: Vec<(f64, PhasePoint)>,
    pub terminal: TerminalReason,
}

impl Orbit {
    pub fn last(&self) -> PhasePoint {
        self.states.last().map(|s| s.1).unwrap_or(PhasePoint::new(f64::NAN, f64::NAN))
    }

    pub fn points(&self) -> impl Iterator<Item = PhasePoint> + '_ {
        self.states.iter().map(|s| s.1)
    }
}

fn rhs(p: &ModelParams, rotated: bool) -> impl Fn(f64, &[f64; 2]) -> [f64; 2] + '_ {
    move |_, y| {
        let f = field(p, PhasePoint::new(y[0], y[1]), rotated);
        [f.dx, f.dy]
    }
}

/// Integrates the field from `start` over `t_span` (negative for reverse
/// time). Every accepted step endpoint is recorded.
pub fn integrate(
    p: &ModelParams,
    start: PhasePoint,
    t_span: f64,
    rotated: bool,
    opts: &IntegratorOptions,
) -> Result<Orbit> {
    let mut states = vec![(0.0, start)];
    if field(p, start, rotated).norm() < opts.capture_norm {
        return Ok(Orbit { states, terminal: TerminalReason::EquilibriumCapture });
    }
    let mut terminal = TerminalReason::TimeLimit;
    let res = run(rhs(p, rotated), 0.0, [start.x, start.y], t_span, opts, |st: &Step<2>| {
        let pt = PhasePoint::new(st.y1[0], st.y1[1]);
        states.push((st.t1, pt));
        if pt.norm() > opts.blowup_radius {
            terminal = TerminalReason::BlowUp;
            return Control::Stop;
        }
        if (st.f1[0].hypot(st.f1[1])) < opts.capture_norm {
            terminal = TerminalReason::EquilibriumCapture;
            return Control::Stop;
        }
        Control::Continue
    });
    if let Err(e) = res {
        // finite-time escape: the step collapses while the speed explodes
        let last = states.last().unwrap().1;
        if !escaping(p, last, rotated) {
            return Err(e);
        }
        terminal = TerminalReason::BlowUp;
    }
    Ok(Orbit { states, terminal })
}

/// Field speed beyond which a collapsing step size is read as escape to
/// infinity in finite time rather than as a numerical failure.
pub const ESCAPE_SPEED: f64 = 1e8;

pub fn escaping(p: &ModelParams, pt: PhasePoint, rotated: bool) -> bool {
    !pt.is_finite() || field(p, pt, rotated).norm() > ESCAPE_SPEED
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Separatrix {
    /// Eigenvalue whose eigenvector the branch leaves along.
    pub eigenvalue: f64,
    pub eigenvector: [f64; 2],
    /// +1 or -1: side of the eigenvector.
    pub sign: f64,
    pub unstable: bool,
    pub orbit: Orbit,
}

/// The four branches of a saddle: unstable ones integrated forward, stable
/// ones backward, each from `saddle ± ε·eigenvector` with
/// `ε = 1e-6·(1 + |saddle|)`.
pub fn separatrices(
    p: &ModelParams,
    saddle: &Equilibrium,
    rotated: bool,
    t_span: f64,
    opts: &IntegratorOptions,
) -> Result<Vec<Separatrix>> {
    let j = eval_jacobian(p, saddle.location, rotated);
    let ev = j.eigenvalues();
    if ev[0].im != 0.0 || ev[0].re * ev[1].re >= 0.0 {
        return Err(Error::NotASaddle(format!(
            "eigenvalues {} and {} at ({}, {})",
            ev[0], ev[1], saddle.location.x, saddle.location.y
        )));
    }
    let eps = 1e-6 * (1.0 + saddle.location.norm());
    let mut out = Vec::with_capacity(4);
    for e in ev {
        let v = j.real_eigenvector(e.re);
        let unstable = e.re > 0.0;
        for sign in [1.0, -1.0] {
            let start = PhasePoint::new(
                saddle.location.x + sign * eps * v[0],
                saddle.location.y + sign * eps * v[1],
            );
            let span = if unstable { t_span.abs() } else { -t_span.abs() };
            let orbit = integrate(p, start, span, rotated, opts)?;
            out.push(Separatrix { eigenvalue: e.re, eigenvector: v, sign, unstable, orbit });
        }
    }
    Ok(out)
}

/// A transversal segment `anchor + s·direction`, `0 < s ≤ length`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub anchor: PhasePoint,
    pub direction: [f64; 2],
    pub length: f64,
    /// Sign of the field's component along the left normal of `direction`
    /// at the crossings that count.
    pub orientation: f64,
}

impl Section {
    pub fn new(anchor: PhasePoint, direction: [f64; 2], length: f64, orientation: f64) -> Result<Section> {
        let n = direction[0].hypot(direction[1]);
        if !(n > 0.0) || !(length > 0.0) || orientation == 0.0 {
            return Err(Error::Config("section needs a nonzero direction and positive length".into()));
        }
        Ok(Section {
            anchor,
            direction: [direction[0] / n, direction[1] / n],
            length,
            orientation: orientation.signum(),
        })
    }

    /// Orientation taken from the field just off the anchor, which is the
    /// rotation sense around a focus.
    pub fn at_focus(
        p: &ModelParams,
        anchor: PhasePoint,
        direction: [f64; 2],
        length: f64,
        rotated: bool,
    ) -> Result<Section> {
        let mut sec = Section::new(anchor, direction, length, 1.0)?;
        let q = sec.point(1e-3 * length);
        let f = field(p, q, rotated);
        let n = sec.normal();
        let c = f.dx * n[0] + f.dy * n[1];
        if c == 0.0 {
            return Err(Error::NotTransversal(1e-3 * length));
        }
        sec.orientation = c.signum();
        Ok(sec)
    }

    pub fn normal(&self) -> [f64; 2] {
        [-self.direction[1], self.direction[0]]
    }

    pub fn point(&self, s: f64) -> PhasePoint {
        PhasePoint::new(self.anchor.x + s * self.direction[0], self.anchor.y + s * self.direction[1])
    }

    /// Signed distance to the section line, positive on the left.
    pub fn signed_distance(&self, pt: PhasePoint) -> f64 {
        let n = self.normal();
        n[0] * (pt.x - self.anchor.x) + n[1] * (pt.y - self.anchor.y)
    }

    pub fn arc(&self, pt: PhasePoint) -> f64 {
        self.direction[0] * (pt.x - self.anchor.x) + self.direction[1] * (pt.y - self.anchor.y)
    }
}

/// One trip around: landing arc parameter, flight time, and the integral
/// of the divergence along the way.
#[derive(Debug, Clone, PartialEq)]
pub struct Return {
    pub s: f64,
    pub time: f64,
    pub divergence_integral: f64,
    pub path: Vec<PhasePoint>,
}

/// Settings shared by return-map based computations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReturnOptions {
    pub integrator: IntegratorOptions,
    pub t_limit: f64,
    /// Localization tolerance on the crossing time.
    pub crossing_tol: f64,
}

impl Default for ReturnOptions {
    fn default() -> Self {
        ReturnOptions { integrator: IntegratorOptions::default(), t_limit: 1e4, crossing_tol: 1e-10 }
    }
}

pub fn return_map(p: &ModelParams, sec: &Section, s: f64, rotated: bool) -> Result<f64> {
    Ok(first_return(p, sec, s, rotated, &ReturnOptions::default(), false)?.s)
}

/// Integrates from `sec.point(s)` until the first crossing of the section
/// half-line with the section's orientation.
pub fn first_return(
    p: &ModelParams,
    sec: &Section,
    s: f64,
    rotated: bool,
    ro: &ReturnOptions,
    record: bool,
) -> Result<Return> {
    if !(s > 0.0) {
        return Err(Error::Config(format!("section parameter must be positive, got {s}")));
    }
    let start = sec.point(s);
    let f0 = field(p, start, rotated);
    let n = sec.normal();
    if (f0.dx * n[0] + f0.dy * n[1]) * sec.orientation <= 0.0 {
        return Err(Error::NotTransversal(s));
    }
    crossing(p, sec, start, rotated, ro, record, true)
}

/// First crossing of `sec` (with its orientation) by the orbit from an
/// arbitrary point `start`.
pub fn section_crossing(
    p: &ModelParams,
    sec: &Section,
    start: PhasePoint,
    rotated: bool,
    ro: &ReturnOptions,
    record: bool,
) -> Result<Return> {
    crossing(p, sec, start, rotated, ro, record, false)
}

fn crossing(
    p: &ModelParams,
    sec: &Section,
    start: PhasePoint,
    rotated: bool,
    ro: &ReturnOptions,
    record: bool,
    on_section: bool,
) -> Result<Return> {
    let s = sec.arc(start);
    let opts = &ro.integrator;
    let mut path = if record { vec![start] } else { Vec::new() };
    let mut found: Option<(f64, PhasePoint, f64)> = None;
    let mut failure: Option<Error> = None;
    let sys = |_t: f64, y: &[f64; 3]| {
        let pt = PhasePoint::new(y[0], y[1]);
        let f = field(p, pt, rotated);
        let div = eval_jacobian(p, pt, rotated).trace();
        [f.dx, f.dy, div]
    };
    let summary = run(sys, 0.0, [start.x, start.y, 0.0], ro.t_limit, opts, |st: &Step<3>| {
        let a = PhasePoint::new(st.y0[0], st.y0[1]);
        let b = PhasePoint::new(st.y1[0], st.y1[1]);
        let sa = sec.signed_distance(a) * sec.orientation;
        let sb = sec.signed_distance(b) * sec.orientation;
        if (st.t0 > 0.0 || !on_section) && sa < 0.0 && sb >= 0.0 {
            let g = |t: f64| {
                let y = st.eval(t);
                sec.signed_distance(PhasePoint::new(y[0], y[1])) * sec.orientation
            };
            let tc = bracket_root(g, st.t0, st.t1, sa, sb, ro.crossing_tol, 200);
            let y = st.eval(tc);
            let pt = PhasePoint::new(y[0], y[1]);
            if sec.arc(pt) > 0.0 {
                found = Some((tc, pt, y[2]));
                if record {
                    path.push(pt);
                }
                return Control::Stop;
            }
        }
        if record {
            path.push(b);
        }
        if b.norm() > opts.blowup_radius {
            failure = Some(Error::NoReturn(format!("orbit from s = {s} escapes")));
            return Control::Stop;
        }
        if st.f1[0].hypot(st.f1[1]) < opts.capture_norm {
            failure = Some(Error::NoReturn(format!("orbit from s = {s} is captured")));
            return Control::Stop;
        }
        Control::Continue
    });
    if let Some(e) = failure {
        return Err(e);
    }
    summary.map_err(|e| Error::NoReturn(format!("from s = {s}: {e}")))?;
    match found {
        Some((time, pt, div)) => Ok(Return { s: sec.arc(pt), time, divergence_integral: div, path }),
        None => Err(Error::NoReturn(format!("no crossing from s = {s} within t = {}", ro.t_limit))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stability {
    Stable,
    Unstable,
    SemiStable,
}

impl Stability {
    pub const TOL: f64 = 1e-3;

    pub fn from_derivative(d: f64) -> Stability {
        if d < 1.0 - Self::TOL {
            Stability::Stable
        } else if d > 1.0 + Self::TOL {
            Stability::Unstable
        } else {
            Stability::SemiStable
        }
    }
}

impl std::fmt::Display for Stability {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
            Stability::SemiStable => "semi-stable",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitCycle {
    pub section: Section,
    pub s_star: f64,
    pub period: f64,
    /// Sampled closed curve (step endpoints of one revolution).
    #[serde(rename = "loop")]
    pub loop_points: Vec<PhasePoint>,
    /// Return-map derivative at `s_star`.
    pub derivative: f64,
    /// `exp(∮ div)`, the same multiplier from the variational equation.
    pub divergence_multiplier: f64,
    pub stability: Stability,
    /// `Π(s_star) - s_star` after refinement.
    pub residual: f64,
}

impl LimitCycle {
    /// Loop in counterclockwise order.
    pub fn oriented_loop(&self) -> Vec<PhasePoint> {
        let mut l = self.loop_points.clone();
        if l.len() > 1 && l.first() == l.last() {
            l.pop();
        }
        if signed_area(&l) < 0.0 {
            l.reverse();
        }
        l
    }

    pub fn encloses(&self, pt: PhasePoint) -> bool {
        point_in_polygon(&self.loop_points, pt)
    }

    pub fn amplitude(&self) -> f64 {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for q in &self.loop_points {
            lo = lo.min(q.x);
            hi = hi.max(q.x);
        }
        hi - lo
    }
}

pub fn signed_area(poly: &[PhasePoint]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a.x * b.y - b.x * a.y
        })
        .sum::<f64>()
        * 0.5
}

/// Even-odd rule.
pub fn point_in_polygon(poly: &[PhasePoint], pt: PhasePoint) -> bool {
    let n = poly.len();
    let mut inside = false;
    let mut j = n.wrapping_sub(1);
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a.y > pt.y) != (b.y > pt.y) && pt.x < (b.x - a.x) * (pt.y - a.y) / (b.y - a.y) + a.x {
            inside = !inside;
        }
        j = i;
    }
    inside
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleSearch {
    pub grid: usize,
    /// Smallest grid point as a fraction of the section length.
    pub s_min_fraction: f64,
    /// Required |d| at a cycle, as a fraction of the section length.
    pub residual_fraction: f64,
    /// |d| below which a local minimum without sign change is examined.
    pub tangency_fraction: f64,
    pub returns: ReturnOptions,
}

impl Default for CycleSearch {
    fn default() -> Self {
        CycleSearch {
            grid: 200,
            s_min_fraction: 1e-4,
            residual_fraction: 1e-8,
            tangency_fraction: 1e-6,
            returns: ReturnOptions::default(),
        }
    }
}

pub fn find_cycles(p: &ModelParams, sec: &Section, rotated: bool) -> Result<Vec<LimitCycle>> {
    find_cycles_with(p, sec, rotated, &CycleSearch::default())
}

/// Displacement `d(s) = Π(s) - s`.
pub fn displacement(p: &ModelParams, sec: &Section, s: f64, rotated: bool, ro: &ReturnOptions) -> Result<f64> {
    Ok(first_return(p, sec, s, rotated, ro, false)?.s - s)
}

/// Grid scan of the displacement, bracketing sign changes and probing
/// shallow local minima of |d| for tangential (semi-stable) or closely
/// spaced pairs of cycles.
pub fn find_cycles_with(
    p: &ModelParams,
    sec: &Section,
    rotated: bool,
    cfg: &CycleSearch,
) -> Result<Vec<LimitCycle>> {
    cycle_roots(p, sec, rotated, cfg)
        .into_iter()
        .map(|s| build_cycle(p, sec, s, rotated, &cfg.returns))
        .collect()
}

/// Fixed points of the return map on `sec`, without the stability
/// analysis that [`find_cycles_with`] attaches.
pub fn cycle_roots(p: &ModelParams, sec: &Section, rotated: bool, cfg: &CycleSearch) -> Vec<f64> {
    let ro = &cfg.returns;
    let l = sec.length;
    let tol = cfg.residual_fraction * l;
    let d = |s: f64| displacement(p, sec, s, rotated, ro).ok();
    let n = cfg.grid.max(3);
    let ratio = (1.0 / cfg.s_min_fraction).powf(1.0 / (n - 1) as f64);
    let grid: Vec<f64> = (0..n).map(|k| l * cfg.s_min_fraction * ratio.powi(k as i32)).collect();
    let vals: Vec<Option<f64>> = grid.iter().map(|&s| d(s)).collect();

    let mut roots: Vec<f64> = Vec::new();
    let push_root = |roots: &mut Vec<f64>, s: f64| {
        if roots.iter().all(|r| (r - s).abs() > 1e-6 * l) {
            roots.push(s);
        }
    };
    for k in 0..n - 1 {
        // the return map stops being defined between these grid points:
        // probe just inside the edge for a sign change the grid missed
        if let Some((a, da, b, db)) = domain_edge(&d, grid[k], vals[k], grid[k + 1], vals[k + 1]) {
            if da * db < 0.0 {
                if let Some(s) = refine(&d, a, b, da, db, tol) {
                    push_root(&mut roots, s);
                }
            }
            continue;
        }
        let (Some(da), Some(db)) = (vals[k], vals[k + 1]) else { continue };
        if da == 0.0 {
            push_root(&mut roots, grid[k]);
            continue;
        }
        if da * db < 0.0 {
            if let Some(s) = refine(&d, grid[k], grid[k + 1], da, db, tol) {
                push_root(&mut roots, s);
            }
        }
    }
    // shallow minima of |d| without a sign change
    for k in 1..n - 1 {
        let (Some(a), Some(b), Some(c)) = (vals[k - 1], vals[k], vals[k + 1]) else { continue };
        if !(a * b > 0.0 && b * c > 0.0) || !(b.abs() < a.abs() && b.abs() <= c.abs()) {
            continue;
        }
        if b.abs() > cfg.tangency_fraction * l {
            continue;
        }
        let sign = b.signum();
        let f = |s: f64| d(s).map(|v| v * sign).unwrap_or(f64::INFINITY);
        let (sm, fm) = golden_min(f, grid[k - 1], grid[k + 1], 1e-12 * l, 200);
        if fm < 0.0 {
            // two nearby cycles straddling the minimum
            if let Some(s) = refine(&d, grid[k - 1], sm, a, fm * sign, tol) {
                push_root(&mut roots, s);
            }
            if let Some(s) = refine(&d, sm, grid[k + 1], fm * sign, c, tol) {
                push_root(&mut roots, s);
            }
        } else if fm <= tol {
            push_root(&mut roots, sm);
        }
    }
    roots.sort_by(f64::total_cmp);
    roots
}

/// When exactly one of `d(a)`, `d(b)` is defined, bisects for the edge of
/// the domain and returns the defined end together with the last defined
/// point next to the edge.
fn domain_edge<D: Fn(f64) -> Option<f64>>(
    d: &D,
    a: f64,
    va: Option<f64>,
    b: f64,
    vb: Option<f64>,
) -> Option<(f64, f64, f64, f64)> {
    let (mut inside, mut outside, v0) = match (va, vb) {
        (Some(v), None) => (a, b, v),
        (None, Some(v)) => (b, a, v),
        _ => return None,
    };
    let anchor = inside;
    let mut v_in = v0;
    for _ in 0..14 {
        let m = 0.5 * (inside + outside);
        match d(m) {
            Some(v) => {
                inside = m;
                v_in = v;
            }
            None => outside = m,
        }
        if v_in * v0 < 0.0 {
            break;
        }
    }
    if inside == anchor {
        return None;
    }
    Some(if anchor < inside { (anchor, v0, inside, v_in) } else { (inside, v_in, anchor, v0) })
}

fn refine<D: Fn(f64) -> Option<f64>>(d: &D, a: f64, b: f64, da: f64, db: f64, tol: f64) -> Option<f64> {
    let g = |s: f64| d(s).unwrap_or(f64::NAN);
    let s = bracket_root(g, a, b, da, db, 1e-14 * b.abs().max(1.0), 300);
    // a jump of d across a separatrix also changes sign; reject those
    let v = d(s)?;
    (v.abs() <= tol).then_some(s)
}

/// Golden-section minimization on `[a, b]`.
pub fn golden_min<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64, max_iter: usize) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut e = a + g * (b - a);
    let mut fc = f(c);
    let mut fe = f(e);
    for _ in 0..max_iter {
        if (b - a).abs() <= tol {
            break;
        }
        if fc < fe {
            b = e;
            e = c;
            fe = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + g * (b - a);
            fe = f(e);
        }
    }
    if fc < fe {
        (c, fc)
    } else {
        (e, fe)
    }
}

/// Central-difference return-map derivative with step `h`.
pub fn return_derivative(
    p: &ModelParams,
    sec: &Section,
    s: f64,
    h: f64,
    rotated: bool,
    ro: &ReturnOptions,
) -> Result<f64> {
    let a = first_return(p, sec, s + h, rotated, ro, false)?.s;
    let b = first_return(p, sec, s - h, rotated, ro, false)?.s;
    Ok((a - b) / (2.0 * h))
}

fn build_cycle(p: &ModelParams, sec: &Section, s: f64, rotated: bool, ro: &ReturnOptions) -> Result<LimitCycle> {
    let r = first_return(p, sec, s, rotated, ro, true)?;
    let derivative = return_derivative(p, sec, s, 1e-5 * s, rotated, ro)?;
    Ok(LimitCycle {
        section: *sec,
        s_star: s,
        period: r.time,
        loop_points: r.path,
        derivative,
        divergence_multiplier: r.divergence_integral.exp(),
        stability: Stability::from_derivative(derivative),
        residual: r.s - s,
    })
}

/// Refines the derivative by Richardson extrapolation of central
/// differences at steps `h` and `h/2` and cross-checks it against the
/// divergence integral.
pub fn cycle_stability(p: &ModelParams, c: &LimitCycle, rotated: bool) -> Result<LimitCycle> {
    cycle_stability_with(p, c, rotated, &ReturnOptions::default())
}

pub fn cycle_stability_with(
    p: &ModelParams,
    c: &LimitCycle,
    rotated: bool,
    ro: &ReturnOptions,
) -> Result<LimitCycle> {
    let h = 1e-3 * c.s_star;
    let d1 = return_derivative(p, &c.section, c.s_star, h, rotated, ro)?;
    let d2 = return_derivative(p, &c.section, c.s_star, 0.5 * h, rotated, ro)?;
    let derivative = (4.0 * d2 - d1) / 3.0;
    let r = first_return(p, &c.section, c.s_star, rotated, ro, true)?;
    let divergence = r.divergence_integral.exp();
    let a = Stability::from_derivative(derivative);
    let b = Stability::from_derivative(divergence);
    if a != b {
        return Err(Error::InconsistentStability { derivative, divergence });
    }
    Ok(LimitCycle {
        derivative,
        divergence_multiplier: divergence,
        stability: a,
        period: r.time,
        loop_points: r.path,
        residual: r.s - c.s_star,
        ..c.clone()
    })
}
