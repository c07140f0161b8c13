//! Hopf points, continuation of cycles in a parameter, folds of cycles and
//! separatrix loops.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::dynamics::{
    displacement, first_return, golden_min, return_derivative, LimitCycle, ReturnOptions,
    Section, Stability,
};
use crate::equilibria::{polish, Equilibrium};
use crate::error::{Error, Result};
use crate::integrate::{bracket_root, run, Control, IntegratorOptions, Step};
use crate::model::{eval_jacobian, field, ModelParams, Parameter, PhasePoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    Hopf,
    FoldOfCycles,
    HomoclinicSmallLoop,
    HomoclinicBigLoop,
    EightLoop,
    CycleFromInfinityCandidate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifurcationEvent {
    pub kind: EventKind,
    pub parameter: Parameter,
    pub value: f64,
    /// What the event refers to, e.g. an equilibrium location or a cycle.
    pub subject: String,
    /// Value of the defining condition at `value`.
    pub residual: f64,
    #[serde(default)]
    pub diagnostics: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cycle: Option<LimitCycle>,
}

/// Trace coefficient of γ in the rotated Jacobian: `Py - Qx`.
pub fn rotation_trace_slope(p: &ModelParams, pt: PhasePoint) -> f64 {
    let j = eval_jacobian(p, pt, false);
    j.pxy - j.qyx
}

/// γ at which the rotated Jacobian at `pt` has zero trace:
/// `-(Px + Qy) / (Py - Qx)`.
pub fn hopf_gamma_closed_form(p: &ModelParams, pt: PhasePoint) -> Option<f64> {
    let j = eval_jacobian(p, pt, false);
    let slope = j.pxy - j.qyx;
    (slope != 0.0).then(|| -j.trace() / slope)
}

/// Trace and determinant of the rotated Jacobian along a parameter, with
/// the equilibrium re-polished for α and β.
fn linearization_at(p: &ModelParams, param: Parameter, v: f64, loc: PhasePoint) -> Result<(PhasePoint, f64, f64)> {
    let q = p.with(param, v)?;
    let loc = if param == Parameter::Gamma { loc } else { polish(&q, loc, 8) };
    let j = eval_jacobian(&q, loc, true);
    Ok((loc, j.trace(), j.determinant()))
}

/// Zeros of the rotated-Jacobian trace at `eq` over `range`, refined by
/// bisection to 1e-10. Crossings with nonpositive determinant are not
/// Hopf points and are skipped.
pub fn hopf_detect(
    p: &ModelParams,
    eq: &Equilibrium,
    param: Parameter,
    range: (f64, f64),
) -> Result<Vec<BifurcationEvent>> {
    const SAMPLES: usize = 64;
    let (lo, hi) = range;
    let mut events = Vec::new();
    let mut loc = eq.location;
    let mut prev: Option<(f64, PhasePoint, f64)> = None;
    for k in 0..=SAMPLES {
        let v = lo + (hi - lo) * k as f64 / SAMPLES as f64;
        let Ok((l, tr, _)) = linearization_at(p, param, v, loc) else {
            prev = None;
            continue;
        };
        loc = l;
        if let Some((v0, l0, t0)) = prev {
            if t0 == 0.0 || t0 * tr < 0.0 {
                let (mut a, mut b, mut ta) = (v0, v, t0);
                let mut la = l0;
                while (b - a).abs() > 1e-10 {
                    let m = 0.5 * (a + b);
                    let (lm, tm, _) = linearization_at(p, param, m, la)?;
                    if tm == 0.0 {
                        a = m;
                        b = m;
                        la = lm;
                        break;
                    }
                    if (tm < 0.0) == (ta < 0.0) {
                        a = m;
                        ta = tm;
                        la = lm;
                    } else {
                        b = m;
                    }
                }
                let vs = 0.5 * (a + b);
                let (ls, ts, ds) = linearization_at(p, param, vs, la)?;
                if ds > 0.0 {
                    let mut diagnostics = BTreeMap::new();
                    diagnostics.insert("determinant".into(), ds);
                    diagnostics.insert("frequency".into(), ds.sqrt());
                    diagnostics.insert("trace_before".into(), t0);
                    diagnostics.insert("trace_after".into(), tr);
                    if param == Parameter::Gamma {
                        if let Some(g) = hopf_gamma_closed_form(p, ls) {
                            diagnostics.insert("closed_form".into(), g);
                        }
                    }
                    events.push(BifurcationEvent {
                        kind: EventKind::Hopf,
                        parameter: param,
                        value: vs,
                        subject: format!("({:.10}, {:.10})", ls.x, ls.y),
                        residual: ts,
                        diagnostics,
                        cycle: None,
                    });
                }
            }
        }
        prev = Some((v, loc, tr));
    }
    Ok(events)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Fold,
    Homoclinic,
    ParameterBound,
    Lost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleBranch {
    pub parameter: Parameter,
    pub samples: Vec<(f64, LimitCycle)>,
    pub termination: Termination,
}

impl CycleBranch {
    pub fn last(&self) -> Option<&(f64, LimitCycle)> {
        self.samples.last()
    }

    /// Whether the amplitude is strictly monotone along the samples.
    pub fn amplitude_monotone(&self) -> bool {
        let a: Vec<f64> = self.samples.iter().map(|(_, c)| c.amplitude()).collect();
        a.windows(2).all(|w| w[1] > w[0]) || a.windows(2).all(|w| w[1] < w[0])
    }

    /// Whether the section parameter of the fixed point is strictly
    /// monotone, a finer proxy for the size of nested cycles.
    pub fn s_star_monotone(&self) -> bool {
        let a: Vec<f64> = self.samples.iter().map(|(_, c)| c.s_star).collect();
        a.windows(2).all(|w| w[1] > w[0]) || a.windows(2).all(|w| w[1] < w[0])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepPolicy {
    /// Signed first step; its sign sets the direction.
    pub initial: f64,
    pub min: f64,
    pub max: f64,
    /// The branch stops when the parameter passes this value.
    pub bound: f64,
    pub max_samples: usize,
    /// Period above which a cycle close to a saddle counts as homoclinic.
    pub period_cap: f64,
    /// Loop-to-saddle distance for the homoclinic criterion.
    pub saddle_proximity: f64,
    pub returns: ReturnOptions,
}

impl StepPolicy {
    /// Steps bounded to `1e-8 … 1e-2` of the distance to `bound`.
    pub fn toward(start: f64, bound: f64) -> StepPolicy {
        let range = (bound - start).abs();
        StepPolicy {
            initial: 1e-3 * range * (bound - start).signum(),
            min: 1e-8 * range,
            max: 1e-2 * range,
            bound,
            max_samples: 10_000,
            period_cap: 1e3,
            saddle_proximity: 1e-4,
            returns: ReturnOptions::default(),
        }
    }
}

/// Finds the fixed point of the return map near `guess`, on a branch whose
/// displacement crosses zero with slope sign `slope`.
fn relocate(
    p: &ModelParams,
    sec: &Section,
    guess: f64,
    slope: f64,
    rotated: bool,
    ro: &ReturnOptions,
) -> Option<f64> {
    let l = sec.length;
    let tol = 1e-8 * l;
    let d = |s: f64| if s > 0.0 { displacement(p, sec, s, rotated, ro).ok() } else { None };
    let d0 = d(guess)?;
    if d0.abs() <= 0.1 * tol {
        return Some(guess);
    }
    // the root lies toward decreasing s when d and slope share a sign
    let dir = if d0 * slope > 0.0 { -1.0 } else { 1.0 };
    let mut w = (1e-4 * guess).max(1e-9 * l);
    let (mut a, mut da) = (guess, d0);
    while w <= 0.1 * l {
        let b = guess + dir * w;
        let db = d(b)?;
        if da * db <= 0.0 {
            let (lo, hi, dlo, dhi) = if a < b { (a, b, da, db) } else { (b, a, db, da) };
            let s = bracket_root(|s| d(s).unwrap_or(f64::NAN), lo, hi, dlo, dhi, 1e-15 * l.max(1.0), 300);
            let v = d(s)?;
            return (v.abs() <= tol).then_some(s);
        }
        a = b;
        da = db;
        w *= 2.0;
    }
    None
}

/// Re-anchors a section at the equilibrium near its anchor for parameter
/// values where the equilibrium moves.
fn section_for(q: &ModelParams, sec: &Section, param: Parameter, rotated: bool) -> Result<Section> {
    if param == Parameter::Gamma {
        return Ok(*sec);
    }
    let anchor = polish(q, sec.anchor, 8);
    Section::at_focus(q, anchor, sec.direction, sec.length, rotated)
        .map(|s| if s.orientation == sec.orientation { s } else { *sec })
}

pub fn refine_cycle(
    p: &ModelParams,
    sec: &Section,
    s_star: f64,
    rotated: bool,
    ro: &ReturnOptions,
) -> Result<LimitCycle> {
    let r = first_return(p, sec, s_star, rotated, ro, true)?;
    let derivative = return_derivative(p, sec, s_star, 1e-5 * s_star, rotated, ro)?;
    Ok(LimitCycle {
        section: *sec,
        s_star,
        period: r.time,
        loop_points: r.path,
        derivative,
        divergence_multiplier: r.divergence_integral.exp(),
        stability: Stability::from_derivative(derivative),
        residual: r.s - s_star,
    })
}

fn min_distance(loop_points: &[PhasePoint], q: PhasePoint) -> f64 {
    loop_points.iter().map(|l| l.dist(&q)).fold(f64::INFINITY, f64::min)
}

/// Natural-parameter continuation of `c` with adaptive steps: halve on
/// failure, grow by 1.5 after three successes.
pub fn continue_cycle(
    p: &ModelParams,
    c: &LimitCycle,
    param: Parameter,
    policy: &StepPolicy,
    rotated: bool,
    saddles: &[PhasePoint],
) -> Result<CycleBranch> {
    let ro = &policy.returns;
    let dir = policy.initial.signum();
    let mut h = policy.initial.abs();
    let mut v = p.get(param);
    let mut samples = vec![(v, c.clone())];
    let mut successes = 0;
    let slope = (c.derivative - 1.0).signum();
    let mut prev_s: Option<(f64, f64)> = None;
    let termination = loop {
        if samples.len() >= policy.max_samples {
            break Termination::Lost;
        }
        let (_, last) = samples.last().unwrap().clone();
        if (policy.bound - v) * dir <= 0.0 {
            break Termination::ParameterBound;
        }
        let step = h.min((policy.bound - v).abs());
        let nv = v + dir * step;
        let attempt = p.with(param, nv).ok().and_then(|q| {
            let sec = section_for(&q, &last.section, param, rotated).ok()?;
            // secant predictor in (parameter, s*)
            let guess = match prev_s {
                Some((pv, ps)) if pv != v => {
                    let g = last.s_star + (last.s_star - ps) / (v - pv) * (nv - v);
                    if g > 0.0 && (g - last.s_star).abs() < 0.05 * sec.length { g } else { last.s_star }
                }
                _ => last.s_star,
            };
            let s = relocate(&q, &sec, guess, slope, rotated, ro)?;
            if (s - last.s_star).abs() >= 0.1 * sec.length {
                return None;
            }
            refine_cycle(&q, &sec, s, rotated, ro).ok()
        });
        match attempt {
            Some(nc) => {
                prev_s = Some((v, last.s_star));
                v = nv;
                let near_saddle = saddles
                    .iter()
                    .any(|&sd| min_distance(&nc.loop_points, sd) < policy.saddle_proximity);
                let homoclinic = nc.period > policy.period_cap && near_saddle;
                samples.push((v, nc));
                if homoclinic {
                    break Termination::Homoclinic;
                }
                successes += 1;
                if successes >= 3 {
                    h = (h * 1.5).min(policy.max);
                    successes = 0;
                }
            }
            None => {
                successes = 0;
                h *= 0.5;
                if h < policy.min {
                    let last = &samples.last().unwrap().1;
                    let near_saddle = saddles
                        .iter()
                        .any(|&sd| min_distance(&last.loop_points, sd) < 1e-2);
                    break if (last.derivative - 1.0).abs() < 0.05 {
                        Termination::Fold
                    } else if near_saddle {
                        Termination::Homoclinic
                    } else {
                        Termination::Lost
                    };
                }
            }
        }
    };
    Ok(CycleBranch { parameter: param, samples, termination })
}

/// Sign and location of the extremum of `d` between two nested cycles,
/// or `None` when some return in the window fails.
fn pair_extremum(
    q: &ModelParams,
    sec: &Section,
    window: (f64, f64),
    sign: f64,
    rotated: bool,
    ro: &ReturnOptions,
) -> (f64, f64) {
    let f = |s: f64| displacement(q, sec, s, rotated, ro).map(|v| -sign * v).unwrap_or(f64::INFINITY);
    let (s, fm) = golden_min(f, window.0, window.1, 1e-12 * sec.length, 200);
    (s, -sign * fm)
}

/// Locates the parameter where two cycles of opposite stability merge.
/// Bisects on whether the displacement between them still changes sign
/// twice, i.e. whether its extremum keeps the sign it has between the two
/// cycles.
pub fn detect_fold(b1: &CycleBranch, b2: &CycleBranch, base: &ModelParams, rotated: bool) -> Result<BifurcationEvent> {
    detect_fold_with(b1, b2, base, rotated, &ReturnOptions::default(), 1e-10)
}

pub fn detect_fold_with(
    b1: &CycleBranch,
    b2: &CycleBranch,
    base: &ModelParams,
    rotated: bool,
    ro: &ReturnOptions,
    tol: f64,
) -> Result<BifurcationEvent> {
    if b1.parameter != b2.parameter {
        return Err(Error::NoMerge("branches in different parameters".into()));
    }
    let param = b1.parameter;
    let (Some((v1, c1)), Some((v2, c2))) = (b1.last(), b2.last()) else {
        return Err(Error::NoMerge("empty branch".into()));
    };
    // compare where the branches start: near the merge both read semi-stable
    if b1.samples[0].1.stability == b2.samples[0].1.stability {
        return Err(Error::NoMerge("branches have the same stability".into()));
    }
    let sec = c1.section;
    let tail = |b: &CycleBranch| b.samples.iter().rev().take(20).map(|x| x.1.s_star).collect::<Vec<_>>();
    let (t1, t2) = (tail(b1), tail(b2));
    let lo_s = t1.iter().chain(&t2).copied().fold(f64::INFINITY, f64::min);
    let hi_s = t1.iter().chain(&t2).copied().fold(f64::NEG_INFINITY, f64::max);
    let gap = (c1.s_star - c2.s_star).abs();
    if gap > 0.1 * sec.length {
        return Err(Error::NoMerge(format!("cycles {gap} apart on the section")));
    }
    // d is positive between the cycles iff the inner one is unstable; read
    // off the branch starts, since near the merge d is below return noise
    let (f1, f2) = (&b1.samples[0].1, &b2.samples[0].1);
    let inner = if f1.s_star < f2.s_star { f1 } else { f2 };
    let sign = if inner.derivative > 1.0 { 1.0 } else { -1.0 };
    let margin = 0.5 * (hi_s - lo_s) + 1e-4 * sec.length;
    let window = ((lo_s - margin).max(1e-9), hi_s + margin);
    let exists = |v: f64| -> Result<(bool, f64, f64)> {
        let q = base.with(param, v)?;
        let s = section_for(&q, &sec, param, rotated)?;
        let (sm, dm) = pair_extremum(&q, &s, window, sign, rotated, ro);
        let inside = sm > window.0 + 1e-3 * margin && sm < window.1 - 1e-3 * margin;
        Ok((dm * sign > 0.0 && dm.is_finite() && inside, sm, dm))
    };
    let first = b1.samples.first().map(|x| x.0).unwrap_or(*v1);
    let dir = (*v1 - first).signum();
    let dir = if dir == 0.0 { (*v2 - b2.samples[0].0).signum() } else { dir };
    // last parameter, walking back along the branch, where the pair is resolved
    let mut v_in = None;
    for (v, _) in b1.samples.iter().rev().take(20) {
        if (*v - v2) * dir > 0.0 {
            continue;
        }
        if exists(*v)?.0 {
            v_in = Some(*v);
            break;
        }
    }
    let Some(v_in) = v_in else {
        return Err(Error::NoMerge(format!("no cycle pair near {param} = {v1}")));
    };
    let mut step = (v1 - v_in).abs().max((v1 - v2).abs()).max(1e-8);
    let mut v_out = v_in + dir * step;
    let mut tries = 0;
    while exists(v_out)?.0 {
        tries += 1;
        if tries > 40 {
            return Err(Error::NoMerge("cycle pair persists".into()));
        }
        step *= 2.0;
        v_out = v_in + dir * step;
    }
    let (mut a, mut b) = (v_in, v_out);
    while (b - a).abs() > tol {
        let m = 0.5 * (a + b);
        if exists(m)?.0 {
            a = m;
        } else {
            b = m;
        }
    }
    let (_, sm, dm) = exists(a)?;
    let q = base.with(param, a)?;
    let s = section_for(&q, &sec, param, rotated)?;
    let mut cycle = refine_cycle(&q, &s, sm, rotated, ro)?;
    let h = 1e-3 * sm;
    let d1 = return_derivative(&q, &s, sm, h, rotated, ro)?;
    let d2 = return_derivative(&q, &s, sm, 0.5 * h, rotated, ro)?;
    cycle.derivative = (4.0 * d2 - d1) / 3.0;
    cycle.stability = Stability::from_derivative(cycle.derivative);
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("derivative".into(), cycle.derivative);
    diagnostics.insert("extremum_displacement".into(), dm);
    diagnostics.insert("bracket_width".into(), (b - a).abs());
    Ok(BifurcationEvent {
        kind: EventKind::FoldOfCycles,
        parameter: param,
        value: 0.5 * (a + b),
        subject: format!("semi-stable cycle at s = {sm:.10}"),
        residual: dm,
        diagnostics,
        cycle: Some(cycle),
    })
}

/// Value of a split function together with the unstable branch that
/// produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub value: f64,
    /// Unstable branch from the saddle until it comes back near the saddle
    /// (or the time budget runs out).
    pub path: Vec<PhasePoint>,
}

/// A loop candidate: which unstable and stable branch of the saddle, and
/// the antisaddle whose outward ray (pointing away from the saddle)
/// serves as the transversal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LoopCandidate {
    pub unstable_sign: i8,
    pub stable_sign: i8,
    pub antisaddle: usize,
}

/// First crossing of `ray` by the orbit from `start` (forward or backward
/// in time) at which the forward field crosses in the ray's orientation.
fn ray_crossing(
    p: &ModelParams,
    start: PhasePoint,
    ray: &Section,
    rotated: bool,
    t_end: f64,
    opts: &IntegratorOptions,
    mut path: Option<&mut Vec<PhasePoint>>,
) -> Option<(f64, f64)> {
    let sgn = t_end.signum();
    let rhs = |_t: f64, y: &[f64; 2]| {
        let f = field(p, PhasePoint::new(y[0], y[1]), rotated);
        [sgn * f.dx, sgn * f.dy]
    };
    let mut hit = None;
    let _ = run(rhs, 0.0, [start.x, start.y], t_end.abs(), opts, |st: &Step<2>| {
        let a = PhasePoint::new(st.y0[0], st.y0[1]);
        let b = PhasePoint::new(st.y1[0], st.y1[1]);
        if let Some(pth) = path.as_deref_mut() {
            pth.push(b);
        }
        let (da, db) = (ray.signed_distance(a), ray.signed_distance(b));
        if da * db < 0.0 || (db == 0.0 && da != 0.0) {
            let g = |t: f64| {
                let y = st.eval(t);
                ray.signed_distance(PhasePoint::new(y[0], y[1]))
            };
            let tc = bracket_root(g, st.t0, st.t1, da, db, 1e-13, 200);
            let y = st.eval(tc);
            let q = PhasePoint::new(y[0], y[1]);
            let f = field(p, q, rotated);
            let n = ray.normal();
            if ray.arc(q) > 0.0 && (f.dx * n[0] + f.dy * n[1]) * ray.orientation > 0.0 {
                hit = Some((ray.arc(q), sgn * tc));
                return Control::Stop;
            }
        }
        if b.norm() > opts.blowup_radius || st.f1[0].hypot(st.f1[1]) < opts.capture_norm {
            return Control::Stop;
        }
        Control::Continue
    });
    hit
}

/// Split function of a separatrix-loop candidate: on the ray from the
/// antisaddle pointing away from the saddle, the arc position where the
/// unstable branch first crosses minus the position where the stable
/// branch (followed backward) first crosses. It vanishes exactly when
/// the two branches coincide. `None` when either branch misses the ray.
/// `t_max` is the time allowed beyond the escape from the saddle
/// neighborhood.
pub fn split_function(
    p: &ModelParams,
    saddle: PhasePoint,
    antisaddle: PhasePoint,
    cand: LoopCandidate,
    rotated: bool,
    t_max: f64,
    opts: &IntegratorOptions,
) -> Result<Option<Split>> {
    let j = eval_jacobian(p, saddle, rotated);
    let ev = j.eigenvalues();
    if ev[0].im != 0.0 || ev[0].re * ev[1].re >= 0.0 {
        return Err(Error::NotASaddle(format!("({}, {})", saddle.x, saddle.y)));
    }
    let (ls, lu) = (ev[0].re.min(ev[1].re), ev[0].re.max(ev[1].re));
    let vs = j.real_eigenvector(ls);
    let vu = j.real_eigenvector(lu);
    let eps = 1e-6 * (1.0 + saddle.norm());
    let escape = (1e-2 / 1e-6f64).ln() * (1.0 / lu + 1.0 / ls.abs());
    let t_end = t_max + escape;
    let dir = [antisaddle.x - saddle.x, antisaddle.y - saddle.y];
    let ray = Section::at_focus(p, antisaddle, dir, 1.0, rotated)?;
    let (su, ss) = (cand.unstable_sign as f64, cand.stable_sign as f64);
    let u0 = PhasePoint::new(saddle.x + eps * su * vu[0], saddle.y + eps * su * vu[1]);
    let s0 = PhasePoint::new(saddle.x + eps * ss * vs[0], saddle.y + eps * ss * vs[1]);
    let Some((arc_s, _)) = ray_crossing(p, s0, &ray, rotated, -t_end, opts, None) else {
        return Ok(None);
    };
    let mut path = vec![u0];
    let Some((arc_u, tu)) = ray_crossing(p, u0, &ray, rotated, t_end, opts, Some(&mut path)) else {
        return Ok(None);
    };
    // finish the excursion for labeling: follow until back near the saddle
    let back = path.last().copied().unwrap_or(u0);
    let r = 1e-2 * (1.0 + saddle.norm());
    let mut left = false;
    let _ = run(
        |_t, y: &[f64; 2]| {
            let f = field(p, PhasePoint::new(y[0], y[1]), rotated);
            [f.dx, f.dy]
        },
        0.0,
        [back.x, back.y],
        t_end - tu,
        opts,
        |st: &Step<2>| {
            let b = PhasePoint::new(st.y1[0], st.y1[1]);
            path.push(b);
            let d = b.dist(&saddle);
            if d > 2.0 * r {
                left = true;
            }
            if (left && d < r) || b.norm() > opts.blowup_radius {
                return Control::Stop;
            }
            Control::Continue
        },
    );
    Ok(Some(Split { value: arc_u - arc_s, path }))
}

/// Scans `range` for zeros of the split functions of every branch pairing
/// and antisaddle ray, and labels the loops found by the antisaddles they
/// enclose.
pub fn homoclinic_scan(
    p: &ModelParams,
    saddle: &Equilibrium,
    antisaddles: &[PhasePoint],
    param: Parameter,
    range: (f64, f64),
    samples: usize,
    rotated: bool,
) -> Result<Vec<BifurcationEvent>> {
    homoclinic_scan_with(p, saddle, antisaddles, param, range, samples, rotated, 200.0, &IntegratorOptions::default())
}

#[allow(clippy::too_many_arguments)]
pub fn homoclinic_scan_with(
    p: &ModelParams,
    saddle: &Equilibrium,
    antisaddles: &[PhasePoint],
    param: Parameter,
    range: (f64, f64),
    samples: usize,
    rotated: bool,
    t_max: f64,
    opts: &IntegratorOptions,
) -> Result<Vec<BifurcationEvent>> {
    let samples = samples.max(2);
    let track = |q: &ModelParams, loc: PhasePoint| {
        if param == Parameter::Gamma {
            loc
        } else {
            polish(q, loc, 8)
        }
    };
    let mut events: Vec<BifurcationEvent> = Vec::new();
    for (ai, &a0) in antisaddles.iter().enumerate() {
        for us in [1i8, -1] {
            for ss in [1i8, -1] {
                let cand = LoopCandidate { unstable_sign: us, stable_sign: ss, antisaddle: ai };
                let (mut sl, mut al) = (saddle.location, a0);
                let mut prev: Option<(f64, f64)> = None;
                for k in 0..samples {
                    let v = range.0 + (range.1 - range.0) * k as f64 / (samples - 1) as f64;
                    let q = p.with(param, v)?;
                    sl = track(&q, sl);
                    al = track(&q, al);
                    let sp = split_function(&q, sl, al, cand, rotated, t_max, opts).ok().flatten();
                    let Some(sp) = sp else {
                        prev = None;
                        continue;
                    };
                    if let Some((v0, s0)) = prev {
                        if s0 * sp.value <= 0.0 {
                            let ctx = LoopContext { p, param, cand, antisaddles, rotated, t_max, opts };
                            if let Some(e) = ctx.refine((v0, s0), (v, sp.value), sl, al)? {
                                if !events.iter().any(|x| x.kind == e.kind && (x.value - e.value).abs() < 1e-7) {
                                    events.push(e);
                                }
                            }
                        }
                    }
                    prev = Some((v, sp.value));
                }
            }
        }
    }
    events.sort_by(|a, b| a.value.total_cmp(&b.value));
    // two small loops at one parameter value form an eight
    let smalls: Vec<&BifurcationEvent> =
        events.iter().filter(|e| e.kind == EventKind::HomoclinicSmallLoop).collect();
    let mut eights = Vec::new();
    for (i, a) in smalls.iter().enumerate() {
        for b in &smalls[i + 1..] {
            if (a.value - b.value).abs() <= 1e-6 && a.subject != b.subject {
                eights.push(BifurcationEvent {
                    kind: EventKind::EightLoop,
                    parameter: param,
                    value: 0.5 * (a.value + b.value),
                    subject: format!("{} + {}", a.subject, b.subject),
                    residual: a.residual.abs().max(b.residual.abs()),
                    diagnostics: BTreeMap::from([("separation".to_string(), (a.value - b.value).abs())]),
                    cycle: None,
                });
            }
        }
    }
    events.extend(eights);
    events.sort_by(|a, b| a.value.total_cmp(&b.value));
    Ok(events)
}

struct LoopContext<'a> {
    p: &'a ModelParams,
    param: Parameter,
    cand: LoopCandidate,
    antisaddles: &'a [PhasePoint],
    rotated: bool,
    t_max: f64,
    opts: &'a IntegratorOptions,
}

impl LoopContext<'_> {
    fn eval(&self, v: f64, sl: PhasePoint, al: PhasePoint) -> Result<Option<(Split, PhasePoint)>> {
        let q = self.p.with(self.param, v)?;
        let (sl, al) = if self.param == Parameter::Gamma {
            (sl, al)
        } else {
            (polish(&q, sl, 8), polish(&q, al, 8))
        };
        Ok(split_function(&q, sl, al, self.cand, self.rotated, self.t_max, self.opts)?.map(|s| (s, sl)))
    }

    fn refine(
        &self,
        left: (f64, f64),
        right: (f64, f64),
        sl: PhasePoint,
        al: PhasePoint,
    ) -> Result<Option<BifurcationEvent>> {
        let (mut a, mut sa) = left;
        let (mut b, _) = right;
        while (b - a).abs() > 1e-8 * (1.0 + a.abs()) {
            let m = 0.5 * (a + b);
            let Some((sm, _)) = self.eval(m, sl, al)? else { return Ok(None) };
            if (sm.value < 0.0) == (sa < 0.0) && sm.value != 0.0 {
                a = m;
                sa = sm.value;
            } else {
                b = m;
            }
        }
        let v = 0.5 * (a + b);
        let Some((sp, loc)) = self.eval(v, sl, al)? else { return Ok(None) };
        // a jump of the branch to another basin also flips the sign
        if sp.value.abs() > 1e-4 {
            return Ok(None);
        }
        let inside: Vec<usize> = self
            .antisaddles
            .iter()
            .enumerate()
            .filter(|(_, &q)| crate::dynamics::point_in_polygon(&sp.path, q))
            .map(|(i, _)| i)
            .collect();
        let (kind, subject) = match inside.as_slice() {
            [] => return Ok(None),
            [i] => (EventKind::HomoclinicSmallLoop, format!("A{}", i + 1)),
            _ => (EventKind::HomoclinicBigLoop, "A1+A2".to_string()),
        };
        let mut diagnostics = BTreeMap::new();
        diagnostics.insert("unstable_sign".into(), self.cand.unstable_sign as f64);
        diagnostics.insert("stable_sign".into(), self.cand.stable_sign as f64);
        diagnostics.insert("saddle_x".into(), loc.x);
        diagnostics.insert("saddle_y".into(), loc.y);
        diagnostics.insert("bracket_width".into(), (b - a).abs());
        Ok(Some(BifurcationEvent {
            kind,
            parameter: self.param,
            value: v,
            subject,
            residual: sp.value,
            diagnostics,
            cycle: None,
        }))
    }
}
