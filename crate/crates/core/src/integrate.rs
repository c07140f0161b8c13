//! Dormand-Prince 5(4) integrator with continuous (dense) output.
//!
//! The stepper is generic over the state dimension so that the same code
//! drives plain orbits, return maps and the divergence quadrature along a
//! cycle (an augmented 3-dimensional system).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Smallest admissible |h| before the controller gives up.
    pub h_min: f64,
    /// Upper bound on |h|; `None` leaves it to the controller.
    pub h_max: Option<f64>,
    /// Use a fixed step instead of error control (convergence studies).
    pub fixed_step: Option<f64>,
    pub max_steps: usize,
    /// Orbits whose norm exceeds this radius are treated as escaping.
    pub blowup_radius: f64,
    /// Field norm below which the state is treated as an equilibrium.
    pub capture_norm: f64,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions {
            rtol: 1e-10,
            atol: 1e-12,
            h_min: 1e-14,
            h_max: None,
            fixed_step: None,
            max_steps: 2_000_000,
            blowup_radius: 1e6,
            capture_norm: 1e-13,
        }
    }
}

impl IntegratorOptions {
    pub fn with_tolerances(mut self, rtol: f64, atol: f64) -> Self {
        self.rtol = rtol;
        self.atol = atol;
        self
    }
}

/// One accepted step together with its continuous extension.
#[derive(Debug, Clone)]
pub struct Step<const N: usize> {
    pub t0: f64,
    pub t1: f64,
    pub y0: [f64; N],
    pub y1: [f64; N],
    /// Derivative at the end of the step (first-same-as-last stage).
    pub f1: [f64; N],
    r2: [f64; N],
    r3: [f64; N],
    r4: [f64; N],
    r5: [f64; N],
}

impl<const N: usize> Step<N> {
    /// Dense output of order 4 on `[t0, t1]`.
    pub fn eval(&self, t: f64) -> [f64; N] {
        let h = self.t1 - self.t0;
        let th = if h != 0.0 { (t - self.t0) / h } else { 0.0 };
        let th1 = 1.0 - th;
        let mut out = [0.0; N];
        for i in 0..N {
            out[i] = self.y0[i]
                + th * (self.r2[i] + th1 * (self.r3[i] + th * (self.r4[i] + th1 * self.r5[i])));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

#[derive(Debug, Clone)]
pub struct RunSummary<const N: usize> {
    pub t: f64,
    pub y: [f64; N],
    pub accepted: usize,
    pub rejected: usize,
    pub stopped: bool,
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for i in 0..N {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        out[i] += h * acc;
    }
    out
}

fn error_norm<const N: usize>(
    err: &[f64; N],
    y0: &[f64; N],
    y1: &[f64; N],
    opts: &IntegratorOptions,
) -> f64 {
    let mut acc = 0.0;
    for i in 0..N {
        let sc = opts.atol + opts.rtol * y0[i].abs().max(y1[i].abs());
        let r = err[i] / sc;
        acc += r * r;
    }
    (acc / N as f64).sqrt()
}

fn initial_step<const N: usize, F>(
    f: &mut F,
    t0: f64,
    y0: &[f64; N],
    f0: &[f64; N],
    dir: f64,
    opts: &IntegratorOptions,
) -> f64
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let mut dnf = 0.0;
    let mut dny = 0.0;
    for i in 0..N {
        let sk = opts.atol + opts.rtol * y0[i].abs();
        dnf += (f0[i] / sk).powi(2);
        dny += (y0[i] / sk).powi(2);
    }
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 { 1e-6 } else { (dny / dnf).sqrt() * 0.01 };
    if let Some(hm) = opts.h_max {
        h = h.min(hm);
    }
    let y1 = axpy(y0, h * dir, &[(1.0, f0)]);
    let f1 = f(t0 + h * dir, &y1);
    let mut der2 = 0.0;
    for i in 0..N {
        let sk = opts.atol + opts.rtol * y0[i].abs();
        der2 += ((f1[i] - f0[i]) / sk).powi(2);
    }
    let der2 = der2.sqrt() / h;
    let der12 = der2.max(dnf.sqrt());
    let h1 = if der12 <= 1e-15 { (h * 1e-3).max(1e-6) } else { (0.01 / der12).powf(0.2) };
    let mut h = (100.0 * h).min(h1);
    if let Some(hm) = opts.h_max {
        h = h.min(hm);
    }
    h.max(opts.h_min * 10.0)
}

/// Integrates `y' = f(t, y)` from `t0` to `t_end` (either direction),
/// handing every accepted step to `on_step`. Returns when `t_end` is
/// reached or the callback asks to stop.
pub fn run<const N: usize, F, C>(
    mut f: F,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    opts: &IntegratorOptions,
    mut on_step: C,
) -> Result<RunSummary<N>>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
    C: FnMut(&Step<N>) -> Control,
{
    let dir = if t_end >= t0 { 1.0 } else { -1.0 };
    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    let mut summary = RunSummary { t, y, accepted: 0, rejected: 0, stopped: false };
    if t == t_end {
        return Ok(summary);
    }
    let mut h = match opts.fixed_step {
        Some(h) => h.abs(),
        None => initial_step(&mut f, t, &y, &k1, dir, opts),
    };
    let mut last_rejected = false;
    let mut steps = 0usize;

    loop {
        if steps >= opts.max_steps {
            return Err(Error::StepSizeUnderflow(t));
        }
        steps += 1;
        let remaining = (t_end - t) * dir;
        let mut last = false;
        if h >= remaining {
            h = remaining;
            last = true;
        }
        let hs = h * dir;
        let k2 = f(t + C2 * hs, &axpy(&y, hs, &[(A21, &k1)]));
        let k3 = f(t + C3 * hs, &axpy(&y, hs, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(t + C4 * hs, &axpy(&y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = f(
            t + C5 * hs,
            &axpy(&y, hs, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        );
        let k6 = f(
            t + hs,
            &axpy(&y, hs, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
        );
        let y1 = axpy(&y, hs, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let k7 = f(t + hs, &y1);

        let err_norm = if opts.fixed_step.is_some() {
            0.0
        } else {
            let mut err = [0.0; N];
            for i in 0..N {
                err[i] = hs
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            }
            error_norm(&err, &y, &y1, opts)
        };

        if !y1.iter().all(|v| v.is_finite()) || err_norm > 1.0 {
            // reject
            summary.rejected += 1;
            if opts.fixed_step.is_some() {
                return Err(Error::StepSizeUnderflow(t));
            }
            let fac = if err_norm.is_finite() {
                (0.9 * err_norm.powf(-0.2)).clamp(0.2, 1.0)
            } else {
                0.2
            };
            h *= if last_rejected { fac.min(0.5) } else { fac };
            last_rejected = true;
            if h < opts.h_min {
                return Err(Error::StepSizeUnderflow(t));
            }
            continue;
        }

        let mut r2 = [0.0; N];
        let mut r3 = [0.0; N];
        let mut r4 = [0.0; N];
        let mut r5 = [0.0; N];
        for i in 0..N {
            let dy = y1[i] - y[i];
            let bspl = hs * k1[i] - dy;
            r2[i] = dy;
            r3[i] = bspl;
            r4[i] = dy - hs * k7[i] - bspl;
            r5[i] = hs
                * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
        }
        let t1 = if last { t_end } else { t + hs };
        let step = Step { t0: t, t1, y0: y, y1, f1: k7, r2, r3, r4, r5 };
        summary.accepted += 1;
        t = t1;
        y = y1;
        k1 = k7;
        summary.t = t;
        summary.y = y;

        if on_step(&step) == Control::Stop {
            summary.stopped = true;
            return Ok(summary);
        }
        if last {
            return Ok(summary);
        }

        if opts.fixed_step.is_none() {
            let mut fac = 0.9 * err_norm.max(1e-10).powf(-0.2);
            fac = fac.clamp(0.2, if last_rejected { 1.0 } else { 5.0 });
            h *= fac;
            if let Some(hm) = opts.h_max {
                h = h.min(hm);
            }
            if h < opts.h_min {
                return Err(Error::StepSizeUnderflow(t));
            }
        }
        last_rejected = false;
    }
}

/// Finds a root of `g` on `[a, b]` given `g(a)·g(b) <= 0` with the Illinois
/// variant of regula falsi, falling back to bisection when it stalls.
pub fn bracket_root<G: FnMut(f64) -> f64>(
    mut g: G,
    mut a: f64,
    mut b: f64,
    mut ga: f64,
    mut gb: f64,
    xtol: f64,
    max_iter: usize,
) -> f64 {
    if ga == 0.0 {
        return a;
    }
    if gb == 0.0 {
        return b;
    }
    let mut side = 0i8;
    for it in 0..max_iter {
        if (b - a).abs() <= xtol {
            break;
        }
        let mut c = (a * gb - b * ga) / (gb - ga);
        if !c.is_finite() || c <= a.min(b) || c >= a.max(b) || it % 8 == 7 {
            c = 0.5 * (a + b);
        }
        let gc = g(c);
        if gc == 0.0 {
            return c;
        }
        if gc.signum() == gb.signum() {
            b = c;
            gb = gc;
            if side == 1 {
                ga *= 0.5;
            }
            side = 1;
        } else {
            a = c;
            ga = gc;
            if side == -1 {
                gb *= 0.5;
            }
            side = -1;
        }
    }
    if ga.abs() < gb.abs() {
        a
    } else {
        b
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_matches_closed_form() {
        let opts = IntegratorOptions::default();
        let s = run(|_, y: &[f64; 1]| [-y[0]], 0.0, [1.0], 5.0, &opts, |_| Control::Continue)
            .unwrap();
        assert!((s.y[0] - (-5.0f64).exp()).abs() < 1e-11);
        assert_eq!(s.t, 5.0);
    }

    #[test]
    fn backward_integration() {
        let opts = IntegratorOptions::default();
        let s = run(|_, y: &[f64; 1]| [-y[0]], 0.0, [1.0], -2.0, &opts, |_| Control::Continue)
            .unwrap();
        assert!((s.y[0] - 2.0f64.exp()).abs() < 1e-9);
    }

    #[test]
    fn dense_output_tracks_solution() {
        let opts = IntegratorOptions::default().with_tolerances(1e-9, 1e-12);
        let mut worst = 0.0f64;
        run(
            |_, y: &[f64; 2]| [y[1], -y[0]],
            0.0,
            [0.0, 1.0],
            10.0,
            &opts,
            |st| {
                for k in 0..=10 {
                    let t = st.t0 + (st.t1 - st.t0) * k as f64 / 10.0;
                    let y = st.eval(t);
                    worst = worst.max((y[0] - t.sin()).abs());
                }
                Control::Continue
            },
        )
        .unwrap();
        assert!(worst < 1e-7, "{worst}");
    }

    #[test]
    fn callback_can_stop() {
        let opts = IntegratorOptions::default();
        let mut n = 0;
        let s = run(|_, y: &[f64; 1]| [y[0]], 0.0, [1.0], 100.0, &opts, |_| {
            n += 1;
            if n == 3 {
                Control::Stop
            } else {
                Control::Continue
            }
        })
        .unwrap();
        assert!(s.stopped);
        assert_eq!(s.accepted, 3);
    }

    #[test]
    fn illinois_finds_root() {
        let r = bracket_root(|x| x * x - 2.0, 0.0, 2.0, -2.0, 2.0, 1e-14, 200);
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
    }
}
