//! Right-hand sides, Jacobians, isoclines and rotation determinants of the
//! quartic predator-prey system
//!
//! ```text
//! x' = P = x((1 - λx)(αx² + βx + 1) - y)
//! y' = Q = -y((δ + μy)(αx² + βx + 1) - x)
//! ```
//!
//! and of its rotated companion `x' = P - γQ, y' = Q + γP`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

/// Model parameters. `gamma` is the field rotation parameter; it only enters
/// the rotated system and `gamma = 0` reproduces the original field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct ModelParams {
    alpha: f64,
    beta: f64,
    delta: f64,
    lambda: f64,
    mu: f64,
    gamma: f64,
    /// Whether `beta > -2 sqrt(alpha)` is enforced.
    pole_free: bool,
}

fn yes() -> bool {
    true
}

fn is_true(b: &bool) -> bool {
    *b
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct RawParams {
    alpha: f64,
    beta: f64,
    delta: f64,
    lambda: f64,
    mu: f64,
    #[serde(default)]
    gamma: f64,
    #[serde(default = "yes", skip_serializing_if = "is_true")]
    pole_free: bool,
}

impl TryFrom<RawParams> for ModelParams {
    type Error = Error;

    fn try_from(r: RawParams) -> Result<Self> {
        let p = if r.pole_free {
            ModelParams::new(r.alpha, r.beta, r.delta, r.lambda, r.mu)?
        } else {
            ModelParams::polynomial(r.alpha, r.beta, r.delta, r.lambda, r.mu)?
        };
        p.with_gamma(r.gamma)
    }
}

impl From<ModelParams> for RawParams {
    fn from(p: ModelParams) -> Self {
        RawParams {
            alpha: p.alpha,
            beta: p.beta,
            delta: p.delta,
            lambda: p.lambda,
            mu: p.mu,
            gamma: p.gamma,
            pole_free: p.pole_free,
        }
    }
}

/// Parameters that can be swept or continued.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parameter {
    Alpha,
    Beta,
    Gamma,
}

impl Parameter {
    pub fn name(self) -> &'static str {
        match self {
            Parameter::Alpha => "alpha",
            Parameter::Beta => "beta",
            Parameter::Gamma => "gamma",
        }
    }
}

impl fmt::Display for Parameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Parameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alpha" => Ok(Parameter::Alpha),
            "beta" => Ok(Parameter::Beta),
            "gamma" => Ok(Parameter::Gamma),
            other => Err(Error::Config(format!("unknown parameter `{other}`"))),
        }
    }
}

/// Stage of the staged analysis, decided by which of α, β vanish.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Quadratic,
    Cubic,
    Quartic,
}

impl Stage {
    /// Polynomial degree of the field.
    pub fn degree(self) -> u32 {
        match self {
            Stage::Quadratic => 2,
            Stage::Cubic => 3,
            Stage::Quartic => 4,
        }
    }
}

impl ModelParams {
    pub fn new(alpha: f64, beta: f64, delta: f64, lambda: f64, mu: f64) -> Result<Self> {
        let p = ModelParams::polynomial(alpha, beta, delta, lambda, mu)?;
        // alpha = beta = 0 is the quadratic stage and stays admissible
        let below = if alpha == 0.0 { beta < 0.0 } else { beta <= -2.0 * alpha.sqrt() };
        if below {
            return Err(Error::InvalidParams(format!(
                "beta = {beta} <= -2 sqrt(alpha) = {}",
                -2.0 * alpha.sqrt()
            )));
        }
        Ok(ModelParams { pole_free: true, ..p })
    }

    /// Parameters of the polynomial system without the lower bound on beta,
    /// which only serves to keep the response function free of poles. The
    /// cubic stage with beta < 0 lives here.
    pub fn polynomial(alpha: f64, beta: f64, delta: f64, lambda: f64, mu: f64) -> Result<Self> {
        let all = [alpha, beta, delta, lambda, mu];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("parameters must be finite".into()));
        }
        if alpha < 0.0 {
            return Err(Error::InvalidParams(format!("alpha = {alpha} < 0")));
        }
        if delta <= 0.0 {
            return Err(Error::InvalidParams(format!("delta = {delta} <= 0")));
        }
        if lambda <= 0.0 {
            return Err(Error::InvalidParams(format!("lambda = {lambda} <= 0")));
        }
        if mu < 0.0 {
            return Err(Error::InvalidParams(format!("mu = {mu} < 0")));
        }
        Ok(ModelParams { alpha, beta, delta, lambda, mu, gamma: 0.0, pole_free: false })
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        if !gamma.is_finite() {
            return Err(Error::InvalidParams("gamma must be finite".into()));
        }
        self.gamma = gamma;
        Ok(self)
    }

    /// Returns a copy with one sweepable parameter replaced, re-validated
    /// under the same domain as `self`.
    pub fn with(self, param: Parameter, value: f64) -> Result<Self> {
        let (a, b) = match param {
            Parameter::Alpha => (value, self.beta),
            Parameter::Beta => (self.alpha, value),
            Parameter::Gamma => return self.with_gamma(value),
        };
        let p = if self.pole_free {
            ModelParams::new(a, b, self.delta, self.lambda, self.mu)?
        } else {
            ModelParams::polynomial(a, b, self.delta, self.lambda, self.mu)?
        };
        p.with_gamma(self.gamma)
    }

    pub fn is_pole_free(&self) -> bool {
        self.pole_free
    }

    pub fn get(&self, param: Parameter) -> f64 {
        match param {
            Parameter::Alpha => self.alpha,
            Parameter::Beta => self.beta,
            Parameter::Gamma => self.gamma,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn delta(&self) -> f64 {
        self.delta
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn stage(&self) -> Stage {
        if self.alpha != 0.0 {
            Stage::Quartic
        } else if self.beta != 0.0 {
            Stage::Cubic
        } else {
            Stage::Quadratic
        }
    }

    /// A(x) = αx² + βx + 1 in Horner form.
    #[inline]
    pub fn denom(&self, x: f64) -> f64 {
        (self.alpha * x + self.beta) * x + 1.0
    }

    #[inline]
    fn denom_prime(&self, x: f64) -> f64 {
        2.0 * self.alpha * x + self.beta
    }
}

impl fmt::Display for ModelParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "alpha={} beta={} delta={} lambda={} mu={} gamma={}",
            self.alpha, self.beta, self.delta, self.lambda, self.mu, self.gamma
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: f64,
    pub y: f64,
}

impl PhasePoint {
    pub const fn new(x: f64, y: f64) -> Self {
        PhasePoint { x, y }
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(&self, other: &PhasePoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for PhasePoint {
    fn from(a: [f64; 2]) -> Self {
        PhasePoint::new(a[0], a[1])
    }
}

impl From<PhasePoint> for [f64; 2] {
    fn from(p: PhasePoint) -> Self {
        [p.x, p.y]
    }
}

/// Time derivatives (P, Q) at a point.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FieldValue {
    pub dx: f64,
    pub dy: f64,
}

impl FieldValue {
    pub fn norm(&self) -> f64 {
        self.dx.hypot(self.dy)
    }
}

/// Linearization of the field at a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jacobian2 {
    pub pxx: f64,
    pub pxy: f64,
    pub qyx: f64,
    pub qyy: f64,
}

impl Jacobian2 {
    pub fn trace(&self) -> f64 {
        self.pxx + self.qyy
    }

    pub fn determinant(&self) -> f64 {
        self.pxx * self.qyy - self.pxy * self.qyx
    }

    /// Roots of `s² - trace·s + det`, ordered by real part (ascending) for
    /// real pairs and with the positive imaginary part first otherwise.
    pub fn eigenvalues(&self) -> [Complex64; 2] {
        let tr = self.trace();
        let det = self.determinant();
        // Half-difference form avoids cancellation in tr² - 4det.
        let half_diff = 0.5 * (self.pxx - self.qyy);
        let disc = half_diff * half_diff + self.pxy * self.qyx;
        let mid = 0.5 * tr;
        if disc >= 0.0 {
            let r = disc.sqrt();
            // Larger-magnitude root first, then Vieta for the other one.
            let big = if mid >= 0.0 { mid + r } else { mid - r };
            let small = if big != 0.0 { det / big } else { mid - r.copysign(mid) };
            let (a, b) = if big <= small { (big, small) } else { (small, big) };
            [Complex64::new(a, 0.0), Complex64::new(b, 0.0)]
        } else {
            let im = (-disc).sqrt();
            [Complex64::new(mid, im), Complex64::new(mid, -im)]
        }
    }

    /// Eigenvector for a real eigenvalue, normalized.
    pub fn real_eigenvector(&self, ev: f64) -> [f64; 2] {
        // (J - ev I) v = 0; pick the better-conditioned row.
        let r1 = [self.pxx - ev, self.pxy];
        let r2 = [self.qyx, self.qyy - ev];
        let n1 = r1[0].hypot(r1[1]);
        let n2 = r2[0].hypot(r2[1]);
        let v = if n1 >= n2 && n1 > 0.0 {
            [-r1[1], r1[0]]
        } else if n2 > 0.0 {
            [-r2[1], r2[0]]
        } else {
            [1.0, 0.0]
        };
        let n = v[0].hypot(v[1]);
        [v[0] / n, v[1] / n]
    }
}

/// Field of the original (unrotated) system.
#[inline]
pub fn eval_field(p: &ModelParams, pt: PhasePoint) -> FieldValue {
    let PhasePoint { x, y } = pt;
    let a = p.denom(x);
    let dx = x * ((1.0 - p.lambda * x) * a - y);
    let dy = -y * ((p.delta + p.mu * y) * a - x);
    FieldValue { dx, dy }
}

/// Field of the rotated system `(P - γQ, Q + γP)`.
#[inline]
pub fn eval_rotated_field(p: &ModelParams, pt: PhasePoint) -> FieldValue {
    let f = eval_field(p, pt);
    rotate(f, p.gamma)
}

#[inline]
fn rotate(f: FieldValue, gamma: f64) -> FieldValue {
    if gamma == 0.0 {
        return f;
    }
    FieldValue { dx: f.dx - gamma * f.dy, dy: f.dy + gamma * f.dx }
}

/// Evaluates either field depending on `rotated`.
#[inline]
pub fn field(p: &ModelParams, pt: PhasePoint, rotated: bool) -> FieldValue {
    if rotated {
        eval_rotated_field(p, pt)
    } else {
        eval_field(p, pt)
    }
}

/// Scaled non-monotonic response `x / (αx² + βx + 1)`.
pub fn response(p: &ModelParams, x: f64) -> Result<f64> {
    let a = p.denom(x);
    if a == 0.0 {
        return Err(Error::Pole(x));
    }
    Ok(x / a)
}

/// Zero isocline of the prey equation, `y = (1 - λx)(αx² + βx + 1)`.
pub fn prey_isocline(p: &ModelParams, x: f64) -> f64 {
    (1.0 - p.lambda * x) * p.denom(x)
}

/// Zero isocline of the predator equation solved for y, `(x/A - δ)/μ`.
/// `None` when μ = 0 (vertical branches) or on a pole of the response.
pub fn predator_isocline(p: &ModelParams, x: f64) -> Option<f64> {
    if p.mu <= 0.0 {
        return None;
    }
    let r = response(p, x).ok()?;
    Some((r - p.delta) / p.mu)
}

pub fn eval_jacobian(p: &ModelParams, pt: PhasePoint, rotated: bool) -> Jacobian2 {
    let PhasePoint { x, y } = pt;
    let a = p.denom(x);
    let ap = p.denom_prime(x);
    let l = 1.0 - p.lambda * x;
    let d = p.delta + p.mu * y;
    let px = (l * a - y) + x * (l * ap - p.lambda * a);
    let py = -x;
    let qx = -y * (d * ap - 1.0);
    let qy = -(d * a - x) - y * p.mu * a;
    if rotated && p.gamma != 0.0 {
        let g = p.gamma;
        Jacobian2 { pxx: px - g * qx, pxy: py - g * qy, qyx: qx + g * px, qyy: qy + g * py }
    } else {
        Jacobian2 { pxx: px, pxy: py, qyx: qx, qyy: qy }
    }
}

/// Left-hand side of the ellipse `y(δ + μy) - x(1 - λx) = 0`.
pub fn ellipse_residual(p: &ModelParams, pt: PhasePoint) -> f64 {
    pt.y * (p.delta + p.mu * pt.y) - pt.x * (1.0 - p.lambda * pt.x)
}

/// Rotation determinants `PQ'_k - QP'_k` for k = α, β, γ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationDeterminants {
    pub d_alpha: f64,
    pub d_beta: f64,
    pub d_gamma: f64,
}

pub fn rotation_determinants(p: &ModelParams, pt: PhasePoint) -> RotationDeterminants {
    let e = ellipse_residual(p, pt);
    let d_beta = pt.x * pt.x * pt.y * e;
    let d_alpha = pt.x * d_beta;
    let f = eval_field(p, pt);
    RotationDeterminants { d_alpha, d_beta, d_gamma: f.dx * f.dx + f.dy * f.dy }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ModelParams {
        ModelParams::new(2.6618, -1.9089, 0.5152, 0.9862, 0.6753).unwrap()
    }

    #[test]
    fn rejects_invalid() {
        assert!(ModelParams::new(-1.0, 0.0, 1.0, 1.0, 0.0).is_err());
        assert!(ModelParams::new(0.0, 0.0, 0.0, 1.0, 0.0).is_err());
        assert!(ModelParams::new(0.0, 0.0, 1.0, 0.0, 0.0).is_err());
        assert!(ModelParams::new(0.0, 0.0, 1.0, 1.0, -0.1).is_err());
        assert!(ModelParams::new(1.0, -2.0, 1.0, 1.0, 0.0).is_err());
        assert!(ModelParams::new(1.0, -1.99, 1.0, 1.0, 0.0).is_ok());
        assert!(ModelParams::new(0.0, 0.0, 1.0, 1.0, 0.0).is_ok());
    }

    #[test]
    fn field_examples() {
        let p = params();
        assert_eq!(eval_field(&p, PhasePoint::new(0.0, 0.0)), FieldValue { dx: 0.0, dy: 0.0 });
        let f = eval_field(&p, PhasePoint::new(1.0 / p.lambda(), 0.0));
        assert!(f.dx.abs() < 1e-15 && f.dy == 0.0);
        let q = ModelParams::new(0.0, 0.0, 0.3, 1.2, 0.7).unwrap();
        let f = eval_field(&q, PhasePoint::new(0.0, 1.0));
        assert_eq!(f.dx, 0.0);
        assert!((f.dy + (0.3 + 0.7)).abs() < 1e-15);
    }

    #[test]
    fn rotated_examples() {
        let p = params();
        let pt = PhasePoint::new(0.3, 0.7);
        assert_eq!(eval_rotated_field(&p, pt), eval_field(&p, pt));
        let p1 = p.with_gamma(1.0).unwrap();
        let f = eval_field(&p, pt);
        let g = eval_rotated_field(&p1, pt);
        assert_eq!(g.dx, f.dx - f.dy);
        assert_eq!(g.dy, f.dy + f.dx);
        let g0 = eval_rotated_field(&p1.with_gamma(-3.7).unwrap(), PhasePoint::new(0.0, 0.0));
        assert_eq!(g0.norm(), 0.0);
    }

    #[test]
    fn response_examples() {
        let p = ModelParams::new(0.0, 0.0, 1.0, 1.0, 0.0).unwrap();
        assert_eq!(response(&p, 0.0).unwrap(), 0.0);
        assert_eq!(response(&p, 2.0).unwrap(), 2.0);
        let p = ModelParams::new(1.0, 0.0, 1.0, 1.0, 0.0).unwrap();
        assert_eq!(response(&p, 1.0).unwrap(), 0.5);
        // cubic stage: pole at x = -1/β
        let p = ModelParams::new(0.0, 0.5, 1.0, 1.0, 0.0).unwrap();
        assert_eq!(response(&p, -2.0), Err(Error::Pole(-2.0)));
        assert!(ModelParams::new(0.0, -0.5, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn isocline_examples() {
        let p = params();
        assert!(prey_isocline(&p, 1.0 / p.lambda()).abs() < 1e-15);
        assert_eq!(prey_isocline(&p, 0.0), 1.0);
        let q = ModelParams::new(0.0, 0.0, 0.3, 1.7, 0.2).unwrap();
        for x in [-1.0, 0.0, 0.4, 2.0] {
            assert!((prey_isocline(&q, x) - (1.0 - 1.7 * x)).abs() < 1e-15);
        }
    }

    #[test]
    fn jacobian_examples() {
        let p = params();
        let j = eval_jacobian(&p, PhasePoint::new(0.0, 0.0), false);
        assert_eq!((j.pxx, j.pxy, j.qyx, j.qyy), (1.0, 0.0, 0.0, -p.delta()));
        let ev = j.eigenvalues();
        assert_eq!(ev[0].re, -p.delta());
        assert_eq!(ev[1].re, 1.0);

        let q = ModelParams::new(0.0, 0.0, 0.3, 1.25, 0.7).unwrap();
        let ev = eval_jacobian(&q, PhasePoint::new(0.8, 0.0), false).eigenvalues();
        let mut re = [ev[0].re, ev[1].re];
        re.sort_by(f64::total_cmp);
        assert!((re[0] + 1.0).abs() < 1e-14);
        assert!((re[1] - (0.8 - 0.3)).abs() < 1e-14);

        let pt = PhasePoint::new(0.4, 0.9);
        assert_eq!(eval_jacobian(&p, pt, true), eval_jacobian(&p, pt, false));
    }

    #[test]
    fn eigenvalues_solve_characteristic_quadratic() {
        let js = [
            Jacobian2 { pxx: 1.0, pxy: 2.0, qyx: -3.0, qyy: 0.5 },
            Jacobian2 { pxx: 1e8, pxy: 1.0, qyx: 1.0, qyy: 1e-8 },
            Jacobian2 { pxx: -2.0, pxy: 0.0, qyx: 5.0, qyy: -2.0 },
        ];
        for j in js {
            let (tr, det) = (j.trace(), j.determinant());
            for l in j.eigenvalues() {
                let r = l * l - tr * l + det;
                let scale = 1.0 + l.norm_sqr() + tr.abs() * l.norm() + det.abs();
                assert!(r.norm() / scale < 1e-12, "{j:?} {l}");
            }
        }
    }

    #[test]
    fn rotation_examples() {
        let p = params();
        let pt = PhasePoint::new(0.7, 0.0);
        let d = rotation_determinants(&p, pt);
        assert_eq!((d.d_alpha, d.d_beta), (0.0, 0.0));
        assert_eq!(ellipse_residual(&p, PhasePoint::new(0.0, 0.0)), 0.0);
        assert!(ellipse_residual(&p, PhasePoint::new(1.0 / p.lambda(), 0.0)).abs() < 1e-15);
    }
}
