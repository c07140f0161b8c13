//! Dense univariate polynomials with real coefficients and companion-matrix
//! root finding.

use nalgebra::DMatrix;
use num_complex::Complex64;
use std::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};

/// Coefficients in ascending order: `c[0] + c[1] x + ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    c: Vec<f64>,
}

impl Poly {
    pub fn new(mut c: Vec<f64>) -> Self {
        while c.len() > 1 && *c.last().unwrap() == 0.0 {
            c.pop();
        }
        if c.is_empty() {
            c.push(0.0);
        }
        Poly { c }
    }

    pub fn constant(v: f64) -> Self {
        Poly::new(vec![v])
    }

    /// `a + b x`
    pub fn linear(a: f64, b: f64) -> Self {
        Poly::new(vec![a, b])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.c
    }

    pub fn degree(&self) -> usize {
        self.c.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.c.iter().all(|&v| v == 0.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.c.iter().rev().fold(0.0, |acc, &v| acc * x + v)
    }

    /// Sum of |c_k x^k|, the natural scale for the rounding error of `eval`.
    pub fn eval_abs(&self, x: f64) -> f64 {
        let ax = x.abs();
        self.c.iter().rev().fold(0.0, |acc, &v| acc * ax + v.abs())
    }

    pub fn derivative(&self) -> Poly {
        if self.c.len() <= 1 {
            return Poly::constant(0.0);
        }
        Poly::new(self.c.iter().enumerate().skip(1).map(|(k, &v)| k as f64 * v).collect())
    }

    /// Multiplicity of the root x = 0 (number of vanishing low-order coefficients).
    pub fn zero_root_multiplicity(&self) -> usize {
        if self.is_zero() {
            return 0;
        }
        self.c.iter().take_while(|&&v| v == 0.0).count()
    }

    /// Divides out `x^k`.
    pub fn shift_down(&self, k: usize) -> Poly {
        Poly::new(self.c.iter().skip(k).copied().collect())
    }

    /// Substitutes `x = s·ξ`, returning the polynomial in ξ.
    pub fn rescaled(&self, s: f64) -> Poly {
        let mut pow = 1.0;
        Poly::new(
            self.c
                .iter()
                .map(|&v| {
                    let r = v * pow;
                    pow *= s;
                    r
                })
                .collect(),
        )
    }

    /// Fujiwara-type bound on root magnitudes, used as the default internal
    /// normalization of the root finder.
    pub fn root_scale(&self) -> f64 {
        let n = self.degree();
        if n == 0 {
            return 1.0;
        }
        let lead = self.c[n];
        let s = (0..n)
            .filter(|&k| self.c[k] != 0.0)
            .map(|k| (self.c[k] / lead).abs().powf(1.0 / (n - k) as f64))
            .fold(0.0, f64::max);
        if s > 0.0 && s.is_finite() {
            s
        } else {
            1.0
        }
    }

    /// All complex roots via the eigenvalues of the companion matrix of the
    /// polynomial rescaled by `scale`.
    pub fn complex_roots_scaled(&self, scale: f64) -> Result<Vec<Complex64>> {
        if self.is_zero() {
            return Err(Error::RootFinding("zero polynomial".into()));
        }
        let z = self.zero_root_multiplicity();
        let q = self.shift_down(z).rescaled(scale);
        let n = q.degree();
        let mut roots = vec![Complex64::new(0.0, 0.0); z];
        if n == 0 {
            return Ok(roots);
        }
        let lead = q.c[n];
        let mut m = DMatrix::<f64>::zeros(n, n);
        for i in 1..n {
            m[(i, i - 1)] = 1.0;
        }
        for i in 0..n {
            m[(i, n - 1)] = -q.c[i] / lead;
        }
        let schur = nalgebra::linalg::Schur::try_new(m, f64::EPSILON, 10_000)
            .ok_or_else(|| Error::RootFinding(format!("QR iteration did not converge (degree {n})")))?;
        roots.extend(schur.complex_eigenvalues().iter().map(|r| r * scale));
        Ok(roots)
    }

    pub fn complex_roots(&self) -> Result<Vec<Complex64>> {
        let z = self.zero_root_multiplicity();
        let s = self.shift_down(z).root_scale();
        self.complex_roots_scaled(s)
    }

    /// Distinct real roots, Newton-polished, sorted ascending.
    pub fn real_roots(&self) -> Result<Vec<f64>> {
        let z = self.zero_root_multiplicity();
        let s = self.shift_down(z).root_scale();
        self.real_roots_scaled(s)
    }

    pub fn real_roots_scaled(&self, scale: f64) -> Result<Vec<f64>> {
        let roots = self.complex_roots_scaled(scale)?;
        let dp = self.derivative();
        let mut out: Vec<f64> = Vec::new();
        for r in roots {
            if r.im.abs() > 1e-6 * (1.0 + r.re.abs()) {
                continue;
            }
            let mut x = r.re;
            for _ in 0..60 {
                let v = self.eval(x);
                let d = dp.eval(x);
                if v == 0.0 || d == 0.0 {
                    break;
                }
                let step = v / d;
                let xn = x - step;
                if !xn.is_finite() || (xn - r.re).abs() > 1e-3 * (1.0 + r.re.abs()) {
                    break;
                }
                x = xn;
                if step.abs() <= 4.0 * f64::EPSILON * (1.0 + x.abs()) {
                    break;
                }
            }
            if self.eval(x).abs() > 1e-8 * self.eval_abs(x).max(f64::MIN_POSITIVE) {
                continue;
            }
            if !out.iter().any(|&o| (o - x).abs() <= 1e-10 * (1.0 + x.abs())) {
                out.push(x);
            }
        }
        out.sort_by(f64::total_cmp);
        Ok(out)
    }

    /// Real roots with multiplicities, clustering companion eigenvalues that
    /// agree to `cluster_tol` relative distance.
    pub fn real_roots_with_multiplicity(&self, cluster_tol: f64) -> Result<Vec<(f64, usize)>> {
        let z = self.zero_root_multiplicity();
        let mut out: Vec<(f64, usize)> = Vec::new();
        if z > 0 {
            out.push((0.0, z));
        }
        let rest = self.shift_down(z);
        if rest.degree() == 0 {
            return Ok(out);
        }
        let roots = rest.complex_roots()?;
        let mut used = vec![false; roots.len()];
        for i in 0..roots.len() {
            if used[i] {
                continue;
            }
            used[i] = true;
            let mut members = vec![roots[i]];
            for j in i + 1..roots.len() {
                if !used[j] && (roots[j] - roots[i]).norm() <= cluster_tol * (1.0 + roots[i].norm())
                {
                    used[j] = true;
                    members.push(roots[j]);
                }
            }
            let mean: Complex64 = members.iter().sum::<Complex64>() / members.len() as f64;
            if mean.im.abs() <= cluster_tol * (1.0 + mean.re.abs()) {
                out.push((mean.re, members.len()));
            }
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(out)
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, o: &Poly) -> Poly {
        let n = self.c.len().max(o.c.len());
        Poly::new(
            (0..n)
                .map(|i| self.c.get(i).copied().unwrap_or(0.0) + o.c.get(i).copied().unwrap_or(0.0))
                .collect(),
        )
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, o: &Poly) -> Poly {
        let n = self.c.len().max(o.c.len());
        Poly::new(
            (0..n)
                .map(|i| self.c.get(i).copied().unwrap_or(0.0) - o.c.get(i).copied().unwrap_or(0.0))
                .collect(),
        )
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, o: &Poly) -> Poly {
        let mut c = vec![0.0; self.c.len() + o.c.len() - 1];
        for (i, a) in self.c.iter().enumerate() {
            for (j, b) in o.c.iter().enumerate() {
                c[i + j] += a * b;
            }
        }
        Poly::new(c)
    }
}

impl Mul<f64> for &Poly {
    type Output = Poly;
    fn mul(self, s: f64) -> Poly {
        Poly::new(self.c.iter().map(|v| v * s).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn from_roots(rs: &[f64]) -> Poly {
        rs.iter().fold(Poly::constant(1.0), |acc, &r| &acc * &Poly::linear(-r, 1.0))
    }

    #[test]
    fn finds_simple_real_roots() {
        let p = from_roots(&[-1.5, 0.25, 2.0, 7.0]);
        let r = p.real_roots().unwrap();
        assert_eq!(r.len(), 4);
        for (a, b) in r.iter().zip([-1.5, 0.25, 2.0, 7.0]) {
            assert!((a - b).abs() < 1e-12, "{a} {b}");
        }
    }

    #[test]
    fn skips_complex_pairs() {
        // (x² + 1)(x - 3)
        let p = &Poly::new(vec![1.0, 0.0, 1.0]) * &Poly::linear(-3.0, 1.0);
        let r = p.real_roots().unwrap();
        assert_eq!(r.len(), 1);
        assert!((r[0] - 3.0).abs() < 1e-13);
    }

    #[test]
    fn multiplicities() {
        // λv⁴ - μv³ with λ = 2, μ = 1
        let p = Poly::new(vec![0.0, 0.0, 0.0, -1.0, 2.0]);
        let r = p.real_roots_with_multiplicity(1e-6).unwrap();
        assert_eq!(r, vec![(0.0, 3), (0.5, 1)]);
        let dbl = from_roots(&[1.0, 1.0, -2.0]);
        let r = dbl.real_roots_with_multiplicity(1e-6).unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(r[1].1, 2);
        assert!((r[1].0 - 1.0).abs() < 1e-7);
    }

    #[test]
    fn scaling_does_not_change_roots() {
        let p = from_roots(&[1e-3, 0.5, 40.0]);
        let a = p.real_roots_scaled(1.0).unwrap();
        let b = p.real_roots_scaled(37.0).unwrap();
        assert_eq!(a.len(), 3);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_polynomial_is_an_error() {
        assert!(Poly::new(vec![0.0, 0.0]).complex_roots().is_err());
    }
}
