//! Run configuration: parameters from flags and `key = value` files.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use qbl_core::ModelParams;

/// Parameter values as collected from a config file and flags, before
/// validation. Flags win over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamInput {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub delta: Option<f64>,
    pub lambda: Option<f64>,
    pub mu: Option<f64>,
    pub gamma: Option<f64>,
    pub polynomial: Option<bool>,
}

impl ParamInput {
    /// Fields set in `over` replace those in `self`.
    pub fn overlay(self, over: &ParamInput) -> ParamInput {
        ParamInput {
            alpha: over.alpha.or(self.alpha),
            beta: over.beta.or(self.beta),
            delta: over.delta.or(self.delta),
            lambda: over.lambda.or(self.lambda),
            mu: over.mu.or(self.mu),
            gamma: over.gamma.or(self.gamma),
            polynomial: over.polynomial.or(self.polynomial),
        }
    }

    /// α and β default to 0 (the quadratic stage) and γ to 0; δ, λ, μ are
    /// required.
    pub fn build(&self) -> Result<ModelParams> {
        let need = |v: Option<f64>, name: &str| v.ok_or_else(|| anyhow!("missing parameter `{name}`"));
        let (a, b) = (self.alpha.unwrap_or(0.0), self.beta.unwrap_or(0.0));
        let (d, l, m) = (need(self.delta, "delta")?, need(self.lambda, "lambda")?, need(self.mu, "mu")?);
        let p = if self.polynomial.unwrap_or(false) {
            ModelParams::polynomial(a, b, d, l, m)?
        } else {
            ModelParams::new(a, b, d, l, m)?
        };
        Ok(p.with_gamma(self.gamma.unwrap_or(0.0))?)
    }
}

/// Parses `key = value` lines. Blank lines and `#` comments are skipped;
/// unknown keys are kept so commands can read their own settings.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("line {}: expected `key = value`, got `{raw}`", n + 1);
        };
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

pub fn params_from_kv(kv: &BTreeMap<String, String>) -> Result<ParamInput> {
    let num = |k: &str| -> Result<Option<f64>> {
        kv.get(k).map(|v| v.parse::<f64>().with_context(|| format!("`{k}` is not a number: {v}"))).transpose()
    };
    let polynomial = kv
        .get("polynomial")
        .map(|v| v.parse::<bool>().with_context(|| format!("`polynomial` is not a boolean: {v}")))
        .transpose()?;
    Ok(ParamInput {
        alpha: num("alpha")?,
        beta: num("beta")?,
        delta: num("delta")?,
        lambda: num("lambda")?,
        mu: num("mu")?,
        gamma: num("gamma")?,
        polynomial,
    })
}

pub fn read_kv(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_kv(&text)
}

/// Plot window `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub x: (f64, f64),
    pub y: (f64, f64),
}

impl Window {
    pub fn new(x: (f64, f64), y: (f64, f64)) -> Result<Window> {
        let ok = |r: (f64, f64)| r.0.is_finite() && r.1.is_finite() && r.0 < r.1;
        if !ok(x) || !ok(y) {
            bail!("plot window ranges must be finite and nonempty");
        }
        Ok(Window { x, y })
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x.0 && x <= self.x.1 && y >= self.y.0 && y <= self.y.1
    }
}

/// Parses `a,b` into a pair.
pub fn parse_range(s: &str) -> Result<(f64, f64)> {
    let (a, b) = s.split_once(',').ok_or_else(|| anyhow!("expected `a,b`, got `{s}`"))?;
    Ok((a.trim().parse()?, b.trim().parse()?))
}

/// Tolerance overrides must lie in `[1e-14, 1e-2]`.
pub fn check_tolerance(name: &str, v: f64) -> Result<f64> {
    if !(1e-14..=1e-2).contains(&v) {
        bail!("{name} = {v} is outside [1e-14, 1e-2]");
    }
    Ok(v)
}
