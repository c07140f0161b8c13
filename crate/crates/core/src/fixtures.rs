//! Frozen parameter regimes shared by the tests and the `scenario` command.

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::scenario::ScenarioConfig;

pub const REGIMES_TOML: &str = include_str!("../fixtures/regimes.toml");

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct Regimes {
    pub hopf_branch: HopfBranch,
    pub fold: FoldRegime,
    pub two_cycle: TwoCycle,
    pub scenario: ScenarioConfig,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct HopfBranch {
    pub params: ModelParams,
    /// Index into the first-quadrant points of the census.
    pub antisaddle: usize,
    pub direction: [f64; 2],
    pub section_length: f64,
    pub gamma_start: f64,
    pub gamma_bound: f64,
    pub loop_range: (f64, f64),
    pub loop_samples: usize,
    pub period_cap: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct FoldRegime {
    pub params: ModelParams,
    pub antisaddle: usize,
    pub direction: [f64; 2],
    pub section_length: f64,
    pub grid: usize,
    pub gamma_start: f64,
    pub gamma_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct TwoCycle {
    pub params: ModelParams,
    pub gamma: f64,
    pub antisaddle: usize,
    pub direction: [f64; 2],
    pub section_length: f64,
    pub grid: usize,
}

pub fn regimes() -> Result<Regimes> {
    parse_regimes(REGIMES_TOML)
}

/// Reads a fixtures file in the layout of the built-in one.
pub fn parse_regimes(text: &str) -> Result<Regimes> {
    toml::from_str(text).map_err(|e| Error::Config(format!("fixtures: {e}")))
}
