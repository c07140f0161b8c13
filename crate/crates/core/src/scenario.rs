//! Staged sweep from the quadratic base to the rotated quartic family,
//! with a cycle census at every sample.
//!
//! The sweep doubles as a falsification harness for the two-cycle bound:
//! a sample with more than two cycles, or more than two cycles around one
//! antisaddle, aborts the run with that sample serialized.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bifurcation::{hopf_detect, homoclinic_scan, refine_cycle, BifurcationEvent, EventKind};
use crate::dynamics::{
    cycle_roots, cycle_stability, first_return, point_in_polygon, section_crossing, CycleSearch, LimitCycle, Return,
    ReturnOptions, Section,
};
use crate::equilibria::{full_census, Census, Equilibrium};
use crate::error::{Error, Result};
use crate::model::{ModelParams, Parameter, PhasePoint};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub delta: f64,
    pub lambda: f64,
    pub mu: f64,
    /// Stage (ii): β sweep of the cubic system.
    pub cubic_beta: (f64, f64),
    pub cubic_samples: usize,
    /// Stage (iii): α sweep of the quartic system at fixed β.
    pub quartic_beta: f64,
    pub quartic_alpha: (f64, f64),
    pub quartic_samples: usize,
    /// Stage (iv): α × γ grid of the rotated system at β = `quartic_beta`.
    pub rotated_alpha: (f64, f64),
    pub rotated_alpha_samples: usize,
    pub gamma: (f64, f64),
    pub gamma_samples: usize,
    /// α at which Hopf and loop events are located.
    pub event_alpha: f64,
    #[serde(default = "default_section")]
    pub section_length: f64,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default = "default_t_limit")]
    pub t_limit: f64,
}

fn default_section() -> f64 {
    3.0
}
fn default_grid() -> usize {
    32
}
fn default_t_limit() -> f64 {
    400.0
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let ranges = [self.cubic_beta, self.quartic_alpha, self.rotated_alpha, self.gamma];
        if ranges.iter().any(|r| !(r.0.is_finite() && r.1.is_finite()) || r.0 == r.1) {
            return Err(Error::Config("sweep ranges must be finite and nonempty".into()));
        }
        let counts = [self.cubic_samples, self.quartic_samples, self.rotated_alpha_samples, self.gamma_samples];
        if counts.iter().any(|&n| n < 2) {
            return Err(Error::Config("every sweep needs at least 2 samples".into()));
        }
        if !(self.section_length > 0.0) || self.grid < 3 || !(self.t_limit > 0.0) {
            return Err(Error::Config("section length, grid and time limit must be positive".into()));
        }
        Ok(())
    }

    /// Samples in the full sweep.
    pub fn sample_count(&self) -> usize {
        1 + self.cubic_samples + self.quartic_samples + self.rotated_alpha_samples * self.gamma_samples
    }

    fn search(&self) -> CycleSearch {
        CycleSearch {
            grid: self.grid,
            returns: ReturnOptions { t_limit: self.t_limit, ..Default::default() },
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioStage {
    Quadratic,
    Cubic,
    Quartic,
    Rotated,
}

/// One closed orbit seen during a cycle count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleSummary {
    /// Index of the antisaddle whose section found it.
    pub anchor: usize,
    pub s_star: f64,
    pub period: f64,
    /// Indices (into the antisaddle list) of the enclosed antisaddles.
    pub encloses: Vec<usize>,
    pub encloses_saddle: bool,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleCount {
    pub antisaddles: Vec<PhasePoint>,
    pub cycles: Vec<CycleSummary>,
}

impl CycleCount {
    pub fn total(&self) -> usize {
        self.cycles.len()
    }

    /// Largest number of cycles around a single antisaddle.
    pub fn max_concentric(&self) -> usize {
        (0..self.antisaddles.len())
            .map(|i| self.cycles.iter().filter(|c| c.encloses.contains(&i)).count())
            .max()
            .unwrap_or(0)
    }
}

/// A fixed point found on one antisaddle's section and not seen from an
/// earlier section.
struct Hit {
    anchor: usize,
    section: Section,
    s: f64,
    ret: Return,
}

/// Each finite antisaddle gets a section pointing away from its nearest
/// saddle; orbits found from two sections are merged.
fn distinct_hits(p: &ModelParams, census: &Census, rotated: bool, section_length: f64, cfg: &CycleSearch) -> Vec<Hit> {
    let anti: Vec<PhasePoint> = census.antisaddles().map(|e| e.location).collect();
    let saddles: Vec<PhasePoint> = census.saddles().map(|e| e.location).collect();
    let mut hits: Vec<Hit> = Vec::new();
    for (i, &a) in anti.iter().enumerate() {
        let dir = match saddles.iter().min_by(|u, v| u.dist(&a).total_cmp(&v.dist(&a))) {
            Some(s) if s.dist(&a) > 0.0 => [a.x - s.x, a.y - s.y],
            _ => [-1.0, 0.0],
        };
        let Ok(sec) = Section::at_focus(p, a, dir, section_length, rotated) else { continue };
        for s in cycle_roots(p, &sec, rotated, cfg) {
            let Ok(r) = first_return(p, &sec, s, rotated, &cfg.returns, true) else { continue };
            let start = sec.point(s);
            // the same orbit seen from an earlier section crosses it at that
            // section's fixed point
            let ro = ReturnOptions { t_limit: 1.5 * r.time, ..cfg.returns };
            let seen = hits.iter().any(|h| {
                h.anchor != i
                    && section_crossing(p, &h.section, start, rotated, &ro, false)
                        .is_ok_and(|x| (x.s - h.s).abs() <= 1e-5 * (1.0 + h.s))
            });
            if !seen {
                hits.push(Hit { anchor: i, section: sec, s, ret: r });
            }
        }
    }
    hits
}

/// Counts distinct limit cycles around the finite antisaddles.
pub fn count_cycles(p: &ModelParams, census: &Census, rotated: bool, section_length: f64, cfg: &CycleSearch) -> CycleCount {
    let anti: Vec<PhasePoint> = census.antisaddles().map(|e| e.location).collect();
    let saddles: Vec<PhasePoint> = census.saddles().map(|e| e.location).collect();
    let cycles = distinct_hits(p, census, rotated, section_length, cfg)
        .into_iter()
        .map(|h| {
            let path = &h.ret.path;
            let encloses = anti.iter().enumerate().filter(|(_, &q)| point_in_polygon(path, q)).map(|(j, _)| j).collect();
            let encloses_saddle = saddles.iter().any(|&q| point_in_polygon(path, q));
            let (lo, hi) = path.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), q| (lo.min(q.x), hi.max(q.x)));
            CycleSummary { anchor: h.anchor, s_star: h.s, period: h.ret.time, encloses, encloses_saddle, amplitude: hi - lo }
        })
        .collect();
    CycleCount { antisaddles: anti, cycles }
}

/// A cycle found by the scan that did not survive refinement.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleFailure {
    /// Index of the antisaddle whose section found it.
    pub anchor: usize,
    pub s: f64,
    pub error: Error,
}

impl std::fmt::Display for CycleFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "cycle at s = {} on the section of antisaddle {}: {}", self.s, self.anchor, self.error)
    }
}

/// Distinct limit cycles with their stability verified two ways. Cycles
/// that fail refinement, or whose two stability estimates disagree, are
/// returned separately.
pub fn limit_cycles(
    p: &ModelParams,
    census: &Census,
    rotated: bool,
    section_length: f64,
    cfg: &CycleSearch,
) -> (Vec<LimitCycle>, Vec<CycleFailure>) {
    let mut out = Vec::new();
    let mut failed = Vec::new();
    for h in distinct_hits(p, census, rotated, section_length, cfg) {
        let c = refine_cycle(p, &h.section, h.s, rotated, &cfg.returns).and_then(|c| cycle_stability(p, &c, rotated));
        match c {
            Ok(c) => out.push(c),
            Err(error) => failed.push(CycleFailure { anchor: h.anchor, s: h.s, error }),
        }
    }
    (out, failed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub stage: ScenarioStage,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub cycles: usize,
    pub max_concentric: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub detail: Vec<CycleSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioLog {
    pub config: ScenarioConfig,
    pub samples: Vec<SampleRecord>,
    pub events: Vec<BifurcationEvent>,
    pub max_cycles: usize,
    pub max_concentric: usize,
    pub notes: Vec<String>,
}

impl ScenarioLog {
    pub fn stage_max(&self, stage: ScenarioStage) -> usize {
        self.samples.iter().filter(|s| s.stage == stage).map(|s| s.cycles).max().unwrap_or(0)
    }
}

/// Serialized sample that broke the two-cycle bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Breach {
    pub params: ModelParams,
    pub sample: SampleRecord,
}

fn linspace(r: (f64, f64), n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |k| r.0 + (r.1 - r.0) * k as f64 / (n - 1) as f64)
}

struct Runner<'a> {
    cfg: &'a ScenarioConfig,
    search: CycleSearch,
    samples: Vec<SampleRecord>,
    notes: Vec<String>,
}

impl Runner<'_> {
    fn sample(&mut self, stage: ScenarioStage, p: &ModelParams, census: &Census, rotated: bool) -> Result<()> {
        let count = count_cycles(p, census, rotated, self.cfg.section_length, &self.search);
        let rec = SampleRecord {
            stage,
            alpha: p.alpha(),
            beta: p.beta(),
            gamma: p.gamma(),
            cycles: count.total(),
            max_concentric: count.max_concentric(),
            detail: count.cycles,
            error: None,
        };
        if rec.cycles > 2 || rec.max_concentric > 2 {
            let breach = Breach { params: *p, sample: rec };
            let json = serde_json::to_string(&breach).unwrap_or_else(|e| e.to_string());
            return Err(Error::Assertion(format!("more than two limit cycles: {json}")));
        }
        self.samples.push(rec);
        Ok(())
    }

    fn failed(&mut self, stage: ScenarioStage, p: &ModelParams, e: &Error) {
        self.samples.push(SampleRecord {
            stage,
            alpha: p.alpha(),
            beta: p.beta(),
            gamma: p.gamma(),
            cycles: 0,
            max_concentric: 0,
            detail: Vec::new(),
            error: Some(e.to_string()),
        });
    }
}

/// Replays the four stages and returns the event log. Fails only on a
/// configuration error or a breach of the two-cycle bound.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioLog> {
    cfg.validate()?;
    let (d, l, m) = (cfg.delta, cfg.lambda, cfg.mu);
    let mut run = Runner { cfg, search: cfg.search(), samples: Vec::new(), notes: Vec::new() };

    // (i) quadratic base
    let base = ModelParams::new(0.0, 0.0, d, l, m)?;
    let census = full_census(&base)?;
    run.sample(ScenarioStage::Quadratic, &base, &census, false)?;

    // (ii) cubic, β < 0; poles of the response are admitted here
    for b in linspace(cfg.cubic_beta, cfg.cubic_samples) {
        let p = ModelParams::polynomial(0.0, b, d, l, m)?;
        match full_census(&p) {
            Ok(c) => run.sample(ScenarioStage::Cubic, &p, &c, false)?,
            Err(e) => run.failed(ScenarioStage::Cubic, &p, &e),
        }
    }

    // (iii) quartic, α > 0
    for a in linspace(cfg.quartic_alpha, cfg.quartic_samples) {
        let p = ModelParams::polynomial(a, cfg.quartic_beta, d, l, m)?;
        match full_census(&p) {
            Ok(c) => run.sample(ScenarioStage::Quartic, &p, &c, false)?,
            Err(e) => run.failed(ScenarioStage::Quartic, &p, &e),
        }
    }

    // (iv) rotated family; equilibria do not move with γ. Rows in α are
    // independent and run in parallel.
    let alphas: Vec<f64> = linspace(cfg.rotated_alpha, cfg.rotated_alpha_samples).collect();
    let rows: Vec<Result<Vec<SampleRecord>>> = alphas
        .par_iter()
        .map(|&a| {
            let p0 = ModelParams::polynomial(a, cfg.quartic_beta, d, l, m)?;
            let mut row = Runner { cfg, search: cfg.search(), samples: Vec::new(), notes: Vec::new() };
            match full_census(&p0) {
                Ok(census) => {
                    for g in linspace(cfg.gamma, cfg.gamma_samples) {
                        row.sample(ScenarioStage::Rotated, &p0.with_gamma(g)?, &census, true)?;
                    }
                }
                Err(e) => row.failed(ScenarioStage::Rotated, &p0, &e),
            }
            Ok(row.samples)
        })
        .collect();
    for row in rows {
        run.samples.extend(row?);
    }

    let events = stage_events(cfg, &mut run.notes)?;
    let Runner { samples, mut notes, .. } = run;
    for stage in [ScenarioStage::Cubic, ScenarioStage::Quartic] {
        let big = samples
            .iter()
            .filter(|s| s.stage == stage)
            .flat_map(|s| s.detail.iter())
            .any(|c| c.s_star > 0.5 * cfg.section_length);
        if !big {
            notes.push(format!("{stage:?} stage: no cycle reaching the outer half of the section"));
        }
    }
    let max_cycles = samples.iter().map(|s| s.cycles).max().unwrap_or(0);
    let max_concentric = samples.iter().map(|s| s.max_concentric).max().unwrap_or(0);
    Ok(ScenarioLog { config: cfg.clone(), samples, events, max_cycles, max_concentric, notes })
}

/// Hopf points at every antisaddle and separatrix loops of every
/// first-quadrant saddle in γ at `event_alpha`.
fn stage_events(cfg: &ScenarioConfig, notes: &mut Vec<String>) -> Result<Vec<BifurcationEvent>> {
    let p = ModelParams::polynomial(cfg.event_alpha, cfg.quartic_beta, cfg.delta, cfg.lambda, cfg.mu)?;
    let census = full_census(&p)?;
    let mut events = Vec::new();
    let anti: Vec<&Equilibrium> = census.antisaddles().collect();
    for e in &anti {
        match hopf_detect(&p, e, Parameter::Gamma, cfg.gamma) {
            Ok(v) => events.extend(v),
            Err(err) => notes.push(format!("hopf scan at ({}, {}): {err}", e.location.x, e.location.y)),
        }
    }
    let antis: Vec<PhasePoint> = census.first_quadrant().iter().filter(|e| e.kind.is_antisaddle()).map(|e| e.location).collect();
    for s in census.first_quadrant().into_iter().filter(|e| e.kind.is_saddle()) {
        match homoclinic_scan(&p, s, &antis, Parameter::Gamma, cfg.gamma, 121, true) {
            Ok(v) => events.extend(v),
            Err(err) => notes.push(format!("loop scan at ({}, {}): {err}", s.location.x, s.location.y)),
        }
    }
    // the loops form in order of increasing rotation away from γ = 0
    let mut smalls: Vec<&BifurcationEvent> = events.iter().filter(|e| e.kind == EventKind::HomoclinicSmallLoop).collect();
    smalls.sort_by(|a, b| a.value.abs().total_cmp(&b.value.abs()));
    if smalls.len() >= 2 {
        notes.push(format!("first small loop forms around {}", smalls[0].subject));
    }
    events.sort_by(|a, b| a.value.total_cmp(&b.value));
    Ok(events)
}
