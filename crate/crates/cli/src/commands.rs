//! Command definitions and dispatch.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::{rngs::StdRng, Rng, SeedableRng};
use serde::Serialize;

use qbl_core::bifurcation::{continue_cycle, hopf_detect, BifurcationEvent, StepPolicy};
use qbl_core::dynamics::{CycleSearch, LimitCycle, ReturnOptions};
use qbl_core::equilibria::{full_census, verify_configuration, Census, ConfigurationReport, Verdict};
use qbl_core::fixtures::{parse_regimes, REGIMES_TOML};
use qbl_core::integrate::IntegratorOptions;
use qbl_core::scenario::{limit_cycles, run_scenario, CycleFailure};
use qbl_core::{Error, ModelParams, Parameter, PhasePoint};

use crate::config::{check_tolerance, params_from_kv, parse_range, read_kv, ParamInput, Window};
use crate::portrait::{default_window, render_portrait};
use crate::report::{branch_csv, census_document, cycles_csv, emit_census, Format, SCHEMA_VERSION};

/// How a command finished when it did not error out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Passed,
    VerificationFailed,
    NumericalFailure,
}

impl Outcome {
    pub fn code(self) -> i32 {
        match self {
            Outcome::Passed => 0,
            Outcome::VerificationFailed => 2,
            Outcome::NumericalFailure => 3,
        }
    }
}

/// Exit code for an error that aborted a command.
pub fn error_code(e: &anyhow::Error) -> i32 {
    match e.downcast_ref::<Error>() {
        Some(Error::InvalidParams(_) | Error::Config(_) | Error::Io(_)) | None => 1,
        Some(Error::Assertion(_) | Error::InconsistentStability { .. }) => 2,
        Some(_) => 3,
    }
}

#[derive(Debug, Parser)]
#[command(name = "qbl", version, about = "Equilibria, cycles and bifurcations of a predator-prey model with a non-monotonic response")]
pub struct Cli {
    #[command(flatten)]
    pub params: ParamArgs,
    /// File of `key = value` lines; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Write the main document here instead of stdout.
    #[arg(long, short, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default)]
pub struct ParamArgs {
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub delta: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub lambda: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub mu: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub gamma: Option<f64>,
    /// Accept any real beta (the response may then have poles).
    #[arg(long, global = true)]
    pub polynomial: bool,
}

#[derive(Debug, Args, Clone)]
pub struct SearchArgs {
    /// Length of the section laid out from each antisaddle.
    #[arg(long, default_value_t = 3.0)]
    pub section_length: f64,
    /// Grid points of the displacement scan.
    #[arg(long, default_value_t = 32)]
    pub grid: usize,
    /// Time allowed for one return.
    #[arg(long, default_value_t = 400.0)]
    pub t_limit: f64,
    #[arg(long)]
    pub rtol: Option<f64>,
    #[arg(long)]
    pub atol: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Finite and infinite singular points with the index identity verdict.
    Equilibria {
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Singular points at infinity.
    Infinity,
    /// SVG phase portrait.
    Portrait {
        /// x range as `a,b`.
        #[arg(long, allow_hyphen_values = true)]
        x_range: Option<String>,
        /// y range as `a,b`.
        #[arg(long, allow_hyphen_values = true)]
        y_range: Option<String>,
        /// Skip the limit cycle search.
        #[arg(long)]
        no_cycles: bool,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Limit cycles around the finite antisaddles.
    Cycles {
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Hopf points of every finite antisaddle along a parameter.
    Hopf {
        #[arg(long, default_value = "gamma")]
        param: String,
        /// Scan range as `a,b`.
        #[arg(long, allow_hyphen_values = true)]
        range: String,
    },
    /// Continue one limit cycle in a parameter.
    Continue {
        #[arg(long, default_value = "gamma")]
        param: String,
        /// Parameter value at which to stop.
        #[arg(long, allow_hyphen_values = true)]
        bound: f64,
        /// Which of the cycles found at the start to follow.
        #[arg(long, default_value_t = 0)]
        cycle: usize,
        #[arg(long)]
        period_cap: Option<f64>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Replay the staged scenario from a fixtures file.
    Scenario {
        /// Fixtures file; the built-in regimes when absent.
        #[arg(long)]
        fixtures: Option<PathBuf>,
        #[arg(long)]
        cubic_samples: Option<usize>,
        #[arg(long)]
        quartic_samples: Option<usize>,
        #[arg(long)]
        alpha_samples: Option<usize>,
        #[arg(long)]
        gamma_samples: Option<usize>,
    },
    /// Run the internal checks on the census and report pass/fail.
    Verify,
    /// Cycle counts and events along a parameter.
    Sweep {
        #[arg(long, default_value = "gamma")]
        param: String,
        #[arg(long, allow_hyphen_values = true)]
        range: String,
        #[arg(long, default_value_t = 21)]
        samples: usize,
        /// Also write the per-sample cycle table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        search: SearchArgs,
    },
}

impl SearchArgs {
    fn build(&self) -> Result<(f64, CycleSearch)> {
        if !(self.section_length > 0.0) || self.grid < 3 || !(self.t_limit > 0.0) {
            bail!(Error::Config("section length, grid and time limit must be positive (grid at least 3)".into()));
        }
        let mut integrator = IntegratorOptions::default();
        if let Some(r) = self.rtol {
            integrator.rtol = check_tolerance("rtol", r)?;
        }
        if let Some(a) = self.atol {
            integrator.atol = check_tolerance("atol", a)?;
        }
        let returns = ReturnOptions { integrator, t_limit: self.t_limit, ..Default::default() };
        Ok((self.section_length, CycleSearch { grid: self.grid, returns, ..Default::default() }))
    }
}

fn parameter(s: &str) -> Result<Parameter> {
    Ok(s.parse::<Parameter>()?)
}

fn params(cli: &Cli) -> Result<ModelParams> {
    let file = match &cli.config {
        Some(path) => params_from_kv(&read_kv(path)?)?,
        None => ParamInput::default(),
    };
    let a = &cli.params;
    let flags = ParamInput {
        alpha: a.alpha,
        beta: a.beta,
        delta: a.delta,
        lambda: a.lambda,
        mu: a.mu,
        gamma: a.gamma,
        polynomial: a.polynomial.then_some(true),
    };
    file.overlay(&flags).build().map_err(|e| match e.downcast::<Error>() {
        Ok(e) => anyhow::Error::new(e),
        Err(e) => anyhow::Error::new(Error::Config(e.to_string())),
    })
}

fn write_out(cli: &Cli, text: &str) -> Result<()> {
    match &cli.out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
            .map_err(|e| anyhow::Error::new(Error::Io(format!("{e:#}")))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn residual_ok(c: &LimitCycle, cfg: &CycleSearch) -> bool {
    c.residual.abs() <= cfg.residual_fraction * c.section.length
}

fn failure_outcome(failures: &[CycleFailure]) -> Outcome {
    if failures.iter().any(|f| matches!(f.error, Error::InconsistentStability { .. })) {
        Outcome::VerificationFailed
    } else if failures.is_empty() {
        Outcome::Passed
    } else {
        Outcome::NumericalFailure
    }
}

fn worst(a: Outcome, b: Outcome) -> Outcome {
    let rank = |o| match o {
        Outcome::Passed => 0,
        Outcome::NumericalFailure => 1,
        Outcome::VerificationFailed => 2,
    };
    if rank(b) > rank(a) {
        b
    } else {
        a
    }
}

#[derive(Serialize)]
struct CyclesDocument<'a> {
    schema_version: u32,
    params: ModelParams,
    cycles: &'a [LimitCycle],
    failures: Vec<String>,
}

#[derive(Serialize)]
struct EventsDocument<'a> {
    schema_version: u32,
    params: ModelParams,
    events: &'a [BifurcationEvent],
}

#[derive(Serialize)]
struct PointCheck {
    x: f64,
    y: f64,
    residual: f64,
    class_index: i32,
    contour_index: Option<i32>,
    pass: bool,
}

#[derive(Serialize)]
struct VerifyDocument {
    schema_version: u32,
    params: ModelParams,
    configuration: ConfigurationReport,
    points: Vec<PointCheck>,
    passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSample {
    pub value: f64,
    pub cycles: usize,
    pub max_concentric: usize,
    pub index_identity: Verdict,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub schema_version: u32,
    pub params: ModelParams,
    pub parameter: Parameter,
    pub range: (f64, f64),
    pub seed: Option<u64>,
    pub samples: Vec<SweepSample>,
    pub events: Vec<BifurcationEvent>,
    pub max_cycles: usize,
    pub verification_failures: usize,
}

/// Parses and runs; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(o) => o.code(),
        Err(e) => {
            eprintln!("error: {e:#}");
            error_code(&e)
        }
    }
}

pub fn execute(cli: &Cli) -> Result<Outcome> {
    // the scenario carries its own parameters
    if let Command::Scenario { fixtures, cubic_samples, quartic_samples, alpha_samples, gamma_samples } = &cli.command {
        return scenario(cli, fixtures.as_ref(), [*cubic_samples, *quartic_samples, *alpha_samples, *gamma_samples]);
    }
    let p = params(cli)?;
    match &cli.command {
        Command::Equilibria { format } => {
            let c = full_census(&p)?;
            let doc = census_document(&c);
            write_out(cli, &emit_census(&c, *format)?)?;
            Ok(if doc.configuration.index_identity.is_fail() { Outcome::VerificationFailed } else { Outcome::Passed })
        }
        Command::Infinity => {
            let c = full_census(&p)?;
            let doc = census_document(&c);
            write_out(cli, &to_json(&doc.census.infinite)?)?;
            Ok(Outcome::Passed)
        }
        Command::Portrait { x_range, y_range, no_cycles, search } => {
            let c = full_census(&p)?;
            let d = default_window(&p, &c);
            let w = Window::new(
                x_range.as_deref().map(parse_range).transpose()?.unwrap_or(d.x),
                y_range.as_deref().map(parse_range).transpose()?.unwrap_or(d.y),
            )
            .map_err(|e| Error::Config(e.to_string()))?;
            let (cycles, outcome) = if *no_cycles {
                (Vec::new(), Outcome::Passed)
            } else {
                let (len, cfg) = search.build()?;
                let (cycles, failed) = limit_cycles(&p, &c, true, len, &cfg);
                for f in &failed {
                    eprintln!("warning: {f}");
                }
                (cycles, failure_outcome(&failed))
            };
            write_out(cli, &render_portrait(&p, &c, &cycles, w, true))?;
            Ok(outcome)
        }
        Command::Cycles { format, search } => {
            let c = full_census(&p)?;
            let (len, cfg) = search.build()?;
            let (cycles, failed) = limit_cycles(&p, &c, true, len, &cfg);
            let text = match format {
                Format::Json => to_json(&CyclesDocument {
                    schema_version: SCHEMA_VERSION,
                    params: p,
                    cycles: &cycles,
                    failures: failed.iter().map(|f| f.to_string()).collect(),
                })?,
                Format::Csv => cycles_csv(cycles.iter().map(|c| (p.gamma(), c)))?,
            };
            write_out(cli, &text)?;
            let mut o = failure_outcome(&failed);
            if cycles.iter().any(|c| !residual_ok(c, &cfg)) {
                o = Outcome::VerificationFailed;
            }
            Ok(o)
        }
        Command::Hopf { param, range } => {
            let param = parameter(param)?;
            let range = parse_range(range).map_err(|e| Error::Config(e.to_string()))?;
            let c = full_census(&p)?;
            let mut events = Vec::new();
            for e in c.antisaddles() {
                events.extend(hopf_detect(&p, e, param, range)?);
            }
            write_out(cli, &to_json(&EventsDocument { schema_version: SCHEMA_VERSION, params: p, events: &events })?)?;
            // the scanned zero must agree with the closed form
            let agree = events.iter().all(|e| e.diagnostics.get("closed_form").is_none_or(|g| (g - e.value).abs() <= 1e-8));
            Ok(if agree { Outcome::Passed } else { Outcome::VerificationFailed })
        }
        Command::Continue { param, bound, cycle, period_cap, format, search } => {
            let param = parameter(param)?;
            let c = full_census(&p)?;
            let (len, cfg) = search.build()?;
            let (cycles, _) = limit_cycles(&p, &c, true, len, &cfg);
            let Some(start) = cycles.get(*cycle) else {
                bail!(Error::NoReturn(format!("{} cycles found, cycle {cycle} requested", cycles.len())));
            };
            let mut policy = StepPolicy::toward(p.get(param), *bound);
            policy.returns = cfg.returns;
            if let Some(cap) = period_cap {
                policy.period_cap = *cap;
            }
            let saddles: Vec<PhasePoint> = c.saddles().map(|e| e.location).collect();
            let branch = continue_cycle(&p, start, param, &policy, true, &saddles)?;
            let text = match format {
                Format::Csv => branch_csv(&branch)?,
                Format::Json => to_json(&branch)?,
            };
            write_out(cli, &text)?;
            eprintln!("branch: {} samples, terminated by {:?}", branch.samples.len(), branch.termination);
            Ok(Outcome::Passed)
        }
        Command::Verify => verify(cli, &p),
        Command::Sweep { param, range, samples, csv, search } => sweep(cli, &p, param, range, *samples, csv.as_ref(), search),
        Command::Scenario { .. } => unreachable!(),
    }
}

fn verify(cli: &Cli, p: &ModelParams) -> Result<Outcome> {
    let c = full_census(p)?;
    let doc = census_document(&c);
    let points: Vec<PointCheck> = doc
        .census
        .finite
        .iter()
        .map(|e| {
            let tol = 1e-8 * (1.0 + e.location.norm());
            let index_ok = e.contour_index.is_none_or(|k| k == e.index);
            PointCheck {
                x: e.location.x,
                y: e.location.y,
                residual: e.residual,
                class_index: e.index,
                contour_index: e.contour_index,
                pass: e.residual <= tol && index_ok,
            }
        })
        .collect();
    let passed = !doc.configuration.any_failure() && points.iter().all(|q| q.pass);
    write_out(
        cli,
        &to_json(&VerifyDocument {
            schema_version: SCHEMA_VERSION,
            params: *p,
            configuration: doc.configuration,
            points,
            passed,
        })?,
    )?;
    Ok(if passed { Outcome::Passed } else { Outcome::VerificationFailed })
}

/// Sample values, jittered by up to a quarter spacing when `QBL_SEED` is set.
/// The end points are never moved.
pub fn sweep_values(range: (f64, f64), n: usize, seed: Option<u64>) -> Vec<f64> {
    let h = (range.1 - range.0) / (n - 1) as f64;
    let mut rng = seed.map(StdRng::seed_from_u64);
    (0..n)
        .map(|k| {
            let v = range.0 + h * k as f64;
            match rng.as_mut() {
                Some(r) if k > 0 && k + 1 < n => v + h * r.gen_range(-0.25..0.25),
                _ => v,
            }
        })
        .collect()
}

fn seed_from_env() -> Result<Option<u64>> {
    match std::env::var("QBL_SEED") {
        Ok(s) => Ok(Some(s.trim().parse().map_err(|_| Error::Config(format!("QBL_SEED is not an integer: {s}")))?)),
        Err(_) => Ok(None),
    }
}

#[allow(clippy::too_many_arguments)]
fn sweep(
    cli: &Cli,
    p: &ModelParams,
    param: &str,
    range: &str,
    samples: usize,
    csv: Option<&PathBuf>,
    search: &SearchArgs,
) -> Result<Outcome> {
    let param = parameter(param)?;
    let range = parse_range(range).map_err(|e| Error::Config(e.to_string()))?;
    if samples < 2 {
        bail!(Error::Config("a sweep needs at least 2 samples".into()));
    }
    if !(range.0.is_finite() && range.1.is_finite()) || range.0 == range.1 {
        bail!(Error::Config("sweep range must be finite and nonempty".into()));
    }
    let (len, cfg) = search.build()?;
    let seed = seed_from_env()?;
    let base_census = full_census(p)?;
    let mut records = Vec::with_capacity(samples);
    let mut rows: Vec<(f64, LimitCycle)> = Vec::new();
    let mut outcome = Outcome::Passed;
    let mut verification_failures = 0;
    for v in sweep_values(range, samples, seed) {
        let res = p.with(param, v).and_then(|q| {
            // rotation leaves the equilibria in place
            let c = if param == Parameter::Gamma { Census { params: q, ..base_census.clone() } } else { full_census(&q)? };
            Ok((q, c))
        });
        let (q, c) = match res {
            Ok(x) => x,
            Err(e) => {
                records.push(SweepSample {
                    value: v,
                    cycles: 0,
                    max_concentric: 0,
                    index_identity: Verdict::Inapplicable("no census".into()),
                    failures: Vec::new(),
                    error: Some(e.to_string()),
                });
                continue;
            }
        };
        let identity = verify_configuration(&c).index_identity;
        let (cycles, failed) = limit_cycles(&q, &c, true, len, &cfg);
        let anti: Vec<PhasePoint> = c.antisaddles().map(|e| e.location).collect();
        let max_concentric =
            anti.iter().map(|&a| cycles.iter().filter(|cy| cy.encloses(a)).count()).max().unwrap_or(0);
        let mut o = failure_outcome(&failed);
        if o == Outcome::NumericalFailure {
            // reported per sample, not a verification failure
            o = Outcome::Passed;
        }
        if identity.is_fail() || cycles.iter().any(|cy| !residual_ok(cy, &cfg)) {
            o = Outcome::VerificationFailed;
        }
        if o == Outcome::VerificationFailed {
            verification_failures += 1;
        }
        outcome = worst(outcome, o);
        records.push(SweepSample {
            value: v,
            cycles: cycles.len() + failed.len(),
            max_concentric,
            index_identity: identity,
            failures: failed.iter().map(|f| f.to_string()).collect(),
            error: None,
        });
        rows.extend(cycles.into_iter().map(|cy| (v, cy)));
    }
    let mut events = Vec::new();
    for e in base_census.antisaddles() {
        match hopf_detect(p, e, param, range) {
            Ok(ev) => events.extend(ev),
            Err(err) => eprintln!("warning: hopf scan at ({}, {}): {err}", e.location.x, e.location.y),
        }
    }
    let report = SweepReport {
        schema_version: SCHEMA_VERSION,
        params: *p,
        parameter: param,
        range,
        seed,
        max_cycles: records.iter().map(|r| r.cycles).max().unwrap_or(0),
        samples: records,
        events,
        verification_failures,
    };
    if report.samples.iter().all(|s| s.error.is_some()) {
        outcome = worst(outcome, Outcome::NumericalFailure);
    }
    if let Some(path) = csv {
        let text = cycles_csv(rows.iter().map(|(v, c)| (*v, c)))?;
        std::fs::write(path, text).map_err(|e| Error::Io(format!("writing {}: {e}", path.display())))?;
    }
    write_out(cli, &to_json(&report)?)?;
    Ok(outcome)
}

fn scenario(cli: &Cli, fixtures: Option<&PathBuf>, overrides: [Option<usize>; 4]) -> Result<Outcome> {
    let text = match fixtures {
        Some(path) => std::fs::read_to_string(path).map_err(|e| Error::Io(format!("reading {}: {e}", path.display())))?,
        None => REGIMES_TOML.to_string(),
    };
    let regimes = parse_regimes(&text)?;
    let mut cfg = regimes.scenario;
    let [c, q, a, g] = overrides;
    cfg.cubic_samples = c.unwrap_or(cfg.cubic_samples);
    cfg.quartic_samples = q.unwrap_or(cfg.quartic_samples);
    cfg.rotated_alpha_samples = a.unwrap_or(cfg.rotated_alpha_samples);
    cfg.gamma_samples = g.unwrap_or(cfg.gamma_samples);
    match run_scenario(&cfg) {
        Ok(log) => {
            write_out(cli, &to_json(&log)?)?;
            Ok(Outcome::Passed)
        }
        Err(e @ Error::Assertion(_)) => {
            eprintln!("error: {e}");
            Ok(Outcome::VerificationFailed)
        }
        Err(e) => Err(e.into()),
    }
}
