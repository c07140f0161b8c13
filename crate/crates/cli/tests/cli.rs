use std::process::{Command, Output};

use qbl_cli::report::{parse_census, SCHEMA_VERSION};
use qbl_core::equilibria::EquilibriumKind;
use qbl_core::fixtures::regimes;
use qbl_core::scenario::run_scenario;

const QUAD: [&str; 6] = ["--delta", "0.4", "--lambda", "1.2", "--mu", "0.8"];
const P1: [&str; 10] =
    ["--alpha", "2.6618", "--beta", "-1.9089", "--delta", "0.5152", "--lambda", "0.9862", "--mu", "0.6753"];

fn qbl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qbl")).args(args).output().expect("spawn qbl")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn with<'a>(base: &[&'a str], extra: &[&'a str]) -> Vec<&'a str> {
    extra.iter().chain(base).copied().collect()
}

#[test]
fn quadratic_census_document() {
    let o = qbl(&with(&QUAD, &["equilibria"]));
    assert_eq!(o.status.code(), Some(0));
    let doc = parse_census(&stdout(&o)).unwrap();
    assert_eq!(doc.schema_version, SCHEMA_VERSION);
    assert_eq!(doc.census.finite.len(), 4);
    assert_eq!(doc.census.infinite.len(), 3);
    assert!(doc.configuration.index_identity.is_pass());
    let saddles = doc.census.finite.iter().filter(|e| e.kind == EquilibriumKind::Saddle).count();
    assert_eq!(saddles, 2);
    let xs: Vec<f64> = doc.census.finite.iter().map(|e| e.location.x).collect();
    assert!(xs.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn census_without_interior_points() {
    let o = qbl(&["equilibria", "--alpha", "10", "--beta", "-1.9089", "--delta", "0.5152", "--lambda", "0.9862", "--mu", "0.6753"]);
    assert_eq!(o.status.code(), Some(0));
    let doc = parse_census(&stdout(&o)).unwrap();
    assert!(doc.census.first_quadrant().is_empty());
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.conf");
    std::fs::write(&path, "# base\ndelta = 0.4\nlambda = 1.2\nmu = 0.8\ngamma = 0.3\n").unwrap();
    let conf = path.to_str().unwrap();
    let o = qbl(&["equilibria", "--config", conf, "--gamma", "0.1"]);
    assert_eq!(o.status.code(), Some(0));
    let doc = parse_census(&stdout(&o)).unwrap();
    assert_eq!(doc.census.params.gamma(), 0.1);
    assert_eq!(doc.census.params.delta(), 0.4);
}

#[test]
fn csv_census_has_header_and_verdict() {
    let o = qbl(&with(&QUAD, &["equilibria", "--format", "csv"]));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("schema_version,kind,"));
    assert!(lines.all(|l| l.contains(",pass,")));
}

#[test]
fn usage_and_config_errors_exit_1() {
    assert_eq!(qbl(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(qbl(&["equilibria", "--delta", "0.4"]).status.code(), Some(1));
    assert_eq!(qbl(&with(&QUAD, &["equilibria", "--mu", "-1"])).status.code(), Some(1));
    assert_eq!(qbl(&with(&QUAD, &["cycles", "--rtol", "1e-20"])).status.code(), Some(1));
    assert_eq!(qbl(&with(&QUAD, &["sweep", "--range=0,1", "--samples", "1"])).status.code(), Some(1));
    assert_eq!(qbl(&["--help"]).status.code(), Some(0));
}

#[test]
fn portrait_is_deterministic_and_cycle_free_for_quadratic() {
    let a = qbl(&with(&QUAD, &["portrait"]));
    let b = qbl(&with(&QUAD, &["portrait"]));
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let svg = stdout(&a);
    assert!(svg.contains(r#"version="1.1""#));
    assert!(svg.contains(r#"class="isocline-prey""#));
    assert!(svg.contains(r#"class="isocline-predator""#));
    assert!(svg.contains(r#"class="ellipse""#));
    assert!(svg.contains("separatrix"));
    assert_eq!(svg.matches(r#"class="cycle"#).count(), 0);
}

#[test]
fn portrait_of_two_cycle_fixture_shows_two_closed_paths() {
    let r = regimes().unwrap().two_cycle;
    let p = r.params;
    let vals: Vec<String> =
        [p.alpha(), p.beta(), p.delta(), p.lambda(), p.mu(), r.gamma, r.section_length].iter().map(|v| v.to_string()).collect();
    let grid = r.grid.to_string();
    let o = qbl(&[
        "portrait",
        "--alpha",
        &vals[0],
        "--beta",
        &vals[1],
        "--delta",
        &vals[2],
        "--lambda",
        &vals[3],
        "--mu",
        &vals[4],
        "--gamma",
        &vals[5],
        "--section-length",
        &vals[6],
        "--grid",
        &grid,
    ]);
    assert_eq!(o.status.code(), Some(0));
    let svg = stdout(&o);
    let paths: Vec<&str> = svg.lines().filter(|l| l.contains(r#"class="cycle"#)).collect();
    assert_eq!(paths.len(), 2);
    assert!(paths.iter().all(|l| l.contains("Z\"")));
}

#[test]
fn hopf_command_matches_closed_form() {
    let o = qbl(&with(&P1, &["hopf", "--range=-2,0.5"]));
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let events = v["events"].as_array().unwrap();
    assert_eq!(events.len(), 2);
    for e in events {
        let g = e["diagnostics"]["closed_form"].as_f64().unwrap();
        assert!((e["value"].as_f64().unwrap() - g).abs() < 1e-8);
    }
}

#[test]
fn gamma_sweep_steps_at_hopf_point() {
    let o = qbl(&with(&P1, &["sweep", "--range=-0.62,-0.52", "--samples", "21"]));
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let hopf = v["events"][0]["value"].as_f64().unwrap();
    let samples = v["samples"].as_array().unwrap();
    let h = 0.1 / 20.0;
    for s in samples {
        let (g, n) = (s["value"].as_f64().unwrap(), s["cycles"].as_u64().unwrap());
        if g < hopf - h {
            assert_eq!(n, 1, "gamma {g}");
        } else if g > hopf + h {
            assert_eq!(n, 0, "gamma {g}");
        }
    }
    assert_eq!(v["max_cycles"].as_u64(), Some(1));
}

#[test]
fn sweep_of_cycle_free_regime_counts_zero() {
    let o = qbl(&with(&QUAD, &["sweep", "--param", "gamma", "--range=-0.2,0.2", "--samples", "5"]));
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["samples"].as_array().unwrap().iter().all(|s| s["cycles"] == 0));
}

#[test]
fn sweep_jitter_follows_seed() {
    let run = |seed: Option<&str>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_qbl"));
        c.args(with(&QUAD, &["sweep", "--range=-0.2,0.2", "--samples", "4"]));
        match seed {
            Some(s) => c.env("QBL_SEED", s),
            None => c.env_remove("QBL_SEED"),
        };
        let v: serde_json::Value = serde_json::from_slice(&c.output().unwrap().stdout).unwrap();
        v["samples"].as_array().unwrap().iter().map(|s| s["value"].as_f64().unwrap()).collect::<Vec<_>>()
    };
    let plain = run(None);
    assert_eq!(plain, vec![-0.2, -0.2 + 0.4 / 3.0, -0.2 + 0.8 / 3.0, 0.2]);
    assert_eq!(run(Some("5")), run(Some("5")));
    assert_ne!(run(Some("5")), plain);
}

#[test]
fn continue_writes_branch_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("branch.csv");
    let o = qbl(&with(
        &P1,
        &["continue", "--gamma", "-0.58", "--bound", "-0.63", "--period-cap", "100", "--out", out.to_str().unwrap()],
    ));
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(out).unwrap();
    assert_eq!(text.lines().next(), Some("parameter,s_star,period,derivative,stability"));
    assert!(text.lines().count() > 30);
}

#[test]
fn scenario_output_matches_library_log() {
    let o = qbl(&["scenario", "--cubic-samples", "3", "--quartic-samples", "3", "--alpha-samples", "2", "--gamma-samples", "4"]);
    assert_eq!(o.status.code(), Some(0));
    let from_cli: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let mut cfg = regimes().unwrap().scenario;
    cfg.cubic_samples = 3;
    cfg.quartic_samples = 3;
    cfg.rotated_alpha_samples = 2;
    cfg.gamma_samples = 4;
    let log = run_scenario(&cfg).unwrap();
    assert_eq!(from_cli, serde_json::to_value(&log).unwrap());
}
