//! JSON and CSV documents.

use anyhow::{bail, Context, Result};
use qbl_core::bifurcation::CycleBranch;
use qbl_core::dynamics::LimitCycle;
use qbl_core::equilibria::{verify_configuration, Census, ConfigurationReport};
use serde::{Deserialize, Serialize};

/// Bumped whenever a document layout changes.
pub const SCHEMA_VERSION: u32 = 1;

pub const BRANCH_HEADER: [&str; 5] = ["parameter", "s_star", "period", "derivative", "stability"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusDocument {
    pub schema_version: u32,
    pub census: Census,
    pub configuration: ConfigurationReport,
}

/// Finite points by (x, y), infinite ones by (chart, coordinate).
pub fn canonical(c: &Census) -> Census {
    let mut c = c.clone();
    c.finite.sort_by(|a, b| a.location.x.total_cmp(&b.location.x).then(a.location.y.total_cmp(&b.location.y)));
    c.infinite.sort_by(|a, b| {
        (a.chart as u8).cmp(&(b.chart as u8)).then(a.coordinate.total_cmp(&b.coordinate))
    });
    c
}

pub fn census_document(c: &Census) -> CensusDocument {
    let census = canonical(c);
    let configuration = verify_configuration(&census);
    CensusDocument { schema_version: SCHEMA_VERSION, census, configuration }
}

pub fn emit_census(c: &Census, format: Format) -> Result<String> {
    let doc = census_document(c);
    match format {
        Format::Json => Ok(serde_json::to_string_pretty(&doc)? + "\n"),
        Format::Csv => census_csv(&doc),
    }
}

/// Reads a JSON census document back.
pub fn parse_census(text: &str) -> Result<CensusDocument> {
    let doc: CensusDocument = serde_json::from_str(text).context("parsing census document")?;
    if doc.schema_version != SCHEMA_VERSION {
        bail!("unsupported schema version {} (expected {SCHEMA_VERSION})", doc.schema_version);
    }
    Ok(doc)
}

fn verdict_cells(v: &qbl_core::equilibria::Verdict) -> (String, String) {
    use qbl_core::equilibria::Verdict::*;
    match v {
        Pass(d) => ("pass".into(), d.clone()),
        Fail(d) => ("fail".into(), d.clone()),
        Inapplicable(d) => ("inapplicable".into(), d.clone()),
    }
}

/// One row per singular point; the identity verdict is repeated on every
/// row so each row stands alone.
fn census_csv(doc: &CensusDocument) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "schema_version",
        "kind",
        "x_or_chart",
        "y_or_coordinate",
        "type",
        "index",
        "multiplicity",
        "eig1_re",
        "eig1_im",
        "eig2_re",
        "eig2_im",
        "index_identity",
        "identity_detail",
    ])?;
    let (verdict, detail) = verdict_cells(&doc.configuration.index_identity);
    let ver = SCHEMA_VERSION.to_string();
    for e in &doc.census.finite {
        let kind = serde_json::to_value(e.kind)?;
        w.write_record([
            ver.as_str(),
            "finite",
            &e.location.x.to_string(),
            &e.location.y.to_string(),
            kind.as_str().unwrap_or_default(),
            &e.index.to_string(),
            "",
            &e.eigenvalues[0].re.to_string(),
            &e.eigenvalues[0].im.to_string(),
            &e.eigenvalues[1].re.to_string(),
            &e.eigenvalues[1].im.to_string(),
            &verdict,
            &detail,
        ])?;
    }
    for s in &doc.census.infinite {
        let kind = serde_json::to_value(s.kind)?;
        w.write_record([
            ver.as_str(),
            "infinite",
            &s.chart.to_string(),
            &s.coordinate.to_string(),
            kind.as_str().unwrap_or_default(),
            "",
            &s.multiplicity.to_string(),
            "",
            "",
            "",
            "",
            &verdict,
            &detail,
        ])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

/// Rows `parameter,s_star,period,derivative,stability`.
pub fn cycles_csv<'a>(rows: impl IntoIterator<Item = (f64, &'a LimitCycle)>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(BRANCH_HEADER)?;
    for (v, c) in rows {
        w.write_record([
            v.to_string(),
            c.s_star.to_string(),
            c.period.to_string(),
            c.derivative.to_string(),
            c.stability.to_string(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

pub fn branch_csv(b: &CycleBranch) -> Result<String> {
    cycles_csv(b.samples.iter().map(|(v, c)| (*v, c)))
}
