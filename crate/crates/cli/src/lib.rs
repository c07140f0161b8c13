//! Command-line surface of the qbl workspace: parameter input, census,
//! cycle and bifurcation commands, JSON/CSV documents and SVG portraits.

pub mod commands;
pub mod config;
pub mod portrait;
pub mod report;

pub use commands::{run, Cli, Command, Outcome};
