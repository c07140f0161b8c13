//! Bifurcation analysis of a planar predator-prey model with a
//! non-monotonic functional response and its field-rotated companion.

pub mod bifurcation;
pub mod compactification;
pub mod dynamics;
pub mod equilibria;
pub mod error;
pub mod fixtures;
pub mod integrate;
pub mod model;
pub mod poly;
pub mod scenario;

pub use error::{Error, Result};
pub use model::{FieldValue, Jacobian2, ModelParams, Parameter, PhasePoint, Stage};
