//! Linear transports along paths in vector bundles: transport matrices,
//! the induced derivation, torsion and curvature by their component formulas,
//! the loop/pentagon interpretations, Bianchi-type identities, and the
//! flatness criterion, all checked numerically.

pub mod bundle;
pub mod convergence;
pub mod curvature;
pub mod derivation;
pub mod error;
pub mod fd;
pub mod flatness;
pub mod holonomy;
pub mod identities;
pub mod experiment;
pub mod linalg;
mod par;
pub mod report;
pub mod transport;
pub mod zoo;

pub use error::{GeoError, Result};
