//! The derivation along paths `D^γ_s` induced by a transport.
//!
//! `D^γ_s σ = ∂/∂ε [L^γ_{s+ε→s} σ(s+ε)]_{ε=0}`. With `H(s,s+ε) = I + εΓ_γ(s)
//! + O(ε²)` this is `σ′(s) + Γ_γ(s)σ(s)` in components.

use crate::bundle::{CoefficientProvider, Path, Section};
use crate::error::{GeoError, Result};
use crate::linalg::Vector;
use crate::transport::{default_steps, transport_matrix};

fn check_dims(provider: &CoefficientProvider, sec: &Section) -> Result<()> {
    if sec.dim() != provider.fibre_dim() {
        return Err(GeoError::argument(format!(
            "section has {} components, fibre dimension is {}",
            sec.dim(),
            provider.fibre_dim()
        )));
    }
    Ok(())
}

/// Component form `σ′(s) + Γ_γ(s)·σ(s)`.
pub fn derive_section(
    provider: &CoefficientProvider,
    path: &Path,
    sec: &Section,
    s: f64,
) -> Result<Vector> {
    check_dims(provider, sec)?;
    path.domain().check("derivation point", s)?;
    let d = sec.derivative(s, path.domain())?;
    let g = provider.coefficient(path, s)?;
    Ok(d + g * sec.value(s)?)
}

/// Symmetric-difference form of the defining limit:
/// `(L_{s+ε→s}σ(s+ε) − L_{s−ε→s}σ(s−ε)) / 2ε`.
pub fn derive_section_limit(
    provider: &CoefficientProvider,
    path: &Path,
    sec: &Section,
    s: f64,
    eps: f64,
) -> Result<Vector> {
    check_dims(provider, sec)?;
    if !(eps > 0.0) {
        return Err(GeoError::argument("limit step must be positive"));
    }
    let fwd = transport_matrix(provider, path, s + eps, s, default_steps(s, s + eps))?;
    let bwd = transport_matrix(provider, path, s - eps, s, default_steps(s, s - eps))?;
    let ahead = fwd.apply(&sec.value(s + eps)?);
    let behind = bwd.apply(&sec.value(s - eps)?);
    Ok((ahead - behind) / (2.0 * eps))
}
