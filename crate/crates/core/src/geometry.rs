//! Closed-form background quantities of the extremal Reissner-Nordstrom
//! exterior and the Couch-Torrence conformal isometry.
//!
//! Geometric units G = c = 1 throughout; the only parameter is the mass M.
//! Extremality is built in: the charge is never stored, and the horizon
//! factor is always D(r) = ((r-M)/r)^2, which has a double root at r = M
//! (vanishing surface gravity).

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Background parameters. Extremal, so mass alone fixes everything.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpacetimeParams {
    pub mass: f64,
}

impl SpacetimeParams {
    pub fn new(mass: f64) -> Result<Self, GeometryError> {
        if !(mass.is_finite() && mass > 0.0) {
            return Err(GeometryError::BadMass { mass });
        }
        Ok(Self { mass })
    }

    /// Radius of the photon sphere, also the fixed sphere of the
    /// Couch-Torrence involution.
    pub fn photon_sphere(&self) -> f64 {
        2.0 * self.mass
    }
}

/// Where a time slice switches from the bounded region to the far field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoliationSpec {
    /// Split radius R0; far-field diagnostics integrate over r >= R0.
    pub split_radius: f64,
    /// Outer grid boundary.
    pub r_max: f64,
}

impl FoliationSpec {
    pub fn new(split_radius: f64, r_max: f64, params: SpacetimeParams) -> Result<Self, GeometryError> {
        if !(split_radius.is_finite() && split_radius > 2.0 * params.mass) {
            return Err(GeometryError::SplitInsidePhotonSphere {
                split_radius,
                photon_sphere: 2.0 * params.mass,
            });
        }
        if !(r_max.is_finite() && r_max > split_radius) {
            return Err(GeometryError::RMaxInsideSplit { r_max, split_radius });
        }
        Ok(Self { split_radius, r_max })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("mass must be finite and positive, got {mass}")]
    BadMass { mass: f64 },
    #[error("r = {r} lies inside the horizon r = {horizon}; the interior is not modeled")]
    InsideHorizon { r: f64, horizon: f64 },
    #[error("r = {r} lies on or inside the horizon r = {horizon}; singular there")]
    AtOrInsideHorizon { r: f64, horizon: f64 },
    #[error("split radius {split_radius} must lie strictly outside the photon sphere {photon_sphere}")]
    SplitInsidePhotonSphere { split_radius: f64, photon_sphere: f64 },
    #[error("r_max = {r_max} must lie strictly outside the split radius {split_radius}")]
    RMaxInsideSplit { r_max: f64, split_radius: f64 },
}

/// Horizon factor D(r) = ((r-M)/r)^2. Equals the subextremal
/// 1 - 2M/r + e^2/r^2 at e = M; vanishes to second order at r = M.
pub fn horizon_factor(r: f64, params: SpacetimeParams) -> Result<f64, GeometryError> {
    let m = params.mass;
    if r < m {
        return Err(GeometryError::InsideHorizon { r, horizon: m });
    }
    let s = (r - m) / r;
    Ok(s * s)
}

/// dD/dr = 2M(r-M)/r^3. Zero at the horizon: the surface gravity vanishes.
pub fn horizon_factor_deriv(r: f64, params: SpacetimeParams) -> Result<f64, GeometryError> {
    let m = params.mass;
    if r < m {
        return Err(GeometryError::InsideHorizon { r, horizon: m });
    }
    Ok(2.0 * m * (r - m) / (r * r * r))
}

/// sqrt(D) = (r-M)/r, the degeneration weight of the nonlinearity.
pub fn sqrt_horizon_factor(r: f64, params: SpacetimeParams) -> Result<f64, GeometryError> {
    let m = params.mass;
    if r < m {
        return Err(GeometryError::InsideHorizon { r, horizon: m });
    }
    Ok((r - m) / r)
}

/// Tortoise coordinate r*(r) with dr*/dr = 1/D, normalized so r*(2M) = 0.
///
/// Closed form: r* = r - M + 2M ln((r-M)/M) - M^2/(r-M). Strictly
/// increasing, -> -infinity at the horizon and ~ r near infinity.
pub fn tortoise(r: f64, params: SpacetimeParams) -> Result<f64, GeometryError> {
    let m = params.mass;
    if r <= m {
        return Err(GeometryError::AtOrInsideHorizon { r, horizon: m });
    }
    let x = r - m;
    Ok(x + 2.0 * m * (x / m).ln() - m * m / x)
}

/// C-infinity step: 0 for y <= 0, 1 for y >= 1, strictly increasing
/// between. Used for all smooth cutoffs and blending (grid stretchings,
/// photon-sphere masks); infinitely flat at both ends so no cutoff ever
/// degrades the scheme order.
pub fn smooth_step(y: f64) -> f64 {
    if y <= 0.0 {
        0.0
    } else if y >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / y).exp();
        let b = (-1.0 / (1.0 - y)).exp();
        a / (a + b)
    }
}

/// Couch-Torrence radius map r' = M + M^2/(r-M): an involution of (M, inf)
/// exchanging horizon and infinity, fixing the photon sphere r = 2M.
pub fn ct_radius(r: f64, params: SpacetimeParams) -> Result<f64, GeometryError> {
    let m = params.mass;
    if r <= m {
        return Err(GeometryError::AtOrInsideHorizon { r, horizon: m });
    }
    Ok(m + m * m / (r - m))
}

/// Conformal factor Omega = (r-M)/M of the Couch-Torrence map;
/// Omega(r) * Omega(r') = 1 and sqrt(D) = Omega * M/r.
pub fn ct_omega(r: f64, params: SpacetimeParams) -> Result<f64, GeometryError> {
    let m = params.mass;
    if r <= m {
        return Err(GeometryError::AtOrInsideHorizon { r, horizon: m });
    }
    Ok((r - m) / m)
}
