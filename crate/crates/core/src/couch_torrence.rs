//! Couch-Torrence conformal inversion. The radial map Phi(r) = M + M^2/(r-M)
//! swaps the horizon with null infinity, fixes the photon sphere r = 2M, and
//! is a conformal isometry of the extremal geometry: with Omega = (r-M)/M the
//! rescaled pullback metric equals the outgoing-chart form of the same
//! spacetime, so psi_I = Omega^{-1} psi_O(u, Phi(r')) satisfies
//!
//!   Box psi_I = Omega^{-3} (Box psi_O) o Phi                 (covariance)
//!
//! exactly (the scalar curvature vanishes, so no curvature terms enter).
//! When psi_O solves the inverse-metric null form equation with source S,
//! the transformed field satisfies
//!
//!   Box psi_I = Omega g_I(d psi_I, d psi_I) - (2/M) T psi_I psi_I
//!               + (2D/M) Y psi_I psi_I + Omega^{-1} (D/M^2) psi_I^2
//!               + Omega^{-3} S o Phi
//!
//! with T = d/du and Y = d/dr' in the outgoing chart. Both identities are
//! pinned by exact-jet oracles in the tests; the public residual checks
//! re-evaluate them with finite differences on analytic test fields and must
//! converge at the scheme order.

use serde::Serialize;
use thiserror::Error;

use crate::fields::fd_weights;
use crate::geometry::{
    ct_omega, ct_radius, horizon_factor, horizon_factor_deriv, SpacetimeParams,
};
use crate::hyperdual::Jet2;
use crate::mms::{Manufactured, RadialProfile};

/// Which asymptotic end a sampled field is anchored to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChartTag {
    NearHorizon,
    NearInfinity,
}

impl ChartTag {
    pub fn opposite(self) -> Self {
        match self {
            ChartTag::NearHorizon => ChartTag::NearInfinity,
            ChartTag::NearInfinity => ChartTag::NearHorizon,
        }
    }
}

/// Radial field samples in one chart; nodes ascend strictly.
#[derive(Debug, Clone, PartialEq)]
pub struct CtField {
    pub tag: ChartTag,
    pub r: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum CtError {
    #[error("sample node r = {r} is at or inside the horizon radius {horizon}")]
    NodeAtHorizon { r: f64, horizon: f64 },
    #[error("node list must ascend strictly")]
    NodesNotAscending,
    #[error("{nodes} nodes but {values} values")]
    LengthMismatch { nodes: usize, values: usize },
    #[error("need at least {need} nodes, got {got}")]
    TooFewNodes { need: usize, got: usize },
    #[error("inversion image {image} falls outside the sampled span [{lo}, {hi}]")]
    ImageOutsideSamples { image: f64, lo: f64, hi: f64 },
    #[error("test field support [{lo}, {hi}] must sit strictly outside the horizon")]
    SupportTouchesHorizon { lo: f64, hi: f64 },
    #[error("test field must be compactly supported")]
    UnboundedProfile,
    #[error("transformed-nonlinearity residual is defined for spherical profiles (l = 0)")]
    AngularModeUnsupported,
}

fn check_field(field: &CtField, params: SpacetimeParams) -> Result<(), CtError> {
    if field.r.len() != field.values.len() {
        return Err(CtError::LengthMismatch { nodes: field.r.len(), values: field.values.len() });
    }
    for w in field.r.windows(2) {
        if w[1] <= w[0] {
            return Err(CtError::NodesNotAscending);
        }
    }
    for &r in &field.r {
        if r <= params.mass {
            return Err(CtError::NodeAtHorizon { r, horizon: params.mass });
        }
    }
    Ok(())
}

/// Exact inversion onto the image node set. At the image node Phi(r_j) the
/// weight Omega(Phi(r_j))^{-1} equals Omega(r_j), so no interpolation enters:
/// psi_new(Phi(r_j)) = Omega(r_j) psi_old(r_j). Output nodes ascend again
/// (Phi reverses orientation).
pub fn ct_pullback(field: &CtField, params: SpacetimeParams) -> Result<CtField, CtError> {
    check_field(field, params)?;
    let n = field.r.len();
    let mut r = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    for j in (0..n).rev() {
        let rj = field.r[j];
        r.push(ct_radius(rj, params).expect("checked above"));
        values.push(ct_omega(rj, params).expect("checked above") * field.values[j]);
    }
    Ok(CtField { tag: field.tag.opposite(), r, values })
}

/// Inversion resampled onto caller-chosen nodes: psi_new(rho) =
/// Omega(rho)^{-1} psi_old(Phi(rho)) with psi_old(Phi(rho)) read off the
/// source samples by degree-8 barycentric interpolation (9-node windows).
/// Every image point Phi(rho) must fall inside the sampled span.
pub fn ct_pullback_onto(
    field: &CtField,
    targets: &[f64],
    params: SpacetimeParams,
) -> Result<CtField, CtError> {
    check_field(field, params)?;
    let n = field.r.len();
    if n < 9 {
        return Err(CtError::TooFewNodes { need: 9, got: n });
    }
    let (lo, hi) = (field.r[0], field.r[n - 1]);
    let mut values = Vec::with_capacity(targets.len());
    for &rho in targets {
        if rho <= params.mass {
            return Err(CtError::NodeAtHorizon { r: rho, horizon: params.mass });
        }
        let mut image = ct_radius(rho, params).expect("checked above");
        // Images a few ulps past an endpoint (inversion roundoff) are
        // clamped; anything further is genuine extrapolation.
        let tol = 1e-12 * (hi - lo).max(hi.abs());
        if image < lo && image >= lo - tol {
            image = lo;
        } else if image > hi && image <= hi + tol {
            image = hi;
        }
        if image < lo || image > hi {
            return Err(CtError::ImageOutsideSamples { image, lo, hi });
        }
        let start = field.r.partition_point(|&x| x < image).saturating_sub(4).min(n - 9);
        let interpolated = barycentric(
            &field.r[start..start + 9],
            &field.values[start..start + 9],
            image,
        );
        values.push(interpolated / ct_omega(rho, params).expect("checked above"));
    }
    Ok(CtField { tag: field.tag.opposite(), r: targets.to_vec(), values })
}

/// Barycentric Lagrange interpolation through all given nodes.
fn barycentric(nodes: &[f64], values: &[f64], x: f64) -> f64 {
    // Exact node hits short-circuit so fixed points stay bitwise.
    for (j, &xj) in nodes.iter().enumerate() {
        if x == xj {
            return values[j];
        }
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 0..nodes.len() {
        let mut w = 1.0;
        for k in 0..nodes.len() {
            if k != j {
                w /= nodes[j] - nodes[k];
            }
        }
        let t = w / (x - nodes[j]);
        num += t * values[j];
        den += t;
    }
    num / den
}

/// Outcome of the far-chart coefficient identity check.
#[derive(Debug, Clone, Serialize)]
pub struct WeightIdentityReport {
    pub samples: usize,
    pub max_rel_err: f64,
    /// The difference's numerator cancels exactly in integer arithmetic.
    pub symbolic_zero: bool,
}

/// Verifies 2 Omega/r'^3 - 2/(M r'^2) = -2/r'^3 at each sample radius, and
/// confirms the cancellation symbolically: in x = r'/M the difference times
/// the common denominator M^3 x^3 is the polynomial 2(x-1) - 2x + 2, which
/// collapses to zero coefficient by coefficient. This identity is why the
/// transformed nonlinearity decays like (r')^-3 toward infinity.
pub fn ct_weight_identity_check(params: SpacetimeParams, samples: &[f64]) -> WeightIdentityReport {
    let m = params.mass;
    let mut max_rel: f64 = 0.0;
    for &rp in samples {
        let omega = (rp - m) / m;
        let t1 = 2.0 * omega / rp.powi(3);
        let t2 = 2.0 / (m * rp * rp);
        let rhs = -2.0 / rp.powi(3);
        // The left side cancels from O(r^-2) pieces down to O(r^-3), so the
        // residual is normalized by the largest participating term.
        let scale = t1.abs().max(t2).max(rhs.abs());
        max_rel = max_rel.max((t1 - t2 - rhs).abs() / scale);
    }
    // Integer polynomial sum: 2(x - 1) + (-2x) + 2, coefficients by degree.
    let terms: [&[i64]; 3] = [&[-2, 2], &[0, -2], &[2]];
    let mut coeffs = [0i64; 2];
    for t in terms {
        for (k, &c) in t.iter().enumerate() {
            coeffs[k] += c;
        }
    }
    WeightIdentityReport {
        samples: samples.len(),
        max_rel_err: max_rel,
        symbolic_zero: coeffs.iter().all(|&c| c == 0),
    }
}

/// Exact jets of the transformed field chi(u, rho) = Omega(rho)^{-1}
/// psi(u, Phi(rho)), by the second-order chain rule through the analytic
/// inversion map.
pub fn transformed_jet(
    field: &Manufactured,
    params: SpacetimeParams,
    t: f64,
    rho: f64,
) -> Result<Jet2, CtError> {
    let m = params.mass;
    if rho <= m {
        return Err(CtError::NodeAtHorizon { r: rho, horizon: m });
    }
    let x = rho - m;
    let (a, ap, app) = (m / x, -m / (x * x), 2.0 * m / (x * x * x));
    let (b, bp, bpp) = (m + m * m / x, -m * m / (x * x), 2.0 * m * m / (x * x * x));
    let j = field.jet(t, b);
    Ok(Jet2 {
        val: a * j.val,
        dt: a * j.dt,
        dr: ap * j.val + a * bp * j.dr,
        dtt: a * j.dtt,
        dtr: ap * j.dt + a * bp * j.dtr,
        drr: app * j.val + 2.0 * ap * bp * j.dr + a * (bpp * j.dr + bp * bp * j.drr),
    })
}

/// Evaluation nodes for the residual checks: a uniform cover of the
/// transformed support, padded 10% but kept strictly outside the horizon.
fn inversion_nodes(
    field: &Manufactured,
    params: SpacetimeParams,
    n: usize,
) -> Result<Vec<f64>, CtError> {
    if field.profile != RadialProfile::Bump {
        return Err(CtError::UnboundedProfile);
    }
    let m = params.mass;
    let (lo_s, hi_s) = (field.center - field.width, field.center + field.width);
    if lo_s <= m {
        return Err(CtError::SupportTouchesHorizon { lo: lo_s, hi: hi_s });
    }
    if n < 9 {
        return Err(CtError::TooFewNodes { need: 9, got: n });
    }
    let a = ct_radius(hi_s, params).expect("support checked");
    let b = ct_radius(lo_s, params).expect("support checked");
    let pad = 0.1 * (b - a);
    let lo = (a - pad).max(m + 0.5 * (a - m));
    let hi = b + pad;
    Ok((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect())
}

/// m-th derivative of a sampled profile on arbitrary strictly monotone nodes
/// by seven-point windows (exact through degree six).
fn deriv_profile(nodes: &[f64], f: &[f64], order: usize) -> Vec<f64> {
    let n = nodes.len();
    assert!(n >= 7, "deriv_profile needs at least 7 nodes");
    (0..n)
        .map(|i| {
            let s = i.saturating_sub(3).min(n - 7);
            let w = fd_weights(&nodes[s..s + 7], nodes[i], order);
            w.iter().zip(&f[s..s + 7]).map(|(a, b)| a * b).sum()
        })
        .collect()
}

struct ChartSlices {
    /// Evaluation nodes rho in the transformed chart.
    rho: Vec<f64>,
    /// Image nodes Phi(rho) in the source chart (descending).
    image: Vec<f64>,
    chi: Vec<f64>,
    chi_t: Vec<f64>,
    psi: Vec<f64>,
    psi_t: Vec<f64>,
}

/// Samples the source field and its transform on matched node pairs at a
/// fixed time slice; only radial derivatives are left to finite differences.
fn chart_slices(
    field: &Manufactured,
    params: SpacetimeParams,
    n: usize,
    t0: f64,
) -> Result<ChartSlices, CtError> {
    let rho = inversion_nodes(field, params, n)?;
    let mut image = Vec::with_capacity(n);
    let mut chi = Vec::with_capacity(n);
    let mut chi_t = Vec::with_capacity(n);
    let mut psi = Vec::with_capacity(n);
    let mut psi_t = Vec::with_capacity(n);
    for &p in &rho {
        let q = ct_radius(p, params).expect("nodes checked");
        let j = field.jet(t0, q);
        let weight = 1.0 / ct_omega(p, params).expect("nodes checked");
        image.push(q);
        chi.push(weight * j.val);
        chi_t.push(weight * j.dt);
        psi.push(j.val);
        psi_t.push(j.dt);
    }
    Ok(ChartSlices { rho, image, chi, chi_t, psi, psi_t })
}

const RESIDUAL_SLICE_TIME: f64 = 0.7;

/// Max-norm mismatch between the outgoing-chart wave operator applied to the
/// transformed field and Omega^{-3} times the ingoing-chart operator of the
/// source, radial derivatives by finite differences on both charts. The
/// mismatch converges to zero at the scheme order as n doubles.
pub fn ct_conformal_residual(
    field: &Manufactured,
    params: SpacetimeParams,
    n: usize,
) -> Result<f64, CtError> {
    let m = params.mass;
    let s = chart_slices(field, params, n, RESIDUAL_SLICE_TIME * m)?;
    let chi_r = deriv_profile(&s.rho, &s.chi, 1);
    let chi_rr = deriv_profile(&s.rho, &s.chi, 2);
    let chi_tr = deriv_profile(&s.rho, &s.chi_t, 1);
    let psi_q = deriv_profile(&s.image, &s.psi, 1);
    let psi_qq = deriv_profile(&s.image, &s.psi, 2);
    let psi_tq = deriv_profile(&s.image, &s.psi_t, 1);
    let ll = (field.l * (field.l + 1)) as f64;
    let mut sup: f64 = 0.0;
    for i in 0..n {
        let p = s.rho[i];
        let d = horizon_factor(p, params).expect("nodes checked");
        let dp = horizon_factor_deriv(p, params).expect("nodes checked");
        let left = -2.0 * chi_tr[i] + d * chi_rr[i] + (dp + 2.0 * d / p) * chi_r[i]
            - 2.0 * s.chi_t[i] / p
            - ll * s.chi[i] / (p * p);
        let q = s.image[i];
        let dq = horizon_factor(q, params).expect("image outside horizon");
        let dpq = horizon_factor_deriv(q, params).expect("image outside horizon");
        let box_o = 2.0 * psi_tq[i] + dq * psi_qq[i] + (dpq + 2.0 * dq / q) * psi_q[i]
            + 2.0 * s.psi_t[i] / q
            - ll * s.psi[i] / (q * q);
        let omega = ct_omega(p, params).expect("nodes checked");
        sup = sup.max((left - box_o / omega.powi(3)).abs());
    }
    Ok(sup)
}

/// Mismatch of the transformed nonlinear equation: the source field is made
/// to solve Box psi_O = g_O(d psi_O, d psi_O) + S by defining S as the exact
/// defect (via jets), and the transformed field is then checked against the
/// module-level identity with finite-difference radial derivatives.
pub fn ct_nullform_transform_residual(
    field: &Manufactured,
    params: SpacetimeParams,
    n: usize,
) -> Result<f64, CtError> {
    if field.l != 0 {
        return Err(CtError::AngularModeUnsupported);
    }
    let m = params.mass;
    let s = chart_slices(field, params, n, RESIDUAL_SLICE_TIME * m)?;
    let chi_r = deriv_profile(&s.rho, &s.chi, 1);
    let chi_rr = deriv_profile(&s.rho, &s.chi, 2);
    let chi_tr = deriv_profile(&s.rho, &s.chi_t, 1);
    let mut sup: f64 = 0.0;
    for i in 0..n {
        let p = s.rho[i];
        let d = horizon_factor(p, params).expect("nodes checked");
        let dp = horizon_factor_deriv(p, params).expect("nodes checked");
        let left = -2.0 * chi_tr[i] + d * chi_rr[i] + (dp + 2.0 * d / p) * chi_r[i]
            - 2.0 * s.chi_t[i] / p;
        let q = s.image[i];
        let dq = horizon_factor(q, params).expect("image outside horizon");
        let dpq = horizon_factor_deriv(q, params).expect("image outside horizon");
        // Exact source defect of the untransformed field at the image node.
        let j = field.jet(RESIDUAL_SLICE_TIME * m, q);
        let box_o = 2.0 * j.dtr + dq * j.drr + (dpq + 2.0 * dq / q) * j.dr + 2.0 * j.dt / q;
        let null_o = 2.0 * j.dt * j.dr + dq * j.dr * j.dr;
        let source = box_o - null_o;
        let omega = ct_omega(p, params).expect("nodes checked");
        let null_i = -2.0 * s.chi_t[i] * chi_r[i] + d * chi_r[i] * chi_r[i];
        let right = omega * null_i - (2.0 / m) * s.chi_t[i] * s.chi[i]
            + (2.0 * d / m) * chi_r[i] * s.chi[i]
            + d / (m * m * omega) * s.chi[i] * s.chi[i]
            + source / omega.powi(3);
        sup = sup.max((left - right).abs());
    }
    Ok(sup)
}

/// Resolutions, sup errors, and log2 error ratios of a residual refinement.
#[derive(Debug, Clone, Serialize)]
pub struct ResidualSweep {
    pub resolutions: Vec<usize>,
    pub errors: Vec<f64>,
    pub orders: Vec<f64>,
}

/// Runs a residual check over doubling resolutions.
pub fn residual_sweep(
    levels: &[usize],
    mut residual: impl FnMut(usize) -> Result<f64, CtError>,
) -> Result<ResidualSweep, CtError> {
    let mut errors = Vec::with_capacity(levels.len());
    for &n in levels {
        errors.push(residual(n)?);
    }
    let orders = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    Ok(ResidualSweep { resolutions: levels.to_vec(), errors, orders })
}

/// Full identity audit emitted by the command-line tool.
#[derive(Debug, Clone, Serialize)]
pub struct CtAudit {
    pub weight_identity: WeightIdentityReport,
    /// Double exact pullback versus the original samples (100 random smooth
    /// profiles): worst node and value mismatch.
    pub involution_exact_max_err: f64,
    /// Double resampled pullback on a fixed grid, band-limited profile.
    pub involution_resampled_max_err: f64,
    /// Transformed field minus source field at the fixed sphere r = 2M.
    pub fixed_sphere_err: f64,
    pub conformal_residual: ResidualSweep,
    pub nullform_residual: ResidualSweep,
    /// Sup of the quadratic-gradient factor g_I(d psi_I, d psi_I) whose
    /// contribution to the transformed equation carries the explicit Omega
    /// damping toward the horizon.
    pub quadratic_gradient_sup: f64,
    pub notes: Vec<String>,
    pub pass: bool,
}

fn splitmix(state: &mut u64) -> f64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
}

/// Self-dual audit grid on the inversion-invariant interval [1.2M, 6M]:
/// nodes uniform in ln Omega, so the node set maps to itself under the
/// inversion and both charts are equally resolved (a uniform-in-r grid
/// under-resolves the transformed field by a factor Omega^-2 near the inner
/// edge). For odd n the middle node sits exactly on the fixed sphere 2M.
fn audit_nodes(params: SpacetimeParams, n: usize) -> Vec<f64> {
    let m = params.mass;
    let span = 5.0f64.ln();
    (0..n)
        .map(|i| {
            let s = span * (2.0 * i as f64 / (n - 1) as f64 - 1.0);
            m * (1.0 + s.exp())
        })
        .collect()
}

/// Runs every identity check at frozen settings and aggregates pass/fail.
pub fn ct_audit(params: SpacetimeParams) -> CtAudit {
    let m = params.mass;

    // Coefficient identity on 1000 log-spaced radii reaching far out.
    let samples: Vec<f64> = (0..1000)
        .map(|k| m * (1.0 + 10f64.powf(-3.0 + 9.0 * k as f64 / 999.0)))
        .collect();
    let weight_identity = ct_weight_identity_check(params, &samples);

    // Exact involution: 100 random low-order trigonometric profiles.
    let nodes = audit_nodes(params, 193);
    let span = nodes[nodes.len() - 1] - nodes[0];
    let mut state = 0x00C0_FFEE_0000_1234u64;
    let mut involution_exact_max_err: f64 = 0.0;
    for _ in 0..100 {
        let coeffs: Vec<f64> = (0..8).map(|_| splitmix(&mut state)).collect();
        let values: Vec<f64> = nodes
            .iter()
            .map(|&r| {
                let y = (r - nodes[0]) / span;
                coeffs
                    .chunks(2)
                    .enumerate()
                    .map(|(k, c)| {
                        let w = (k + 1) as f64 * std::f64::consts::PI * y;
                        c[0] * w.cos() + c[1] * w.sin()
                    })
                    .sum()
            })
            .collect();
        let field = CtField { tag: ChartTag::NearHorizon, r: nodes.clone(), values };
        let twice = ct_pullback(&ct_pullback(&field, params).expect("valid"), params)
            .expect("valid");
        for i in 0..nodes.len() {
            involution_exact_max_err = involution_exact_max_err
                .max((twice.r[i] - field.r[i]).abs() / m)
                .max((twice.values[i] - field.values[i]).abs());
        }
    }

    // Resampled involution on a band-limited profile. Targets form an
    // interior inversion-symmetric set incommensurate with the source nodes,
    // so each application genuinely interpolates mid-window.
    let profile = |r: f64| (1.7 * r / m).sin() + 0.3 * (0.9 * r / m).cos();
    let nodes = audit_nodes(params, 257);
    let values: Vec<f64> = nodes.iter().map(|&r| profile(r)).collect();
    let field = CtField { tag: ChartTag::NearHorizon, r: nodes, values };
    let targets: Vec<f64> = {
        let span = 0.95 * 5.0f64.ln();
        (0..193)
            .map(|i| m * (1.0 + (span * (2.0 * i as f64 / 192.0 - 1.0)).exp()))
            .collect()
    };
    let once = ct_pullback_onto(&field, &targets, params).expect("invariant interval");
    let twice = ct_pullback_onto(&once, &targets, params).expect("invariant interval");
    let involution_resampled_max_err = targets
        .iter()
        .zip(&twice.values)
        .map(|(&r, v)| (profile(r) - v).abs())
        .fold(0.0, f64::max);

    // Fixed sphere: the middle node of the odd self-dual grid is r = 2M.
    let nodes = audit_nodes(params, 241);
    let values: Vec<f64> = nodes.iter().map(|&r| (0.8 * r / m).sin()).collect();
    let field = CtField { tag: ChartTag::NearHorizon, r: nodes.clone(), values };
    let once = ct_pullback_onto(&field, &nodes, params).expect("invariant interval");
    let i2m = 120;
    debug_assert_eq!(nodes[i2m], 2.0 * m);
    let fixed_sphere_err = (once.values[i2m] - field.values[i2m]).abs();

    // Residual refinements on a compact bump strictly outside the horizon.
    let test_field = Manufactured {
        amplitude: 1.0,
        omega: 1.3 / m,
        phase: 0.4,
        center: 4.0 * m,
        width: 2.0 * m,
        l: 2,
        profile: RadialProfile::Bump,
    };
    let levels = [801usize, 1601, 3201];
    let conformal_residual =
        residual_sweep(&levels, |n| ct_conformal_residual(&test_field, params, n))
            .expect("frozen configuration is valid");
    let spherical = Manufactured { l: 0, ..test_field };
    let nullform_residual =
        residual_sweep(&levels, |n| ct_nullform_transform_residual(&spherical, params, n))
            .expect("frozen configuration is valid");

    // Boundedness of the Omega-damped quadratic-gradient factor.
    let n = levels[2];
    let s = chart_slices(&spherical, params, n, RESIDUAL_SLICE_TIME * m)
        .expect("frozen configuration is valid");
    let chi_r = deriv_profile(&s.rho, &s.chi, 1);
    let mut quadratic_gradient_sup: f64 = 0.0;
    for i in 0..n {
        let d = horizon_factor(s.rho[i], params).expect("nodes checked");
        let null_i = -2.0 * s.chi_t[i] * chi_r[i] + d * chi_r[i] * chi_r[i];
        quadratic_gradient_sup = quadratic_gradient_sup.max(null_i.abs());
    }

    let notes = vec![
        "transformed-equation coefficients verified against exact jets: the T psi psi \
         cross term closes with -2/M (a +2/M variant does not cancel), and the \
         potential term closes with Omega^{-1} D/M^2 = (r'-M)/(M r'^2); the \
         dimensionally inconsistent -sqrt(D)/M variant is recorded, not adopted"
            .to_string(),
        "far-chart expansion: a quartic-power label sometimes attached to the \
         quadratic term is a label slip (dimensional counting gives power two); \
         the quadratic coefficient itself is covered by the weight identity check"
            .to_string(),
    ];

    let orders_ok = conformal_residual.orders.iter().all(|&o| o >= 3.5)
        && nullform_residual.orders.iter().all(|&o| o >= 3.5);
    let pass = weight_identity.max_rel_err <= 1e-13
        && weight_identity.symbolic_zero
        && involution_exact_max_err <= 1e-12
        && involution_resampled_max_err <= 1e-10
        && fixed_sphere_err <= 1e-13
        && quadratic_gradient_sup.is_finite()
        && orders_ok;

    CtAudit {
        weight_identity,
        involution_exact_max_err,
        involution_resampled_max_err,
        fixed_sphere_err,
        conformal_residual,
        nullform_residual,
        quadratic_gradient_sup,
        notes,
        pass,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const M: f64 = 1.0;

    fn params() -> SpacetimeParams {
        SpacetimeParams { mass: M }
    }

    fn test_field(l: usize) -> Manufactured {
        Manufactured {
            amplitude: 1.0,
            omega: 1.3,
            phase: 0.4,
            center: 4.0,
            width: 2.0,
            l,
            profile: RadialProfile::Bump,
        }
    }

    #[test]
    fn zero_field_transforms_to_zero_with_opposite_tag() {
        let field = CtField {
            tag: ChartTag::NearHorizon,
            r: (0..32).map(|i| 1.5 + 0.2 * i as f64).collect(),
            values: vec![0.0; 32],
        };
        let out = ct_pullback(&field, params()).unwrap();
        assert_eq!(out.tag, ChartTag::NearInfinity);
        assert!(out.values.iter().all(|&v| v == 0.0));
        assert!(out.r.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn omega_profile_maps_to_inverse_square() {
        let r: Vec<f64> = (0..64).map(|i| 1.3 + 0.15 * i as f64).collect();
        let values: Vec<f64> = r.iter().map(|&ri| ct_omega(ri, params()).unwrap()).collect();
        let field = CtField { tag: ChartTag::NearHorizon, r, values };
        let out = ct_pullback(&field, params()).unwrap();
        for (i, &rho) in out.r.iter().enumerate() {
            let w = ct_omega(rho, params()).unwrap();
            assert!(
                (out.values[i] - 1.0 / (w * w)).abs() <= 1e-13 / (w * w),
                "node {rho}: {} vs {}",
                out.values[i],
                1.0 / (w * w)
            );
        }
    }

    #[test]
    fn double_exact_pullback_is_identity() {
        // Covered in bulk by the audit; spot-check one irregular profile.
        let r: Vec<f64> = (0..50).map(|i| 1.2 + 0.11 * (i as f64).powf(1.1)).collect();
        let values: Vec<f64> = r.iter().map(|&ri| (0.7 * ri).sin() / ri).collect();
        let field = CtField { tag: ChartTag::NearHorizon, r, values };
        let twice = ct_pullback(&ct_pullback(&field, params()).unwrap(), params()).unwrap();
        assert_eq!(twice.tag, ChartTag::NearHorizon);
        for i in 0..field.r.len() {
            assert!((twice.r[i] - field.r[i]).abs() < 1e-12);
            assert!((twice.values[i] - field.values[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn horizon_node_is_rejected() {
        let field = CtField {
            tag: ChartTag::NearHorizon,
            r: vec![1.0, 1.5, 2.0],
            values: vec![0.0; 3],
        };
        assert!(matches!(
            ct_pullback(&field, params()),
            Err(CtError::NodeAtHorizon { .. })
        ));
    }

    #[test]
    fn weight_identity_at_the_photon_sphere_and_broadly() {
        // r' = 2M: both sides equal -1/(4 M^3) in exact float arithmetic.
        let rep = ct_weight_identity_check(params(), &[2.0]);
        assert_eq!(rep.max_rel_err, 0.0);
        let samples: Vec<f64> = (0..1000)
            .map(|k| 1.0 + 10f64.powf(-3.0 + 9.0 * k as f64 / 999.0))
            .collect();
        let rep = ct_weight_identity_check(params(), &samples);
        assert!(rep.max_rel_err <= 1e-13, "rel err {}", rep.max_rel_err);
        assert!(rep.symbolic_zero);
    }

    /// Conformal covariance at the exact-jet level: the outgoing-chart
    /// operator of the transformed field equals Omega^{-3} times the
    /// ingoing-chart operator of the source, to roundoff. This pins the
    /// operator conventions the finite-difference residuals rely on.
    #[test]
    fn jet_level_conformal_covariance() {
        for l in [0usize, 1, 3] {
            let field = test_field(l);
            let ll = (l * (l + 1)) as f64;
            for k in 0..40 {
                let rho = 1.15 + 1.0 * k as f64 / 39.0;
                let t = 0.3 + 0.05 * k as f64;
                let chi = transformed_jet(&field, params(), t, rho).unwrap();
                let d = horizon_factor(rho, params()).unwrap();
                let dp = horizon_factor_deriv(rho, params()).unwrap();
                let left = -2.0 * chi.dtr + d * chi.drr + (dp + 2.0 * d / rho) * chi.dr
                    - 2.0 * chi.dt / rho
                    - ll * chi.val / (rho * rho);
                let q = ct_radius(rho, params()).unwrap();
                let j = field.jet(t, q);
                let dq = horizon_factor(q, params()).unwrap();
                let dpq = horizon_factor_deriv(q, params()).unwrap();
                let box_o = 2.0 * j.dtr + dq * j.drr + (dpq + 2.0 * dq / q) * j.dr
                    + 2.0 * j.dt / q
                    - ll * j.val / (q * q);
                let omega = ct_omega(rho, params()).unwrap();
                let right = box_o / omega.powi(3);
                let scale = left.abs().max(right.abs()).max(1.0);
                assert!(
                    (left - right).abs() <= 1e-11 * scale,
                    "l={l} rho={rho}: {left} vs {right}"
                );
            }
        }
    }

    /// The transformed nonlinear equation closes exactly at jet level,
    /// including the angular sector evaluated pointwise on the sphere. This
    /// is the oracle fixing the -2/M cross term and the Omega^{-1} D/M^2
    /// potential coefficient.
    #[test]
    fn jet_level_transformed_equation_identity() {
        use crate::fields::{legendre_p, legendre_p_deriv};
        let theta = 0.83f64;
        let xth = theta.cos();
        for l in [0usize, 2] {
            let field = test_field(l);
            let ll = (l * (l + 1)) as f64;
            let p = legendre_p(l, xth);
            let dth_p = -theta.sin() * legendre_p_deriv(l, xth);
            for k in 0..40 {
                let rho = 1.18 + 0.9 * k as f64 / 39.0;
                let t = 0.2 + 0.07 * k as f64;
                let chi = transformed_jet(&field, params(), t, rho).unwrap();
                let d = horizon_factor(rho, params()).unwrap();
                let dp = horizon_factor_deriv(rho, params()).unwrap();
                let left = (-2.0 * chi.dtr + d * chi.drr + (dp + 2.0 * d / rho) * chi.dr
                    - 2.0 * chi.dt / rho)
                    * p
                    - ll * chi.val * p / (rho * rho);

                let q = ct_radius(rho, params()).unwrap();
                let j = field.jet(t, q);
                let dq = horizon_factor(q, params()).unwrap();
                let dpq = horizon_factor_deriv(q, params()).unwrap();
                let box_o = (2.0 * j.dtr + dq * j.drr + (dpq + 2.0 * dq / q) * j.dr
                    + 2.0 * j.dt / q)
                    * p
                    - ll * j.val * p / (q * q);
                let null_o = (2.0 * j.dt * j.dr + dq * j.dr * j.dr) * p * p
                    + (j.val * dth_p).powi(2) / (q * q);
                let source = box_o - null_o;

                let omega = ct_omega(rho, params()).unwrap();
                let null_i = (-2.0 * chi.dt * chi.dr + d * chi.dr * chi.dr) * p * p
                    + (chi.val * dth_p).powi(2) / (rho * rho);
                let right = omega * null_i - (2.0 / M) * chi.dt * chi.val * p * p
                    + (2.0 * d / M) * chi.dr * chi.val * p * p
                    + d / (M * M * omega) * (chi.val * p).powi(2)
                    + source / omega.powi(3);
                let scale = left.abs().max(right.abs()).max(1.0);
                assert!(
                    (left - right).abs() <= 1e-11 * scale,
                    "l={l} rho={rho}: {left} vs {right}"
                );
            }
        }
    }

    #[test]
    fn residual_rejects_bad_test_fields() {
        let touching = Manufactured { center: 2.0, width: 1.5, ..test_field(0) };
        assert!(matches!(
            ct_conformal_residual(&touching, params(), 65),
            Err(CtError::SupportTouchesHorizon { .. })
        ));
        let unbounded = Manufactured {
            profile: RadialProfile::Gaussian,
            ..test_field(0)
        };
        assert!(matches!(
            ct_conformal_residual(&unbounded, params(), 65),
            Err(CtError::UnboundedProfile)
        ));
        let mode = test_field(1);
        assert!(matches!(
            ct_nullform_transform_residual(&mode, params(), 65),
            Err(CtError::AngularModeUnsupported)
        ));
    }

    #[test]
    fn zero_amplitude_field_has_zero_residuals() {
        let field = Manufactured { amplitude: 0.0, ..test_field(0) };
        assert_eq!(ct_conformal_residual(&field, params(), 65).unwrap(), 0.0);
        assert_eq!(ct_nullform_transform_residual(&field, params(), 65).unwrap(), 0.0);
    }
}
