//! Slice diagnostics: energy functionals, the conserved horizon charge and
//! its transversal-derivative trace, bulk (Morawetz) and Hardy monitors,
//! decay-rate fits, and the truncated initial-data energy.
//!
//! Everything here is a pure function of a field snapshot (or a series of
//! them); nothing mutates evolution state.

use crate::fields::{AngularBasis, FieldState, Grid};
use serde::Serialize;
use thiserror::Error;

/// Solid angle of the unit sphere.
const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagnosticsError {
    #[error("r^p weight exponent p = {0} outside [0, 2]")]
    BadExponent(f64),
    #[error("decay fit window [{lo}, {hi}] spans less than one decade in 1 + tau")]
    WindowTooShort { lo: f64, hi: f64 },
    #[error("decay fit needs at least 3 samples in the window, found {0}")]
    TooFewSamples(usize),
    #[error("decay fit requires positive values; found {value} at tau = {tau}")]
    NonPositiveValue { tau: f64, value: f64 },
    #[error("initial-energy truncation (K = {k}, L = {l}) exceeds the supported K <= 2, L <= 2")]
    BadTruncation { k: usize, l: usize },
    #[error("initial energy needs at least {need} equally spaced snapshots, got {got}")]
    InsufficientSnapshots { need: usize, got: usize },
}

/// Which energy current is integrated over the slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergyKind {
    /// Degenerate: the transversal term carries a D weight.
    T,
    /// Intermediate: sqrt(D) weight on the transversal term.
    P,
    /// Non-degenerate: unit weight on the transversal term.
    N,
}

/// Per-slice energy and monitor values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyRecord {
    pub t_star: f64,
    pub e_t: f64,
    pub e_p: f64,
    pub e_n: f64,
    /// r^p-weighted outgoing flux energies over r >= R0.
    pub rp1: f64,
    pub rp2: f64,
    /// dt x bulk integral accumulated since the previous record.
    pub morawetz_increment: f64,
    pub hardy_ratio: f64,
}

/// One horizon sample; the charge identity h0 = ypsi0 + psi0 / M holds
/// bitwise on every record because h0 is computed from the stored fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HorizonTrace {
    pub t_star: f64,
    /// Advanced time at the horizon node (t* + M for this foliation).
    pub v: f64,
    pub psi0: f64,
    pub tpsi0: f64,
    pub ypsi0: f64,
    pub y2psi0: f64,
    pub h0: f64,
}

/// Power-law fit of a positive series against (1 + tau).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub exponent: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
}

/// Trapezoid radial weights for integration against dr on the stretched grid.
fn radial_weights(grid: &Grid) -> Vec<f64> {
    let n = grid.n_r();
    let r = &grid.r;
    let mut w = vec![0.0; n];
    w[0] = 0.5 * (r[1] - r[0]);
    for i in 1..n - 1 {
        w[i] = 0.5 * (r[i + 1] - r[i - 1]);
    }
    w[n - 1] = 0.5 * (r[n - 1] - r[n - 2]);
    w
}

/// Integrates a pointwise density against r^2 dr domega.
/// The density is supplied per node as d(i_r, j_theta).
fn slice_integral(grid: &Grid, basis: &AngularBasis, density: impl Fn(usize, usize) -> f64) -> f64 {
    let wr = radial_weights(grid);
    let nt = grid.n_theta();
    let mut total = 0.0;
    for i in 0..grid.n_r() {
        let mut shell = 0.0;
        for j in 0..nt {
            shell += basis.w[j] * density(i, j);
        }
        // 2 pi * sum(w_j f_j) is the solid-angle integral of an
        // axisymmetric function; w sums to 2 so constants give 4 pi.
        total += wr[i] * grid.r[i] * grid.r[i] * std::f64::consts::PI * 2.0 * shell;
    }
    total
}

/// Squared angular gradient |slashed-nabla psi|^2 = (d_theta psi)^2 / r^2,
/// evaluated per node into `out`.
fn angular_gradient_sq(state: &FieldState, grid: &Grid, basis: &AngularBasis, out: &mut [f64]) {
    let nt = grid.n_theta();
    if nt == 1 {
        out.fill(0.0);
        return;
    }
    let mut shell = vec![0.0; nt];
    for i in 0..grid.n_r() {
        let row = &state.psi[i * nt..(i + 1) * nt];
        basis.dtheta_shell(row, &mut shell);
        let inv_r2 = 1.0 / (grid.r[i] * grid.r[i]);
        for j in 0..nt {
            out[i * nt + j] = shell[j] * shell[j] * inv_r2;
        }
    }
}

/// Slice energy with the requested transversal weight:
/// density = (T psi)^2 + W(D) (Y psi)^2 + |slashed-nabla psi|^2,
/// W = D, sqrt(D), 1 for kinds T, P, N.
pub fn energy_flux(state: &FieldState, grid: &Grid, basis: &AngularBasis, kind: EnergyKind) -> f64 {
    let nt = grid.n_theta();
    let mut ang = vec![0.0; state.len()];
    angular_gradient_sq(state, grid, basis, &mut ang);
    slice_integral(grid, basis, |i, j| {
        let idx = i * nt + j;
        let t = state.pi[idx];
        let y = state.phi_r[idx] - state.pi[idx];
        let w = match kind {
            EnergyKind::T => grid.d[i],
            EnergyKind::P => grid.sqrt_d[i],
            EnergyKind::N => 1.0,
        };
        t * t + w * y * y + ang[idx]
    })
}

/// r^p-weighted flux energy over the far region r >= R0:
/// integral of r^{p-2} (d_v phi)^2 dr domega with phi = r psi, so
/// d_v phi = r * T psi at fixed r.
pub fn rp_energy(
    state: &FieldState,
    grid: &Grid,
    basis: &AngularBasis,
    p: f64,
) -> Result<f64, DiagnosticsError> {
    if !(0.0..=2.0).contains(&p) {
        return Err(DiagnosticsError::BadExponent(p));
    }
    let r0 = grid.foliation.split_radius;
    let nt = grid.n_theta();
    let wr = radial_weights(grid);
    let mut total = 0.0;
    for i in 0..grid.n_r() {
        if grid.r[i] < r0 {
            continue;
        }
        let mut shell = 0.0;
        for j in 0..nt {
            let dv_phi = grid.r[i] * state.pi[i * nt + j];
            shell += basis.w[j] * dv_phi * dv_phi;
        }
        total += wr[i] * grid.r[i].powf(p - 2.0) * std::f64::consts::PI * 2.0 * shell;
    }
    Ok(total)
}

/// Smooth photon-sphere cutoff: zero on [2M - delta, 2M + delta] with
/// delta = M/4, rising to one outside twice that band.
fn photon_sphere_cutoff(r: f64, mass: f64) -> f64 {
    let delta = mass / 4.0;
    let dist = (r - 2.0 * mass).abs();
    crate::geometry::smooth_step((dist - delta) / delta)
}

/// One time-slab contribution dt x integral of the interior bulk density
///
/// ```text
///   chi(r) [ (T psi)^2 / r^{1+eta} + D^{5/2} (Y psi)^2 / r^{1+eta}
///            + sqrt(D) |slashed-nabla psi|^2 / r ]
/// ```
///
/// with eta = 0.1 and chi the photon-sphere cutoff. Used as a finiteness
/// monitor for the spacetime (Morawetz) estimate.
pub fn morawetz_increment(state: &FieldState, grid: &Grid, basis: &AngularBasis, dt: f64) -> f64 {
    const ETA: f64 = 0.1;
    let nt = grid.n_theta();
    let m = grid.params.mass;
    let mut ang = vec![0.0; state.len()];
    angular_gradient_sq(state, grid, basis, &mut ang);
    let bulk = slice_integral(grid, basis, |i, j| {
        let idx = i * nt + j;
        let r = grid.r[i];
        let chi = photon_sphere_cutoff(r, m);
        let t = state.pi[idx];
        let y = state.phi_r[idx] - state.pi[idx];
        let d = grid.d[i];
        chi * ((t * t) / r.powf(1.0 + ETA)
            + d * d * grid.sqrt_d[i] * (y * y) / r.powf(1.0 + ETA)
            + grid.sqrt_d[i] * ang[idx] / r)
    });
    dt * bulk
}

/// Hardy quotient (integral of psi^2 / r^2 dmu) / E_T; zero for a zero
/// slice by convention.
pub fn hardy_ratio(state: &FieldState, grid: &Grid, basis: &AngularBasis) -> f64 {
    let e_t = energy_flux(state, grid, basis, EnergyKind::T);
    if e_t == 0.0 {
        return 0.0;
    }
    let nt = grid.n_theta();
    // psi^2/r^2 against r^2 dr domega: the r factors cancel.
    let num = slice_integral(grid, basis, |i, j| {
        let v = state.psi[i * nt + j];
        v * v / (grid.r[i] * grid.r[i])
    });
    num / e_t
}

/// Horizon sample: spherical means at r = M, with the transversal
/// derivative read from the evolved radial-derivative field
/// (Y psi = Phi - Pi, i.e. d_r at fixed t* minus T).
///
/// Reading Phi rather than re-differentiating psi keeps the charge exactly
/// conserved in the semi-discrete system: the horizon node carries no
/// dissipation, so d/dt (Phi - Pi + psi/M) at node 0 reduces to the same
/// identity the interior update satisfies, independent of what the filter
/// does further out.
///
/// The second transversal derivative needs T(Y psi) at the horizon; that
/// is eliminated with the horizon-restricted field equation for the
/// spherical mean, T(Y psi_0) = -T psi_0 / M, which holds exactly at
/// r = M where both D and the nonlinearity degenerate.
pub fn horizon_trace(state: &FieldState, grid: &Grid, basis: &AngularBasis) -> HorizonTrace {
    let n = grid.n_r();
    let nt = grid.n_theta();
    let m = grid.params.mass;
    debug_assert_eq!(grid.r[0], m, "first node must sit exactly on the horizon");

    let mut psi0 = vec![0.0; n];
    let mut pi0 = vec![0.0; n];
    let mut ypsi_profile = vec![0.0; n];
    for i in 0..n {
        psi0[i] = crate::fields::spherical_mean(basis, &state.psi[i * nt..(i + 1) * nt]);
        pi0[i] = crate::fields::spherical_mean(basis, &state.pi[i * nt..(i + 1) * nt]);
        ypsi_profile[i] =
            crate::fields::spherical_mean(basis, &state.phi_r[i * nt..(i + 1) * nt]) - pi0[i];
    }
    let dy = grid.deriv_r_profile(&ypsi_profile);

    let psi0_h = psi0[0];
    let ypsi0 = ypsi_profile[0];
    let y2psi0 = dy[0] + pi0[0] / m;
    HorizonTrace {
        t_star: state.time,
        v: state.time + m,
        psi0: psi0_h,
        tpsi0: pi0[0],
        ypsi0,
        y2psi0,
        h0: ypsi0 + psi0_h / m,
    }
}

/// Least-squares power-law fit log(value) = exponent * log(1 + tau) + b
/// over the window; the window must span at least a decade in 1 + tau.
pub fn decay_fit(
    times: &[f64],
    values: &[f64],
    window: (f64, f64),
) -> Result<RateFit, DiagnosticsError> {
    let (lo, hi) = window;
    if (1.0 + hi) < 10.0 * (1.0 + lo) {
        return Err(DiagnosticsError::WindowTooShort { lo, hi });
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&t, &v) in times.iter().zip(values) {
        if t < lo || t > hi {
            continue;
        }
        if !(v > 0.0) {
            return Err(DiagnosticsError::NonPositiveValue { tau: t, value: v });
        }
        xs.push((1.0 + t).ln());
        ys.push(v.ln());
    }
    if xs.len() < 3 {
        return Err(DiagnosticsError::TooFewSamples(xs.len()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let e = y - (slope * x + intercept);
            e * e
        })
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(RateFit { exponent: slope, intercept, r_squared, window })
}

/// Summary of the horizon-instability phenomenology extracted from a
/// completed run's trace series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InstabilityReport {
    /// Positivity hypotheses on the data: mean and transversal derivative
    /// at the horizon both positive at t* = 0.
    pub hypotheses_met: bool,
    pub h0_initial: f64,
    pub h0_final: f64,
    /// |Y psi_0 - H_0| / |H_0| on the final record (0 if H_0 = 0).
    pub ypsi_gap_rel: f64,
    /// Linear fit of Y^2 psi_0 against v over the final half of the run.
    pub y2_slope: f64,
    pub y2_intercept: f64,
    pub y2_r_squared: f64,
    /// True when the fitted slope and H_0 have opposite signs (growth
    /// direction matches the conserved charge).
    pub slope_opposes_h0: bool,
}

/// Builds the instability summary; degenerate (all-zero) input yields a
/// zero report with hypotheses unmet.
pub fn instability_report(series: &[HorizonTrace]) -> InstabilityReport {
    if series.is_empty() {
        return InstabilityReport {
            hypotheses_met: false,
            h0_initial: 0.0,
            h0_final: 0.0,
            ypsi_gap_rel: 0.0,
            y2_slope: 0.0,
            y2_intercept: 0.0,
            y2_r_squared: 0.0,
            slope_opposes_h0: false,
        };
    }
    let first = series[0];
    let last = series[series.len() - 1];
    let hypotheses_met = first.psi0 > 0.0 && first.ypsi0 > 0.0;
    let ypsi_gap_rel =
        if last.h0 != 0.0 { ((last.ypsi0 - last.h0) / last.h0).abs() } else { 0.0 };

    // Plain linear regression of y2psi0 on v over the final half.
    let v_mid = 0.5 * (first.v + last.v);
    let pts: Vec<(f64, f64)> =
        series.iter().filter(|s| s.v >= v_mid).map(|s| (s.v, s.y2psi0)).collect();
    let (slope, intercept, r2) = linear_fit(&pts);
    InstabilityReport {
        hypotheses_met,
        h0_initial: first.h0,
        h0_final: last.h0,
        ypsi_gap_rel,
        y2_slope: slope,
        y2_intercept: intercept,
        y2_r_squared: r2,
        slope_opposes_h0: slope * last.h0 < 0.0,
    }
}

fn linear_fit(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    if pts.len() < 2 {
        return (0.0, 0.0, 0.0);
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (x, y) in pts {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 {
        return (0.0, my, 0.0);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pts
        .iter()
        .map(|(x, y)| {
            let e = y - (slope * x + intercept);
            e * e
        })
        .sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    (slope, intercept, r2)
}

/// Truncated initial-data energy from a short stack of equally spaced
/// early-run snapshots (time derivatives by centered differencing).
///
/// For each spherical-harmonic index k <= K and time-derivative order
/// l <= L it sums, with the mode normalization 4 pi / (2k + 1),
///
/// * the inner-slice (r <= R0) energy of T^l psi_k and of T^l Y psi_k:
///   (T f)^2 + (Y f)^2 + k(k+1) f^2 / r^2 against r^2 dr,
/// * the far-field (r >= R0) top-weight flux integral of (r T^{l+1} psi_k)^2
///   against dr (the p = 2 member of the r^p hierarchy).
pub fn initial_energy_e0(
    snapshots: &[&FieldState],
    dt_snap: f64,
    grid: &Grid,
    basis: &AngularBasis,
    k_max: usize,
    l_max: usize,
) -> Result<f64, DiagnosticsError> {
    if k_max > 2 || l_max > 2 {
        return Err(DiagnosticsError::BadTruncation { k: k_max, l: l_max });
    }
    let need = (2 * l_max + 1).max(5);
    if snapshots.len() < need {
        return Err(DiagnosticsError::InsufficientSnapshots { need, got: snapshots.len() });
    }
    let n = grid.n_r();
    let nt = grid.n_theta();
    let mid = snapshots.len() / 2;
    let r0 = grid.foliation.split_radius;
    let wr = radial_weights(grid);
    let m5 = [mid - 2, mid - 1, mid, mid + 1, mid + 2];

    // Mode-projected radial profiles, per snapshot: psi_k, pi_k, ypsi_k.
    let k_count = (k_max + 1).min(nt);
    let project = |s: &FieldState, arr: &dyn Fn(&FieldState) -> &Vec<f64>| -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; n]; k_count];
        let src = arr(s);
        for i in 0..n {
            let modes = basis.project(&src[i * nt..(i + 1) * nt]);
            for (k, row) in out.iter_mut().enumerate() {
                row[i] = modes.coeffs[k];
            }
        }
        out
    };

    let psi_k: Vec<Vec<Vec<f64>>> = m5
        .iter()
        .map(|&s| project(snapshots[s], &|st: &FieldState| &st.psi))
        .collect();
    let pi_k: Vec<Vec<Vec<f64>>> =
        m5.iter().map(|&s| project(snapshots[s], &|st: &FieldState| &st.pi)).collect();
    let ypsi_k: Vec<Vec<Vec<f64>>> = m5
        .iter()
        .map(|&s| {
            let snap = snapshots[s];
            let mut out = vec![vec![0.0; n]; k_count];
            for i in 0..n {
                let mut shell = vec![0.0; nt];
                for j in 0..nt {
                    let idx = i * nt + j;
                    shell[j] = snap.phi_r[idx] - snap.pi[idx];
                }
                let modes = basis.project(&shell);
                for (k, row) in out.iter_mut().enumerate() {
                    row[i] = modes.coeffs[k];
                }
            }
            out
        })
        .collect();

    // Centered five-point time-derivative weights for orders 0..=3.
    let h = dt_snap;
    let tw: [[f64; 5]; 4] = [
        [0.0, 0.0, 1.0, 0.0, 0.0],
        [1.0 / (12.0 * h), -8.0 / (12.0 * h), 0.0, 8.0 / (12.0 * h), -1.0 / (12.0 * h)],
        [
            -1.0 / (12.0 * h * h),
            16.0 / (12.0 * h * h),
            -30.0 / (12.0 * h * h),
            16.0 / (12.0 * h * h),
            -1.0 / (12.0 * h * h),
        ],
        [
            -1.0 / (2.0 * h * h * h),
            2.0 / (2.0 * h * h * h),
            0.0,
            -2.0 / (2.0 * h * h * h),
            1.0 / (2.0 * h * h * h),
        ],
    ];
    let tdiff = |stack: &[Vec<Vec<f64>>], k: usize, order: usize| -> Vec<f64> {
        let w = &tw[order];
        let mut out = vec![0.0; n];
        for (s, &ws) in w.iter().enumerate() {
            if ws == 0.0 {
                continue;
            }
            for i in 0..n {
                out[i] += ws * stack[s][k][i];
            }
        }
        out
    };

    let mut total = 0.0;
    for k in 0..k_count {
        let nk = FOUR_PI / (2.0 * k as f64 + 1.0);
        let kk = (k * (k + 1)) as f64;
        for l in 0..=l_max {
            // f = T^l psi_k: Tf from pi snapshots, Yf = d_r f - Tf.
            let f = tdiff(&psi_k, k, l);
            let tf = tdiff(&pi_k, k, l);
            let df = grid.deriv_r_profile(&f);

            // g = T^l Y psi_k: Tg by order l+1 differencing of ypsi.
            let g = tdiff(&ypsi_k, k, l);
            let tg = tdiff(&ypsi_k, k, l + 1);
            let dg = grid.deriv_r_profile(&g);

            let mut inner = 0.0;
            let mut far = 0.0;
            for i in 0..n {
                let r = grid.r[i];
                let r2 = r * r;
                if r <= r0 {
                    let yf = df[i] - tf[i];
                    let yg = dg[i] - tg[i];
                    inner += wr[i]
                        * r2
                        * ((tf[i] * tf[i] + yf * yf + kk * f[i] * f[i] / r2)
                            + (tg[i] * tg[i] + yg * yg + kk * g[i] * g[i] / r2));
                } else {
                    let dv_phi = r * tf[i];
                    far += wr[i] * dv_phi * dv_phi;
                }
            }
            total += nk * (inner + far);
        }
    }
    Ok(total)
}
