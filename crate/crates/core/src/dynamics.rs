//! Evolution core: the wave operator in horizon-penetrating slice
//! coordinates, the degenerate null-form nonlinearity, classical RK4
//! time stepping, and breakdown monitoring.
//!
//! Coordinates: slices of constant t* = v - r, radial coordinate r.
//! With Pi = T psi (slice time translation) and Phi = d psi/dr on the
//! slice, the transversal (ingoing-chart) derivative is Y psi = Phi - Pi
//! and the equation box(psi) = F becomes
//!
//! ```text
//!   (D-2) dPi/dt* = F + S - (2-2D) d_r Pi - D d_r Phi - (2/r) Pi
//!                   - (D' + 2D/r)(Phi - Pi) - lap(psi)/r^2
//! ```
//!
//! The coefficient D - 2 <= -1 on r >= M, so the solve never degenerates.
//! Characteristic speeds in (t*, r) are -1 (ingoing) and D/(2-D)
//! (outgoing); the latter vanishes at r = M, making the horizon a pure
//! outflow boundary that needs no boundary condition. At r_max a
//! Sommerfeld condition on phi = r psi closes the domain.

use crate::diagnostics::{
    energy_flux, hardy_ratio, horizon_trace, morawetz_increment, rp_energy, EnergyKind,
    EnergyRecord, HorizonTrace,
};
use crate::fields::{AngularBasis, FieldState, Grid};
use serde::Serialize;
use thiserror::Error;

/// Nonlinearity coefficient A(psi); every variant is uniformly bounded.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Coupling {
    /// A(psi) = value. Zero switches the nonlinearity off entirely.
    Constant { value: f64 },
    /// A(psi) = bound * tanh(psi): smooth, |A| < bound, A(0) = 0.
    TanhBounded { bound: f64 },
    /// Piecewise-linear user table, clamped outside the sample range.
    Table { psi: Vec<f64>, values: Vec<f64> },
}

impl Coupling {
    pub fn eval(&self, psi: f64) -> f64 {
        match self {
            Coupling::Constant { value } => *value,
            Coupling::TanhBounded { bound } => bound * psi.tanh(),
            Coupling::Table { psi: xs, values } => {
                if psi <= xs[0] {
                    return values[0];
                }
                if psi >= xs[xs.len() - 1] {
                    return values[values.len() - 1];
                }
                // xs is validated strictly increasing.
                let k = xs.partition_point(|&x| x <= psi) - 1;
                let t = (psi - xs[k]) / (xs[k + 1] - xs[k]);
                values[k] + t * (values[k + 1] - values[k])
            }
        }
    }

    /// Uniform bound a0 on |A|.
    pub fn bound(&self) -> f64 {
        match self {
            Coupling::Constant { value } => value.abs(),
            Coupling::TanhBounded { bound } => bound.abs(),
            Coupling::Table { values, .. } => values.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        }
    }

    fn is_identically_zero(&self) -> bool {
        match self {
            Coupling::Constant { value } => *value == 0.0,
            Coupling::TanhBounded { bound } => *bound == 0.0,
            Coupling::Table { values, .. } => values.iter().all(|&v| v == 0.0),
        }
    }

    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        match self {
            Coupling::Constant { value } => {
                if !value.is_finite() {
                    errs.push(format!("coupling constant a0 = {value} is not finite"));
                }
            }
            Coupling::TanhBounded { bound } => {
                if !(bound.is_finite() && *bound >= 0.0) {
                    errs.push(format!("tanh coupling bound a0 = {bound} must be finite and >= 0"));
                }
            }
            Coupling::Table { psi, values } => {
                if psi.len() < 2 {
                    errs.push("coupling table needs at least 2 samples".into());
                }
                if psi.len() != values.len() {
                    errs.push(format!(
                        "coupling table lengths differ: {} psi values vs {} A values",
                        psi.len(),
                        values.len()
                    ));
                }
                if psi.windows(2).any(|w| !(w[1] > w[0])) {
                    errs.push("coupling table psi samples must be strictly increasing".into());
                }
                if psi.iter().chain(values).any(|v| !v.is_finite()) {
                    errs.push("coupling table contains non-finite entries".into());
                }
            }
        }
        errs
    }
}

/// Deliberate corruption of a run, for exercising the breakdown and
/// numerical-failure exits from tests. Inactive unless configured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FaultSpec {
    /// At the first slice with t* >= spike_time, multiply Pi by spike_factor.
    pub spike_time: Option<f64>,
    pub spike_factor: f64,
    /// At the first slice with t* >= nan_time, write a NaN into psi.
    pub nan_time: Option<f64>,
}

/// Time integration and nonlinearity parameters for one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvolutionConfig {
    /// Time step = cfl * min node spacing (unit maximum wave speed).
    pub cfl: f64,
    /// Kreiss-Oliger strength sigma.
    pub dissipation: f64,
    /// Data amplitude epsilon.
    pub amplitude: f64,
    pub coupling: Coupling,
    pub t_star_end: f64,
    /// Spacing of diagnostic records and snapshots, in t* units.
    pub output_interval: f64,
    pub fault: Option<FaultSpec>,
}

impl EvolutionConfig {
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if !(self.cfl > 0.0 && self.cfl <= 0.5) {
            errs.push(format!("cfl = {} outside (0, 0.5]", self.cfl));
        }
        if !(self.dissipation >= 0.0 && self.dissipation <= 0.5) {
            errs.push(format!("dissipation = {} outside [0, 0.5]", self.dissipation));
        }
        if !(self.amplitude.is_finite() && self.amplitude >= 0.0) {
            errs.push(format!("amplitude = {} must be finite and >= 0", self.amplitude));
        }
        if !(self.t_star_end.is_finite() && self.t_star_end > 0.0) {
            errs.push(format!("t_star_end = {} must be finite and > 0", self.t_star_end));
        }
        if !(self.output_interval.is_finite() && self.output_interval > 0.0) {
            errs.push(format!(
                "output_interval = {} must be finite and > 0",
                self.output_interval
            ));
        }
        errs.extend(self.coupling.validate());
        if let Some(f) = &self.fault {
            if f.spike_time.is_some() && !f.spike_factor.is_finite() {
                errs.push(format!("fault spike_factor = {} is not finite", f.spike_factor));
            }
        }
        errs
    }
}

/// One spherical-harmonic component of a bump-profile family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeProfile {
    pub l: usize,
    pub center: f64,
    pub width: f64,
    pub amplitude: f64,
}

/// Initial data (psi, T psi) = (eps * f, eps * g) on the t* = 0 slice.
///
/// Each profile is a sum of C-infinity bumps amp * B((r - c)/w) * P_l.
/// Support may reach or cross the horizon (the horizon is an outflow
/// boundary, and horizon-supported data is exactly the regime where the
/// horizon-charge diagnostics are nontrivial); it must stay clear of the
/// outer boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct InitialData {
    pub psi_modes: Vec<ModeProfile>,
    pub pi_modes: Vec<ModeProfile>,
}

/// C-infinity bump: exp(1 - 1/(1 - x^2)) on |x| < 1, zero outside.
pub fn bump(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - x * x)).exp()
    }
}

/// Derivative of `bump`.
pub fn bump_deriv(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        0.0
    } else {
        let u = 1.0 - x * x;
        bump(x) * (-2.0 * x / (u * u))
    }
}

impl InitialData {
    pub fn validate(&self, grid: &Grid) -> Vec<String> {
        let mut errs = Vec::new();
        for (name, modes) in [("psi", &self.psi_modes), ("pi", &self.pi_modes)] {
            for (k, m) in modes.iter().enumerate() {
                if m.l >= grid.n_theta() {
                    errs.push(format!(
                        "{name} mode {k}: l = {} is not representable with n_theta = {}",
                        m.l,
                        grid.n_theta()
                    ));
                }
                if !(m.width.is_finite() && m.width > 0.0) {
                    errs.push(format!("{name} mode {k}: width = {} must be > 0", m.width));
                }
                if !m.center.is_finite() || !m.amplitude.is_finite() {
                    errs.push(format!("{name} mode {k}: non-finite center or amplitude"));
                }
                if m.center + m.width >= grid.spec.r_max {
                    errs.push(format!(
                        "{name} mode {k}: support reaches the outer boundary \
                         (center {} + width {} >= r_max {})",
                        m.center, m.width, grid.spec.r_max
                    ));
                }
            }
        }
        errs
    }

    /// Samples the data on the grid; Phi is the analytic radial derivative.
    pub fn realize(&self, grid: &Grid, basis: &AngularBasis, amplitude: f64) -> FieldState {
        let mut state = FieldState::zeros(grid);
        let nt = grid.n_theta();
        for m in &self.psi_modes {
            for i in 0..grid.n_r() {
                let x = (grid.r[i] - m.center) / m.width;
                let b = bump(x);
                let db = bump_deriv(x) / m.width;
                if b == 0.0 && db == 0.0 {
                    continue;
                }
                for j in 0..nt {
                    let pl = crate::fields::legendre_p(m.l, basis.x[j]);
                    state.psi[i * nt + j] += amplitude * m.amplitude * b * pl;
                    state.phi_r[i * nt + j] += amplitude * m.amplitude * db * pl;
                }
            }
        }
        for m in &self.pi_modes {
            for i in 0..grid.n_r() {
                let b = bump((grid.r[i] - m.center) / m.width);
                if b == 0.0 {
                    continue;
                }
                for j in 0..nt {
                    let pl = crate::fields::legendre_p(m.l, basis.x[j]);
                    state.pi[i * nt + j] += amplitude * m.amplitude * b * pl;
                }
            }
        }
        state
    }
}

/// Which sup norm the breakdown criterion tripped on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MonitoredNorm {
    /// sup |T psi|
    TimeDerivative,
    /// sup |sqrt(D) Y psi| (the weight degenerates at the horizon by design)
    WeightedTransversal,
    /// sup |slashed-nabla psi|
    AngularGradient,
}

impl std::fmt::Display for MonitoredNorm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MonitoredNorm::TimeDerivative => write!(f, "sup|T psi|"),
            MonitoredNorm::WeightedTransversal => write!(f, "sup|sqrt(D) Y psi|"),
            MonitoredNorm::AngularGradient => write!(f, "sup|slashed-nabla psi|"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BreakdownReport {
    pub t_star: f64,
    pub norm: MonitoredNorm,
    pub value: f64,
    pub threshold: f64,
}

/// Sup norms of the monitored quantities (plus sup |psi| for records).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct SliceNorms {
    pub psi: f64,
    pub t_psi: f64,
    pub weighted_y: f64,
    pub angular: f64,
}

/// Breakdown thresholds; a run breaks down when a monitored norm strictly
/// exceeds its threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    pub t_psi: f64,
    pub weighted_y: f64,
    pub angular: f64,
}

impl Thresholds {
    /// 10^3 times the common initial scale (the largest of the three
    /// monitored norms at t* = 0). A single shared scale keeps quantities
    /// that start at exactly zero from tripping the check the moment they
    /// become dynamically nonzero. All-zero data gives zero thresholds,
    /// which an identically zero run never strictly exceeds.
    pub fn from_initial(norms: &SliceNorms) -> Self {
        let scale = 1e3 * norms.t_psi.max(norms.weighted_y).max(norms.angular);
        Self { t_psi: scale, weighted_y: scale, angular: scale }
    }
}

/// Reusable buffers for norm evaluation (no per-step allocation).
#[derive(Debug, Default)]
pub struct NormScratch {
    shell: Vec<f64>,
}

/// Sup norms over the slice.
pub fn slice_norms(
    state: &FieldState,
    grid: &Grid,
    basis: &AngularBasis,
    scratch: &mut NormScratch,
) -> SliceNorms {
    let nt = grid.n_theta();
    let mut out = SliceNorms::default();
    for (i, _) in grid.r.iter().enumerate() {
        let sd = grid.sqrt_d[i];
        for j in 0..nt {
            let idx = i * nt + j;
            out.psi = out.psi.max(state.psi[idx].abs());
            out.t_psi = out.t_psi.max(state.pi[idx].abs());
            out.weighted_y = out.weighted_y.max((sd * (state.phi_r[idx] - state.pi[idx])).abs());
        }
    }
    if nt > 1 {
        scratch.shell.resize(nt, 0.0);
        for i in 0..grid.n_r() {
            basis.dtheta_shell(&state.psi[i * nt..(i + 1) * nt], &mut scratch.shell);
            for v in &scratch.shell {
                out.angular = out.angular.max(v.abs() / grid.r[i]);
            }
        }
    }
    out
}

/// First monitored norm (in the order T psi, sqrt(D) Y psi, angular) that
/// strictly exceeds its threshold.
pub fn breakdown_check(
    state: &FieldState,
    grid: &Grid,
    basis: &AngularBasis,
    thresholds: &Thresholds,
    scratch: &mut NormScratch,
) -> Option<BreakdownReport> {
    let norms = slice_norms(state, grid, basis, scratch);
    let checks = [
        (MonitoredNorm::TimeDerivative, norms.t_psi, thresholds.t_psi),
        (MonitoredNorm::WeightedTransversal, norms.weighted_y, thresholds.weighted_y),
        (MonitoredNorm::AngularGradient, norms.angular, thresholds.angular),
    ];
    for (norm, value, threshold) in checks {
        if value > threshold {
            return Some(BreakdownReport { t_star: state.time, norm, value, threshold });
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("invalid evolution configuration:\n{}", .0.join("\n"))]
    BadConfig(Vec<String>),
    #[error("non-finite field values at t* = {t_star} ({detail})")]
    NumericalFailure { t_star: f64, detail: String },
}

/// Optional manufactured source S(t*, r, cos theta) added to the equation.
pub type SourceFn<'a> = &'a dyn Fn(f64, f64, f64) -> f64;

/// Scratch buffers for one right-hand-side evaluation.
#[derive(Debug, Default)]
pub struct RhsScratch {
    d_pi: Vec<f64>,
    d_phi: Vec<f64>,
    lap: Vec<f64>,
    dth: Vec<f64>,
    shell: Vec<f64>,
}

impl RhsScratch {
    fn prepare(&mut self, len: usize, nt: usize) {
        self.d_pi.resize(len, 0.0);
        self.d_phi.resize(len, 0.0);
        self.lap.resize(len, 0.0);
        self.dth.resize(len, 0.0);
        self.shell.resize(nt, 0.0);
    }
}

/// Right-hand side of the first-order system. `out` receives
/// (d psi/dt*, d Pi/dt*, d Phi/dt*); `out.time` is left untouched.
pub fn rhs_into(
    state: &FieldState,
    grid: &Grid,
    basis: &AngularBasis,
    coupling: &Coupling,
    source: Option<SourceFn>,
    dissipation: f64,
    out: &mut FieldState,
    ws: &mut RhsScratch,
) {
    let n = grid.n_r();
    let nt = grid.n_theta();
    let len = n * nt;
    debug_assert_eq!(state.len(), len);
    ws.prepare(len, nt);

    grid.deriv_r_into(&state.pi, &mut ws.d_pi);
    grid.deriv_r_into(&state.phi_r, &mut ws.d_phi);
    if nt > 1 {
        for i in 0..n {
            let row = &state.psi[i * nt..(i + 1) * nt];
            basis.laplacian_shell(row, &mut ws.shell);
            ws.lap[i * nt..(i + 1) * nt].copy_from_slice(&ws.shell);
            basis.dtheta_shell(row, &mut ws.shell);
            ws.dth[i * nt..(i + 1) * nt].copy_from_slice(&ws.shell);
        }
    } else {
        ws.lap.fill(0.0);
        ws.dth.fill(0.0);
    }

    let nonlinear = !coupling.is_identically_zero();
    let t = state.time;
    for i in 0..n {
        let r = grid.r[i];
        let d = grid.d[i];
        let dp = grid.dp[i];
        let sd = grid.sqrt_d[i];
        let inv_r2 = 1.0 / (r * r);
        let denom = d - 2.0;
        for j in 0..nt {
            let idx = i * nt + j;
            let pi = state.pi[idx];
            let y = state.phi_r[idx] - pi;
            let mut forcing = 0.0;
            if nonlinear {
                let ang2 = ws.dth[idx] * ws.dth[idx] * inv_r2;
                forcing += sd
                    * coupling.eval(state.psi[idx])
                    * (2.0 * pi * y + d * y * y + ang2);
            }
            if let Some(src) = source {
                forcing += src(t, r, basis.x[j]);
            }
            let num = forcing
                - (2.0 - 2.0 * d) * ws.d_pi[idx]
                - d * ws.d_phi[idx]
                - (2.0 / r) * pi
                - (dp + 2.0 * d / r) * y
                - ws.lap[idx] * inv_r2;
            out.psi[idx] = pi;
            out.pi[idx] = num / denom;
            out.phi_r[idx] = ws.d_pi[idx];
        }
    }

    // Sommerfeld closure at r_max: d/dt* of (r Pi + D (psi + r Phi)) = 0,
    // i.e. Pi evolves so the outgoing-radiation condition on phi = r psi
    // is preserved once satisfied.
    {
        let i = n - 1;
        let r = grid.r[i];
        let d = grid.d[i];
        for j in 0..nt {
            let idx = i * nt + j;
            out.pi[idx] = -d * (state.pi[idx] / r + ws.d_pi[idx]);
        }
    }

    if dissipation > 0.0 {
        // All three evolved fields are damped. psi has no spatial derivatives
        // in its own equation, so grid-scale residue deposited in psi (e.g.
        // where a marginally resolved pulse crosses the mesh-density seam)
        // would otherwise be invisible to the l = 0 dynamics and sit frozen.
        grid.add_dissipation_into(&state.psi, dissipation, &mut out.psi);
        grid.add_dissipation_into(&state.pi, dissipation, &mut out.pi);
        grid.add_dissipation_into(&state.phi_r, dissipation, &mut out.phi_r);
    }
}

/// The d'Alembertian evaluated on a slice snapshot, given the second time
/// derivative of psi (`pi_dot`). Used by verification tests; the evolution
/// solves this expression for `pi_dot` instead of evaluating it.
pub fn wave_operator(
    state: &FieldState,
    pi_dot: &[f64],
    grid: &Grid,
    basis: &AngularBasis,
) -> Vec<f64> {
    let n = grid.n_r();
    let nt = grid.n_theta();
    let mut ws = RhsScratch::default();
    ws.prepare(n * nt, nt);
    grid.deriv_r_into(&state.pi, &mut ws.d_pi);
    grid.deriv_r_into(&state.phi_r, &mut ws.d_phi);
    if nt > 1 {
        for i in 0..n {
            let row = &state.psi[i * nt..(i + 1) * nt];
            basis.laplacian_shell(row, &mut ws.shell);
            ws.lap[i * nt..(i + 1) * nt].copy_from_slice(&ws.shell);
        }
    }
    let mut out = vec![0.0; n * nt];
    for i in 0..n {
        let r = grid.r[i];
        let d = grid.d[i];
        let dp = grid.dp[i];
        for j in 0..nt {
            let idx = i * nt + j;
            let pi = state.pi[idx];
            let y = state.phi_r[idx] - pi;
            out[idx] = (d - 2.0) * pi_dot[idx]
                + (2.0 - 2.0 * d) * ws.d_pi[idx]
                + d * ws.d_phi[idx]
                + (2.0 / r) * pi
                + (dp + 2.0 * d / r) * y
                + ws.lap[idx] / (r * r);
        }
    }
    out
}

/// The null-form right side F = sqrt(D) A(psi) (2 T psi Y psi
/// + D (Y psi)^2 + |slashed-nabla psi|^2), pointwise over the slice.
pub fn null_form(
    state: &FieldState,
    grid: &Grid,
    basis: &AngularBasis,
    coupling: &Coupling,
) -> Vec<f64> {
    let n = grid.n_r();
    let nt = grid.n_theta();
    let mut dth = vec![0.0; n * nt];
    if nt > 1 {
        let mut shell = vec![0.0; nt];
        for i in 0..n {
            basis.dtheta_shell(&state.psi[i * nt..(i + 1) * nt], &mut shell);
            dth[i * nt..(i + 1) * nt].copy_from_slice(&shell);
        }
    }
    let mut out = vec![0.0; n * nt];
    for i in 0..n {
        let r = grid.r[i];
        let d = grid.d[i];
        let sd = grid.sqrt_d[i];
        for j in 0..nt {
            let idx = i * nt + j;
            let pi = state.pi[idx];
            let y = state.phi_r[idx] - pi;
            let ang2 = dth[idx] * dth[idx] / (r * r);
            out[idx] =
                sd * coupling.eval(state.psi[idx]) * (2.0 * pi * y + d * y * y + ang2);
        }
    }
    out
}

/// Characteristic speeds dr/dt* of the radial principal part: the ingoing
/// speed is exactly -1 everywhere; the outgoing speed D/(2-D) vanishes at
/// the horizon.
pub fn characteristic_speeds(d: f64) -> (f64, f64) {
    (-1.0, d / (2.0 - d))
}

/// Sup norm of the first-order reduction constraint Phi - d_r psi.
/// Largest stable RK4 step for the given grid and dissipation strength.
///
/// Two bounds apply: the advective CFL bound cfl * min_dr (characteristic
/// speeds never exceed 1 in magnitude), and the dissipation bound. The
/// seven-point filter acts in map space with worst-case eigenvalue
/// -sigma / dxi at the grid Nyquist mode, and RK4 tolerates real eigenvalues
/// only down to about -2.79 dt; 2.0 leaves margin for the advective part.
pub fn stable_dt(grid: &Grid, cfl: f64, dissipation: f64) -> f64 {
    let advective = cfl * grid.min_dr;
    if dissipation <= 0.0 {
        return advective;
    }
    advective.min(2.0 * grid.dxi / dissipation)
}

pub fn constraint_violation(state: &FieldState, grid: &Grid) -> f64 {
    let n = grid.n_r();
    let nt = grid.n_theta();
    let mut dpsi = vec![0.0; n * nt];
    grid.deriv_r_into(&state.psi, &mut dpsi);
    state
        .phi_r
        .iter()
        .zip(&dpsi)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max)
}

/// Buffers for one RK4 step.
#[derive(Debug, Default)]
pub struct StepScratch {
    k1: FieldState,
    k2: FieldState,
    k3: FieldState,
    k4: FieldState,
    ytmp: FieldState,
    rhs_ws: RhsScratch,
}

impl StepScratch {
    fn prepare(&mut self, template: &FieldState) {
        for k in [&mut self.k1, &mut self.k2, &mut self.k3, &mut self.k4, &mut self.ytmp] {
            if k.len() != template.len() {
                *k = template.clone();
            }
        }
    }
}

/// One classical RK4 step of size dt, in place. Fails (without modifying
/// guarantees on `state`) if the result is not finite.
pub fn step(
    state: &mut FieldState,
    dt: f64,
    grid: &Grid,
    basis: &AngularBasis,
    coupling: &Coupling,
    source: Option<SourceFn>,
    dissipation: f64,
    scratch: &mut StepScratch,
) -> Result<(), DynamicsError> {
    scratch.prepare(state);
    let t0 = state.time;
    let StepScratch { k1, k2, k3, k4, ytmp, rhs_ws } = scratch;

    rhs_into(state, grid, basis, coupling, source, dissipation, k1, rhs_ws);

    ytmp.clone_from(state);
    ytmp.axpy(0.5 * dt, k1);
    ytmp.time = t0 + 0.5 * dt;
    rhs_into(ytmp, grid, basis, coupling, source, dissipation, k2, rhs_ws);

    ytmp.clone_from(state);
    ytmp.axpy(0.5 * dt, k2);
    ytmp.time = t0 + 0.5 * dt;
    rhs_into(ytmp, grid, basis, coupling, source, dissipation, k3, rhs_ws);

    ytmp.clone_from(state);
    ytmp.axpy(dt, k3);
    ytmp.time = t0 + dt;
    rhs_into(ytmp, grid, basis, coupling, source, dissipation, k4, rhs_ws);

    state.axpy(dt / 6.0, k1);
    state.axpy(dt / 3.0, k2);
    state.axpy(dt / 3.0, k3);
    state.axpy(dt / 6.0, k4);
    state.time = t0 + dt;

    let m = state.max_abs();
    if !m.is_finite() {
        return Err(DynamicsError::NumericalFailure {
            t_star: state.time,
            detail: format!("max |field| = {m} after step"),
        });
    }
    Ok(())
}

/// Per-slice norm record emitted at the output cadence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormRecord {
    pub t_star: f64,
    pub norms: SliceNorms,
}

/// Everything a completed (or stopped) run produces.
#[derive(Debug)]
pub struct RunArtifacts {
    pub horizon: Vec<HorizonTrace>,
    pub energy: Vec<EnergyRecord>,
    pub norms: Vec<NormRecord>,
    pub breakdown: Option<BreakdownReport>,
    pub final_state: FieldState,
    pub dt: f64,
    pub steps: u64,
}

/// Integrates the configured system from `init` to t_star_end, or until
/// breakdown. Diagnostic records are taken every `output_interval` of t*
/// (and at the first and last slice); `snapshot_sink`, when given, receives
/// the full state at the same cadence.
pub fn evolve(
    grid: &Grid,
    basis: &AngularBasis,
    cfg: &EvolutionConfig,
    init: FieldState,
    mut snapshot_sink: Option<&mut dyn FnMut(&FieldState)>,
) -> Result<RunArtifacts, DynamicsError> {
    let problems = cfg.validate();
    if !problems.is_empty() {
        return Err(DynamicsError::BadConfig(problems));
    }

    let dt_max = stable_dt(grid, cfg.cfl, cfg.dissipation);
    let n_steps = (cfg.t_star_end / dt_max).ceil().max(1.0) as u64;
    let dt = cfg.t_star_end / n_steps as f64;
    let cadence = ((cfg.output_interval / dt).round() as u64).max(1);

    let mut state = init;
    state.time = 0.0;
    let mut norm_scratch = NormScratch::default();
    let mut step_scratch = StepScratch::default();
    let initial_norms = slice_norms(&state, grid, basis, &mut norm_scratch);
    let thresholds = Thresholds::from_initial(&initial_norms);

    let mut horizon = Vec::new();
    let mut energy = Vec::new();
    let mut norm_records = Vec::new();
    let mut breakdown = None;
    let mut last_record_time = 0.0;
    let mut spike_done = false;
    let mut nan_done = false;

    let record =
        |state: &FieldState,
         last_t: &mut f64,
         horizon: &mut Vec<HorizonTrace>,
         energy: &mut Vec<EnergyRecord>,
         norm_records: &mut Vec<NormRecord>,
         norm_scratch: &mut NormScratch,
         sink: &mut Option<&mut dyn FnMut(&FieldState)>| {
            horizon.push(horizon_trace(state, grid, basis));
            let span = state.time - *last_t;
            energy.push(EnergyRecord {
                t_star: state.time,
                e_t: energy_flux(state, grid, basis, EnergyKind::T),
                e_p: energy_flux(state, grid, basis, EnergyKind::P),
                e_n: energy_flux(state, grid, basis, EnergyKind::N),
                rp1: rp_energy(state, grid, basis, 1.0).expect("p = 1 is in range"),
                rp2: rp_energy(state, grid, basis, 2.0).expect("p = 2 is in range"),
                morawetz_increment: morawetz_increment(state, grid, basis, span),
                hardy_ratio: hardy_ratio(state, grid, basis),
            });
            norm_records.push(NormRecord {
                t_star: state.time,
                norms: slice_norms(state, grid, basis, norm_scratch),
            });
            *last_t = state.time;
            if let Some(sink) = sink {
                sink(state);
            }
        };

    record(
        &state,
        &mut last_record_time,
        &mut horizon,
        &mut energy,
        &mut norm_records,
        &mut norm_scratch,
        &mut snapshot_sink,
    );

    let mut steps_taken = 0u64;
    for s in 1..=n_steps {
        if let Some(fault) = &cfg.fault {
            if let Some(ts) = fault.spike_time {
                if !spike_done && state.time >= ts {
                    for v in state.pi.iter_mut() {
                        *v *= fault.spike_factor;
                    }
                    spike_done = true;
                }
            }
            if let Some(tn) = fault.nan_time {
                if !nan_done && state.time >= tn {
                    let mid = state.psi.len() / 2;
                    state.psi[mid] = f64::NAN;
                    nan_done = true;
                }
            }
        }

        if let Some(report) =
            breakdown_check(&state, grid, basis, &thresholds, &mut norm_scratch)
        {
            record(
                &state,
                &mut last_record_time,
                &mut horizon,
                &mut energy,
                &mut norm_records,
                &mut norm_scratch,
                &mut snapshot_sink,
            );
            breakdown = Some(report);
            break;
        }

        step(
            &mut state,
            dt,
            grid,
            basis,
            &cfg.coupling,
            None,
            cfg.dissipation,
            &mut step_scratch,
        )?;
        steps_taken = s;

        if s % cadence == 0 || s == n_steps {
            if let Some(report) =
                breakdown_check(&state, grid, basis, &thresholds, &mut norm_scratch)
            {
                record(
                    &state,
                    &mut last_record_time,
                    &mut horizon,
                    &mut energy,
                    &mut norm_records,
                    &mut norm_scratch,
                    &mut snapshot_sink,
                );
                breakdown = Some(report);
                break;
            }
            record(
                &state,
                &mut last_record_time,
                &mut horizon,
                &mut energy,
                &mut norm_records,
                &mut norm_scratch,
                &mut snapshot_sink,
            );
        }
    }

    Ok(RunArtifacts {
        horizon,
        energy,
        norms: norm_records,
        breakdown,
        final_state: state,
        dt,
        steps: steps_taken,
    })
}
