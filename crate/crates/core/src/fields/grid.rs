//! Radial grid: a uniform computational coordinate xi in [0, 1] mapped to
//! r in [M, r_max] through a smooth, strictly monotone stretching map.
//!
//! All radial derivatives are taken as d/dr = (dxi/dr) d/dxi with
//! fourth-order five-point stencils on the uniform xi nodes and the exact
//! analytic map Jacobian, so every stretching retains the full scheme order.
//! The first node sits exactly on the horizon r = M; no boundary condition
//! is imposed there (the outgoing characteristic speed vanishes at r = M,
//! so one-sided interior stencils are the correct closure).

use crate::geometry::{horizon_factor, horizon_factor_deriv, FoliationSpec, SpacetimeParams};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// How radial resolution is distributed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stretching {
    /// Equal spacing in r.
    UniformInR,
    /// Equal spacing in r inside the split radius, blending smoothly into
    /// equal spacing in the tortoise coordinate r* outside it.
    UniformInRstarOutsideR0,
    /// Fine equal spacing near the horizon (set by `cluster_width`),
    /// relaxing smoothly to tortoise-like spacing in the far field.
    /// Resolves the shrinking near-horizon gradient layer that transversal
    /// derivatives develop at late times.
    HorizonClustered,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_r: usize,
    pub r_max: f64,
    pub n_theta: usize,
    pub stretching: Stretching,
    /// Near-horizon density parameter b0 for `HorizonClustered`: the spacing
    /// at the horizon is about b0/(1+b0) times the far-field spacing.
    pub cluster_width: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("n_r = {0} is too small; need at least 17 radial nodes")]
    TooFewRadialNodes(usize),
    #[error("n_theta = {0} must be 1 (spherical symmetry) or at least 8")]
    BadThetaCount(usize),
    #[error("r_max = {r_max} must exceed the horizon radius {horizon}")]
    RMaxInsideHorizon { r_max: f64, horizon: f64 },
    #[error("cluster_width = {0} must be positive and finite")]
    BadClusterWidth(f64),
    #[error("stretching map failed to reach r_max (last node {last}, target {target})")]
    MapDidNotConverge { last: f64, target: f64 },
}

/// Built radial grid with precomputed geometry and stencil tables.
#[derive(Debug, Clone)]
pub struct Grid {
    pub spec: GridSpec,
    pub params: SpacetimeParams,
    pub foliation: FoliationSpec,
    /// Uniform computational spacing (1/(n_r - 1)).
    pub dxi: f64,
    /// Node radii, strictly increasing, r[0] = M exactly.
    pub r: Vec<f64>,
    /// Analytic map Jacobian dr/dxi at the nodes.
    pub dr_dxi: Vec<f64>,
    /// Smallest node spacing (CFL limiter; ingoing speed is 1).
    pub min_dr: f64,
    /// D(r) at the nodes.
    pub d: Vec<f64>,
    /// D'(r) at the nodes.
    pub dp: Vec<f64>,
    /// sqrt(D) at the nodes.
    pub sqrt_d: Vec<f64>,
    /// Five-point first-derivative stencils in xi: window start per node.
    stencil_start: Vec<usize>,
    /// Weights per node, already divided by dxi.
    stencil_w: Vec<[f64; 5]>,
}

/// Finite-difference weights on arbitrary nodes (Fornberg's recursion):
/// returns w such that sum_j w[j] f(nodes[j]) approximates f^(m)(x0).
pub fn fd_weights(nodes: &[f64], x0: f64, m: usize) -> Vec<f64> {
    let n = nodes.len();
    assert!(m < n, "need more nodes than the derivative order");
    // c[k][j]: weight of node j for the k-th derivative, built incrementally.
    let mut c = vec![vec![0.0; n]; m + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - x0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c[m].clone()
}

impl Grid {
    pub fn build(
        spec: GridSpec,
        params: SpacetimeParams,
        foliation: FoliationSpec,
    ) -> Result<Self, GridError> {
        if spec.n_r < 17 {
            return Err(GridError::TooFewRadialNodes(spec.n_r));
        }
        if spec.n_theta != 1 && spec.n_theta < 8 {
            return Err(GridError::BadThetaCount(spec.n_theta));
        }
        let m = params.mass;
        if !(spec.r_max.is_finite() && spec.r_max > m) {
            return Err(GridError::RMaxInsideHorizon { r_max: spec.r_max, horizon: m });
        }
        if spec.stretching == Stretching::HorizonClustered
            && !(spec.cluster_width.is_finite() && spec.cluster_width > 0.0)
        {
            return Err(GridError::BadClusterWidth(spec.cluster_width));
        }

        let n = spec.n_r;
        let dxi = 1.0 / (n - 1) as f64;
        let (r, dr_dxi) = place_nodes(&spec, params, foliation)?;

        let mut min_dr = f64::INFINITY;
        for i in 1..n {
            min_dr = min_dr.min(r[i] - r[i - 1]);
        }
        if !(min_dr > 0.0) {
            return Err(GridError::MapDidNotConverge { last: r[n - 1], target: spec.r_max });
        }

        let d: Vec<f64> = r.iter().map(|&ri| horizon_factor(ri, params).unwrap()).collect();
        let dp: Vec<f64> = r.iter().map(|&ri| horizon_factor_deriv(ri, params).unwrap()).collect();
        let sqrt_d: Vec<f64> = r.iter().map(|&ri| (ri - m) / ri).collect();
        // Solvability of the second-order-in-time reduction: the psi_tt
        // coefficient D - 2 must stay <= -1, i.e. D < 1 at every node.
        assert!(d.iter().all(|&di| di < 1.0), "horizon factor reached 1 on the grid");

        // Five-point stencils in xi: centered where possible, one-sided at
        // the two nodes adjacent to each boundary.
        let mut stencil_start = Vec::with_capacity(n);
        let mut stencil_w = Vec::with_capacity(n);
        for i in 0..n {
            let start = i.saturating_sub(2).min(n - 5);
            let nodes: Vec<f64> = (0..5).map(|k| (start + k) as f64 * dxi).collect();
            let w = fd_weights(&nodes, i as f64 * dxi, 1);
            stencil_start.push(start);
            stencil_w.push([w[0], w[1], w[2], w[3], w[4]]);
        }

        Ok(Self {
            spec,
            params,
            foliation,
            dxi,
            r,
            dr_dxi,
            min_dr,
            d,
            dp,
            sqrt_d,
            stencil_start,
            stencil_w,
        })
    }

    pub fn n_r(&self) -> usize {
        self.spec.n_r
    }

    pub fn n_theta(&self) -> usize {
        self.spec.n_theta
    }

    /// d/dr of a radial profile (one value per radial node).
    pub fn deriv_r_profile(&self, f: &[f64]) -> Vec<f64> {
        let n = self.n_r();
        debug_assert_eq!(f.len(), n);
        let mut out = vec![0.0; n];
        for i in 0..n {
            let s = self.stencil_start[i];
            let w = &self.stencil_w[i];
            let mut acc = 0.0;
            for k in 0..5 {
                acc += w[k] * f[s + k];
            }
            out[i] = acc / self.dr_dxi[i];
        }
        out
    }

    /// d/dr of a full (n_r x n_theta) field, written into `out`.
    pub fn deriv_r_into(&self, f: &[f64], out: &mut [f64]) {
        let n = self.n_r();
        let nt = self.n_theta();
        debug_assert_eq!(f.len(), n * nt);
        debug_assert_eq!(out.len(), n * nt);
        for i in 0..n {
            let s = self.stencil_start[i];
            let w = &self.stencil_w[i];
            let inv_jac = 1.0 / self.dr_dxi[i];
            for j in 0..nt {
                let mut acc = 0.0;
                for k in 0..5 {
                    acc += w[k] * f[(s + k) * nt + j];
                }
                out[i * nt + j] = acc * inv_jac;
            }
        }
    }

    /// Adds seven-point Kreiss-Oliger dissipation (sixth difference in xi,
    /// O(dxi^5) relative to the solution) to `out` at interior nodes. The
    /// three nodes at each end are left untouched; in particular the horizon
    /// node evolves by the unmodified equations.
    pub fn add_dissipation_into(&self, f: &[f64], sigma: f64, out: &mut [f64]) {
        if sigma == 0.0 {
            return;
        }
        let n = self.n_r();
        let nt = self.n_theta();
        let c = sigma / (64.0 * self.dxi);
        const W: [f64; 7] = [1.0, -6.0, 15.0, -20.0, 15.0, -6.0, 1.0];
        for i in 3..n - 3 {
            for j in 0..nt {
                let mut acc = 0.0;
                for (k, wk) in W.iter().enumerate() {
                    acc += wk * f[(i + k - 3) * nt + j];
                }
                out[i * nt + j] += c * acc;
            }
        }
    }
}

/// Map density dr/dxi = C * B(r); B encodes the stretching shape.
fn map_density(spec: &GridSpec, params: SpacetimeParams, foliation: FoliationSpec, r: f64) -> f64 {
    let m = params.mass;
    match spec.stretching {
        Stretching::UniformInR => 1.0,
        Stretching::UniformInRstarOutsideR0 => {
            // Node density 1 inside R0, D(R0)/D(r) outside (constant spacing
            // in r*), blended over [R0 - M, R0 + M]; continuous density at R0.
            let r0 = foliation.split_radius;
            let s = crate::geometry::smooth_step((r - (r0 - m)) / (2.0 * m));
            let d = horizon_factor(r.max(m), params).unwrap();
            let d0 = horizon_factor(r0, params).unwrap();
            let g = (1.0 - s) + s * d0 / d.max(1e-300);
            1.0 / g
        }
        Stretching::HorizonClustered => {
            spec.cluster_width + horizon_factor(r.max(m), params).unwrap()
        }
    }
}

/// Places nodes by integrating dr/dxi = C * B(r) from r(0) = M with a
/// fixed-substep RK4, where C is tuned so r(1) = r_max.
fn place_nodes(
    spec: &GridSpec,
    params: SpacetimeParams,
    foliation: FoliationSpec,
) -> Result<(Vec<f64>, Vec<f64>), GridError> {
    let n = spec.n_r;
    let m = params.mass;
    if spec.stretching == Stretching::UniformInR {
        let h = (spec.r_max - m) / (n - 1) as f64;
        let r: Vec<f64> = (0..n).map(|i| m + i as f64 * h).collect();
        let jac = vec![spec.r_max - m; n];
        return Ok((r, jac));
    }

    let b = |r: f64| map_density(spec, params, foliation, r);
    let integrate = |c: f64| -> Vec<f64> {
        let sub = 64;
        let h = 1.0 / ((n - 1) * sub) as f64;
        let mut r = Vec::with_capacity(n);
        let mut y = m;
        r.push(y);
        for i in 0..n - 1 {
            for _ in 0..sub {
                let k1 = c * b(y);
                let k2 = c * b(y + 0.5 * h * k1);
                let k3 = c * b(y + 0.5 * h * k2);
                let k4 = c * b(y + h * k3);
                y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
            let _ = i;
            r.push(y);
        }
        r
    };

    // C = integral of 1/B over [M, r_max] up to quadrature error; polish by
    // a few secant-style corrections on the shooting residual.
    let mut c = inv_density_integral(&b, m, spec.r_max);
    let mut r = integrate(c);
    for _ in 0..4 {
        let err = r[n - 1] - spec.r_max;
        if err.abs() <= 1e-13 * spec.r_max {
            break;
        }
        c -= err * c / (r[n - 1] - m);
        r = integrate(c);
    }
    if (r[n - 1] - spec.r_max).abs() > 1e-9 * spec.r_max {
        return Err(GridError::MapDidNotConverge { last: r[n - 1], target: spec.r_max });
    }
    r[n - 1] = spec.r_max;
    let jac: Vec<f64> = r.iter().map(|&ri| c * b(ri)).collect();
    Ok((r, jac))
}

/// Adaptive Simpson quadrature of 1/B, accurate enough to seed the shooting.
fn inv_density_integral(b: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    fn simpson(a: f64, c: f64, fa: f64, fm: f64, fc: f64) -> f64 {
        (c - a) / 6.0 * (fa + 4.0 * fm + fc)
    }
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        c: f64,
        fa: f64,
        fm: f64,
        fc: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let mid = 0.5 * (a + c);
        let lm = 0.5 * (a + mid);
        let rm = 0.5 * (mid + c);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(a, mid, fa, flm, fm);
        let right = simpson(mid, c, fm, frm, fc);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            recurse(f, a, mid, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + recurse(f, mid, c, fm, frm, fc, right, 0.5 * tol, depth - 1)
        }
    }
    let g = |r: f64| 1.0 / b(r);
    let fa = g(lo);
    let fm = g(0.5 * (lo + hi));
    let fc = g(hi);
    let whole = simpson(lo, hi, fa, fm, fc);
    recurse(&g, lo, hi, fa, fm, fc, whole, 1e-12 * whole.abs().max(1.0), 48)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fornberg_reproduces_centered_weights() {
        let nodes = [-2.0, -1.0, 0.0, 1.0, 2.0];
        let w = fd_weights(&nodes, 0.0, 1);
        let expected = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];
        for (a, b) in w.iter().zip(expected.iter()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn fornberg_second_derivative_exact_on_quartic() {
        let nodes = [0.0, 0.3, 0.9, 1.4, 2.2];
        let w = fd_weights(&nodes, 0.7, 2);
        let f = |x: f64| 1.0 + x + x * x - 2.0 * x * x * x + 0.5 * x * x * x * x;
        let d2 = |x: f64| 2.0 - 12.0 * x + 6.0 * x * x;
        let approx: f64 = nodes.iter().zip(&w).map(|(&x, &c)| c * f(x)).sum();
        assert!((approx - d2(0.7)).abs() < 1e-10);
    }

    fn build(stretching: Stretching, n_r: usize) -> Grid {
        let params = SpacetimeParams::new(1.0).unwrap();
        let foliation = FoliationSpec::new(4.0, 30.0, params).unwrap();
        let spec = GridSpec { n_r, r_max: 30.0, n_theta: 1, stretching, cluster_width: 0.05 };
        Grid::build(spec, params, foliation).unwrap()
    }

    #[test]
    fn nodes_pin_horizon_and_outer_edge() {
        for s in [
            Stretching::UniformInR,
            Stretching::UniformInRstarOutsideR0,
            Stretching::HorizonClustered,
        ] {
            let g = build(s, 65);
            assert_eq!(g.r[0], 1.0);
            assert_eq!(g.r[64], 30.0);
            assert!(g.min_dr > 0.0);
            for i in 1..65 {
                assert!(g.r[i] > g.r[i - 1]);
            }
        }
    }

    #[test]
    fn map_jacobian_matches_node_spacing() {
        // dr/dxi from the analytic density must agree with the realized
        // node spacing to the ODE integrator's accuracy.
        for s in [Stretching::UniformInRstarOutsideR0, Stretching::HorizonClustered] {
            let g = build(s, 129);
            for i in 1..128 {
                let fd = (g.r[i + 1] - g.r[i - 1]) / (2.0 * g.dxi);
                let rel = (fd - g.dr_dxi[i]).abs() / g.dr_dxi[i];
                // Central difference of the map itself is O(dxi^2).
                assert!(rel < 2e-3, "stretching {s:?} node {i}: rel {rel}");
            }
        }
    }

    #[test]
    fn radial_derivative_is_fourth_order() {
        // d/dr of sin(r) through the stretched map; error ratio between
        // n and 2n grids should approach 16.
        let errs: Vec<f64> = [65usize, 129, 257]
            .iter()
            .map(|&n| {
                let g = build(Stretching::HorizonClustered, n);
                let f: Vec<f64> = g.r.iter().map(|&r| r.sin()).collect();
                let df = g.deriv_r_profile(&f);
                g.r.iter()
                    .zip(&df)
                    .map(|(&r, &d)| (d - r.cos()).abs())
                    .fold(0.0f64, f64::max)
            })
            .collect();
        let order1 = (errs[0] / errs[1]).log2();
        let order2 = (errs[1] / errs[2]).log2();
        assert!(order1 > 3.4, "observed order {order1}, errors {errs:?}");
        assert!(order2 > 3.4, "observed order {order2}, errors {errs:?}");
    }

    #[test]
    fn clustered_grid_concentrates_near_horizon() {
        let g = build(Stretching::HorizonClustered, 257);
        let near = g.r[1] - g.r[0];
        let far = g.r[256] - g.r[255];
        // Spacing ratio tracks the density ratio b0 / (b0 + D(r_max)).
        let predicted = 0.05 / (0.05 + g.d[256]);
        let got = near / far;
        assert!((got / predicted - 1.0).abs() < 0.05, "got {got}, predicted {predicted}");
    }

    #[test]
    fn dissipation_annihilates_degree_five() {
        // Sixth difference of a quintic in xi is exactly zero.
        let g = build(Stretching::UniformInR, 33);
        let f: Vec<f64> = (0..33).map(|i| (i as f64).powi(5) * 1e-4).collect();
        let mut out = vec![0.0; 33];
        g.add_dissipation_into(&f, 0.3, &mut out);
        for v in &out {
            assert!(v.abs() < 1e-10);
        }
    }

    #[test]
    fn validation_errors_are_reported() {
        let params = SpacetimeParams::new(1.0).unwrap();
        let foliation = FoliationSpec::new(4.0, 30.0, params).unwrap();
        let bad_n = GridSpec {
            n_r: 8,
            r_max: 30.0,
            n_theta: 1,
            stretching: Stretching::UniformInR,
            cluster_width: 0.05,
        };
        assert!(matches!(
            Grid::build(bad_n, params, foliation),
            Err(GridError::TooFewRadialNodes(8))
        ));
        let bad_theta = GridSpec { n_theta: 3, ..bad_n };
        let bad_theta = GridSpec { n_r: 33, ..bad_theta };
        assert!(matches!(
            Grid::build(bad_theta, params, foliation),
            Err(GridError::BadThetaCount(3))
        ));
    }
}
