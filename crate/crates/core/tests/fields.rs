//! Grid construction, stencils, and the angular basis, exercised through
//! the public API against closed-form references.

use exwave::fields::{
    fd_weights, gauss_legendre, legendre_p, AngularBasis, Grid, GridError, GridSpec, Stretching,
};
use exwave::geometry::{tortoise, FoliationSpec, SpacetimeParams};

fn params() -> SpacetimeParams {
    SpacetimeParams::new(1.0).unwrap()
}

fn build(spec: GridSpec) -> Grid {
    let p = params();
    let fol = FoliationSpec::new(4.0, spec.r_max, p).unwrap();
    Grid::build(spec, p, fol).unwrap()
}

#[test]
fn clustered_grid_anchors_horizon_and_outer_boundary() {
    let grid = build(GridSpec {
        n_r: 200,
        r_max: 40.0,
        n_theta: 1,
        stretching: Stretching::HorizonClustered,
        cluster_width: 1e-2,
    });
    assert_eq!(grid.r[0], 1.0, "first node must sit exactly on the horizon");
    assert_eq!(*grid.r.last().unwrap(), 40.0);
    assert!(grid.r.windows(2).all(|w| w[1] > w[0]), "radii must ascend strictly");

    // Clustering: the first cell is much finer than the uniform spacing and
    // spacing grows monotonically away from the horizon.
    let uniform = 39.0 / 199.0;
    assert!(grid.r[1] - grid.r[0] < uniform / 20.0);
    let gaps: Vec<f64> = grid.r.windows(2).map(|w| w[1] - w[0]).collect();
    assert!(gaps.windows(2).all(|g| g[1] >= g[0] * 0.999));
    assert!((grid.min_dr - gaps[0]).abs() <= 1e-15 * gaps[0]);
}

#[test]
fn uniform_stretching_is_a_linspace() {
    let n = 101;
    let grid = build(GridSpec {
        n_r: n,
        r_max: 21.0,
        n_theta: 1,
        stretching: Stretching::UniformInR,
        cluster_width: 1e-3,
    });
    for (i, &r) in grid.r.iter().enumerate() {
        let expect = 1.0 + 20.0 * i as f64 / (n - 1) as f64;
        assert!((r - expect).abs() <= 1e-13);
    }
}

#[test]
fn tortoise_stretching_is_uniform_outside_the_split_radius() {
    let p = params();
    let grid = build(GridSpec {
        n_r: 400,
        r_max: 60.0,
        n_theta: 1,
        stretching: Stretching::UniformInRstarOutsideR0,
        cluster_width: 1e-3,
    });
    // The density blends over [R0 - M, R0 + M]; judge uniformity beyond
    // the blend. Over r in [5.5, 60] the uniform-in-r* map varies the
    // radial spacing by ~30%, so a tight spread here is discriminating.
    let outside: Vec<f64> = grid
        .r
        .iter()
        .copied()
        .filter(|&r| r >= 5.5)
        .map(|r| tortoise(r, p).unwrap())
        .collect();
    assert!(outside.len() > 10, "grid must place nodes beyond the split radius");
    let steps: Vec<f64> = outside.windows(2).map(|w| w[1] - w[0]).collect();
    let min = steps.iter().cloned().fold(f64::MAX, f64::min);
    let max = steps.iter().cloned().fold(0.0f64, f64::max);
    let spread = (max - min) / min;
    assert!(spread <= 1e-9, "tortoise spacing spread {spread:.3e} beyond the blend");
}

#[test]
fn grid_rejects_bad_specs() {
    let p = params();
    let fol = FoliationSpec::new(4.0, 40.0, p).unwrap();
    let small = GridSpec {
        n_r: 8,
        r_max: 40.0,
        n_theta: 1,
        stretching: Stretching::UniformInR,
        cluster_width: 1e-3,
    };
    assert!(matches!(
        Grid::build(small, p, fol),
        Err(GridError::TooFewRadialNodes(8))
    ));
}

#[test]
fn stencil_weights_differentiate_polynomials_exactly() {
    // Fornberg weights on scrambled irregular nodes must reproduce the
    // derivatives of any polynomial up to the stencil's design order.
    let nodes = [0.0, 0.13, 0.21, 0.55, 0.89, 1.3, 1.31];
    let poly = |x: f64| 3.0 - x + 0.5 * x.powi(3) + 2.0 * x.powi(6);
    let dpoly = |x: f64| -1.0 + 1.5 * x.powi(2) + 12.0 * x.powi(5);
    let ddpoly = |x: f64| 3.0 * x + 60.0 * x.powi(4);
    for &x0 in &[0.0, 0.4, 1.31, 0.9] {
        for (m, exact) in [(1, dpoly(x0)), (2, ddpoly(x0))] {
            let w = fd_weights(&nodes, x0, m);
            let got: f64 = w.iter().zip(&nodes).map(|(wi, &xi)| wi * poly(xi)).sum();
            assert!(
                (got - exact).abs() <= 1e-9 * exact.abs().max(1.0),
                "m = {m} at x0 = {x0}: {got} vs {exact}"
            );
        }
    }
    // Order-zero weights interpolate: they sum to one.
    let w0 = fd_weights(&nodes, 0.7, 0);
    let sum: f64 = w0.iter().sum();
    assert!((sum - 1.0).abs() <= 1e-12);
}

#[test]
fn radial_derivative_converges_at_fourth_order_on_the_stretched_grid() {
    let f = |r: f64| (0.7 * r).sin() + 0.2 * r;
    let df = |r: f64| 0.7 * (0.7 * r).cos() + 0.2;
    let mut errs = Vec::new();
    for n in [100usize, 200, 400] {
        let grid = build(GridSpec {
            n_r: n,
            r_max: 20.0,
            n_theta: 1,
            stretching: Stretching::HorizonClustered,
            cluster_width: 1e-2,
        });
        let vals: Vec<f64> = grid.r.iter().map(|&r| f(r)).collect();
        let d = grid.deriv_r_profile(&vals);
        let err = grid
            .r
            .iter()
            .zip(&d)
            .map(|(&r, &g)| (g - df(r)).abs())
            .fold(0.0, f64::max);
        errs.push(err);
    }
    let o1 = (errs[0] / errs[1]).log2();
    let o2 = (errs[1] / errs[2]).log2();
    assert!(o1 > 3.5 && o2 > 3.5, "orders {o1:.2}, {o2:.2} (errors {errs:?})");
}

#[test]
fn dissipation_vanishes_on_low_degree_polynomials() {
    // The seven-point filter annihilates polynomials of degree < 6 in the
    // computational coordinate, so smooth low-order content is untouched.
    let grid = build(GridSpec {
        n_r: 64,
        r_max: 20.0,
        n_theta: 1,
        stretching: Stretching::UniformInR,
        cluster_width: 1e-3,
    });
    let n = grid.n_r();
    let vals: Vec<f64> = (0..n)
        .map(|i| {
            let xi = i as f64 * grid.dxi;
            1.0 + xi + xi.powi(2) - 0.3 * xi.powi(5)
        })
        .collect();
    let mut out = vec![0.0; n];
    grid.add_dissipation_into(&vals, 0.5, &mut out);
    let max = out.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    assert!(max <= 1e-8, "filter leaked {max:e} on a quintic");

    // And it damps the highest resolvable mode: the contribution at an
    // interior node has sign opposite to the mode there.
    let alt: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let mut out = vec![0.0; n];
    grid.add_dissipation_into(&alt, 0.5, &mut out);
    for i in 10..n - 10 {
        assert!(out[i] * alt[i] < 0.0, "sawtooth must be damped at node {i}");
    }
}

#[test]
fn quadrature_integrates_legendre_products_exactly() {
    let (x, w) = gauss_legendre(8);
    assert!((w.iter().sum::<f64>() - 2.0).abs() <= 1e-14);
    for l in 0..6usize {
        for m in 0..6usize {
            let got: f64 = x
                .iter()
                .zip(&w)
                .map(|(&xi, &wi)| wi * legendre_p(l, xi) * legendre_p(m, xi))
                .sum();
            let expect = if l == m { 2.0 / (2.0 * l as f64 + 1.0) } else { 0.0 };
            assert!(
                (got - expect).abs() <= 1e-13,
                "int P_{l} P_{m}: {got} vs {expect}"
            );
        }
    }
}

#[test]
fn angular_projection_round_trips_and_laplacian_has_legendre_eigenvalues() {
    let basis = AngularBasis::new(12);
    // Synthesize a known mode mix, project it back.
    let values: Vec<f64> = basis
        .x
        .iter()
        .map(|&xi| 0.7 * legendre_p(0, xi) - 1.3 * legendre_p(3, xi) + 0.25 * legendre_p(5, xi))
        .collect();
    let modes = basis.project(&values);
    let back = basis.synthesize(&modes);
    for (a, b) in values.iter().zip(&back) {
        assert!((a - b).abs() <= 1e-12);
    }

    // Laplace-Beltrami on P_l is -l(l+1) P_l.
    for l in [1usize, 2, 4] {
        let vals: Vec<f64> = basis.x.iter().map(|&xi| legendre_p(l, xi)).collect();
        let mut out = vec![0.0; vals.len()];
        basis.laplacian_shell(&vals, &mut out);
        let ev = -(l as f64) * (l as f64 + 1.0);
        for (o, v) in out.iter().zip(&vals) {
            assert!((o - ev * v).abs() <= 1e-9, "l = {l}: {o} vs {}", ev * v);
        }
    }
}
