//! The radial inversion r - M -> M^2 / (r - M) with conformal weight
//! Omega = (r - M)/M, exercised end to end: closed-form pullbacks, the
//! involution, the fixed sphere, and the packaged audit.

use exwave::couch_torrence::{
    ct_audit, ct_pullback, ct_pullback_onto, ct_weight_identity_check, ChartTag, CtError, CtField,
};
use exwave::geometry::SpacetimeParams;

fn params() -> SpacetimeParams {
    SpacetimeParams::new(1.0).unwrap()
}

/// Nodes uniform in ln Omega so the set is invariant under the inversion.
fn log_symmetric_nodes(n: usize, span: f64, m: f64) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let s = span * (2.0 * i as f64 / (n - 1) as f64 - 1.0);
            m * (1.0 + s.exp())
        })
        .collect()
}

#[test]
fn pullback_fixes_the_static_solution() {
    // The transform chi(rho) = Omega(rho)^{-1} psi(Phi(rho)) with
    // Phi(rho) = M + M^2/(rho - M) maps psi(r) = 1/r to 1/rho: the static
    // solution is invariant.
    let p = params();
    let r: Vec<f64> = (0..40).map(|i| 1.05 + 0.25 * i as f64).collect();
    let values: Vec<f64> = r.iter().map(|&ri| 1.0 / ri).collect();
    let field = CtField { tag: ChartTag::NearInfinity, r: r.clone(), values };
    let out = ct_pullback(&field, p).unwrap();
    assert_eq!(out.tag, ChartTag::NearHorizon);
    assert!(out.r.windows(2).all(|w| w[1] > w[0]));
    for (&rho, &chi) in out.r.iter().zip(&out.values) {
        let expect = 1.0 / rho;
        assert!(
            (chi - expect).abs() <= 1e-13 * expect.abs().max(1.0),
            "at rho = {rho}: {chi} vs {expect}"
        );
    }
}

#[test]
fn exact_pullback_is_an_involution() {
    let p = params();
    let r = log_symmetric_nodes(81, 5.0f64.ln(), 1.0);
    let values: Vec<f64> = r.iter().map(|&ri| (1.3 * ri).sin() + 0.2 * ri).collect();
    let field = CtField { tag: ChartTag::NearHorizon, r: r.clone(), values: values.clone() };
    let twice = ct_pullback(&ct_pullback(&field, p).unwrap(), p).unwrap();
    assert_eq!(twice.tag, ChartTag::NearHorizon);
    for i in 0..r.len() {
        assert!((twice.r[i] - r[i]).abs() <= 1e-12 * r[i]);
        assert!((twice.values[i] - values[i]).abs() <= 1e-12);
    }
}

#[test]
fn resampled_pullback_is_an_involution_on_band_limited_data() {
    let p = params();
    let span = 5.0f64.ln();
    let source = log_symmetric_nodes(257, span, 1.0);
    let profile = |r: f64| (1.1 * r).sin() + 0.4 * (0.6 * r).cos();
    let field = CtField {
        tag: ChartTag::NearHorizon,
        r: source.clone(),
        values: source.iter().map(|&ri| profile(ri)).collect(),
    };
    // Interior targets incommensurate with the source nodes, so the second
    // pass genuinely interpolates.
    let targets = log_symmetric_nodes(191, 0.93 * span, 1.0);
    let once = ct_pullback_onto(&field, &targets, p).unwrap();
    let twice = ct_pullback_onto(&once, &targets, p).unwrap();
    for (&rho, &v) in twice.r.iter().zip(&twice.values) {
        assert!(
            (v - profile(rho)).abs() <= 1e-10,
            "double transform at rho = {rho}: {v} vs {}",
            profile(rho)
        );
    }
}

#[test]
fn the_sphere_at_twice_the_mass_is_fixed() {
    // Phi(2M) = 2M and Omega(2M) = 1, so samples there pass through the
    // transform unchanged.
    let p = params();
    let r = log_symmetric_nodes(41, 5.0f64.ln(), 1.0);
    let mid = r.len() / 2;
    assert_eq!(r[mid], 2.0, "middle node of an odd symmetric set sits at 2M");
    let values: Vec<f64> = r.iter().map(|&ri| 0.7 * ri * ri - 1.0).collect();
    let field = CtField { tag: ChartTag::NearInfinity, r, values: values.clone() };
    let out = ct_pullback(&field, p).unwrap();
    let mid_out = out.r.iter().position(|&x| x == 2.0).expect("2M survives");
    assert_eq!(out.values[mid_out], values[mid]);
}

#[test]
fn weight_identity_holds_at_scattered_radii() {
    let p = params();
    let samples: Vec<f64> = (0..500).map(|k| 1.0 + 10f64.powf(-3.0 + 8.0 * k as f64 / 499.0)).collect();
    let rep = ct_weight_identity_check(p, &samples);
    assert_eq!(rep.samples, samples.len());
    assert!(rep.symbolic_zero);
    assert!(rep.max_rel_err <= 1e-13, "max rel err {:.3e}", rep.max_rel_err);
}

#[test]
fn pullback_rejects_bad_fields() {
    let p = params();
    let at_horizon = CtField {
        tag: ChartTag::NearHorizon,
        r: vec![1.0, 1.5, 2.0],
        values: vec![0.0; 3],
    };
    assert!(matches!(ct_pullback(&at_horizon, p), Err(CtError::NodeAtHorizon { .. })));

    let unsorted = CtField {
        tag: ChartTag::NearHorizon,
        r: vec![1.5, 1.4, 2.0],
        values: vec![0.0; 3],
    };
    assert!(matches!(ct_pullback(&unsorted, p), Err(CtError::NodesNotAscending)));

    let mismatched = CtField {
        tag: ChartTag::NearHorizon,
        r: vec![1.5, 1.6, 2.0],
        values: vec![0.0; 2],
    };
    assert!(matches!(ct_pullback(&mismatched, p), Err(CtError::LengthMismatch { .. })));

    // Resampling onto a point whose image leaves the sampled span is
    // extrapolation and must be refused.
    let narrow = CtField {
        tag: ChartTag::NearHorizon,
        r: (0..12).map(|i| 1.5 + 0.1 * i as f64).collect(),
        values: vec![1.0; 12],
    };
    assert!(matches!(
        ct_pullback_onto(&narrow, &[1.01], p),
        Err(CtError::ImageOutsideSamples { .. })
    ));
}

#[test]
fn packaged_audit_passes_with_margin() {
    let audit = ct_audit(params());
    assert!(audit.pass, "notes: {:?}", audit.notes);
    assert!(audit.weight_identity.symbolic_zero);
    assert!(audit.involution_exact_max_err <= 1e-12);
    assert!(audit.involution_resampled_max_err <= 1e-10);
    assert_eq!(audit.fixed_sphere_err, 0.0);
    assert!(audit
        .conformal_residual
        .orders
        .iter()
        .chain(audit.nullform_residual.orders.iter())
        .all(|&o| o >= 3.5));
}
