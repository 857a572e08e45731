//! Angular discretization: Gauss-Legendre collocation in cos(theta) for
//! axisymmetric fields, with exact quadrature projection onto Legendre
//! modes. With n_theta nodes, products of modes up to combined degree
//! 2*n_theta - 1 integrate exactly, so the quadratic nonlinearity is
//! alias-free for the low-l data used here.

use std::f64::consts::PI;

/// Legendre polynomial P_l(x) by upward recurrence.
pub fn legendre_p(l: usize, x: f64) -> f64 {
    match l {
        0 => 1.0,
        1 => x,
        _ => {
            let mut pm = 1.0;
            let mut p = x;
            for k in 1..l {
                let kf = k as f64;
                let next = ((2.0 * kf + 1.0) * x * p - kf * pm) / (kf + 1.0);
                pm = p;
                p = next;
            }
            p
        }
    }
}

/// Derivative P_l'(x) via the standard relation with P_{l-1}.
pub fn legendre_p_deriv(l: usize, x: f64) -> f64 {
    if l == 0 {
        return 0.0;
    }
    let lf = l as f64;
    if x.abs() < 1.0 {
        lf * (x * legendre_p(l, x) - legendre_p(l - 1, x)) / (x * x - 1.0)
    } else {
        // At the poles P_l'(+-1) = (+-1)^(l-1) l(l+1)/2.
        let sign = if x > 0.0 { 1.0 } else { (-1.0f64).powi(l as i32 - 1) };
        sign * lf * (lf + 1.0) / 2.0
    }
}

/// Gauss-Legendre nodes (ascending in x = cos theta) and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        // Standard asymptotic initial guess, then Newton on P_n.
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let p = legendre_p(n, z);
            let dp = legendre_p_deriv(n, z);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        let dp = legendre_p_deriv(n, z);
        // Guesses run from x near +1 downward; store ascending.
        x[n - 1 - i] = z;
        w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// Legendre coefficients of an axisymmetric collocated field.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSet {
    /// coeffs[l] multiplies P_l(cos theta); coeffs[0] is the spherical mean.
    pub coeffs: Vec<f64>,
}

/// Collocation operators on the Gauss-Legendre nodes.
///
/// All operators are dense (n_theta x n_theta) matrices; n_theta is small
/// (1 or 8 in practice) so this costs nothing and keeps the code direct.
#[derive(Debug, Clone)]
pub struct AngularBasis {
    pub n_theta: usize,
    /// Quadrature abscissae x_j = cos(theta_j), ascending.
    pub x: Vec<f64>,
    /// Quadrature weights (sum to 2).
    pub w: Vec<f64>,
    /// Row l, column j: maps node values to coefficient l.
    proj: Vec<f64>,
    /// Row j, column l: evaluates a ModeSet at node j.
    synth: Vec<f64>,
    /// Unit-sphere Laplace-Beltrami operator on node values.
    lap: Vec<f64>,
    /// d/dtheta on node values.
    dtheta: Vec<f64>,
}

impl AngularBasis {
    pub fn new(n_theta: usize) -> Self {
        if n_theta == 1 {
            // Spherically symmetric sector: one node, all angular operators
            // vanish, projection and synthesis are the identity on l = 0.
            return Self {
                n_theta: 1,
                x: vec![0.0],
                w: vec![2.0],
                proj: vec![1.0],
                synth: vec![1.0],
                lap: vec![0.0],
                dtheta: vec![0.0],
            };
        }
        let (x, w) = gauss_legendre(n_theta);
        let n = n_theta;
        let mut proj = vec![0.0; n * n];
        let mut synth = vec![0.0; n * n];
        for l in 0..n {
            for j in 0..n {
                proj[l * n + j] = (2.0 * l as f64 + 1.0) / 2.0 * w[j] * legendre_p(l, x[j]);
                synth[j * n + l] = legendre_p(l, x[j]);
            }
        }
        // lap = synth . diag(-l(l+1)) . proj, exact on resolved modes.
        let mut lap = vec![0.0; n * n];
        let mut dtheta = vec![0.0; n * n];
        for j in 0..n {
            for k in 0..n {
                let mut acc_lap = 0.0;
                let mut acc_dth = 0.0;
                for l in 0..n {
                    let lf = l as f64;
                    acc_lap += synth[j * n + l] * (-lf * (lf + 1.0)) * proj[l * n + k];
                    // d/dtheta P_l(cos theta) = -sin(theta) P_l'(cos theta).
                    let sin_th = (1.0 - x[j] * x[j]).sqrt();
                    acc_dth += -sin_th * legendre_p_deriv(l, x[j]) * proj[l * n + k];
                }
                lap[j * n + k] = acc_lap;
                dtheta[j * n + k] = acc_dth;
            }
        }
        Self { n_theta, x, w, proj, synth, lap, dtheta }
    }

    /// Projects node values (one radial shell) onto Legendre coefficients.
    pub fn project(&self, values: &[f64]) -> ModeSet {
        let n = self.n_theta;
        debug_assert_eq!(values.len(), n);
        let mut coeffs = vec![0.0; n];
        for l in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                acc += self.proj[l * n + j] * values[j];
            }
            coeffs[l] = acc;
        }
        ModeSet { coeffs }
    }

    /// Evaluates a ModeSet back at the collocation nodes.
    pub fn synthesize(&self, modes: &ModeSet) -> Vec<f64> {
        let n = self.n_theta;
        let mut out = vec![0.0; n];
        for j in 0..n {
            let mut acc = 0.0;
            for (l, &c) in modes.coeffs.iter().enumerate().take(n) {
                acc += self.synth[j * n + l] * c;
            }
            out[j] = acc;
        }
        out
    }

    /// Applies the unit-sphere Laplacian to one radial shell in place.
    pub fn laplacian_shell(&self, values: &[f64], out: &mut [f64]) {
        self.apply(&self.lap, values, out)
    }

    /// Applies d/dtheta to one radial shell.
    pub fn dtheta_shell(&self, values: &[f64], out: &mut [f64]) {
        self.apply(&self.dtheta, values, out)
    }

    fn apply(&self, mat: &[f64], values: &[f64], out: &mut [f64]) {
        let n = self.n_theta;
        debug_assert_eq!(values.len(), n);
        debug_assert_eq!(out.len(), n);
        for j in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += mat[j * n + k] * values[k];
            }
            out[j] = acc;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Frozen 8-point Gauss-Legendre rule (Abramowitz & Stegun 25.4.30).
    const GL8_X: [f64; 4] =
        [0.1834346424956498, 0.5255324099163290, 0.7966664774136267, 0.9602898564975363];
    const GL8_W: [f64; 4] =
        [0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763];

    #[test]
    fn gauss_legendre_matches_tabulated_8_point_rule() {
        let (x, w) = gauss_legendre(8);
        for k in 0..4 {
            assert!((x[4 + k] - GL8_X[k]).abs() < 1e-15);
            assert!((x[3 - k] + GL8_X[k]).abs() < 1e-15);
            assert!((w[4 + k] - GL8_W[k]).abs() < 1e-15);
            assert!((w[3 - k] - GL8_W[k]).abs() < 1e-15);
        }
    }

    #[test]
    fn quadrature_exact_on_high_degree_polynomial() {
        let (x, w) = gauss_legendre(8);
        // integral of x^14 over [-1,1] = 2/15; degree 14 <= 2*8-1.
        let got: f64 = x.iter().zip(&w).map(|(&xi, &wi)| wi * xi.powi(14)).sum();
        assert!((got - 2.0 / 15.0).abs() < 1e-14);
    }

    #[test]
    fn laplacian_eigenvalue_on_p2() {
        let basis = AngularBasis::new(8);
        let vals: Vec<f64> = basis.x.iter().map(|&x| legendre_p(2, x)).collect();
        let mut out = vec![0.0; 8];
        basis.laplacian_shell(&vals, &mut out);
        for (v, o) in vals.iter().zip(&out) {
            assert!((o - (-6.0) * v).abs() < 1e-12);
        }
    }

    #[test]
    fn dtheta_matches_analytic_on_p1() {
        let basis = AngularBasis::new(8);
        // P_1 = cos theta, d/dtheta = -sin theta.
        let vals: Vec<f64> = basis.x.clone();
        let mut out = vec![0.0; 8];
        basis.dtheta_shell(&vals, &mut out);
        for (j, o) in out.iter().enumerate() {
            let sin_th = (1.0 - basis.x[j] * basis.x[j]).sqrt();
            assert!((o + sin_th).abs() < 1e-12);
        }
    }

    #[test]
    fn project_synthesize_roundtrip() {
        let basis = AngularBasis::new(8);
        let vals: Vec<f64> =
            basis.x.iter().map(|&x| 0.3 + 1.7 * legendre_p(2, x) - 0.4 * legendre_p(5, x)).collect();
        let modes = basis.project(&vals);
        assert!((modes.coeffs[0] - 0.3).abs() < 1e-13);
        assert!((modes.coeffs[2] - 1.7).abs() < 1e-13);
        assert!((modes.coeffs[5] + 0.4).abs() < 1e-13);
        let back = basis.synthesize(&modes);
        for (a, b) in vals.iter().zip(&back) {
            assert!((a - b).abs() < 1e-13);
        }
    }
}
