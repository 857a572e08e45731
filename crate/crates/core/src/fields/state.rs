//! Evolved field state and chart derivative helpers.

use super::angular::AngularBasis;
use super::grid::Grid;

/// First-order evolution variables on the (t*, r) slice.
///
/// Layout: flat row-major arrays indexed by `i_r * n_theta + j_theta`.
/// `pi = T psi` (time translation) and `phi_r = d psi / dr` at fixed t*;
/// the transversal derivative along the ingoing-chart radial direction is
/// `Y psi = phi_r - pi`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FieldState {
    pub time: f64,
    pub psi: Vec<f64>,
    pub pi: Vec<f64>,
    pub phi_r: Vec<f64>,
}

impl FieldState {
    pub fn zeros(grid: &Grid) -> Self {
        let len = grid.n_r() * grid.n_theta();
        Self { time: 0.0, psi: vec![0.0; len], pi: vec![0.0; len], phi_r: vec![0.0; len] }
    }

    pub fn len(&self) -> usize {
        self.psi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psi.is_empty()
    }

    /// y += a * x over all three components (RK stage combination).
    pub fn axpy(&mut self, a: f64, x: &FieldState) {
        for (y, xv) in self.psi.iter_mut().zip(&x.psi) {
            *y += a * xv;
        }
        for (y, xv) in self.pi.iter_mut().zip(&x.pi) {
            *y += a * xv;
        }
        for (y, xv) in self.phi_r.iter_mut().zip(&x.phi_r) {
            *y += a * xv;
        }
    }

    /// Largest absolute value across all components (NaN-propagating).
    pub fn max_abs(&self) -> f64 {
        let mut m = 0.0f64;
        for v in self.psi.iter().chain(&self.pi).chain(&self.phi_r) {
            if v.is_nan() {
                return f64::NAN;
            }
            m = m.max(v.abs());
        }
        m
    }
}

/// Spherical mean of one radial shell: (1/4pi) * integral over the sphere,
/// which for axisymmetric fields is half the Gauss-Legendre sum.
pub fn spherical_mean(basis: &AngularBasis, shell: &[f64]) -> f64 {
    debug_assert_eq!(shell.len(), basis.n_theta);
    0.5 * shell.iter().zip(&basis.w).map(|(v, w)| v * w).sum::<f64>()
}

/// Derivatives of psi in the ingoing Eddington-Finkelstein chart (v, r),
/// computed from slice-chart data: d/dv = T and d/dr at fixed v equals
/// phi_r - pi.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfDerivatives {
    /// d psi / dv at fixed r (equals T psi = pi).
    pub d_v: f64,
    /// d psi / dr at fixed v (the transversal derivative Y psi).
    pub d_r: f64,
}

/// Pointwise chart conversion at node (i_r, j_theta).
pub fn ef_derivatives(state: &FieldState, grid: &Grid, i_r: usize, j_theta: usize) -> EfDerivatives {
    let idx = i_r * grid.n_theta() + j_theta;
    EfDerivatives { d_v: state.pi[idx], d_r: state.phi_r[idx] - state.pi[idx] }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spherical_mean_of_constant_is_constant() {
        let basis = AngularBasis::new(8);
        let shell = vec![3.25; 8];
        assert!((spherical_mean(&basis, &shell) - 3.25).abs() < 1e-14);
    }

    #[test]
    fn spherical_mean_kills_higher_modes() {
        let basis = AngularBasis::new(8);
        let shell: Vec<f64> = basis
            .x
            .iter()
            .map(|&x| 1.5 + 2.0 * crate::fields::legendre_p(2, x))
            .collect();
        assert!((spherical_mean(&basis, &shell) - 1.5).abs() < 1e-14);
    }
}
