//! Discretized axisymmetric scalar fields on a horizon-penetrating
//! `(t*, r, theta)` grid: radial grid construction and stencils, angular
//! pseudospectral operators, and the first-order evolution state.

mod angular;
mod grid;
mod state;

pub use angular::{gauss_legendre, legendre_p, legendre_p_deriv, AngularBasis, ModeSet};
pub use grid::{fd_weights, Grid, GridError, GridSpec, Stretching};
pub use state::{ef_derivatives, spherical_mean, EfDerivatives, FieldState};
