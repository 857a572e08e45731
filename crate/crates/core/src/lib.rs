//! Numerical laboratory for the semilinear wave equation
//!
//! ```text
//!     [] psi = sqrt(D) * A(psi) * g^{ab} d_a psi d_b psi
//! ```
//!
//! on the exterior (horizon included) of an extremal Reissner-Nordstrom
//! black hole, in horizon-penetrating coordinates. The crate provides
//!
//! * closed-form background geometry and the Couch-Torrence conformal map
//!   ([`geometry`], [`couch_torrence`]),
//! * an axisymmetric `(t*, r, theta)` grid with pseudospectral angular
//!   operators ([`fields`]),
//! * a fourth-order method-of-lines evolution core with breakdown
//!   monitoring ([`dynamics`]),
//! * energy, horizon-charge, and decay-rate diagnostics ([`diagnostics`]),
//! * manufactured-solution verification machinery ([`mms`], [`hyperdual`]),
//! * run configuration and trace output ([`config`], [`output`]).
//!
//! Everything is deterministic: a given configuration always reproduces
//! byte-identical traces.

pub mod config;
pub mod couch_torrence;
pub mod diagnostics;
pub mod dynamics;
pub mod fields;
pub mod geometry;
pub mod hyperdual;
pub mod mms;
pub mod output;
