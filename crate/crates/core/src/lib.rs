//! Numerical laboratory for the Anderson model `H_ω = -Δ + V_ω` on the
//! discrete torus: spectra, Monte Carlo density-of-states estimators,
//! Wegner-constant measurements, and checks of the inequalities behind the
//! Lifshitz-tail bound for the density of states.

// NaN-rejecting checks are written as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harness;
pub mod estimators;
pub mod lattice;
pub mod probes;
pub mod quadrature;
pub mod rng;
pub mod spectral;

pub use error::{LabError, Result};
