//! Spectral geometry of first-order 2×2 elliptic systems on the 3-torus.
//!
//! The crate computes the geometric content of such an operator (metric,
//! frame, topological charge, spinor field, massless Dirac action, axial
//! torsion), the two leading coefficients of its eigenvalue counting
//! function, and a Fourier–Galerkin approximation of its spectrum.

pub mod analysis;
pub mod catalog;
pub mod dirac;
pub mod error;
pub mod grid;
#[cfg(test)]
mod invariants;
pub mod matrix_field;
pub mod problem;
pub mod random;
pub mod spectral;
pub mod spinor;
pub mod symbol;
pub mod tolerances;
pub mod trig;

pub use error::{Cycle, Error, Result};
pub use grid::Grid;
pub use matrix_field::{Mat2, MatrixField};
pub use symbol::{Charge, Frame, Metric, Operator1st, PrincipalSymbol};
pub use trig::TrigPoly;
