//! Numerical toolkit for the 1D boundary-degenerate wave equation
//! u_tt = (a(x) u_x)_x on (0,1), where a > 0 on (0,1] and a(0) = 0.
//!
//! The crate simulates the conservative and boundary-damped systems, checks
//! boundary observability inequalities at desk scale, computes exact boundary
//! controls by conjugate-gradient minimization of the HUM quadratic form, and
//! predicts nonlinear boundary-stabilization decay envelopes via the
//! optimal-weight convexity construction.
//!
//! All numerical kernels are generic over the scalar type through [`Real`];
//! concrete `f64` aliases are exported at the crate root.

pub mod bessel;
pub mod decay;
pub mod dynamics;
pub mod error;
pub mod feedback;
pub mod grid;
pub mod hum;
pub mod observability;
pub mod quadrature;
pub mod scalar;
pub mod spectral;
pub mod weights;

pub use error::{Error, Result};
pub use scalar::Real;

/// `f64` aliases for the main domain types.
pub type Weight64 = weights::Weight<f64>;
pub type WeightConstants64 = weights::WeightConstants<f64>;
pub type Grid64 = grid::Grid<f64>;
pub type GridState64 = grid::GridState<f64>;
pub type EnergyTrace64 = dynamics::EnergyTrace<f64>;
pub type SimConfig64 = dynamics::SimConfig<f64>;
pub type FeedbackLaw64 = feedback::FeedbackLaw<f64>;
pub type EigenPair64 = spectral::EigenPair<f64>;
