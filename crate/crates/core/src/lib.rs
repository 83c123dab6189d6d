//! Spectral simulation and control synthesis for a quantum particle in a
//! one-dimensional box with moving walls.
//!
//! Everything is computed on the truncated Dirichlet eigenbasis
//! `phi_j(x) = sqrt(2) sin(j pi (x + 1/2))` of the reference box `[-1/2, 1/2]`
//! in units `hbar = 1`, `m = 1/2`, so the unperturbed energies are `j^2 pi^2`.

pub mod control;
pub mod error;
pub mod exec;
pub mod linalg;
pub mod operators;
pub mod propagation;
pub mod resonance;
pub mod stability;

pub use error::{Error, Result};
pub use exec::Execution;
pub use operators::{
    BasisTruncation, BoxGeometry, HermitianOperator, MotionParams, Parity, SpectralState,
};
pub use propagation::{BoxModel, ControlKind, LinearPiece, PiecewiseControl, Propagator, Stepping};
