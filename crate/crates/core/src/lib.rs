//! Numerical laboratory for boundary spike clusters of the two-dimensional
//! Gierer–Meinhardt system.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: closed boundary curves, curvature and its arc-length
//!   derivatives, nondegenerate curvature maxima.
//! * [`ground_state`]: the radial ground state of `Δw - w + w² = 0` and the
//!   moment integrals built from it.
//! * [`green`]: the half-plane Neumann Green's function `K0(r)/π`.
//! * [`reduced`]: the limiting spike-position system and its Newton solver.
//! * [`stability`]: small-eigenvalue matrices and estimates.
//! * [`nlep`]: the nonlocal eigenvalue problem for large eigenvalues.
//! * [`sim`]: a boundary-fitted IMEX simulator for the full system.

pub mod error;
pub mod geometry;
pub mod green;
pub mod ground_state;
pub mod linalg;
pub mod nlep;
pub mod reduced;
pub mod sim;
pub mod stability;

pub use error::{Error, Result};
pub use geometry::{BoundaryCurve, CurveSpec};
pub use ground_state::{GroundState, GroundStateMoments};
pub use nlep::{NlepConfig, NlepGrid, NlepSpectrum};
pub use reduced::{ClusterParams, SpikeConfiguration};
pub use sim::{Seeding, SimConfig, Simulator};
