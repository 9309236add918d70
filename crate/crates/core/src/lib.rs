//! Effective Hamiltonians for one-dimensional (and separable multi-dimensional)
//! periodic homogenization of viscous Hamilton-Jacobi equations.
//!
//! The crate computes `H̄(θ)` from the cell problem by ODE shooting, builds
//! Hamiltonian/potential pairs whose effective Hamiltonian loses
//! quasiconvexity, certifies that loss numerically, and cross-checks the
//! results against a parabolic long-time solver and a Hopf-Cole eigenvalue
//! oracle.

pub mod cell;
pub mod diagnostics;
pub mod error;
pub mod hamiltonian;
pub mod io;
pub mod multid;
pub mod numeric;
pub mod pde;
pub mod potential;
pub mod synth;

pub use cell::{CellConfig, CellProblem, CorrectorSolution};
pub use error::{Error, Result};
pub use hamiltonian::{BumpParams, CandidatePoints, Growth, Hamiltonian1D, HamiltonianFn, Orientation};
pub use multid::{MultidOptions, SeparableSystem};
pub use potential::PeriodicPotential;
pub use synth::{CounterexampleBundle, ProfileSpec};
