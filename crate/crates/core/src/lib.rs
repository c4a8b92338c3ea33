//! Steady-state thermo-hydraulic model of district heating networks with
//! adjoint sensitivities and a continuation-based discrete topology optimizer.
//!
//! The crate is organised bottom-up:
//!
//! * [`network`] holds the superstructure graph, incidence structure and the
//!   network definition file format.
//! * [`physics`] implements the component models and assembles the hydraulic
//!   and thermal residuals together with their analytic Jacobians.
//! * [`solver`] runs the two-stage Newton scheme (hydraulics, then thermals).
//! * [`adjoint`] solves the transposed block-triangular system for gradients.
//! * [`design`] contains the cost function, comfort constraints, constraint
//!   aggregation, discrete projection and penalized pipe cost.
//! * [`optimizer`] drives the warm start, SQP with damped BFGS, and the outer
//!   continuation loop.
//! * [`grid`] generates synthetic street-grid superstructures.

pub mod adjoint;
pub mod design;
pub mod grid;
pub mod network;
pub mod optimizer;
pub mod physics;
pub mod solver;
pub mod sparse;

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use network::{ArcId, ArcKind, Network, NetworkError, NodeId, NodeKind};
pub use physics::{DesignVector, FluidProperties, Model, PipeProperties, RadiatorModel};
pub use solver::{SolveError, SolverOptions, StateSolution};
