//! Generalized Schrödinger bridge problems as boundary-value Hamiltonian flows.
//!
//! The state space carries an inverse metric `G(q)` ([`Metric`]) and a
//! potential `F` ([`Potential`]). Bridges are extremals of
//! `int |q'|^2 / 2 + |grad F(q)|^2 / 2 dt` between fixed endpoints, i.e. flows of
//! `H(q, p) = p.G p / 2 - f.G f / 2` with `f = grad F`.
//!
//! * [`dynamics`]: Hamilton's equations, a symplectic integrator, the action.
//! * [`hopf_cole`]: the change of variables `(q, p) -> (eta, eta*)` and its flow.
//! * [`splitting`]: the split energies `G`, `G*` and their convexity bounds.
//! * [`bridge`]: shooting solver for the endpoint problem.
//! * [`export`]: CSV writers.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod bridge;
pub mod dynamics;
pub mod error;
pub mod export;
pub mod graph;
pub mod hopf_cole;
pub mod integrator;
pub mod metrics;
pub mod potentials;
pub mod splitting;

pub use bridge::{quadratic_oracle, solve, BridgeProblem, BridgeSolution};
pub use dynamics::{
    action, flow_field, hamiltonian, integrate, integrate_with, IntegrateOptions, PhaseState, Trajectory,
};
pub use error::{Error, Result};
pub use graph::Graph;
pub use hopf_cole::{from_eta, to_eta, EtaTrajectory, HopfColePair};
pub use integrator::MidpointOptions;
pub use metrics::{Matrix, Metric, SimplexDensity, Vector};
pub use potentials::{Homogeneity, Potential};
pub use splitting::{SplitReport, SplitSetting};
