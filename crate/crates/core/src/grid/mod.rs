//! Radial network model and branch-flow power flow.

pub mod distflow;
pub mod network;

pub use distflow::{
    solve_distflow, solve_lindistflow, DistFlowSolver, PowerFlowSolution, SolverOptions,
};
pub use network::{
    topological_order, validate_network, BaselineProfiles, Line, Network, NetworkFile, Topology,
    ValidationReport, Violation,
};
