//! Local-training ADMM for nonconvex distributed learning over peer-to-peer
//! networks.
//!
//! Agents alternate `tau` local gradient steps with one exchange of
//! auxiliary variables with their neighbors. Local steps use exact,
//! stochastic or SAGA-style variance-reduced gradient estimates.
//!
//! - [`graph`]: network topologies and Laplacian spectra.
//! - [`problems`]: classification and least-squares test problems.
//! - [`oracles`]: gradient estimators with evaluation counting.
//! - [`algorithms`]: the per-agent simulation.
//! - [`compact_oracle`]: the stacked matrix form, used as a test oracle.
//! - [`stepsize`]: theoretical step-size bounds.
//! - [`metrics`]: records, aggregation and the time model.
//! - [`runner`]: configuration-driven experiments.

pub mod algorithms;
pub mod compact_oracle;
pub mod graph;
pub mod metrics;
pub mod oracles;
pub mod problems;
pub mod rng;
pub mod runner;
pub mod stepsize;

pub use algorithms::{run, AlgorithmError, RunConfig, RunOutput, Simulation, Variant};
pub use graph::{GraphError, Topology};
pub use problems::{LossKind, ProblemError, ProblemInstance};
pub use stepsize::{certified_run_check, evaluate_bounds, BoundContext, BoundReport, StepsizeError};
