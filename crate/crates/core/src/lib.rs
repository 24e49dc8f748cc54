//! Online joint pricing and capacity sizing for a single-server queue.
//!
//! The service provider chooses a service rate `μ` and a price `p` each
//! operating cycle, observes arrivals and (censored) workload, and updates
//! its decision with a finite-difference stochastic gradient step.

pub mod analytic;
pub mod config;
pub mod demand;
pub mod error;
pub mod harness;
pub mod liquar;
pub mod pto;
pub mod queue_sim;
pub mod stochastic;

pub use analytic::{Objective, OptimalSolution, SmoothObjective};
pub use config::{ExperimentConfig, SystemModel};
pub use demand::{DemandCurve, DemandModel, FeasibleBox, StaffingCost};
pub use error::{Error, Result};
pub use liquar::{run_liquar, HyperSchedule, RunResult};
pub use queue_sim::{CycleTrace, Policy};
pub use stochastic::{RngStream, UnitDist};
