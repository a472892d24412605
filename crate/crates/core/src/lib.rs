//! Cell-transmission traffic network with centralized and decentralized
//! model-predictive signal and inflow control, plus a closed-loop
//! simulation harness.

pub mod benchmark;
pub mod error;
pub mod mpc;
pub mod network;
pub mod reachability;
pub mod scenario;
pub mod sim;
pub mod solver;

pub use error::{ControlError, ModelError, ScenarioError, SolveError};
pub use network::{InflowVector, NetworkSpec, SignalAction, SignalPlan, TrafficState};
pub use scenario::Scenario;
