//! Receding-horizon controllers.

pub mod centralized;
pub mod config;
pub mod decentralized;
pub mod emergency;
pub mod problem;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::ControlError;
use crate::network::{InflowVector, NetworkSpec, SignalAction, TrafficState};

pub use centralized::{plan_emergency, plan_normal, select_emergency_path, CentralizedController};
pub use config::{ControllerConfig, NominalInflow};
pub use decentralized::{DecentralizedController, UnitSpec};
pub use emergency::{advance_mode, enumerate_paths, EmergencyStatus};
pub use problem::{HorizonProblem, Ownership, Relaxation};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub qp_nodes: u64,
    pub search_nodes: u64,
    /// Wall-clock solve time; excluded from determinism comparisons.
    pub micros: u64,
    pub relaxation: Option<Relaxation>,
}

/// Outcome of one horizon solve.
#[derive(Clone, Debug, PartialEq)]
pub struct Decision {
    pub inflow: InflowVector,
    pub action: SignalAction,
    pub inflow_plan: Vec<InflowVector>,
    pub signal_plan: Vec<SignalAction>,
    pub cost: f64,
    /// Rounded disturbance-free prediction, `k = 0..=T_f`.
    pub predicted: Vec<Vec<f64>>,
    pub stats: SolverStats,
}

/// What a controller applies at one step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutput {
    pub inflow: InflowVector,
    pub action: SignalAction,
    /// Set on the step at which the controller commits an emergency path.
    pub selected_path: Option<usize>,
    pub stats: SolverStats,
}

pub trait Controller {
    fn name(&self) -> &'static str;

    /// `emergency` is `Some` while an emergency is active; its `selected`
    /// field is `None` on the notification step.
    fn decide(
        &mut self,
        spec: &NetworkSpec,
        t: usize,
        x: &TrafficState,
        emergency: Option<&EmergencyStatus>,
    ) -> Result<StepOutput, ControlError>;
}

/// Random stream for tail actions. Stream 0 belongs to the central unit
/// and to the first control unit, so a single-unit decentralized run draws
/// exactly what the centralized one does.
pub fn controller_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
