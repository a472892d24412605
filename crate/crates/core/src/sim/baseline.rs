//! Fixed-time reference controller.

use std::time::Instant;

use crate::error::ControlError;
use crate::mpc::centralized::path_score;
use crate::mpc::{Controller, EmergencyStatus, NominalInflow, SolverStats, StepOutput};
use crate::network::{NetworkSpec, SignalAction, TrafficState};
use crate::reachability::predict_rounded;

/// Cycles every intersection through its configurations, holding each for
/// `dwell` steps, and admits the nominal inflow.
pub struct PeriodicBaseline {
    dwell: usize,
    u_nom: NominalInflow,
}

impl PeriodicBaseline {
    pub fn new(dwell: usize, u_nom: NominalInflow) -> Self {
        assert!(dwell > 0, "dwell must be positive");
        PeriodicBaseline { dwell, u_nom }
    }

    pub fn action_at(&self, spec: &NetworkSpec, t: usize) -> SignalAction {
        SignalAction(
            spec.config_counts()
                .iter()
                .map(|&c| (t / self.dwell) % c)
                .collect(),
        )
    }

    /// Path with the least forecast density under the periodic plan.
    fn choose_path(
        &self,
        spec: &NetworkSpec,
        t: usize,
        x: &TrafficState,
        status: &EmergencyStatus,
    ) -> Result<usize, ControlError> {
        if status.paths.is_empty() {
            return Err(ControlError::Input("no candidate emergency path".into()));
        }
        let steps = status.priority_steps();
        let actions: Vec<SignalAction> = (t..t + steps).map(|s| self.action_at(spec, s)).collect();
        let inflows = self.u_nom.window(t, steps);
        let forecast = predict_rounded(spec, x, &actions, &inflows)?;
        let mut best = (f64::INFINITY, 0);
        for (i, p) in status.paths.iter().enumerate() {
            let s = path_score(&forecast.steps, p, steps);
            if s < best.0 {
                best = (s, i);
            }
        }
        Ok(best.1)
    }
}

impl Controller for PeriodicBaseline {
    fn name(&self) -> &'static str {
        "baseline"
    }

    fn decide(
        &mut self,
        spec: &NetworkSpec,
        t: usize,
        x: &TrafficState,
        emergency: Option<&EmergencyStatus>,
    ) -> Result<StepOutput, ControlError> {
        let start = Instant::now();
        let selected_path = match emergency {
            Some(st) if st.selected.is_none() => Some(self.choose_path(spec, t, x, st)?),
            _ => None,
        };
        Ok(StepOutput {
            inflow: self.u_nom.at(t).clone(),
            action: self.action_at(spec, t),
            selected_path,
            stats: SolverStats {
                micros: start.elapsed().as_micros() as u64,
                ..SolverStats::default()
            },
        })
    }
}
