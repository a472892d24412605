//! Central control unit: one planner for the whole network.

use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::config::ControllerConfig;
use super::emergency::{stage_caps, stage_weights, EmergencyStatus};
use super::problem::{HorizonProblem, HorizonSolution, Ownership};
use super::{controller_rng, Controller, Decision, SolverStats, StepOutput};
use crate::error::ControlError;
use crate::network::{NetworkSpec, SignalAction, TrafficState};

fn check_warm(config: &ControllerConfig, warm: &[SignalAction]) -> Result<(), ControlError> {
    if warm.len() + 1 != config.horizon {
        return Err(ControlError::Input(format!(
            "warm plan has {} actions, expected {}",
            warm.len(),
            config.horizon - 1
        )));
    }
    Ok(())
}

fn solve(
    config: &ControllerConfig,
    spec: &NetworkSpec,
    t: usize,
    x: &TrafficState,
    warm: &[SignalAction],
    tail: &SignalAction,
    status: Option<&EmergencyStatus>,
) -> Result<Decision, ControlError> {
    check_warm(config, warm)?;
    let start = Instant::now();
    let t_f = config.horizon;
    let own = Ownership::everything(spec);
    let mut signal_plan = warm.to_vec();
    signal_plan.push(tail.clone());
    let nominal = config.u_nom.window(t, t_f);
    let problem = HorizonProblem {
        spec,
        x0: x.as_f64(),
        signal_plan,
        inflow_plan: nominal.clone(),
        nominal,
        weights: stage_weights(config, status, t_f),
        caps: stage_caps(config, status, t_f),
        theta: config.theta.clone(),
        u_max: config.u_max,
        own: &own,
        search: config.search,
    };
    let sol = problem.solve()?;
    Ok(decision(sol, start))
}

pub(crate) fn decision(sol: HorizonSolution, start: Instant) -> Decision {
    Decision {
        inflow: sol.inflow_plan[0].clone(),
        action: sol.signal_plan[0].clone(),
        stats: SolverStats {
            qp_nodes: sol.qp_nodes as u64,
            search_nodes: sol.search_nodes,
            micros: start.elapsed().as_micros() as u64,
            relaxation: sol.relaxation,
        },
        cost: sol.cost,
        predicted: sol.predicted,
        inflow_plan: sol.inflow_plan,
        signal_plan: sol.signal_plan,
    }
}

/// Normal-mode two-step decision against the plan `{warm, tail}`.
pub fn plan_normal(
    config: &ControllerConfig,
    spec: &NetworkSpec,
    t: usize,
    x: &TrafficState,
    warm: &[SignalAction],
    tail: &SignalAction,
) -> Result<Decision, ControlError> {
    solve(config, spec, t, x, warm, tail, None)
}

/// Emergency-mode decision for the committed path in `status`.
pub fn plan_emergency(
    config: &ControllerConfig,
    spec: &NetworkSpec,
    t: usize,
    x: &TrafficState,
    status: &EmergencyStatus,
    warm: &[SignalAction],
    tail: &SignalAction,
) -> Result<Decision, ControlError> {
    if status.selected.is_none() {
        return Err(ControlError::Input("no emergency path selected".into()));
    }
    solve(config, spec, t, x, warm, tail, Some(status))
}

/// Predicted density on `path` summed over `k = 1..=steps`.
pub fn path_score(predicted: &[Vec<f64>], path: &[usize], steps: usize) -> f64 {
    predicted
        .iter()
        .skip(1)
        .take(steps)
        .map(|x| path.iter().map(|&i| x[i]).sum::<f64>())
        .sum()
}

/// Solves the emergency problem once per candidate path and keeps the path
/// with the least predicted density; ties go to the earlier path.
pub fn select_emergency_path(
    config: &ControllerConfig,
    spec: &NetworkSpec,
    t: usize,
    x: &TrafficState,
    status: &EmergencyStatus,
    warm: &[SignalAction],
    tail: &SignalAction,
) -> Result<(usize, Decision), ControlError> {
    if status.paths.is_empty() {
        return Err(ControlError::Input("no candidate emergency path".into()));
    }
    let mut best: Option<(f64, usize, Decision)> = None;
    for idx in 0..status.paths.len() {
        let mut candidate = status.clone();
        candidate.selected = Some(idx);
        let d = plan_emergency(config, spec, t, x, &candidate, warm, tail)?;
        let score = path_score(&d.predicted, &status.paths[idx], status.priority_steps());
        if best.as_ref().is_none_or(|(s, _, _)| score < *s) {
            best = Some((score, idx, d));
        }
    }
    let (_, idx, d) = best.unwrap();
    Ok((idx, d))
}

/// Receding-horizon loop state of the central unit.
pub struct CentralizedController {
    config: ControllerConfig,
    rng: ChaCha8Rng,
    warm: Vec<SignalAction>,
}

impl CentralizedController {
    pub fn new(spec: &NetworkSpec, config: ControllerConfig) -> Self {
        let mut rng = controller_rng(config.seed, 0);
        let space = spec.action_space();
        let warm = (1..config.horizon)
            .map(|_| space.sample(&mut rng))
            .collect();
        CentralizedController { config, rng, warm }
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.config
    }

    pub fn warm_plan(&self) -> &[SignalAction] {
        &self.warm
    }

    fn draw_tail(&mut self, spec: &NetworkSpec) -> SignalAction {
        let counts = spec.config_counts();
        SignalAction(
            counts
                .iter()
                .map(|&c| self.rng.random_range(0..c))
                .collect(),
        )
    }
}

impl Controller for CentralizedController {
    fn name(&self) -> &'static str {
        "centralized"
    }

    fn decide(
        &mut self,
        spec: &NetworkSpec,
        t: usize,
        x: &TrafficState,
        emergency: Option<&EmergencyStatus>,
    ) -> Result<StepOutput, ControlError> {
        let tail = self.draw_tail(spec);
        let (decision, selected) = match emergency {
            Some(st) if st.selected.is_none() => {
                let start = Instant::now();
                let (idx, mut d) =
                    select_emergency_path(&self.config, spec, t, x, st, &self.warm, &tail)?;
                d.stats.micros = start.elapsed().as_micros() as u64;
                (d, Some(idx))
            }
            Some(st) => (
                plan_emergency(&self.config, spec, t, x, st, &self.warm, &tail)?,
                None,
            ),
            None => (
                plan_normal(&self.config, spec, t, x, &self.warm, &tail)?,
                None,
            ),
        };
        self.warm = decision.signal_plan[1..].to_vec();
        Ok(StepOutput {
            inflow: decision.inflow,
            action: decision.action,
            selected_path: selected,
            stats: decision.stats,
        })
    }
}
