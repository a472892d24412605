//! Closed-loop simulation of the exact dynamics under a controller.

use std::fmt;
use std::str::FromStr;

use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::baseline::PeriodicBaseline;
use super::record::{EmergencyOutcome, Mode, RunRecord, StepRecord};
use crate::error::ControlError;
use crate::mpc::{
    advance_mode, controller_rng, CentralizedController, Controller, DecentralizedController,
    EmergencyStatus, UnitSpec,
};
use crate::network::NetworkSpec;
use crate::scenario::{EmergencyEvent, Scenario};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerKind {
    Centralized,
    Decentralized,
    Baseline,
}

impl ControllerKind {
    pub const ALL: [ControllerKind; 3] = [
        ControllerKind::Centralized,
        ControllerKind::Decentralized,
        ControllerKind::Baseline,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ControllerKind::Centralized => "centralized",
            ControllerKind::Decentralized => "decentralized",
            ControllerKind::Baseline => "baseline",
        }
    }
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ControllerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "centralized" => Ok(ControllerKind::Centralized),
            "decentralized" => Ok(ControllerKind::Decentralized),
            "baseline" | "periodic" => Ok(ControllerKind::Baseline),
            other => Err(format!(
                "unknown controller `{other}` (expected centralized, decentralized or baseline)"
            )),
        }
    }
}

/// Disturbance draws, on a stream no controller uses.
pub fn disturbance_rng(seed: u64) -> ChaCha8Rng {
    controller_rng(seed, u64::MAX)
}

pub fn build_controller(
    scenario: &Scenario,
    kind: ControllerKind,
) -> Result<Box<dyn Controller>, ControlError> {
    build_with_units(scenario, kind, scenario.units.clone())
}

/// Like [`build_controller`], with an explicit partition for the
/// decentralized scheme.
pub fn build_with_units(
    scenario: &Scenario,
    kind: ControllerKind,
    units: Vec<UnitSpec>,
) -> Result<Box<dyn Controller>, ControlError> {
    let spec = &scenario.network;
    Ok(match kind {
        ControllerKind::Centralized => Box::new(CentralizedController::new(
            spec,
            scenario.controller.clone(),
        )),
        ControllerKind::Decentralized => Box::new(DecentralizedController::new(
            spec,
            scenario.controller.clone(),
            units,
            &scenario.initial,
        )?),
        ControllerKind::Baseline => Box::new(PeriodicBaseline::new(
            scenario.run.dwell,
            scenario.controller.u_nom.clone(),
        )),
    })
}

/// Whether sampled disturbances act on the plant.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Disturbances {
    Sampled,
    Zero,
}

pub fn run_closed_loop(
    scenario: &Scenario,
    kind: ControllerKind,
) -> Result<RunRecord, ControlError> {
    let mut c = build_controller(scenario, kind)?;
    run_with(scenario, c.as_mut(), Disturbances::Sampled)
}

/// Runs `scenario.run.steps` steps of `controller` on the exact dynamics.
/// Any controller error aborts the run.
pub fn run_with(
    scenario: &Scenario,
    controller: &mut dyn Controller,
    disturbances: Disturbances,
) -> Result<RunRecord, ControlError> {
    let spec: &NetworkSpec = &scenario.network;
    let mut rng = disturbance_rng(scenario.run.seed);
    let mut x = scenario.initial.clone();
    let mut states = vec![x.0.clone()];
    let mut steps = Vec::with_capacity(scenario.run.steps);
    let mut status: Option<EmergencyStatus> = None;
    let mut event: Option<&EmergencyEvent> = None;
    let mut outcome: Option<EmergencyOutcome> = None;

    for t in 0..scenario.run.steps {
        if let Some(e) = scenario.emergencies.iter().find(|e| e.time == t) {
            if status.is_some() {
                return Err(ControlError::Input(format!(
                    "emergency at step {t} overlaps the one still active"
                )));
            }
            let st = EmergencyStatus::new(spec, e.entry, e.exit, e.arrival, e.traverse, e.recovery);
            if st.paths.is_empty() {
                return Err(ControlError::Input(format!(
                    "no path from lane {} to lane {}",
                    spec.label(e.entry),
                    spec.label(e.exit)
                )));
            }
            status = st.is_active().then_some(st);
            event = Some(e);
        }
        if let (Some(st), Some(e)) = (status.as_mut(), event) {
            if let Some(o) = e.overrides.iter().find(|o| o.time == t) {
                st.arrival = o.arrival;
                st.traverse = o.traverse;
                st.recovery = o.recovery;
            }
        }

        let out = controller.decide(spec, t, &x, status.as_ref())?;
        let mode = if status.is_some() {
            Mode::Emergency
        } else {
            Mode::Normal
        };
        if let Some(st) = status.as_mut() {
            if st.selected.is_none() {
                let idx = out.selected_path.ok_or_else(|| {
                    ControlError::Protocol(format!(
                        "{} did not commit an emergency path at step {t}",
                        controller.name()
                    ))
                })?;
                st.selected = Some(idx);
                outcome = Some(EmergencyOutcome {
                    time: t,
                    path: st.paths[idx].clone(),
                    window_end: t + st.priority_steps(),
                });
            }
        }
        let relaxed = status.as_ref().is_some_and(|s| s.relaxed_steps() > 0);

        let d = match disturbances {
            Disturbances::Sampled => spec.sample_disturbance(&mut rng),
            Disturbances::Zero => vec![0; spec.n_lanes()],
        };
        x = spec.step_exact(&x, &out.action, &out.inflow, &d)?;
        states.push(x.0.clone());
        steps.push(StepRecord {
            t,
            inflow: out.inflow.0,
            action: out.action.0,
            mode,
            relaxed,
            qp_nodes: out.stats.qp_nodes,
            search_nodes: out.stats.search_nodes,
            relaxation: out.stats.relaxation,
            micros: out.stats.micros,
        });

        status = status
            .map(|s| advance_mode(&s))
            .filter(EmergencyStatus::is_active);
    }

    Ok(RunRecord {
        scenario: scenario.name.clone(),
        controller: controller.name().to_string(),
        seed: scenario.run.seed,
        lane_labels: spec.labels().to_vec(),
        inlet_labels: spec.inlets().iter().map(|&l| spec.label(l)).collect(),
        intersection_labels: spec.intersections().iter().map(|i| i.label).collect(),
        states,
        steps,
        emergency: outcome,
    })
}
