//! Per-intersection control units coordinated through an aggregator.
//!
//! Each round the aggregator broadcasts a bundle with the previous global
//! state, the previously applied inputs and every unit's previous plans.
//! A unit predicts the current state from the bundle, overwrites its own
//! lanes with local measurements, fills in the other units' future inputs
//! from their shifted plans and then solves the two-step problem for its
//! own inlets and intersections only.

use std::io::Write;
use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::centralized::{decision, path_score};
use super::config::ControllerConfig;
use super::emergency::{stage_caps, stage_weights, EmergencyStatus};
use super::problem::{HorizonProblem, Ownership, Relaxation};
use super::{controller_rng, Controller, Decision, SolverStats, StepOutput};
use crate::error::ControlError;
use crate::network::{InflowVector, NetworkSpec, SignalAction, TrafficState};

/// Allowed round duration: one signal period.
pub const LATENCY_BUDGET_MICROS: u64 = 30_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitSpec {
    pub id: usize,
    pub intersections: Vec<usize>,
    pub lanes: Vec<usize>,
    /// Positions in the inlet vector.
    pub inlets: Vec<usize>,
}

impl UnitSpec {
    pub fn ownership(&self) -> Ownership {
        Ownership {
            intersections: self.intersections.clone(),
            inlets: self.inlets.clone(),
            lanes: self.lanes.clone(),
        }
    }

    /// One unit owning the whole network.
    pub fn whole(spec: &NetworkSpec) -> Vec<UnitSpec> {
        let own = Ownership::everything(spec);
        vec![UnitSpec {
            id: 0,
            intersections: own.intersections,
            lanes: own.lanes,
            inlets: own.inlets,
        }]
    }

    /// Checks that lanes, intersections and inlets are each partitioned.
    pub fn check_partition(spec: &NetworkSpec, units: &[UnitSpec]) -> Result<(), String> {
        if units.is_empty() {
            return Err("at least one control unit is required".into());
        }
        for (what, total, sets) in [
            (
                "lane",
                spec.n_lanes(),
                units.iter().map(|u| &u.lanes).collect::<Vec<_>>(),
            ),
            (
                "intersection",
                spec.n_intersections(),
                units.iter().map(|u| &u.intersections).collect(),
            ),
            (
                "inlet",
                spec.n_inlets(),
                units.iter().map(|u| &u.inlets).collect(),
            ),
        ] {
            let mut owner = vec![None; total];
            for (u, set) in sets.iter().enumerate() {
                for &i in *set {
                    if i >= total {
                        return Err(format!("unit {} names unknown {what} #{i}", u + 1));
                    }
                    if let Some(prev) = owner[i] {
                        return Err(format!(
                            "{what} #{i} owned by units {} and {}",
                            prev + 1,
                            u + 1
                        ));
                    }
                    owner[i] = Some(u);
                }
            }
            if let Some(i) = owner.iter().position(Option::is_none) {
                return Err(format!("{what} #{i} has no owning unit"));
            }
        }
        Ok(())
    }
}

/// A unit's plan over one horizon, restricted to what it owns.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitPlan {
    /// Round that produced the plan; `None` for the initial plans.
    pub produced_at: Option<usize>,
    /// Configuration per owned intersection, per step.
    pub signal: Vec<Vec<usize>>,
    /// Inflow per owned inlet, per step.
    pub inflow: Vec<Vec<u32>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreviousStep {
    pub state: TrafficState,
    /// Inputs applied during the previous step; absent before the first step.
    pub applied: Option<(SignalAction, InflowVector)>,
}

/// What every unit receives at the start of a round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregatorBundle {
    pub t: usize,
    pub previous: PreviousStep,
    pub plans: Vec<UnitPlan>,
    /// `U_nom(t), ..., U_nom(t + T_f - 1)`.
    pub u_nom: Vec<InflowVector>,
    pub emergency: Option<EmergencyStatus>,
}

/// One-step prediction `x(t|t-1)` from the bundle, assuming zero disturbance.
pub fn estimate_global_state(
    bundle: &AggregatorBundle,
    spec: &NetworkSpec,
) -> Result<TrafficState, ControlError> {
    match &bundle.previous.applied {
        None => Ok(bundle.previous.state.clone()),
        Some((action, inflow)) => {
            let zero = vec![0; spec.n_lanes()];
            Ok(spec.step_exact(&bundle.previous.state, action, inflow, &zero)?)
        }
    }
}

/// Replaces the unit's own lanes with local measurements `(lane, value)`.
pub fn patch_local_measurements(
    estimate: &TrafficState,
    unit: &UnitSpec,
    local: &[(usize, u32)],
) -> Result<TrafficState, ControlError> {
    let mut out = estimate.clone();
    for &(lane, v) in local {
        if !unit.lanes.contains(&lane) {
            return Err(ControlError::Input(format!(
                "unit {} does not own lane #{lane}",
                unit.id + 1
            )));
        }
        out.0[lane] = v;
    }
    Ok(out)
}

fn check_bundle(
    bundle: &AggregatorBundle,
    units: &[UnitSpec],
    horizon: usize,
) -> Result<(), ControlError> {
    if bundle.plans.len() != units.len() {
        return Err(ControlError::Protocol(format!(
            "bundle carries {} plans for {} units",
            bundle.plans.len(),
            units.len()
        )));
    }
    let expected = bundle.t.checked_sub(1);
    for (i, p) in bundle.plans.iter().enumerate() {
        if p.produced_at != expected {
            return Err(ControlError::Protocol(format!(
                "unit {} plan is from round {:?}, expected {:?}",
                i + 1,
                p.produced_at,
                expected
            )));
        }
        if p.signal.len() != horizon || p.inflow.len() != horizon {
            return Err(ControlError::Protocol(format!(
                "unit {} plan has wrong length",
                i + 1
            )));
        }
    }
    if bundle.u_nom.len() != horizon {
        return Err(ControlError::Protocol(
            "nominal inflow window has wrong length".into(),
        ));
    }
    Ok(())
}

/// Full-network plans as seen by one unit: every unit's previous plan
/// shifted by one step, random tail actions, nominal tail inflows.
fn assemble_plans(
    spec: &NetworkSpec,
    units: &[UnitSpec],
    bundle: &AggregatorBundle,
    tails: &[Vec<usize>],
) -> (Vec<SignalAction>, Vec<InflowVector>) {
    let t_f = bundle.u_nom.len();
    let mut signal = vec![SignalAction(vec![0; spec.n_intersections()]); t_f];
    let mut inflow = bundle.u_nom.clone();
    for ((unit, plan), tail) in units.iter().zip(&bundle.plans).zip(tails) {
        for k in 0..t_f {
            let configs = if k + 1 < t_f {
                &plan.signal[k + 1]
            } else {
                tail
            };
            for (&j, &c) in unit.intersections.iter().zip(configs) {
                signal[k].0[j] = c;
            }
            if k + 1 < t_f {
                for (&p, &u) in unit.inlets.iter().zip(&plan.inflow[k + 1]) {
                    inflow[k].0[p] = u;
                }
            }
        }
    }
    (signal, inflow)
}

/// Local two-step solve of one unit against fixed neighbour plans.
#[allow(clippy::too_many_arguments)]
fn plan_local(
    unit: &UnitSpec,
    units: &[UnitSpec],
    config: &ControllerConfig,
    spec: &NetworkSpec,
    bundle: &AggregatorBundle,
    corrected: &TrafficState,
    tails: &[Vec<usize>],
    status: Option<&EmergencyStatus>,
) -> Result<Decision, ControlError> {
    let start = Instant::now();
    let t_f = config.horizon;
    let (signal_plan, inflow_plan) = assemble_plans(spec, units, bundle, tails);
    let own = unit.ownership();
    let problem = HorizonProblem {
        spec,
        x0: corrected.as_f64(),
        signal_plan,
        inflow_plan,
        nominal: bundle.u_nom.clone(),
        weights: stage_weights(config, status, t_f),
        caps: stage_caps(config, status, t_f),
        theta: config.theta.clone(),
        u_max: config.u_max,
        own: &own,
        search: config.search,
    };
    Ok(decision(problem.solve()?, start))
}

/// Normal-mode local decision.
#[allow(clippy::too_many_arguments)]
pub fn plan_local_normal(
    unit: &UnitSpec,
    units: &[UnitSpec],
    config: &ControllerConfig,
    spec: &NetworkSpec,
    bundle: &AggregatorBundle,
    corrected: &TrafficState,
    tails: &[Vec<usize>],
) -> Result<Decision, ControlError> {
    plan_local(unit, units, config, spec, bundle, corrected, tails, None)
}

/// Emergency-mode local decision for the path committed in `status`.
#[allow(clippy::too_many_arguments)]
pub fn plan_local_emergency(
    unit: &UnitSpec,
    units: &[UnitSpec],
    config: &ControllerConfig,
    spec: &NetworkSpec,
    bundle: &AggregatorBundle,
    corrected: &TrafficState,
    tails: &[Vec<usize>],
    status: &EmergencyStatus,
) -> Result<Decision, ControlError> {
    if status.selected.is_none() {
        return Err(ControlError::Input("no emergency path selected".into()));
    }
    plan_local(
        unit,
        units,
        config,
        spec,
        bundle,
        corrected,
        tails,
        Some(status),
    )
}

/// One unit's contribution to a round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitRecord {
    pub unit: usize,
    pub configs: Vec<usize>,
    pub inflows: Vec<u32>,
    pub cost: f64,
    pub qp_nodes: u64,
    pub search_nodes: u64,
    pub relaxation: Option<Relaxation>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundTiming {
    pub unit_micros: Vec<u64>,
    /// Slowest unit; units run in parallel in the field.
    pub round_micros: u64,
    pub within_budget: bool,
}

/// Audit record of one round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundTrace {
    pub bundle: AggregatorBundle,
    pub units: Vec<UnitRecord>,
    /// Path committed this round, if any.
    pub selected_path: Option<usize>,
    pub timing: RoundTiming,
}

impl RoundTrace {
    /// The trace with wall-clock fields cleared, for replay comparisons.
    pub fn without_timing(&self) -> RoundTrace {
        let mut t = self.clone();
        t.timing = RoundTiming {
            unit_micros: vec![0; t.timing.unit_micros.len()],
            round_micros: 0,
            within_budget: true,
        };
        t
    }
}

/// Hub state: the last applied inputs and every unit's archived plans.
#[derive(Clone, Debug)]
pub struct Aggregator {
    previous: PreviousStep,
    plans: Vec<UnitPlan>,
}

impl Aggregator {
    fn bundle(
        &self,
        t: usize,
        config: &ControllerConfig,
        emergency: Option<&EmergencyStatus>,
    ) -> AggregatorBundle {
        AggregatorBundle {
            t,
            previous: self.previous.clone(),
            plans: self.plans.clone(),
            u_nom: config.u_nom.window(t, config.horizon),
            emergency: emergency.cloned(),
        }
    }
}

struct ControlUnit {
    spec: UnitSpec,
    rng: ChaCha8Rng,
}

pub struct DecentralizedController {
    config: ControllerConfig,
    units: Vec<ControlUnit>,
    unit_specs: Vec<UnitSpec>,
    aggregator: Aggregator,
    traces: Vec<RoundTrace>,
}

impl DecentralizedController {
    pub fn new(
        spec: &NetworkSpec,
        config: ControllerConfig,
        unit_specs: Vec<UnitSpec>,
        x0: &TrafficState,
    ) -> Result<Self, ControlError> {
        UnitSpec::check_partition(spec, &unit_specs).map_err(ControlError::Input)?;
        let t_f = config.horizon;
        let mut units = Vec::with_capacity(unit_specs.len());
        let mut plans = Vec::with_capacity(unit_specs.len());
        for (i, us) in unit_specs.iter().enumerate() {
            let mut rng = controller_rng(config.seed, i as u64);
            let counts: Vec<usize> = us
                .intersections
                .iter()
                .map(|&j| spec.intersections()[j].configs.len())
                .collect();
            // the first entry stands for the step already applied and is never read
            let draws: Vec<Vec<usize>> = (1..t_f)
                .map(|_| counts.iter().map(|&c| rng.random_range(0..c)).collect())
                .collect();
            let mut signal = vec![draws
                .first()
                .cloned()
                .unwrap_or_else(|| vec![0; counts.len()])];
            signal.extend(draws);
            let mut inflow = vec![us.inlets.iter().map(|&p| config.u_nom.at(0).0[p]).collect()];
            inflow.extend(
                (0..t_f - 1).map(|k| us.inlets.iter().map(|&p| config.u_nom.at(k).0[p]).collect()),
            );
            plans.push(UnitPlan {
                produced_at: None,
                signal,
                inflow,
            });
            units.push(ControlUnit {
                spec: us.clone(),
                rng,
            });
        }
        Ok(DecentralizedController {
            config,
            units,
            unit_specs,
            aggregator: Aggregator {
                previous: PreviousStep {
                    state: x0.clone(),
                    applied: None,
                },
                plans,
            },
            traces: Vec::new(),
        })
    }

    pub fn traces(&self) -> &[RoundTrace] {
        &self.traces
    }

    /// Writes one JSON object per round.
    pub fn write_log<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for trace in &self.traces {
            serde_json::to_writer(&mut out, trace)?;
            writeln!(out)?;
        }
        Ok(())
    }

    /// One synchronous round: broadcast, local solves, collection.
    pub fn run_round(
        &mut self,
        spec: &NetworkSpec,
        t: usize,
        measured: &TrafficState,
        emergency: Option<&EmergencyStatus>,
    ) -> Result<(RoundTrace, InflowVector, SignalAction), ControlError> {
        let bundle = self.aggregator.bundle(t, &self.config, emergency);
        check_bundle(&bundle, &self.unit_specs, self.config.horizon)?;
        let selecting = emergency.is_some_and(|e| e.selected.is_none());
        let n_paths = emergency.map_or(1, |e| e.paths.len());
        if selecting && n_paths == 0 {
            return Err(ControlError::Input("no candidate emergency path".into()));
        }

        // per unit: one decision per candidate path (or a single decision)
        let mut options: Vec<Vec<(f64, Decision)>> = Vec::with_capacity(self.units.len());
        let mut micros = Vec::with_capacity(self.units.len());
        for unit in self.units.iter_mut() {
            let start = Instant::now();
            let estimate = estimate_global_state(&bundle, spec)?;
            let local: Vec<(usize, u32)> = unit
                .spec
                .lanes
                .iter()
                .map(|&l| (l, measured.0[l]))
                .collect();
            let corrected = patch_local_measurements(&estimate, &unit.spec, &local)?;
            let tails: Vec<Vec<usize>> = self
                .unit_specs
                .iter()
                .map(|u| {
                    u.intersections
                        .iter()
                        .map(|&j| {
                            unit.rng
                                .random_range(0..spec.intersections()[j].configs.len())
                        })
                        .collect()
                })
                .collect();
            let mut opts = Vec::new();
            match emergency {
                Some(st) if selecting => {
                    for idx in 0..st.paths.len() {
                        let mut cand = st.clone();
                        cand.selected = Some(idx);
                        let d = plan_local_emergency(
                            &unit.spec,
                            &self.unit_specs,
                            &self.config,
                            spec,
                            &bundle,
                            &corrected,
                            &tails,
                            &cand,
                        )?;
                        let lanes: Vec<usize> = st.paths[idx]
                            .iter()
                            .copied()
                            .filter(|l| unit.spec.lanes.contains(l))
                            .collect();
                        let score = path_score(&d.predicted, &lanes, st.priority_steps());
                        opts.push((score, d));
                    }
                }
                Some(st) => opts.push((
                    0.0,
                    plan_local_emergency(
                        &unit.spec,
                        &self.unit_specs,
                        &self.config,
                        spec,
                        &bundle,
                        &corrected,
                        &tails,
                        st,
                    )?,
                )),
                None => opts.push((
                    0.0,
                    plan_local_normal(
                        &unit.spec,
                        &self.unit_specs,
                        &self.config,
                        spec,
                        &bundle,
                        &corrected,
                        &tails,
                    )?,
                )),
            }
            micros.push(start.elapsed().as_micros() as u64);
            options.push(opts);
        }

        // the aggregator sums the units' path reports and commits the best path
        let chosen = if selecting {
            let mut best = 0;
            let mut best_score = f64::INFINITY;
            for idx in 0..n_paths {
                let s: f64 = options.iter().map(|o| o[idx].0).sum();
                if s < best_score {
                    best_score = s;
                    best = idx;
                }
            }
            best
        } else {
            0
        };

        let mut action = SignalAction(vec![0; spec.n_intersections()]);
        let mut inflow = InflowVector::zeros(spec.n_inlets());
        let mut records = Vec::with_capacity(self.units.len());
        let mut new_plans = Vec::with_capacity(self.units.len());
        for (us, opts) in self.unit_specs.iter().zip(options) {
            let d = &opts[chosen].1;
            let signal: Vec<Vec<usize>> = d
                .signal_plan
                .iter()
                .map(|a| us.intersections.iter().map(|&j| a.0[j]).collect())
                .collect();
            let inflows: Vec<Vec<u32>> = d
                .inflow_plan
                .iter()
                .map(|u| us.inlets.iter().map(|&p| u.0[p]).collect())
                .collect();
            for (&j, &c) in us.intersections.iter().zip(&signal[0]) {
                action.0[j] = c;
            }
            for (&p, &u) in us.inlets.iter().zip(&inflows[0]) {
                inflow.0[p] = u;
            }
            records.push(UnitRecord {
                unit: us.id,
                configs: signal[0].clone(),
                inflows: inflows[0].clone(),
                cost: d.cost,
                qp_nodes: d.stats.qp_nodes,
                search_nodes: d.stats.search_nodes,
                relaxation: d.stats.relaxation.clone(),
            });
            new_plans.push(UnitPlan {
                produced_at: Some(t),
                signal,
                inflow: inflows,
            });
        }
        self.aggregator.plans = new_plans;
        self.aggregator.previous = PreviousStep {
            state: measured.clone(),
            applied: Some((action.clone(), inflow.clone())),
        };
        let round_micros = micros.iter().copied().max().unwrap_or(0);
        let trace = RoundTrace {
            bundle,
            units: records,
            selected_path: selecting.then_some(chosen),
            timing: RoundTiming {
                unit_micros: micros,
                round_micros,
                within_budget: round_micros <= LATENCY_BUDGET_MICROS,
            },
        };
        Ok((trace, inflow, action))
    }
}

fn merge_relaxations<'a>(parts: impl Iterator<Item = &'a Relaxation>) -> Option<Relaxation> {
    let mut acc: Option<Relaxation> = None;
    for r in parts {
        match &mut acc {
            None => acc = Some(r.clone()),
            Some(a) => {
                for (x, y) in a.inflow_margins.iter_mut().zip(&r.inflow_margins) {
                    *x += y;
                }
                for (x, y) in a.signal_margins.iter_mut().zip(&r.signal_margins) {
                    *x += y;
                }
            }
        }
    }
    acc
}

impl Controller for DecentralizedController {
    fn name(&self) -> &'static str {
        "decentralized"
    }

    fn decide(
        &mut self,
        spec: &NetworkSpec,
        t: usize,
        x: &TrafficState,
        emergency: Option<&EmergencyStatus>,
    ) -> Result<StepOutput, ControlError> {
        let (trace, inflow, action) = self.run_round(spec, t, x, emergency)?;
        let stats = SolverStats {
            qp_nodes: trace.units.iter().map(|u| u.qp_nodes).sum(),
            search_nodes: trace.units.iter().map(|u| u.search_nodes).sum(),
            micros: trace.timing.round_micros,
            relaxation: merge_relaxations(trace.units.iter().filter_map(|u| u.relaxation.as_ref())),
        };
        let selected_path = trace.selected_path;
        self.traces.push(trace);
        Ok(StepOutput {
            inflow,
            action,
            selected_path,
            stats,
        })
    }
}
