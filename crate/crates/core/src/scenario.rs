//! TOML scenario files.
//!
//! Lanes, intersections and inlets are written with their external labels;
//! everything is translated to zero-based indices on load. See the README
//! for the full schema.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::error::ScenarioError;
use crate::mpc::{ControllerConfig, NominalInflow, UnitSpec};
use crate::network::{
    DisturbanceBox, InflowVector, Intersection, LaneFlow, NetworkSpec, PhaseConfig, TrafficState,
};
use crate::solver::SearchMode;

#[derive(Deserialize)]
#[serde(untagged)]
enum ScalarOr<T> {
    Scalar(T),
    List(Vec<T>),
}

impl<T: Clone> ScalarOr<T> {
    fn expand(&self, n: usize, field: &str) -> Result<Vec<T>, ScenarioError> {
        match self {
            ScalarOr::Scalar(v) => Ok(vec![v.clone(); n]),
            ScalarOr::List(v) if v.len() == n => Ok(v.clone()),
            ScalarOr::List(v) => Err(ScenarioError::field(
                field,
                format!("expected {n} entries, got {}", v.len()),
            )),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum InflowSpec {
    Constant(Vec<u32>),
    Schedule(Vec<Vec<u32>>),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    name: Option<String>,
    network: RawNetwork,
    initial: RawInitial,
    controller: RawController,
    #[serde(default)]
    units: Vec<RawUnit>,
    #[serde(default)]
    emergencies: Vec<RawEmergency>,
    #[serde(default)]
    run: RawRun,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNetwork {
    lanes: Vec<u32>,
    inlets: Vec<u32>,
    edges: Vec<(u32, u32)>,
    #[serde(default)]
    opposite_pairs: Vec<(u32, u32)>,
    /// Default outflow fraction of a green lane.
    #[serde(default = "default_outflow")]
    outflow: f64,
    disturbance: RawBox,
    #[serde(default)]
    intersections: Vec<RawIntersection>,
    /// Overrides for lanes not behind a light.
    #[serde(default)]
    free_lanes: Vec<RawFlow>,
}

fn default_outflow() -> f64 {
    0.6
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBox {
    min: ScalarOr<i32>,
    max: ScalarOr<i32>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIntersection {
    label: u32,
    lanes: Vec<u32>,
    configs: Vec<RawConfig>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    name: String,
    green: Vec<u32>,
    #[serde(default)]
    flows: Vec<RawFlow>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFlow {
    lane: u32,
    outflow: Option<f64>,
    /// `[destination, fraction]` pairs; uniform over successors when absent.
    splits: Option<Vec<(u32, f64)>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    state: Vec<u32>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawController {
    #[serde(default = "default_horizon")]
    horizon: usize,
    gamma: ScalarOr<f64>,
    theta: ScalarOr<f64>,
    u_nom: InflowSpec,
    caps: ScalarOr<f64>,
    extended_caps: ScalarOr<f64>,
    emergency_weight: f64,
    u_max: Option<u32>,
    #[serde(default)]
    exhaustive: bool,
}

fn default_horizon() -> usize {
    4
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawUnit {
    intersections: Vec<u32>,
    lanes: Vec<u32>,
    #[serde(default)]
    inlets: Vec<u32>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEmergency {
    time: usize,
    entry: u32,
    exit: u32,
    arrival: usize,
    traverse: usize,
    recovery: usize,
    #[serde(default)]
    overrides: Vec<RawOverride>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOverride {
    time: usize,
    arrival: usize,
    traverse: usize,
    recovery: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawRun {
    steps: usize,
    seed: u64,
    window: usize,
    dwell: usize,
}

impl Default for RawRun {
    fn default() -> Self {
        RawRun {
            steps: 40,
            seed: 1,
            window: 10,
            dwell: 2,
        }
    }
}

/// Scripted replacement of the countdowns at a given step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountdownOverride {
    pub time: usize,
    pub arrival: usize,
    pub traverse: usize,
    pub recovery: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EmergencyEvent {
    /// Step at which the notification arrives.
    pub time: usize,
    pub entry: usize,
    pub exit: usize,
    pub arrival: usize,
    pub traverse: usize,
    pub recovery: usize,
    pub overrides: Vec<CountdownOverride>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunSettings {
    pub steps: usize,
    pub seed: u64,
    /// Number of final states averaged into the steady-state density.
    pub window: usize,
    /// Steps each configuration is held by the periodic baseline.
    pub dwell: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub network: NetworkSpec,
    pub initial: TrafficState,
    pub controller: ControllerConfig,
    pub units: Vec<UnitSpec>,
    pub emergencies: Vec<EmergencyEvent>,
    pub run: RunSettings,
}

fn lane_of(labels: &BTreeMap<u32, usize>, label: u32, field: &str) -> Result<usize, ScenarioError> {
    labels
        .get(&label)
        .copied()
        .ok_or_else(|| ScenarioError::field(field, format!("unknown lane {label}")))
}

impl Scenario {
    pub fn load(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Scenario, ScenarioError> {
        let raw: RawFile = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        Self::from_raw(raw)
    }

    fn from_raw(raw: RawFile) -> Result<Scenario, ScenarioError> {
        let net = raw.network;
        let n = net.lanes.len();
        let mut labels = BTreeMap::new();
        for (i, &l) in net.lanes.iter().enumerate() {
            if labels.insert(l, i).is_some() {
                return Err(ScenarioError::field(
                    "network.lanes",
                    format!("lane {l} listed twice"),
                ));
            }
        }
        let inlets = net
            .inlets
            .iter()
            .map(|&l| lane_of(&labels, l, "network.inlets"))
            .collect::<Result<Vec<_>, _>>()?;
        let edges = net
            .edges
            .iter()
            .map(|&(a, b)| {
                Ok((
                    lane_of(&labels, a, "network.edges")?,
                    lane_of(&labels, b, "network.edges")?,
                ))
            })
            .collect::<Result<Vec<_>, ScenarioError>>()?;
        let opposite = net
            .opposite_pairs
            .iter()
            .map(|&(a, b)| {
                Ok((
                    lane_of(&labels, a, "network.opposite_pairs")?,
                    lane_of(&labels, b, "network.opposite_pairs")?,
                ))
            })
            .collect::<Result<Vec<_>, ScenarioError>>()?;
        let successors = |lane: usize| -> Vec<usize> {
            edges.iter().filter(|e| e.0 == lane).map(|e| e.1).collect()
        };
        let flow_from = |raw: &RawFlow, field: &str| -> Result<LaneFlow, ScenarioError> {
            let lane = lane_of(&labels, raw.lane, field)?;
            let outflow = raw.outflow.unwrap_or(net.outflow);
            Ok(match &raw.splits {
                None => LaneFlow::green_uniform(outflow, &successors(lane)),
                Some(pairs) => LaneFlow {
                    green: true,
                    outflow,
                    splits: pairs
                        .iter()
                        .map(|&(to, q)| Ok((lane_of(&labels, to, field)?, q)))
                        .collect::<Result<_, ScenarioError>>()?,
                },
            })
        };

        let mut intersections = Vec::with_capacity(net.intersections.len());
        let mut controlled = vec![false; n];
        for (j, ri) in net.intersections.iter().enumerate() {
            let field = format!("network.intersections[{j}]");
            let lanes = ri
                .lanes
                .iter()
                .map(|&l| lane_of(&labels, l, &format!("{field}.lanes")))
                .collect::<Result<Vec<_>, _>>()?;
            for &l in &lanes {
                controlled[l] = true;
            }
            let mut configs = Vec::with_capacity(ri.configs.len());
            for (c, rc) in ri.configs.iter().enumerate() {
                let cfield = format!("{field}.configs[{c}]");
                let mut flows = Vec::with_capacity(lanes.len());
                for &g in &rc.green {
                    if !ri.lanes.contains(&g) {
                        return Err(ScenarioError::field(
                            format!("{cfield}.green"),
                            format!("lane {g} is not controlled by intersection {}", ri.label),
                        ));
                    }
                }
                for (&lane, &label) in lanes.iter().zip(&ri.lanes) {
                    let flow = if let Some(over) = rc.flows.iter().find(|f| f.lane == label) {
                        if !rc.green.contains(&label) {
                            return Err(ScenarioError::field(
                                format!("{cfield}.flows"),
                                format!("lane {label} is red in this configuration"),
                            ));
                        }
                        flow_from(over, &format!("{cfield}.flows"))?
                    } else if rc.green.contains(&label) {
                        LaneFlow::green_uniform(net.outflow, &successors(lane))
                    } else {
                        LaneFlow::red()
                    };
                    flows.push(flow);
                }
                configs.push(PhaseConfig {
                    name: rc.name.clone(),
                    flows,
                });
            }
            intersections.push(Intersection {
                label: ri.label,
                lanes,
                configs,
            });
        }

        let mut free_flows: Vec<Option<LaneFlow>> = (0..n)
            .map(|l| (!controlled[l]).then(|| LaneFlow::green_uniform(net.outflow, &successors(l))))
            .collect();
        for (i, f) in net.free_lanes.iter().enumerate() {
            let field = format!("network.free_lanes[{i}]");
            let lane = lane_of(&labels, f.lane, &field)?;
            if controlled[lane] {
                return Err(ScenarioError::field(
                    field,
                    format!("lane {} is behind a light", f.lane),
                ));
            }
            free_flows[lane] = Some(flow_from(f, &field)?);
        }

        let disturbance = DisturbanceBox {
            min: net.disturbance.min.expand(n, "network.disturbance.min")?,
            max: net.disturbance.max.expand(n, "network.disturbance.max")?,
        };
        let network = NetworkSpec::new(
            net.lanes.clone(),
            inlets,
            edges,
            opposite,
            intersections,
            free_flows,
            disturbance,
        );
        let report = network.validate();
        if !report.is_ok() {
            return Err(ScenarioError::Network(report.to_string()));
        }

        if raw.initial.state.len() != n {
            return Err(ScenarioError::field(
                "initial.state",
                format!("expected {n} entries, got {}", raw.initial.state.len()),
            ));
        }
        let initial = TrafficState(raw.initial.state);

        let rc = raw.controller;
        let n_in = network.n_inlets();
        let u_nom = match rc.u_nom {
            InflowSpec::Constant(v) => NominalInflow::constant(InflowVector(v)),
            InflowSpec::Schedule(rows) if !rows.is_empty() => {
                NominalInflow::schedule(rows.into_iter().map(InflowVector).collect())
            }
            InflowSpec::Schedule(_) => {
                return Err(ScenarioError::field("controller.u_nom", "empty schedule"))
            }
        };
        let controller = ControllerConfig {
            horizon: rc.horizon,
            gamma: rc.gamma.expand(n, "controller.gamma")?,
            emergency_weight: rc.emergency_weight,
            theta: rc.theta.expand(n_in, "controller.theta")?,
            u_max: rc.u_max.unwrap_or(2 * u_nom.max_entry()),
            u_nom,
            caps: rc.caps.expand(n, "controller.caps")?,
            extended_caps: rc.extended_caps.expand(n, "controller.extended_caps")?,
            seed: raw.run.seed,
            search: if rc.exhaustive {
                SearchMode::Exhaustive
            } else {
                SearchMode::Pruned
            },
        };
        controller
            .validate(&network)
            .map_err(|m| ScenarioError::field("controller", m))?;
        if let Some(u) = controller
            .u_nom
            .rows()
            .iter()
            .flat_map(|r| r.0.iter())
            .find(|&&u| u > controller.u_max)
        {
            return Err(ScenarioError::field(
                "controller.u_nom",
                format!("nominal inflow {u} exceeds u_max {}", controller.u_max),
            ));
        }
        if let Some(l) = (0..n).find(|&l| f64::from(initial.0[l]) > controller.caps[l]) {
            return Err(ScenarioError::field(
                "initial.state",
                format!("lane {} starts above its cap", network.label(l)),
            ));
        }

        let units = if raw.units.is_empty() {
            UnitSpec::whole(&network)
        } else {
            let inter_of: BTreeMap<u32, usize> = network
                .intersections()
                .iter()
                .enumerate()
                .map(|(j, i)| (i.label, j))
                .collect();
            let mut units = Vec::with_capacity(raw.units.len());
            for (u, ru) in raw.units.iter().enumerate() {
                let field = format!("units[{u}]");
                let intersections = ru
                    .intersections
                    .iter()
                    .map(|l| {
                        inter_of.get(l).copied().ok_or_else(|| {
                            ScenarioError::field(
                                format!("{field}.intersections"),
                                format!("unknown intersection {l}"),
                            )
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let lanes = ru
                    .lanes
                    .iter()
                    .map(|&l| lane_of(&labels, l, &format!("{field}.lanes")))
                    .collect::<Result<Vec<_>, _>>()?;
                let inlets = ru
                    .inlets
                    .iter()
                    .map(|&l| {
                        let lane = lane_of(&labels, l, &format!("{field}.inlets"))?;
                        network.inlet_position(lane).ok_or_else(|| {
                            ScenarioError::field(
                                format!("{field}.inlets"),
                                format!("lane {l} is not an inlet"),
                            )
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                units.push(UnitSpec {
                    id: u,
                    intersections,
                    lanes,
                    inlets,
                });
            }
            UnitSpec::check_partition(&network, &units)
                .map_err(|m| ScenarioError::field("units", m))?;
            units
        };

        let mut emergencies = Vec::with_capacity(raw.emergencies.len());
        for (e, re) in raw.emergencies.iter().enumerate() {
            let field = format!("emergencies[{e}]");
            if re.time >= raw.run.steps {
                return Err(ScenarioError::field(
                    format!("{field}.time"),
                    format!("step {} is past the run length {}", re.time, raw.run.steps),
                ));
            }
            if let Some(o) = re.overrides.iter().find(|o| o.time <= re.time) {
                return Err(ScenarioError::field(
                    format!("{field}.overrides"),
                    format!("override at step {} precedes the notification", o.time),
                ));
            }
            emergencies.push(EmergencyEvent {
                time: re.time,
                entry: lane_of(&labels, re.entry, &format!("{field}.entry"))?,
                exit: lane_of(&labels, re.exit, &format!("{field}.exit"))?,
                arrival: re.arrival,
                traverse: re.traverse,
                recovery: re.recovery,
                overrides: re
                    .overrides
                    .iter()
                    .map(|o| CountdownOverride {
                        time: o.time,
                        arrival: o.arrival,
                        traverse: o.traverse,
                        recovery: o.recovery,
                    })
                    .collect(),
            });
        }
        emergencies.sort_by_key(|e| e.time);

        if raw.run.window == 0 || raw.run.window > raw.run.steps.max(1) {
            return Err(ScenarioError::field(
                "run.window",
                format!(
                    "window {} must lie in 1..={}",
                    raw.run.window,
                    raw.run.steps.max(1)
                ),
            ));
        }
        if raw.run.dwell == 0 {
            return Err(ScenarioError::field(
                "run.dwell",
                "dwell must be at least 1",
            ));
        }

        Ok(Scenario {
            name: raw.name.unwrap_or_else(|| "scenario".into()),
            network,
            initial,
            controller,
            units,
            emergencies,
            run: RunSettings {
                steps: raw.run.steps,
                seed: raw.run.seed,
                window: raw.run.window,
                dwell: raw.run.dwell,
            },
        })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.run.seed = seed;
        self.controller.seed = seed;
        self
    }

    pub fn with_steps(mut self, steps: usize) -> Self {
        self.run.steps = steps;
        self.run.window = self.run.window.min(steps.max(1));
        self
    }

    pub fn with_horizon(mut self, horizon: usize) -> Self {
        self.controller.horizon = horizon;
        self
    }
}
