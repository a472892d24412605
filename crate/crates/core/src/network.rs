//! Signalized lane network and the discrete-time cell-transmission dynamics.
//!
//! Lanes are addressed by zero-based index internally. Every lane also
//! carries an external label (the id used in scenario files and reports),
//! so diagnostics can name lanes the way a user wrote them.

use std::collections::BTreeSet;
use std::fmt;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Tolerance used when checking that split fractions sum to one.
pub const SPLIT_SUM_TOL: f64 = 1e-9;

/// Outflow parameters of one lane under one light state.
#[derive(Clone, Debug, PartialEq)]
pub struct LaneFlow {
    pub green: bool,
    /// Fraction of the lane's vehicles that leave it during one period.
    pub outflow: f64,
    /// `(destination lane, fraction)` pairs describing where the outflow goes.
    pub splits: Vec<(usize, f64)>,
}

impl LaneFlow {
    pub fn red() -> Self {
        LaneFlow {
            green: false,
            outflow: 0.0,
            splits: Vec::new(),
        }
    }

    /// Green light with the outflow split evenly over `successors`.
    pub fn green_uniform(outflow: f64, successors: &[usize]) -> Self {
        let share = if successors.is_empty() {
            0.0
        } else {
            1.0 / successors.len() as f64
        };
        LaneFlow {
            green: true,
            outflow,
            splits: successors.iter().map(|&s| (s, share)).collect(),
        }
    }
}

/// One local light configuration of an intersection.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseConfig {
    pub name: String,
    /// Flow per controlled lane, aligned with [`Intersection::lanes`].
    pub flows: Vec<LaneFlow>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Intersection {
    pub label: u32,
    pub lanes: Vec<usize>,
    pub configs: Vec<PhaseConfig>,
}

/// Integer disturbance box `d_min <= d <= d_max`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DisturbanceBox {
    pub min: Vec<i32>,
    pub max: Vec<i32>,
}

impl DisturbanceBox {
    pub fn uniform(n: usize, lo: i32, hi: i32) -> Self {
        DisturbanceBox {
            min: vec![lo; n],
            max: vec![hi; n],
        }
    }

    pub fn zero(n: usize) -> Self {
        Self::uniform(n, 0, 0)
    }

    pub fn contains(&self, d: &[i32]) -> bool {
        d.len() == self.min.len()
            && d.iter()
                .zip(self.min.iter().zip(&self.max))
                .all(|(v, (lo, hi))| lo <= v && v <= hi)
    }

    /// Largest absolute one-step disturbance over all lanes.
    pub fn radius(&self) -> i32 {
        self.min
            .iter()
            .chain(&self.max)
            .map(|v| v.abs())
            .max()
            .unwrap_or(0)
    }
}

/// Network topology plus the nominal per-configuration flow tables.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkSpec {
    labels: Vec<u32>,
    inlets: Vec<usize>,
    edges: BTreeSet<(usize, usize)>,
    opposite_pairs: Vec<(usize, usize)>,
    intersections: Vec<Intersection>,
    /// Flow of lanes not behind a light (outlets, free-flowing links).
    free_flows: Vec<Option<LaneFlow>>,
    disturbance: DisturbanceBox,
    /// `(intersection, position in its lane list)` for controlled lanes.
    controller: Vec<Option<(usize, usize)>>,
}

impl NetworkSpec {
    /// Assembles a spec without checking its invariants; see [`NetworkSpec::validate`].
    pub fn new(
        labels: Vec<u32>,
        inlets: Vec<usize>,
        edges: impl IntoIterator<Item = (usize, usize)>,
        opposite_pairs: Vec<(usize, usize)>,
        intersections: Vec<Intersection>,
        free_flows: Vec<Option<LaneFlow>>,
        disturbance: DisturbanceBox,
    ) -> Self {
        let n = labels.len();
        let mut controller = vec![None; n];
        for (j, inter) in intersections.iter().enumerate() {
            for (pos, &lane) in inter.lanes.iter().enumerate() {
                if lane < n && controller[lane].is_none() {
                    controller[lane] = Some((j, pos));
                }
            }
        }
        NetworkSpec {
            labels,
            inlets,
            edges: edges.into_iter().collect(),
            opposite_pairs,
            intersections,
            free_flows,
            disturbance,
            controller,
        }
    }

    pub fn n_lanes(&self) -> usize {
        self.labels.len()
    }

    pub fn n_intersections(&self) -> usize {
        self.intersections.len()
    }

    pub fn n_inlets(&self) -> usize {
        self.inlets.len()
    }

    pub fn inlets(&self) -> &[usize] {
        &self.inlets
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// External label of a lane index.
    pub fn label(&self, lane: usize) -> u32 {
        self.labels[lane]
    }

    /// Lane index for an external label.
    pub fn lane(&self, label: u32) -> Option<usize> {
        self.labels.iter().position(|&l| l == label)
    }

    pub fn edges(&self) -> &BTreeSet<(usize, usize)> {
        &self.edges
    }

    pub fn successors(&self, lane: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges
            .range((lane, 0)..=(lane, usize::MAX))
            .map(|&(_, to)| to)
    }

    pub fn intersections(&self) -> &[Intersection] {
        &self.intersections
    }

    pub fn disturbance(&self) -> &DisturbanceBox {
        &self.disturbance
    }

    pub fn with_disturbance(mut self, disturbance: DisturbanceBox) -> Self {
        self.disturbance = disturbance;
        self
    }

    /// Number of local configurations `mu_j` per intersection.
    pub fn config_counts(&self) -> Vec<usize> {
        self.intersections.iter().map(|i| i.configs.len()).collect()
    }

    pub fn controlling_intersection(&self, lane: usize) -> Option<usize> {
        self.controller[lane].map(|(j, _)| j)
    }

    /// Index of the inlet fed by `lane`, if it is one.
    pub fn inlet_position(&self, lane: usize) -> Option<usize> {
        self.inlets.iter().position(|&l| l == lane)
    }

    /// The `N x N_in` inlet incidence matrix `B`.
    pub fn inlet_matrix(&self) -> DMatrix<f64> {
        let mut b = DMatrix::zeros(self.n_lanes(), self.n_inlets());
        for (col, &lane) in self.inlets.iter().enumerate() {
            b[(lane, col)] = 1.0;
        }
        b
    }

    /// `B u` as a dense lane vector.
    pub fn inlet_injection(&self, inflow: &[u32]) -> Vec<f64> {
        let mut v = vec![0.0; self.n_lanes()];
        for (&lane, &u) in self.inlets.iter().zip(inflow) {
            v[lane] += f64::from(u);
        }
        v
    }

    /// Flow parameters of `lane` under `action`.
    pub fn flow(&self, lane: usize, action: &SignalAction) -> Option<&LaneFlow> {
        match self.controller[lane] {
            Some((j, pos)) => {
                let cfg = *action.0.get(j)?;
                self.intersections[j].configs.get(cfg)?.flows.get(pos)
            }
            None => self.free_flows.get(lane).and_then(|f| f.as_ref()),
        }
    }

    pub fn check_action(&self, action: &SignalAction) -> Result<(), ModelError> {
        if action.0.len() != self.n_intersections() {
            return Err(ModelError::ActionArity {
                expected: self.n_intersections(),
                got: action.0.len(),
            });
        }
        for (j, (&cfg, inter)) in action.0.iter().zip(&self.intersections).enumerate() {
            if cfg >= inter.configs.len() {
                return Err(ModelError::ActionIndex {
                    intersection: j,
                    index: cfg,
                    available: inter.configs.len(),
                });
            }
        }
        Ok(())
    }

    pub fn check_inflow(&self, inflow: &InflowVector) -> Result<(), ModelError> {
        if inflow.0.len() != self.n_inlets() {
            return Err(ModelError::Dimension {
                what: "inflow vector",
                expected: self.n_inlets(),
                got: inflow.0.len(),
            });
        }
        Ok(())
    }

    /// All global actions in lexicographic order (first intersection most significant).
    pub fn action_space(&self) -> ActionSpace {
        ActionSpace::new(self.config_counts())
    }

    /// Checks every structural invariant and reports each violation found.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        let n = self.n_lanes();
        let name = |lane: usize| -> String {
            self.labels
                .get(lane)
                .map(|l| l.to_string())
                .unwrap_or_else(|| format!("#{lane}"))
        };

        let unique: BTreeSet<u32> = self.labels.iter().copied().collect();
        if unique.len() != n {
            report.push(Violation::DuplicateLaneLabel);
        }
        if self.free_flows.len() != n {
            report.push(Violation::LaneTableSize {
                expected: n,
                got: self.free_flows.len(),
            });
        }
        if self.inlets.len() >= n && n > 0 {
            report.push(Violation::TooManyInlets);
        }
        for &lane in &self.inlets {
            if lane >= n {
                report.push(Violation::UnknownLane(format!("inlet #{lane}")));
            }
        }

        for &(a, b) in &self.edges {
            if a >= n || b >= n {
                report.push(Violation::UnknownLane(format!("edge ({a},{b})")));
                continue;
            }
            if a == b {
                report.push(Violation::SelfLoop { lane: name(a) });
            }
            if a < b && self.edges.contains(&(b, a)) {
                report.push(Violation::BidirectionalEdge {
                    from: name(a),
                    to: name(b),
                });
            }
        }
        for &(a, b) in &self.opposite_pairs {
            if self.edges.contains(&(a, b)) || self.edges.contains(&(b, a)) {
                report.push(Violation::UTurn {
                    a: name(a),
                    b: name(b),
                });
            }
        }

        let mut owner: Vec<Option<u32>> = vec![None; n];
        for inter in &self.intersections {
            if inter.configs.is_empty() {
                report.push(Violation::NoConfigurations {
                    intersection: inter.label,
                });
            }
            for &lane in &inter.lanes {
                if lane >= n {
                    report.push(Violation::UnknownLane(format!(
                        "intersection {} lane #{lane}",
                        inter.label
                    )));
                    continue;
                }
                if let Some(prev) = owner[lane] {
                    report.push(Violation::MultipleControllers {
                        lane: name(lane),
                        first: prev,
                        second: inter.label,
                    });
                } else {
                    owner[lane] = Some(inter.label);
                }
                if self.successors(lane).next().is_none() {
                    report.push(Violation::ControlledOutlet { lane: name(lane) });
                }
            }
            for cfg in &inter.configs {
                if cfg.flows.len() != inter.lanes.len() {
                    report.push(Violation::LaneTableSize {
                        expected: inter.lanes.len(),
                        got: cfg.flows.len(),
                    });
                    continue;
                }
                for (&lane, flow) in inter.lanes.iter().zip(&cfg.flows) {
                    if lane < n {
                        let at = format!("intersection {} config '{}'", inter.label, cfg.name);
                        self.check_flow(lane, flow, &at, &name, &mut report);
                    }
                }
            }
        }
        for lane in 0..n.min(self.free_flows.len()) {
            match (&self.free_flows[lane], owner[lane]) {
                (Some(_), Some(inter)) => report.push(Violation::ControlledAndFree {
                    lane: name(lane),
                    intersection: inter,
                }),
                (Some(flow), None) => {
                    self.check_flow(lane, flow, "uncontrolled", &name, &mut report)
                }
                (None, None) => report.push(Violation::MissingFlow { lane: name(lane) }),
                (None, Some(_)) => {}
            }
        }

        let d = &self.disturbance;
        if d.min.len() != n || d.max.len() != n {
            report.push(Violation::DisturbanceBox(format!(
                "expected {n} entries, got min {} / max {}",
                d.min.len(),
                d.max.len()
            )));
        } else {
            for lane in 0..n {
                if !(d.min[lane] <= 0 && 0 <= d.max[lane]) {
                    report.push(Violation::DisturbanceBox(format!(
                        "lane {}: [{}, {}] does not contain 0",
                        name(lane),
                        d.min[lane],
                        d.max[lane]
                    )));
                }
            }
        }
        report
    }

    fn check_flow(
        &self,
        lane: usize,
        flow: &LaneFlow,
        at: &str,
        name: &dyn Fn(usize) -> String,
        report: &mut ValidationReport,
    ) {
        let lane_name = name(lane);
        if !(0.0..=1.0).contains(&flow.outflow) {
            report.push(Violation::FractionRange {
                lane: lane_name.clone(),
                at: at.to_string(),
                value: flow.outflow,
            });
        }
        if !flow.green {
            if flow.outflow != 0.0 || flow.splits.iter().any(|&(_, q)| q != 0.0) {
                report.push(Violation::RedLaneFlows {
                    lane: lane_name,
                    at: at.to_string(),
                });
            }
            return;
        }
        let mut sum = 0.0;
        for &(to, q) in &flow.splits {
            if !(0.0..=1.0).contains(&q) {
                report.push(Violation::FractionRange {
                    lane: lane_name.clone(),
                    at: at.to_string(),
                    value: q,
                });
            }
            if q != 0.0 && !self.edges.contains(&(lane, to)) {
                report.push(Violation::SplitOffEdge {
                    from: lane_name.clone(),
                    to: name(to),
                    at: at.to_string(),
                });
            }
            sum += q;
        }
        let has_successor = self.successors(lane).next().is_some();
        if has_successor && (sum - 1.0).abs() > SPLIT_SUM_TOL {
            report.push(Violation::SplitSum {
                lane: lane_name,
                at: at.to_string(),
                sum,
            });
        }
    }

    /// Dense traffic tendency matrix `A(action)`.
    pub fn assemble_tendency(&self, action: &SignalAction) -> Result<DMatrix<f64>, ModelError> {
        Ok(self.tendency(action)?.to_dense())
    }

    /// Sparse form of `A(action)` used by the prediction loops.
    pub fn tendency(&self, action: &SignalAction) -> Result<Tendency, ModelError> {
        self.check_action(action)?;
        let n = self.n_lanes();
        let mut diag = vec![1.0; n];
        let mut transfers = Vec::new();
        for (lane, d) in diag.iter_mut().enumerate() {
            let Some(flow) = self.flow(lane, action) else {
                continue;
            };
            if !flow.green {
                continue;
            }
            *d = 1.0 - flow.outflow;
            for &(to, q) in &flow.splits {
                let w = q * flow.outflow;
                if w != 0.0 && to != lane {
                    transfers.push((lane, to, w));
                }
            }
        }
        Ok(Tendency { diag, transfers })
    }

    /// One exact step: `max{[A x + B u]_+ + d, 0}`.
    pub fn step_exact(
        &self,
        state: &TrafficState,
        action: &SignalAction,
        inflow: &InflowVector,
        disturbance: &[i32],
    ) -> Result<TrafficState, ModelError> {
        if state.0.len() != self.n_lanes() {
            return Err(ModelError::Dimension {
                what: "state",
                expected: self.n_lanes(),
                got: state.0.len(),
            });
        }
        self.check_inflow(inflow)?;
        if !self.disturbance.contains(disturbance) {
            return Err(ModelError::DisturbanceOutOfBox);
        }
        let a = self.tendency(action)?;
        let x: Vec<f64> = state.0.iter().map(|&v| f64::from(v)).collect();
        let mut next = self.inlet_injection(&inflow.0);
        a.apply_add(&x, &mut next);
        Ok(TrafficState(
            next.iter()
                .zip(disturbance)
                .map(|(&v, &d)| (round_nonneg(v) + i64::from(d)).max(0) as u32)
                .collect(),
        ))
    }

    /// Draws each lane's disturbance uniformly from its integer range.
    pub fn sample_disturbance<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<i32> {
        self.disturbance
            .min
            .iter()
            .zip(&self.disturbance.max)
            .map(|(&lo, &hi)| rng.random_range(lo..=hi))
            .collect()
    }
}

/// `[v]_+`: the closest nonnegative integer, ties away from zero.
pub fn round_nonneg(v: f64) -> i64 {
    (v.round() as i64).max(0)
}

/// Sparse tendency matrix: diagonal retention plus lane-to-lane transfers.
#[derive(Clone, Debug, PartialEq)]
pub struct Tendency {
    pub diag: Vec<f64>,
    /// `(from, to, weight)` with weight `q_{from,to} p_from`.
    pub transfers: Vec<(usize, usize, f64)>,
}

impl Tendency {
    /// `out += A x`.
    #[inline]
    pub fn apply_add(&self, x: &[f64], out: &mut [f64]) {
        for ((o, &d), &xi) in out.iter_mut().zip(&self.diag).zip(x) {
            *o += d * xi;
        }
        for &(from, to, w) in &self.transfers {
            out[to] += w * x[from];
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.diag.len();
        let mut a = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.diag));
        for &(from, to, w) in &self.transfers {
            a[(to, from)] += w;
        }
        debug_assert_eq!(a.nrows(), n);
        a
    }
}

/// One configuration index per intersection.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SignalAction(pub Vec<usize>);

impl fmt::Display for SignalAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", c + 1)?;
        }
        write!(f, ")")
    }
}

pub type SignalPlan = Vec<SignalAction>;

/// Vehicle counts per lane.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TrafficState(pub Vec<u32>);

impl TrafficState {
    pub fn as_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&v| f64::from(v)).collect()
    }

    pub fn total(&self) -> u64 {
        self.0.iter().map(|&v| u64::from(v)).sum()
    }
}

/// Vehicles admitted per period through each inlet gate.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InflowVector(pub Vec<u32>);

impl InflowVector {
    pub fn zeros(n: usize) -> Self {
        InflowVector(vec![0; n])
    }
}

/// Enumerates the product of per-intersection configuration sets.
#[derive(Clone, Debug)]
pub struct ActionSpace {
    counts: Vec<usize>,
}

impl ActionSpace {
    pub fn new(counts: Vec<usize>) -> Self {
        ActionSpace { counts }
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The `rank`-th action in lexicographic order.
    pub fn nth(&self, mut rank: usize) -> SignalAction {
        let mut idx = vec![0; self.counts.len()];
        for (slot, &c) in idx.iter_mut().zip(&self.counts).rev() {
            *slot = rank % c;
            rank /= c;
        }
        SignalAction(idx)
    }

    pub fn iter(&self) -> impl Iterator<Item = SignalAction> + '_ {
        (0..self.len()).map(|r| self.nth(r))
    }

    /// Uniform draw, one configuration per intersection in order.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SignalAction {
        SignalAction(
            self.counts
                .iter()
                .map(|&c| rng.random_range(0..c))
                .collect(),
        )
    }
}

/// A single invariant failure found by [`NetworkSpec::validate`].
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    DuplicateLaneLabel,
    LaneTableSize {
        expected: usize,
        got: usize,
    },
    TooManyInlets,
    UnknownLane(String),
    SelfLoop {
        lane: String,
    },
    BidirectionalEdge {
        from: String,
        to: String,
    },
    UTurn {
        a: String,
        b: String,
    },
    NoConfigurations {
        intersection: u32,
    },
    MultipleControllers {
        lane: String,
        first: u32,
        second: u32,
    },
    ControlledAndFree {
        lane: String,
        intersection: u32,
    },
    ControlledOutlet {
        lane: String,
    },
    MissingFlow {
        lane: String,
    },
    FractionRange {
        lane: String,
        at: String,
        value: f64,
    },
    RedLaneFlows {
        lane: String,
        at: String,
    },
    SplitOffEdge {
        from: String,
        to: String,
        at: String,
    },
    SplitSum {
        lane: String,
        at: String,
        sum: f64,
    },
    DisturbanceBox(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            DuplicateLaneLabel => write!(f, "duplicate lane label"),
            LaneTableSize { expected, got } => {
                write!(f, "lane table has {got} entries, expected {expected}")
            }
            TooManyInlets => write!(f, "inlet count must be smaller than lane count"),
            UnknownLane(what) => write!(f, "unknown lane referenced by {what}"),
            SelfLoop { lane } => write!(f, "self loop on lane {lane}"),
            BidirectionalEdge { from, to } => {
                write!(f, "bidirectional edge between lanes {from} and {to}")
            }
            UTurn { a, b } => write!(f, "u-turn edge between opposite lanes {a} and {b}"),
            NoConfigurations { intersection } => {
                write!(f, "intersection {intersection} has no configurations")
            }
            MultipleControllers {
                lane,
                first,
                second,
            } => write!(f, "lane {lane} is controlled by intersections {first} and {second}"),
            ControlledAndFree { lane, intersection } => write!(
                f,
                "lane {lane} is controlled by intersection {intersection} and also listed as uncontrolled"
            ),
            ControlledOutlet { lane } => {
                write!(f, "outlet lane {lane} has a traffic light")
            }
            MissingFlow { lane } => write!(f, "lane {lane} has no flow parameters"),
            FractionRange { lane, at, value } => {
                write!(f, "lane {lane} ({at}): fraction {value} outside [0,1]")
            }
            RedLaneFlows { lane, at } => {
                write!(f, "lane {lane} ({at}): red light with nonzero outflow or split")
            }
            SplitOffEdge { from, to, at } => {
                write!(f, "lane {from} ({at}): split toward {to} but ({from},{to}) is not an edge")
            }
            SplitSum { lane, at, sum } => {
                write!(f, "lane {lane} ({at}): split fractions sum {sum} != 1")
            }
            DisturbanceBox(msg) => write!(f, "disturbance box: {msg}"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, v: Violation) {
        self.violations.push(v);
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return write!(f, "OK");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}
