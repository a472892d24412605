//! The two-step horizon problem shared by the centralized controller and
//! the control units.
//!
//! Step 1 fixes a signal plan and picks integer inflows for the decision
//! inlets by solving an integer QP on the linear prediction. Step 2 fixes
//! those inflows and searches the signal configurations of the decision
//! intersections on the rounded prediction. Lanes outside `lanes` carry
//! no cost and no limit; intersections and inlets outside the decision
//! sets keep the values supplied in the plan.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::ControlError;
use crate::network::{InflowVector, NetworkSpec, SignalAction, Tendency};
use crate::solver::{
    min_violation_margins, search_signal_plan, solve_integer_qp, IntegerQp, PlanSearchProblem,
    QuadProgram, SearchMode,
};

/// Penalty added to the reported cost per unit of cap relaxation.
pub const RELAXATION_PENALTY: f64 = 1e6;

/// What a planner is allowed to choose and what it is responsible for.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ownership {
    pub intersections: Vec<usize>,
    /// Positions in the inlet vector.
    pub inlets: Vec<usize>,
    /// Lanes that enter the cost and the limits.
    pub lanes: Vec<usize>,
}

impl Ownership {
    pub fn everything(spec: &NetworkSpec) -> Self {
        Ownership {
            intersections: (0..spec.n_intersections()).collect(),
            inlets: (0..spec.n_inlets()).collect(),
            lanes: (0..spec.n_lanes()).collect(),
        }
    }
}

/// Inputs of one two-step solve.
#[derive(Clone, Debug)]
pub struct HorizonProblem<'a> {
    pub spec: &'a NetworkSpec,
    pub x0: Vec<f64>,
    /// Full-network plan used by Step 1; its owned entries seed Step 2.
    pub signal_plan: Vec<SignalAction>,
    /// Full inlet vectors; owned entries are overwritten by Step 1.
    pub inflow_plan: Vec<InflowVector>,
    pub nominal: Vec<InflowVector>,
    /// Lane weights for `k = 1..=T_f`.
    pub weights: Vec<Vec<f64>>,
    /// Lane limits for `k = 1..=T_f`.
    pub caps: Vec<Vec<f64>>,
    pub theta: Vec<f64>,
    pub u_max: u32,
    pub own: &'a Ownership,
    pub search: SearchMode,
}

/// Cap inflation applied because a step had no feasible solution.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Relaxation {
    pub inflow_margins: Vec<f64>,
    pub signal_margins: Vec<f64>,
}

impl Relaxation {
    pub fn total(&self) -> f64 {
        self.inflow_margins.iter().chain(&self.signal_margins).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HorizonSolution {
    pub inflow_plan: Vec<InflowVector>,
    pub signal_plan: Vec<SignalAction>,
    /// Step-2 cost plus the relaxation penalty.
    pub cost: f64,
    /// Rounded disturbance-free prediction of the final plan, `k = 0..=T_f`.
    pub predicted: Vec<Vec<f64>>,
    pub qp_nodes: usize,
    pub search_nodes: u64,
    pub relaxation: Option<Relaxation>,
}

fn masked(caps: &[Vec<f64>], lanes: &[usize]) -> Vec<Vec<f64>> {
    caps.iter()
        .map(|c| {
            let mut out = vec![f64::INFINITY; c.len()];
            for &l in lanes {
                out[l] = c[l];
            }
            out
        })
        .collect()
}

fn masked_weights(weights: &[Vec<f64>], lanes: &[usize]) -> Vec<Vec<f64>> {
    weights
        .iter()
        .map(|w| {
            let mut out = vec![0.0; w.len()];
            for &l in lanes {
                out[l] = w[l];
            }
            out
        })
        .collect()
}

impl HorizonProblem<'_> {
    pub fn horizon(&self) -> usize {
        self.signal_plan.len()
    }

    fn check(&self) -> Result<(), ControlError> {
        let t = self.horizon();
        if t == 0 {
            return Err(ControlError::Input("empty horizon".into()));
        }
        if self.inflow_plan.len() != t
            || self.nominal.len() != t
            || self.weights.len() != t
            || self.caps.len() != t
        {
            return Err(ControlError::Input(
                "per-step inputs differ in length from the signal plan".into(),
            ));
        }
        if self.x0.len() != self.spec.n_lanes() {
            return Err(ControlError::Input(
                "state length differs from lane count".into(),
            ));
        }
        Ok(())
    }

    /// Step 1: integer inflows for the owned inlets.
    fn solve_inflows(
        &self,
        caps: &[Vec<f64>],
        weights: &[Vec<f64>],
    ) -> Result<(Vec<InflowVector>, usize, Vec<f64>), ControlError> {
        let spec = self.spec;
        let t_f = self.horizon();
        let n = spec.n_lanes();
        let m = self.own.inlets.len();
        let mut inflows = self.inflow_plan.clone();
        if m == 0 {
            return Ok((inflows, 0, vec![0.0; t_f]));
        }
        let dim = t_f * m;
        let d_max: Vec<f64> = spec
            .disturbance()
            .max
            .iter()
            .map(|&d| f64::from(d))
            .collect();
        let inlet_lane: Vec<usize> = self.own.inlets.iter().map(|&p| spec.inlets()[p]).collect();

        // affine prediction x_k = h_k + G_k u, band offset s_k
        let mut h = self.x0.clone();
        let mut g = DMatrix::<f64>::zeros(n, dim);
        let mut s = vec![0.0; n];
        let mut hess = DMatrix::<f64>::zeros(dim, dim);
        let mut lin = DVector::<f64>::zeros(dim);
        let mut constant = 0.0;
        let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
        let mut margins = vec![0.0; t_f];

        for k in 0..t_f {
            let a = spec.tendency(&self.signal_plan[k])?;
            let mut fixed = self.inflow_plan[k].clone();
            for &p in &self.own.inlets {
                fixed.0[p] = 0;
            }
            let mut h_next = spec.inlet_injection(&fixed.0);
            a.apply_add(&h, &mut h_next);
            h = h_next;
            let mut s_next = d_max.clone();
            a.apply_add(&s, &mut s_next);
            s = s_next;
            let mut g_next = DMatrix::<f64>::zeros(n, dim);
            for col in 0..k * m {
                let column: Vec<f64> = g.column(col).iter().copied().collect();
                let mut out = vec![0.0; n];
                a.apply_add(&column, &mut out);
                g_next.set_column(col, &DVector::from_vec(out));
            }
            for (j, &lane) in inlet_lane.iter().enumerate() {
                g_next[(lane, k * m + j)] += 1.0;
            }
            g = g_next;

            let w = &weights[k];
            for i in 0..n {
                if w[i] == 0.0 {
                    continue;
                }
                let gi = g.row(i);
                for a_ in 0..dim {
                    if gi[a_] == 0.0 {
                        continue;
                    }
                    lin[a_] += 2.0 * w[i] * gi[a_] * h[i];
                    for b in 0..dim {
                        hess[(a_, b)] += 2.0 * w[i] * gi[a_] * gi[b];
                    }
                }
                constant += w[i] * h[i] * h[i];
            }

            let mut worst: f64 = 0.0;
            let mut step_rows = Vec::new();
            for i in 0..n {
                let cap = caps[k][i];
                if !cap.is_finite() {
                    continue;
                }
                let base = h[i] + s[i];
                let row: Vec<f64> = g.row(i).iter().map(|&v| v.max(0.0)).collect();
                worst = worst.max(base - cap);
                if row.iter().any(|&v| v > 0.0) {
                    step_rows.push((row, cap - base));
                }
            }
            let margin = (worst - 1e-9).ceil().max(0.0);
            margins[k] = margin;
            for (row, rhs) in step_rows {
                // rows already slack at the largest admissible inflow carry no information
                let top: f64 = row.iter().sum::<f64>() * f64::from(self.u_max);
                if top > rhs + margin {
                    rows.push((row, rhs + margin));
                }
            }
        }
        for k in 0..t_f {
            for (j, &p) in self.own.inlets.iter().enumerate() {
                let th = self.theta[p];
                let nom = f64::from(self.nominal[k].0[p]);
                let v = k * m + j;
                hess[(v, v)] += 2.0 * th;
                lin[v] -= 2.0 * th * nom;
                constant += th * nom * nom;
            }
        }
        let ineq = DMatrix::from_fn(rows.len(), dim, |r, c| rows[r].0[c]);
        let rhs = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1));
        let program = QuadProgram::new(hess, lin, constant, ineq, rhs)?;
        let iqp = IntegerQp {
            program,
            lower: vec![0; dim],
            upper: vec![i64::from(self.u_max); dim],
        };
        let sol = solve_integer_qp(&iqp)?;
        for k in 0..t_f {
            for (j, &p) in self.own.inlets.iter().enumerate() {
                inflows[k].0[p] = sol.point[k * m + j] as u32;
            }
        }
        Ok((inflows, sol.nodes, margins))
    }

    /// Candidate full-network actions per step for the owned intersections.
    fn candidates(&self) -> Vec<Vec<SignalAction>> {
        let counts: Vec<usize> = self
            .own
            .intersections
            .iter()
            .map(|&j| self.spec.intersections()[j].configs.len())
            .collect();
        let local = crate::network::ActionSpace::new(counts);
        self.signal_plan
            .iter()
            .map(|base| {
                local
                    .iter()
                    .map(|combo| {
                        let mut a = base.clone();
                        for (&j, &c) in self.own.intersections.iter().zip(&combo.0) {
                            a.0[j] = c;
                        }
                        a
                    })
                    .collect()
            })
            .collect()
    }

    /// Index of the owned part of `action` among the local combinations.
    fn local_index(&self, action: &SignalAction) -> usize {
        self.own.intersections.iter().fold(0, |acc, &j| {
            acc * self.spec.intersections()[j].configs.len() + action.0[j]
        })
    }

    pub fn solve(&self) -> Result<HorizonSolution, ControlError> {
        self.check()?;
        let t_f = self.horizon();
        let caps = masked(&self.caps, &self.own.lanes);
        let weights = masked_weights(&self.weights, &self.own.lanes);
        let (inflows, qp_nodes, inflow_margins) = self.solve_inflows(&caps, &weights)?;

        let actions = self.candidates();
        let tendencies: Vec<Vec<Tendency>> = actions
            .iter()
            .map(|step| {
                step.iter()
                    .map(|a| self.spec.tendency(a))
                    .collect::<Result<_, _>>()
            })
            .collect::<Result<_, _>>()?;
        let mut problem = PlanSearchProblem {
            x0: self.x0.clone(),
            candidates: tendencies,
            injections: inflows
                .iter()
                .map(|u| self.spec.inlet_injection(&u.0))
                .collect(),
            d_max: self
                .spec
                .disturbance()
                .max
                .iter()
                .map(|&d| f64::from(d))
                .collect(),
            weights,
            caps,
        };
        let warm: Vec<usize> = self
            .signal_plan
            .iter()
            .map(|a| self.local_index(a))
            .collect();
        let mut signal_margins = vec![0.0; t_f];
        let outcome = match search_signal_plan(&problem, Some(&warm), self.search) {
            Ok(o) => o,
            Err(crate::error::SolveError::Infeasible) => {
                signal_margins = min_violation_margins(&problem)?;
                for (caps, &m) in problem.caps.iter_mut().zip(&signal_margins) {
                    for c in caps.iter_mut() {
                        *c += m;
                    }
                }
                search_signal_plan(&problem, Some(&warm), self.search)?
            }
            Err(e) => return Err(e.into()),
        };
        let relaxation = Relaxation {
            inflow_margins,
            signal_margins,
        };
        let penalty = relaxation.total();
        let signal_plan: Vec<SignalAction> = outcome
            .plan
            .iter()
            .enumerate()
            .map(|(k, &c)| actions[k][c].clone())
            .collect();
        Ok(HorizonSolution {
            inflow_plan: inflows,
            signal_plan,
            cost: outcome.cost + RELAXATION_PENALTY * penalty,
            predicted: outcome.trajectory,
            qp_nodes,
            search_nodes: outcome.nodes,
            relaxation: (penalty > 0.0).then_some(relaxation),
        })
    }
}
