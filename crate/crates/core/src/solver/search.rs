//! Depth-first search over signal-plan sequences.
//!
//! Each node extends a plan prefix by one action and advances both the
//! rounded disturbance-free prediction and the upper edge of the rounded
//! interval band. A prefix whose band leaves the caps is discarded along
//! with every extension of it, and the running stage cost (a sum of
//! nonnegative terms) bounds the cost of all completions against the
//! incumbent.

use std::cmp::Ordering;

use crate::error::SolveError;
use crate::network::Tendency;

#[derive(Clone, Debug)]
pub struct PlanSearchProblem {
    pub x0: Vec<f64>,
    /// Candidate tendency matrices per step; `candidates[k][c]`.
    pub candidates: Vec<Vec<Tendency>>,
    /// `B U(t+k)` per step.
    pub injections: Vec<Vec<f64>>,
    pub d_max: Vec<f64>,
    /// Diagonal stage weights applied to the prediction at `k = 1..=T_f`.
    pub weights: Vec<Vec<f64>>,
    /// Lane limits for `k = 1..=T_f`; `f64::INFINITY` leaves a lane unconstrained.
    pub caps: Vec<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SearchMode {
    /// Infeasible-prefix exclusion plus incumbent bounding.
    Pruned,
    /// Every leaf is evaluated; used to measure what pruning saves.
    Exhaustive,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchOutcome {
    /// Candidate index per step.
    pub plan: Vec<usize>,
    pub cost: f64,
    /// One-step node evaluations performed.
    pub nodes: u64,
    /// Rounded disturbance-free trajectory of the plan, `k = 0..=T_f`.
    pub trajectory: Vec<Vec<f64>>,
}

impl PlanSearchProblem {
    pub fn horizon(&self) -> usize {
        self.candidates.len()
    }

    fn check(&self) -> Result<(), SolveError> {
        let t = self.horizon();
        if t == 0 {
            return Err(SolveError::Invalid("empty horizon".into()));
        }
        if self.candidates.iter().any(|c| c.is_empty()) {
            return Err(SolveError::Invalid("empty action set".into()));
        }
        if self.injections.len() != t || self.weights.len() != t || self.caps.len() != t {
            return Err(SolveError::Invalid(
                "per-step data length differs from horizon".into(),
            ));
        }
        Ok(())
    }

    /// Advances `(df, upper)` by one step under candidate `a`.
    #[inline]
    fn advance(
        &self,
        k: usize,
        a: &Tendency,
        df: &[f64],
        up: &[f64],
        df_next: &mut [f64],
        up_next: &mut [f64],
    ) {
        let inj = &self.injections[k];
        df_next.copy_from_slice(inj);
        up_next.copy_from_slice(inj);
        a.apply_add(df, df_next);
        a.apply_add(up, up_next);
        for ((d, u), &dm) in df_next.iter_mut().zip(up_next.iter_mut()).zip(&self.d_max) {
            *d = d.round().max(0.0);
            *u = (u.round().max(0.0) + dm).max(0.0);
        }
    }

    fn stage_cost(&self, k: usize, x: &[f64]) -> f64 {
        self.weights[k].iter().zip(x).map(|(w, v)| w * v * v).sum()
    }

    /// Smallest integer margin making step `k` (1-based) contain `up`.
    fn step_violation(&self, k: usize, up: &[f64]) -> f64 {
        up.iter()
            .zip(&self.caps[k - 1])
            .map(|(u, c)| (u - c).max(0.0))
            .fold(0.0, f64::max)
            .ceil()
    }

    /// Cost and feasibility of one complete plan.
    pub fn evaluate(&self, plan: &[usize]) -> Result<(f64, bool, Vec<Vec<f64>>), SolveError> {
        self.check()?;
        if plan.len() != self.horizon() {
            return Err(SolveError::Invalid(
                "plan length differs from horizon".into(),
            ));
        }
        let n = self.x0.len();
        let mut df = self.x0.clone();
        let mut up = self.x0.clone();
        let mut cost = 0.0;
        let mut feasible = true;
        let mut traj = vec![df.clone()];
        let (mut dn, mut un) = (vec![0.0; n], vec![0.0; n]);
        for (k, &c) in plan.iter().enumerate() {
            let a = self.candidates[k]
                .get(c)
                .ok_or_else(|| SolveError::Invalid("candidate index out of range".into()))?;
            self.advance(k, a, &df, &up, &mut dn, &mut un);
            std::mem::swap(&mut df, &mut dn);
            std::mem::swap(&mut up, &mut un);
            if self.step_violation(k + 1, &up) > 0.0 {
                feasible = false;
            }
            cost += self.stage_cost(k, &df);
            traj.push(df.clone());
        }
        Ok((cost, feasible, traj))
    }
}

/// Lower bound on the stage costs after step `k` from density `x`:
/// dropping every transfer and keeping the least retention can only lower
/// each lane, and the rounded map is monotone.
fn cost_to_go(
    p: &PlanSearchProblem,
    retain: &[Vec<f64>],
    k: usize,
    x: &[f64],
    lo: &mut Vec<f64>,
) -> f64 {
    lo.clear();
    lo.extend_from_slice(x);
    let mut cost = 0.0;
    for j in k + 1..p.horizon() {
        for ((v, r), b) in lo.iter_mut().zip(&retain[j]).zip(&p.injections[j]) {
            *v = (*r * *v + b).round().max(0.0);
        }
        cost += p.stage_cost(j, lo);
    }
    cost
}

struct Dfs<'a> {
    p: &'a PlanSearchProblem,
    mode: SearchMode,
    df: Vec<Vec<f64>>,
    up: Vec<Vec<f64>>,
    /// Per depth: every child's `(df, up)`, stored back to back.
    children: Vec<Vec<f64>>,
    order: Vec<Vec<(f64, f64, usize, bool)>>,
    /// Smallest diagonal entry over each step's candidates.
    retain: Vec<Vec<f64>>,
    scratch: Vec<f64>,
    prefix: Vec<usize>,
    best: Option<(f64, Vec<usize>)>,
    nodes: u64,
}

impl Dfs<'_> {
    fn improves(&self, cost: f64, plan: &[usize]) -> bool {
        match &self.best {
            None => true,
            Some((bc, bp)) => cost < *bc || (cost == *bc && plan < bp.as_slice()),
        }
    }

    /// Whether some completion of the current prefix could beat the incumbent.
    fn promising(&self, lower_bound: f64) -> bool {
        match &self.best {
            None => true,
            Some((bc, bp)) => match lower_bound.total_cmp(bc) {
                Ordering::Less => true,
                Ordering::Greater => false,
                Ordering::Equal => self.prefix.as_slice() <= &bp[..self.prefix.len()],
            },
        }
    }

    fn visit(&mut self, k: usize, partial: f64, feasible: bool) {
        let t = self.p.horizon();
        if k == t {
            if feasible && self.improves(partial, &self.prefix) {
                self.best = Some((partial, self.prefix.clone()));
            }
            return;
        }
        let n = self.p.x0.len();
        let m = self.p.candidates[k].len();
        let mut order = std::mem::take(&mut self.order[k]);
        let mut buf = std::mem::take(&mut self.children[k]);
        order.clear();
        buf.resize(2 * n * m, 0.0);
        for c in 0..m {
            self.nodes += 1;
            let (d, u) = buf[2 * n * c..2 * n * (c + 1)].split_at_mut(n);
            self.p
                .advance(k, &self.p.candidates[k][c], &self.df[k], &self.up[k], d, u);
            let ok = self.p.step_violation(k + 1, u) == 0.0;
            let next = partial + self.p.stage_cost(k, d);
            let bound = match self.mode {
                SearchMode::Pruned if ok => {
                    next + cost_to_go(self.p, &self.retain, k, d, &mut self.scratch)
                }
                _ => next,
            };
            order.push((bound, next, c, ok));
        }
        // cheap children first so the incumbent tightens early; the
        // tie-break on the prefix keeps the result order-independent
        if self.mode == SearchMode::Pruned {
            order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));
        }
        for &(bound, next_partial, c, ok) in &order {
            self.prefix.push(c);
            let descend = match self.mode {
                SearchMode::Exhaustive => true,
                SearchMode::Pruned => ok && self.promising(bound),
            };
            if descend {
                let (d, u) = buf[2 * n * c..2 * n * (c + 1)].split_at(n);
                self.df[k + 1].copy_from_slice(d);
                self.up[k + 1].copy_from_slice(u);
                self.visit(k + 1, next_partial, feasible && ok);
            }
            self.prefix.pop();
        }
        self.order[k] = order;
        self.children[k] = buf;
    }
}

/// Cost-minimizing feasible plan; lexicographically smallest among equal costs.
pub fn search_signal_plan(
    problem: &PlanSearchProblem,
    warm_start: Option<&[usize]>,
    mode: SearchMode,
) -> Result<SearchOutcome, SolveError> {
    problem.check()?;
    let t = problem.horizon();
    let n = problem.x0.len();
    let mut dfs = Dfs {
        p: problem,
        mode,
        df: vec![vec![0.0; n]; t + 1],
        up: vec![vec![0.0; n]; t + 1],
        children: vec![Vec::new(); t],
        order: vec![Vec::new(); t],
        retain: problem
            .candidates
            .iter()
            .map(|cs| {
                (0..n)
                    .map(|i| cs.iter().map(|a| a.diag[i]).fold(f64::INFINITY, f64::min))
                    .collect()
            })
            .collect(),
        scratch: Vec::with_capacity(n),
        prefix: Vec::with_capacity(t),
        best: None,
        nodes: 0,
    };
    dfs.df[0].clone_from(&problem.x0);
    dfs.up[0].clone_from(&problem.x0);

    if let Some(warm) = warm_start {
        if warm.len() == t
            && warm
                .iter()
                .zip(&problem.candidates)
                .all(|(&c, cs)| c < cs.len())
        {
            let (cost, feasible, _) = problem.evaluate(warm)?;
            dfs.nodes += t as u64;
            if feasible {
                dfs.best = Some((cost, warm.to_vec()));
            }
        }
    }

    dfs.visit(0, 0.0, true);
    let nodes = dfs.nodes;
    let (cost, plan) = dfs.best.ok_or(SolveError::Infeasible)?;
    let (_, _, trajectory) = problem.evaluate(&plan)?;
    Ok(SearchOutcome {
        plan,
        cost,
        nodes,
        trajectory,
    })
}

/// Per-step cap margins of the plan whose violation vector is
/// lexicographically smallest (earliest steps matter most).
pub fn min_violation_margins(problem: &PlanSearchProblem) -> Result<Vec<f64>, SolveError> {
    problem.check()?;
    let t = problem.horizon();
    let n = problem.x0.len();
    let mut df = vec![vec![0.0; n]; t + 1];
    let mut up = vec![vec![0.0; n]; t + 1];
    df[0].clone_from(&problem.x0);
    up[0].clone_from(&problem.x0);
    let mut best: Option<Vec<f64>> = None;
    let mut current = Vec::with_capacity(t);

    fn go(
        p: &PlanSearchProblem,
        k: usize,
        df: &mut [Vec<f64>],
        up: &mut [Vec<f64>],
        current: &mut Vec<f64>,
        best: &mut Option<Vec<f64>>,
    ) {
        let t = p.horizon();
        if k == t {
            if best
                .as_ref()
                .is_none_or(|b| current.as_slice() < b.as_slice())
            {
                *best = Some(current.clone());
            }
            return;
        }
        for c in 0..p.candidates[k].len() {
            let (head, tail) = df.split_at_mut(k + 1);
            let (uhead, utail) = up.split_at_mut(k + 1);
            p.advance(
                k,
                &p.candidates[k][c],
                &head[k],
                &uhead[k],
                &mut tail[0],
                &mut utail[0],
            );
            current.push(p.step_violation(k + 1, &up[k + 1]));
            let keep = best
                .as_ref()
                .is_none_or(|b| current.as_slice() < &b[..current.len()]);
            if keep {
                go(p, k + 1, df, up, current, best);
            }
            current.pop();
            if best.as_ref().is_some_and(|b| b.iter().all(|&v| v == 0.0)) {
                return;
            }
        }
    }

    go(problem, 0, &mut df, &mut up, &mut current, &mut best);
    Ok(best.unwrap_or_else(|| vec![0.0; t]))
}
