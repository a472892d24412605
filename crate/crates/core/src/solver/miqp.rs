//! Exact bounded-integer convex QP by branch-and-bound.
//!
//! Best-first on the relaxation bound, branching on the most fractional
//! coordinate. Node bounds add the curvature term
//! `lambda_min(H)/2 * sum_j dist(x_j, Z)^2` to the relaxed optimum, and
//! children warm-start from their parent's working set.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::SymmetricEigen;

use super::qp::{solve_relaxation, solve_relaxation_from, ActiveConstraint, QuadProgram};
use crate::error::SolveError;

const INTEGRALITY_TOL: f64 = 1e-6;
const NODE_LIMIT: usize = 2_000_000;

/// Relative tolerance under which two objective values count as a tie.
pub const TIE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct IntegerQp {
    pub program: QuadProgram,
    pub lower: Vec<i64>,
    pub upper: Vec<i64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntegerSolution {
    pub point: Vec<i64>,
    pub objective: f64,
    /// Relaxations solved, including the tie-break pass.
    pub nodes: usize,
}

pub fn tie_tolerance(objective: f64) -> f64 {
    TIE_TOL * objective.abs().max(1.0)
}

struct Node {
    bound: f64,
    seq: usize,
    lb: Vec<i64>,
    ub: Vec<i64>,
    relaxed: Vec<f64>,
    active: Vec<ActiveConstraint>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // BinaryHeap is a max-heap: smallest bound first, then oldest node.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Conservative smallest eigenvalue of the Hessian (0 if not positive).
fn min_curvature(program: &QuadProgram) -> f64 {
    if program.dim() == 0 {
        return 0.0;
    }
    let eig = SymmetricEigen::new(program.hessian.clone());
    let lo = eig.eigenvalues.min();
    let slack = 1e-9 * eig.eigenvalues.amax().max(1.0);
    (lo - slack).max(0.0)
}

/// Lower bound on every integer point of a node. With `x` the relaxed
/// minimizer over a convex set, `f(u) >= f(x) + (u-x)'H(u-x)/2` for any `u`
/// in the set, and each coordinate of an integer `u` is at least the
/// distance from `x_j` to the nearest integer away from `x_j`.
fn integer_bound(objective: f64, x: &[f64], curvature: f64) -> f64 {
    if curvature == 0.0 {
        return objective;
    }
    let dist: f64 = x
        .iter()
        .map(|&v| {
            let f = (v - v.round()).abs();
            if f > INTEGRALITY_TOL {
                f * f
            } else {
                0.0
            }
        })
        .sum();
    objective + 0.5 * curvature * dist * (1.0 - 1e-9)
}

fn to_f64(v: &[i64]) -> Vec<f64> {
    v.iter().map(|&x| x as f64).collect()
}

impl IntegerQp {
    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn objective(&self, point: &[i64]) -> f64 {
        self.program.objective(&to_f64(point))
    }

    pub fn is_feasible(&self, point: &[i64]) -> bool {
        point
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(p, (l, u))| l <= p && p <= u)
            && self.program.violation(&to_f64(point)) <= 1e-9 * (1.0 + self.program.rhs.amax())
    }
}

/// Incumbent update: strictly better by more than the tie tolerance, or
/// tied and lexicographically smaller.
fn improves(obj: f64, point: &[i64], incumbent: &Option<(Vec<i64>, f64)>) -> bool {
    match incumbent {
        None => true,
        Some((p, best)) => {
            let tol = tie_tolerance(*best);
            obj < best - tol || (obj <= best + tol && point < p.as_slice())
        }
    }
}

fn outside(bound: f64, incumbent: &Option<(Vec<i64>, f64)>) -> bool {
    incumbent
        .as_ref()
        .is_some_and(|(_, best)| bound > best + tie_tolerance(*best))
}

/// Global minimizer over the integer box; lexicographically smallest among
/// points whose objective is within [`tie_tolerance`] of the optimum.
///
/// Nodes are kept while their bound does not exceed the incumbent plus the
/// tie tolerance, so every tied point is reachable. A node whose relaxed
/// minimizer is already integral is split three ways around it unless the
/// curvature rules out other tied points in its box.
pub fn solve_integer_qp(problem: &IntegerQp) -> Result<IntegerSolution, SolveError> {
    let n = problem.dim();
    if problem.upper.len() != n || problem.program.dim() != n {
        return Err(SolveError::Invalid("integer box dimension mismatch".into()));
    }
    if problem.lower.iter().zip(&problem.upper).any(|(l, u)| l > u)
        || !problem.is_feasible(&problem.lower)
    {
        return Err(SolveError::Infeasible);
    }
    let curvature = min_curvature(&problem.program);
    let mut nodes = 0usize;
    let mut incumbent: Option<(Vec<i64>, f64)> = None;
    let mut heap = BinaryHeap::new();
    let mut seq = 0;

    let consider = |point: Vec<i64>, incumbent: &mut Option<(Vec<i64>, f64)>| {
        if !problem.is_feasible(&point) {
            return;
        }
        let obj = problem.objective(&point);
        if improves(obj, &point, incumbent) {
            *incumbent = Some((point, obj));
        }
    };

    let root = solve_relaxation(
        &problem.program,
        &to_f64(&problem.lower),
        &to_f64(&problem.upper),
    )?;
    nodes += 1;
    heap.push(Node {
        bound: integer_bound(root.objective, &root.x, curvature),
        seq,
        lb: problem.lower.clone(),
        ub: problem.upper.clone(),
        relaxed: root.x,
        active: root.active,
    });
    seq += 1;

    while let Some(node) = heap.pop() {
        if nodes > NODE_LIMIT {
            return Err(SolveError::IterationLimit);
        }
        if outside(node.bound, &incumbent) {
            continue;
        }
        // Floor of a relaxed point keeps monotone constraints satisfied.
        let floor: Vec<i64> = node
            .relaxed
            .iter()
            .zip(node.lb.iter().zip(&node.ub))
            .map(|(&x, (&l, &u))| ((x + INTEGRALITY_TOL).floor() as i64).clamp(l, u))
            .collect();
        let nearest: Vec<i64> = node
            .relaxed
            .iter()
            .zip(node.lb.iter().zip(&node.ub))
            .map(|(&x, (&l, &u))| (x.round() as i64).clamp(l, u))
            .collect();
        let integral = floor == nearest
            && node
                .relaxed
                .iter()
                .zip(&nearest)
                .all(|(&x, &r)| (x - r as f64).abs() <= INTEGRALITY_TOL);
        consider(floor, &mut incumbent);
        if !integral {
            consider(nearest.clone(), &mut incumbent);
        }

        let children: Vec<(Vec<i64>, Vec<i64>)> = if integral {
            // other points of the box are at least one unit away
            let separated = 0.5 * curvature > 2.0 * tie_tolerance(node.bound);
            match (0..n).find(|&j| node.lb[j] < node.ub[j]) {
                Some(j) if !separated => {
                    let v = nearest[j];
                    let mut out = Vec::with_capacity(2);
                    if v > node.lb[j] {
                        let mut ub = node.ub.clone();
                        ub[j] = v - 1;
                        out.push((node.lb.clone(), ub));
                    }
                    let (mut lb, mut ub) = (node.lb.clone(), node.ub.clone());
                    lb[j] = v;
                    ub[j] = v;
                    out.push((lb, ub));
                    if v < node.ub[j] {
                        let mut lb = node.lb.clone();
                        lb[j] = v + 1;
                        out.push((lb, node.ub.clone()));
                    }
                    out
                }
                _ => Vec::new(),
            }
        } else {
            let j = node
                .relaxed
                .iter()
                .enumerate()
                .map(|(j, &x)| (j, (x - x.floor()).min(x.ceil() - x)))
                .filter(|&(_, frac)| frac > INTEGRALITY_TOL)
                .max_by(|a, b| a.1.total_cmp(&b.1).then_with(|| b.0.cmp(&a.0)))
                .map_or(0, |(j, _)| j);
            let x = node.relaxed[j];
            let mut down_ub = node.ub.clone();
            down_ub[j] = (x.floor() as i64).min(node.ub[j]);
            let mut up_lb = node.lb.clone();
            up_lb[j] = (x.ceil() as i64).max(node.lb[j]);
            vec![(node.lb.clone(), down_ub), (up_lb, node.ub.clone())]
        };

        for (clb, cub) in children {
            if clb.iter().zip(&cub).any(|(l, u)| l > u) {
                continue;
            }
            let sol = match solve_relaxation_from(
                &problem.program,
                &to_f64(&clb),
                &to_f64(&cub),
                Some((&node.relaxed, &node.active)),
            ) {
                Ok(sol) => sol,
                Err(SolveError::Infeasible) => continue,
                Err(e) => return Err(e),
            };
            nodes += 1;
            let bound = integer_bound(sol.objective, &sol.x, curvature);
            if outside(bound, &incumbent) {
                continue;
            }
            heap.push(Node {
                bound,
                seq,
                lb: clb,
                ub: cub,
                relaxed: sol.x,
                active: sol.active,
            });
            seq += 1;
        }
    }

    let (point, objective) = incumbent.ok_or(SolveError::Infeasible)?;
    Ok(IntegerSolution {
        point,
        objective,
        nodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    /// sum_i theta (u_i - target_i)^2
    fn separable(theta: f64, target: &[f64], upper: i64) -> IntegerQp {
        let n = target.len();
        let program = QuadProgram::unconstrained(
            DMatrix::identity(n, n) * (2.0 * theta),
            DVector::from_iterator(n, target.iter().map(|t| -2.0 * theta * t)),
            theta * target.iter().map(|t| t * t).sum::<f64>(),
        )
        .unwrap();
        IntegerQp {
            program,
            lower: vec![0; n],
            upper: vec![upper; n],
        }
    }

    #[test]
    fn recovers_nominal_inside_box() {
        let sol = solve_integer_qp(&separable(1.0, &[6.0, 6.0, 8.0], 16)).unwrap();
        assert_eq!(sol.point, vec![6, 6, 8]);
        assert_eq!(sol.objective, 0.0);
    }

    #[test]
    fn rounds_into_box() {
        let sol = solve_integer_qp(&separable(1e6, &[6.3, 20.0, -1.0], 16)).unwrap();
        assert_eq!(sol.point, vec![6, 16, 0]);
    }

    #[test]
    fn exact_half_tie_takes_smaller_value() {
        let sol = solve_integer_qp(&separable(1.0, &[2.5, 0.5], 4)).unwrap();
        assert_eq!(sol.point, vec![2, 0]);
    }

    #[test]
    fn flat_objective_returns_lower_corner() {
        let program =
            QuadProgram::unconstrained(DMatrix::zeros(3, 3), DVector::zeros(3), 1.0).unwrap();
        let qp = IntegerQp {
            program,
            lower: vec![1, 0, 2],
            upper: vec![5, 5, 5],
        };
        assert_eq!(solve_integer_qp(&qp).unwrap().point, vec![1, 0, 2]);
    }

    #[test]
    fn infeasible_box_is_signalled() {
        let program = QuadProgram::new(
            DMatrix::identity(1, 1),
            DVector::zeros(1),
            0.0,
            DMatrix::from_element(1, 1, 1.0),
            DVector::from_element(1, -1.0),
        )
        .unwrap();
        let qp = IntegerQp {
            program,
            lower: vec![0],
            upper: vec![4],
        };
        assert_eq!(solve_integer_qp(&qp), Err(SolveError::Infeasible));
    }
}
