//! Brute-force references shared by the test targets.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use traffic_mpc::benchmark;
use traffic_mpc::network::{
    DisturbanceBox, InflowVector, Intersection, LaneFlow, NetworkSpec, PhaseConfig, SignalAction,
    Tendency, TrafficState,
};
use traffic_mpc::solver::miqp::tie_tolerance;
use traffic_mpc::solver::{IntegerQp, PlanSearchProblem, QuadProgram};

pub fn random_psd(rng: &mut ChaCha8Rng, n: usize, rank: usize, ridge: f64) -> DMatrix<f64> {
    let m = DMatrix::from_fn(rank, n, |_, _| rng.random_range(-2.0..2.0));
    m.transpose() * m + DMatrix::identity(n, n) * ridge
}

/// Nonnegative rows with the lower corner `lb` strictly feasible.
pub fn random_rows(
    rng: &mut ChaCha8Rng,
    rows: usize,
    n: usize,
    lb: &[f64],
    ub: &[f64],
) -> (DMatrix<f64>, DVector<f64>) {
    let g = DMatrix::from_fn(rows, n, |_, _| {
        if rng.random_bool(0.7) {
            rng.random_range(0.0..1.5)
        } else {
            0.0
        }
    });
    let h = DVector::from_fn(rows, |i, _| {
        let lo: f64 = (0..n).map(|j| g[(i, j)] * lb[j]).sum();
        let hi: f64 = (0..n).map(|j| g[(i, j)] * ub[j]).sum();
        lo + rng.random_range(0.1..0.9) * (hi - lo) + 0.05
    });
    (g, h)
}

/// Minimum over the whole integer box, then the lexicographically smallest
/// point within the tie tolerance of it.
pub fn enumerate_box(problem: &IntegerQp) -> Option<(Vec<i64>, f64)> {
    let n = problem.dim();
    let mut points = Vec::new();
    let mut p = problem.lower.clone();
    loop {
        if problem.is_feasible(&p) {
            points.push((p.clone(), problem.objective(&p)));
        }
        let mut j = n;
        loop {
            if j == 0 {
                let best = points.iter().map(|(_, o)| *o).fold(f64::INFINITY, f64::min);
                let tol = tie_tolerance(best);
                return points
                    .into_iter()
                    .filter(|(_, o)| *o <= best + tol)
                    .min_by(|a, b| a.0.cmp(&b.0));
            }
            j -= 1;
            if p[j] < problem.upper[j] {
                p[j] += 1;
                for q in p.iter_mut().skip(j + 1).zip(&problem.lower[j + 1..]) {
                    *q.0 = *q.1;
                }
                break;
            }
        }
    }
}

pub fn random_integer_qp(rng: &mut ChaCha8Rng, tied: bool) -> IntegerQp {
    // T_f = 2 steps of N_in = 2 inlets, each in 0..=4
    let n = 4;
    let (h, c) = if tied {
        // integer data with optima on half-integers: many exact ties
        let diag = DVector::from_fn(n, |_, _| f64::from(rng.random_range(1..=3)) * 2.0);
        let h = DMatrix::from_diagonal(&diag);
        let c = DVector::from_fn(n, |i, _| {
            -diag[i] * (f64::from(rng.random_range(0..=8)) * 0.5)
        });
        (h, c)
    } else {
        let rank = rng.random_range(1..=n);
        let h = random_psd(rng, n, rank, 0.0);
        let c = DVector::from_fn(n, |_, _| rng.random_range(-15.0..10.0));
        (h, c)
    };
    let lower = vec![0i64; n];
    let upper = vec![4i64; n];
    let lbf = vec![0.0; n];
    let ubf = vec![4.0; n];
    let rows = rng.random_range(0..=2);
    let (g, hv) = random_rows(rng, rows, n, &lbf, &ubf);
    IntegerQp {
        program: QuadProgram::new(h, c, 0.0, g, hv).unwrap(),
        lower,
        upper,
    }
}

pub fn all_tendencies(spec: &NetworkSpec) -> Vec<(DMatrix<f64>, Tendency)> {
    spec.action_space()
        .iter()
        .map(|a| {
            (
                spec.assemble_tendency(&a).unwrap(),
                spec.tendency(&a).unwrap(),
            )
        })
        .collect()
}

pub fn benchmark_search(
    x0: &TrafficState,
    horizon: usize,
) -> (PlanSearchProblem, Vec<DMatrix<f64>>) {
    let sc = benchmark::scenario();
    let spec = &sc.network;
    let actions = all_tendencies(spec);
    let inj = spec.inlet_injection(&sc.controller.u_nom.at(0).0);
    let problem = PlanSearchProblem {
        x0: x0.as_f64(),
        candidates: vec![actions.iter().map(|a| a.1.clone()).collect(); horizon],
        injections: vec![inj; horizon],
        d_max: spec
            .disturbance()
            .max
            .iter()
            .map(|&d| f64::from(d))
            .collect(),
        weights: vec![sc.controller.gamma.clone(); horizon],
        caps: vec![sc.controller.caps.clone(); horizon],
    };
    (problem, actions.into_iter().map(|a| a.0).collect())
}

/// Cheapest cap-respecting plan by dense enumeration of every sequence.
pub fn dense_search(p: &PlanSearchProblem, dense: &[DMatrix<f64>]) -> Option<(Vec<usize>, f64)> {
    let t = p.horizon();
    let m = dense.len();
    let x0 = DVector::from_column_slice(&p.x0);
    let mut best: Option<(Vec<usize>, f64)> = None;
    for code in 0..m.pow(t as u32) {
        let plan: Vec<usize> = (0..t).rev().map(|k| code / m.pow(k as u32) % m).collect();
        let (mut df, mut up) = (x0.clone(), x0.clone());
        let mut cost = 0.0;
        let mut ok = true;
        for (k, &c) in plan.iter().enumerate() {
            let inj = DVector::from_column_slice(&p.injections[k]);
            df = (&dense[c] * &df + &inj).map(|v| v.round().max(0.0));
            up = (&dense[c] * &up + &inj).map(|v| v.round().max(0.0));
            for (u, d) in up.iter_mut().zip(&p.d_max) {
                *u = (*u + d).max(0.0);
            }
            ok &= up.iter().zip(&p.caps[k]).all(|(u, c)| u <= c);
            cost += df
                .iter()
                .zip(&p.weights[k])
                .map(|(x, w)| w * x * x)
                .sum::<f64>();
        }
        // codes run in lexicographic plan order, so strict improvement keeps the smallest tie
        if ok && best.as_ref().is_none_or(|b| cost < b.1) {
            best = Some((plan, cost));
        }
    }
    best
}

pub fn random_state(rng: &mut ChaCha8Rng, n: usize) -> TrafficState {
    TrafficState((0..n).map(|_| rng.random_range(0..=16)).collect())
}

pub fn split_over(rng: &mut ChaCha8Rng, succ: &[usize]) -> Vec<(usize, f64)> {
    let w: Vec<f64> = succ.iter().map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = w.iter().sum();
    succ.iter().zip(w).map(|(&s, w)| (s, w / total)).collect()
}

pub fn random_green(rng: &mut ChaCha8Rng, succ: &[usize]) -> LaneFlow {
    LaneFlow {
        green: true,
        outflow: rng.random_range(0.0..=1.0),
        splits: split_over(rng, succ),
    }
}

/// A valid random network: random edges without two-way pairs and
/// up to three intersections over lanes that have successors.
pub fn random_spec(rng: &mut ChaCha8Rng) -> NetworkSpec {
    let n = rng.random_range(4..=10);
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.random_bool(0.3) {
                edges.push(if rng.random_bool(0.5) { (a, b) } else { (b, a) });
            }
        }
    }
    let succ: Vec<Vec<usize>> = (0..n)
        .map(|l| edges.iter().filter(|e| e.0 == l).map(|e| e.1).collect())
        .collect();
    let controllable: Vec<usize> = (0..n).filter(|&l| !succ[l].is_empty()).collect();
    let n_inter = rng.random_range(1..=3).min(controllable.len());
    let mut owner = vec![None; n];
    for &l in &controllable {
        if n_inter > 0 && rng.random_bool(0.7) {
            owner[l] = Some(rng.random_range(0..n_inter));
        }
    }
    let intersections: Vec<Intersection> = (0..n_inter)
        .map(|j| {
            let lanes: Vec<usize> = (0..n).filter(|&l| owner[l] == Some(j)).collect();
            let configs = (0..rng.random_range(1..=3))
                .map(|c| PhaseConfig {
                    name: format!("c{c}"),
                    flows: lanes
                        .iter()
                        .map(|&l| {
                            if rng.random_bool(0.5) {
                                random_green(rng, &succ[l])
                            } else {
                                LaneFlow::red()
                            }
                        })
                        .collect(),
                })
                .collect();
            Intersection {
                label: j as u32 + 1,
                lanes,
                configs,
            }
        })
        .collect();
    let free = (0..n)
        .map(|l| owner[l].is_none().then(|| random_green(rng, &succ[l])))
        .collect();
    let inlets: Vec<usize> = (0..n)
        .filter(|_| rng.random_bool(0.3))
        .take(n - 1)
        .collect();
    NetworkSpec::new(
        (1..=n as u32).collect(),
        inlets,
        edges,
        Vec::new(),
        intersections,
        free,
        DisturbanceBox::uniform(n, -2, 2),
    )
}

pub fn max_column_sum(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `max{[A x + B u]_+ + d, 0}` computed densely, ties rounded away from zero.
pub fn dense_step(
    spec: &NetworkSpec,
    x: &TrafficState,
    a: &SignalAction,
    u: &InflowVector,
    d: &[i32],
) -> Vec<u32> {
    let m = spec.assemble_tendency(a).unwrap();
    let b = spec.inlet_matrix();
    let xv = DVector::from_iterator(x.0.len(), x.0.iter().map(|&v| f64::from(v)));
    let uv = DVector::from_iterator(u.0.len(), u.0.iter().map(|&v| f64::from(v)));
    let y = m * xv + b * uv;
    y.iter()
        .zip(d)
        .map(|(&v, &di)| {
            let r = if v - v.floor() == 0.5 {
                v.ceil()
            } else {
                v.round()
            };
            (r.max(0.0) as i64 + i64::from(di)).max(0) as u32
        })
        .collect()
}
