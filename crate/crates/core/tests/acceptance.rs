//! Acceptance suite. Prints one line per criterion and fails if any is red.
//!
//! Closed-loop batches dominate the runtime: expect several minutes on a
//! single core.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::{
    benchmark_search, dense_search, dense_step, enumerate_box, max_column_sum, random_integer_qp,
    random_spec, random_state,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use traffic_mpc::benchmark;
use traffic_mpc::mpc::UnitSpec;
use traffic_mpc::network::{InflowVector, SignalAction, TrafficState};
use traffic_mpc::reachability::predict_rounded_band;
use traffic_mpc::sim::{
    build_controller, build_with_units, run_batch, run_closed_loop, run_with, sweep_horizon,
    BatchResult, ControllerKind, ControllerSummary, Disturbances,
};
use traffic_mpc::solver::{search_signal_plan, solve_integer_qp, SearchMode, SearchOutcome};

const RUNS: usize = 100;
const BASE_SEED: u64 = 1;
const ALL: [ControllerKind; 3] = [
    ControllerKind::Centralized,
    ControllerKind::Decentralized,
    ControllerKind::Baseline,
];

type Verdict = Result<String, String>;

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn solver_exactness() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let instances = 60;
    for i in 0..instances {
        let problem = random_integer_qp(&mut rng, i % 3 == 0);
        let sol = solve_integer_qp(&problem).map_err(|e| format!("instance {i}: {e}"))?;
        let (point, obj) = enumerate_box(&problem).ok_or(format!("instance {i}: empty box"))?;
        if (sol.objective - obj).abs() > 1e-9 || sol.point != point {
            return Err(format!(
                "instance {i}: {:?} {} vs {point:?} {obj}",
                sol.point, sol.objective
            ));
        }
    }
    let mut searches = 0;
    for horizon in 1..=4 {
        for _ in 0..6 {
            let x0 = random_state(&mut rng, 14);
            let (p, dense) = benchmark_search(&x0, horizon);
            let reference = dense_search(&p, &dense);
            let full = search_signal_plan(&p, None, SearchMode::Exhaustive).ok();
            let pruned = search_signal_plan(&p, None, SearchMode::Pruned).ok();
            let key = |s: &Option<SearchOutcome>| s.as_ref().map(|s| (s.plan.clone(), s.cost));
            if key(&pruned) != key(&full) || key(&full) != reference {
                return Err(format!("search mismatch at T_f={horizon}, x0={x0:?}"));
            }
            searches += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        secs < 60.0,
        format!("{instances} integer QPs, {searches} plan searches, {secs:.1} s"),
    )
}

fn dynamics_invariants() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let bench = benchmark::network();
    let mut specs = vec![bench.clone()];
    specs.extend((0..100).map(|_| random_spec(&mut rng)));
    let mut worst: f64 = 0.0;
    for spec in &specs {
        for a in spec.action_space().iter() {
            let m = spec.assemble_tendency(&a).map_err(|e| e.to_string())?;
            worst = worst.max(max_column_sum(&m));
        }
    }
    if worst > 1.0 + 1e-12 {
        return Err(format!("column sum {worst}"));
    }
    for i in 0..10_000 {
        let spec = &specs[i % 10];
        let x = TrafficState(
            (0..spec.n_lanes())
                .map(|_| rng.random_range(0..=30))
                .collect(),
        );
        let a = spec.action_space().sample(&mut rng);
        let u = InflowVector(
            (0..spec.n_inlets())
                .map(|_| rng.random_range(0..=16))
                .collect(),
        );
        let d = spec.sample_disturbance(&mut rng);
        let next = spec.step_exact(&x, &a, &u, &d).map_err(|e| e.to_string())?;
        if next.0 != dense_step(spec, &x, &a, &u, &d) {
            return Err(format!("step {i} differs from the dense formula"));
        }
    }
    let zero = vec![0; bench.n_lanes()];
    let x = TrafficState((0..bench.n_lanes() as u32).map(|i| 3 + 2 * i).collect());
    let mut held = 0;
    for a in bench.action_space().iter() {
        let next = bench
            .step_exact(&x, &a, &InflowVector::zeros(bench.n_inlets()), &zero)
            .unwrap();
        let m = bench.assemble_tendency(&a).unwrap();
        for lane in 0..bench.n_lanes() {
            let red = bench.flow(lane, &a).is_some_and(|f| !f.green);
            let fed = (0..bench.n_lanes()).any(|from| from != lane && m[(lane, from)] != 0.0);
            if red && !fed {
                if next.0[lane] != x.0[lane] {
                    return Err(format!("red lane {} moved under {a}", bench.label(lane)));
                }
                held += 1;
            }
        }
    }
    check(
        held > 0,
        format!("max column sum {worst:.3}, 10^4 steps exact, {held} red lanes held"),
    )
}

fn containment() -> Verdict {
    let sc = benchmark::scenario();
    let spec = &sc.network;
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let horizon = 4;
    let mut violations = 0;
    for _ in 0..20 {
        let x0 = TrafficState(
            (0..spec.n_lanes())
                .map(|_| rng.random_range(0..=20))
                .collect(),
        );
        let actions: Vec<SignalAction> = (0..horizon)
            .map(|_| spec.action_space().sample(&mut rng))
            .collect();
        let inflows: Vec<InflowVector> = (0..horizon)
            .map(|_| {
                InflowVector(
                    (0..spec.n_inlets())
                        .map(|_| rng.random_range(0..=sc.controller.u_max))
                        .collect(),
                )
            })
            .collect();
        let band =
            predict_rounded_band(spec, &x0, &actions, &inflows).map_err(|e| e.to_string())?;
        for _ in 0..1000 {
            let mut x = x0.clone();
            for k in 0..horizon {
                let d = spec.sample_disturbance(&mut rng);
                x = spec.step_exact(&x, &actions[k], &inflows[k], &d).unwrap();
                violations += x
                    .0
                    .iter()
                    .enumerate()
                    .filter(|&(i, &v)| {
                        f64::from(v) < band.lower[k + 1][i] || f64::from(v) > band.upper[k + 1][i]
                    })
                    .count();
            }
        }
    }
    check(
        violations == 0,
        format!("20 plans x 1000 sequences, {violations} violations"),
    )
}

fn single_unit_equivalence() -> Verdict {
    for seed in BASE_SEED..BASE_SEED + 10 {
        let sc = benchmark::scenario().with_seed(seed);
        let mut central =
            build_controller(&sc, ControllerKind::Centralized).map_err(|e| e.to_string())?;
        let mut single = build_with_units(
            &sc,
            ControllerKind::Decentralized,
            UnitSpec::whole(&sc.network),
        )
        .map_err(|e| e.to_string())?;
        let a =
            run_with(&sc, central.as_mut(), Disturbances::Sampled).map_err(|e| e.to_string())?;
        let b = run_with(&sc, single.as_mut(), Disturbances::Sampled).map_err(|e| e.to_string())?;
        let same_steps = a
            .steps
            .iter()
            .zip(&b.steps)
            .all(|(x, y)| (&x.action, &x.inflow, x.mode) == (&y.action, &y.inflow, y.mode));
        if a.states != b.states || !same_steps {
            return Err(format!("seed {seed} diverges"));
        }
    }
    Ok("10 seeded runs identical step for step".into())
}

fn row(rows: &[ControllerSummary], kind: ControllerKind) -> &ControllerSummary {
    rows.iter()
        .find(|r| r.controller == kind)
        .expect("every controller is summarized")
}

fn aborted(batch: &BatchResult) -> Option<String> {
    batch
        .aborted
        .first()
        .map(|a| format!("{} seed {} aborted: {}", a.controller, a.seed, a.reason))
}

fn normal_direction(batch: &BatchResult) -> Verdict {
    if let Some(e) = aborted(batch) {
        return Err(e);
    }
    let rows = batch.summarize();
    let (c, d, b) = (
        row(&rows, ControllerKind::Centralized).mean_ssd,
        row(&rows, ControllerKind::Decentralized).mean_ssd,
        row(&rows, ControllerKind::Baseline).mean_ssd,
    );
    let gap = 0.03 * b;
    check(
        c < d && d < b && d - c >= gap && b - d >= gap,
        format!("SSD norm {:.4} / {:.4} / 1.0", c / b, d / b),
    )
}

fn emergency_direction(batch: &BatchResult) -> Verdict {
    if let Some(e) = aborted(batch) {
        return Err(e);
    }
    let rows = batch.summarize();
    let c = row(&rows, ControllerKind::Centralized);
    let d = row(&rows, ControllerKind::Decentralized);
    let b = row(&rows, ControllerKind::Baseline);
    let (Some(cd), Some(dd), Some(bd)) = (c.mean_dep, d.mean_dep, b.mean_dep) else {
        return Err("missing DEP".into());
    };
    let cut = |v: f64, base: f64| 1.0 - v / base;
    let (c_dep, d_dep) = (cut(cd, bd), cut(dd, bd));
    let (c_ssd, d_ssd) = (cut(c.mean_ssd, b.mean_ssd), cut(d.mean_ssd, b.mean_ssd));
    check(
        c_dep >= 0.30
            && d_dep >= 0.15
            && c_ssd >= 0.10
            && d_ssd >= 0.05
            && c.mean_ssd < d.mean_ssd
            && cd < dd,
        format!(
            "DEP cut {:.1}% / {:.1}%, SSD cut {:.1}% / {:.1}%",
            100.0 * c_dep,
            100.0 * d_dep,
            100.0 * c_ssd,
            100.0 * d_ssd
        ),
    )
}

fn constraint_discipline(batches: &[&BatchResult]) -> Verdict {
    let mut parts = Vec::new();
    let mut total = 0;
    for kind in [ControllerKind::Centralized, ControllerKind::Decentralized] {
        let (mut caps, mut extended, mut fallback) = (0, 0, 0);
        for batch in batches {
            if let Some(e) = aborted(batch) {
                return Err(e);
            }
            for r in batch.runs.iter().filter(|r| r.controller == kind) {
                caps += r.metrics.cap_violations;
                extended += r.metrics.extended_violations;
                fallback += r.metrics.relaxed_steps;
            }
        }
        total += caps + extended;
        parts.push(format!(
            "{kind}: {caps} cap / {extended} extended-cap violations, {fallback} fallback steps"
        ));
    }
    check(total == 0, parts.join("; "))
}

fn compute_time() -> Verdict {
    // sequential, so that solve times are not inflated by contention
    let sc = benchmark::scenario();
    let batch = run_batch(
        &sc,
        &[ControllerKind::Centralized, ControllerKind::Decentralized],
        10,
        BASE_SEED,
        false,
    );
    if let Some(e) = aborted(&batch) {
        return Err(e);
    }
    let rows = batch.summarize();
    let ratio = row(&rows, ControllerKind::Decentralized).mean_micros
        / row(&rows, ControllerKind::Centralized).mean_micros;

    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let (mut triggered, mut least) = (0, f64::INFINITY);
    for _ in 0..20 {
        let x0 = random_state(&mut rng, 14);
        let (p, _) = benchmark_search(&x0, 4);
        let (Ok(pruned), Ok(full)) = (
            search_signal_plan(&p, None, SearchMode::Pruned),
            search_signal_plan(&p, None, SearchMode::Exhaustive),
        ) else {
            continue;
        };
        if pruned.nodes < full.nodes {
            triggered += 1;
            least = least.min(full.nodes as f64 / pruned.nodes as f64);
        }
    }
    check(
        ratio <= 0.1 && triggered > 0 && least >= 10.0,
        format!("CT ratio {ratio:.4}, pruning saves >= {least:.1}x on {triggered} states"),
    )
}

fn horizon_sweep() -> Verdict {
    let sc = benchmark::scenario();
    let rows = sweep_horizon(
        &sc,
        ControllerKind::Decentralized,
        &[1, 2, 3, 4, 5, 6],
        40,
        BASE_SEED,
    )
    .map_err(|e| e.to_string())?;
    let ct: Vec<f64> = rows.iter().map(|r| r.mean_micros).collect();
    let monotone = ct.windows(2).all(|w| w[0] <= w[1]);
    let ssd1 = rows[0].mean_ssd;
    let ssd4 = rows[3].mean_ssd;
    let cts: Vec<String> = ct.iter().map(|v| format!("{:.0}", v)).collect();
    check(
        monotone && ssd4 < ssd1,
        format!(
            "CT [{}] us, SSD(4)/SSD(1) = {:.3}",
            cts.join(", "),
            ssd4 / ssd1
        ),
    )
}

fn determinism() -> Verdict {
    for sc in [
        benchmark::scenario().with_seed(42),
        benchmark::emergency_scenario().with_seed(43),
    ] {
        for kind in ALL {
            let a = run_closed_loop(&sc, kind).map_err(|e| e.to_string())?;
            let b = run_closed_loop(&sc, kind).map_err(|e| e.to_string())?;
            if a.canonical_bytes() != b.canonical_bytes() {
                return Err(format!("{kind} differs between repeats"));
            }
        }
    }
    Ok("6 repeated runs identical".into())
}

fn report(n: usize, name: &str, start: Instant, verdict: &Verdict) {
    let secs = start.elapsed().as_secs_f64();
    match verdict {
        Ok(d) => println!("criterion {n:>2} {name}: PASS ({d}) [{secs:.1} s]"),
        Err(d) => println!("criterion {n:>2} {name}: FAIL ({d}) [{secs:.1} s]"),
    }
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut run = |n: usize, name: &str, f: &dyn Fn() -> Verdict| {
        let start = Instant::now();
        let v = f();
        report(n, name, start, &v);
        failed += usize::from(v.is_err());
    };
    run(1, "solver exactness", &solver_exactness);
    run(2, "dynamics invariants", &dynamics_invariants);
    run(3, "interval containment", &containment);
    run(4, "single-unit equivalence", &single_unit_equivalence);

    let normal = run_batch(&benchmark::scenario(), &ALL, RUNS, BASE_SEED, true);
    let emergency = run_batch(
        &benchmark::emergency_scenario(),
        &ALL,
        RUNS,
        BASE_SEED,
        true,
    );
    run(5, "normal-mode ordering", &|| normal_direction(&normal));
    run(6, "emergency-mode reductions", &|| {
        emergency_direction(&emergency)
    });
    run(7, "constraint discipline", &|| {
        constraint_discipline(&[&normal, &emergency])
    });
    run(8, "compute time and pruning", &compute_time);
    run(9, "horizon sweep", &horizon_sweep);
    run(10, "determinism", &determinism);

    if failed == 0 {
        println!("acceptance: all 10 criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria fail");
        ExitCode::FAILURE
    }
}
