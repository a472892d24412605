//! Seeded batches, summary tables and horizon sweeps.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use super::harness::{run_closed_loop, ControllerKind};
use super::metrics::{compute_metrics, Metrics};
use crate::error::ControlError;
use crate::scenario::Scenario;

/// Run `r` of a batch uses seed `base_seed + r`.
pub fn batch_seeds(base_seed: u64, runs: usize) -> Vec<u64> {
    (0..runs as u64)
        .map(|r| base_seed.wrapping_add(r))
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct RunMetrics {
    pub seed: u64,
    pub controller: ControllerKind,
    pub metrics: Metrics,
}

#[derive(Clone, Debug, Serialize)]
pub struct Aborted {
    pub seed: u64,
    pub controller: ControllerKind,
    pub reason: String,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct BatchResult {
    pub runs: Vec<RunMetrics>,
    pub aborted: Vec<Aborted>,
}

pub fn metrics_for(scenario: &Scenario, kind: ControllerKind) -> Result<Metrics, ControlError> {
    let record = run_closed_loop(scenario, kind)?;
    Ok(compute_metrics(
        &record,
        &scenario.controller.caps,
        &scenario.controller.extended_caps,
        scenario.run.window,
    ))
}

/// Runs every controller on every seed. With `parallel`, seeds run
/// concurrently, which inflates the recorded solve times.
pub fn run_batch(
    scenario: &Scenario,
    kinds: &[ControllerKind],
    runs: usize,
    base_seed: u64,
    parallel: bool,
) -> BatchResult {
    let jobs: Vec<(u64, ControllerKind)> = batch_seeds(base_seed, runs)
        .into_iter()
        .flat_map(|s| kinds.iter().map(move |&k| (s, k)))
        .collect();
    let one = |&(seed, kind): &(u64, ControllerKind)| {
        let sc = scenario.clone().with_seed(seed);
        metrics_for(&sc, kind)
            .map_err(|e| e.to_string())
            .map(|m| (seed, kind, m))
            .map_err(|r| (seed, kind, r))
    };
    let outcomes: Vec<_> = if parallel {
        jobs.par_iter().map(one).collect()
    } else {
        jobs.iter().map(one).collect()
    };
    let mut result = BatchResult::default();
    for o in outcomes {
        match o {
            Ok((seed, controller, metrics)) => result.runs.push(RunMetrics {
                seed,
                controller,
                metrics,
            }),
            Err((seed, controller, reason)) => result.aborted.push(Aborted {
                seed,
                controller,
                reason,
            }),
        }
    }
    result.runs.sort_by_key(|r| (r.controller, r.seed));
    result.aborted.sort_by_key(|r| (r.controller, r.seed));
    result
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ControllerSummary {
    pub controller: ControllerKind,
    pub completed: usize,
    pub aborted: usize,
    pub mean_ssd: f64,
    pub mean_dep: Option<f64>,
    pub mean_micros: f64,
    pub cap_violations: usize,
    pub extended_violations: usize,
    pub relaxed_steps: usize,
    /// Relative to the baseline.
    pub norm_ssd: Option<f64>,
    pub norm_dep: Option<f64>,
    /// Relative to the centralized controller.
    pub norm_ct: Option<f64>,
}

impl BatchResult {
    pub fn summarize(&self) -> Vec<ControllerSummary> {
        let mut by: BTreeMap<ControllerKind, Vec<&Metrics>> = BTreeMap::new();
        for r in &self.runs {
            by.entry(r.controller).or_default().push(&r.metrics);
        }
        for a in &self.aborted {
            by.entry(a.controller).or_default();
        }
        let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
        let mut rows: Vec<ControllerSummary> = by
            .iter()
            .map(|(&k, ms)| {
                let ssd: Vec<f64> = ms.iter().map(|m| m.ssd).collect();
                let dep: Vec<f64> = ms.iter().filter_map(|m| m.dep).collect();
                let ct: Vec<f64> = ms.iter().map(|m| m.mean_micros).collect();
                ControllerSummary {
                    controller: k,
                    completed: ms.len(),
                    aborted: self.aborted.iter().filter(|a| a.controller == k).count(),
                    mean_ssd: mean(&ssd).unwrap_or(f64::NAN),
                    mean_dep: mean(&dep),
                    mean_micros: mean(&ct).unwrap_or(f64::NAN),
                    cap_violations: ms.iter().map(|m| m.cap_violations).sum(),
                    extended_violations: ms.iter().map(|m| m.extended_violations).sum(),
                    relaxed_steps: ms.iter().map(|m| m.relaxed_steps).sum(),
                    norm_ssd: None,
                    norm_dep: None,
                    norm_ct: None,
                }
            })
            .collect();
        let base = rows
            .iter()
            .find(|r| r.controller == ControllerKind::Baseline)
            .cloned();
        let central = rows
            .iter()
            .find(|r| r.controller == ControllerKind::Centralized)
            .cloned();
        for r in &mut rows {
            if let Some(b) = &base {
                r.norm_ssd = Some(r.mean_ssd / b.mean_ssd);
                r.norm_dep = r.mean_dep.zip(b.mean_dep).map(|(a, b)| a / b);
            }
            if let Some(c) = &central {
                r.norm_ct = Some(r.mean_micros / c.mean_micros);
            }
        }
        rows
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.4}"))
}

/// Plain-text table of a batch summary.
pub fn format_summary(rows: &[ControllerSummary]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<14} {:>5} {:>5} {:>10} {:>10} {:>10} {:>10} {:>12} {:>10} {:>6} {:>6}",
        "controller",
        "runs",
        "abort",
        "ssd",
        "ssd_norm",
        "dep",
        "dep_norm",
        "ct_ms",
        "ct_norm",
        "viol",
        "xviol"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<14} {:>5} {:>5} {:>10.4} {:>10} {:>10} {:>10} {:>12.3} {:>10} {:>6} {:>6}",
            r.controller.as_str(),
            r.completed,
            r.aborted,
            r.mean_ssd,
            opt(r.norm_ssd),
            opt(r.mean_dep),
            opt(r.norm_dep),
            r.mean_micros / 1000.0,
            opt(r.norm_ct),
            r.cap_violations,
            r.extended_violations,
        );
    }
    s
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub horizon: usize,
    pub completed: usize,
    pub mean_ssd: f64,
    pub mean_micros: f64,
    /// Relative to the first horizon of the sweep.
    pub norm_ssd: f64,
    pub norm_ct: f64,
}

/// Batches of one controller at each horizon in `horizons`, run sequentially
/// so that solve times stay comparable.
pub fn sweep_horizon(
    scenario: &Scenario,
    kind: ControllerKind,
    horizons: &[usize],
    runs: usize,
    base_seed: u64,
) -> Result<Vec<SweepRow>, ControlError> {
    let mut rows: Vec<SweepRow> = Vec::with_capacity(horizons.len());
    for &h in horizons {
        let sc = scenario.clone().with_horizon(h);
        let res = run_batch(&sc, &[kind], runs, base_seed, false);
        if let Some(a) = res.aborted.first() {
            return Err(ControlError::Input(format!(
                "horizon {h}, seed {}: run aborted: {}",
                a.seed, a.reason
            )));
        }
        let s = &res.summarize()[0];
        rows.push(SweepRow {
            horizon: h,
            completed: s.completed,
            mean_ssd: s.mean_ssd,
            mean_micros: s.mean_micros,
            norm_ssd: 1.0,
            norm_ct: 1.0,
        });
    }
    if let Some(first) = rows.first().cloned() {
        for r in &mut rows {
            r.norm_ssd = r.mean_ssd / first.mean_ssd;
            r.norm_ct = r.mean_micros / first.mean_micros;
        }
    }
    Ok(rows)
}

pub fn format_sweep(rows: &[SweepRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:>7} {:>5} {:>10} {:>10} {:>12} {:>10}",
        "horizon", "runs", "ssd", "ssd_norm", "ct_ms", "ct_norm"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:>7} {:>5} {:>10.4} {:>10.4} {:>12.3} {:>10.4}",
            r.horizon,
            r.completed,
            r.mean_ssd,
            r.norm_ssd,
            r.mean_micros / 1000.0,
            r.norm_ct
        );
    }
    s
}
