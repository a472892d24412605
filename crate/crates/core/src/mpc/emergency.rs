//! Emergency-vehicle bookkeeping: countdowns, candidate paths and the
//! time-varying weights and limits they induce over a horizon.

use serde::{Deserialize, Serialize};

use super::config::ControllerConfig;
use crate::network::NetworkSpec;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmergencyStatus {
    /// Steps until the vehicle enters the network.
    pub arrival: usize,
    /// Steps the vehicle has to leave the network once inside.
    pub traverse: usize,
    /// Steps granted to bring densities back under the normal caps.
    pub recovery: usize,
    pub entry: usize,
    pub exit: usize,
    pub paths: Vec<Vec<usize>>,
    /// Index into `paths` once a route has been committed.
    pub selected: Option<usize>,
}

impl EmergencyStatus {
    pub fn new(
        spec: &NetworkSpec,
        entry: usize,
        exit: usize,
        arrival: usize,
        traverse: usize,
        recovery: usize,
    ) -> Self {
        EmergencyStatus {
            arrival,
            traverse,
            recovery,
            entry,
            exit,
            paths: enumerate_paths(spec, entry, exit),
            selected: None,
        }
    }

    pub fn is_active(&self) -> bool {
        self.arrival + self.traverse + self.recovery > 0
    }

    /// Steps during which path lanes carry the emergency weight.
    pub fn priority_steps(&self) -> usize {
        self.arrival + self.traverse
    }

    /// Steps during which the extended caps apply.
    pub fn relaxed_steps(&self) -> usize {
        self.arrival + self.traverse + self.recovery
    }

    pub fn path(&self) -> Option<&[usize]> {
        self.selected.map(|i| self.paths[i].as_slice())
    }
}

/// Counts down arrival, then traversal, then recovery, one step at a time.
pub fn advance_mode(status: &EmergencyStatus) -> EmergencyStatus {
    let mut next = status.clone();
    if next.arrival > 0 {
        next.arrival -= 1;
    } else if next.traverse > 0 {
        next.traverse -= 1;
    } else if next.recovery > 0 {
        next.recovery -= 1;
    }
    next
}

/// Every simple directed lane path from `entry` to `exit`, sorted.
pub fn enumerate_paths(spec: &NetworkSpec, entry: usize, exit: usize) -> Vec<Vec<usize>> {
    fn walk(spec: &NetworkSpec, exit: usize, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        let here = *path.last().unwrap();
        if here == exit {
            out.push(path.clone());
            return;
        }
        let next: Vec<usize> = spec.successors(here).collect();
        for s in next {
            if !path.contains(&s) {
                path.push(s);
                walk(spec, exit, path, out);
                path.pop();
            }
        }
    }
    let n = spec.n_lanes();
    if entry >= n || exit >= n {
        return Vec::new();
    }
    let mut out = Vec::new();
    walk(spec, exit, &mut vec![entry], &mut out);
    // compare by external labels so the order matches what users read
    out.sort_by(|a, b| {
        let la: Vec<u32> = a.iter().map(|&l| spec.label(l)).collect();
        let lb: Vec<u32> = b.iter().map(|&l| spec.label(l)).collect();
        la.cmp(&lb)
    });
    out
}

/// Stage weights for `k = 1..=horizon`.
pub fn stage_weights(
    config: &ControllerConfig,
    status: Option<&EmergencyStatus>,
    horizon: usize,
) -> Vec<Vec<f64>> {
    (1..=horizon)
        .map(|k| {
            let mut w = config.gamma.clone();
            if let Some(st) = status {
                if let Some(path) = st.path() {
                    if k <= st.priority_steps() {
                        for &lane in path {
                            w[lane] = config.emergency_weight;
                        }
                    }
                }
            }
            w
        })
        .collect()
}

/// Lane limits for `k = 1..=horizon`; extended while the relaxation lasts.
pub fn stage_caps(
    config: &ControllerConfig,
    status: Option<&EmergencyStatus>,
    horizon: usize,
) -> Vec<Vec<f64>> {
    let relaxed = status.map_or(0, |s| s.relaxed_steps());
    crate::reachability::cap_schedule(&config.caps, &config.extended_caps, relaxed, horizon)
}
