use serde::{Deserialize, Serialize};

use super::record::RunRecord;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Lane average of the time-averaged density over the final window.
    pub ssd: f64,
    /// Time-averaged total density on the emergency path while the vehicle
    /// is expected in the network.
    pub dep: Option<f64>,
    pub mean_micros: f64,
    pub max_micros: u64,
    /// Lane-steps above the normal cap outside relaxation windows.
    pub cap_violations: usize,
    /// Lane-steps above the extended cap inside relaxation windows.
    pub extended_violations: usize,
    pub relaxed_steps: usize,
}

impl Metrics {
    /// `(ssd, dep)` divided by a reference run's values.
    pub fn normalized(&self, reference: &Metrics) -> (f64, Option<f64>) {
        let dep = match (self.dep, reference.dep) {
            (Some(a), Some(b)) if b > 0.0 => Some(a / b),
            _ => None,
        };
        (self.ssd / reference.ssd, dep)
    }
}

pub fn compute_metrics(
    record: &RunRecord,
    caps: &[f64],
    extended: &[f64],
    window: usize,
) -> Metrics {
    let states = &record.states;
    let w = window.clamp(1, states.len());
    let tail = &states[states.len() - w..];
    let n = record.lane_labels.len().max(1);
    let ssd = tail
        .iter()
        .map(|x| x.iter().map(|&v| f64::from(v)).sum::<f64>())
        .sum::<f64>()
        / (w * n) as f64;

    let dep = record.emergency.as_ref().and_then(|e| {
        let end = e.window_end.min(states.len() - 1);
        (e.time <= end).then(|| {
            let total: f64 = states[e.time..=end]
                .iter()
                .map(|x| e.path.iter().map(|&i| f64::from(x[i])).sum::<f64>())
                .sum();
            total / (end - e.time + 1) as f64
        })
    });

    let mut cap_violations = 0;
    let mut extended_violations = 0;
    for (t, x) in states.iter().enumerate() {
        let relaxed = t > 0 && record.steps[t - 1].relaxed;
        for (i, &v) in x.iter().enumerate() {
            let v = f64::from(v);
            if relaxed {
                extended_violations += usize::from(v > extended[i]);
            } else {
                cap_violations += usize::from(v > caps[i]);
            }
        }
    }
    let micros: Vec<u64> = record.steps.iter().map(|s| s.micros).collect();
    Metrics {
        ssd,
        dep,
        mean_micros: if micros.is_empty() {
            0.0
        } else {
            micros.iter().sum::<u64>() as f64 / micros.len() as f64
        },
        max_micros: micros.iter().copied().max().unwrap_or(0),
        cap_violations,
        extended_violations,
        relaxed_steps: record
            .steps
            .iter()
            .filter(|s| s.relaxation.is_some())
            .count(),
    }
}
