//! Horizon predictions: disturbance-free trajectories and interval bands.
//!
//! Tendency matrices are elementwise nonnegative, so propagating the box
//! corners `d_min` / `d_max` through the linear recursion yields the exact
//! reachable interval of each lane. Through the rounded map the same
//! propagation is a sound over-approximation, because
//! `x -> max{[A x + B u]_+ + d, 0}` is monotone in both `x` and `d`.

use crate::error::ModelError;
use crate::network::{round_nonneg, InflowVector, NetworkSpec, SignalAction, TrafficState};

/// Disturbance-free prediction; `steps[0]` is the initial state.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionTrace {
    pub steps: Vec<Vec<f64>>,
}

/// Elementwise lower/upper bounds per prediction step.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalBand {
    pub lower: Vec<Vec<f64>>,
    pub upper: Vec<Vec<f64>>,
}

impl IntervalBand {
    pub fn horizon(&self) -> usize {
        self.upper.len().saturating_sub(1)
    }
}

fn check_lengths(
    spec: &NetworkSpec,
    x0: &TrafficState,
    actions: &[SignalAction],
    inflows: &[InflowVector],
) -> Result<(), ModelError> {
    if actions.len() != inflows.len() {
        return Err(ModelError::PlanLength {
            actions: actions.len(),
            inflows: inflows.len(),
        });
    }
    if x0.0.len() != spec.n_lanes() {
        return Err(ModelError::Dimension {
            what: "initial state",
            expected: spec.n_lanes(),
            got: x0.0.len(),
        });
    }
    for u in inflows {
        spec.check_inflow(u)?;
    }
    Ok(())
}

fn linear_step(
    spec: &NetworkSpec,
    x: &[f64],
    action: &SignalAction,
    inflow: &InflowVector,
    d: Option<&[i32]>,
) -> Result<Vec<f64>, ModelError> {
    let a = spec.tendency(action)?;
    let mut next = spec.inlet_injection(&inflow.0);
    a.apply_add(x, &mut next);
    if let Some(d) = d {
        for (v, &di) in next.iter_mut().zip(d) {
            *v += f64::from(di);
        }
    }
    Ok(next)
}

fn rounded_step(
    spec: &NetworkSpec,
    x: &[f64],
    action: &SignalAction,
    inflow: &InflowVector,
    d: Option<&[i32]>,
) -> Result<Vec<f64>, ModelError> {
    let mut next = linear_step(spec, x, action, inflow, None)?;
    for (i, v) in next.iter_mut().enumerate() {
        let di = d.map_or(0, |d| i64::from(d[i]));
        *v = (round_nonneg(*v) + di).max(0) as f64;
    }
    Ok(next)
}

/// Linear disturbance-free prediction (may go negative or fractional).
pub fn predict_linear(
    spec: &NetworkSpec,
    x0: &TrafficState,
    actions: &[SignalAction],
    inflows: &[InflowVector],
) -> Result<PredictionTrace, ModelError> {
    check_lengths(spec, x0, actions, inflows)?;
    let mut steps = vec![x0.as_f64()];
    for (a, u) in actions.iter().zip(inflows) {
        let next = linear_step(spec, steps.last().unwrap(), a, u, None)?;
        steps.push(next);
    }
    Ok(PredictionTrace { steps })
}

/// Linear prediction under every disturbance in the box.
pub fn predict_linear_band(
    spec: &NetworkSpec,
    x0: &TrafficState,
    actions: &[SignalAction],
    inflows: &[InflowVector],
) -> Result<IntervalBand, ModelError> {
    check_lengths(spec, x0, actions, inflows)?;
    let dbox = spec.disturbance();
    let mut lower = vec![x0.as_f64()];
    let mut upper = vec![x0.as_f64()];
    for (a, u) in actions.iter().zip(inflows) {
        let lo = linear_step(spec, lower.last().unwrap(), a, u, Some(&dbox.min))?;
        let hi = linear_step(spec, upper.last().unwrap(), a, u, Some(&dbox.max))?;
        lower.push(lo);
        upper.push(hi);
    }
    Ok(IntervalBand { lower, upper })
}

/// Exact (rounded) dynamics iterated with zero disturbance.
pub fn predict_rounded(
    spec: &NetworkSpec,
    x0: &TrafficState,
    actions: &[SignalAction],
    inflows: &[InflowVector],
) -> Result<PredictionTrace, ModelError> {
    check_lengths(spec, x0, actions, inflows)?;
    let mut steps = vec![x0.as_f64()];
    for (a, u) in actions.iter().zip(inflows) {
        let next = rounded_step(spec, steps.last().unwrap(), a, u, None)?;
        steps.push(next);
    }
    Ok(PredictionTrace { steps })
}

/// Interval band of the rounded dynamics under the disturbance box.
pub fn predict_rounded_band(
    spec: &NetworkSpec,
    x0: &TrafficState,
    actions: &[SignalAction],
    inflows: &[InflowVector],
) -> Result<IntervalBand, ModelError> {
    check_lengths(spec, x0, actions, inflows)?;
    let dbox = spec.disturbance();
    let mut lower = vec![x0.as_f64()];
    let mut upper = vec![x0.as_f64()];
    for (a, u) in actions.iter().zip(inflows) {
        let lo = rounded_step(spec, lower.last().unwrap(), a, u, Some(&dbox.min))?;
        let hi = rounded_step(spec, upper.last().unwrap(), a, u, Some(&dbox.max))?;
        lower.push(lo);
        upper.push(hi);
    }
    Ok(IntervalBand { lower, upper })
}

/// First step/lane at which a band exceeds its limit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CapViolation {
    /// Prediction step, `1..=T_f`.
    pub step: usize,
    pub lane: usize,
}

/// Checks `upper(k) <= limits[k-1]` for `k = 1..=T_f`.
///
/// Lower bounds are nonnegative by construction, so only the upper side is
/// ever binding.
pub fn check_containment(band: &IntervalBand, limits: &[Vec<f64>]) -> Result<(), CapViolation> {
    for (k, (upper, limit)) in band.upper.iter().skip(1).zip(limits).enumerate() {
        if let Some(lane) = upper.iter().zip(limit).position(|(u, l)| u > l) {
            return Err(CapViolation { step: k + 1, lane });
        }
    }
    Ok(())
}

/// Per-step lane limits: `extended` for the first `relaxed_steps` steps, `normal` after.
pub fn cap_schedule(
    normal: &[f64],
    extended: &[f64],
    relaxed_steps: usize,
    horizon: usize,
) -> Vec<Vec<f64>> {
    (1..=horizon)
        .map(|k| {
            if k <= relaxed_steps {
                extended.to_vec()
            } else {
                normal.to_vec()
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{DisturbanceBox, Intersection, LaneFlow, PhaseConfig};

    /// Lane 1 feeds an outlet lane 2; one intersection with one config.
    fn toy(green: bool, outflow: f64) -> NetworkSpec {
        let flow = if green {
            LaneFlow::green_uniform(outflow, &[1])
        } else {
            LaneFlow::red()
        };
        NetworkSpec::new(
            vec![1, 2],
            vec![],
            [(0, 1)],
            vec![],
            vec![Intersection {
                label: 1,
                lanes: vec![0],
                configs: vec![PhaseConfig {
                    name: "c".into(),
                    flows: vec![flow],
                }],
            }],
            vec![None, Some(LaneFlow::green_uniform(0.0, &[]))],
            DisturbanceBox::uniform(2, -2, 2),
        )
    }

    fn plan(n: usize) -> (Vec<SignalAction>, Vec<InflowVector>) {
        (
            vec![SignalAction(vec![0]); n],
            vec![InflowVector(vec![]); n],
        )
    }

    #[test]
    fn linear_df_halves_geometrically() {
        let spec = toy(true, 0.5);
        let (a, u) = plan(2);
        let trace = predict_linear(&spec, &TrafficState(vec![8, 0]), &a, &u).unwrap();
        let lane0: Vec<f64> = trace.steps.iter().map(|s| s[0]).collect();
        assert_eq!(lane0, vec![8.0, 4.0, 2.0]);
    }

    #[test]
    fn red_lane_trace_is_constant() {
        let spec = toy(false, 0.0);
        let (a, u) = plan(5);
        let trace = predict_linear(&spec, &TrafficState(vec![7, 3]), &a, &u).unwrap();
        assert!(trace.steps.iter().all(|s| s[0] == 7.0));
    }

    #[test]
    fn linear_band_accumulates_box() {
        let spec = toy(false, 0.0);
        let (a, u) = plan(2);
        let band = predict_linear_band(&spec, &TrafficState(vec![10, 0]), &a, &u).unwrap();
        assert_eq!((band.lower[1][0], band.upper[1][0]), (8.0, 12.0));
        assert_eq!((band.lower[2][0], band.upper[2][0]), (6.0, 14.0));
    }

    #[test]
    fn linear_band_matches_enumerated_disturbance_sequences() {
        let spec = toy(false, 0.0);
        let mut lo = [f64::MAX; 2];
        let mut hi = [f64::MIN; 2];
        for d1 in -2..=2 {
            for d2 in -2..=2 {
                let x1 = 10.0 + f64::from(d1);
                let x2 = x1 + f64::from(d2);
                lo = [lo[0].min(x1), lo[1].min(x2)];
                hi = [hi[0].max(x1), hi[1].max(x2)];
            }
        }
        let (a, u) = plan(2);
        let band = predict_linear_band(&spec, &TrafficState(vec![10, 0]), &a, &u).unwrap();
        assert_eq!([band.lower[1][0], band.lower[2][0]], lo);
        assert_eq!([band.upper[1][0], band.upper[2][0]], hi);
    }

    #[test]
    fn rounded_band_single_step() {
        let spec = toy(false, 0.0);
        let (a, u) = plan(1);
        let band = predict_rounded_band(&spec, &TrafficState(vec![3, 0]), &a, &u).unwrap();
        assert_eq!((band.lower[1][0], band.upper[1][0]), (1.0, 5.0));
        let band = predict_rounded_band(&spec, &TrafficState(vec![1, 0]), &a, &u).unwrap();
        assert_eq!((band.lower[1][0], band.upper[1][0]), (0.0, 3.0));
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let spec = toy(false, 0.0);
        let a = vec![SignalAction(vec![0]); 2];
        let u = vec![InflowVector(vec![]); 1];
        assert!(matches!(
            predict_linear(&spec, &TrafficState(vec![0, 0]), &a, &u),
            Err(ModelError::PlanLength { .. })
        ));
    }

    #[test]
    fn containment_reports_first_violation() {
        let mut upper = vec![vec![0.0; 6]; 5];
        upper[3][5] = 21.0;
        let band = IntervalBand {
            lower: vec![vec![0.0; 6]; 5],
            upper,
        };
        let limits = vec![vec![20.0; 6]; 4];
        assert_eq!(
            check_containment(&band, &limits),
            Err(CapViolation { step: 3, lane: 5 })
        );
        let ok = IntervalBand {
            lower: vec![vec![0.0; 6]; 5],
            upper: vec![vec![20.0; 6]; 5],
        };
        assert_eq!(check_containment(&ok, &limits), Ok(()));
    }

    #[test]
    fn two_regime_limits() {
        let limits = cap_schedule(&[20.0], &[25.0], 5, 7);
        let flat: Vec<f64> = limits.iter().map(|l| l[0]).collect();
        assert_eq!(flat, vec![25.0, 25.0, 25.0, 25.0, 25.0, 20.0, 20.0]);
        let mut band = IntervalBand {
            lower: vec![vec![0.0]; 8],
            upper: vec![vec![24.0]; 8],
        };
        assert!(check_containment(&band, &limits).is_err());
        for k in 6..8 {
            band.upper[k][0] = 20.0;
        }
        assert!(check_containment(&band, &limits).is_ok());
    }
}
