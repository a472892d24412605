use crate::network::{InflowVector, NetworkSpec};
use crate::solver::SearchMode;

/// Nominal inflow schedule; the last row repeats past its end.
#[derive(Clone, Debug, PartialEq)]
pub struct NominalInflow {
    rows: Vec<InflowVector>,
}

impl NominalInflow {
    pub fn constant(u: InflowVector) -> Self {
        NominalInflow { rows: vec![u] }
    }

    pub fn schedule(rows: Vec<InflowVector>) -> Self {
        assert!(
            !rows.is_empty(),
            "nominal inflow schedule needs at least one row"
        );
        NominalInflow { rows }
    }

    pub fn at(&self, t: usize) -> &InflowVector {
        &self.rows[t.min(self.rows.len() - 1)]
    }

    /// `U_nom(t), ..., U_nom(t + len - 1)`.
    pub fn window(&self, t: usize, len: usize) -> Vec<InflowVector> {
        (t..t + len).map(|s| self.at(s).clone()).collect()
    }

    pub fn rows(&self) -> &[InflowVector] {
        &self.rows
    }

    pub fn max_entry(&self) -> u32 {
        self.rows
            .iter()
            .flat_map(|r| r.0.iter().copied())
            .max()
            .unwrap_or(0)
    }
}

/// Tuning shared by the centralized controller and every control unit.
#[derive(Clone, Debug, PartialEq)]
pub struct ControllerConfig {
    pub horizon: usize,
    /// Normal-mode lane weights.
    pub gamma: Vec<f64>,
    /// Weight on emergency-path lanes while the vehicle is expected in the network.
    pub emergency_weight: f64,
    /// Diagonal of the inflow deviation weight, one entry per inlet.
    pub theta: Vec<f64>,
    pub u_nom: NominalInflow,
    pub caps: Vec<f64>,
    pub extended_caps: Vec<f64>,
    pub u_max: u32,
    /// Seed of the stream the random tail actions are drawn from.
    pub seed: u64,
    pub search: SearchMode,
}

impl ControllerConfig {
    /// Benchmark-style configuration: uniform weights and caps.
    pub fn uniform(spec: &NetworkSpec, horizon: usize, u_nom: InflowVector) -> Self {
        let n = spec.n_lanes();
        let u_max = 2 * u_nom.0.iter().copied().max().unwrap_or(0);
        ControllerConfig {
            horizon,
            gamma: vec![1.0; n],
            emergency_weight: 100.0,
            theta: vec![50.0; spec.n_inlets()],
            u_nom: NominalInflow::constant(u_nom),
            caps: vec![20.0; n],
            extended_caps: vec![25.0; n],
            u_max,
            seed: 0,
            search: SearchMode::Pruned,
        }
    }

    pub fn validate(&self, spec: &NetworkSpec) -> Result<(), String> {
        let n = spec.n_lanes();
        let n_in = spec.n_inlets();
        if self.horizon == 0 {
            return Err("horizon must be at least 1".into());
        }
        for (what, len, want) in [
            ("gamma", self.gamma.len(), n),
            ("caps", self.caps.len(), n),
            ("extended_caps", self.extended_caps.len(), n),
            ("theta", self.theta.len(), n_in),
        ] {
            if len != want {
                return Err(format!("{what} has {len} entries, expected {want}"));
            }
        }
        if let Some(row) = self.u_nom.rows().iter().find(|r| r.0.len() != n_in) {
            return Err(format!(
                "u_nom row has {} entries, expected {n_in}",
                row.0.len()
            ));
        }
        if self
            .gamma
            .iter()
            .chain(&self.theta)
            .any(|w| !(w.is_finite() && *w >= 0.0))
        {
            return Err("weights must be finite and nonnegative".into());
        }
        let max_gamma = self.gamma.iter().copied().fold(0.0, f64::max);
        if self.emergency_weight <= max_gamma {
            return Err(format!(
                "emergency_weight {} must exceed the largest lane weight {max_gamma}",
                self.emergency_weight
            ));
        }
        if self
            .caps
            .iter()
            .zip(&self.extended_caps)
            .any(|(c, e)| e < c)
        {
            return Err("extended_caps must be at least caps on every lane".into());
        }
        Ok(())
    }
}
