//! Run records and their CSV form.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::mpc::Relaxation;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Normal,
    Emergency,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Normal => "normal",
            Mode::Emergency => "emergency",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub inflow: Vec<u32>,
    /// Zero-based configuration per intersection.
    pub action: Vec<usize>,
    pub mode: Mode,
    /// Whether `x(t+1)` may use the extended caps.
    pub relaxed: bool,
    pub qp_nodes: u64,
    pub search_nodes: u64,
    pub relaxation: Option<Relaxation>,
    pub micros: u64,
}

/// Emergency as it played out in a run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmergencyOutcome {
    pub time: usize,
    pub path: Vec<usize>,
    /// Last step of the window in which the vehicle is expected in the network.
    pub window_end: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub scenario: String,
    pub controller: String,
    pub seed: u64,
    pub lane_labels: Vec<u32>,
    pub inlet_labels: Vec<u32>,
    pub intersection_labels: Vec<u32>,
    /// `x(0), ..., x(T)`.
    pub states: Vec<Vec<u32>>,
    pub steps: Vec<StepRecord>,
    pub emergency: Option<EmergencyOutcome>,
}

impl RunRecord {
    /// Serialized record with wall-clock fields zeroed.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut r = self.clone();
        for s in &mut r.steps {
            s.micros = 0;
        }
        serde_json::to_vec(&r).expect("run records serialize")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let mut header = vec!["t".to_string()];
        header.extend(self.lane_labels.iter().map(|l| format!("x_{l}")));
        header.extend(self.inlet_labels.iter().map(|l| format!("u_{l}")));
        header.extend(
            self.intersection_labels
                .iter()
                .map(|l| format!("lambda_{l}")),
        );
        header.push("mode".into());
        header.push("ms".into());
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&header).expect("in-memory csv");
        for (t, state) in self.states.iter().enumerate() {
            let mut row = vec![t.to_string()];
            row.extend(state.iter().map(u32::to_string));
            match self.steps.get(t) {
                Some(s) => {
                    row.extend(s.inflow.iter().map(u32::to_string));
                    row.extend(s.action.iter().map(|c| (c + 1).to_string()));
                    row.push(s.mode.as_str().into());
                    let mut ms = String::new();
                    let _ = write!(ms, "{:.3}", s.micros as f64 / 1000.0);
                    row.push(ms);
                }
                None => row.extend(std::iter::repeat_n(
                    String::new(),
                    self.inlet_labels.len() + self.intersection_labels.len() + 2,
                )),
            }
            w.write_record(&row).expect("in-memory csv");
        }
        out.push_str(
            &String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv"),
        );
        out
    }
}

/// Trajectory recovered from a run CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvTrajectory {
    pub states: Vec<Vec<u32>>,
    pub inflows: Vec<Vec<u32>>,
    /// Zero-based configurations.
    pub actions: Vec<Vec<usize>>,
    pub modes: Vec<Mode>,
}

impl CsvTrajectory {
    pub fn matches(&self, record: &RunRecord) -> bool {
        self.states == record.states
            && self.inflows
                == record
                    .steps
                    .iter()
                    .map(|s| s.inflow.clone())
                    .collect::<Vec<_>>()
            && self.actions
                == record
                    .steps
                    .iter()
                    .map(|s| s.action.clone())
                    .collect::<Vec<_>>()
            && self.modes == record.steps.iter().map(|s| s.mode).collect::<Vec<_>>()
    }
}

fn bad(msg: impl Into<String>) -> std::io::Error {
    std::io::Error::new(std::io::ErrorKind::InvalidData, msg.into())
}

pub fn parse_csv(text: &str) -> std::io::Result<CsvTrajectory> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| bad(e.to_string()))?.clone();
    let count = |p: &str| header.iter().filter(|h| h.starts_with(p)).count();
    let (n, n_in, m) = (count("x_"), count("u_"), count("lambda_"));
    let mut out = CsvTrajectory {
        states: vec![],
        inflows: vec![],
        actions: vec![],
        modes: vec![],
    };
    for row in r.records() {
        let row = row.map_err(|e| bad(e.to_string()))?;
        let num = |i: usize| -> std::io::Result<u64> {
            row.get(i)
                .ok_or_else(|| bad("short row"))?
                .parse::<u64>()
                .map_err(|e| bad(format!("column {i}: {e}")))
        };
        out.states.push(
            (1..=n)
                .map(|i| num(i).map(|v| v as u32))
                .collect::<Result<_, _>>()?,
        );
        let mode_col = 1 + n + n_in + m;
        match row.get(mode_col).unwrap_or("") {
            "" => continue,
            mode => {
                out.inflows.push(
                    (1 + n..1 + n + n_in)
                        .map(|i| num(i).map(|v| v as u32))
                        .collect::<Result<_, _>>()?,
                );
                out.actions.push(
                    (1 + n + n_in..mode_col)
                        .map(|i| num(i).map(|v| v as usize - 1))
                        .collect::<Result<_, _>>()?,
                );
                out.modes.push(match mode {
                    "normal" => Mode::Normal,
                    "emergency" => Mode::Emergency,
                    other => return Err(bad(format!("unknown mode {other}"))),
                });
            }
        }
    }
    Ok(out)
}
