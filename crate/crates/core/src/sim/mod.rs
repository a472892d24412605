//! Closed-loop simulation, metrics and batch experiments.

pub mod baseline;
pub mod batch;
pub mod harness;
pub mod metrics;
pub mod record;

pub use baseline::PeriodicBaseline;
pub use batch::{
    batch_seeds, format_summary, format_sweep, run_batch, sweep_horizon, BatchResult,
    ControllerSummary, SweepRow,
};
pub use harness::{
    build_controller, build_with_units, disturbance_rng, run_closed_loop, run_with, ControllerKind,
    Disturbances,
};
pub use metrics::{compute_metrics, Metrics};
pub use record::{parse_csv, CsvTrajectory, EmergencyOutcome, Mode, RunRecord, StepRecord};
