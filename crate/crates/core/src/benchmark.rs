//! The shipped four-intersection benchmark.

use crate::network::NetworkSpec;
use crate::scenario::Scenario;

pub const SCENARIO: &str = include_str!("../scenarios/benchmark.toml");
pub const EMERGENCY_SCENARIO: &str = include_str!("../scenarios/benchmark_emergency.toml");

pub fn scenario() -> Scenario {
    Scenario::parse(SCENARIO).expect("shipped benchmark scenario is valid")
}

pub fn emergency_scenario() -> Scenario {
    Scenario::parse(EMERGENCY_SCENARIO).expect("shipped emergency scenario is valid")
}

pub fn network() -> NetworkSpec {
    scenario().network
}
