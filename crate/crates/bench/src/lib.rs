//! Shared scenario builders for the benchmark targets.

use mwsim_core::experiment::ScenarioConfig;
use mwsim_core::mobility::MobilityModel;
use mwsim_core::protocols::ProtocolKind;

/// A short default-field scenario sized for benchmarking.
pub fn bench_scenario(protocol: ProtocolKind, mobility: MobilityModel) -> ScenarioConfig {
    ScenarioConfig {
        protocol,
        mobility,
        speed: 10.0,
        seed: 1,
        duration: 120.0,
        ..ScenarioConfig::default()
    }
}
