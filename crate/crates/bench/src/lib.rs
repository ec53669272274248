//! Shared fixtures for the benchmarks.

use twotier::{NetworkConfig, SimulationConfig, ValidatedConfig};

/// The configuration used throughout the rate comparisons.
pub fn fig3_config() -> ValidatedConfig {
    NetworkConfig::new(50, 10, 2, 10.0, 20.0).validate().expect("valid")
}

/// A small network with every user asking for a different file where possible.
pub fn simulation_fixture(file_bits: usize, seed: u64) -> (ValidatedConfig, SimulationConfig) {
    let config = NetworkConfig::new(8, 2, 2, 2.0, 2.0).validate().expect("valid");
    let requests = (0..config.user_count()).map(|u| u % config.files() + 1).collect();
    (config, SimulationConfig { file_bits, seed, requests })
}
