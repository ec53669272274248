//! Network configuration, simulation parameters and shared value types.
//!
//! Memories are normalized by the file size: a helper memory of `M1` means
//! the helper stores `M1 * F` bits in total. Node and file identifiers are
//! 1-based throughout the public API, matching the usual `H_i` / `U_{i,j}`
//! labelling; bit positions inside a file are 0-based.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
    #[error("invalid memory: {0}")]
    InvalidMemory(String),
    #[error("invalid simulation parameters: {0}")]
    InvalidSimulation(String),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
}

/// The tuple `(N, K1, K2, M1, M2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    /// `N`, number of files in the library.
    pub library_size: usize,
    /// `K1`, number of helpers.
    pub helper_count: usize,
    /// `K2`, number of users attached to each helper.
    pub users_per_helper: usize,
    /// `M1`, normalized helper memory in files.
    pub helper_memory: f64,
    /// `M2`, normalized user memory in files.
    pub user_memory: f64,
}

impl NetworkConfig {
    pub fn new(n: usize, k1: usize, k2: usize, m1: f64, m2: f64) -> Self {
        Self { library_size: n, helper_count: k1, users_per_helper: k2, helper_memory: m1, user_memory: m2 }
    }

    pub fn validate(self) -> Result<ValidatedConfig, ModelError> {
        if self.helper_count < 2 || self.users_per_helper < 2 {
            return Err(ModelError::InvalidTopology(format!(
                "K1 = {} and K2 = {} must both be at least 2",
                self.helper_count, self.users_per_helper
            )));
        }
        if self.library_size == 0 {
            return Err(ModelError::InvalidTopology("library must hold at least one file".into()));
        }
        let n = self.library_size as f64;
        for (name, m) in [("M1", self.helper_memory), ("M2", self.user_memory)] {
            if !(0.0..=n).contains(&m) {
                return Err(ModelError::InvalidMemory(format!("{name} = {m} is outside [0, {n}]")));
            }
        }
        Ok(ValidatedConfig {
            config: self,
            gap_eligible: self.library_size >= self.helper_count * self.users_per_helper,
        })
    }
}

/// A [`NetworkConfig`] that passed [`NetworkConfig::validate`].
///
/// Only constructible through validation, so every downstream operation
/// taking a `ValidatedConfig` can rely on the invariants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValidatedConfig {
    config: NetworkConfig,
    gap_eligible: bool,
}

impl ValidatedConfig {
    pub fn config(&self) -> NetworkConfig {
        self.config
    }

    /// True iff `N >= K1 * K2`, the standing assumption of the gap analysis.
    pub fn gap_eligible(&self) -> bool {
        self.gap_eligible
    }

    pub fn n(&self) -> f64 {
        self.config.library_size as f64
    }

    pub fn files(&self) -> usize {
        self.config.library_size
    }

    pub fn k1(&self) -> usize {
        self.config.helper_count
    }

    pub fn k2(&self) -> usize {
        self.config.users_per_helper
    }

    pub fn m1(&self) -> f64 {
        self.config.helper_memory
    }

    pub fn m2(&self) -> f64 {
        self.config.user_memory
    }

    pub fn user_count(&self) -> usize {
        self.k1() * self.k2()
    }

    /// Copy with different memories, re-validated.
    pub fn with_memories(&self, m1: f64, m2: f64) -> Result<ValidatedConfig, ModelError> {
        NetworkConfig { helper_memory: m1, user_memory: m2, ..self.config }.validate()
    }
}

/// Parameters of one bit-level simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    /// `F`, bits per file.
    pub file_bits: usize,
    pub seed: u64,
    /// Requested file (1-based) of every user, ordered `U_{1,1}, U_{1,2}, ..., U_{K1,K2}`.
    pub requests: Vec<usize>,
}

impl SimulationConfig {
    pub fn check(&self, config: &ValidatedConfig) -> Result<(), ModelError> {
        if self.file_bits < config.files() {
            return Err(ModelError::InvalidSimulation(format!(
                "file size F = {} must be at least N = {}",
                self.file_bits,
                config.files()
            )));
        }
        if self.file_bits > u32::MAX as usize {
            return Err(ModelError::InvalidSimulation(format!("file size F = {} is too large", self.file_bits)));
        }
        if self.requests.len() != config.user_count() {
            return Err(ModelError::InvalidSimulation(format!(
                "expected {} requests (one per user), got {}",
                config.user_count(),
                self.requests.len()
            )));
        }
        if let Some(bad) = self.requests.iter().find(|&&d| d == 0 || d > config.files()) {
            return Err(ModelError::InvalidSimulation(format!(
                "requested file {bad} is outside [1, {}]",
                config.files()
            )));
        }
        Ok(())
    }

    /// Requested file of user `(i, j)` (1-based in, 1-based out).
    pub fn request(&self, config: &ValidatedConfig, i: usize, j: usize) -> usize {
        self.requests[(i - 1) * config.k2() + (j - 1)]
    }
}

/// Normalized rates: `r1` on the server link, `r2` on the busiest helper link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePair {
    pub r1: f64,
    pub r2: f64,
}

impl RatePair {
    pub fn new(r1: f64, r2: f64) -> Self {
        Self { r1, r2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeId {
    Server,
    Helper(usize),
    User(usize, usize),
}

impl NodeId {
    pub fn check(&self, config: &ValidatedConfig) -> Result<(), ModelError> {
        let ok = match *self {
            NodeId::Server => true,
            NodeId::Helper(i) => (1..=config.k1()).contains(&i),
            NodeId::User(i, j) => (1..=config.k1()).contains(&i) && (1..=config.k2()).contains(&j),
        };
        if ok {
            Ok(())
        } else {
            Err(ModelError::UnknownNode(*self))
        }
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeId::Server => write!(f, "S"),
            NodeId::Helper(i) => write!(f, "H{i}"),
            NodeId::User(i, j) => write!(f, "U{i},{j}"),
        }
    }
}
