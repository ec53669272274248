//! Decentralized coded caching in two-layer networks.
//!
//! A server holding `N` files feeds `K1` helpers over a shared broadcast
//! link; each helper feeds its `K2` attached users over its own broadcast
//! link. Helpers and users cache random fixed-size subsets of every file and
//! the delivery phase sends XOR-coded multicast messages on both layers.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: configuration types and validation.
//! - [`placement`]: seeded random cache placement.
//! - [`partition`]: grouping of a file's bits by the exact set of caching nodes.
//! - [`delivery`]: bit-exact coded delivery and decoding for every scheme.
//! - [`rates`]: closed-form normalized rates.
//! - [`bounds`]: cut-set lower bounds, envelope upper bounds, regime classification.
//! - [`gap`]: per-point and swept order-optimality certification.
//! - [`region`]: achievable-region frontiers over the memory-sharing grid.

pub mod bits;
pub mod bounds;
pub mod delivery;
pub mod gap;
pub mod model;
pub mod partition;
pub mod placement;
pub mod rates;
pub mod region;

pub use bounds::{BoundSet, Case, Regime, RegimeLabel, SubRegime};
pub use delivery::{DeliveryError, DeliveryOutcome, Message, Scheme, Transcript};
pub use gap::{GapReport, SweepSummary};
pub use model::{ModelError, NetworkConfig, NodeId, RatePair, SimulationConfig, ValidatedConfig};
pub use partition::{SubfilePartition, SubfileSplit};
pub use placement::{CacheAllocation, HybridAllocation};
pub use rates::{RateError, SchemeId, Share};
pub use region::Frontier;
