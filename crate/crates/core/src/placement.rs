//! Decentralized random placement.
//!
//! Every helper independently caches a uniformly random subset of exactly
//! `floor(M1 * F / N)` bits of every file, and every user does the same with
//! `floor(M2 * F / N)` bits. Each `(node, file)` subset is drawn from its own
//! ChaCha stream keyed by `(seed, role, node, file)`, so the allocation does
//! not depend on enumeration order or thread count.

use fixedbitset::FixedBitSet;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ModelError, NodeId, SimulationConfig, ValidatedConfig};
use crate::rates::Share;

/// Stream domains. Keeps the random streams of unrelated draws disjoint.
#[derive(Debug, Clone, Copy)]
pub(crate) enum StreamTag {
    Placement = 1,
    HybridSecond = 3,
    FileContent = 4,
    Demands = 5,
}

const ROLE_HELPER: u64 = 1;
const ROLE_USER: u64 = 2;

pub(crate) fn stream_rng(seed: u64, tag: StreamTag, role: u64, node: usize, file: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((tag as u64) << 56) | (role << 48) | ((node as u64) << 24) | file as u64);
    rng
}

/// `floor(m * f / n)`, snapping values that are integral up to rounding noise.
pub fn quota(m: f64, n: f64, file_bits: usize) -> usize {
    let x = m * file_bits as f64 / n;
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.max(1.0) {
        r as usize
    } else {
        x.floor() as usize
    }
}

/// Cached bit positions of every node and file.
#[derive(Debug, Clone, PartialEq)]
pub struct CacheAllocation {
    file_bits: usize,
    files: usize,
    k1: usize,
    k2: usize,
    helper_quota: usize,
    user_quota: usize,
    /// `helpers[i][n]`, 0-based helper and file.
    helpers: Vec<Vec<FixedBitSet>>,
    /// `users[u][n]` with `u = (i - 1) * K2 + (j - 1)`.
    users: Vec<Vec<FixedBitSet>>,
}

impl CacheAllocation {
    pub fn file_bits(&self) -> usize {
        self.file_bits
    }

    pub fn files(&self) -> usize {
        self.files
    }

    pub fn helper_count(&self) -> usize {
        self.k1
    }

    pub fn users_per_helper(&self) -> usize {
        self.k2
    }

    pub fn helper_quota(&self) -> usize {
        self.helper_quota
    }

    pub fn user_quota(&self) -> usize {
        self.user_quota
    }

    /// Cache mask of `node` for 1-based `file`; `None` for the server or an
    /// out-of-range node or file.
    pub fn cache(&self, node: NodeId, file: usize) -> Option<&FixedBitSet> {
        if file == 0 || file > self.files {
            return None;
        }
        match node {
            NodeId::Helper(i) if (1..=self.k1).contains(&i) => Some(&self.helpers[i - 1][file - 1]),
            NodeId::User(i, j) if (1..=self.k1).contains(&i) && (1..=self.k2).contains(&j) => {
                Some(&self.users[(i - 1) * self.k2 + (j - 1)][file - 1])
            }
            _ => None,
        }
    }

    /// Sorted cached bit indices of `node` for `file`.
    pub fn indices(&self, node: NodeId, file: usize) -> Option<Vec<u32>> {
        self.cache(node, file).map(|c| c.ones().map(|b| b as u32).collect())
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        let helpers = (1..=self.k1).map(NodeId::Helper);
        let users = (1..=self.k1).flat_map(move |i| (1..=self.k2).map(move |j| NodeId::User(i, j)));
        helpers.chain(users)
    }

    /// Total cached bits of `node` across all files.
    pub fn total_cached(&self, node: NodeId) -> usize {
        (1..=self.files).filter_map(|n| self.cache(node, n)).map(|c| c.count_ones(..)).sum()
    }

    pub fn to_dump(&self) -> AllocationDump {
        AllocationDump {
            format: DUMP_FORMAT.to_string(),
            version: DUMP_VERSION,
            file_bits: self.file_bits,
            files: self.files,
            helpers: self.k1,
            users_per_helper: self.k2,
            helper_quota: self.helper_quota,
            user_quota: self.user_quota,
            nodes: self
                .nodes()
                .map(|node| NodeDump {
                    node,
                    files: (1..=self.files).map(|n| self.indices(node, n).unwrap()).collect(),
                })
                .collect(),
        }
    }

    pub fn from_dump(dump: &AllocationDump) -> Result<Self, DumpError> {
        if dump.format != DUMP_FORMAT || dump.version != DUMP_VERSION {
            return Err(DumpError::Header(format!("{} v{}", dump.format, dump.version)));
        }
        let empty = vec![FixedBitSet::with_capacity(dump.file_bits); dump.files];
        let mut helpers = vec![empty.clone(); dump.helpers];
        let mut users = vec![empty; dump.helpers * dump.users_per_helper];
        let mut seen = 0;
        for entry in &dump.nodes {
            let (slot, expected) = match entry.node {
                NodeId::Helper(i) if (1..=dump.helpers).contains(&i) => (&mut helpers[i - 1], dump.helper_quota),
                NodeId::User(i, j) if (1..=dump.helpers).contains(&i) && (1..=dump.users_per_helper).contains(&j) => {
                    (&mut users[(i - 1) * dump.users_per_helper + (j - 1)], dump.user_quota)
                }
                other => return Err(DumpError::Content(format!("unexpected node {other}"))),
            };
            if entry.files.len() != dump.files {
                return Err(DumpError::Content(format!("{} lists {} files", entry.node, entry.files.len())));
            }
            for (n, list) in entry.files.iter().enumerate() {
                if list.len() != expected
                    || list.windows(2).any(|w| w[0] >= w[1])
                    || list.last().is_some_and(|&b| b as usize >= dump.file_bits)
                {
                    return Err(DumpError::Content(format!("bad index set for {} file {}", entry.node, n + 1)));
                }
                for &b in list {
                    slot[n].insert(b as usize);
                }
            }
            seen += 1;
        }
        if seen != dump.helpers * (1 + dump.users_per_helper) {
            return Err(DumpError::Content(format!("expected every node once, got {seen} entries")));
        }
        Ok(Self {
            file_bits: dump.file_bits,
            files: dump.files,
            k1: dump.helpers,
            k2: dump.users_per_helper,
            helper_quota: dump.helper_quota,
            user_quota: dump.user_quota,
            helpers,
            users,
        })
    }
}

const DUMP_FORMAT: &str = "twotier-allocation";
const DUMP_VERSION: u32 = 1;

/// Serializable form of a [`CacheAllocation`]: node -> file -> sorted indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationDump {
    pub format: String,
    pub version: u32,
    pub file_bits: usize,
    pub files: usize,
    pub helpers: usize,
    pub users_per_helper: usize,
    pub helper_quota: usize,
    pub user_quota: usize,
    pub nodes: Vec<NodeDump>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeDump {
    pub node: NodeId,
    pub files: Vec<Vec<u32>>,
}

#[derive(Debug, Error)]
pub enum DumpError {
    #[error("unsupported allocation header: {0}")]
    Header(String),
    #[error("malformed allocation: {0}")]
    Content(String),
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct PlacementSpec {
    pub k1: usize,
    pub k2: usize,
    pub files: usize,
    pub file_bits: usize,
    pub helper_quota: usize,
    pub user_quota: usize,
    pub seed: u64,
    pub tag: StreamTag,
}

fn random_subset(rng: &mut ChaCha8Rng, len: usize, amount: usize) -> FixedBitSet {
    let mut set = FixedBitSet::with_capacity(len);
    if amount == len {
        set.insert_range(..);
    } else {
        for b in rand::seq::index::sample(rng, len, amount).into_iter() {
            set.insert(b);
        }
    }
    set
}

pub(crate) fn place_with(spec: PlacementSpec) -> CacheAllocation {
    let draw = |role: u64, node: usize, quota: usize| -> Vec<FixedBitSet> {
        (0..spec.files)
            .map(|n| {
                let mut rng = stream_rng(spec.seed, spec.tag, role, node, n);
                random_subset(&mut rng, spec.file_bits, quota)
            })
            .collect()
    };
    let helpers = (0..spec.k1).into_par_iter().map(|i| draw(ROLE_HELPER, i, spec.helper_quota)).collect();
    let users = (0..spec.k1 * spec.k2).into_par_iter().map(|u| draw(ROLE_USER, u, spec.user_quota)).collect();
    CacheAllocation {
        file_bits: spec.file_bits,
        files: spec.files,
        k1: spec.k1,
        k2: spec.k2,
        helper_quota: spec.helper_quota,
        user_quota: spec.user_quota,
        helpers,
        users,
    }
}

/// Random placement at every helper and user.
pub fn place(config: &ValidatedConfig, sim: &SimulationConfig) -> Result<CacheAllocation, ModelError> {
    sim.check(config)?;
    Ok(place_with(PlacementSpec {
        k1: config.k1(),
        k2: config.k2(),
        files: config.files(),
        file_bits: sim.file_bits,
        helper_quota: quota(config.m1(), config.n(), sim.file_bits),
        user_quota: quota(config.m2(), config.n(), sim.file_bits),
        seed: sim.seed,
        tag: StreamTag::Placement,
    }))
}

/// Placements of the two memory-sharing subsystems.
///
/// Subsystem 1 covers bits `[0, split)` of every file with the whole helper
/// memory and a `beta` share of the user memory; subsystem 2 covers
/// `[split, F)` with no helper memory and the remaining user memory. Each
/// half is indexed relative to its own sub-file.
///
/// Subsystem 1 draws from the plain placement streams, and so does
/// subsystem 2 when it spans the whole file; otherwise subsystem 2 uses its
/// own streams. The corner shares therefore reproduce [`place`] exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridAllocation {
    pub share: Share,
    pub split: usize,
    pub first: CacheAllocation,
    pub second: CacheAllocation,
}

pub fn place_hybrid(
    config: &ValidatedConfig,
    sim: &SimulationConfig,
    share: Share,
) -> Result<HybridAllocation, ModelError> {
    sim.check(config)?;
    let f = sim.file_bits;
    let split = ((share.alpha() * f as f64).floor() as usize).min(f);
    let rest = f - split;
    let base = PlacementSpec {
        k1: config.k1(),
        k2: config.k2(),
        files: config.files(),
        file_bits: split,
        helper_quota: quota(config.m1(), config.n(), f).min(split),
        user_quota: quota(share.beta() * config.m2(), config.n(), f).min(split),
        seed: sim.seed,
        tag: StreamTag::Placement,
    };
    let first = place_with(base);
    let second = place_with(PlacementSpec {
        file_bits: rest,
        helper_quota: 0,
        user_quota: quota((1.0 - share.beta()) * config.m2(), config.n(), f).min(rest),
        tag: if split == 0 { StreamTag::Placement } else { StreamTag::HybridSecond },
        ..base
    });
    Ok(HybridAllocation { share, split, first, second })
}
