//! Subfile decomposition `V_{d,S}`.
//!
//! For a file `d` and an ordered family of caching nodes, every bit of `d`
//! belongs to exactly one class: the set `S` of family members that cache it.
//! Classes are keyed by a bitmask over family positions (bit `k` set means
//! `family[k]` caches the bit); only non-empty classes are stored.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::model::NodeId;
use crate::placement::CacheAllocation;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PartitionError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("unknown file {0}")]
    UnknownFile(usize),
    #[error("node family must be non-empty, distinct and at most 63 nodes")]
    BadFamily,
    #[error("pivot {0} belongs to the partition family")]
    PivotInFamily(NodeId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubfilePartition {
    file: usize,
    file_bits: usize,
    family: Vec<NodeId>,
    classes: BTreeMap<u64, Vec<u32>>,
}

impl SubfilePartition {
    pub fn file(&self) -> usize {
        self.file
    }

    pub fn family(&self) -> &[NodeId] {
        &self.family
    }

    /// Sorted bits cached by exactly the family members in `mask`.
    pub fn class(&self, mask: u64) -> &[u32] {
        self.classes.get(&mask).map_or(&[], Vec::as_slice)
    }

    /// Non-empty classes in ascending mask order.
    pub fn classes(&self) -> impl Iterator<Item = (u64, &[u32])> {
        self.classes.iter().map(|(&m, v)| (m, v.as_slice()))
    }

    pub fn position(&self, node: NodeId) -> Option<usize> {
        self.family.iter().position(|&n| n == node)
    }

    pub fn file_bits(&self) -> usize {
        self.file_bits
    }
}

/// Group the bits of 1-based `file` by which members of `family` cache them.
pub fn partition(alloc: &CacheAllocation, file: usize, family: &[NodeId]) -> Result<SubfilePartition, PartitionError> {
    if family.is_empty() || family.len() > 63 {
        return Err(PartitionError::BadFamily);
    }
    for (k, node) in family.iter().enumerate() {
        if family[..k].contains(node) {
            return Err(PartitionError::BadFamily);
        }
    }
    if file == 0 || file > alloc.files() {
        return Err(PartitionError::UnknownFile(file));
    }
    let caches = family
        .iter()
        .map(|&node| alloc.cache(node, file).ok_or(PartitionError::UnknownNode(node)))
        .collect::<Result<Vec<_>, _>>()?;

    let mut classes: BTreeMap<u64, Vec<u32>> = BTreeMap::new();
    for b in 0..alloc.file_bits() {
        let mut mask = 0u64;
        for (k, cache) in caches.iter().enumerate() {
            if cache.contains(b) {
                mask |= 1 << k;
            }
        }
        classes.entry(mask).or_default().push(b as u32);
    }
    Ok(SubfilePartition { file, file_bits: alloc.file_bits(), family: family.to_vec(), classes })
}

/// A class split by membership in one extra node's cache.
#[derive(Debug, Clone, PartialEq)]
pub struct SubfileSplit {
    pub subset: u64,
    pub pivot: NodeId,
    /// Bits the pivot caches.
    pub in_part: Vec<u32>,
    /// Bits the pivot does not cache.
    pub out_part: Vec<u32>,
}

/// Split class `subset` of `part` by whether `pivot` caches each bit.
pub fn split_by_pivot(
    part: &SubfilePartition,
    subset: u64,
    pivot: NodeId,
    alloc: &CacheAllocation,
) -> Result<SubfileSplit, PartitionError> {
    if part.position(pivot).is_some() {
        return Err(PartitionError::PivotInFamily(pivot));
    }
    let cache = alloc.cache(pivot, part.file).ok_or(PartitionError::UnknownNode(pivot))?;
    let (in_part, out_part) = part.class(subset).iter().partition(|&&b| cache.contains(b as usize));
    Ok(SubfileSplit { subset, pivot, in_part, out_part })
}
