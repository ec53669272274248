//! Bit-exact coded delivery and decoding.
//!
//! Every scheme is driven by a layout: for each link, the list of coded
//! messages in canonical order (subset size ascending, subset mask ascending,
//! slot `j` ascending) and, for each message, which bits of which file each
//! participant needs. Layouts depend only on public placement metadata, so
//! the sender encodes from them and every receiver re-derives them to decode.
//!
//! Receivers read values only from their own cache, from what they have
//! already decoded, and from the messages on their incoming link.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::{gather, prefix, random_bits, xor_padded};
use crate::model::{ModelError, NodeId, RatePair, SimulationConfig, ValidatedConfig};
use crate::partition::{partition, split_by_pivot, PartitionError, SubfilePartition};
use crate::placement::{stream_rng, CacheAllocation, HybridAllocation, StreamTag};
use crate::rates::Share;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DeliveryError {
    #[error("helper H{helper} must send bit {bit} of file {file} but neither caches nor decoded it")]
    HelperMissingBits { helper: usize, file: usize, bit: u32 },
    #[error("user {user} decoded its file wrongly, first bad bit {bit}")]
    DecodeFailure { user: NodeId, bit: usize },
    #[error("allocation does not match the configuration: {0}")]
    AllocationMismatch(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    Sc,
    A,
    B,
    Hybrid(ShareBits),
}

/// A [`Share`] kept as raw bits so [`Scheme`] can be `Eq`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShareBits {
    alpha: u64,
    beta: u64,
}

impl From<Share> for ShareBits {
    fn from(s: Share) -> Self {
        Self { alpha: s.alpha().to_bits(), beta: s.beta().to_bits() }
    }
}

impl ShareBits {
    pub fn share(self) -> Share {
        Share::new(f64::from_bits(self.alpha), f64::from_bits(self.beta)).expect("stored from a valid share")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Layer {
    Server,
    /// 1-based helper index.
    Helper(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub layer: Layer,
    /// Memory-sharing subsystem the message belongs to (0 outside the hybrid scheme).
    pub segment: u8,
    /// Participants, as a mask over the node family of the coding layer:
    /// helpers for scheme A/S&C server messages, the helper's users for its
    /// own messages, all users (flat index) for scheme B.
    pub subset: u64,
    /// User slot `j` (1-based) of scheme A/S&C server messages.
    pub slot: Option<usize>,
    pub payload: FixedBitSet,
}

impl Message {
    pub fn len(&self) -> usize {
        self.payload.len()
    }

    pub fn is_empty(&self) -> bool {
        self.payload.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Transcript {
    messages: Vec<Message>,
    total_bits: usize,
}

impl Transcript {
    fn push(&mut self, m: Message) {
        self.total_bits += m.len();
        self.messages.push(m);
    }

    fn extend(&mut self, other: Transcript) {
        for m in other.messages {
            self.push(m);
        }
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn total_bits(&self) -> usize {
        self.total_bits
    }

    /// One line per message: `layer,segment,subset,slot,length[,payload]`.
    pub fn dump(&self, with_payload: bool) -> String {
        let mut out = String::from(if with_payload {
            "layer,segment,subset,slot,length,payload\n"
        } else {
            "layer,segment,subset,slot,length\n"
        });
        for m in &self.messages {
            let layer = match m.layer {
                Layer::Server => "S".to_string(),
                Layer::Helper(i) => format!("H{i}"),
            };
            let slot = m.slot.map(|j| j.to_string()).unwrap_or_default();
            let _ = write!(out, "{layer},{},{:#x},{slot},{}", m.segment, m.subset, m.len());
            if with_payload {
                out.push(',');
                out.extend((0..m.len()).map(|b| if m.payload.contains(b) { '1' } else { '0' }));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeliveryOutcome {
    pub scheme: Scheme,
    pub file_bits: usize,
    pub server: Transcript,
    /// Transcript of helper `i` at index `i - 1`.
    pub helpers: Vec<Transcript>,
    /// Decoded file of every user, flat order `U_{1,1}, U_{1,2}, ...`.
    pub decoded: Vec<FixedBitSet>,
    pub rates: RatePair,
}

/// Pseudo-random file contents, one independent stream per file.
#[derive(Debug, Clone, PartialEq)]
pub struct Library {
    files: Vec<FixedBitSet>,
}

impl Library {
    pub fn generate(files: usize, file_bits: usize, seed: u64) -> Self {
        let files = (0..files)
            .map(|n| random_bits(&mut stream_rng(seed, StreamTag::FileContent, 0, 0, n), file_bits))
            .collect();
        Self { files }
    }

    /// Bits of 1-based `file`.
    pub fn file(&self, file: usize) -> &FixedBitSet {
        &self.files[file - 1]
    }

    /// Every file restricted to bits `[start, end)`, re-indexed from 0.
    pub fn slice(&self, start: usize, end: usize) -> Self {
        let files = self
            .files
            .iter()
            .map(|f| {
                let mut out = FixedBitSet::with_capacity(end - start);
                for b in f.ones().skip_while(|&b| b < start).take_while(|&b| b < end) {
                    out.insert(b - start);
                }
                out
            })
            .collect();
        Self { files }
    }
}

/// Uniformly random demands, one per user, from the seed's demand stream.
pub fn uniform_demands(config: &ValidatedConfig, seed: u64) -> Vec<usize> {
    use rand::Rng;
    let mut rng = stream_rng(seed, StreamTag::Demands, 0, 0, 0);
    (0..config.user_count()).map(|_| rng.gen_range(1..=config.files())).collect()
}

/// What one participant of a coded message needs.
#[derive(Debug, Clone)]
struct Component {
    /// 0-based position in the layer's node family.
    member: usize,
    file: usize,
    bits: Vec<u32>,
}

/// `(subset size, subset mask, slot)`, which sorts in canonical order.
type GroupKey = (u32, u64, usize);

#[derive(Debug, Clone, Default)]
struct Layout {
    groups: BTreeMap<GroupKey, Vec<Component>>,
}

impl Layout {
    fn add(&mut self, mask: u64, slot: usize, comp: Component) {
        if !comp.bits.is_empty() {
            self.groups.entry((mask.count_ones(), mask, slot)).or_default().push(comp);
        }
    }

    fn group(&self, m: &Message) -> &[Component] {
        let key = (m.subset.count_ones(), m.subset, m.slot.unwrap_or(0));
        self.groups.get(&key).map_or(&[], Vec::as_slice)
    }
}

/// The part of a file's bits a node can read: its cache plus what it has decoded.
struct Store<'a> {
    lib: &'a Library,
    alloc: &'a CacheAllocation,
    node: NodeId,
    /// Decoded bits per file: `(known mask, values)`.
    learned: HashMap<usize, (FixedBitSet, FixedBitSet)>,
}

impl<'a> Store<'a> {
    fn new(lib: &'a Library, alloc: &'a CacheAllocation, node: NodeId) -> Self {
        Self { lib, alloc, node, learned: HashMap::new() }
    }

    /// Values at `bits`, or the first bit this node does not hold.
    fn values(&self, file: usize, bits: &[u32]) -> Result<FixedBitSet, u32> {
        let cache = self.alloc.cache(self.node, file).expect("node and file checked");
        let learned = self.learned.get(&file);
        let truth = self.lib.file(file);
        let mut out = FixedBitSet::with_capacity(bits.len());
        for (k, &b) in bits.iter().enumerate() {
            let b_us = b as usize;
            let v = if cache.contains(b_us) {
                truth.contains(b_us)
            } else if let Some((known, vals)) = learned.filter(|(known, _)| known.contains(b_us)) {
                let _ = known;
                vals.contains(b_us)
            } else {
                return Err(b);
            };
            out.set(k, v);
        }
        Ok(out)
    }

    fn learn(&mut self, file: usize, bits: &[u32], values: &FixedBitSet) {
        let len = self.alloc.file_bits();
        let (known, vals) = self
            .learned
            .entry(file)
            .or_insert_with(|| (FixedBitSet::with_capacity(len), FixedBitSet::with_capacity(len)));
        for (k, &b) in bits.iter().enumerate() {
            known.insert(b as usize);
            vals.set(b as usize, values.contains(k));
        }
    }

    /// The full file, or the first bit still unknown.
    fn assemble(&self, file: usize) -> Result<FixedBitSet, usize> {
        let all: Vec<u32> = (0..self.alloc.file_bits() as u32).collect();
        self.values(file, &all).map_err(|b| b as usize)
    }
}

/// XOR of every component's values, zero-padded to the longest.
fn encode(
    comps: &[Component],
    mut values: impl FnMut(&Component) -> Result<FixedBitSet, u32>,
) -> Result<FixedBitSet, (usize, u32)> {
    let mut acc = FixedBitSet::new();
    for c in comps {
        let v = values(c).map_err(|b| (c.file, b))?;
        xor_padded(&mut acc, &v);
    }
    Ok(acc)
}

/// Strip the other components from `payload` and return `member`'s values.
fn peel(
    payload: &FixedBitSet,
    comps: &[Component],
    member: usize,
    store: &Store,
) -> Result<Option<(usize, Vec<u32>, FixedBitSet)>, u32> {
    let Some(own) = comps.iter().find(|c| c.member == member) else {
        return Ok(None);
    };
    let mut acc = payload.clone();
    for c in comps.iter().filter(|c| c.member != member) {
        xor_padded(&mut acc, &store.values(c.file, &c.bits)?);
    }
    Ok(Some((own.file, own.bits.clone(), prefix(&acc, own.bits.len()))))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Sc,
    A,
    B,
}

/// Public metadata of one subsystem: topology, allocation and demands.
struct Plan<'a> {
    alloc: &'a CacheAllocation,
    requests: &'a [usize],
    k1: usize,
    k2: usize,
    kind: Kind,
    /// Server-to-helper layout (schemes A/S&C) or server-to-user layout (B).
    server: Layout,
    /// Helper-to-user layouts (schemes A/S&C only).
    helpers: Vec<Layout>,
}

fn helper_family(k1: usize) -> Vec<NodeId> {
    (1..=k1).map(NodeId::Helper).collect()
}

fn attached_family(i: usize, k2: usize) -> Vec<NodeId> {
    (1..=k2).map(|j| NodeId::User(i, j)).collect()
}

fn all_users(k1: usize, k2: usize) -> Vec<NodeId> {
    (1..=k1).flat_map(|i| (1..=k2).map(move |j| NodeId::User(i, j))).collect()
}

/// Partitions keyed by file, computed once per distinct requested file.
fn partitions(
    alloc: &CacheAllocation,
    files: impl Iterator<Item = usize>,
    family: &[NodeId],
) -> Result<HashMap<usize, SubfilePartition>, PartitionError> {
    let mut out = HashMap::new();
    for d in files {
        if let std::collections::hash_map::Entry::Vacant(e) = out.entry(d) {
            e.insert(partition(alloc, d, family)?);
        }
    }
    Ok(out)
}

impl<'a> Plan<'a> {
    fn new(alloc: &'a CacheAllocation, requests: &'a [usize], kind: Kind) -> Result<Self, PartitionError> {
        let (k1, k2) = (alloc.helper_count(), alloc.users_per_helper());
        let mut plan = Plan { alloc, requests, k1, k2, kind, server: Layout::default(), helpers: vec![] };
        match kind {
            Kind::Sc | Kind::A => {
                plan.server = plan.first_layer()?;
                plan.helpers = (1..=k1).map(|i| plan.second_layer(i)).collect::<Result<_, _>>()?;
            }
            Kind::B => plan.server = plan.user_layer()?,
        }
        Ok(plan)
    }

    fn request(&self, i: usize, j: usize) -> usize {
        self.requests[(i - 1) * self.k2 + (j - 1)]
    }

    /// For each `(S1, j)`: the XOR over `i` in `S1` of `V_{d_ij, S1 \ {i}}`,
    /// restricted to bits user `(i, j)` lacks under S&C.
    fn first_layer(&self) -> Result<Layout, PartitionError> {
        let family = helper_family(self.k1);
        let parts = partitions(self.alloc, self.requests.iter().copied(), &family)?;
        let mut layout = Layout::default();
        for i in 1..=self.k1 {
            let own = 1u64 << (i - 1);
            for j in 1..=self.k2 {
                let d = self.request(i, j);
                let part = &parts[&d];
                for (mask, bits) in part.classes() {
                    if mask & own != 0 {
                        continue;
                    }
                    let bits = match self.kind {
                        Kind::Sc => split_by_pivot(part, mask, NodeId::User(i, j), self.alloc)?.out_part,
                        _ => bits.to_vec(),
                    };
                    layout.add(mask | own, j, Component { member: i - 1, file: d, bits });
                }
            }
        }
        Ok(layout)
    }

    /// For helper `i` and each `S2`: the XOR over `j` in `S2` of `V_{d_ij, S2 \ {j}}`.
    fn second_layer(&self, i: usize) -> Result<Layout, PartitionError> {
        let family = attached_family(i, self.k2);
        let parts = partitions(self.alloc, (1..=self.k2).map(|j| self.request(i, j)), &family)?;
        let mut layout = Layout::default();
        for j in 1..=self.k2 {
            let own = 1u64 << (j - 1);
            let d = self.request(i, j);
            for (mask, bits) in parts[&d].classes() {
                if mask & own == 0 {
                    layout.add(mask | own, 0, Component { member: j - 1, file: d, bits: bits.to_vec() });
                }
            }
        }
        Ok(layout)
    }

    /// For each `S3` over all users: the XOR over `u` in `S3` of `V_{d_u, S3 \ {u}}`.
    fn user_layer(&self) -> Result<Layout, PartitionError> {
        let family = all_users(self.k1, self.k2);
        let parts = partitions(self.alloc, self.requests.iter().copied(), &family)?;
        let mut layout = Layout::default();
        for (u, &d) in self.requests.iter().enumerate() {
            let own = 1u64 << u;
            for (mask, bits) in parts[&d].classes() {
                if mask & own == 0 {
                    layout.add(mask | own, 0, Component { member: u, file: d, bits: bits.to_vec() });
                }
            }
        }
        Ok(layout)
    }

    fn attached_mask(&self, i: usize) -> u64 {
        let ones = if self.k2 == 64 { u64::MAX } else { (1u64 << self.k2) - 1 };
        ones << ((i - 1) * self.k2)
    }

    fn run(&self, lib: &Library, segment: u8) -> Result<(Transcript, Vec<Transcript>), DeliveryError> {
        let mut server = Transcript::default();
        for (&(_, mask, slot), comps) in &self.server.groups {
            let payload = encode(comps, |c| Ok(gather(lib.file(c.file), &c.bits))).expect("server holds everything");
            let slot = (self.kind != Kind::B).then_some(slot);
            server.push(Message { layer: Layer::Server, segment, subset: mask, slot, payload });
        }
        let helpers = (1..=self.k1)
            .map(|i| match self.kind {
                Kind::B => Ok(self.forward(i, &server, segment)),
                _ => self.relay(i, lib, &server, segment),
            })
            .collect::<Result<_, _>>()?;
        Ok((server, helpers))
    }

    /// Helper `i` decodes its first-layer messages, then encodes its own.
    fn relay(&self, i: usize, lib: &Library, server: &Transcript, segment: u8) -> Result<Transcript, DeliveryError> {
        let mut store = Store::new(lib, self.alloc, NodeId::Helper(i));
        for m in server.messages() {
            if m.subset & (1 << (i - 1)) == 0 {
                continue;
            }
            let decoded = peel(&m.payload, self.server.group(m), i - 1, &store)
                .map_err(|bit| DeliveryError::HelperMissingBits { helper: i, file: 0, bit })?;
            if let Some((file, bits, values)) = decoded {
                store.learn(file, &bits, &values);
            }
        }
        let mut out = Transcript::default();
        for (&(_, mask, _), comps) in &self.helpers[i - 1].groups {
            let payload = encode(comps, |c| store.values(c.file, &c.bits))
                .map_err(|(file, bit)| DeliveryError::HelperMissingBits { helper: i, file, bit })?;
            out.push(Message { layer: Layer::Helper(i), segment, subset: mask, slot: None, payload });
        }
        Ok(out)
    }

    /// Helper `i` passes on the prefix of each server message its users need.
    fn forward(&self, i: usize, server: &Transcript, segment: u8) -> Transcript {
        let attached = self.attached_mask(i);
        let mut out = Transcript::default();
        for m in server.messages() {
            let len = self
                .server
                .group(m)
                .iter()
                .filter(|c| attached & (1u64 << c.member) != 0)
                .map(|c| c.bits.len())
                .max()
                .unwrap_or(0);
            if len > 0 {
                out.push(Message { layer: Layer::Helper(i), segment, payload: prefix(&m.payload, len), ..m.clone() });
            }
        }
        out
    }

    /// User `(i, j)` rebuilds its file from its cache and helper `i`'s messages.
    fn decode(&self, lib: &Library, i: usize, j: usize, helper: &[&Message]) -> Result<FixedBitSet, DeliveryError> {
        let user = NodeId::User(i, j);
        let mut store = Store::new(lib, self.alloc, user);
        let (layout, member) = match self.kind {
            Kind::B => (&self.server, (i - 1) * self.k2 + (j - 1)),
            _ => (&self.helpers[i - 1], j - 1),
        };
        for m in helper {
            if m.subset & (1u64 << member) == 0 {
                continue;
            }
            let decoded = peel(&m.payload, layout.group(m), member, &store)
                .map_err(|bit| DeliveryError::DecodeFailure { user, bit: bit as usize })?;
            if let Some((file, bits, values)) = decoded {
                store.learn(file, &bits, &values);
            }
        }
        let d = self.request(i, j);
        let got = store.assemble(d).map_err(|bit| DeliveryError::DecodeFailure { user, bit })?;
        let truth = lib.file(d);
        if let Some(bit) = (0..truth.len()).find(|&b| got.contains(b) != truth.contains(b)) {
            return Err(DeliveryError::DecodeFailure { user, bit });
        }
        Ok(got)
    }
}

/// Either allocation a delivery can run on.
#[derive(Debug, Clone, Copy)]
pub enum Placement<'a> {
    Single(&'a CacheAllocation),
    Hybrid(&'a HybridAllocation),
}

fn check_alloc(
    config: &ValidatedConfig,
    sim: &SimulationConfig,
    alloc: &CacheAllocation,
    file_bits: usize,
) -> Result<(), DeliveryError> {
    if alloc.helper_count() != config.k1()
        || alloc.users_per_helper() != config.k2()
        || alloc.files() != config.files()
        || alloc.file_bits() != file_bits
    {
        return Err(DeliveryError::AllocationMismatch(format!(
            "allocation is {} x {} users, {} files of {} bits; simulation needs {} x {}, {} files of {} bits",
            alloc.helper_count(),
            alloc.users_per_helper(),
            alloc.files(),
            alloc.file_bits(),
            config.k1(),
            config.k2(),
            config.files(),
            sim.file_bits
        )));
    }
    Ok(())
}

/// Per-subsystem plans and library slices of a placement.
struct Prepared<'a> {
    scheme: Scheme,
    parts: Vec<(Plan<'a>, Library, u8)>,
}

fn prepare<'a>(
    config: &ValidatedConfig,
    sim: &'a SimulationConfig,
    placement: Placement<'a>,
    scheme: Scheme,
) -> Result<Prepared<'a>, DeliveryError> {
    sim.check(config)?;
    let lib = Library::generate(config.files(), sim.file_bits, sim.seed);
    let parts = match (scheme, placement) {
        (Scheme::Hybrid(_), Placement::Hybrid(h)) => {
            check_alloc(config, sim, &h.first, h.split)?;
            check_alloc(config, sim, &h.second, sim.file_bits - h.split)?;
            vec![
                (Plan::new(&h.first, &sim.requests, Kind::Sc)?, lib.slice(0, h.split), 0),
                (Plan::new(&h.second, &sim.requests, Kind::B)?, lib.slice(h.split, sim.file_bits), 1),
            ]
        }
        (Scheme::Hybrid(_), Placement::Single(_)) | (_, Placement::Hybrid(_)) => {
            return Err(DeliveryError::AllocationMismatch("hybrid delivery needs a hybrid allocation".into()))
        }
        (s, Placement::Single(a)) => {
            check_alloc(config, sim, a, sim.file_bits)?;
            let kind = match s {
                Scheme::Sc => Kind::Sc,
                Scheme::A => Kind::A,
                _ => Kind::B,
            };
            vec![(Plan::new(a, &sim.requests, kind)?, lib, 0)]
        }
    };
    Ok(Prepared { scheme, parts })
}

impl Prepared<'_> {
    fn decode(&self, helpers: &[Transcript], i: usize, j: usize) -> Result<FixedBitSet, DeliveryError> {
        let mut out = FixedBitSet::new();
        let mut offset = 0;
        for (plan, lib, segment) in &self.parts {
            let msgs: Vec<&Message> = helpers[i - 1].messages().iter().filter(|m| m.segment == *segment).collect();
            let part = plan.decode(lib, i, j, &msgs)?;
            out.grow(offset + plan.alloc.file_bits());
            for b in part.ones() {
                out.insert(offset + b);
            }
            offset += plan.alloc.file_bits();
        }
        Ok(out)
    }

    fn deliver(&self, config: &ValidatedConfig, file_bits: usize) -> Result<DeliveryOutcome, DeliveryError> {
        let mut server = Transcript::default();
        let mut helpers = vec![Transcript::default(); config.k1()];
        for (plan, lib, segment) in &self.parts {
            let (s, h) = plan.run(lib, *segment)?;
            server.extend(s);
            for (acc, t) in helpers.iter_mut().zip(h) {
                acc.extend(t);
            }
        }
        let mut decoded = Vec::with_capacity(config.user_count());
        for i in 1..=config.k1() {
            for j in 1..=config.k2() {
                decoded.push(self.decode(&helpers, i, j)?);
            }
        }
        let f = file_bits as f64;
        let busiest = helpers.iter().map(Transcript::total_bits).max().unwrap_or(0);
        let rates = RatePair::new(server.total_bits() as f64 / f, busiest as f64 / f);
        Ok(DeliveryOutcome { scheme: self.scheme, file_bits, server, helpers, decoded, rates })
    }
}

fn deliver_single(
    config: &ValidatedConfig,
    sim: &SimulationConfig,
    alloc: &CacheAllocation,
    scheme: Scheme,
) -> Result<DeliveryOutcome, DeliveryError> {
    prepare(config, sim, Placement::Single(alloc), scheme)?.deliver(config, sim.file_bits)
}

/// S&C: server messages carry only the bits the destination user lacks.
pub fn deliver_sc(
    config: &ValidatedConfig,
    sim: &SimulationConfig,
    alloc: &CacheAllocation,
) -> Result<DeliveryOutcome, DeliveryError> {
    deliver_single(config, sim, alloc, Scheme::Sc)
}

/// Scheme A: independent coded delivery on each layer.
pub fn deliver_scheme_a(
    config: &ValidatedConfig,
    sim: &SimulationConfig,
    alloc: &CacheAllocation,
) -> Result<DeliveryOutcome, DeliveryError> {
    deliver_single(config, sim, alloc, Scheme::A)
}

/// Scheme B: server codes across all users, helpers forward. Helper caches are unused.
pub fn deliver_scheme_b(
    config: &ValidatedConfig,
    sim: &SimulationConfig,
    alloc: &CacheAllocation,
) -> Result<DeliveryOutcome, DeliveryError> {
    deliver_single(config, sim, alloc, Scheme::B)
}

/// S&C on the first `floor(alpha F)` bits of every file, scheme B on the rest.
pub fn deliver_hybrid(
    config: &ValidatedConfig,
    sim: &SimulationConfig,
    alloc: &HybridAllocation,
) -> Result<DeliveryOutcome, DeliveryError> {
    let scheme = Scheme::Hybrid(alloc.share.into());
    prepare(config, sim, Placement::Hybrid(alloc), scheme)?.deliver(config, sim.file_bits)
}

/// Decode user `(i, j)` from helper `i`'s transcript in `outcome`, its own
/// cache and the placement metadata, and check it against the true file.
pub fn decode_user(
    config: &ValidatedConfig,
    sim: &SimulationConfig,
    placement: Placement<'_>,
    outcome: &DeliveryOutcome,
    i: usize,
    j: usize,
) -> Result<FixedBitSet, DeliveryError> {
    NodeId::User(i, j).check(config)?;
    prepare(config, sim, placement, outcome.scheme)?.decode(&outcome.helpers, i, j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NetworkConfig;
    use crate::placement::{place, place_hybrid};

    fn setup(
        n: usize,
        k1: usize,
        k2: usize,
        m1: f64,
        m2: f64,
        f: usize,
        seed: u64,
    ) -> (ValidatedConfig, SimulationConfig) {
        let c = NetworkConfig::new(n, k1, k2, m1, m2).validate().unwrap();
        let requests = uniform_demands(&c, seed);
        (c, SimulationConfig { file_bits: f, seed, requests })
    }

    fn share(a: f64, b: f64) -> Share {
        Share::new(a, b).unwrap()
    }

    fn check_decoded(c: &ValidatedConfig, sim: &SimulationConfig, out: &DeliveryOutcome) {
        let lib = Library::generate(c.files(), sim.file_bits, sim.seed);
        for (u, got) in out.decoded.iter().enumerate() {
            assert_eq!(got, lib.file(sim.requests[u]), "user {u}");
        }
    }

    #[test]
    fn every_scheme_decodes() {
        for seed in 0..5 {
            let (c, sim) = setup(6, 2, 3, 2.0, 1.5, 512, seed);
            let alloc = place(&c, &sim).unwrap();
            for out in [
                deliver_sc(&c, &sim, &alloc).unwrap(),
                deliver_scheme_a(&c, &sim, &alloc).unwrap(),
                deliver_scheme_b(&c, &sim, &alloc).unwrap(),
                deliver_hybrid(&c, &sim, &place_hybrid(&c, &sim, share(0.5, 0.5)).unwrap()).unwrap(),
            ] {
                check_decoded(&c, &sim, &out);
                for t in std::iter::once(&out.server).chain(&out.helpers) {
                    assert!(t.messages().iter().all(|m| !m.is_empty()));
                    assert_eq!(t.total_bits(), t.messages().iter().map(Message::len).sum::<usize>());
                }
            }
        }
    }

    #[test]
    fn full_helper_memory_empties_the_server_link() {
        let (c, sim) = setup(4, 2, 2, 4.0, 0.0, 400, 3);
        let alloc = place(&c, &sim).unwrap();
        let out = deliver_sc(&c, &sim, &alloc).unwrap();
        assert_eq!(out.server.total_bits(), 0);
        assert_eq!(out.rates.r2, 2.0);
    }

    #[test]
    fn full_user_memory_empties_everything() {
        let (c, sim) = setup(4, 2, 2, 1.0, 4.0, 400, 3);
        let alloc = place(&c, &sim).unwrap();
        for out in [deliver_sc(&c, &sim, &alloc).unwrap(), deliver_scheme_b(&c, &sim, &alloc).unwrap()] {
            assert_eq!(out.rates, RatePair::new(0.0, 0.0));
            assert!(out.helpers.iter().all(|t| t.messages().is_empty()));
        }
    }

    #[test]
    fn scheme_b_without_user_memory_is_unicast() {
        let (c, sim) = setup(4, 2, 2, 2.0, 0.0, 400, 5);
        let alloc = place(&c, &sim).unwrap();
        let out = deliver_scheme_b(&c, &sim, &alloc).unwrap();
        assert_eq!(out.rates, RatePair::new(4.0, 2.0));
    }

    #[test]
    fn no_user_memory_makes_sc_and_a_identical() {
        let (c, sim) = setup(6, 2, 3, 2.0, 0.0, 600, 9);
        let alloc = place(&c, &sim).unwrap();
        let sc = deliver_sc(&c, &sim, &alloc).unwrap();
        let a = deliver_scheme_a(&c, &sim, &alloc).unwrap();
        assert_eq!(sc.server, a.server);
        assert_eq!(sc.helpers, a.helpers);
    }

    #[test]
    fn sc_never_sends_more_than_a() {
        for seed in 0..10 {
            let (c, sim) = setup(6, 2, 3, 1.5, 2.0, 600, seed);
            let alloc = place(&c, &sim).unwrap();
            let sc = deliver_sc(&c, &sim, &alloc).unwrap();
            let a = deliver_scheme_a(&c, &sim, &alloc).unwrap();
            assert!(sc.server.total_bits() < a.server.total_bits());
        }
    }

    fn same_messages(x: &Transcript, y: &Transcript) -> bool {
        x.messages().len() == y.messages().len()
            && x.messages()
                .iter()
                .zip(y.messages())
                .all(|(a, b)| (a.layer, a.subset, a.slot, &a.payload) == (b.layer, b.subset, b.slot, &b.payload))
    }

    #[test]
    fn hybrid_corners_reproduce_base_schemes() {
        let (c, sim) = setup(6, 2, 2, 2.0, 2.0, 600, 4);
        let alloc = place(&c, &sim).unwrap();
        let sc = deliver_sc(&c, &sim, &alloc).unwrap();
        let h = deliver_hybrid(&c, &sim, &place_hybrid(&c, &sim, share(1.0, 1.0)).unwrap()).unwrap();
        assert!(same_messages(&sc.server, &h.server));
        assert!(sc.helpers.iter().zip(&h.helpers).all(|(a, b)| same_messages(a, b)));
        assert_eq!(sc.rates, h.rates);
        let b = deliver_scheme_b(&c, &sim, &alloc).unwrap();
        let h = deliver_hybrid(&c, &sim, &place_hybrid(&c, &sim, share(0.0, 0.0)).unwrap()).unwrap();
        assert!(same_messages(&b.server, &h.server));
        assert_eq!(b.rates, h.rates);
    }

    #[test]
    fn standalone_decode_matches() {
        let (c, sim) = setup(6, 2, 3, 2.0, 2.0, 300, 8);
        let hy = place_hybrid(&c, &sim, share(0.4, 0.7)).unwrap();
        let out = deliver_hybrid(&c, &sim, &hy).unwrap();
        for i in 1..=2 {
            for j in 1..=3 {
                let got = decode_user(&c, &sim, Placement::Hybrid(&hy), &out, i, j).unwrap();
                assert_eq!(got, out.decoded[(i - 1) * 3 + j - 1]);
            }
        }
    }

    #[test]
    fn tampered_transcript_fails_to_decode() {
        let (c, sim) = setup(6, 2, 3, 2.0, 1.0, 300, 8);
        let alloc = place(&c, &sim).unwrap();
        let mut out = deliver_sc(&c, &sim, &alloc).unwrap();
        let m = &mut out.helpers[0].messages[0];
        let user = (0..3).find(|j| m.subset & (1 << j) != 0).unwrap() + 1;
        m.payload.toggle(0);
        let err = decode_user(&c, &sim, Placement::Single(&alloc), &out, 1, user).unwrap_err();
        assert!(matches!(err, DeliveryError::DecodeFailure { user: NodeId::User(1, _), .. }), "{err}");
    }

    #[test]
    fn same_demand_everywhere() {
        let c = NetworkConfig::new(6, 2, 3, 2.0, 2.0).validate().unwrap();
        let sim = SimulationConfig { file_bits: 300, seed: 1, requests: vec![4; 6] };
        let alloc = place(&c, &sim).unwrap();
        let out = deliver_sc(&c, &sim, &alloc).unwrap();
        check_decoded(&c, &sim, &out);
    }

    #[test]
    fn mismatched_allocation_is_rejected() {
        let (c, sim) = setup(6, 2, 3, 2.0, 2.0, 300, 1);
        let alloc = place(&c, &sim).unwrap();
        let bigger = SimulationConfig { file_bits: 400, ..sim.clone() };
        assert!(matches!(deliver_sc(&c, &bigger, &alloc), Err(DeliveryError::AllocationMismatch(_))));
    }

    #[test]
    fn dump_lists_every_message() {
        let (c, sim) = setup(4, 2, 2, 1.0, 1.0, 64, 2);
        let alloc = place(&c, &sim).unwrap();
        let out = deliver_sc(&c, &sim, &alloc).unwrap();
        let dump = out.server.dump(false);
        assert_eq!(dump.lines().count(), out.server.messages().len() + 1);
        let full = out.server.dump(true);
        assert!(full.lines().skip(1).all(|l| l.split(',').count() == 6));
    }
}
