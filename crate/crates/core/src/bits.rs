//! Bit-string helpers on top of [`FixedBitSet`].
//!
//! Payloads are plain `FixedBitSet`s whose `len()` is the payload length in
//! bits. XOR of payloads of unequal length zero-pads the shorter operand.

use fixedbitset::FixedBitSet;
use rand::RngCore;

/// Uniformly random bit string of `len` bits.
pub fn random_bits<R: RngCore>(rng: &mut R, len: usize) -> FixedBitSet {
    let mut out = FixedBitSet::with_capacity(len);
    let mut word = 0u64;
    for b in 0..len {
        if b % 64 == 0 {
            word = rng.next_u64();
        }
        if (word >> (b % 64)) & 1 == 1 {
            out.insert(b);
        }
    }
    out
}

/// The values of `source` at `indices`, packed in order into a new string.
pub fn gather(source: &FixedBitSet, indices: &[u32]) -> FixedBitSet {
    let mut out = FixedBitSet::with_capacity(indices.len());
    for (k, &b) in indices.iter().enumerate() {
        if source.contains(b as usize) {
            out.insert(k);
        }
    }
    out
}

/// `acc ^= other`, growing `acc` to the longer length (zero padding).
pub fn xor_padded(acc: &mut FixedBitSet, other: &FixedBitSet) {
    if other.len() > acc.len() {
        acc.grow(other.len());
    }
    acc.symmetric_difference_with(other);
}

/// First `len` bits of `bits` (zero-extended if `bits` is shorter).
pub fn prefix(bits: &FixedBitSet, len: usize) -> FixedBitSet {
    let mut out = FixedBitSet::with_capacity(len);
    for b in bits.ones().take_while(|&b| b < len) {
        out.insert(b);
    }
    out
}
