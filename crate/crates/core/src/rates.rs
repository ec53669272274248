//! Closed-form normalized rates of every scheme.
//!
//! All expressions are built from one block, the decentralized single-layer
//! rate `(1 - m/n) (n/m) (1 - (1 - m/n)^k)` of [`mau_rate`]. Memory-sharing
//! schemes evaluate it on sub-libraries of size `alpha * N` and
//! `(1 - alpha) * N`; degenerate sub-libraries and memories are resolved by
//! their limits rather than by perturbation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{RatePair, ValidatedConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RateError {
    #[error("rate formula domain error: {0}")]
    DomainError(String),
    #[error("memory-sharing factors must lie in [0, 1], got alpha = {alpha}, beta = {beta}")]
    InvalidShare { alpha: f64, beta: f64 },
}

/// Memory-sharing factors: `alpha` splits every file, `beta` splits user memory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Share {
    alpha: f64,
    beta: f64,
}

impl Share {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, RateError> {
        if (0.0..=1.0).contains(&alpha) && (0.0..=1.0).contains(&beta) {
            Ok(Self { alpha, beta })
        } else {
            Err(RateError::InvalidShare { alpha, beta })
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SchemeId {
    /// Storage-correlation-aware scheme (user-cache splitting on the first layer).
    Sc,
    /// Independent single-layer delivery on each layer.
    A,
    /// Server-to-user coding with helpers as forwarders.
    B,
    /// Memory sharing between `Sc` and `B`.
    Hybrid(Share),
    /// Memory sharing between `A` and `B`.
    Generalized(Share),
}

/// Rate block without domain checks; callers guarantee `k >= 1`.
///
/// Limits: `n <= 0` (empty library) gives 0, `m <= 0` gives `k`, `m >= n` gives 0.
pub(crate) fn mau(m: f64, n: f64, k: usize) -> f64 {
    if n <= 0.0 || m >= n {
        return 0.0;
    }
    if m <= 0.0 {
        return k as f64;
    }
    let x = m / n;
    // (1 - (1 - x)^k) / x without cancellation for small x.
    let coded = -f64::exp_m1(k as f64 * f64::ln_1p(-x)) / x;
    (1.0 - x) * coded
}

/// `(1 - m/n) (n/m) (1 - (1 - m/n)^k)` with its limits at `m = 0` and `m = n`.
pub fn mau_rate(m: f64, n: f64, k: usize) -> Result<f64, RateError> {
    if n.is_nan() || n <= 0.0 || !(0.0..=n).contains(&m) || k == 0 {
        return Err(RateError::DomainError(format!("m = {m}, n = {n}, k = {k}")));
    }
    Ok(mau(m, n, k))
}

/// Storage-correlation-aware scheme rates.
pub fn rate_sc(config: &ValidatedConfig) -> RatePair {
    let k2 = config.k2() as f64;
    let first = k2 * mau(config.m1(), config.n(), config.k1()) * (1.0 - config.m2() / config.n());
    RatePair::new(first, second_layer(config))
}

/// Scheme A: single-layer delivery on each layer independently.
pub fn rate_scheme_a(config: &ValidatedConfig) -> RatePair {
    let k2 = config.k2() as f64;
    RatePair::new(k2 * mau(config.m1(), config.n(), config.k1()), second_layer(config))
}

fn second_layer(config: &ValidatedConfig) -> f64 {
    mau(config.m2(), config.n(), config.k2())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SchemeBRates {
    /// Rates with the server-to-user coded delivery, `r1 = mau(M2, N, K1 K2)`.
    pub rates: RatePair,
    /// First-layer expression as literally printed for scheme B, which
    /// coincides with scheme A's and ignores the user memory.
    pub printed_r1: f64,
}

/// Scheme B: helpers ignore their caches and forward server-to-user messages.
pub fn rate_scheme_b(config: &ValidatedConfig) -> SchemeBRates {
    let r1 = mau(config.m2(), config.n(), config.user_count());
    SchemeBRates { rates: RatePair::new(r1, second_layer(config)), printed_r1: rate_scheme_a(config).r1 }
}

struct SharedTerms {
    /// First-layer contribution of subsystem 1 without user-cache splitting.
    first_plain: f64,
    /// Fraction of subsystem-1 bits not held by the requesting user, clamped to [0, 1].
    user_miss: f64,
    /// First-layer contribution of subsystem 2.
    first_second: f64,
    r2: f64,
}

fn shared_terms(config: &ValidatedConfig, share: Share) -> SharedTerms {
    let (a, b) = (share.alpha, share.beta);
    let n = config.n();
    let (m1, m2) = (config.m1(), config.m2());
    let (k1, k2) = (config.k1(), config.k2());
    let n1 = a * n;
    let n2 = (1.0 - a) * n;
    let first_plain = a * k2 as f64 * mau(m1, n1, k1);
    let user_miss = if n1 > 0.0 { (1.0 - b * m2 / n1).clamp(0.0, 1.0) } else { 1.0 };
    let first_second = (1.0 - a) * mau((1.0 - b) * m2, n2, k1 * k2);
    let r2 = a * mau(b * m2, n1, k2) + (1.0 - a) * mau((1.0 - b) * m2, n2, k2);
    SharedTerms { first_plain, user_miss, first_second, r2 }
}

/// Hybrid scheme: `Sc` on an `alpha` share of every file with the whole helper
/// memory and a `beta` share of user memory, scheme B on the rest.
pub fn rate_hybrid(config: &ValidatedConfig, share: Share) -> RatePair {
    let t = shared_terms(config, share);
    RatePair::new(t.first_plain * t.user_miss + t.first_second, t.r2)
}

/// Memory sharing between schemes A and B (no user-cache splitting).
pub fn rate_generalized(config: &ValidatedConfig, share: Share) -> RatePair {
    let t = shared_terms(config, share);
    RatePair::new(t.first_plain + t.first_second, t.r2)
}

pub fn rate(config: &ValidatedConfig, scheme: SchemeId) -> RatePair {
    match scheme {
        SchemeId::Sc => rate_sc(config),
        SchemeId::A => rate_scheme_a(config),
        SchemeId::B => rate_scheme_b(config).rates,
        SchemeId::Hybrid(s) => rate_hybrid(config, s),
        SchemeId::Generalized(s) => rate_generalized(config, s),
    }
}
