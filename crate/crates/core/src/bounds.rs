//! Cut-set lower bounds, closed-form upper envelopes and regime classification.
//!
//! The upper envelope is built from a handful of memory-sharing tuples per
//! regime; the hybrid rate at the best tuple must lie under the envelope,
//! which is checked on every evaluation.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{RatePair, ValidatedConfig};
use crate::rates::{rate_hybrid, Share};

/// Absolute slack used by the envelope assertion.
pub const ENVELOPE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundsError {
    #[error("hybrid rates ({achieved_r1}, {achieved_r2}) at the chosen tuple exceed the envelope ({r1_ub}, {r2_ub})")]
    EnvelopeViolation { achieved_r1: f64, achieved_r2: f64, r1_ub: f64, r2_ub: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Regime {
    /// `M1 + K2 M2 < N`.
    I,
    /// `M1 + K2 M2 >= N`.
    II,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SubRegime {
    /// `M1 < N/2`.
    I,
    /// `M1 >= N/2`.
    II,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Case {
    A,
    B,
    C,
    D,
    E,
    F,
    G,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RegimeLabel {
    pub regime: Regime,
    pub subregime: SubRegime,
    pub case: Case,
}

impl RegimeLabel {
    pub fn new(regime: Regime, subregime: SubRegime, case: Case) -> Self {
        Self { regime, subregime, case }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::I => "I",
            Regime::II => "II",
        })
    }
}

impl fmt::Display for SubRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SubRegime::I => "I",
            SubRegime::II => "II",
        })
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl fmt::Display for RegimeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.regime, self.subregime, self.case)
    }
}

/// One cut-set term `s1 s2 (N - s1 M1 - s1 s2 M2) / (N + s1 s2)`.
pub fn r1_cut(config: &ValidatedConfig, s1: usize, s2: usize) -> f64 {
    let (s1, s2) = (s1 as f64, s2 as f64);
    let n = config.n();
    s1 * s2 * (n - s1 * config.m1() - s1 * s2 * config.m2()) / (n + s1 * s2)
}

/// One cut-set term `t (N - t M2) / (N + t)`.
pub fn r2_cut(config: &ValidatedConfig, t: usize) -> f64 {
    let t = t as f64;
    let n = config.n();
    t * (n - t * config.m2()) / (n + t)
}

/// Lower bound on the server rate, with the maximizing `(s1, s2)`.
///
/// The scan keeps the first maximizer in `(s1, s2)` lexicographic order. A
/// negative maximum is floored at 0; the witness is still the maximizer.
pub fn lower_bound_r1(config: &ValidatedConfig) -> (f64, usize, usize) {
    let mut best = (f64::NEG_INFINITY, 1, 1);
    for s1 in 1..=config.k1() {
        for s2 in 1..=config.k2() {
            let v = r1_cut(config, s1, s2);
            if v > best.0 {
                best = (v, s1, s2);
            }
        }
    }
    (best.0.max(0.0), best.1, best.2)
}

/// Lower bound on the helper rate, with the maximizing `t`.
pub fn lower_bound_r2(config: &ValidatedConfig) -> (f64, usize) {
    let mut best = (f64::NEG_INFINITY, 1);
    for t in 1..=config.k2() {
        let v = r2_cut(config, t);
        if v > best.0 {
            best = (v, t);
        }
    }
    (best.0.max(0.0), best.1)
}

/// Comparisons treat values within `1e-12 N` as equal.
#[derive(Clone, Copy)]
struct Cmp {
    eps: f64,
}

impl Cmp {
    fn new(config: &ValidatedConfig) -> Self {
        Self { eps: 1e-12 * config.n() }
    }

    fn lt(self, x: f64, t: f64) -> bool {
        x < t - self.eps
    }

    fn ge(self, x: f64, t: f64) -> bool {
        !self.lt(x, t)
    }

    fn le(self, x: f64, t: f64) -> bool {
        x <= t + self.eps
    }

    fn within(self, x: f64, lo: f64, hi: f64) -> bool {
        self.ge(x, lo) && self.le(x, hi)
    }
}

pub fn regime(config: &ValidatedConfig) -> Regime {
    let c = Cmp::new(config);
    if c.ge(config.m1() + config.k2() as f64 * config.m2(), config.n()) {
        Regime::II
    } else {
        Regime::I
    }
}

/// The unique case label. Shared boundaries go to the later regime,
/// sub-regime and case.
pub fn classify(config: &ValidatedConfig) -> RegimeLabel {
    let c = Cmp::new(config);
    let (n, m1, m2) = (config.n(), config.m1(), config.m2());
    let (k1, k2) = (config.k1() as f64, config.k2() as f64);
    let regime = regime(config);
    let sub = if c.ge(m1, n / 2.0) { SubRegime::II } else { SubRegime::I };
    let pick = |threshold: f64, below: Case, above: Case| if c.ge(m2, threshold) { above } else { below };
    let case = match (regime, sub) {
        (Regime::I, SubRegime::I) => {
            if c.lt(m1, n / (2.0 * k1)) {
                if c.ge(m2, n / (2.0 * k2)) {
                    Case::C
                } else {
                    pick(n / (k1 * k2), Case::A, Case::B)
                }
            } else if c.lt(m1, n / 4.0) {
                pick(n / (4.0 * k2), Case::D, Case::E)
            } else {
                pick((n - m1) / (2.0 * k2), Case::F, Case::G)
            }
        }
        (Regime::I, SubRegime::II) => pick((n - m1) / (2.0 * k2), Case::A, Case::B),
        (Regime::II, SubRegime::I) => {
            if c.lt(m1, n / (2.0 * k1)) {
                pick(n / 2.0, Case::A, Case::B)
            } else if c.lt(m1, n / 4.0) {
                pick(n / 2.0, Case::C, Case::D)
            } else {
                pick((n - m1) / 2.0, Case::E, Case::F)
            }
        }
        (Regime::II, SubRegime::II) => pick((n - m1) / 2.0, Case::A, Case::B),
    };
    RegimeLabel::new(regime, sub, case)
}

/// Every case whose closed range contains the point. More than one entry
/// means the point sits on a boundary between cases.
pub fn matching_cases(config: &ValidatedConfig) -> Vec<RegimeLabel> {
    let c = Cmp::new(config);
    let (n, m1, m2) = (config.n(), config.m1(), config.m2());
    let (k1, k2) = (config.k1() as f64, config.k2() as f64);
    let load = m1 + k2 * m2;
    let mut out = vec![];
    let mut add = |ok: bool, r, s, case| {
        if ok {
            out.push(RegimeLabel::new(r, s, case));
        }
    };
    let band1 = c.le(m1, n / (2.0 * k1));
    let band2 = c.within(m1, n / (2.0 * k1), n / 4.0);
    let band3 = c.within(m1, n / 4.0, n / 2.0);
    let upper = c.within(m1, n / 2.0, n);
    let free = (n - m1) / k2;

    if c.le(load, n) {
        use {Case::*, Regime::I as R, SubRegime::I as S1, SubRegime::II as S2};
        add(band1 && c.le(m2, n / (k1 * k2)), R, S1, A);
        add(band1 && c.within(m2, n / (k1 * k2), n / (2.0 * k2)), R, S1, B);
        add(band1 && c.within(m2, n / (2.0 * k2), n / 2.0), R, S1, C);
        add(band2 && c.le(m2, n / (4.0 * k2)), R, S1, D);
        add(band2 && c.within(m2, n / (4.0 * k2), n / 2.0), R, S1, E);
        add(band3 && c.le(m2, free / 2.0), R, S1, F);
        add(band3 && c.within(m2, free / 2.0, free), R, S1, G);
        add(upper && c.le(m2, free / 2.0), R, S2, A);
        add(upper && c.within(m2, free / 2.0, free), R, S2, B);
    }
    if c.ge(load, n) {
        use {Case::*, Regime::II as R, SubRegime::I as S1, SubRegime::II as S2};
        add(band1 && c.within(m2, n / (2.0 * k2), n / 2.0), R, S1, A);
        add(band1 && c.within(m2, n / 2.0, n), R, S1, B);
        add(band2 && c.within(m2, n / (4.0 * k2), n / 2.0), R, S1, C);
        add(band2 && c.within(m2, n / 2.0, n), R, S1, D);
        add(band3 && c.within(m2, free, (n - m1) / 2.0), R, S1, E);
        add(band3 && c.within(m2, (n - m1) / 2.0, n), R, S1, F);
        add(upper && c.within(m2, free, (n - m1) / 2.0), R, S2, A);
        add(upper && c.within(m2, (n - m1) / 2.0, n), R, S2, B);
    }
    out
}

/// `num / den` with `0 / 0 = 0` and `x / 0 = inf` for `x > 0`.
fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else if den == 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

/// Candidate `(alpha, beta)` tuples of the regime, in listing order.
pub fn candidate_tuples(config: &ValidatedConfig) -> Vec<Share> {
    let n = config.n();
    let (m1, m2) = (config.m1(), config.m2());
    let k2 = config.k2() as f64;
    let raw = match regime(config) {
        // 0/0 at M1 = M2 = 0 is taken as alpha = 0.
        Regime::I => vec![(m1 / n, m1 / n), (ratio(m1, m1 + k2 * m2), 0.0), (1.0, 1.0)],
        Regime::II => vec![(m1 / n, m1 / n), (m1 / n, 0.5)],
    };
    raw.into_iter().map(|(a, b)| Share::new(a.clamp(0.0, 1.0), b).expect("tuple inside the unit square")).collect()
}

/// Closed-form envelope `(r1_ub, r2_ub)` of the regime.
pub fn envelope(config: &ValidatedConfig) -> RatePair {
    let n = config.n();
    let (m1, m2) = (config.m1(), config.m2());
    let (k1, k2) = (config.k1() as f64, config.k2() as f64);
    let users = ratio(n - m2, m2);
    let r2_base = k2.min(ratio(n, m2));
    match regime(config) {
        Regime::I => {
            let r1 = (k1 * k2).min(users).min(ratio(n * k2, m1 + m2 * k2)).min(ratio(k2 * (n - m1), m1));
            RatePair::new(r1, r2_base)
        }
        Regime::II => {
            let r1 = (k1 * k2).min(users).min(ratio(2.0 * (n - m1) * (n - m1), n * m2));
            RatePair::new(r1, 2.0 * r2_base)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundSet {
    pub r1_lb: f64,
    pub r2_lb: f64,
    pub r1_ub: f64,
    pub r2_ub: f64,
    /// The tuple `(alpha*, beta*)` minimizing the hybrid server rate.
    pub chosen: Share,
    /// 0-based position of `chosen` among [`candidate_tuples`].
    pub tuple_index: usize,
    /// Hybrid rates at `chosen`.
    pub achieved: RatePair,
    pub s1: usize,
    pub s2: usize,
    pub t: usize,
    /// `envelope - achieved`, per link.
    pub envelope_slack: RatePair,
}

impl BoundSet {
    pub fn envelope_ok(&self) -> bool {
        self.envelope_slack.r1 >= -ENVELOPE_TOLERANCE && self.envelope_slack.r2 >= -ENVELOPE_TOLERANCE
    }
}

/// All bounds at a point, without failing on an envelope violation.
pub fn compute_bounds(config: &ValidatedConfig) -> BoundSet {
    let (r1_lb, s1, s2) = lower_bound_r1(config);
    let (r2_lb, t) = lower_bound_r2(config);
    let mut best: Option<(usize, Share, RatePair)> = None;
    for (k, share) in candidate_tuples(config).into_iter().enumerate() {
        let r = rate_hybrid(config, share);
        if best.is_none_or(|(_, _, b)| r.r1 < b.r1) {
            best = Some((k, share, r));
        }
    }
    let (tuple_index, chosen, achieved) = best.expect("at least one tuple");
    let env = envelope(config);
    BoundSet {
        r1_lb,
        r2_lb,
        r1_ub: env.r1,
        r2_ub: env.r2,
        chosen,
        tuple_index,
        achieved,
        s1,
        s2,
        t,
        envelope_slack: RatePair::new(env.r1 - achieved.r1, env.r2 - achieved.r2),
    }
}

/// [`compute_bounds`], failing if the chosen tuple escapes the envelope.
pub fn upper_bounds(config: &ValidatedConfig) -> Result<BoundSet, BoundsError> {
    let b = compute_bounds(config);
    if b.envelope_ok() {
        Ok(b)
    } else {
        Err(BoundsError::EnvelopeViolation {
            achieved_r1: b.achieved.r1,
            achieved_r2: b.achieved.r2,
            r1_ub: b.r1_ub,
            r2_ub: b.r2_ub,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NetworkConfig;
    use approx::assert_abs_diff_eq;

    fn cfg(n: usize, k1: usize, k2: usize, m1: f64, m2: f64) -> ValidatedConfig {
        NetworkConfig::new(n, k1, k2, m1, m2).validate().unwrap()
    }

    #[test]
    fn fig3_bounds() {
        let c = cfg(50, 10, 2, 10.0, 20.0);
        assert_eq!(lower_bound_r1(&c), (20.0 / 51.0, 1, 1));
        assert_eq!(lower_bound_r2(&c), (30.0 / 51.0, 1));
        let b = upper_bounds(&c).unwrap();
        assert_abs_diff_eq!(b.r1_ub, 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(b.r2_ub, 4.0, epsilon = 1e-12);
        assert_eq!(classify(&c), RegimeLabel::new(Regime::II, SubRegime::I, Case::C));
    }

    #[test]
    fn lower_bound_corners() {
        let c = cfg(50, 10, 2, 50.0, 3.0);
        assert_eq!(lower_bound_r1(&c).0, 0.0);
        let c = cfg(20, 3, 4, 0.0, 0.0);
        let (v, s1, s2) = lower_bound_r1(&c);
        assert_eq!((s1, s2), (3, 4));
        assert_abs_diff_eq!(v, 12.0 * 20.0 / 32.0, epsilon = 1e-12);
        assert_eq!(lower_bound_r2(&c), (4.0 * 20.0 / 24.0, 4));
        assert_eq!(lower_bound_r2(&cfg(20, 3, 4, 0.0, 20.0)).0, 0.0);
    }

    #[test]
    fn regime_one_envelope() {
        let c = cfg(50, 10, 2, 5.0, 5.0);
        assert_eq!(regime(&c), Regime::I);
        assert_abs_diff_eq!(envelope(&c).r1, 100.0 / 15.0, epsilon = 1e-12);
        assert!(upper_bounds(&c).is_ok());
    }

    #[test]
    fn half_library_user_memory_term_is_one() {
        let c = cfg(40, 2, 2, 0.0, 20.0);
        let n = c.n();
        assert_eq!(ratio(n - 20.0, 20.0), 1.0);
        assert!(envelope(&c).r1 <= 1.0);
    }

    #[test]
    fn classification_examples() {
        assert_eq!(classify(&cfg(20, 2, 2, 0.0, 0.0)), RegimeLabel::new(Regime::I, SubRegime::I, Case::A));
        assert_eq!(classify(&cfg(20, 2, 2, 20.0, 20.0)), RegimeLabel::new(Regime::II, SubRegime::II, Case::B));
        // M1 + K2 M2 = N exactly goes to Regime II.
        assert_eq!(regime(&cfg(20, 2, 2, 10.0, 5.0)), Regime::II);
    }

    #[test]
    fn classification_is_total_and_consistent() {
        for (n, k1, k2) in [(20, 2, 2), (36, 3, 3), (50, 10, 2), (64, 4, 4)] {
            for a in 0..=100 {
                for b in 0..=100 {
                    let c = cfg(n, k1, k2, a as f64 * n as f64 / 100.0, b as f64 * n as f64 / 100.0);
                    let label = classify(&c);
                    let all = matching_cases(&c);
                    assert!(all.contains(&label), "{label} not in {all:?} at {:?}", c.config());
                }
            }
        }
    }

    #[test]
    fn degenerate_tuples() {
        let c = cfg(20, 2, 2, 0.0, 0.0);
        let t = candidate_tuples(&c);
        assert_eq!((t[1].alpha(), t[1].beta()), (0.0, 0.0));
        let b = upper_bounds(&c).unwrap();
        assert_eq!(b.r1_ub, 4.0);
        let c = cfg(20, 2, 2, 20.0, 0.0);
        let b = upper_bounds(&c).unwrap();
        assert_eq!(b.r1_ub, 0.0);
        assert_eq!(b.achieved.r1, 0.0);
    }

    #[test]
    fn ties_keep_the_first_tuple() {
        // M2 = N makes every tuple's server rate zero.
        let c = cfg(20, 2, 2, 4.0, 20.0);
        assert_eq!(compute_bounds(&c).tuple_index, 0);
    }
}
