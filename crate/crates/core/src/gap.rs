//! Order-optimality checks at single points and over memory grids.
//!
//! Every point is checked against the global inequalities
//! `r1_lb >= r1_ub / 48 - 4` and `r2_lb >= r2_ub / 20 - 4` (plus the weaker
//! `r2_lb >= r2_ub / 48 - 4`), and against the sharper per-case inequality
//! `lb >= c_mult * ub - c_add` of its case. Points on a case boundary are
//! checked against every adjacent case, but only the global inequalities
//! decide whether they pass.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::bounds::{
    classify, compute_bounds, matching_cases, r1_cut, r2_cut, BoundSet, Case, Regime, RegimeLabel, SubRegime,
};
use crate::model::{NetworkConfig, ValidatedConfig};

/// Absolute slack absorbed by every pass/fail decision.
pub const SLACK_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GapError {
    #[error("the gap analysis needs N >= K1 K2, got N = {n}, K1 K2 = {users}")]
    NotGapEligible { n: usize, users: usize },
}

/// `lb >= c_mult * ub - c_add`, with its slack `lb - (c_mult * ub - c_add)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Inequality {
    pub c_mult: f64,
    pub c_add: f64,
    pub slack: f64,
    pub pass: bool,
}

impl Inequality {
    pub fn evaluate(lb: f64, ub: f64, c_mult: f64, c_add: f64) -> Self {
        let slack = lb - (c_mult * ub - c_add);
        Self { c_mult, c_add, slack, pass: slack >= -SLACK_TOLERANCE }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CaseCheck {
    pub label: RegimeLabel,
    pub check: Inequality,
}

/// Which half of the helper-rate analysis applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum R2Case {
    /// `M2 < N/2`.
    A,
    /// `M2 >= N/2`.
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct R2CaseCheck {
    pub case: R2Case,
    pub check: Inequality,
}

/// The fixed lower-bound argument the case analysis plugs in, compared with the scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Witness {
    pub s1: i64,
    pub s2: i64,
    /// Whether `1 <= s1 <= K1` and `1 <= s2 <= K2`.
    pub in_range: bool,
    /// The cut-set term at the witness (only meaningful when in range).
    pub value: Option<f64>,
    /// The scan maximum is at least the witness value.
    pub dominated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct R2Witness {
    pub t: i64,
    pub in_range: bool,
    pub value: Option<f64>,
    pub dominated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    pub config: NetworkConfig,
    pub label: RegimeLabel,
    /// True when more than one case range contains the point.
    pub boundary: bool,
    pub bounds: BoundSet,
    pub theorem_r1: Inequality,
    /// Helper-rate check with the constant `1/20`.
    pub theorem_r2: Inequality,
    /// Helper-rate check with the weaker constant `1/48`.
    pub theorem_r2_weak: Inequality,
    /// One entry per matching case; a single entry on interior points.
    pub case_r1: Vec<CaseCheck>,
    pub case_r2: Vec<R2CaseCheck>,
    pub witness_r1: Option<Witness>,
    pub witness_r2: Option<R2Witness>,
    pub pass: bool,
}

impl GapReport {
    pub fn theorem_pass(&self) -> bool {
        self.theorem_r1.pass && self.theorem_r2.pass && self.theorem_r2_weak.pass
    }

    pub fn case_r1_pass(&self) -> bool {
        self.case_r1.iter().all(|c| c.check.pass)
    }

    pub fn case_r2_pass(&self) -> bool {
        self.case_r2.iter().all(|c| c.check.pass)
    }

    pub fn r2_boundary(&self) -> bool {
        self.case_r2.len() > 1
    }

    fn min_case_r1_slack(&self) -> f64 {
        self.case_r1.iter().map(|c| c.check.slack).fold(f64::INFINITY, f64::min)
    }

    fn min_case_r2_slack(&self) -> f64 {
        self.case_r2.iter().map(|c| c.check.slack).fold(f64::INFINITY, f64::min)
    }

    pub const CSV_HEADER: &'static str = "m1,m2,regime,subregime,case,boundary,alpha_star,beta_star,\
r1_lb,r1_ub,r2_lb,r2_ub,r1_achieved,r2_achieved,slack_theorem_r1,slack_theorem_r2,slack_theorem_r2_weak,\
slack_case_r1,slack_case_r2,pass_theorem_r1,pass_theorem_r2,pass_case_r1,pass_case_r2,envelope_ok,pass";

    pub fn csv_row(&self) -> String {
        let b = &self.bounds;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.config.helper_memory,
            self.config.user_memory,
            self.label.regime,
            self.label.subregime,
            self.label.case,
            self.boundary,
            b.chosen.alpha(),
            b.chosen.beta(),
            b.r1_lb,
            b.r1_ub,
            b.r2_lb,
            b.r2_ub,
            b.achieved.r1,
            b.achieved.r2,
            self.theorem_r1.slack,
            self.theorem_r2.slack,
            self.theorem_r2_weak.slack,
            self.min_case_r1_slack(),
            self.min_case_r2_slack(),
            self.theorem_r1.pass,
            self.theorem_r2.pass,
            self.case_r1_pass(),
            self.case_r2_pass(),
            b.envelope_ok(),
            self.pass,
        )
    }
}

/// `(c_mult, c_add)` of the server-rate inequality proved for each case.
pub fn case_constants(label: RegimeLabel) -> (f64, f64) {
    use {Case::*, Regime as R, SubRegime as S};
    match (label.regime, label.subregime, label.case) {
        (R::I, S::I, A | B | C) => (1.0 / 24.0, 0.0),
        (R::I, S::I, D) => (1.0 / 16.0, 0.0),
        (R::I, S::I, E | G) => (1.0 / 48.0, 0.0),
        (R::I, S::I, F) => (1.0 / 12.0, 0.0),
        (R::I, S::II, A) => (1.0 / 6.0, 0.0),
        (R::I, S::II, B) => (1.0 / 24.0, 0.0),
        (R::II, S::I, A) => (1.0 / 24.0, 0.0),
        (R::II, S::I, B | D) => (1.0, 1.0),
        (R::II, S::I, C) => (1.0 / 48.0, 0.0),
        (R::II, S::I, E) => (1.0 / 20.0, 0.0),
        (R::II, S::I, F) => (1.0, 4.0),
        (R::II, S::II, A) => (1.0 / 20.0, 0.0),
        (R::II, S::II, B) => (1.0, 4.0),
        _ => unreachable!("no such case {label}"),
    }
}

pub fn r2_constants(case: R2Case) -> (f64, f64) {
    match case {
        R2Case::A => (1.0 / 20.0, 0.0),
        R2Case::B => (1.0, 4.0),
    }
}

fn floor(x: f64) -> i64 {
    if x.is_finite() {
        x.floor() as i64
    } else {
        i64::MAX
    }
}

/// The `(s1, s2)` the case analysis evaluates, or `None` for cases argued
/// without a cut-set witness.
pub fn case_witness(config: &ValidatedConfig, label: RegimeLabel) -> Option<(i64, i64)> {
    use {Case::*, Regime as R, SubRegime as S};
    let (n, m1, m2) = (config.n(), config.m1(), config.m2());
    let (k1, k2) = (config.k1() as i64, config.k2() as i64);
    let k2f = k2 as f64;
    let split = || {
        if m1 >= m2 {
            (floor(n / (4.0 * m1)), floor(m1 / m2))
        } else {
            (floor(n / (4.0 * m2)), 1)
        }
    };
    let w = match (label.regime, label.subregime, label.case) {
        (R::I, S::I, A) => (k1 / 2, k2),
        (R::I, S::I, B) => (floor(n / (2.0 * m2 * k2f)), k2),
        (R::I, S::I, C) => (1, floor(n / (2.0 * m2))),
        (R::I, S::I, D) => (floor(n / (2.0 * (m1 + m2 * k2f))), k2),
        (R::I, S::I, E) => split(),
        (R::I, S::I, F) => (1, k2),
        (R::I, S::I, G) => (1, floor((n - m1) / (2.0 * m2))),
        (R::I, S::II, A) => (1, k2),
        (R::I, S::II, B) => (1, floor((n - m1) / (2.0 * m2))),
        (R::II, S::I, A) => (1, floor(n / (2.0 * m2))),
        (R::II, S::I, C) => split(),
        (R::II, S::I, E) => (1, floor((n - m1) / (2.0 * m2))),
        (R::II, S::II, A) => (1, floor((n - m1) / (2.0 * m2))),
        _ => return None,
    };
    Some(w)
}

fn witness_r1(config: &ValidatedConfig, bounds: &BoundSet, label: RegimeLabel) -> Option<Witness> {
    let (s1, s2) = case_witness(config, label)?;
    let in_range = (1..=config.k1() as i64).contains(&s1) && (1..=config.k2() as i64).contains(&s2);
    let value = in_range.then(|| r1_cut(config, s1 as usize, s2 as usize));
    let dominated = value.is_none_or(|v| bounds.r1_lb >= v);
    Some(Witness { s1, s2, in_range, value, dominated })
}

fn witness_r2(config: &ValidatedConfig, bounds: &BoundSet, case: R2Case) -> Option<R2Witness> {
    if case != R2Case::A {
        return None;
    }
    let t = floor(ratio_or_inf(config.n(), config.m2()).min(config.k2() as f64) / 2.0);
    let in_range = (1..=config.k2() as i64).contains(&t);
    let value = in_range.then(|| r2_cut(config, t as usize));
    let dominated = value.is_none_or(|v| bounds.r2_lb >= v);
    Some(R2Witness { t, in_range, value, dominated })
}

fn ratio_or_inf(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

fn r2_cases(config: &ValidatedConfig) -> (R2Case, Vec<R2Case>) {
    let (n, m2) = (config.n(), config.m2());
    let eps = 1e-12 * n;
    let primary = if m2 < n / 2.0 - eps { R2Case::A } else { R2Case::B };
    let mut all = vec![];
    if m2 <= n / 2.0 + eps {
        all.push(R2Case::A);
    }
    if m2 >= n / 2.0 - eps {
        all.push(R2Case::B);
    }
    (primary, all)
}

pub fn check_point(config: &ValidatedConfig) -> Result<GapReport, GapError> {
    if !config.gap_eligible() {
        return Err(GapError::NotGapEligible { n: config.files(), users: config.user_count() });
    }
    let bounds = compute_bounds(config);
    let label = classify(config);
    let matches = matching_cases(config);
    let boundary = matches.len() > 1;

    let theorem_r1 = Inequality::evaluate(bounds.r1_lb, bounds.r1_ub, 1.0 / 48.0, 4.0);
    let theorem_r2 = Inequality::evaluate(bounds.r2_lb, bounds.r2_ub, 1.0 / 20.0, 4.0);
    let theorem_r2_weak = Inequality::evaluate(bounds.r2_lb, bounds.r2_ub, 1.0 / 48.0, 4.0);

    let case_r1 = matches
        .iter()
        .map(|&l| {
            let (m, a) = case_constants(l);
            CaseCheck { label: l, check: Inequality::evaluate(bounds.r1_lb, bounds.r1_ub, m, a) }
        })
        .collect::<Vec<_>>();
    let (r2_primary, r2_all) = r2_cases(config);
    let case_r2 = r2_all
        .iter()
        .map(|&c| {
            let (m, a) = r2_constants(c);
            R2CaseCheck { case: c, check: Inequality::evaluate(bounds.r2_lb, bounds.r2_ub, m, a) }
        })
        .collect::<Vec<_>>();

    let mut report = GapReport {
        config: config.config(),
        label,
        boundary,
        witness_r1: witness_r1(config, &bounds, label),
        witness_r2: witness_r2(config, &bounds, r2_primary),
        bounds,
        theorem_r1,
        theorem_r2,
        theorem_r2_weak,
        case_r1,
        case_r2,
        pass: false,
    };
    report.pass = report.theorem_pass()
        && report.bounds.envelope_ok()
        && (report.boundary || report.case_r1_pass())
        && (report.r2_boundary() || report.case_r2_pass());
    Ok(report)
}

/// Smallest slack seen for one inequality and where it occurred.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlackExtreme {
    pub slack: f64,
    pub m1: f64,
    pub m2: f64,
}

impl SlackExtreme {
    fn fold(acc: Option<Self>, slack: f64, r: &GapReport) -> Option<Self> {
        match acc {
            Some(a) if a.slack <= slack => Some(a),
            _ if slack.is_finite() => Some(Self { slack, m1: r.config.helper_memory, m2: r.config.user_memory }),
            _ => acc,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub points: usize,
    pub boundary_points: usize,
    pub theorem_failures: usize,
    /// Interior points whose own case inequality fails.
    pub case_failures: usize,
    /// Boundary points where some adjacent case inequality fails.
    pub boundary_case_failures: usize,
    pub envelope_violations: usize,
    pub witnesses_out_of_range: usize,
    pub failures: usize,
    pub min_theorem_r1: Option<SlackExtreme>,
    pub min_theorem_r2: Option<SlackExtreme>,
    pub min_case_r1: Option<SlackExtreme>,
    pub min_case_r2: Option<SlackExtreme>,
    /// `(M1, M2)` of every failing point, in grid order.
    pub failing_points: Vec<(f64, f64)>,
}

impl SweepSummary {
    pub fn from_reports(reports: &[GapReport]) -> Self {
        let mut s = SweepSummary {
            points: reports.len(),
            boundary_points: 0,
            theorem_failures: 0,
            case_failures: 0,
            boundary_case_failures: 0,
            envelope_violations: 0,
            witnesses_out_of_range: 0,
            failures: 0,
            min_theorem_r1: None,
            min_theorem_r2: None,
            min_case_r1: None,
            min_case_r2: None,
            failing_points: vec![],
        };
        for r in reports {
            s.boundary_points += r.boundary as usize;
            s.theorem_failures += !r.theorem_pass() as usize;
            let case_ok = r.case_r1_pass() && r.case_r2_pass();
            if r.boundary || r.r2_boundary() {
                s.boundary_case_failures += !case_ok as usize;
            }
            let interior_ok = (r.boundary || r.case_r1_pass()) && (r.r2_boundary() || r.case_r2_pass());
            s.case_failures += !interior_ok as usize;
            s.envelope_violations += !r.bounds.envelope_ok() as usize;
            s.witnesses_out_of_range += r.witness_r1.is_some_and(|w| !w.in_range) as usize;
            if !r.pass {
                s.failures += 1;
                s.failing_points.push((r.config.helper_memory, r.config.user_memory));
            }
            s.min_theorem_r1 = SlackExtreme::fold(s.min_theorem_r1, r.theorem_r1.slack, r);
            s.min_theorem_r2 = SlackExtreme::fold(s.min_theorem_r2, r.theorem_r2.slack, r);
            if !r.boundary {
                s.min_case_r1 = SlackExtreme::fold(s.min_case_r1, r.min_case_r1_slack(), r);
            }
            if !r.r2_boundary() {
                s.min_case_r2 = SlackExtreme::fold(s.min_case_r2, r.min_case_r2_slack(), r);
            }
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sweep {
    pub reports: Vec<GapReport>,
    pub summary: SweepSummary,
}

/// Restricts which grid points a sweep keeps.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SweepFilter {
    pub regime: Option<Regime>,
    pub subregime: Option<SubRegime>,
    pub interior_only: bool,
}

impl SweepFilter {
    fn keeps(&self, r: &GapReport) -> bool {
        self.regime.is_none_or(|x| x == r.label.regime)
            && self.subregime.is_none_or(|x| x == r.label.subregime)
            && !(self.interior_only && r.boundary)
    }
}

/// Memory values `k N / (resolution - 1)` for `k = 0..resolution`; a single
/// point at 0 when `resolution = 1`.
pub fn grid_axis(n: f64, resolution: usize) -> Vec<f64> {
    if resolution <= 1 {
        return vec![0.0];
    }
    let last = resolution - 1;
    (0..resolution).map(|k| if k == last { n } else { k as f64 * n / last as f64 }).collect()
}

/// Check every `(M1, M2)` node of a `resolution x resolution` grid over
/// `[0, N]^2`, in M1-major order.
pub fn sweep(template: &ValidatedConfig, resolution: usize, filter: SweepFilter) -> Result<Sweep, GapError> {
    if !template.gap_eligible() {
        return Err(GapError::NotGapEligible { n: template.files(), users: template.user_count() });
    }
    let axis = grid_axis(template.n(), resolution);
    let points: Vec<(f64, f64)> = axis.iter().flat_map(|&a| axis.iter().map(move |&b| (a, b))).collect();
    let reports: Vec<GapReport> = points
        .par_iter()
        .map(|&(m1, m2)| {
            let c = template.with_memories(m1, m2).expect("grid inside [0, N]^2");
            check_point(&c).expect("eligibility checked above")
        })
        .collect::<Vec<_>>()
        .into_iter()
        .filter(|r| filter.keeps(r))
        .collect();
    let summary = SweepSummary::from_reports(&reports);
    Ok(Sweep { reports, summary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cfg(n: usize, k1: usize, k2: usize, m1: f64, m2: f64) -> ValidatedConfig {
        NetworkConfig::new(n, k1, k2, m1, m2).validate().unwrap()
    }

    #[test]
    fn fig3_point_passes() {
        let r = check_point(&cfg(50, 10, 2, 10.0, 20.0)).unwrap();
        assert!(r.theorem_r1.pass && r.theorem_r2.pass);
        assert_abs_diff_eq!(r.theorem_r1.slack, 20.0 / 51.0 + 3.96875, epsilon = 1e-12);
        assert_abs_diff_eq!(r.theorem_r2.slack, 30.0 / 51.0 - (0.2 - 4.0), epsilon = 1e-12);
        assert!(r.pass);
    }

    #[test]
    fn zero_memory_at_minimum_library() {
        let r = check_point(&cfg(4, 2, 2, 0.0, 0.0)).unwrap();
        assert_abs_diff_eq!(r.bounds.r1_lb, 2.0, epsilon = 1e-12);
        assert_eq!(r.bounds.r1_ub, 4.0);
        assert_eq!(r.label.case, Case::A);
        assert!(r.case_r1.iter().any(|c| c.label.case == Case::A && c.check.pass));
    }

    #[test]
    fn ineligible_topology() {
        assert_eq!(check_point(&cfg(8, 3, 3, 1.0, 1.0)), Err(GapError::NotGapEligible { n: 8, users: 9 }));
    }

    #[test]
    fn single_point_sweep_matches_check_point() {
        let c = cfg(20, 2, 2, 0.0, 0.0);
        let s = sweep(&c, 1, SweepFilter::default()).unwrap();
        assert_eq!(s.reports, vec![check_point(&c).unwrap()]);
        assert_eq!(s.summary.points, 1);
        assert_eq!(s.summary.min_theorem_r1.unwrap().slack, s.reports[0].theorem_r1.slack);
    }

    #[test]
    fn small_sweep_has_no_theorem_failures() {
        let s = sweep(&cfg(20, 2, 2, 0.0, 0.0), 41, SweepFilter::default()).unwrap();
        assert_eq!(s.summary.points, 1681);
        assert_eq!(s.summary.theorem_failures, 0);
        assert_eq!(s.summary.envelope_violations, 0);
    }

    #[test]
    fn grid_endpoints_are_exact() {
        let a = grid_axis(36.0, 41);
        assert_eq!(a[0], 0.0);
        assert_eq!(a[40], 36.0);
        assert_eq!(a[20], 18.0);
    }

    #[test]
    fn witness_is_never_above_the_scan() {
        let s = sweep(&cfg(36, 3, 3, 0.0, 0.0), 41, SweepFilter::default()).unwrap();
        for r in &s.reports {
            if let Some(w) = r.witness_r1 {
                assert!(w.dominated, "{:?}", r.config);
            }
            if let Some(w) = r.witness_r2 {
                assert!(w.dominated, "{:?}", r.config);
            }
        }
    }

    #[test]
    fn filter_restricts_regime() {
        let f = SweepFilter { regime: Some(Regime::I), ..Default::default() };
        let s = sweep(&cfg(20, 2, 2, 0.0, 0.0), 11, f).unwrap();
        assert!(!s.reports.is_empty());
        assert!(s.reports.iter().all(|r| r.label.regime == Regime::I));
    }

    #[test]
    fn csv_row_has_header_width() {
        let r = check_point(&cfg(50, 10, 2, 10.0, 20.0)).unwrap();
        assert_eq!(r.csv_row().split(',').count(), GapReport::CSV_HEADER.split(',').count());
    }
}
