//! Achievable rate-region frontiers over the `(alpha, beta)` grid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::ValidatedConfig;
use crate::rates::{rate_generalized, rate_hybrid, Share};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FrontierScheme {
    Hybrid,
    Generalized,
}

impl FrontierScheme {
    pub fn name(self) -> &'static str {
        match self {
            FrontierScheme::Hybrid => "hybrid",
            FrontierScheme::Generalized => "generalized",
        }
    }

    fn rate(self, config: &ValidatedConfig, share: Share) -> (f64, f64) {
        let r = match self {
            FrontierScheme::Hybrid => rate_hybrid(config, share),
            FrontierScheme::Generalized => rate_generalized(config, share),
        };
        (r.r1, r.r2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub alpha: f64,
    pub beta: f64,
    pub r1: f64,
    pub r2: f64,
}

impl FrontierPoint {
    /// `self` is at least as good as `other` on both links.
    pub fn covers(&self, other: &FrontierPoint) -> bool {
        self.r1 <= other.r1 && self.r2 <= other.r2
    }
}

/// Pareto-minimal `(r1, r2)` pairs, sorted by `r1` ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frontier {
    pub scheme: FrontierScheme,
    pub resolution: usize,
    pub points: Vec<FrontierPoint>,
}

impl Frontier {
    pub const CSV_HEADER: &'static str = "alpha,beta,r1,r2,scheme";

    pub fn csv_rows(&self) -> impl Iterator<Item = String> + '_ {
        self.points.iter().map(|p| format!("{},{},{},{},{}", p.alpha, p.beta, p.r1, p.r2, self.scheme.name()))
    }
}

/// `k / (resolution - 1)` for `k = 0..resolution`.
pub fn share_axis(resolution: usize) -> Vec<f64> {
    let last = resolution.max(2) - 1;
    (0..=last).map(|k| k as f64 / last as f64).collect()
}

/// Keep the points no other point dominates. Among equal rate pairs the
/// smallest `(alpha, beta)` survives.
pub fn pareto_filter(mut points: Vec<FrontierPoint>) -> Vec<FrontierPoint> {
    points.sort_by(|a, b| {
        a.r1.total_cmp(&b.r1)
            .then(a.r2.total_cmp(&b.r2))
            .then(a.alpha.total_cmp(&b.alpha))
            .then(a.beta.total_cmp(&b.beta))
    });
    let mut out: Vec<FrontierPoint> = vec![];
    for p in points {
        if out.last().is_none_or(|q| p.r2 < q.r2) {
            out.push(p);
        }
    }
    out
}

/// Frontier of `scheme` on a `resolution x resolution` share grid (at least 2 per axis).
pub fn frontier(config: &ValidatedConfig, scheme: FrontierScheme, resolution: usize) -> Frontier {
    let axis = share_axis(resolution);
    let pairs: Vec<(f64, f64)> = axis.iter().flat_map(|&a| axis.iter().map(move |&b| (a, b))).collect();
    let points = pairs
        .par_iter()
        .map(|&(alpha, beta)| {
            let (r1, r2) = scheme.rate(config, Share::new(alpha, beta).expect("grid inside [0, 1]^2"));
            FrontierPoint { alpha, beta, r1, r2 }
        })
        .collect();
    Frontier { scheme, resolution: axis.len(), points: pareto_filter(points) }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dominance {
    pub holds: bool,
    /// A point of the second frontier no point of the first covers.
    pub witness: Option<FrontierPoint>,
}

/// Whether every point of `b` is covered by some point of `a`.
pub fn dominates(a: &Frontier, b: &Frontier) -> Dominance {
    let witness = b.points.iter().find(|q| !a.points.iter().any(|p| p.covers(q))).copied();
    Dominance { holds: witness.is_none(), witness }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    Alpha,
    Beta,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub value: f64,
    pub r1_hybrid: f64,
    pub r1_generalized: f64,
    pub r2: f64,
}

impl ComparisonRow {
    pub const CSV_HEADER: &'static str = "value,r1_hybrid,r1_generalized,r2";

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{}", self.value, self.r1_hybrid, self.r1_generalized, self.r2)
    }
}

/// Hybrid against generalized server rate as one factor runs over
/// `0.2, 0.3, ..., 0.9` with the other held at `fixed`.
pub fn fig3_table(
    config: &ValidatedConfig,
    axis: Axis,
    fixed: f64,
) -> Result<Vec<ComparisonRow>, crate::rates::RateError> {
    (2..=9)
        .map(|k| {
            let value = k as f64 / 10.0;
            let share = match axis {
                Axis::Alpha => Share::new(value, fixed)?,
                Axis::Beta => Share::new(fixed, value)?,
            };
            let h = rate_hybrid(config, share);
            let g = rate_generalized(config, share);
            Ok(ComparisonRow { value, r1_hybrid: h.r1, r1_generalized: g.r1, r2: h.r2 })
        })
        .collect()
}
