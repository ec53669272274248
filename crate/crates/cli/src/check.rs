//! Desk-scale run of the acceptance criteria.

use serde::Serialize;
use twotier::bounds::{lower_bound_r1, lower_bound_r2, r1_cut, r2_cut};
use twotier::delivery::{deliver_hybrid, deliver_sc, deliver_scheme_a, deliver_scheme_b, uniform_demands, Library};
use twotier::gap::{sweep, SweepFilter};
use twotier::placement::{place, place_hybrid};
use twotier::rates::{mau_rate, rate_generalized, rate_hybrid, rate_sc, rate_scheme_a, rate_scheme_b};
use twotier::{NetworkConfig, RatePair, Share, SimulationConfig, ValidatedConfig};

#[derive(Debug, Serialize)]
pub struct Criterion {
    pub id: usize,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn cfg(n: usize, k1: usize, k2: usize, m1: f64, m2: f64) -> ValidatedConfig {
    NetworkConfig::new(n, k1, k2, m1, m2).validate().expect("valid")
}

fn share(a: f64, b: f64) -> Share {
    Share::new(a, b).expect("valid")
}

/// Deterministic pseudo-random configurations from a splitmix sequence.
fn configs(count: usize, seed: u64) -> Vec<ValidatedConfig> {
    let mut state = seed;
    let mut next = move || {
        state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    };
    (0..count)
        .map(|_| {
            let k1 = 2 + (next() % 9) as usize;
            let k2 = 2 + (next() % 9) as usize;
            let n = 1 + (next() % 120) as usize;
            let unit = |x: u64| (x >> 11) as f64 / (1u64 << 53) as f64;
            let (a, b) = (unit(next()), unit(next()));
            cfg(n, k1, k2, a * n as f64, b * n as f64)
        })
        .collect()
}

fn fig3_values() -> (bool, String) {
    let c = cfg(50, 10, 2, 10.0, 20.0);
    let pairs = [
        (rate_sc(&c).r1, 4.284604),
        (rate_scheme_a(&c).r1, 7.141007),
        (rate_sc(&c).r2, 0.96),
        (rate_scheme_a(&c).r2, 0.96),
        (rate_scheme_b(&c).rates.r2, 0.96),
        (rate_hybrid(&c, share(0.5, 0.5)).r1, 1.644527),
        (rate_generalized(&c, share(0.5, 0.5)).r1, 2.240902),
    ];
    let worst = pairs.iter().map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    (worst <= 1e-5, format!("max abs error {worst:.2e}"))
}

fn identity() -> (bool, String) {
    let bad = configs(10_000, 1)
        .iter()
        .filter(|c| {
            let (sc, a) = (rate_sc(c), rate_scheme_a(c));
            let want = (1.0 - c.m2() / c.n()) * a.r1;
            (sc.r1 - want).abs() > 1e-12 * sc.r1.abs().max(want.abs()) || sc.r2 != a.r2
        })
        .count();
    (bad == 0, format!("{bad} violations on 10000 configs"))
}

fn dominance() -> (bool, String) {
    let mut bad = 0;
    for c in configs(100, 2) {
        for i in 0..=100 {
            for j in 0..=100 {
                let s = share(i as f64 / 100.0, j as f64 / 100.0);
                let (h, g) = (rate_hybrid(&c, s), rate_generalized(&c, s));
                bad += !(h.r1 <= g.r1 && h.r2 == g.r2) as usize;
            }
        }
    }
    (bad == 0, format!("{bad} violations on 100 configs x 101 x 101 shares"))
}

fn decoding() -> (bool, String) {
    let mut exact = 0;
    let mut errors = vec![];
    for scheme in 0..4u64 {
        for trial in 0..100u64 {
            let seed = 1000 * scheme + trial;
            let m = |k: u64| (k % 7) as f64;
            let c = cfg(6, 2, 3, m(seed), m(seed / 7 + 3));
            let sim = SimulationConfig { file_bits: 4096, seed, requests: uniform_demands(&c, seed) };
            let alloc = place(&c, &sim).expect("valid simulation");
            let out = match scheme {
                0 => deliver_scheme_a(&c, &sim, &alloc),
                1 => deliver_scheme_b(&c, &sim, &alloc),
                2 => deliver_sc(&c, &sim, &alloc),
                _ => deliver_hybrid(&c, &sim, &place_hybrid(&c, &sim, share(0.5, 0.5)).expect("valid")),
            };
            match out {
                Ok(out) => {
                    let lib = Library::generate(6, 4096, seed);
                    exact += out.decoded.iter().zip(&sim.requests).all(|(got, &d)| got == lib.file(d)) as usize;
                }
                Err(e) => errors.push(e.to_string()),
            }
        }
    }
    (exact == 400, format!("{exact}/400 exact decodes {}", errors.join("; ")))
}

fn convergence() -> (bool, String) {
    let c = cfg(8, 2, 2, 2.0, 2.0);
    let sim = SimulationConfig { file_bits: 1_000_000, seed: 7, requests: vec![1, 2, 3, 4] };
    let alloc = place(&c, &sim).expect("valid");
    let hybrid = place_hybrid(&c, &sim, share(0.5, 0.5)).expect("valid");
    let b_r1 = mau_rate(2.0, 8.0, 4).expect("in domain");
    let runs = [
        ("SC", deliver_sc(&c, &sim, &alloc), rate_sc(&c)),
        ("A", deliver_scheme_a(&c, &sim, &alloc), rate_scheme_a(&c)),
        ("B", deliver_scheme_b(&c, &sim, &alloc), RatePair::new(b_r1, rate_sc(&c).r2)),
        ("Hybrid", deliver_hybrid(&c, &sim, &hybrid), rate_hybrid(&c, share(0.5, 0.5))),
    ];
    let mut pass = true;
    let mut parts = vec![];
    for (name, out, want) in runs {
        match out {
            Ok(out) => {
                let e1 = (out.rates.r1 - want.r1).abs() / want.r1;
                let e2 = (out.rates.r2 - want.r2).abs() / want.r2;
                pass &= e1 <= 0.02 && e2 <= 0.02;
                parts.push(format!("{name} {:.2}%/{:.2}%", 100.0 * e1, 100.0 * e2));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{name} {e}"));
            }
        }
    }
    (pass, parts.join(", "))
}

fn sweeps() -> ((bool, String), (bool, String)) {
    let (mut points, mut theorem, mut case, mut envelope) = (0, 0, 0, 0);
    for (n, k1, k2) in [(20, 2, 2), (36, 3, 3), (64, 4, 4), (50, 10, 2)] {
        let s = sweep(&cfg(n, k1, k2, 0.0, 0.0), 41, SweepFilter::default()).expect("eligible");
        points += s.summary.points;
        theorem += s.summary.theorem_failures;
        case += s.summary.case_failures;
        envelope += s.summary.envelope_violations;
    }
    (
        (theorem == 0 && case == 0, format!("{points} points, {theorem} theorem failures, {case} case failures")),
        (envelope == 0, format!("{envelope} envelope violations")),
    )
}

fn bound_scan() -> (bool, String) {
    let bad = configs(10_000, 7)
        .iter()
        .filter(|c| {
            let raw1 = (1..=c.k1())
                .flat_map(|a| (1..=c.k2()).map(move |b| (a, b)))
                .map(|(a, b)| r1_cut(c, a, b))
                .fold(f64::NEG_INFINITY, f64::max);
            let raw2 = (1..=c.k2()).map(|t| r2_cut(c, t)).fold(f64::NEG_INFINITY, f64::max);
            lower_bound_r1(c).0 != raw1.max(0.0) || lower_bound_r2(c).0 != raw2.max(0.0)
        })
        .count();
    (bad == 0, format!("{bad} mismatches on 10000 configs"))
}

pub fn run_all() -> Vec<Criterion> {
    let ((p6, d6), (p8, d8)) = sweeps();
    let rows: [(&'static str, (bool, String)); 8] = [
        ("closed-form rates at the reference point", fig3_values()),
        ("S&C/A identity", identity()),
        ("hybrid dominates generalized pointwise", dominance()),
        ("decode correctness", decoding()),
        ("simulation converges to closed forms", convergence()),
        ("order-optimality sweeps", (p6, d6)),
        ("lower-bound scan against brute force", bound_scan()),
        ("envelope validity on the sweeps", (p8, d8)),
    ];
    rows.into_iter()
        .enumerate()
        .map(|(k, (name, (pass, detail)))| Criterion { id: k + 1, name, pass, detail })
        .collect()
}
