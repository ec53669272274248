//! Acceptance suite: one line per criterion, non-zero exit on any failure.
//!
//! Reference formulas here are written out independently of the library.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twotier::bounds::{lower_bound_r1, lower_bound_r2, r1_cut, r2_cut};
use twotier::delivery::{
    deliver_hybrid, deliver_sc, deliver_scheme_a, deliver_scheme_b, uniform_demands, DeliveryOutcome, Library,
};
use twotier::gap::{sweep, SweepFilter};
use twotier::placement::{place, place_hybrid};
use twotier::rates::{rate_generalized, rate_hybrid, rate_sc, rate_scheme_a, rate_scheme_b};
use twotier::{DeliveryError, NetworkConfig, RatePair, Share, SimulationConfig, ValidatedConfig};

const FIG3_TOL: f64 = 1e-5;
const IDENTITY_REL_TOL: f64 = 1e-12;
const CONVERGENCE_REL_TOL: f64 = 0.02;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn cfg(n: usize, k1: usize, k2: usize, m1: f64, m2: f64) -> ValidatedConfig {
    NetworkConfig::new(n, k1, k2, m1, m2).validate().unwrap()
}

fn share(a: f64, b: f64) -> Share {
    Share::new(a, b).unwrap()
}

/// `(1 - m/n)(n/m)(1 - (1 - m/n)^k)` evaluated literally, with its limits.
fn block(m: f64, n: f64, k: usize) -> f64 {
    if n <= 0.0 || m >= n {
        0.0
    } else if m <= 0.0 {
        k as f64
    } else {
        (1.0 - m / n) * (n / m) * (1.0 - (1.0 - m / n).powi(k as i32))
    }
}

fn hybrid_reference(n: f64, k1: usize, k2: usize, m1: f64, m2: f64, a: f64, b: f64) -> (f64, f64) {
    let split = if a > 0.0 { (1.0 - b * m2 / (a * n)).clamp(0.0, 1.0) } else { 1.0 };
    let r1 = a * k2 as f64 * block(m1, a * n, k1) * split + (1.0 - a) * block((1.0 - b) * m2, (1.0 - a) * n, k1 * k2);
    let r2 = a * block(b * m2, a * n, k2) + (1.0 - a) * block((1.0 - b) * m2, (1.0 - a) * n, k2);
    (r1, r2)
}

fn random_config(rng: &mut ChaCha8Rng, eligible: bool) -> ValidatedConfig {
    loop {
        let k1 = rng.gen_range(2..=10);
        let k2 = rng.gen_range(2..=10);
        let n = rng.gen_range(1..=120);
        if eligible && n < k1 * k2 {
            continue;
        }
        let nf = n as f64;
        return cfg(n, k1, k2, rng.gen_range(0.0..=nf), rng.gen_range(0.0..=nf));
    }
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs())
}

fn fig3_values() -> Outcome {
    let c = cfg(50, 10, 2, 10.0, 20.0);
    let h = rate_hybrid(&c, share(0.5, 0.5));
    let g = rate_generalized(&c, share(0.5, 0.5));
    let (h_ref, _) = hybrid_reference(50.0, 10, 2, 10.0, 20.0, 0.5, 0.5);
    let a_ref = 2.0 * block(10.0, 50.0, 10);
    let checks = [
        ("r1_SC", rate_sc(&c).r1, 4.284604, a_ref * 0.6),
        ("r1_A", rate_scheme_a(&c).r1, 7.141007, a_ref),
        ("r2_SC", rate_sc(&c).r2, 0.96, block(20.0, 50.0, 2)),
        ("r2_A", rate_scheme_a(&c).r2, 0.96, block(20.0, 50.0, 2)),
        ("r2_B", rate_scheme_b(&c).rates.r2, 0.96, block(20.0, 50.0, 2)),
        ("r2_hybrid", h.r2, 0.96, block(20.0, 50.0, 2)),
        ("r1_hybrid", h.r1, 1.644527, h_ref),
        ("r1_generalized", g.r1, 2.240902, block(10.0, 25.0, 10) + 0.5 * block(10.0, 25.0, 20)),
    ];
    let mut worst: f64 = 0.0;
    let mut bad = vec![];
    for (name, got, pinned, reference) in checks {
        let err = (got - pinned).abs().max((got - reference).abs());
        worst = worst.max(err);
        if err > FIG3_TOL {
            bad.push(format!("{name}={got}"));
        }
    }
    outcome(bad.is_empty(), format!("max abs error {worst:.2e} (tol {FIG3_TOL:.0e}) {}", bad.join(" ")))
}

fn remark1_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut violations = 0;
    for _ in 0..10_000 {
        let c = random_config(&mut rng, false);
        let (sc, a) = (rate_sc(&c), rate_scheme_a(&c));
        if !rel_close(sc.r1, (1.0 - c.m2() / c.n()) * a.r1, IDENTITY_REL_TOL)
            || !rel_close(sc.r2, a.r2, IDENTITY_REL_TOL)
        {
            violations += 1;
        }
    }
    outcome(violations == 0, format!("{violations} violations on 10000 configs (rel tol {IDENTITY_REL_TOL:.0e})"))
}

fn remark2_dominance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut violations = 0;
    for _ in 0..100 {
        let c = random_config(&mut rng, false);
        for i in 0..=100 {
            for j in 0..=100 {
                let s = share(i as f64 / 100.0, j as f64 / 100.0);
                let (h, g) = (rate_hybrid(&c, s), rate_generalized(&c, s));
                if !(h.r1 <= g.r1 && h.r2 == g.r2) {
                    violations += 1;
                }
            }
        }
    }
    outcome(violations == 0, format!("{violations} violations on 100 configs x 101 x 101 shares"))
}

fn decode_correctness() -> Outcome {
    let mut exact = 0;
    let mut possession = 0;
    let mut other = vec![];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for scheme in 0..4 {
        for trial in 0..100u64 {
            let c = cfg(6, 2, 3, rng.gen_range(0.0..=6.0), rng.gen_range(0.0..=6.0));
            let seed = 1000 * scheme + trial;
            let sim = SimulationConfig { file_bits: 4096, seed, requests: uniform_demands(&c, seed) };
            let alloc = place(&c, &sim).unwrap();
            let result = match scheme {
                0 => deliver_scheme_a(&c, &sim, &alloc),
                1 => deliver_scheme_b(&c, &sim, &alloc),
                2 => deliver_sc(&c, &sim, &alloc),
                _ => deliver_hybrid(&c, &sim, &place_hybrid(&c, &sim, share(0.5, 0.5)).unwrap()),
            };
            match result {
                Ok(out) => {
                    let lib = Library::generate(6, 4096, seed);
                    if out.decoded.iter().zip(&sim.requests).all(|(got, &d)| got == lib.file(d)) {
                        exact += 1;
                    }
                }
                Err(DeliveryError::HelperMissingBits { .. }) => possession += 1,
                Err(e) => other.push(e.to_string()),
            }
        }
    }
    outcome(
        exact == 400 && possession == 0,
        format!("{exact}/400 exact decodes, {possession} possession failures {}", other.join("; ")),
    )
}

fn convergence() -> Outcome {
    let c = cfg(8, 2, 2, 2.0, 2.0);
    let sim = SimulationConfig { file_bits: 1_000_000, seed: 7, requests: vec![1, 2, 3, 4] };
    let alloc = place(&c, &sim).unwrap();
    let b_r1 = block(2.0, 8.0, 4);
    let second = block(2.0, 8.0, 2);
    let a_r1 = 2.0 * block(2.0, 8.0, 2);
    let (h1, h2) = hybrid_reference(8.0, 2, 2, 2.0, 2.0, 0.5, 0.5);
    let runs: [(&str, Result<DeliveryOutcome, DeliveryError>, RatePair); 4] = [
        ("SC", deliver_sc(&c, &sim, &alloc), RatePair::new(0.75 * a_r1, second)),
        ("A", deliver_scheme_a(&c, &sim, &alloc), RatePair::new(a_r1, second)),
        ("B", deliver_scheme_b(&c, &sim, &alloc), RatePair::new(b_r1, second)),
        (
            "Hybrid(0.5,0.5)",
            deliver_hybrid(&c, &sim, &place_hybrid(&c, &sim, share(0.5, 0.5)).unwrap()),
            RatePair::new(h1, h2),
        ),
    ];
    let mut pass = true;
    let mut parts = vec![];
    for (name, result, expected) in runs {
        match result {
            Ok(out) => {
                let e1 = (out.rates.r1 - expected.r1).abs() / expected.r1;
                let e2 = (out.rates.r2 - expected.r2).abs() / expected.r2;
                pass &= e1 <= CONVERGENCE_REL_TOL && e2 <= CONVERGENCE_REL_TOL;
                parts.push(format!("{name} {:.2}%/{:.2}%", 100.0 * e1, 100.0 * e2));
                if name == "B" {
                    let printed = (out.rates.r1 - a_r1).abs() / a_r1;
                    parts.push(format!("B vs printed-r1 {:.1}%", 100.0 * printed));
                }
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{name} error {e}"));
            }
        }
    }
    outcome(pass, format!("rel errors r1/r2: {} (tol 2%)", parts.join(", ")))
}

const SWEEP_TOPOLOGIES: [(usize, usize, usize); 4] = [(20, 2, 2), (36, 3, 3), (64, 4, 4), (50, 10, 2)];

fn gap_sweeps() -> (Outcome, Outcome) {
    let mut theorem = 0;
    let mut case = 0;
    let mut envelope = 0;
    let mut points = 0;
    let mut min_slack = f64::INFINITY;
    for (n, k1, k2) in SWEEP_TOPOLOGIES {
        let s = sweep(&cfg(n, k1, k2, 0.0, 0.0), 41, SweepFilter::default()).unwrap();
        points += s.summary.points;
        theorem += s.summary.theorem_failures;
        case += s.summary.case_failures;
        envelope += s.summary.envelope_violations;
        min_slack = min_slack.min(s.summary.min_theorem_r1.map_or(f64::INFINITY, |x| x.slack));
    }
    (
        outcome(
            theorem == 0 && case == 0,
            format!("{points} points, {theorem} theorem failures, {case} interior case failures, min r1 slack {min_slack:.4}"),
        ),
        outcome(envelope == 0, format!("{envelope} envelope violations over {points} points")),
    )
}

fn bound_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut mismatches = 0;
    for _ in 0..10_000 {
        let c = random_config(&mut rng, false);
        let (n, m1, m2) = (c.n(), c.m1(), c.m2());
        let mut terms = vec![];
        for a in 1..=c.k1() {
            for b in 1..=c.k2() {
                let (x, y) = (a as f64, b as f64);
                terms.push(x * y * (n - x * m1 - x * y * m2) / (n + x * y));
            }
        }
        let raw1 = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let raw2 =
            (1..=c.k2()).map(|t| t as f64 * (n - t as f64 * m2) / (n + t as f64)).fold(f64::NEG_INFINITY, f64::max);
        let (v1, s1, s2) = lower_bound_r1(&c);
        let (v2, t) = lower_bound_r2(&c);
        if v1 != raw1.max(0.0) || r1_cut(&c, s1, s2) != raw1 || v2 != raw2.max(0.0) || r2_cut(&c, t) != raw2 {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("{mismatches} mismatches against brute force on 10000 configs"))
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |id: usize, name: &str, budget: Duration, run: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = run();
        let elapsed = start.elapsed();
        let pass = o.pass && elapsed <= budget;
        failed += !pass as usize;
        println!(
            "[{}] {id}. {name}: {} ({:.2?}, budget {budget:?})",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            elapsed
        );
    };
    let secs = Duration::from_secs;
    report(1, "closed-form rates at the reference point", secs(1), &mut fig3_values);
    report(2, "S&C/A identity", secs(1), &mut remark1_identity);
    report(3, "hybrid dominates generalized pointwise", secs(10), &mut remark2_dominance);
    report(4, "decode correctness", secs(30), &mut decode_correctness);
    report(5, "simulation converges to closed forms", secs(120), &mut convergence);
    let mut envelope = None;
    report(6, "order-optimality sweeps", secs(60), &mut || {
        let (gap, env) = gap_sweeps();
        envelope = Some(env);
        gap
    });
    report(7, "lower-bound scan against brute force", secs(5), &mut bound_oracle);
    report(8, "envelope validity on the sweeps", secs(60), &mut || envelope.take().unwrap());
    if failed == 0 {
        println!("acceptance: all 8 criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria fail");
        ExitCode::FAILURE
    }
}
