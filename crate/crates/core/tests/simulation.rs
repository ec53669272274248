use twotier::delivery::{
    decode_user, deliver_hybrid, deliver_sc, deliver_scheme_a, deliver_scheme_b, uniform_demands, Placement,
};
use twotier::placement::{place, place_hybrid, CacheAllocation};
use twotier::rates::{mau_rate, rate_hybrid, rate_sc, rate_scheme_a};
use twotier::{NetworkConfig, Share, SimulationConfig, ValidatedConfig};

fn setup(n: usize, k1: usize, k2: usize, m1: f64, m2: f64, f: usize, seed: u64) -> (ValidatedConfig, SimulationConfig) {
    let c = NetworkConfig::new(n, k1, k2, m1, m2).validate().unwrap();
    let requests = uniform_demands(&c, seed);
    (c, SimulationConfig { file_bits: f, seed, requests })
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b
}

#[test]
fn quarter_and_half_memories_converge() {
    for (m1, m2) in [(2.0, 2.0), (4.0, 2.0), (2.0, 4.0), (4.0, 4.0)] {
        let (c, sim) = setup(8, 2, 2, m1, m2, 200_000, 11);
        let alloc = place(&c, &sim).unwrap();
        let sc = deliver_sc(&c, &sim, &alloc).unwrap().rates;
        let a = deliver_scheme_a(&c, &sim, &alloc).unwrap().rates;
        let b = deliver_scheme_b(&c, &sim, &alloc).unwrap().rates;
        let expected_b = mau_rate(m2, 8.0, 4).unwrap();
        assert!(rel(sc.r1, rate_sc(&c).r1) <= 0.02, "{m1} {m2} sc {sc:?}");
        assert!(rel(sc.r2, rate_sc(&c).r2) <= 0.02);
        assert!(rel(a.r1, rate_scheme_a(&c).r1) <= 0.02, "{m1} {m2} a {a:?}");
        assert!(rel(b.r1, expected_b) <= 0.02, "{m1} {m2} b {b:?}");
        assert!(rel(b.r2, mau_rate(m2, 8.0, 2).unwrap()) <= 0.02);
    }
}

#[test]
fn scheme_b_ignores_helper_memory() {
    let mut measured = vec![];
    for m1 in [0.0, 3.0, 8.0] {
        let (c, sim) = setup(8, 2, 2, m1, 2.0, 100_000, 3);
        measured.push(deliver_scheme_b(&c, &sim, &place(&c, &sim).unwrap()).unwrap().rates);
    }
    assert!(measured.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn hybrid_shares_converge() {
    for (a, b) in [(0.3, 0.7), (0.8, 0.2)] {
        let share = Share::new(a, b).unwrap();
        let (c, sim) = setup(8, 2, 2, 2.0, 4.0, 200_000, 5);
        let out = deliver_hybrid(&c, &sim, &place_hybrid(&c, &sim, share).unwrap()).unwrap();
        let expected = rate_hybrid(&c, share);
        assert!(rel(out.rates.r1, expected.r1) <= 0.02, "{a} {b} {:?} {expected:?}", out.rates);
        assert!(rel(out.rates.r2, expected.r2) <= 0.02);
    }
}

#[test]
fn every_user_decodes_from_its_helper_transcript() {
    let (c, sim) = setup(6, 2, 3, 1.0, 2.5, 2048, 21);
    let alloc = place(&c, &sim).unwrap();
    let hybrid = place_hybrid(&c, &sim, Share::new(0.6, 0.3).unwrap()).unwrap();
    let runs = [
        (deliver_sc(&c, &sim, &alloc).unwrap(), Placement::Single(&alloc)),
        (deliver_scheme_a(&c, &sim, &alloc).unwrap(), Placement::Single(&alloc)),
        (deliver_scheme_b(&c, &sim, &alloc).unwrap(), Placement::Single(&alloc)),
        (deliver_hybrid(&c, &sim, &hybrid).unwrap(), Placement::Hybrid(&hybrid)),
    ];
    for (out, placement) in &runs {
        for i in 1..=2 {
            for j in 1..=3 {
                let got = decode_user(&c, &sim, *placement, out, i, j).unwrap();
                assert_eq!(got, out.decoded[(i - 1) * 3 + j - 1]);
            }
        }
    }
}

#[test]
fn placement_ignores_thread_count() {
    let (c, sim) = setup(6, 3, 2, 2.0, 1.0, 5000, 9);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| place(&c, &sim).unwrap())
    };
    assert_eq!(run(1), run(8));
}

#[test]
fn delivery_is_reproducible_and_dump_roundtrips() {
    let (c, sim) = setup(6, 2, 3, 2.0, 2.0, 1024, 13);
    let alloc = place(&c, &sim).unwrap();
    let json = serde_json::to_string(&alloc.to_dump()).unwrap();
    let back = CacheAllocation::from_dump(&serde_json::from_str(&json).unwrap()).unwrap();
    let first = deliver_sc(&c, &sim, &alloc).unwrap();
    let second = deliver_sc(&c, &sim, &back).unwrap();
    assert_eq!(first, second);
    assert_eq!(first.server.dump(true), second.server.dump(true));
}
