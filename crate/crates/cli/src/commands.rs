use std::fmt::Write as _;
use std::fs;

use anyhow::{anyhow, bail, Context, Result};
use serde_json::{json, Value};
use twotier::bounds::{classify, compute_bounds, matching_cases};
use twotier::delivery::{
    deliver_hybrid, deliver_sc, deliver_scheme_a, deliver_scheme_b, uniform_demands, DeliveryError, DeliveryOutcome,
};
use twotier::gap::{check_point, sweep, GapReport, SweepFilter};
use twotier::placement::{place, place_hybrid};
use twotier::rates::{rate, rate_scheme_b, SchemeId};
use twotier::region::{dominates, fig3_table, frontier, Axis, ComparisonRow, Frontier, FrontierScheme};
use twotier::{NetworkConfig, Regime, Share, SimulationConfig, ValidatedConfig};

use crate::output::{Emit, OutputRecord, Table};
use crate::{check, AxisArg, Command, Memories, RegimeArg, SchemeArg, ShareArgs, Topology};

/// Run one command; `Ok(Some(_))` names a violated invariant.
pub fn run(command: Command, emit: &Emit) -> Result<Option<String>> {
    match command {
        Command::Rates { topology, memories, scheme, share } => rates(emit, topology, memories, scheme, share),
        Command::Simulate {
            topology,
            memories,
            scheme,
            share,
            file_bits,
            seed,
            demands,
            dump_transcript,
            with_payload,
        } => {
            let args = SimulateArgs { topology, memories, scheme, share, file_bits, seed, demands, with_payload };
            simulate(emit, args, dump_transcript)
        }
        Command::Bounds { topology, memories } => bounds(emit, topology, memories),
        Command::GapSweep { topology, grid, regime } => gap_sweep(emit, topology, grid, regime),
        Command::Region { topology, memories, grid, scheme, compare, fig3, fixed } => {
            region(emit, topology, memories, grid, scheme, compare, fig3.map(|a| (a, fixed)))
        }
        Command::CheckAll => check_all(emit),
    }
}

fn validate(t: Topology, m: Memories) -> Result<ValidatedConfig> {
    Ok(NetworkConfig::new(t.n, t.k1, t.k2, m.m1, m.m2).validate()?)
}

fn topology_json(t: Topology) -> Value {
    json!({ "n": t.n, "k1": t.k1, "k2": t.k2 })
}

fn config_json(t: Topology, m: Memories) -> Value {
    json!({ "n": t.n, "k1": t.k1, "k2": t.k2, "m1": m.m1, "m2": m.m2 })
}

fn scheme_name(s: SchemeArg) -> &'static str {
    match s {
        SchemeArg::Sc => "sc",
        SchemeArg::A => "a",
        SchemeArg::B => "b",
        SchemeArg::Hybrid => "hybrid",
        SchemeArg::Generalized => "generalized",
    }
}

fn scheme_id(s: SchemeArg, share: ShareArgs) -> Result<SchemeId> {
    let shared = matches!(s, SchemeArg::Hybrid | SchemeArg::Generalized);
    match (shared, share.alpha, share.beta) {
        (true, Some(a), Some(b)) => {
            let sh = Share::new(a, b)?;
            Ok(if s == SchemeArg::Hybrid { SchemeId::Hybrid(sh) } else { SchemeId::Generalized(sh) })
        }
        (true, _, _) => bail!("--scheme {} needs --alpha and --beta", scheme_name(s)),
        (false, None, None) => Ok(match s {
            SchemeArg::Sc => SchemeId::Sc,
            SchemeArg::A => SchemeId::A,
            _ => SchemeId::B,
        }),
        (false, _, _) => bail!("--alpha and --beta only apply to the hybrid and generalized schemes"),
    }
}

fn share_json(id: SchemeId) -> (Value, Value) {
    match id {
        SchemeId::Hybrid(s) | SchemeId::Generalized(s) => (json!(s.alpha()), json!(s.beta())),
        _ => (Value::Null, Value::Null),
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn rates(emit: &Emit, t: Topology, m: Memories, scheme: SchemeArg, share: ShareArgs) -> Result<Option<String>> {
    let config = validate(t, m)?;
    let id = scheme_id(scheme, share)?;
    let r = rate(&config, id);
    let printed = (id == SchemeId::B).then(|| rate_scheme_b(&config).printed_r1);
    let (alpha, beta) = share_json(id);
    let mut params = config_json(t, m);
    params["scheme"] = json!(scheme_name(scheme));
    params["alpha"] = alpha.clone();
    params["beta"] = beta.clone();
    let results = json!({ "r1": r.r1, "r2": r.r2, "printed_r1": printed });
    let mut table = Table::new("scheme,alpha,beta,r1,r2,printed_r1");
    table.push([
        scheme_name(scheme).to_string(),
        cell(&alpha),
        cell(&beta),
        r.r1.to_string(),
        r.r2.to_string(),
        printed.map(|p| p.to_string()).unwrap_or_default(),
    ]);
    emit.emit(&OutputRecord::new("rates", params, results, None), &table)?;
    Ok(None)
}

struct SimulateArgs {
    topology: Topology,
    memories: Memories,
    scheme: SchemeArg,
    share: ShareArgs,
    file_bits: usize,
    seed: u64,
    demands: String,
    with_payload: bool,
}

fn read_demands(path: &str) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading demands from {path}"))?;
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<usize>().map_err(|e| anyhow!("bad demand {s:?} in {path}: {e}")))
        .collect()
}

/// `|measured - expected| / expected`, or the absolute error when `expected = 0`.
fn relative_error(measured: f64, expected: f64) -> f64 {
    let diff = (measured - expected).abs();
    if expected == 0.0 {
        diff
    } else {
        diff / expected
    }
}

fn transcript_dump(out: &DeliveryOutcome, with_payload: bool) -> String {
    let mut text = String::new();
    let _ = writeln!(text, "# server");
    text.push_str(&out.server.dump(with_payload));
    for (i, h) in out.helpers.iter().enumerate() {
        let _ = writeln!(text, "# helper {}", i + 1);
        text.push_str(&h.dump(with_payload));
    }
    text
}

fn simulate(emit: &Emit, a: SimulateArgs, dump: Option<std::path::PathBuf>) -> Result<Option<String>> {
    let config = validate(a.topology, a.memories)?;
    let id = scheme_id(a.scheme, a.share)?;
    if matches!(id, SchemeId::Generalized(_)) {
        bail!("the generalized scheme has no bit-level simulation; use sc, a, b or hybrid");
    }
    let requests =
        if a.demands == "uniform-random" { uniform_demands(&config, a.seed) } else { read_demands(&a.demands)? };
    let sim = SimulationConfig { file_bits: a.file_bits, seed: a.seed, requests };
    sim.check(&config)?;

    let result = match id {
        SchemeId::Hybrid(s) => deliver_hybrid(&config, &sim, &place_hybrid(&config, &sim, s)?),
        _ => {
            let alloc = place(&config, &sim)?;
            match id {
                SchemeId::Sc => deliver_sc(&config, &sim, &alloc),
                SchemeId::A => deliver_scheme_a(&config, &sim, &alloc),
                _ => deliver_scheme_b(&config, &sim, &alloc),
            }
        }
    };

    let mut params = config_json(a.topology, a.memories);
    let (alpha, beta) = share_json(id);
    params["scheme"] = json!(scheme_name(a.scheme));
    params["alpha"] = alpha;
    params["beta"] = beta;
    params["file_bits"] = json!(a.file_bits);
    params["demands"] = json!(sim.requests);
    let expected = rate(&config, id);
    let mut table = Table::new(
        "scheme,measured_r1,measured_r2,expected_r1,expected_r2,rel_err_r1,rel_err_r2,server_bits,max_helper_bits,decode",
    );

    let (results, violation) = match result {
        Ok(out) => {
            if let Some(path) = &dump {
                fs::write(path, transcript_dump(&out, a.with_payload))
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            let e1 = relative_error(out.rates.r1, expected.r1);
            let e2 = relative_error(out.rates.r2, expected.r2);
            let helper_bits: Vec<usize> = out.helpers.iter().map(|h| h.total_bits()).collect();
            let mut results = json!({
                "decode": "ok",
                "measured": out.rates,
                "closed_form": expected,
                "relative_error": { "r1": e1, "r2": e2 },
                "server_bits": out.server.total_bits(),
                "helper_bits": helper_bits,
                "server_messages": out.server.messages().len(),
            });
            if id == SchemeId::B {
                let printed = rate_scheme_b(&config).printed_r1;
                results["printed_r1"] = json!(printed);
                results["printed_r1_relative_error"] = json!(relative_error(out.rates.r1, printed));
            }
            table.push([
                scheme_name(a.scheme).to_string(),
                out.rates.r1.to_string(),
                out.rates.r2.to_string(),
                expected.r1.to_string(),
                expected.r2.to_string(),
                e1.to_string(),
                e2.to_string(),
                out.server.total_bits().to_string(),
                helper_bits.iter().max().copied().unwrap_or(0).to_string(),
                "ok".to_string(),
            ]);
            (results, None)
        }
        Err(e @ (DeliveryError::DecodeFailure { .. } | DeliveryError::HelperMissingBits { .. })) => {
            let msg = e.to_string();
            table.push([
                scheme_name(a.scheme).to_string(),
                String::new(),
                String::new(),
                expected.r1.to_string(),
                expected.r2.to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                msg.clone(),
            ]);
            (json!({ "decode": "failed", "error": msg, "closed_form": expected }), Some(msg))
        }
        Err(e) => return Err(e.into()),
    };
    emit.emit(&OutputRecord::new("simulate", params, results, Some(a.seed)), &table)?;
    Ok(violation)
}

fn bounds(emit: &Emit, t: Topology, m: Memories) -> Result<Option<String>> {
    let config = validate(t, m)?;
    let b = compute_bounds(&config);
    let label = classify(&config);
    let cases: Vec<String> = matching_cases(&config).iter().map(ToString::to_string).collect();
    let gap = config.gap_eligible().then(|| check_point(&config).expect("eligible"));
    let results = json!({
        "bounds": b,
        "envelope_ok": b.envelope_ok(),
        "label": label.to_string(),
        "matching_cases": cases,
        "gap": gap,
    });
    let mut table = Table::new("r1_lb,s1,s2,r2_lb,t,r1_ub,r2_ub,alpha_star,beta_star,r1_achieved,r2_achieved,regime,subregime,case,envelope_ok");
    table.push([
        b.r1_lb.to_string(),
        b.s1.to_string(),
        b.s2.to_string(),
        b.r2_lb.to_string(),
        b.t.to_string(),
        b.r1_ub.to_string(),
        b.r2_ub.to_string(),
        b.chosen.alpha().to_string(),
        b.chosen.beta().to_string(),
        b.achieved.r1.to_string(),
        b.achieved.r2.to_string(),
        label.regime.to_string(),
        label.subregime.to_string(),
        label.case.to_string(),
        b.envelope_ok().to_string(),
    ]);
    emit.emit(&OutputRecord::new("bounds", config_json(t, m), results, None), &table)?;
    Ok((!b.envelope_ok()).then(|| format!("hybrid rates at the chosen tuple exceed the envelope: {b:?}")))
}

const R2_NOTE: &str =
    "helper-rate check uses the constant 1/20, which implies the weaker 1/48 statement; both are reported";

fn gap_sweep(emit: &Emit, t: Topology, grid: usize, regime: Option<RegimeArg>) -> Result<Option<String>> {
    if grid == 0 {
        bail!("--grid must be at least 1");
    }
    let template = validate(t, Memories { m1: 0.0, m2: 0.0 })?;
    let filter = SweepFilter {
        regime: regime.map(|r| if r == RegimeArg::I { Regime::I } else { Regime::II }),
        ..Default::default()
    };
    let s = sweep(&template, grid, filter)?;
    let mut params = topology_json(t);
    params["grid"] = json!(grid);
    params["regime"] = json!(regime.map(|r| if r == RegimeArg::I { "I" } else { "II" }));
    let mut table = Table::new(GapReport::CSV_HEADER);
    for r in &s.reports {
        table.push_joined(&r.csv_row());
    }
    let m = &s.summary;
    table.trailer = vec![
        R2_NOTE.to_string(),
        format!("points={} boundary_points={}", m.points, m.boundary_points),
        format!(
            "theorem_failures={} case_failures={} boundary_case_failures={} envelope_violations={} witnesses_out_of_range={}",
            m.theorem_failures, m.case_failures, m.boundary_case_failures, m.envelope_violations, m.witnesses_out_of_range
        ),
        format!("min_slack_theorem_r1={}", fmt_extreme(m.min_theorem_r1)),
        format!("min_slack_theorem_r2={}", fmt_extreme(m.min_theorem_r2)),
        format!("min_slack_case_r1={}", fmt_extreme(m.min_case_r1)),
        format!("min_slack_case_r2={}", fmt_extreme(m.min_case_r2)),
    ];
    let results = json!({ "note": R2_NOTE, "summary": s.summary, "reports": s.reports });
    emit.emit(&OutputRecord::new("gap-sweep", params, results, None), &table)?;
    let violation = (m.theorem_failures > 0 || m.envelope_violations > 0)
        .then(|| format!("{} theorem failures and {} envelope violations", m.theorem_failures, m.envelope_violations));
    Ok(violation)
}

fn fmt_extreme(x: Option<twotier::gap::SlackExtreme>) -> String {
    x.map(|e| format!("{} at m1={} m2={}", e.slack, e.m1, e.m2)).unwrap_or_else(|| "none".into())
}

fn frontier_table(frontiers: &[&Frontier]) -> Table {
    let mut table = Table::new(Frontier::CSV_HEADER);
    for f in frontiers {
        for row in f.csv_rows() {
            table.push_joined(&row);
        }
    }
    table
}

fn region(
    emit: &Emit,
    t: Topology,
    m: Memories,
    grid: usize,
    scheme: SchemeArg,
    compare: bool,
    fig3: Option<(AxisArg, Option<f64>)>,
) -> Result<Option<String>> {
    let config = validate(t, m)?;
    let mut params = config_json(t, m);
    if let Some((axis, fixed)) = fig3 {
        let fixed = fixed.ok_or_else(|| anyhow!("--fig3 needs --fixed"))?;
        let axis = if axis == AxisArg::Alpha { Axis::Alpha } else { Axis::Beta };
        let rows = fig3_table(&config, axis, fixed)?;
        params["fig3"] = json!(axis);
        params["fixed"] = json!(fixed);
        let mut table = Table::new(ComparisonRow::CSV_HEADER);
        for r in &rows {
            table.push_joined(&r.csv_row());
        }
        emit.emit(&OutputRecord::new("region", params, json!({ "table": rows }), None), &table)?;
        let bad = rows.iter().find(|r| r.r1_hybrid > r.r1_generalized);
        return Ok(bad.map(|r| format!("hybrid above generalized at {}", r.value)));
    }
    if grid < 2 {
        bail!("--grid must be at least 2");
    }
    params["grid"] = json!(grid);
    if compare {
        let h = frontier(&config, FrontierScheme::Hybrid, grid);
        let g = frontier(&config, FrontierScheme::Generalized, grid);
        let forward = dominates(&h, &g);
        let backward = dominates(&g, &h);
        params["compare"] = json!(true);
        let results = json!({
            "hybrid_dominates_generalized": forward,
            "generalized_dominates_hybrid": backward,
            "frontiers": [h, g],
        });
        let mut table = frontier_table(&[&h, &g]);
        table.trailer = vec![
            format!("hybrid_dominates_generalized={}", forward.holds),
            format!("generalized_dominates_hybrid={}", backward.holds),
        ];
        emit.emit(&OutputRecord::new("region", params, results, None), &table)?;
        return Ok((!forward.holds).then(|| format!("generalized point not covered by hybrid: {:?}", forward.witness)));
    }
    let kind = match scheme {
        SchemeArg::Hybrid => FrontierScheme::Hybrid,
        SchemeArg::Generalized => FrontierScheme::Generalized,
        other => bail!("--scheme {} has no share grid; use hybrid or generalized", scheme_name(other)),
    };
    let f = frontier(&config, kind, grid);
    params["scheme"] = json!(kind.name());
    let table = frontier_table(&[&f]);
    emit.emit(&OutputRecord::new("region", params, json!({ "frontier": f }), None), &table)?;
    Ok(None)
}

fn check_all(emit: &Emit) -> Result<Option<String>> {
    let results = check::run_all();
    let mut table = Table::new("criterion,name,pass,detail");
    for r in &results {
        table.push([r.id.to_string(), r.name.to_string(), r.pass.to_string(), r.detail.clone()]);
    }
    let failed: Vec<usize> = results.iter().filter(|r| !r.pass).map(|r| r.id).collect();
    emit.emit(&OutputRecord::new("check-all", json!({}), json!({ "criteria": results }), None), &table)?;
    Ok((!failed.is_empty()).then(|| format!("criteria {failed:?} fail")))
}
