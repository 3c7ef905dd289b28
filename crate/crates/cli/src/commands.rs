use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ncauth::adversary::{self, AdvError};
use ncauth::authcode::{PublicFile, Scheme, SecretFile, SizeReport};
use ncauth::cost::{self, SymbolCost};
use ncauth::filedist::{self, Accounting, DistPlan};
use ncauth::gf::{ExtElem, ExtField, Field, OpCounters};
use ncauth::goodput::{self, SimConfig};
use ncauth::netcode::{self, PropagateOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{load_network, ScenarioConfig};
use crate::CliError;

/// A finished command: its JSON report, a text rendering and any failed checks.
pub struct Output {
    pub json: Value,
    pub text: String,
    pub failures: Vec<String>,
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn field_from(cfg: &ScenarioConfig, seed: u64) -> Result<ExtField, CliError> {
    let f = cfg.field()?;
    ExtField::generate(f.p, f.e, f.l, seed).map_err(config_err)
}

fn write_pretty<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(config_err)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn keygen(cfg: &ScenarioConfig, seed: u64, out_dir: &Path) -> Result<Output, CliError> {
    let scheme = Scheme::new(cfg.scheme()?, field_from(cfg, seed)?).map_err(config_err)?;
    let keys = scheme.keygen(seed);
    fs::create_dir_all(out_dir).map_err(|e| CliError::Config(format!("{}: {e}", out_dir.display())))?;
    let files = [out_dir.join("source_key.json"), out_dir.join("public_points.json"), out_dir.join("verifier_keys.json")];
    write_pretty(&files[0], &SecretFile::new(&scheme, keys.source.clone()))?;
    write_pretty(
        &files[1],
        &PublicFile { field: scheme.field_params().clone(), scheme: scheme.params(), points: keys.points.clone() },
    )?;
    write_pretty(&files[2], &SecretFile::new(&scheme, keys.verifiers.clone()))?;
    let p = scheme.params();
    let names: Vec<String> = files.iter().map(|f| f.display().to_string()).collect();
    let text = format!(
        "source key: {} polynomials x {} coefficients\npublic points: {}\nverifier keys: {} x {} values\nwrote {}\n",
        p.m + 1,
        p.k,
        p.v,
        p.v,
        p.m + 1,
        names.join(", ")
    );
    let json = json!({
        "scheme": p,
        "q": scheme.field().q(),
        "l": scheme.field().degree(),
        "polynomials": p.m + 1,
        "coefficients": p.k,
        "files": names,
    });
    Ok(Output { json, text, failures: Vec::new() })
}

#[derive(Serialize)]
struct CostLine {
    measured: OpCounters,
    expected: OpCounters,
    field_symbols: SymbolCost,
}

impl CostLine {
    fn new(measured: OpCounters, expected: OpCounters, l: usize) -> Self {
        CostLine { measured, expected, field_symbols: SymbolCost::from_ops(measured, l) }
    }
}

pub fn simulate(cfg: &ScenarioConfig, seed: u64) -> Result<Output, CliError> {
    let params = cfg.scheme()?;
    let field = field_from(cfg, seed)?;
    let sim = &cfg.simulate;
    let mut net = cfg.network()?;
    net.check_coeffs(field.base()).map_err(config_err)?;
    if sim.verify_all {
        for i in net.intermediates().to_vec().into_iter().chain(net.destinations().to_vec()) {
            net.set_verifying(i, true);
        }
    }
    if net.verifier_count() > params.v {
        return Err(CliError::Config(format!("network has {} verifying nodes but V = {}", net.verifier_count(), params.v)));
    }
    let scheme = Scheme::new(params, field.clone()).map_err(config_err)?;
    let warnings: Vec<String> = scheme.warnings(net.n(), sim.coalition_edges).iter().map(ToString::to_string).collect();
    let keys = scheme.keygen(seed);
    let messages: Vec<ExtElem> = match &sim.messages {
        Some(m) if m.len() != net.n() => {
            return Err(CliError::Config(format!("{} messages given for n = {}", m.len(), net.n())));
        }
        Some(m) => {
            if let Some(bad) = m.iter().find(|x| x.0 as u64 >= field.order()) {
                return Err(CliError::Config(format!("message {} is outside GF({})", bad.0, field.order())));
            }
            m.clone()
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..net.n()).map(|_| ExtElem(rng.random_range(0..field.order()) as u32)).collect()
        }
    };
    let corrupt = sim
        .corrupt
        .iter()
        .map(|c| net.node_index(&c.node).map(|i| (i, c.mode)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(config_err)?;

    let (sources, tag_ops) = cost::measure_tagging(&scheme, &keys, &messages);
    let opts = PropagateOptions { verify: sim.verify, corrupt: corrupt.clone(), seed };
    let state = netcode::propagate(&net, &scheme, &sources, Some(&keys), &opts).map_err(config_err)?;

    let l = field.degree();
    let mut failures = Vec::new();
    let tag_expected = cost::tag_formula(net.n(), params.k, params.m);
    if tag_ops != tag_expected {
        failures.push(format!("tagging used {tag_ops:?}, expected {tag_expected:?}"));
    }
    let assignment = net.verifier_assignment();
    let mut verify_costs = Vec::new();
    let corrupt_nodes: BTreeSet<usize> = corrupt.iter().map(|c| c.0).collect();
    for &node in net.topo_order() {
        let Some(v) = assignment[node].filter(|_| sim.verify && !corrupt_nodes.contains(&node)) else {
            continue;
        };
        let ins = net.in_edges(node);
        let pkts: Vec<_> = ins.iter().map(|&e| &state.packets[e]).collect();
        let (verdicts, ops) = cost::measure_verification(&scheme, &keys, v, &pkts);
        let expected = cost::verify_formula(params.k, params.m, ins.len());
        if ops != expected {
            failures.push(format!("verification at {} used {ops:?}, expected {expected:?}", net.nodes()[node].id));
        }
        let logged: Vec<bool> = state.log.iter().filter(|r| r.node == node).map(|r| r.accepted).collect();
        if logged != verdicts {
            failures.push(format!("verdicts at {} are not reproducible", net.nodes()[node].id));
        }
        verify_costs.push(json!({
            "node": net.nodes()[node].id,
            "verifier": v,
            "h": ins.len(),
            "cost": CostLine::new(ops, expected, l),
        }));
    }

    let edge_id = |e: usize| net.edges()[e].id.clone();
    let log: Vec<Value> = state
        .log
        .iter()
        .map(|r| {
            json!({
                "node": net.nodes()[r.node].id,
                "edge": edge_id(r.edge),
                "verifier": r.verifier,
                "accepted": r.accepted,
                "zero_tracking": r.zero_tracking,
            })
        })
        .collect();
    let corrupted: Vec<String> = (0..net.edges().len()).filter(|&e| state.corrupted[e]).map(edge_id).collect();
    let dropped: Vec<String> = (0..net.edges().len()).filter(|&e| state.dropped[e]).map(edge_id).collect();
    let mut dests = Vec::new();
    let mut text = String::new();
    let _ = writeln!(text, "field GF({}^{}), (k, V, M) = ({}, {}, {}), n = {}", field.q(), l, params.k, params.v, params.m, net.n());
    for w in &warnings {
        let _ = writeln!(text, "warning: {w}");
    }
    let _ = writeln!(text, "messages: {:?}", messages.iter().map(|m| m.0).collect::<Vec<_>>());
    for r in &state.log {
        let _ = writeln!(
            text,
            "verify {} at {} (key {}): {}",
            edge_id(r.edge),
            net.nodes()[r.node].id,
            r.verifier,
            if r.accepted { "accept" } else { "reject" }
        );
    }
    if !corrupted.is_empty() {
        let _ = writeln!(text, "corrupted edges: {}", corrupted.join(" "));
    }
    for &d in net.destinations() {
        let id = net.nodes()[d].id.clone();
        match netcode::decode(&net, &field, d, &state) {
            Ok(out) => {
                let ok = out == messages;
                if corrupt.is_empty() && !ok {
                    failures.push(format!("{id} decoded the wrong messages"));
                }
                let _ = writeln!(text, "{id}: decoded {:?} ({})", out.iter().map(|m| m.0).collect::<Vec<_>>(), if ok { "matches source" } else { "differs from source" });
                dests.push(json!({"node": id, "decoded": out, "matches_source": ok}));
            }
            Err(e) => {
                if corrupt.is_empty() {
                    failures.push(format!("{id} could not decode: {e}"));
                }
                let _ = writeln!(text, "{id}: decode failed, {e}");
                dests.push(json!({"node": id, "decoded": Value::Null, "error": e.to_string(), "matches_source": false}));
            }
        }
    }
    if corrupt.is_empty() && state.rejections().next().is_some() {
        failures.push("an honest packet was rejected".into());
    }
    let tag_line = CostLine::new(tag_ops, tag_expected, l);
    let _ = writeln!(
        text,
        "tagging: {} Frobenius, {} mult (GF(q): {} exp, {} mult)",
        tag_ops.ext_frobenius, tag_ops.ext_mults, tag_line.field_symbols.exp, tag_line.field_symbols.mult
    );
    for v in &verify_costs {
        let c = &v["cost"];
        let _ = writeln!(
            text,
            "verification at {} (h = {}): {} Frobenius, {} exp, {} mult (GF(q): {} exp, {} mult)",
            v["node"].as_str().unwrap_or_default(),
            v["h"],
            c["measured"]["ext_frobenius"],
            c["measured"]["ext_exponentiations"],
            c["measured"]["ext_mults"],
            c["field_symbols"]["exp"],
            c["field_symbols"]["mult"]
        );
    }
    let json = json!({
        "field": {"p": field.params().p, "e": field.params().e, "l": l, "q": field.q()},
        "scheme": params,
        "n": net.n(),
        "warnings": warnings,
        "messages": messages,
        "verification_log": log,
        "corrupted_edges": corrupted,
        "dropped_edges": dropped,
        "destinations": dests,
        "costs": {"tagging": tag_line, "verification": verify_costs},
        "sizes": SizeReport::new(params, l, net.n()),
    });
    Ok(Output { json, text, failures })
}

pub fn attack(cfg: &ScenarioConfig, seed: u64) -> Result<Output, CliError> {
    let params = cfg.attack.clone().ok_or_else(|| CliError::Config("config has no \"attack\" section".into()))?;
    let cap = adversary::enum_cap();
    let outcome = adversary::run_substitution_experiment(&params, seed, cap).map_err(|e| match e {
        AdvError::CapExceeded { .. } => CliError::Config(format!("{e}; raise {} to allow it", adversary::MAX_ENUM_ENV)),
        e => config_err(e),
    })?;
    let mut warnings = Vec::new();
    let h_total = params.h * params.observations;
    if h_total > params.m {
        warnings.push(format!("coalition in-edges H = {h_total} exceed M = {}; substitution security is not guaranteed", params.m));
    }
    if params.coalition_keys >= params.k {
        warnings.push(format!("coalition holds K = {} >= k = {} keys", params.coalition_keys, params.k));
    }
    let order = (params.p as u128).pow(params.e * params.l);
    let report = outcome.report();
    let mut text = String::new();
    for w in &warnings {
        let _ = writeln!(text, "warning: {w}");
    }
    let _ = writeln!(text, "candidate keys: {}", report.candidate_count);
    if let Some(p) = &report.exact_probability {
        let _ = writeln!(text, "success probability: {p}");
    }
    let _ = writeln!(text, "successes: {}/{} ({:.4})", report.successes, report.trials, report.frequency);
    let _ = writeln!(text, "bound 1/q^l: 1/{order}");
    let json = json!({"report": report, "bound": format!("1/{order}"), "warnings": warnings});
    Ok(Output { json, text, failures: Vec::new() })
}

pub fn goodput(cfg: &ScenarioConfig, seed: u64, topology: &str, simulate: bool, csv: bool) -> Result<Output, CliError> {
    if topology == "topo_c" {
        let r = goodput::topo_c_reference();
        let mut text = format!("unverified reference data, n_e_D = {}\n{:>4} {:>8} {:>8} {:>8} {:>8}\n", r.n_e_d, "r_c", "min", "max", "avg", "gain");
        for row in &r.rows {
            let _ = writeln!(text, "{:>4} {:>8} {:>8} {:>8} {:>8}", row.r_c, row.min, row.max, row.avg, row.gain);
        }
        return Ok(Output { json: json!({"topology": topology, "reference": r}), text, failures: Vec::new() });
    }
    let net = load_network(topology, &cfg.base_dir)?;
    let rows = goodput::goodput_table(&net).map_err(config_err)?;
    let mut text = if csv { goodput::table_csv(&rows) } else { goodput::table_text(&rows) };
    let mut failures = Vec::new();
    let mut json = json!({"topology": topology, "n_e_D": goodput::dest_edge_count(&net), "rows": rows});
    if simulate {
        let (mut placements, mut exact, mut full) = (0usize, 0usize, 0usize);
        for r_c in 1..=net.intermediates().len() {
            for p in goodput::combinations(net.intermediates(), r_c) {
                let s = seed.wrapping_add(placements as u64);
                placements += 1;
                let analytic = goodput::corrupted_dest_edges(&net, &p);
                let off = goodput::simulate_goodput(&net, &p, false, s, SimConfig::default()).map_err(config_err)?;
                let on = goodput::simulate_goodput(&net, &p, true, s, SimConfig::default()).map_err(config_err)?;
                let ids: Vec<&str> = p.iter().map(|&i| net.nodes()[i].id.as_str()).collect();
                if off.corrupted_dest_edges == analytic {
                    exact += 1;
                } else if !off.corrupted_dest_edges.is_subset(&analytic) {
                    failures.push(format!("placement {ids:?}: simulated corruption outside the analytic closure"));
                }
                if on.report.goodput == goodput::Fraction::from_integer(1) {
                    full += 1;
                } else {
                    failures.push(format!("placement {ids:?}: goodput {} with verification on", on.report.goodput));
                }
            }
        }
        let _ = writeln!(text, "simulated placements: {placements}, matching the closure: {exact}, full goodput with verification: {full}");
        json["simulation"] = json!({"placements": placements, "matching_closure": exact, "full_goodput_with_verification": full});
    }
    Ok(Output { json, text, failures })
}

pub const TABLE_SIZES: [&str; 4] = ["18M", "72M", "1.8G", "4.05G"];

pub fn filedist(sizes: &[String], accounting: Accounting) -> Result<Output, CliError> {
    let sizes: Vec<String> = if sizes.is_empty() { TABLE_SIZES.iter().map(|s| s.to_string()).collect() } else { sizes.to_vec() };
    let plans: Vec<DistPlan> = sizes
        .iter()
        .map(|s| filedist::parse_size(s).and_then(|b| filedist::plan_with(b, accounting)))
        .collect::<Result<_, _>>()
        .map_err(config_err)?;
    let mut text = filedist::table_header();
    text.push('\n');
    for p in &plans {
        let _ = writeln!(text, "{p}");
    }
    let plans = serde_json::to_value(&plans).map_err(config_err)?;
    Ok(Output { json: json!({"accounting": accounting, "plans": plans}), text, failures: Vec::new() })
}
