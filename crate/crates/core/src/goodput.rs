//! Multicast goodput under pollution, with and without in-network
//! verification.
//!
//! Goodput is tracked as the exact fraction `1 - n_pc / n_e_D` of the
//! session rate, where `n_e_D` counts the in-edges of all destinations and
//! `n_pc` the corrupted ones. Corruption spreads by full propagation: a
//! compromised relay taints all of its out-edges, and any node with a
//! tainted in-edge taints all of its out-edges.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::authcode::{AuthError, Packet, Scheme, SchemeParams};
use crate::gf::{ExtElem, ExtField, GfError};
use crate::netcode::{self, CorruptMode, NetError, Network, PropagateOptions};
use crate::topologies;

pub type Fraction = Ratio<u64>;

#[derive(Debug, Error)]
pub enum GoodputError {
    #[error("topology has no destination in-edges")]
    NoDestinationEdges,
    #[error("r_c = {r_c} is outside 1..={r}")]
    BadCount { r_c: usize, r: usize },
    #[error("placement node {0:?} is not an intermediate node")]
    NotIntermediate(String),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Auth(#[from] AuthError),
    #[error(transparent)]
    Field(#[from] GfError),
}

/// `n_e_D`: total in-degree of the destinations.
pub fn dest_edge_count(net: &Network) -> usize {
    net.destinations().iter().map(|&d| net.in_edges(d).len()).sum()
}

fn check_placement(net: &Network, placement: &[usize]) -> Result<(), GoodputError> {
    match placement.iter().find(|p| !net.intermediates().contains(p)) {
        Some(&bad) => Err(GoodputError::NotIntermediate(net.nodes()[bad].id.clone())),
        None => Ok(()),
    }
}

/// Destination in-edges reached by corruption from `placement`.
pub fn corrupted_dest_edges(net: &Network, placement: &[usize]) -> BTreeSet<usize> {
    let mut tainted = vec![false; net.edges().len()];
    for &node in net.topo_order() {
        let emits = placement.contains(&node) || net.in_edges(node).iter().any(|&e| tainted[e]);
        if emits {
            for &e in net.out_edges(node) {
                tainted[e] = true;
            }
        }
    }
    net.destinations().iter().flat_map(|&d| net.in_edges(d).iter().copied()).filter(|&e| tainted[e]).collect()
}

/// Goodput of one placement.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PlacementReport {
    pub placement: Vec<String>,
    pub corrupted_dest_edges: usize,
    pub dest_edges: usize,
    #[serde(serialize_with = "ser_fraction")]
    pub goodput: Fraction,
    /// `(destination, 1 - corrupted in-edges / in-degree)`.
    #[serde(serialize_with = "ser_fraction_pairs")]
    pub per_destination: Vec<(String, Fraction)>,
}

fn ser_fraction<S: serde::Serializer>(f: &Fraction, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&f.to_string())
}

fn ser_fraction_pairs<S: serde::Serializer>(v: &[(String, Fraction)], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeMap;
    let mut map = s.serialize_map(Some(v.len()))?;
    for (k, f) in v {
        map.serialize_entry(k, &f.to_string())?;
    }
    map.end()
}

fn report_from_edges(net: &Network, placement: &[usize], corrupted: &BTreeSet<usize>) -> Result<PlacementReport, GoodputError> {
    let total = dest_edge_count(net);
    if total == 0 {
        return Err(GoodputError::NoDestinationEdges);
    }
    let per_destination = net
        .destinations()
        .iter()
        .map(|&d| {
            let ins = net.in_edges(d);
            let bad = ins.iter().filter(|e| corrupted.contains(e)).count() as u64;
            let frac = if ins.is_empty() { Fraction::from_integer(1) } else { Fraction::from_integer(1) - Fraction::new(bad, ins.len() as u64) };
            (net.nodes()[d].id.clone(), frac)
        })
        .collect();
    Ok(PlacementReport {
        placement: placement.iter().map(|&p| net.nodes()[p].id.clone()).collect(),
        corrupted_dest_edges: corrupted.len(),
        dest_edges: total,
        goodput: Fraction::from_integer(1) - Fraction::new(corrupted.len() as u64, total as u64),
        per_destination,
    })
}

/// Analytic goodput of `placement` without the scheme.
pub fn placement_goodput(net: &Network, placement: &[usize]) -> Result<PlacementReport, GoodputError> {
    check_placement(net, placement)?;
    report_from_edges(net, placement, &corrupted_dest_edges(net, placement))
}

/// All `r_c`-subsets of `items`, in lexicographic order of positions.
pub fn combinations<T: Copy>(items: &[T], r_c: usize) -> Vec<Vec<T>> {
    fn rec<T: Copy>(items: &[T], r_c: usize, start: usize, cur: &mut Vec<T>, out: &mut Vec<Vec<T>>) {
        if cur.len() == r_c {
            out.push(cur.clone());
            return;
        }
        for i in start..items.len() {
            cur.push(items[i]);
            rec(items, r_c, i + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(items, r_c, 0, &mut Vec::with_capacity(r_c), &mut out);
    out
}

/// Min, max and mean goodput over all placements of `r_c` compromised relays.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GoodputRow {
    pub n: usize,
    pub r_c: usize,
    /// Number of placements, `C(r, r_c)`.
    pub placements: usize,
    #[serde(serialize_with = "ser_fraction")]
    pub min: Fraction,
    #[serde(serialize_with = "ser_fraction")]
    pub max: Fraction,
    #[serde(serialize_with = "ser_fraction")]
    pub avg: Fraction,
    /// `1 - avg`: what the scheme recovers, since with it goodput is the full rate.
    #[serde(serialize_with = "ser_fraction")]
    pub gain: Fraction,
}

pub fn average_goodput(net: &Network, r_c: usize) -> Result<GoodputRow, GoodputError> {
    let r = net.intermediates().len();
    if r_c == 0 || r_c > r {
        return Err(GoodputError::BadCount { r_c, r });
    }
    let reports: Vec<PlacementReport> =
        combinations(net.intermediates(), r_c).iter().map(|p| placement_goodput(net, p)).collect::<Result<_, _>>()?;
    let values: Vec<Fraction> = reports.iter().map(|r| r.goodput).collect();
    let sum = values.iter().fold(Fraction::from_integer(0), |a, &b| a + b);
    let avg = sum / Fraction::from_integer(values.len() as u64);
    Ok(GoodputRow {
        n: net.n(),
        r_c,
        placements: values.len(),
        min: *values.iter().min().expect("at least one placement"),
        max: *values.iter().max().expect("at least one placement"),
        avg,
        gain: Fraction::from_integer(1) - avg,
    })
}

/// Rows for `r_c = 1..=r`.
pub fn goodput_table(net: &Network) -> Result<Vec<GoodputRow>, GoodputError> {
    (1..=net.intermediates().len()).map(|r_c| average_goodput(net, r_c)).collect()
}

/// CSV with header `n,r_c,min,max,avg,gain`.
pub fn table_csv(rows: &[GoodputRow]) -> String {
    let mut out = String::from("n,r_c,min,max,avg,gain\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{},{}", r.n, r.r_c, r.min, r.max, r.avg, r.gain);
    }
    out
}

/// Aligned text table, fractions of the session rate R.
pub fn table_text(rows: &[GoodputRow]) -> String {
    let mut out = format!("{:>3} {:>4} {:>8} {:>8} {:>8} {:>8}\n", "n", "r_c", "min", "max", "avg", "gain");
    for r in rows {
        let _ = writeln!(
            out,
            "{:>3} {:>4} {:>8} {:>8} {:>8} {:>8}",
            r.n,
            r.r_c,
            r.min.to_string(),
            r.max.to_string(),
            r.avg.to_string(),
            format!("{:.2}", *r.gain.numer() as f64 / *r.gain.denom() as f64)
        );
    }
    out
}

/// Field and code used by [`simulate_goodput`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub p: u64,
    pub l: u32,
    pub k: usize,
    pub m: usize,
}

impl Default for SimConfig {
    /// GF(2^16) keeps the chance that a tampered packet passes a check at 2^-16.
    fn default() -> Self {
        SimConfig { p: 2, l: 16, k: 2, m: 2 }
    }
}

/// What actually reached the destinations in a simulated session.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SimulatedGoodput {
    pub scheme_on: bool,
    /// Destination in-edges carrying tampered content that were not dropped.
    pub corrupted_dest_edges: BTreeSet<usize>,
    /// Destination in-edges dropped by verification.
    pub dropped_dest_edges: BTreeSet<usize>,
    pub report: PlacementReport,
}

/// Runs one session through `net` with `placement` tampering and, when
/// `scheme_on`, every relay and destination verifying.
///
/// The network's own coefficients are used when assigned; otherwise they are
/// drawn nonzero from the seed.
pub fn simulate_goodput(net: &Network, placement: &[usize], scheme_on: bool, seed: u64, cfg: SimConfig) -> Result<SimulatedGoodput, GoodputError> {
    check_placement(net, placement)?;
    let field = ExtField::generate(cfg.p, 1, cfg.l, seed)?;
    let mut net = net.clone();
    if net.check_coeffs(field.base()).is_err() {
        net = net.random_nonzero_coeffs(field.base(), seed);
    }
    if scheme_on {
        for i in net.intermediates().to_vec().into_iter().chain(net.destinations().to_vec()) {
            net.set_verifying(i, true);
        }
    }
    let scheme = Scheme::new(SchemeParams { k: cfg.k, v: net.verifier_count().max(1), m: cfg.m }, field.clone())?;
    let keys = scheme.keygen(seed);
    let sources: Vec<Packet> = (0..net.n()).map(|i| scheme.source_packet(&keys.source, ExtElem(i as u32 + 1))).collect();
    let opts = PropagateOptions {
        verify: scheme_on,
        corrupt: placement.iter().map(|&p| (p, CorruptMode::RandomData)).collect(),
        seed: seed ^ 0x9e37_79b9_7f4a_7c15,
    };
    let state = netcode::propagate(&net, &scheme, &sources, Some(&keys), &opts)?;
    let dest_in: Vec<usize> = net.destinations().iter().flat_map(|&d| net.in_edges(d).iter().copied()).collect();
    let corrupted: BTreeSet<usize> = dest_in.iter().copied().filter(|&e| state.corrupted[e] && !state.dropped[e]).collect();
    let dropped: BTreeSet<usize> = dest_in.iter().copied().filter(|&e| state.dropped[e]).collect();
    let report = report_from_edges(&net, placement, &corrupted)?;
    Ok(SimulatedGoodput { scheme_on, corrupted_dest_edges: corrupted, dropped_dest_edges: dropped, report })
}

/// One row of a published table kept for reference.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceRow {
    pub r_c: usize,
    pub min: String,
    pub max: String,
    pub avg: String,
    pub gain: String,
}

/// Published goodput values for a topology whose graph is not available.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceTable {
    pub unverified: bool,
    #[serde(rename = "n_e_D")]
    pub n_e_d: usize,
    pub rows: Vec<ReferenceRow>,
}

/// Topology c's table, shipped as unverified reference data.
pub fn topo_c_reference() -> ReferenceTable {
    #[derive(Deserialize)]
    struct Wrapper {
        reference_table: ReferenceTable,
    }
    serde_json::from_str::<Wrapper>(topologies::TOPO_C).expect("built-in file is valid").reference_table
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(a: u64, b: u64) -> Fraction {
        Fraction::new(a, b)
    }

    fn topo(text: &str) -> Network {
        Network::from_json(text).unwrap()
    }

    fn ids(net: &Network, names: &[&str]) -> Vec<usize> {
        names.iter().map(|n| net.node_index(n).unwrap()).collect()
    }

    #[test]
    fn empty_placement_corrupts_nothing() {
        let net = topo(topologies::TOPO_B);
        assert!(corrupted_dest_edges(&net, &[]).is_empty());
        assert_eq!(placement_goodput(&net, &[]).unwrap().goodput, f(1, 1));
    }

    #[test]
    fn topology_b_single_placements() {
        let net = topo(topologies::TOPO_B);
        let r3 = placement_goodput(&net, &ids(&net, &["R3"])).unwrap();
        assert_eq!(r3.corrupted_dest_edges, 2);
        assert_eq!(r3.goodput, f(1, 2));
        assert!(r3.per_destination.iter().all(|(_, g)| *g == f(1, 2)));
        let r1 = placement_goodput(&net, &ids(&net, &["R1"])).unwrap();
        assert_eq!(r1.goodput, f(1, 4));
        let per: Vec<Fraction> = r1.per_destination.iter().map(|p| p.1).collect();
        assert_eq!(per, vec![f(0, 1), f(1, 2)]);
        let both = placement_goodput(&net, &ids(&net, &["R1", "R2"])).unwrap();
        assert_eq!(both.goodput, f(0, 1));
        assert_eq!(both.corrupted_dest_edges, 4);
    }

    #[test]
    fn topology_b_table() {
        let rows = goodput_table(&topo(topologies::TOPO_B)).unwrap();
        let got: Vec<_> = rows.iter().map(|r| (r.min, r.max, r.avg, r.gain)).collect();
        assert_eq!(
            got,
            vec![
                (f(1, 4), f(1, 2), f(1, 3), f(2, 3)),
                (f(0, 1), f(1, 4), f(1, 6), f(5, 6)),
                (f(0, 1), f(0, 1), f(0, 1), f(1, 1)),
            ]
        );
    }

    #[test]
    fn topology_a_table() {
        let rows = goodput_table(&topo(topologies::TOPO_A_TABLE)).unwrap();
        assert_eq!((rows[0].min, rows[0].max, rows[0].avg, rows[0].gain), (f(1, 3), f(2, 3), f(1, 2), f(1, 2)));
        assert_eq!((rows[1].min, rows[1].max, rows[1].avg, rows[1].gain), (f(0, 1), f(0, 1), f(0, 1), f(1, 1)));
    }

    #[test]
    fn figure_one_graph_differs_from_the_table() {
        // With the R1 -> R2 edge, compromising R1 taints everything.
        let rows = goodput_table(&topo(topologies::TOPO_A_FIG1)).unwrap();
        assert_eq!((rows[0].min, rows[0].max), (f(0, 1), f(1, 3)));
    }

    #[test]
    fn averages_are_exact_sums() {
        for text in [topologies::TOPO_A_FIG1, topologies::TOPO_A_TABLE, topologies::TOPO_B] {
            let net = topo(text);
            let rows = goodput_table(&net).unwrap();
            for row in &rows {
                let sum = combinations(net.intermediates(), row.r_c)
                    .iter()
                    .map(|p| placement_goodput(&net, p).unwrap().goodput)
                    .fold(f(0, 1), |a, b| a + b);
                assert_eq!(sum, row.avg * Fraction::from_integer(row.placements as u64));
                assert!(row.min <= row.avg && row.avg <= row.max);
            }
            assert!(rows.windows(2).all(|w| w[0].gain <= w[1].gain));
            assert_eq!(rows.last().unwrap().avg, f(0, 1));
        }
    }

    #[test]
    fn combination_counts() {
        let items: Vec<usize> = (0..6).collect();
        let counts: Vec<usize> = (0..=6).map(|r| combinations(&items, r).len()).collect();
        assert_eq!(counts, vec![1, 6, 15, 20, 15, 6, 1]);
    }

    #[test]
    fn bad_inputs() {
        let net = topo(topologies::TOPO_B);
        assert!(matches!(average_goodput(&net, 0), Err(GoodputError::BadCount { .. })));
        assert!(matches!(average_goodput(&net, 4), Err(GoodputError::BadCount { .. })));
        assert!(matches!(placement_goodput(&net, &ids(&net, &["D1"])), Err(GoodputError::NotIntermediate(_))));
    }

    #[test]
    fn zero_local_coefficients_stop_propagation() {
        // In the identity configuration e7 carries only e3, so R1 cannot reach it.
        let net = topo(topologies::TOPO_A_FIG1);
        let p = ids(&net, &["R1"]);
        let sim = simulate_goodput(&net, &p, false, 3, SimConfig::default()).unwrap();
        assert!(sim.corrupted_dest_edges.is_subset(&corrupted_dest_edges(&net, &p)));
        assert_eq!(sim.corrupted_dest_edges.len(), 2);
        assert_eq!(placement_goodput(&net, &p).unwrap().corrupted_dest_edges, 3);
    }

    #[test]
    fn simulation_matches_analysis() {
        for text in [topologies::TOPO_A_TABLE, topologies::TOPO_B] {
            let net = topo(text);
            for r_c in 0..=net.intermediates().len() {
                for (i, p) in combinations(net.intermediates(), r_c).iter().enumerate() {
                    let off = simulate_goodput(&net, p, false, i as u64, SimConfig::default()).unwrap();
                    assert_eq!(off.corrupted_dest_edges, corrupted_dest_edges(&net, p));
                    assert_eq!(off.report.goodput, placement_goodput(&net, p).unwrap().goodput);
                    let on = simulate_goodput(&net, p, true, i as u64, SimConfig::default()).unwrap();
                    assert_eq!(on.report.goodput, f(1, 1));
                    assert!(on.corrupted_dest_edges.is_empty());
                }
            }
        }
    }

    #[test]
    fn text_and_csv_layout() {
        let rows = goodput_table(&topo(topologies::TOPO_B)).unwrap();
        let csv = table_csv(&rows);
        assert_eq!(csv.lines().next(), Some("n,r_c,min,max,avg,gain"));
        assert_eq!(csv.lines().nth(1), Some("2,1,1/4,1/2,1/3,2/3"));
        let text = table_text(&rows);
        assert!(text.lines().nth(2).unwrap().contains("1/6"));
        assert!(text.lines().nth(1).unwrap().ends_with("0.67"));
    }

    #[test]
    fn topology_c_reference_data() {
        let t = topo_c_reference();
        assert!(t.unverified);
        assert_eq!(t.n_e_d, 6);
        let avg: Vec<&str> = t.rows.iter().map(|r| r.avg.as_str()).collect();
        assert_eq!(avg, ["4/9", "4/15", "11/60", "1/9", "1/18", "0"]);
        assert!(Network::from_json(topologies::TOPO_C).is_err());
    }
}
