//! Acyclic multicast networks with GF(q) local encoding coefficients:
//! global encoding vectors, packet propagation with optional per-edge
//! verification and injected corruption, and destination decoding.

use std::collections::{BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::authcode::{KeyMaterial, Packet, Scheme};
use crate::gf::{BaseElem, BaseField, ExtElem, ExtField, Field};
use crate::linalg::{self, Matrix};

#[derive(Debug, Error)]
pub enum NetError {
    #[error("invalid network JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("edge {edge:?} refers to unknown node {node:?}")]
    UnknownNode { edge: String, node: String },
    #[error("unknown node {0:?}")]
    NoSuchNode(String),
    #[error("network must have exactly one source, found {0}")]
    SourceCount(usize),
    #[error("edge {0:?} enters the source")]
    IntoSource(String),
    #[error("edge {0:?} leaves a destination")]
    FromDestination(String),
    #[error("network contains a cycle")]
    Cycle,
    #[error("edge {edge:?} has {got} local coefficients, expected {expected}")]
    CoeffLength { edge: String, expected: usize, got: usize },
    #[error("edge {0:?} has no local coefficients assigned")]
    MissingCoeffs(String),
    #[error("edge {edge:?} has coefficient {value}, outside GF({q})")]
    CoeffRange { edge: String, value: u32, q: u64 },
    #[error("no verifier key for verifying node {0:?}")]
    MissingVerifierKey(String),
    #[error("expected {expected} source packets, got {got}")]
    PacketCount { expected: usize, got: usize },
    #[error("could not draw a decodable network after {0} attempts")]
    NotDecodable(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Source,
    Intermediate,
    Destination,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: String,
    pub role: Role,
    #[serde(default)]
    pub verifying: bool,
}

/// One edge as written in a network file. An empty `coeffs` list means the
/// local coefficients are not assigned yet.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeSpec {
    pub id: String,
    pub from: String,
    pub to: String,
    #[serde(default)]
    pub coeffs: Vec<BaseElem>,
}

/// JSON network description.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkFile {
    pub n: usize,
    pub nodes: Vec<NodeSpec>,
    pub edges: Vec<EdgeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub destinations: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intermediates: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Edge {
    pub id: String,
    pub from: usize,
    pub to: usize,
    /// For a source edge, its global vector (length `n`); otherwise one
    /// coefficient per in-edge of `from`, in file order.
    pub coeffs: Vec<BaseElem>,
}

/// A validated acyclic network with a single source.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Network {
    n: usize,
    nodes: Vec<NodeSpec>,
    edges: Vec<Edge>,
    source: usize,
    in_edges: Vec<Vec<usize>>,
    out_edges: Vec<Vec<usize>>,
    order: Vec<usize>,
    destinations: Vec<usize>,
    intermediates: Vec<usize>,
}

impl Network {
    pub fn from_json(text: &str) -> Result<Self, NetError> {
        Self::from_file(serde_json::from_str(text)?)
    }

    pub fn from_file(file: NetworkFile) -> Result<Self, NetError> {
        let mut index = HashMap::new();
        for (i, node) in file.nodes.iter().enumerate() {
            if index.insert(node.id.clone(), i).is_some() {
                return Err(NetError::DuplicateId(node.id.clone()));
            }
        }
        let sources: Vec<usize> = (0..file.nodes.len()).filter(|&i| file.nodes[i].role == Role::Source).collect();
        if sources.len() != 1 {
            return Err(NetError::SourceCount(sources.len()));
        }
        let source = sources[0];
        let mut seen = BTreeSet::new();
        let mut edges = Vec::with_capacity(file.edges.len());
        for e in &file.edges {
            if !seen.insert(e.id.clone()) {
                return Err(NetError::DuplicateId(e.id.clone()));
            }
            let lookup = |id: &String| {
                index.get(id).copied().ok_or_else(|| NetError::UnknownNode { edge: e.id.clone(), node: id.clone() })
            };
            let (from, to) = (lookup(&e.from)?, lookup(&e.to)?);
            if to == source {
                return Err(NetError::IntoSource(e.id.clone()));
            }
            if file.nodes[from].role == Role::Destination {
                return Err(NetError::FromDestination(e.id.clone()));
            }
            edges.push(Edge { id: e.id.clone(), from, to, coeffs: e.coeffs.clone() });
        }
        let count = file.nodes.len();
        let mut in_edges = vec![Vec::new(); count];
        let mut out_edges = vec![Vec::new(); count];
        for (i, e) in edges.iter().enumerate() {
            in_edges[e.to].push(i);
            out_edges[e.from].push(i);
        }
        let order = topo_order(count, &edges, &in_edges, &out_edges)?;
        let pick = |ids: &Option<Vec<String>>, role: Role| -> Result<Vec<usize>, NetError> {
            match ids {
                Some(list) => {
                    list.iter().map(|id| index.get(id).copied().ok_or_else(|| NetError::NoSuchNode(id.clone()))).collect()
                }
                None => Ok((0..count).filter(|&i| file.nodes[i].role == role).collect()),
            }
        };
        let destinations = pick(&file.destinations, Role::Destination)?;
        let intermediates = pick(&file.intermediates, Role::Intermediate)?;
        let net = Network { n: file.n, nodes: file.nodes, edges, source, in_edges, out_edges, order, destinations, intermediates };
        for i in 0..net.edges.len() {
            let e = &net.edges[i];
            if !e.coeffs.is_empty() && e.coeffs.len() != net.coeff_len(i) {
                return Err(NetError::CoeffLength { edge: e.id.clone(), expected: net.coeff_len(i), got: e.coeffs.len() });
            }
        }
        Ok(net)
    }

    pub fn to_file(&self) -> NetworkFile {
        let id = |i: usize| self.nodes[i].id.clone();
        NetworkFile {
            n: self.n,
            nodes: self.nodes.clone(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeSpec { id: e.id.clone(), from: id(e.from), to: id(e.to), coeffs: e.coeffs.clone() })
                .collect(),
            destinations: Some(self.destinations.iter().map(|&d| id(d)).collect()),
            intermediates: Some(self.intermediates.iter().map(|&r| id(r)).collect()),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nodes(&self) -> &[NodeSpec] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn source(&self) -> usize {
        self.source
    }

    pub fn in_edges(&self, node: usize) -> &[usize] {
        &self.in_edges[node]
    }

    pub fn out_edges(&self, node: usize) -> &[usize] {
        &self.out_edges[node]
    }

    /// Nodes in topological order; ties broken by file position.
    pub fn topo_order(&self) -> &[usize] {
        &self.order
    }

    pub fn destinations(&self) -> &[usize] {
        &self.destinations
    }

    pub fn intermediates(&self) -> &[usize] {
        &self.intermediates
    }

    pub fn node_index(&self, id: &str) -> Result<usize, NetError> {
        self.nodes.iter().position(|n| n.id == id).ok_or_else(|| NetError::NoSuchNode(id.to_string()))
    }

    pub fn edge_index(&self, id: &str) -> Option<usize> {
        self.edges.iter().position(|e| e.id == id)
    }

    pub fn is_source_edge(&self, edge: usize) -> bool {
        self.edges[edge].from == self.source
    }

    /// Required local coefficient count for `edge`.
    pub fn coeff_len(&self, edge: usize) -> usize {
        if self.is_source_edge(edge) {
            self.n
        } else {
            self.in_edges[self.edges[edge].from].len()
        }
    }

    pub fn set_verifying(&mut self, node: usize, verifying: bool) {
        self.nodes[node].verifying = verifying;
    }

    /// Verifier index (1-based) of each verifying node, numbered in file order.
    pub fn verifier_assignment(&self) -> Vec<Option<usize>> {
        let mut next = 0;
        self.nodes
            .iter()
            .map(|n| {
                n.verifying.then(|| {
                    next += 1;
                    next
                })
            })
            .collect()
    }

    pub fn verifier_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.verifying).count()
    }

    /// Checks that every coefficient is assigned and lies in `field`.
    pub fn check_coeffs(&self, field: &BaseField) -> Result<(), NetError> {
        let q = field.order();
        for (i, e) in self.edges.iter().enumerate() {
            if e.coeffs.is_empty() && self.coeff_len(i) > 0 {
                return Err(NetError::MissingCoeffs(e.id.clone()));
            }
            if let Some(c) = e.coeffs.iter().find(|c| c.0 as u64 >= q) {
                return Err(NetError::CoeffRange { edge: e.id.clone(), value: c.0, q });
            }
        }
        Ok(())
    }

    /// Global encoding vector of every edge, by forward induction.
    pub fn global_vectors(&self, field: &BaseField) -> Result<Vec<Vec<BaseElem>>, NetError> {
        self.check_coeffs(field)?;
        let mut g: Vec<Vec<BaseElem>> = vec![Vec::new(); self.edges.len()];
        for &node in &self.order {
            for &e in &self.out_edges[node] {
                g[e] = if node == self.source {
                    self.edges[e].coeffs.clone()
                } else {
                    let mut acc = vec![BaseElem::ZERO; self.n];
                    for (&c, &inc) in self.edges[e].coeffs.iter().zip(&self.in_edges[node]) {
                        for (a, &x) in acc.iter_mut().zip(&g[inc]) {
                            *a = field.add(*a, field.mul(c, x));
                        }
                    }
                    acc
                };
            }
        }
        Ok(g)
    }

    /// Rows are the global vectors of `dest`'s in-edges.
    pub fn transfer_matrix(&self, global: &[Vec<BaseElem>], dest: usize) -> Matrix<BaseElem> {
        Matrix::from_fn(self.in_edges[dest].len(), self.n, |i, j| global[self.in_edges[dest][i]][j])
    }

    /// `true` for each destination whose transfer matrix has rank `n`.
    pub fn check_decodability(&self, field: &BaseField) -> Result<Vec<bool>, NetError> {
        let g = self.global_vectors(field)?;
        Ok(self
            .destinations
            .iter()
            .map(|&d| {
                let t = self.transfer_matrix(&g, d);
                t.rows() >= self.n && linalg::rank(field, &t) == self.n
            })
            .collect())
    }

    /// Copy with every local coefficient drawn uniformly from GF(q).
    pub fn random_coeffs(&self, field: &BaseField, seed: u64) -> Network {
        self.draw_coeffs(field, seed, false)
    }

    /// Copy with every local coefficient drawn uniformly from GF(q) minus zero.
    pub fn random_nonzero_coeffs(&self, field: &BaseField, seed: u64) -> Network {
        self.draw_coeffs(field, seed, true)
    }

    fn draw_coeffs(&self, field: &BaseField, seed: u64, nonzero: bool) -> Network {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = field.order() as u32;
        let lo = u32::from(nonzero);
        let mut out = self.clone();
        for i in 0..out.edges.len() {
            let len = out.coeff_len(i);
            out.edges[i].coeffs = (0..len).map(|_| BaseElem(rng.random_range(lo..q))).collect();
        }
        out
    }
}

fn topo_order(count: usize, edges: &[Edge], in_edges: &[Vec<usize>], out_edges: &[Vec<usize>]) -> Result<Vec<usize>, NetError> {
    let mut indeg: Vec<usize> = in_edges.iter().map(Vec::len).collect();
    let mut ready: BTreeSet<usize> = (0..count).filter(|&i| indeg[i] == 0).collect();
    let mut order = Vec::with_capacity(count);
    while let Some(node) = ready.pop_first() {
        order.push(node);
        for &e in &out_edges[node] {
            let t = edges[e].to;
            indeg[t] -= 1;
            if indeg[t] == 0 {
                ready.insert(t);
            }
        }
    }
    if order.len() != count {
        return Err(NetError::Cycle);
    }
    Ok(order)
}

/// How a corrupted node tampers with each packet it sends.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptMode {
    /// Adds a uniformly random nonzero offset to the data field.
    RandomData,
    /// Adds random nonzero offsets to the data field and every tag coefficient.
    RandomPayload,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PropagateOptions {
    /// Verifying nodes check every incoming packet and drop failures.
    pub verify: bool,
    /// Nodes whose outgoing packets are tampered with.
    pub corrupt: Vec<(usize, CorruptMode)>,
    /// Seed for the corruption offsets.
    pub seed: u64,
}

/// One verification performed during a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct VerifyRecord {
    pub node: usize,
    pub edge: usize,
    pub verifier: usize,
    pub accepted: bool,
    pub zero_tracking: bool,
}

/// Result of one propagation sweep.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SessionState {
    /// Packet carried by each edge.
    pub packets: Vec<Packet>,
    /// What each edge would carry with the same drops but no tampering.
    pub clean: Vec<Packet>,
    /// Global vector each packet actually represents after upstream drops.
    pub effective: Vec<Vec<BaseElem>>,
    /// `packets[e] != clean[e]`.
    pub corrupted: Vec<bool>,
    /// Edge was rejected by the verifier at its head.
    pub dropped: Vec<bool>,
    pub log: Vec<VerifyRecord>,
}

impl SessionState {
    pub fn rejections(&self) -> impl Iterator<Item = &VerifyRecord> {
        self.log.iter().filter(|r| !r.accepted)
    }
}

/// Sends `sources` (one packet per message) through `net`.
///
/// Each edge carries the GF(q)-combination of its tail's incoming packets
/// under the local coefficients. A verifying node checks each incoming
/// packet and replaces a failing one by zero before combining. Nodes listed
/// in `opts.corrupt` skip verification and tamper with everything they send.
pub fn propagate(
    net: &Network,
    scheme: &Scheme,
    sources: &[Packet],
    keys: Option<&KeyMaterial>,
    opts: &PropagateOptions,
) -> Result<SessionState, NetError> {
    let field = scheme.field();
    let base = field.base();
    let k = scheme.params().k;
    net.check_coeffs(base)?;
    if sources.len() != net.n {
        return Err(NetError::PacketCount { expected: net.n, got: sources.len() });
    }
    let assignment = net.verifier_assignment();
    if opts.verify {
        for (i, a) in assignment.iter().enumerate() {
            if let Some(v) = a {
                if keys.is_none_or(|km| km.verifiers.len() < *v) {
                    return Err(NetError::MissingVerifierKey(net.nodes[i].id.clone()));
                }
            }
        }
    }
    let corrupt: HashMap<usize, CorruptMode> = opts.corrupt.iter().copied().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let edge_count = net.edges.len();
    let mut st = SessionState {
        packets: vec![Packet::zero(k); edge_count],
        clean: vec![Packet::zero(k); edge_count],
        effective: vec![vec![BaseElem::ZERO; net.n]; edge_count],
        corrupted: vec![false; edge_count],
        dropped: vec![false; edge_count],
        log: Vec::new(),
    };
    let zero = Packet::zero(k);
    for &node in &net.order {
        let bad = corrupt.get(&node).copied();
        let inputs: Vec<usize> = net.in_edges[node].clone();
        if opts.verify && bad.is_none() {
            if let (Some(v), Some(km)) = (assignment[node], keys) {
                for &e in &inputs {
                    let verdict = scheme.verify_edge(&st.packets[e], km.verifier(v), km.points.point(v));
                    st.dropped[e] = !verdict.accepted;
                    st.log.push(VerifyRecord {
                        node,
                        edge: e,
                        verifier: v,
                        accepted: verdict.accepted,
                        zero_tracking: verdict.zero_tracking,
                    });
                }
            }
        }
        for &out in &net.out_edges[node] {
            let coeffs = &net.edges[out].coeffs;
            let (mut pkt, clean, eff) = if node == net.source {
                let terms = coeffs.iter().copied().zip(sources);
                let p = Packet::combine(field, k, terms);
                (p.clone(), p, coeffs.clone())
            } else {
                let live = |e: usize| !st.dropped[e];
                let p = Packet::combine(field, k, coeffs.iter().copied().zip(inputs.iter().map(|&e| if live(e) { &st.packets[e] } else { &zero })));
                let c = Packet::combine(field, k, coeffs.iter().copied().zip(inputs.iter().map(|&e| if live(e) { &st.clean[e] } else { &zero })));
                let mut g = vec![BaseElem::ZERO; net.n];
                for (&c, &e) in coeffs.iter().zip(&inputs) {
                    if live(e) {
                        for (a, &x) in g.iter_mut().zip(&st.effective[e]) {
                            *a = base.add(*a, base.mul(c, x));
                        }
                    }
                }
                (p, c, g)
            };
            if let Some(mode) = bad {
                tamper(field, &mut pkt, mode, &mut rng);
            }
            st.corrupted[out] = pkt != clean;
            st.packets[out] = pkt;
            st.clean[out] = clean;
            st.effective[out] = eff;
        }
    }
    Ok(st)
}

fn random_nonzero(field: &ExtField, rng: &mut ChaCha8Rng) -> ExtElem {
    ExtElem(rng.random_range(1..field.order()) as u32)
}

fn tamper(field: &ExtField, pkt: &mut Packet, mode: CorruptMode, rng: &mut ChaCha8Rng) {
    pkt.data = field.add(pkt.data, random_nonzero(field, rng));
    if mode == CorruptMode::RandomPayload {
        for t in pkt.tag.iter_mut() {
            *t = field.add(*t, random_nonzero(field, rng));
        }
    }
}

/// Why a destination could not recover the messages.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("transfer matrix has rank {rank}, need {n}")]
pub struct DecodeFailure {
    pub rank: usize,
    pub n: usize,
}

/// Recovers the `n` messages at `dest` from the accepted in-edges.
///
/// Picks `n` in-edges whose effective global vectors are independent, in
/// file order, and solves `G_D X = Y` on their data fields.
pub fn decode(net: &Network, field: &ExtField, dest: usize, state: &SessionState) -> Result<Vec<ExtElem>, DecodeFailure> {
    let base = field.base();
    let n = net.n;
    let rows = decode_rows(net, base, dest, state)?;
    let g = Matrix::from_rows(rows.iter().map(|&r| state.effective[r].clone()).collect());
    let inv = linalg::invert(base, &g).expect("rows were chosen independent");
    Ok((0..n)
        .map(|i| {
            rows.iter()
                .enumerate()
                .fold(ExtElem::ZERO, |acc, (j, &r)| field.add(acc, field.scale_by_base(inv[(i, j)], state.packets[r].data)))
        })
        .collect())
}

/// In-edges of `dest` used by [`decode`]: the first `n` accepted edges, in
/// file order, whose effective global vectors are independent.
pub fn decode_rows(net: &Network, base: &BaseField, dest: usize, state: &SessionState) -> Result<Vec<usize>, DecodeFailure> {
    let n = net.n;
    let mut rows: Vec<usize> = Vec::new();
    for &e in &net.in_edges[dest] {
        if state.dropped[e] || rows.len() == n {
            continue;
        }
        let mut trial: Vec<Vec<BaseElem>> = rows.iter().map(|&r| state.effective[r].clone()).collect();
        trial.push(state.effective[e].clone());
        if linalg::rank(base, &Matrix::from_rows(trial)) == rows.len() + 1 {
            rows.push(e);
        }
    }
    if rows.len() < n {
        return Err(DecodeFailure { rank: rows.len(), n });
    }
    Ok(rows)
}

/// Shape of a randomly generated layered network.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RandomNetworkSpec {
    pub n: usize,
    pub intermediates: usize,
    pub destinations: usize,
    /// Out-degree of each intermediate node.
    pub fanout: usize,
}

/// Draws a random acyclic network where every destination can decode.
///
/// Intermediate nodes are ordered; each sends `fanout` edges to later
/// intermediates or destinations. Every node is reachable from the source
/// and every destination has at least `n` in-edges. Coefficients are redrawn
/// until all destinations decode; all non-source nodes verify.
pub fn random_network(spec: RandomNetworkSpec, field: &BaseField, seed: u64) -> Result<Network, NetError> {
    const ATTEMPTS: usize = 200;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = spec.intermediates;
    for _ in 0..ATTEMPTS {
        let mut nodes = vec![NodeSpec { id: "S".into(), role: Role::Source, verifying: false }];
        nodes.extend((1..=r).map(|i| NodeSpec { id: format!("R{i}"), role: Role::Intermediate, verifying: true }));
        nodes.extend((1..=spec.destinations).map(|i| NodeSpec { id: format!("D{i}"), role: Role::Destination, verifying: true }));
        let total = nodes.len();
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        for i in 1..=r {
            pairs.push((0, i));
        }
        for _ in 0..spec.n {
            pairs.push((0, rng.random_range(1..total)));
        }
        for i in 1..=r {
            for _ in 0..spec.fanout {
                pairs.push((i, rng.random_range(i + 1..total)));
            }
        }
        for d in r + 1..total {
            let have = pairs.iter().filter(|p| p.1 == d).count();
            for _ in have..spec.n {
                pairs.push((rng.random_range(0..=r), d));
            }
        }
        let file = NetworkFile {
            n: spec.n,
            edges: pairs
                .iter()
                .enumerate()
                .map(|(i, &(a, b))| EdgeSpec { id: format!("e{}", i + 1), from: nodes[a].id.clone(), to: nodes[b].id.clone(), coeffs: Vec::new() })
                .collect(),
            nodes,
            destinations: None,
            intermediates: None,
        };
        let shape = Network::from_file(file)?;
        for _ in 0..10 {
            let net = shape.random_coeffs(field, rng.random());
            if net.check_decodability(field)?.iter().all(|&ok| ok) {
                return Ok(net);
            }
        }
    }
    Err(NetError::NotDecodable(ATTEMPTS))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::authcode::SchemeParams;
    use crate::topologies;
    use proptest::prelude::*;

    fn gf2() -> BaseField {
        BaseField::prime(2).unwrap()
    }

    fn fig1() -> Network {
        Network::from_json(topologies::TOPO_A_FIG1).unwrap()
    }

    fn b(v: &[u32]) -> Vec<BaseElem> {
        v.iter().map(|&c| BaseElem(c)).collect()
    }

    #[test]
    fn seven_edge_identity_configuration() {
        let net = fig1();
        let g = net.global_vectors(&gf2()).unwrap();
        let d = net.node_index("D").unwrap();
        let t = net.transfer_matrix(&g, d);
        assert_eq!(t, linalg::identity(&gf2(), 3));
        assert_eq!(net.check_decodability(&gf2()).unwrap(), vec![true]);
    }

    #[test]
    fn zero_coefficients_give_zero_vectors() {
        let mut net = fig1();
        for i in 0..net.edges.len() {
            if !net.is_source_edge(i) {
                net.edges[i].coeffs.iter_mut().for_each(|c| *c = BaseElem::ZERO);
            }
        }
        let g = net.global_vectors(&gf2()).unwrap();
        for i in 3..7 {
            assert_eq!(g[i], b(&[0, 0, 0]));
        }
        assert_eq!(net.check_decodability(&gf2()).unwrap(), vec![false]);
    }

    #[test]
    fn seven_edge_expansion() {
        // g(e6) = b11 g(e3) + b12 (a11 g(e1) + a12 g(e2)), g(e7) likewise.
        let f = BaseField::prime(3).unwrap();
        for seed in 0..50 {
            let net = fig1().random_coeffs(&f, seed);
            let g = net.global_vectors(&f).unwrap();
            let c = |e: usize| net.edges[e].coeffs.clone();
            let (g1, g2, g3) = (c(0), c(1), c(2));
            let (a1, a2) = (c(3), c(4));
            let (b1, b2) = (c(5), c(6));
            let lin = |x: BaseElem, u: &[BaseElem], y: BaseElem, v: &[BaseElem]| -> Vec<BaseElem> {
                (0..3).map(|j| f.add(f.mul(x, u[j]), f.mul(y, v[j]))).collect()
            };
            let e4 = lin(a1[0], &g1, a1[1], &g2);
            let e5 = lin(a2[0], &g1, a2[1], &g2);
            assert_eq!(g[3], e4);
            assert_eq!(g[4], e5);
            assert_eq!(g[5], lin(b1[0], &g3, b1[1], &e4));
            assert_eq!(g[6], lin(b2[0], &g3, b2[1], &e4));
        }
    }

    #[test]
    fn decodability_matches_direct_rank_count() {
        let f = BaseField::new(2, 2, vec![1, 1, 1]).unwrap();
        let mut ok = 0;
        let mut oracle = 0;
        for seed in 0..100 {
            let net = fig1().random_coeffs(&f, seed);
            if net.check_decodability(&f).unwrap()[0] {
                ok += 1;
            }
            // Oracle: full-rank 3x3 matrices over GF(4) have nonzero determinant.
            let g = net.global_vectors(&f).unwrap();
            let m = |i: usize, j: usize| g[4 + i][j];
            let det = [(0, 1, 2), (1, 2, 0), (2, 0, 1)]
                .iter()
                .map(|&(a, bb, c)| f.mul(m(0, a), f.mul(m(1, bb), m(2, c))))
                .chain([(0, 2, 1), (1, 0, 2), (2, 1, 0)].iter().map(|&(a, bb, c)| f.neg(f.mul(m(0, a), f.mul(m(1, bb), m(2, c))))))
                .fold(BaseElem::ZERO, |x, y| f.add(x, y));
            if det != BaseElem::ZERO {
                oracle += 1;
            }
        }
        assert_eq!(ok, oracle);
        assert!(ok > 0 && ok < 100);
    }

    #[test]
    fn too_few_in_edges_is_not_decodable() {
        let net = Network::from_json(topologies::TOPO_A_TABLE).unwrap();
        assert_eq!(net.check_decodability(&gf2()).unwrap(), vec![false]);
    }

    #[test]
    fn validation_errors() {
        let cyc = r#"{"n":1,"nodes":[{"id":"S","role":"source"},{"id":"A","role":"intermediate"},{"id":"B","role":"intermediate"}],
            "edges":[{"id":"a","from":"S","to":"A"},{"id":"b","from":"A","to":"B"},{"id":"c","from":"B","to":"A"}]}"#;
        assert!(matches!(Network::from_json(cyc), Err(NetError::Cycle)));
        let two = r#"{"n":1,"nodes":[{"id":"S","role":"source"},{"id":"T","role":"source"}],"edges":[]}"#;
        assert!(matches!(Network::from_json(two), Err(NetError::SourceCount(2))));
        let len = r#"{"n":2,"nodes":[{"id":"S","role":"source"},{"id":"D","role":"destination"}],
            "edges":[{"id":"a","from":"S","to":"D","coeffs":[1]}]}"#;
        assert!(matches!(Network::from_json(len), Err(NetError::CoeffLength { expected: 2, got: 1, .. })));
        let unknown = r#"{"n":1,"nodes":[{"id":"S","role":"source"}],"edges":[{"id":"a","from":"S","to":"X"}]}"#;
        assert!(matches!(Network::from_json(unknown), Err(NetError::UnknownNode { .. })));
        let missing = r#"{"n":1,"nodes":[{"id":"S","role":"source"},{"id":"D","role":"destination"}],"edges":[{"id":"a","from":"S","to":"D"}]}"#;
        let net = Network::from_json(missing).unwrap();
        assert!(matches!(net.global_vectors(&gf2()), Err(NetError::MissingCoeffs(_))));
        let range = r#"{"n":1,"nodes":[{"id":"S","role":"source"},{"id":"D","role":"destination"}],"edges":[{"id":"a","from":"S","to":"D","coeffs":[2]}]}"#;
        let net = Network::from_json(range).unwrap();
        assert!(matches!(net.global_vectors(&gf2()), Err(NetError::CoeffRange { value: 2, .. })));
    }

    #[test]
    fn json_roundtrip() {
        let net = fig1();
        let again = Network::from_file(net.to_file()).unwrap();
        assert_eq!(again, net);
    }

    fn setup(l: u32, k: usize, m: usize, v: usize) -> Scheme {
        Scheme::new(SchemeParams { k, v, m }, ExtField::generate(2, 1, l, 0).unwrap()).unwrap()
    }

    #[test]
    fn seven_edge_round_trip() {
        let net = fig1();
        let s = setup(3, 2, 3, 3);
        let keys = s.keygen(5);
        let msgs = [ExtElem(3), ExtElem(5), ExtElem(6)];
        let src: Vec<Packet> = msgs.iter().map(|&m| s.source_packet(&keys.source, m)).collect();
        let st = propagate(&net, &s, &src, Some(&keys), &PropagateOptions { verify: true, ..Default::default() }).unwrap();
        assert!(st.log.iter().all(|r| r.accepted));
        assert_eq!(st.log.len(), 7);
        let d = net.node_index("D").unwrap();
        assert_eq!(decode(&net, s.field(), d, &st).unwrap(), msgs.to_vec());
        // Identity transfer: D reads the messages straight off e5, e6, e7.
        assert_eq!(st.packets[4].data, msgs[0]);
        assert_eq!(st.packets[5].data, msgs[1]);
        assert_eq!(st.packets[6].data, msgs[2]);
    }

    #[test]
    fn two_edge_received_rows() {
        // R1's packet on e1 is [g1+g2 | g1 s1 + g2 s2 | g1 A_{s1} + g2 A_{s2}].
        let s = setup(3, 2, 2, 2);
        let f = s.field();
        let keys = s.keygen(1);
        let json = r#"{"n":2,"nodes":[{"id":"S","role":"source"},{"id":"R1","role":"intermediate","verifying":true}],
            "edges":[{"id":"e1","from":"S","to":"R1","coeffs":[1,1]},{"id":"e2","from":"S","to":"R1","coeffs":[0,1]}]}"#;
        let net = Network::from_json(json).unwrap();
        let (s1, s2) = (ExtElem(2), ExtElem(7));
        let src = [s.source_packet(&keys.source, s1), s.source_packet(&keys.source, s2)];
        let st = propagate(&net, &s, &src, Some(&keys), &PropagateOptions { verify: true, ..Default::default() }).unwrap();
        let y1 = &st.packets[0];
        assert_eq!(y1.tracking, BaseElem::ZERO);
        assert_eq!(y1.data, f.add(s1, s2));
        let tag: Vec<_> = (0..2).map(|j| f.add(src[0].tag[j], src[1].tag[j])).collect();
        assert_eq!(y1.tag, tag);
        assert_eq!(st.packets[1], src[1]);
        assert!(st.log.iter().all(|r| r.accepted));
        assert!(st.log[0].zero_tracking);
    }

    #[test]
    fn corrupted_relay_is_caught_downstream() {
        let net = Network::from_json(topologies::TOPO_B).unwrap();
        let s = setup(16, 2, 2, net.verifier_count());
        let keys = s.keygen(3);
        let src: Vec<Packet> = [ExtElem(10), ExtElem(20)].iter().map(|&m| s.source_packet(&keys.source, m)).collect();
        let r2 = net.node_index("R2").unwrap();
        let opts = PropagateOptions { verify: true, corrupt: vec![(r2, CorruptMode::RandomData)], seed: 9 };
        let st = propagate(&net, &s, &src, Some(&keys), &opts).unwrap();
        let rejected: BTreeSet<usize> = st.rejections().map(|r| r.edge).collect();
        let flagged: BTreeSet<usize> = (0..st.corrupted.len()).filter(|&e| st.corrupted[e]).collect();
        assert_eq!(rejected, flagged);
        assert_eq!(flagged.len(), 2);
        // R3 drops R2's input, so both destinations see only s1.
        let d1 = net.node_index("D1").unwrap();
        assert!(decode(&net, s.field(), d1, &st).is_err());
        let d2 = net.node_index("D2").unwrap();
        assert!(decode(&net, s.field(), d2, &st).is_err());
    }

    #[test]
    fn pollution_without_verification() {
        let net = fig1();
        let s = setup(8, 1, 3, 3);
        let keys = s.keygen(2);
        let msgs = [ExtElem(1), ExtElem(2), ExtElem(3)];
        let src: Vec<Packet> = msgs.iter().map(|&m| s.source_packet(&keys.source, m)).collect();
        let r1 = net.node_index("R1").unwrap();
        let opts = PropagateOptions { verify: false, corrupt: vec![(r1, CorruptMode::RandomData)], seed: 4 };
        let st = propagate(&net, &s, &src, Some(&keys), &opts).unwrap();
        let d = net.node_index("D").unwrap();
        assert_ne!(decode(&net, s.field(), d, &st).unwrap(), msgs.to_vec());
        assert!(st.log.is_empty());
    }

    #[test]
    fn missing_keys_is_a_configuration_error() {
        let net = fig1();
        let s = setup(3, 1, 3, 2);
        let keys = s.keygen(1);
        let src: Vec<Packet> = (1..=3).map(|m| s.source_packet(&keys.source, ExtElem(m))).collect();
        let opts = PropagateOptions { verify: true, ..Default::default() };
        assert!(matches!(propagate(&net, &s, &src, Some(&keys), &opts), Err(NetError::MissingVerifierKey(_))));
        assert!(matches!(propagate(&net, &s, &src, None, &opts), Err(NetError::MissingVerifierKey(_))));
        assert!(matches!(propagate(&net, &s, &src[..2], Some(&keys), &PropagateOptions::default()), Err(NetError::PacketCount { .. })));
    }

    #[test]
    fn topological_order_is_stable() {
        let net = Network::from_json(topologies::TOPO_B).unwrap();
        let ids: Vec<&str> = net.topo_order().iter().map(|&i| net.nodes()[i].id.as_str()).collect();
        assert_eq!(ids, ["S", "R1", "R2", "R3", "D1", "D2"]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn packets_follow_global_vectors(seed in 0u64..10_000, n in 1usize..4, k in 1usize..4) {
            let s = Scheme::new(SchemeParams { k, v: 8, m: 3 }, ExtField::generate(2, 2, 2, 0).unwrap()).unwrap();
            let f = s.field();
            let base = f.base();
            let spec = RandomNetworkSpec { n, intermediates: 3, destinations: 2, fanout: 2 };
            let net = random_network(spec, base, seed).unwrap();
            let keys = s.keygen(seed);
            let msgs: Vec<ExtElem> = (0..n).map(|i| ExtElem(((seed as u32) + 3 * i as u32) % 16)).collect();
            let src: Vec<Packet> = msgs.iter().map(|&m| s.source_packet(&keys.source, m)).collect();
            let st = propagate(&net, &s, &src, Some(&keys), &PropagateOptions { verify: true, ..Default::default() }).unwrap();
            let g = net.global_vectors(base).unwrap();
            for e in 0..net.edges().len() {
                let expect = Packet::combine(f, k, g[e].iter().copied().zip(&src));
                prop_assert_eq!(&st.packets[e], &expect);
                prop_assert_eq!(&st.effective[e], &g[e]);
            }
            prop_assert!(st.log.iter().all(|r| r.accepted));
            for &d in net.destinations() {
                prop_assert_eq!(decode(&net, f, d, &st).unwrap(), msgs.clone());
            }
        }

        #[test]
        fn accepted_packets_always_verify(seed in 0u64..10_000) {
            let s = Scheme::new(SchemeParams { k: 2, v: 8, m: 2 }, ExtField::generate(2, 1, 4, 0).unwrap()).unwrap();
            let base = s.field().base();
            let spec = RandomNetworkSpec { n: 2, intermediates: 4, destinations: 2, fanout: 2 };
            let net = random_network(spec, base, seed).unwrap();
            let keys = s.keygen(seed);
            let src: Vec<Packet> = (0..2).map(|m| s.source_packet(&keys.source, ExtElem(m + 1))).collect();
            let bad = net.intermediates()[(seed % 4) as usize];
            let opts = PropagateOptions { verify: true, corrupt: vec![(bad, CorruptMode::RandomPayload)], seed };
            let st = propagate(&net, &s, &src, Some(&keys), &opts).unwrap();
            for r in st.log.iter().filter(|r| r.accepted) {
                prop_assert!(s.verify_edge(&st.packets[r.edge], keys.verifier(r.verifier), keys.points.point(r.verifier)).accepted);
            }
        }
    }
}
