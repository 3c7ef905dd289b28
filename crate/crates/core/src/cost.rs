//! Operation counts for tagging and verification, measured and predicted.
//!
//! Counts are in GF(q^l). Tagging `n` messages takes `n(M-1)` Frobenius
//! steps and `nkM` multiplications. Checking one packet takes `M-1`
//! Frobenius steps, `max(k-2, 0)` exponentiations of the public point and
//! `(M+1)+(k-1)` multiplications, so a node with `h` in-edges pays `h` times
//! that. Each GF(q^l) operation is worth `l` operations in GF(q), which gives
//! the per-symbol column.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::authcode::{KeyMaterial, Packet, Scheme, SchemeParams};
use crate::gf::{BaseElem, ExtElem, Field, OpCounters};

pub fn tag_formula(n: usize, k: usize, m: usize) -> OpCounters {
    let n = n as u64;
    OpCounters { ext_mults: n * k as u64 * m as u64, ext_frobenius: n * (m as u64 - 1), ext_exponentiations: 0 }
}

pub fn verify_formula(k: usize, m: usize, h: usize) -> OpCounters {
    let h = h as u64;
    OpCounters {
        ext_mults: h * ((m as u64 + 1) + (k as u64 - 1)),
        ext_frobenius: h * (m as u64 - 1),
        ext_exponentiations: h * k.saturating_sub(2) as u64,
    }
}

/// Exponentiation and multiplication totals counted in GF(q) symbols.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SymbolCost {
    pub exp: u64,
    pub mult: u64,
}

impl SymbolCost {
    pub fn from_ops(ops: OpCounters, l: usize) -> Self {
        SymbolCost { exp: ops.exp_total() * l as u64, mult: ops.ext_mults * l as u64 }
    }
}

/// Measured against predicted counts for one `(n, k, M, h)` point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct CostCheck {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub h: usize,
    pub l: usize,
    pub tag_measured: OpCounters,
    pub tag_expected: OpCounters,
    pub verify_measured: OpCounters,
    pub verify_expected: OpCounters,
    pub tag_symbols: SymbolCost,
    pub verify_symbols: SymbolCost,
}

impl CostCheck {
    pub fn matches(&self) -> bool {
        self.tag_measured == self.tag_expected && self.verify_measured == self.verify_expected
    }
}

/// Tags `messages` under one counter.
pub fn measure_tagging(scheme: &Scheme, keys: &KeyMaterial, messages: &[ExtElem]) -> (Vec<Packet>, OpCounters) {
    let mut ops = OpCounters::default();
    let packets = messages.iter().map(|&s| scheme.build_packet(s, scheme.tag_message_counted(&keys.source, s, &mut ops))).collect();
    (packets, ops)
}

/// Checks every packet with verifier `index`, returning accept flags and the counts.
pub fn measure_verification(scheme: &Scheme, keys: &KeyMaterial, index: usize, packets: &[&Packet]) -> (Vec<bool>, OpCounters) {
    let mut ops = OpCounters::default();
    let x = keys.points.point(index);
    let vkey = keys.verifier(index);
    let verdicts = packets.iter().map(|p| scheme.verify_edge_counted(p, vkey, x, &mut ops).accepted).collect();
    (verdicts, ops)
}

/// Tags `n` random messages, mixes them into `h` random combinations and
/// verifies those at verifier 1.
pub fn cost_check(scheme: &Scheme, keys: &KeyMaterial, n: usize, h: usize, seed: u64) -> CostCheck {
    let SchemeParams { k, m, .. } = scheme.params();
    let field = scheme.field();
    let l = field.degree();
    let q = field.q();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let messages: Vec<ExtElem> = (0..n).map(|_| ExtElem(rng.random_range(0..field.order()) as u32)).collect();
    let (sources, tag_measured) = measure_tagging(scheme, keys, &messages);
    let mixed: Vec<Packet> = (0..h)
        .map(|_| Packet::combine(field, k, sources.iter().map(|p| (BaseElem(rng.random_range(0..q) as u32), p))))
        .collect();
    let refs: Vec<&Packet> = mixed.iter().collect();
    let (_, verify_measured) = measure_verification(scheme, keys, 1, &refs);
    CostCheck {
        n,
        k,
        m,
        h,
        l,
        tag_measured,
        tag_expected: tag_formula(n, k, m),
        verify_measured,
        verify_expected: verify_formula(k, m, h),
        tag_symbols: SymbolCost::from_ops(tag_measured, l),
        verify_symbols: SymbolCost::from_ops(verify_measured, l),
    }
}
