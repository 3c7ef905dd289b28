//! The (k, V, M) network coding authentication code: key generation and
//! distribution, tagging, packet layout and the per-edge verification check.
//!
//! A source key is `M + 1` polynomials `P_0..P_M` of degree at most `k - 1`
//! over GF(q^l). Verifier `i` holds `P_0(x_i)..P_M(x_i)` for a public point
//! `x_i`. The tag of a message `s` is the polynomial
//! `A_s(x) = P_0(x) + s P_1(x) + s^q P_2(x) + ... + s^(q^(M-1)) P_M(x)`,
//! sent as its `k` coefficients. Because every network coding coefficient is
//! in GF(q) and Frobenius is GF(q)-linear, any GF(q)-combination of tagged
//! packets still satisfies the verification identity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gf::{BaseElem, ExtElem, ExtField, Field, FieldParams, GfError, OpCounters};
use crate::linalg::Matrix;
use crate::poly;

/// Marker stored in every JSON file that carries secret key material.
pub const SECRET_MARKER: &str = "SECRET";

#[derive(Debug, Error)]
pub enum AuthError {
    #[error("k and M must be at least 1 (k = {k}, M = {m})")]
    BadParams { k: usize, m: usize },
    #[error("need q^l >= V, but q^l = {order} and V = {v}")]
    TooManyVerifiers { order: u64, v: usize },
    #[error("packet has {got} symbols, expected {expected}")]
    PacketLength { expected: usize, got: usize },
    #[error("wire packet has {got} bytes, expected {expected}")]
    WireLength { expected: usize, got: usize },
    #[error("wire packet has nonzero padding bits")]
    WirePadding,
    #[error("key material does not match the scheme parameters: {0}")]
    KeyShape(String),
    #[error("key file is missing the {SECRET_MARKER} marker")]
    MissingMarker,
    #[error(transparent)]
    Field(#[from] GfError),
}

/// Security parameters of a (k, V, M) code.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemeParams {
    /// Coalitions of up to `k - 1` insiders are tolerated.
    pub k: usize,
    /// Number of verifying nodes.
    pub v: usize,
    /// Key reuse bound.
    pub m: usize,
}

/// Non-fatal configuration findings.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum ConfigWarning {
    /// `M < n`: one encoding round already uses the key more than `M` times.
    ReuseBelowMessages { m: usize, n: usize },
    /// `H > M`: the security argument against coalitions no longer applies.
    CoalitionEdgesAboveReuse { h: usize, m: usize },
}

impl std::fmt::Display for ConfigWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigWarning::ReuseBelowMessages { m, n } => {
                write!(f, "key reuse bound M = {m} is below the number of messages n = {n}")
            }
            ConfigWarning::CoalitionEdgesAboveReuse { h, m } => {
                write!(f, "coalition in-edges H = {h} exceed M = {m}; substitution security is not guaranteed")
            }
        }
    }
}

/// The `M + 1` secret polynomials; `polys[m][j]` is the coefficient of `x^j`
/// in `P_m`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceKey {
    pub polys: Vec<Vec<ExtElem>>,
}

impl SourceKey {
    pub fn k(&self) -> usize {
        self.polys.first().map_or(0, Vec::len)
    }

    pub fn m(&self) -> usize {
        self.polys.len().saturating_sub(1)
    }

    /// The `k x (M+1)` matrix whose column `m` holds the coefficients of `P_m`.
    pub fn to_matrix(&self) -> Matrix<ExtElem> {
        Matrix::from_fn(self.k(), self.polys.len(), |j, m| self.polys[m][j])
    }

    pub fn from_matrix(a: &Matrix<ExtElem>) -> Self {
        SourceKey { polys: (0..a.cols()).map(|m| a.column(m)).collect() }
    }

    /// `(P_0(x), ..., P_M(x))`.
    pub fn evaluate(&self, field: &ExtField, x: ExtElem) -> Vec<ExtElem> {
        self.polys.iter().map(|p| poly::eval(field, p, x)).collect()
    }
}

/// The public evaluation points `x_1..x_V`, pairwise distinct.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PublicPoints(pub Vec<ExtElem>);

impl PublicPoints {
    /// Point of verifier `index` (1-based).
    pub fn point(&self, index: usize) -> ExtElem {
        self.0[index - 1]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Private key of verifier `index` (1-based): `P_0(x_i)..P_M(x_i)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifierKey {
    pub index: usize,
    pub evals: Vec<ExtElem>,
}

/// Coefficients `b_0..b_{k-1}` of the tag polynomial `A_s(x)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Tag(pub Vec<ExtElem>);

/// Everything the trusted authority hands out.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeyMaterial {
    pub source: SourceKey,
    pub points: PublicPoints,
    pub verifiers: Vec<VerifierKey>,
}

impl KeyMaterial {
    pub fn verifier(&self, index: usize) -> &VerifierKey {
        &self.verifiers[index - 1]
    }
}

/// A tagged packet `[tracking | data | tag]`, `1 + l + kl` base symbols.
///
/// `data` and each tag coefficient are kept as GF(q^l) elements; their `l`
/// base symbols are the polynomial-basis coefficients.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Packet {
    pub tracking: BaseElem,
    pub data: ExtElem,
    pub tag: Vec<ExtElem>,
}

impl Packet {
    pub fn zero(k: usize) -> Self {
        Packet { tracking: BaseElem::ZERO, data: ExtElem::ZERO, tag: vec![ExtElem::ZERO; k] }
    }

    /// Number of base symbols for parameters `(l, k)`.
    pub fn symbol_len(l: usize, k: usize) -> usize {
        1 + l + k * l
    }

    pub fn to_symbols(&self, field: &ExtField) -> Vec<BaseElem> {
        let mut out = Vec::with_capacity(Self::symbol_len(field.degree(), self.tag.len()));
        out.push(self.tracking);
        out.extend(field.ext_to_msg(self.data));
        for &b in &self.tag {
            out.extend(field.ext_to_msg(b));
        }
        out
    }

    /// Symbol-wise `self + c * other`, with `c` in GF(q).
    pub fn add_scaled(&mut self, field: &ExtField, c: BaseElem, other: &Packet) {
        if c == BaseElem::ZERO {
            return;
        }
        let base = field.base();
        self.tracking = base.add(self.tracking, base.mul(c, other.tracking));
        self.data = field.add(self.data, field.scale_by_base(c, other.data));
        for (t, &o) in self.tag.iter_mut().zip(&other.tag) {
            *t = field.add(*t, field.scale_by_base(c, o));
        }
    }

    /// GF(q)-linear combination of packets of equal tag length `k`.
    pub fn combine<'a>(field: &ExtField, k: usize, terms: impl IntoIterator<Item = (BaseElem, &'a Packet)>) -> Packet {
        let mut acc = Packet::zero(k);
        for (c, p) in terms {
            acc.add_scaled(field, c, p);
        }
        acc
    }
}

/// Outcome of one per-edge check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub accepted: bool,
    /// The tracking symbol was zero, so the `P_0` term vanished on both sides.
    pub zero_tracking: bool,
}

/// Key and tag sizes in base symbols.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SizeReport {
    pub source_key: usize,
    pub public_values: usize,
    pub verifier_keys: usize,
    pub tags: usize,
    pub tag: usize,
    pub packet_overhead: usize,
    pub storage_source: usize,
    pub storage_verifier: usize,
}

impl SizeReport {
    pub fn new(params: SchemeParams, l: usize, n: usize) -> Self {
        let SchemeParams { k, v, m } = params;
        SizeReport {
            source_key: k * (m + 1) * l,
            public_values: v * l,
            verifier_keys: v * (m + 1) * l,
            tags: n * k * l,
            tag: k * l,
            packet_overhead: k * l + 1,
            storage_source: (m + 1) * l * k,
            storage_verifier: (m + 1) * l,
        }
    }
}

/// A code instance: parameters plus the field they live in.
#[derive(Clone, Debug)]
pub struct Scheme {
    params: SchemeParams,
    field: ExtField,
}

impl Scheme {
    pub fn new(params: SchemeParams, field: ExtField) -> Result<Self, AuthError> {
        if params.k == 0 || params.m == 0 {
            return Err(AuthError::BadParams { k: params.k, m: params.m });
        }
        if (params.v as u64) > field.order() {
            return Err(AuthError::TooManyVerifiers { order: field.order(), v: params.v });
        }
        Ok(Scheme { params, field })
    }

    pub fn params(&self) -> SchemeParams {
        self.params
    }

    pub fn field(&self) -> &ExtField {
        &self.field
    }

    pub fn field_params(&self) -> &FieldParams {
        self.field.params()
    }

    /// Checks the deployment guidelines `M >= n` and `M >= H`.
    pub fn warnings(&self, n: usize, coalition_edges: Option<usize>) -> Vec<ConfigWarning> {
        let m = self.params.m;
        let mut out = Vec::new();
        if m < n {
            out.push(ConfigWarning::ReuseBelowMessages { m, n });
        }
        if let Some(h) = coalition_edges.filter(|&h| h > m) {
            out.push(ConfigWarning::CoalitionEdgesAboveReuse { h, m });
        }
        out
    }

    pub fn symbol_len(&self) -> usize {
        Packet::symbol_len(self.field.degree(), self.params.k)
    }

    /// Draws a source key, `V` distinct public points and the verifier keys.
    ///
    /// Coefficients are uniform over GF(q^l). The points are the nonzero
    /// elements in code order rotated by a seed-derived offset, followed by
    /// zero only when `V = q^l`.
    pub fn keygen(&self, seed: u64) -> KeyMaterial {
        let SchemeParams { k, v, m } = self.params;
        let order = self.field.order();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let polys = (0..=m)
            .map(|_| (0..k).map(|_| ExtElem(rng.random_range(0..order) as u32)).collect())
            .collect();
        let source = SourceKey { polys };
        let nonzero = order - 1;
        let offset = if nonzero > 0 { rng.random_range(0..nonzero) } else { 0 };
        let mut points: Vec<ExtElem> =
            (0..(v as u64).min(nonzero)).map(|i| ExtElem((1 + (offset + i) % nonzero) as u32)).collect();
        if v as u64 > nonzero {
            points.push(ExtElem::ZERO);
        }
        let verifiers = points
            .iter()
            .enumerate()
            .map(|(i, &x)| VerifierKey { index: i + 1, evals: source.evaluate(&self.field, x) })
            .collect();
        KeyMaterial { source, points: PublicPoints(points), verifiers }
    }

    pub fn tag_message(&self, key: &SourceKey, s: ExtElem) -> Tag {
        self.tag_message_counted(key, s, &mut OpCounters::default())
    }

    /// Tags `s`: `M - 1` Frobenius steps for `s^q, ..., s^(q^(M-1))`, then
    /// `kM` multiplications against the key coefficients.
    pub fn tag_message_counted(&self, key: &SourceKey, s: ExtElem, ops: &mut OpCounters) -> Tag {
        let m = self.params.m;
        let mut f = self.field.counted(ops);
        let mut powers = Vec::with_capacity(m);
        powers.push(s);
        for i in 1..m {
            let next = f.frobenius(powers[i - 1]);
            powers.push(next);
        }
        let coeffs = (0..self.params.k)
            .map(|j| {
                let mut acc = key.polys[0][j];
                for (mi, &pw) in powers.iter().enumerate() {
                    let term = f.mul(key.polys[mi + 1][j], pw);
                    acc = f.add(acc, term);
                }
                acc
            })
            .collect();
        Tag(coeffs)
    }

    /// Source packet `[1 | s | tag]`.
    pub fn build_packet(&self, s: ExtElem, tag: Tag) -> Packet {
        Packet { tracking: BaseElem::ONE, data: s, tag: tag.0 }
    }

    /// Tags `s` and lays out the source packet.
    pub fn source_packet(&self, key: &SourceKey, s: ExtElem) -> Packet {
        self.build_packet(s, self.tag_message(key, s))
    }

    /// Reads `1 + l + kl` base symbols.
    pub fn parse_packet(&self, raw: &[BaseElem]) -> Result<Packet, AuthError> {
        let l = self.field.degree();
        let expected = self.symbol_len();
        if raw.len() != expected {
            return Err(AuthError::PacketLength { expected, got: raw.len() });
        }
        let q = self.field.q();
        if let Some(bad) = raw.iter().find(|c| c.0 as u64 >= q) {
            return Err(GfError::OutOfRange { value: bad.0 as u64, order: q }.into());
        }
        let data = self.field.msg_to_ext(&raw[1..1 + l])?;
        let tag = raw[1 + l..].chunks(l).map(|c| self.field.msg_to_ext(c)).collect::<Result<_, _>>()?;
        Ok(Packet { tracking: raw[0], data, tag })
    }

    pub fn verify_edge(&self, pkt: &Packet, vkey: &VerifierKey, x: ExtElem) -> Verdict {
        self.verify_edge_counted(pkt, vkey, x, &mut OpCounters::default())
    }

    /// Compares `P_0(x_i) t + sum_m P_m(x_i) d^(q^(m-1))` with the received
    /// tag polynomial evaluated at `x_i`.
    ///
    /// Costs `M - 1` Frobenius steps and `M + 1` multiplications on the key
    /// side, then `max(k - 2, 0)` exponentiations for `x_i^2..x_i^(k-1)` and
    /// `k - 1` multiplications on the tag side.
    pub fn verify_edge_counted(&self, pkt: &Packet, vkey: &VerifierKey, x: ExtElem, ops: &mut OpCounters) -> Verdict {
        let m = self.params.m;
        let mut f = self.field.counted(ops);
        let mut lhs = f.mul(vkey.evals[0], self.field.embed_base(pkt.tracking));
        let mut power = pkt.data;
        for i in 1..=m {
            if i > 1 {
                power = f.frobenius(power);
            }
            let term = f.mul(vkey.evals[i], power);
            lhs = f.add(lhs, term);
        }
        let mut rhs = pkt.tag[0];
        for (j, &b) in pkt.tag.iter().enumerate().skip(1) {
            let xj = if j == 1 { x } else { f.pow(x, j as u64) };
            let term = f.mul(b, xj);
            rhs = f.add(rhs, term);
        }
        Verdict { accepted: lhs == rhs, zero_tracking: pkt.tracking == BaseElem::ZERO }
    }

    /// Checks that key material matches `(k, V, M)`.
    pub fn check_keys(&self, keys: &KeyMaterial) -> Result<(), AuthError> {
        let SchemeParams { k, v, m } = self.params;
        if keys.source.polys.len() != m + 1 || keys.source.polys.iter().any(|p| p.len() != k) {
            return Err(AuthError::KeyShape(format!("source key must be {} polynomials of {k} coefficients", m + 1)));
        }
        if keys.points.len() != v || keys.verifiers.len() != v {
            return Err(AuthError::KeyShape(format!("expected {v} public points and verifier keys")));
        }
        if keys.verifiers.iter().any(|vk| vk.evals.len() != m + 1) {
            return Err(AuthError::KeyShape(format!("verifier keys must hold {} values", m + 1)));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Wire format
// ---------------------------------------------------------------------------

/// Bits per base symbol on the wire: `ceil(log2 q)`.
pub fn symbol_bits(q: u64) -> u32 {
    64 - (q - 1).leading_zeros()
}

/// Packs the canonical symbol sequence, each symbol big-endian in
/// `ceil(log2 q)` bits, zero-padded to a whole byte.
pub fn encode_wire(field: &ExtField, pkt: &Packet) -> Vec<u8> {
    let bits = symbol_bits(field.q());
    let symbols = pkt.to_symbols(field);
    let total = symbols.len() * bits as usize;
    let mut out = vec![0u8; total.div_ceil(8)];
    let mut pos = 0usize;
    for s in symbols {
        for b in (0..bits).rev() {
            if (s.0 >> b) & 1 == 1 {
                out[pos / 8] |= 0x80 >> (pos % 8);
            }
            pos += 1;
        }
    }
    out
}

pub fn decode_wire(scheme: &Scheme, bytes: &[u8]) -> Result<Packet, AuthError> {
    let bits = symbol_bits(scheme.field().q()) as usize;
    let count = scheme.symbol_len();
    let total = count * bits;
    let expected = total.div_ceil(8);
    if bytes.len() != expected {
        return Err(AuthError::WireLength { expected, got: bytes.len() });
    }
    let bit = |pos: usize| (bytes[pos / 8] >> (7 - pos % 8)) & 1;
    if (total..expected * 8).any(|pos| bit(pos) == 1) {
        return Err(AuthError::WirePadding);
    }
    let symbols: Vec<BaseElem> = (0..count)
        .map(|i| BaseElem((0..bits).fold(0u32, |acc, b| (acc << 1) | bit(i * bits + b) as u32)))
        .collect();
    scheme.parse_packet(&symbols)
}

// ---------------------------------------------------------------------------
// Key files
// ---------------------------------------------------------------------------

/// JSON envelope for secret key material.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SecretFile<T> {
    pub marker: String,
    pub field: FieldParams,
    pub scheme: SchemeParams,
    pub key: T,
}

impl<T> SecretFile<T> {
    pub fn new(scheme: &Scheme, key: T) -> Self {
        SecretFile { marker: SECRET_MARKER.to_string(), field: scheme.field_params().clone(), scheme: scheme.params(), key }
    }

    pub fn into_key(self) -> Result<T, AuthError> {
        if self.marker != SECRET_MARKER {
            return Err(AuthError::MissingMarker);
        }
        Ok(self.key)
    }
}

/// JSON document for the public evaluation points.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublicFile {
    pub field: FieldParams,
    pub scheme: SchemeParams,
    pub points: PublicPoints,
}
