//! Exact arithmetic in the tower GF(p) -> GF(q) = GF(p^e) -> GF(q^l).
//!
//! Elements at both levels are stored as packed integer codes in the
//! polynomial basis of the respective modulus. A GF(q) element with
//! coefficients `c_0..c_{e-1}` over GF(p) has code `sum c_i p^i`; a GF(q^l)
//! element with coefficients `d_0..d_{l-1}` over GF(q) has code
//! `sum code(d_j) q^j`. Code 0 is zero and code 1 is one at both levels, so
//! GF(q) embeds into GF(q^l) by keeping the code unchanged.
//!
//! Supported fields satisfy `q^l <= 2^32` ([`MAX_FIELD_ORDER`]). Fields with at
//! most 2^16 elements get log/antilog tables; larger ones fall back to
//! schoolbook multiplication modulo the defining polynomial.

use std::fmt;
use std::hash::Hash;
use std::ops::AddAssign;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poly;

/// Largest supported value of `q^l`.
pub const MAX_FIELD_ORDER: u64 = 1 << 32;

const TABLE_LIMIT: u64 = 1 << 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GfError {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("extension degrees must be at least 1 (e = {e}, l = {l})")]
    BadDegree { e: u32, l: u32 },
    #[error("field order {p}^({e}*{l}) exceeds the supported ceiling 2^32")]
    TooLarge { p: u64, e: u32, l: u32 },
    #[error("{0} modulus is not monic of the expected degree")]
    BadModulus(&'static str),
    #[error("{0} modulus is reducible")]
    Reducible(&'static str),
    #[error("inversion of zero")]
    ZeroInverse,
    #[error("expected {expected} symbols, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("value {value} out of range for a field of order {order}")]
    OutOfRange { value: u64, order: u64 },
}

/// Minimal interface shared by GF(q) and GF(q^l); the polynomial and
/// linear-algebra helpers are generic over it.
pub trait Field {
    type Elem: Copy + Eq + Ord + Hash + fmt::Debug;

    fn order(&self) -> u64;
    fn zero(&self) -> Self::Elem;
    fn one(&self) -> Self::Elem;
    fn add(&self, a: Self::Elem, b: Self::Elem) -> Self::Elem;
    fn neg(&self, a: Self::Elem) -> Self::Elem;
    fn mul(&self, a: Self::Elem, b: Self::Elem) -> Self::Elem;
    fn inv(&self, a: Self::Elem) -> Result<Self::Elem, GfError>;
    /// The element with enumeration index `index < order()`.
    fn element(&self, index: u64) -> Self::Elem;

    fn sub(&self, a: Self::Elem, b: Self::Elem) -> Self::Elem {
        self.add(a, self.neg(b))
    }

    fn is_zero(&self, a: Self::Elem) -> bool {
        a == self.zero()
    }

    fn pow(&self, a: Self::Elem, mut n: u64) -> Self::Elem {
        let mut base = a;
        let mut acc = self.one();
        while n > 0 {
            if n & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            n >>= 1;
        }
        acc
    }

    fn elements(&self) -> impl Iterator<Item = Self::Elem> + '_ {
        (0..self.order()).map(move |i| self.element(i))
    }
}

/// Element of the base field GF(q).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BaseElem(pub u32);

/// Element of the extension field GF(q^l).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ExtElem(pub u32);

impl BaseElem {
    pub const ZERO: BaseElem = BaseElem(0);
    pub const ONE: BaseElem = BaseElem(1);
}

impl ExtElem {
    pub const ZERO: ExtElem = ExtElem(0);
    pub const ONE: ExtElem = ExtElem(1);
}

impl fmt::Display for BaseElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for ExtElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

// ---------------------------------------------------------------------------
// Operation counters
// ---------------------------------------------------------------------------

/// Counts of GF(q^l) operations performed inside a measurement scope.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounters {
    pub ext_mults: u64,
    pub ext_frobenius: u64,
    pub ext_exponentiations: u64,
}

impl OpCounters {
    pub fn reset(&mut self) {
        *self = OpCounters::default();
    }

    /// Frobenius applications plus generic exponentiations.
    pub fn exp_total(&self) -> u64 {
        self.ext_frobenius + self.ext_exponentiations
    }
}

impl AddAssign for OpCounters {
    fn add_assign(&mut self, rhs: Self) {
        self.ext_mults += rhs.ext_mults;
        self.ext_frobenius += rhs.ext_frobenius;
        self.ext_exponentiations += rhs.ext_exponentiations;
    }
}

/// GF(q^l) view that records every multiplication, Frobenius step and
/// exponentiation into an [`OpCounters`]. Additions are free.
pub struct Counted<'a> {
    field: &'a ExtField,
    ops: &'a mut OpCounters,
}

impl Counted<'_> {
    pub fn field(&self) -> &ExtField {
        self.field
    }

    pub fn add(&self, a: ExtElem, b: ExtElem) -> ExtElem {
        self.field.add(a, b)
    }

    pub fn mul(&mut self, a: ExtElem, b: ExtElem) -> ExtElem {
        self.ops.ext_mults += 1;
        self.field.mul(a, b)
    }

    pub fn frobenius(&mut self, a: ExtElem) -> ExtElem {
        self.ops.ext_frobenius += 1;
        self.field.frobenius(a)
    }

    pub fn pow(&mut self, a: ExtElem, n: u64) -> ExtElem {
        self.ops.ext_exponentiations += 1;
        self.field.pow(a, n)
    }
}

// ---------------------------------------------------------------------------
// Helpers
// ---------------------------------------------------------------------------

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 2u64;
    while d * d <= n {
        if n.is_multiple_of(d) {
            out.push(d);
            while n.is_multiple_of(d) {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// Digit-wise addition of two base-`p` packed codes.
fn digit_add(mut a: u64, mut b: u64, p: u64) -> u64 {
    if p == 2 {
        return a ^ b;
    }
    let (mut out, mut place) = (0u64, 1u64);
    while a > 0 || b > 0 {
        out += ((a % p + b % p) % p) * place;
        a /= p;
        b /= p;
        if a > 0 || b > 0 {
            place *= p;
        }
    }
    out
}

fn digit_neg(mut a: u64, p: u64) -> u64 {
    if p == 2 {
        return a;
    }
    let (mut out, mut place) = (0u64, 1u64);
    while a > 0 {
        out += ((p - a % p) % p) * place;
        a /= p;
        if a > 0 {
            place *= p;
        }
    }
    out
}

struct LogTables {
    exp: Vec<u32>,
    log: Vec<u32>,
}

impl LogTables {
    /// Builds tables from a slow multiplication; `order <= TABLE_LIMIT`.
    fn build(order: u64, mul: impl Fn(u32, u32) -> u32) -> Self {
        let n = order - 1;
        let pow = |a: u32, mut k: u64| {
            let (mut base, mut acc) = (a, 1u32);
            while k > 0 {
                if k & 1 == 1 {
                    acc = mul(acc, base);
                }
                base = mul(base, base);
                k >>= 1;
            }
            acc
        };
        let factors = prime_factors(n);
        let generator = (1..order as u32)
            .find(|&g| factors.iter().all(|&f| pow(g, n / f) != 1))
            .expect("multiplicative group of a finite field is cyclic");
        let mut exp = vec![0u32; 2 * n as usize];
        let mut log = vec![0u32; order as usize];
        let mut x = 1u32;
        for i in 0..n as usize {
            exp[i] = x;
            exp[i + n as usize] = x;
            log[x as usize] = i as u32;
            x = mul(x, generator);
        }
        LogTables { exp, log }
    }

    fn mul(&self, a: u32, b: u32) -> u32 {
        if a == 0 || b == 0 {
            return 0;
        }
        self.exp[(self.log[a as usize] + self.log[b as usize]) as usize]
    }

    fn inv(&self, a: u32) -> u32 {
        let n = self.log.len() as u32 - 1;
        self.exp[(n - self.log[a as usize]) as usize]
    }

    fn pow(&self, a: u32, k: u64) -> u32 {
        if k == 0 {
            return 1;
        }
        if a == 0 {
            return 0;
        }
        let n = self.log.len() as u64 - 1;
        let e = (self.log[a as usize] as u64 * (k % n)) % n;
        self.exp[e as usize]
    }
}

// ---------------------------------------------------------------------------
// GF(q)
// ---------------------------------------------------------------------------

/// The base field GF(q) = GF(p)[t] / (base modulus), q = p^e.
#[derive(Clone)]
pub struct BaseField {
    p: u64,
    e: u32,
    q: u64,
    modulus: Vec<u64>,
    tables: Option<Arc<LogTables>>,
}

impl fmt::Debug for BaseField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BaseField")
            .field("p", &self.p)
            .field("e", &self.e)
            .field("modulus", &self.modulus)
            .finish()
    }
}

impl BaseField {
    /// The prime field GF(p), modelled as degree-1 extension with modulus `t`.
    pub fn prime(p: u64) -> Result<Self, GfError> {
        if !is_prime(p) {
            return Err(GfError::NotPrime(p));
        }
        if p > MAX_FIELD_ORDER {
            return Err(GfError::TooLarge { p, e: 1, l: 1 });
        }
        Ok(Self::assemble(p, 1, vec![0, 1]))
    }

    /// GF(p^e) with the given monic modulus (coefficients low degree first).
    pub fn new(p: u64, e: u32, modulus: Vec<u64>) -> Result<Self, GfError> {
        let prime = Self::prime(p)?;
        if e == 0 {
            return Err(GfError::BadDegree { e, l: 1 });
        }
        match (p as u128).checked_pow(e) {
            Some(q) if q <= MAX_FIELD_ORDER as u128 => {}
            _ => return Err(GfError::TooLarge { p, e, l: 1 }),
        }
        if modulus.len() != e as usize + 1 || modulus[e as usize] != 1 || modulus.iter().any(|&c| c >= p) {
            return Err(GfError::BadModulus("base"));
        }
        let as_elems: Vec<BaseElem> = modulus.iter().map(|&c| BaseElem(c as u32)).collect();
        if !poly::is_irreducible(&prime, &as_elems) {
            return Err(GfError::Reducible("base"));
        }
        Ok(Self::assemble(p, e, modulus))
    }

    fn assemble(p: u64, e: u32, modulus: Vec<u64>) -> Self {
        let q = p.pow(e);
        let mut field = BaseField { p, e, q, modulus, tables: None };
        if q <= TABLE_LIMIT && q > 1 {
            let slow = field.clone();
            field.tables = Some(Arc::new(LogTables::build(q, |a, b| slow.mul_slow(a, b))));
        }
        field
    }

    pub fn characteristic(&self) -> u64 {
        self.p
    }

    pub fn degree(&self) -> u32 {
        self.e
    }

    pub fn modulus(&self) -> &[u64] {
        &self.modulus
    }

    /// Checked conversion from a packed code.
    pub fn elem(&self, code: u64) -> Result<BaseElem, GfError> {
        if code >= self.q {
            return Err(GfError::OutOfRange { value: code, order: self.q });
        }
        Ok(BaseElem(code as u32))
    }

    /// Coefficients over GF(p), low degree first.
    pub fn coeffs(&self, a: BaseElem) -> Vec<u64> {
        let mut x = a.0 as u64;
        (0..self.e)
            .map(|_| {
                let d = x % self.p;
                x /= self.p;
                d
            })
            .collect()
    }

    pub fn from_coeffs(&self, coeffs: &[u64]) -> Result<BaseElem, GfError> {
        if coeffs.len() != self.e as usize {
            return Err(GfError::LengthMismatch { expected: self.e as usize, got: coeffs.len() });
        }
        let mut code = 0u64;
        for &c in coeffs.iter().rev() {
            if c >= self.p {
                return Err(GfError::OutOfRange { value: c, order: self.p });
            }
            code = code * self.p + c;
        }
        Ok(BaseElem(code as u32))
    }

    fn mul_slow(&self, a: u32, b: u32) -> u32 {
        let p = self.p;
        if self.e == 1 {
            return ((a as u64 * b as u64) % p) as u32;
        }
        let e = self.e as usize;
        let ca = self.coeffs(BaseElem(a));
        let cb = self.coeffs(BaseElem(b));
        let mut prod = vec![0u64; 2 * e - 1];
        for (i, &x) in ca.iter().enumerate() {
            if x == 0 {
                continue;
            }
            for (j, &y) in cb.iter().enumerate() {
                prod[i + j] = (prod[i + j] + x * y % p) % p;
            }
        }
        for i in (e..2 * e - 1).rev() {
            let c = prod[i];
            if c == 0 {
                continue;
            }
            for j in 0..e {
                let sub = c * self.modulus[j] % p;
                prod[i - e + j] = (prod[i - e + j] + p - sub) % p;
            }
            prod[i] = 0;
        }
        self.from_coeffs(&prod[..e]).expect("reduced coefficients").0
    }
}

impl Field for BaseField {
    type Elem = BaseElem;

    fn order(&self) -> u64 {
        self.q
    }

    fn zero(&self) -> BaseElem {
        BaseElem::ZERO
    }

    fn one(&self) -> BaseElem {
        BaseElem::ONE
    }

    fn add(&self, a: BaseElem, b: BaseElem) -> BaseElem {
        if self.e == 1 {
            return BaseElem(((a.0 as u64 + b.0 as u64) % self.p) as u32);
        }
        BaseElem(digit_add(a.0 as u64, b.0 as u64, self.p) as u32)
    }

    fn neg(&self, a: BaseElem) -> BaseElem {
        if self.e == 1 {
            return BaseElem(((self.p - a.0 as u64) % self.p) as u32);
        }
        BaseElem(digit_neg(a.0 as u64, self.p) as u32)
    }

    fn mul(&self, a: BaseElem, b: BaseElem) -> BaseElem {
        match &self.tables {
            Some(t) => BaseElem(t.mul(a.0, b.0)),
            None => BaseElem(self.mul_slow(a.0, b.0)),
        }
    }

    fn inv(&self, a: BaseElem) -> Result<BaseElem, GfError> {
        if a.0 == 0 {
            return Err(GfError::ZeroInverse);
        }
        Ok(match &self.tables {
            Some(t) => BaseElem(t.inv(a.0)),
            None => self.pow(a, self.q - 2),
        })
    }

    fn pow(&self, a: BaseElem, n: u64) -> BaseElem {
        if let Some(t) = &self.tables {
            return BaseElem(t.pow(a.0, n));
        }
        let (mut base, mut acc, mut n) = (a, BaseElem::ONE, n);
        while n > 0 {
            if n & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            n >>= 1;
        }
        acc
    }

    fn element(&self, index: u64) -> BaseElem {
        debug_assert!(index < self.q);
        BaseElem(index as u32)
    }
}

// ---------------------------------------------------------------------------
// Field parameters
// ---------------------------------------------------------------------------

/// Serializable description of the tower. Moduli are coefficient arrays,
/// low degree first; `top_modulus` entries are packed GF(q) codes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldParams {
    pub p: u64,
    pub e: u32,
    pub l: u32,
    pub base_modulus: Vec<u64>,
    pub top_modulus: Vec<u64>,
    pub seed: u64,
}

impl FieldParams {
    /// Finds deterministic irreducible moduli for GF((p^e)^l).
    pub fn generate(p: u64, e: u32, l: u32, seed: u64) -> Result<Self, GfError> {
        check_shape(p, e, l)?;
        let prime = BaseField::prime(p)?;
        let base_modulus: Vec<u64> =
            find_irreducible(e as usize, &prime, seed).into_iter().map(|c| c.0 as u64).collect();
        let base = BaseField::new(p, e, base_modulus.clone())?;
        let top_modulus = find_irreducible(l as usize, &base, seed).into_iter().map(|c| c.0 as u64).collect();
        Ok(FieldParams { p, e, l, base_modulus, top_modulus, seed })
    }

    pub fn q(&self) -> u64 {
        self.p.pow(self.e)
    }
}

fn check_shape(p: u64, e: u32, l: u32) -> Result<(), GfError> {
    if !is_prime(p) {
        return Err(GfError::NotPrime(p));
    }
    if e == 0 || l == 0 {
        return Err(GfError::BadDegree { e, l });
    }
    let total = e.checked_mul(l).ok_or(GfError::TooLarge { p, e, l })?;
    match (p as u128).checked_pow(total) {
        Some(order) if order <= MAX_FIELD_ORDER as u128 => Ok(()),
        _ => Err(GfError::TooLarge { p, e, l }),
    }
}

/// Deterministic search for a monic irreducible polynomial of `degree` over
/// `over`. Candidates are the monic polynomials indexed lexicographically by
/// their lower coefficients (base-`|over|` digits, low degree first); the scan
/// starts at `seed` modulo the candidate count and wraps around.
pub fn find_irreducible<F: Field>(degree: usize, over: &F, seed: u64) -> Vec<F::Elem> {
    assert!(degree >= 1, "degree must be at least 1");
    let q = over.order();
    let count = (q as u128).checked_pow(degree as u32);
    let start = match count {
        Some(c) => (seed as u128 % c) as u64,
        None => seed,
    };
    let mut t = start;
    loop {
        let mut cand = Vec::with_capacity(degree + 1);
        let mut x = t;
        for _ in 0..degree {
            cand.push(over.element(x % q));
            x /= q;
        }
        cand.push(over.one());
        if poly::is_irreducible(over, &cand) {
            return cand;
        }
        t = t.wrapping_add(1);
        if let Some(c) = count {
            if t as u128 >= c {
                t = 0;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// GF(q^l)
// ---------------------------------------------------------------------------

/// The extension field GF(q^l) = GF(q)[x] / (top modulus). Immutable after
/// construction; clones share lookup tables.
#[derive(Clone)]
pub struct ExtField {
    base: BaseField,
    l: u32,
    order: u64,
    modulus: Vec<BaseElem>,
    tables: Option<Arc<LogTables>>,
    params: FieldParams,
}

impl fmt::Debug for ExtField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExtField").field("params", &self.params).finish()
    }
}

impl ExtField {
    pub fn new(params: FieldParams) -> Result<Self, GfError> {
        check_shape(params.p, params.e, params.l)?;
        let base = BaseField::new(params.p, params.e, params.base_modulus.clone())?;
        let l = params.l as usize;
        let q = base.order();
        if params.top_modulus.len() != l + 1 || params.top_modulus[l] != 1 || params.top_modulus.iter().any(|&c| c >= q) {
            return Err(GfError::BadModulus("top"));
        }
        let modulus: Vec<BaseElem> = params.top_modulus.iter().map(|&c| BaseElem(c as u32)).collect();
        if !poly::is_irreducible(&base, &modulus) {
            return Err(GfError::Reducible("top"));
        }
        let order = q.pow(params.l);
        let mut field = ExtField { base, l: params.l, order, modulus, tables: None, params };
        if order <= TABLE_LIMIT && order > 1 {
            let slow = field.clone();
            field.tables = Some(Arc::new(LogTables::build(order, |a, b| slow.mul_slow(a, b))));
        }
        Ok(field)
    }

    /// Shorthand for `ExtField::new(FieldParams::generate(..))`.
    pub fn generate(p: u64, e: u32, l: u32, seed: u64) -> Result<Self, GfError> {
        Self::new(FieldParams::generate(p, e, l, seed)?)
    }

    pub fn params(&self) -> &FieldParams {
        &self.params
    }

    pub fn base(&self) -> &BaseField {
        &self.base
    }

    /// Size `q` of the base field.
    pub fn q(&self) -> u64 {
        self.base.order()
    }

    /// Extension degree `l` over GF(q).
    pub fn degree(&self) -> usize {
        self.l as usize
    }

    pub fn counted<'a>(&'a self, ops: &'a mut OpCounters) -> Counted<'a> {
        Counted { field: self, ops }
    }

    /// Checked conversion from a packed code.
    pub fn elem(&self, code: u64) -> Result<ExtElem, GfError> {
        if code >= self.order {
            return Err(GfError::OutOfRange { value: code, order: self.order });
        }
        Ok(ExtElem(code as u32))
    }

    /// Coefficients over GF(q) in the polynomial basis, low degree first.
    pub fn coeffs(&self, a: ExtElem) -> Vec<BaseElem> {
        let q = self.q();
        let mut x = a.0 as u64;
        (0..self.l)
            .map(|_| {
                let d = x % q;
                x /= q;
                BaseElem(d as u32)
            })
            .collect()
    }

    fn pack(&self, coeffs: &[BaseElem]) -> ExtElem {
        let q = self.q();
        let code = coeffs.iter().rev().fold(0u64, |acc, c| acc * q + c.0 as u64);
        ExtElem(code as u32)
    }

    /// Reads `l` base symbols as one extension element.
    pub fn msg_to_ext(&self, msg: &[BaseElem]) -> Result<ExtElem, GfError> {
        if msg.len() != self.degree() {
            return Err(GfError::LengthMismatch { expected: self.degree(), got: msg.len() });
        }
        if let Some(bad) = msg.iter().find(|c| c.0 as u64 >= self.q()) {
            return Err(GfError::OutOfRange { value: bad.0 as u64, order: self.q() });
        }
        Ok(self.pack(msg))
    }

    pub fn ext_to_msg(&self, a: ExtElem) -> Vec<BaseElem> {
        self.coeffs(a)
    }

    /// The subfield embedding GF(q) -> GF(q^l).
    pub fn embed_base(&self, b: BaseElem) -> ExtElem {
        ExtElem(b.0)
    }

    /// `Some(b)` when `a` lies in the embedded copy of GF(q).
    pub fn as_base(&self, a: ExtElem) -> Option<BaseElem> {
        ((a.0 as u64) < self.q()).then_some(BaseElem(a.0))
    }

    /// `c * a` for a base-field scalar, computed coefficient-wise.
    pub fn scale_by_base(&self, c: BaseElem, a: ExtElem) -> ExtElem {
        if c == BaseElem::ZERO || a == ExtElem::ZERO {
            return ExtElem::ZERO;
        }
        if c == BaseElem::ONE {
            return a;
        }
        if let Some(t) = &self.tables {
            return ExtElem(t.mul(c.0, a.0));
        }
        let scaled: Vec<BaseElem> = self.coeffs(a).into_iter().map(|x| self.base.mul(c, x)).collect();
        self.pack(&scaled)
    }

    /// The q-power Frobenius map `a -> a^q`.
    pub fn frobenius(&self, a: ExtElem) -> ExtElem {
        self.pow(a, self.q())
    }

    /// `a^(q^times)`.
    pub fn frobenius_iter(&self, a: ExtElem, times: usize) -> ExtElem {
        (0..times).fold(a, |x, _| self.frobenius(x))
    }

    fn mul_slow(&self, a: u32, b: u32) -> u32 {
        let l = self.degree();
        if l == 1 {
            return self.base.mul(BaseElem(a), BaseElem(b)).0;
        }
        let ca = self.coeffs(ExtElem(a));
        let cb = self.coeffs(ExtElem(b));
        let f = &self.base;
        let mut prod = vec![BaseElem::ZERO; 2 * l - 1];
        for (i, &x) in ca.iter().enumerate() {
            if x == BaseElem::ZERO {
                continue;
            }
            for (j, &y) in cb.iter().enumerate() {
                prod[i + j] = f.add(prod[i + j], f.mul(x, y));
            }
        }
        for i in (l..2 * l - 1).rev() {
            let c = prod[i];
            if c == BaseElem::ZERO {
                continue;
            }
            for j in 0..l {
                prod[i - l + j] = f.sub(prod[i - l + j], f.mul(c, self.modulus[j]));
            }
            prod[i] = BaseElem::ZERO;
        }
        self.pack(&prod[..l]).0
    }
}

impl Field for ExtField {
    type Elem = ExtElem;

    fn order(&self) -> u64 {
        self.order
    }

    fn zero(&self) -> ExtElem {
        ExtElem::ZERO
    }

    fn one(&self) -> ExtElem {
        ExtElem::ONE
    }

    fn add(&self, a: ExtElem, b: ExtElem) -> ExtElem {
        ExtElem(digit_add(a.0 as u64, b.0 as u64, self.base.characteristic()) as u32)
    }

    fn neg(&self, a: ExtElem) -> ExtElem {
        ExtElem(digit_neg(a.0 as u64, self.base.characteristic()) as u32)
    }

    fn mul(&self, a: ExtElem, b: ExtElem) -> ExtElem {
        match &self.tables {
            Some(t) => ExtElem(t.mul(a.0, b.0)),
            None => ExtElem(self.mul_slow(a.0, b.0)),
        }
    }

    fn inv(&self, a: ExtElem) -> Result<ExtElem, GfError> {
        if a == ExtElem::ZERO {
            return Err(GfError::ZeroInverse);
        }
        Ok(match &self.tables {
            Some(t) => ExtElem(t.inv(a.0)),
            None => self.pow(a, self.order - 2),
        })
    }

    fn pow(&self, a: ExtElem, n: u64) -> ExtElem {
        if let Some(t) = &self.tables {
            return ExtElem(t.pow(a.0, n));
        }
        let (mut base, mut acc, mut n) = (a, ExtElem::ONE, n);
        while n > 0 {
            if n & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            n >>= 1;
        }
        acc
    }

    fn element(&self, index: u64) -> ExtElem {
        debug_assert!(index < self.order);
        ExtElem(index as u32)
    }
}
