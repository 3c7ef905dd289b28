//! Dense univariate polynomials over any [`Field`], stored as coefficient
//! slices with the constant term first.

use crate::gf::Field;

/// Drops trailing zero coefficients.
pub fn trim<F: Field>(field: &F, mut p: Vec<F::Elem>) -> Vec<F::Elem> {
    while p.last().is_some_and(|&c| field.is_zero(c)) {
        p.pop();
    }
    p
}

/// Degree, or `None` for the zero polynomial.
pub fn degree<F: Field>(field: &F, p: &[F::Elem]) -> Option<usize> {
    p.iter().rposition(|&c| !field.is_zero(c))
}

pub fn add<F: Field>(field: &F, a: &[F::Elem], b: &[F::Elem]) -> Vec<F::Elem> {
    let n = a.len().max(b.len());
    let out = (0..n)
        .map(|i| {
            let x = a.get(i).copied().unwrap_or(field.zero());
            let y = b.get(i).copied().unwrap_or(field.zero());
            field.add(x, y)
        })
        .collect();
    trim(field, out)
}

pub fn sub<F: Field>(field: &F, a: &[F::Elem], b: &[F::Elem]) -> Vec<F::Elem> {
    let neg_b: Vec<_> = b.iter().map(|&c| field.neg(c)).collect();
    add(field, a, &neg_b)
}

pub fn mul<F: Field>(field: &F, a: &[F::Elem], b: &[F::Elem]) -> Vec<F::Elem> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![field.zero(); a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if field.is_zero(x) {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] = field.add(out[i + j], field.mul(x, y));
        }
    }
    trim(field, out)
}

/// Remainder of `a` modulo a nonzero `m`.
pub fn rem<F: Field>(field: &F, a: &[F::Elem], m: &[F::Elem]) -> Vec<F::Elem> {
    let dm = degree(field, m).expect("division by the zero polynomial");
    let lead_inv = field.inv(m[dm]).expect("nonzero leading coefficient");
    let mut r = trim(field, a.to_vec());
    while let Some(dr) = degree(field, &r) {
        if dr < dm {
            break;
        }
        let c = field.mul(r[dr], lead_inv);
        for j in 0..=dm {
            r[dr - dm + j] = field.sub(r[dr - dm + j], field.mul(c, m[j]));
        }
        r = trim(field, r);
    }
    r
}

/// Monic greatest common divisor (empty for gcd(0, 0)).
pub fn gcd<F: Field>(field: &F, a: &[F::Elem], b: &[F::Elem]) -> Vec<F::Elem> {
    let mut x = trim(field, a.to_vec());
    let mut y = trim(field, b.to_vec());
    while !y.is_empty() {
        let r = rem(field, &x, &y);
        x = y;
        y = r;
    }
    if let Some(&lead) = x.last() {
        let inv = field.inv(lead).expect("nonzero leading coefficient");
        x.iter_mut().for_each(|c| *c = field.mul(*c, inv));
    }
    x
}

/// `base^exp mod m`.
pub fn powmod<F: Field>(field: &F, base: &[F::Elem], mut exp: u64, m: &[F::Elem]) -> Vec<F::Elem> {
    let mut acc = vec![field.one()];
    let mut b = rem(field, base, m);
    while exp > 0 {
        if exp & 1 == 1 {
            acc = rem(field, &mul(field, &acc, &b), m);
        }
        b = rem(field, &mul(field, &b, &b), m);
        exp >>= 1;
    }
    rem(field, &acc, m)
}

/// Horner evaluation.
pub fn eval<F: Field>(field: &F, p: &[F::Elem], x: F::Elem) -> F::Elem {
    p.iter().rev().fold(field.zero(), |acc, &c| field.add(field.mul(acc, x), c))
}

/// Monic polynomial `(x - r_1)...(x - r_n)`.
pub fn from_roots<F: Field>(field: &F, roots: &[F::Elem]) -> Vec<F::Elem> {
    roots.iter().fold(vec![field.one()], |acc, &r| mul(field, &acc, &[field.neg(r), field.one()]))
}

/// Ben-Or irreducibility test: `f` of degree `d` is irreducible iff
/// `gcd(f, x^(Q^i) - x) = 1` for `i = 1..=d/2`, where `Q = |field|`.
pub fn is_irreducible<F: Field>(field: &F, f: &[F::Elem]) -> bool {
    let d = match degree(field, f) {
        Some(0) | None => return false,
        Some(d) => d,
    };
    if d == 1 {
        return true;
    }
    let x = vec![field.zero(), field.one()];
    let mut xp = x.clone();
    for _ in 0..d / 2 {
        xp = powmod(field, &xp, field.order(), f);
        let g = gcd(field, f, &sub(field, &xp, &x));
        if degree(field, &g) != Some(0) {
            return false;
        }
    }
    true
}
