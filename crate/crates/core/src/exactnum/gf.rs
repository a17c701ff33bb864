//! Prime fields and small extension fields `GF(p^k)`.
//!
//! Elements are stored as their canonical index: for `GF(p)` the least
//! residue, for `GF(p^k)` the base-`p` integer `c_0 + c_1 p + ... + c_{k-1} p^{k-1}`
//! of the least-residue coefficient vector modulo the field's modulus.
//! Extension fields multiply through discrete log tables.

use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;
use std::sync::{Mutex, OnceLock};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::field::{Field, FiniteField};

const MAX_EXTENSION_ORDER: u64 = 1 << 24;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FieldError {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("characteristic {0} is outside the supported range (p < 2^32)")]
    CharacteristicTooLarge(u64),
    #[error("extension degree must be at least 1")]
    ZeroDegree,
    #[error("modulus must be monic of degree {expected}, got {got:?}")]
    BadModulus { expected: u32, got: Vec<u64> },
    #[error("modulus {0:?} is reducible")]
    Reducible(Vec<u64>),
    #[error("field order {0} exceeds the supported table size")]
    TooLarge(u64),
    #[error("the rationals are not a finite field")]
    NotFinite,
    #[error("cannot parse field `{0}`")]
    Parse(String),
}

/// Description of an exact field.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FieldSpec {
    Rationals,
    Prime { p: u64 },
    /// `modulus` lists the coefficients of a monic irreducible polynomial of
    /// degree `k`, constant term first.
    Extension { p: u64, k: u32, modulus: Vec<u64> },
}

impl FieldSpec {
    pub fn prime(p: u64) -> Result<Self, FieldError> {
        check_characteristic(p)?;
        Ok(FieldSpec::Prime { p })
    }

    /// `GF(p^k)` with the default modulus; `k = 1` gives the prime field.
    pub fn finite(p: u64, k: u32) -> Result<Self, FieldError> {
        check_characteristic(p)?;
        match k {
            0 => Err(FieldError::ZeroDegree),
            1 => Ok(FieldSpec::Prime { p }),
            _ => {
                if p.checked_pow(k).is_none_or(|q| q > MAX_EXTENSION_ORDER) {
                    return Err(FieldError::TooLarge(p.saturating_pow(k)));
                }
                Ok(FieldSpec::Extension { p, k, modulus: default_modulus(p, k) })
            }
        }
    }

    /// A finite field of order `q = p^k`.
    pub fn of_order(q: u64) -> Result<Self, FieldError> {
        if q < 2 {
            return Err(FieldError::NotPrime(q));
        }
        let p = smallest_prime_factor(q);
        let mut k = 0;
        let mut rest = q;
        while rest.is_multiple_of(p) {
            rest /= p;
            k += 1;
        }
        if rest != 1 {
            return Err(FieldError::NotPrime(q));
        }
        FieldSpec::finite(p, k)
    }

    pub fn with_modulus(p: u64, modulus: Vec<u64>) -> Result<Self, FieldError> {
        check_characteristic(p)?;
        let k = modulus.len().saturating_sub(1) as u32;
        if k == 0 || *modulus.last().unwrap() != 1 || modulus.iter().any(|&c| c >= p) {
            return Err(FieldError::BadModulus { expected: k.max(1), got: modulus });
        }
        if !is_irreducible(&modulus, p) {
            return Err(FieldError::Reducible(modulus));
        }
        if k == 1 {
            return Ok(FieldSpec::Prime { p });
        }
        Ok(FieldSpec::Extension { p, k, modulus })
    }

    pub fn characteristic(&self) -> u64 {
        match self {
            FieldSpec::Rationals => 0,
            FieldSpec::Prime { p } | FieldSpec::Extension { p, .. } => *p,
        }
    }

    pub fn degree(&self) -> u32 {
        match self {
            FieldSpec::Extension { k, .. } => *k,
            _ => 1,
        }
    }

    /// Number of elements, `None` for the rationals.
    pub fn order(&self) -> Option<u64> {
        match self {
            FieldSpec::Rationals => None,
            FieldSpec::Prime { p } => Some(*p),
            FieldSpec::Extension { p, k, .. } => Some(p.pow(*k)),
        }
    }

    /// The field of order `q^2` over the same prime.
    pub fn quadratic_extension(&self) -> Result<Self, FieldError> {
        match self {
            FieldSpec::Rationals => Err(FieldError::NotFinite),
            _ => FieldSpec::finite(self.characteristic(), 2 * self.degree()),
        }
    }

    pub fn validate(&self) -> Result<(), FieldError> {
        match self {
            FieldSpec::Rationals => Ok(()),
            FieldSpec::Prime { p } => check_characteristic(*p),
            FieldSpec::Extension { p, modulus, .. } => {
                FieldSpec::with_modulus(*p, modulus.clone()).map(|_| ())
            }
        }
    }
}

impl fmt::Display for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldSpec::Rationals => write!(f, "QQ"),
            FieldSpec::Prime { p } => write!(f, "GF({p})"),
            FieldSpec::Extension { p, k, .. } => write!(f, "GF({p}^{k})"),
        }
    }
}

impl FromStr for FieldSpec {
    type Err = FieldError;

    /// Accepts `QQ`, `9`, `3^2`, `GF(9)` and `GF(3^2)`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("qq") || t.eq_ignore_ascii_case("q") {
            return Ok(FieldSpec::Rationals);
        }
        let inner = t
            .strip_prefix("GF(")
            .or_else(|| t.strip_prefix("gf("))
            .and_then(|r| r.strip_suffix(')'))
            .unwrap_or(t);
        let bad = || FieldError::Parse(s.to_string());
        match inner.split_once('^') {
            Some((p, k)) => {
                let p = p.trim().parse::<u64>().map_err(|_| bad())?;
                let k = k.trim().parse::<u32>().map_err(|_| bad())?;
                FieldSpec::finite(p, k)
            }
            None => FieldSpec::of_order(inner.parse::<u64>().map_err(|_| bad())?),
        }
    }
}

fn check_characteristic(p: u64) -> Result<(), FieldError> {
    if p >= 1 << 32 {
        return Err(FieldError::CharacteristicTooLarge(p));
    }
    if !is_prime(p) {
        return Err(FieldError::NotPrime(p));
    }
    Ok(())
}

/// Deterministic trial division; adequate for `p < 2^32`.
pub fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    smallest_prime_factor(p) == p
}

fn smallest_prime_factor(n: u64) -> u64 {
    if n.is_multiple_of(2) {
        return 2;
    }
    let mut d = 3;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return d;
        }
        d += 2;
    }
    n
}

fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    while n > 1 {
        let f = smallest_prime_factor(n);
        out.push(f);
        while n.is_multiple_of(f) {
            n /= f;
        }
    }
    out
}

// Dense polynomials over GF(p), constant term first, no trailing zeros.

fn trim(mut a: Vec<u64>) -> Vec<u64> {
    while a.last() == Some(&0) {
        a.pop();
    }
    a
}

fn poly_rem(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let b = trim(b.to_vec());
    let mut r = trim(a.to_vec());
    let lead_inv = inv_mod(*b.last().unwrap(), p);
    while r.len() >= b.len() {
        let shift = r.len() - b.len();
        let c = r.last().unwrap() * lead_inv % p;
        for (i, &bc) in b.iter().enumerate() {
            r[shift + i] = (r[shift + i] + p - c * bc % p) % p;
        }
        r = trim(r);
    }
    r
}

fn inv_mod(a: u64, p: u64) -> u64 {
    let e = (a as i64).extended_gcd(&(p as i64));
    debug_assert_eq!(e.gcd, 1);
    e.x.rem_euclid(p as i64) as u64
}

/// Irreducibility by exhaustive search for monic factors of degree `<= k/2`.
pub fn is_irreducible(modulus: &[u64], p: u64) -> bool {
    let f = trim(modulus.to_vec());
    let k = f.len().saturating_sub(1);
    if k == 0 {
        return false;
    }
    for d in 1..=k / 2 {
        let count = p.pow(d as u32);
        for t in 0..count {
            let mut g = Vec::with_capacity(d + 1);
            let mut rest = t;
            for _ in 0..d {
                g.push(rest % p);
                rest /= p;
            }
            g.push(1);
            if poly_rem(&f, &g, p).is_empty() {
                return false;
            }
        }
    }
    true
}

/// Lexicographically smallest monic irreducible of degree `k`, comparing the
/// coefficient list `(c_0, ..., c_{k-1})` from the constant term.
pub fn default_modulus(p: u64, k: u32) -> Vec<u64> {
    let count = p.pow(k);
    for t in 0..count {
        let mut coeffs = vec![0u64; k as usize];
        let mut rest = t;
        for slot in (0..k as usize).rev() {
            coeffs[slot] = rest % p;
            rest /= p;
        }
        coeffs.push(1);
        if is_irreducible(&coeffs, p) {
            return coeffs;
        }
    }
    unreachable!("irreducible polynomials exist in every degree")
}

struct GfData {
    p: u64,
    k: u32,
    q: u64,
    modulus: Vec<u64>,
    // Extension fields only.
    exp: Vec<u32>,
    log: Vec<u32>,
}

impl GfData {
    fn digits(&self, mut v: u64) -> [u64; 8] {
        let mut d = [0u64; 8];
        for slot in d.iter_mut().take(self.k as usize) {
            *slot = v % self.p;
            v /= self.p;
        }
        d
    }

    fn undigits(&self, d: &[u64]) -> u64 {
        d.iter().rev().fold(0, |acc, &c| acc * self.p + c)
    }

    fn poly_mul(&self, a: u64, b: u64) -> u64 {
        let (da, db) = (self.digits(a), self.digits(b));
        let k = self.k as usize;
        let mut prod = vec![0u64; 2 * k];
        for i in 0..k {
            for j in 0..k {
                prod[i + j] = (prod[i + j] + da[i] * db[j]) % self.p;
            }
        }
        let mut r = poly_rem(&prod, &self.modulus, self.p);
        r.resize(k, 0);
        self.undigits(&r)
    }

    fn build_tables(&mut self) {
        let order = self.q - 1;
        let factors = prime_factors(order);
        let pow = |g: u64, mut e: u64| {
            let mut acc = 1u64;
            let mut base = g;
            while e > 0 {
                if e & 1 == 1 {
                    acc = self.poly_mul(acc, base);
                }
                base = self.poly_mul(base, base);
                e >>= 1;
            }
            acc
        };
        let generator = (2..self.q)
            .find(|&g| factors.iter().all(|&f| pow(g, order / f) != 1))
            .expect("multiplicative group is cyclic");
        let mut exp = vec![0u32; order as usize];
        let mut log = vec![0u32; self.q as usize];
        let mut cur = 1u64;
        for (i, slot) in exp.iter_mut().enumerate() {
            *slot = cur as u32;
            log[cur as usize] = i as u32;
            cur = self.poly_mul(cur, generator);
        }
        self.exp = exp;
        self.log = log;
    }
}

/// Handle to an interned finite field.
#[derive(Clone, Copy)]
pub struct GfField(&'static GfData);

fn registry() -> &'static Mutex<HashMap<(u64, Vec<u64>), &'static GfData>> {
    static REGISTRY: OnceLock<Mutex<HashMap<(u64, Vec<u64>), &'static GfData>>> = OnceLock::new();
    REGISTRY.get_or_init(|| Mutex::new(HashMap::new()))
}

impl GfField {
    pub fn new(spec: &FieldSpec) -> Result<GfField, FieldError> {
        spec.validate()?;
        let (p, k, modulus) = match spec {
            FieldSpec::Rationals => return Err(FieldError::NotFinite),
            FieldSpec::Prime { p } => (*p, 1, vec![0, 1]),
            FieldSpec::Extension { p, k, modulus } => (*p, *k, modulus.clone()),
        };
        let q = p.pow(k);
        if k > 1 && q > MAX_EXTENSION_ORDER {
            return Err(FieldError::TooLarge(q));
        }
        let key = (p, modulus.clone());
        let mut reg = registry().lock().expect("field registry poisoned");
        if let Some(data) = reg.get(&key) {
            return Ok(GfField(data));
        }
        let mut data = GfData { p, k, q, modulus, exp: Vec::new(), log: Vec::new() };
        if k > 1 {
            data.build_tables();
        }
        let leaked: &'static GfData = Box::leak(Box::new(data));
        reg.insert(key, leaked);
        Ok(GfField(leaked))
    }

    /// `GF(p^k)` with the default modulus.
    pub fn finite(p: u64, k: u32) -> Result<GfField, FieldError> {
        GfField::new(&FieldSpec::finite(p, k)?)
    }

    pub fn spec(&self) -> FieldSpec {
        if self.0.k == 1 {
            FieldSpec::Prime { p: self.0.p }
        } else {
            FieldSpec::Extension { p: self.0.p, k: self.0.k, modulus: self.0.modulus.clone() }
        }
    }

    pub fn characteristic(&self) -> u64 {
        self.0.p
    }

    pub fn degree(&self) -> u32 {
        self.0.k
    }

    pub fn order(&self) -> u64 {
        self.0.q
    }

    pub fn elem(&self, v: i64) -> Gf {
        Gf::from_i64(self, v)
    }

    /// Element from its coefficient vector in the polynomial basis.
    pub fn from_coeffs(&self, coeffs: &[u64]) -> Gf {
        let p = self.0.p;
        let reduced: Vec<u64> = coeffs.iter().map(|c| c % p).collect();
        let mut r = poly_rem(&reduced, &self.0.modulus, p);
        r.resize(self.0.k as usize, 0);
        Gf { field: *self, v: self.0.undigits(&r) }
    }

    pub fn elements(&self) -> impl Iterator<Item = Gf> + '_ {
        let f = *self;
        (0..self.0.q).map(move |v| Gf { field: f, v })
    }

    fn ptr(&self) -> *const GfData {
        self.0 as *const GfData
    }
}

impl PartialEq for GfField {
    fn eq(&self, other: &Self) -> bool {
        std::ptr::eq(self.ptr(), other.ptr())
    }
}

impl Eq for GfField {}

impl fmt::Debug for GfField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.spec())
    }
}

impl fmt::Display for GfField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.spec())
    }
}

/// Element of a finite field.
#[derive(Clone, Copy)]
pub struct Gf {
    field: GfField,
    v: u64,
}

impl Gf {
    pub fn field(&self) -> GfField {
        self.field
    }

    pub fn value(&self) -> u64 {
        self.v
    }

    /// Coefficient vector in the polynomial basis, constant term first.
    pub fn coeffs(&self) -> Vec<u64> {
        let d = self.field.0.digits(self.v);
        d[..self.field.0.k as usize].to_vec()
    }

    fn same_field(&self, other: &Gf) {
        assert!(self.field == other.field, "mixed fields: {} and {}", self.field, other.field);
    }
}

impl PartialEq for Gf {
    fn eq(&self, other: &Self) -> bool {
        self.field == other.field && self.v == other.v
    }
}

impl Eq for Gf {}

impl Hash for Gf {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.field.0.p.hash(state);
        self.field.0.k.hash(state);
        self.v.hash(state);
    }
}

impl fmt::Debug for Gf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.v)
    }
}

impl fmt::Display for Gf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.v)
    }
}

impl Add for Gf {
    type Output = Gf;
    fn add(self, rhs: Gf) -> Gf {
        self.same_field(&rhs);
        let d = self.field.0;
        let v = if d.k == 1 {
            let s = self.v + rhs.v;
            if s >= d.p { s - d.p } else { s }
        } else {
            let (a, b) = (d.digits(self.v), d.digits(rhs.v));
            let mut out = [0u64; 8];
            for i in 0..d.k as usize {
                out[i] = (a[i] + b[i]) % d.p;
            }
            d.undigits(&out[..d.k as usize])
        };
        Gf { field: self.field, v }
    }
}

impl Neg for Gf {
    type Output = Gf;
    fn neg(self) -> Gf {
        let d = self.field.0;
        let v = if d.k == 1 {
            if self.v == 0 { 0 } else { d.p - self.v }
        } else {
            let a = d.digits(self.v);
            let mut out = [0u64; 8];
            for i in 0..d.k as usize {
                out[i] = (d.p - a[i]) % d.p;
            }
            d.undigits(&out[..d.k as usize])
        };
        Gf { field: self.field, v }
    }
}

impl Sub for Gf {
    type Output = Gf;
    fn sub(self, rhs: Gf) -> Gf {
        self + (-rhs)
    }
}

impl Mul for Gf {
    type Output = Gf;
    fn mul(self, rhs: Gf) -> Gf {
        self.same_field(&rhs);
        let d = self.field.0;
        let v = if d.k == 1 {
            self.v * rhs.v % d.p
        } else if self.v == 0 || rhs.v == 0 {
            0
        } else {
            let s = d.log[self.v as usize] as u64 + d.log[rhs.v as usize] as u64;
            d.exp[(s % (d.q - 1)) as usize] as u64
        };
        Gf { field: self.field, v }
    }
}

impl Div for Gf {
    type Output = Gf;
    fn div(self, rhs: Gf) -> Gf {
        self * rhs.inverse().expect("division by zero in finite field")
    }
}

impl Field for Gf {
    type Ctx = GfField;

    fn ctx(&self) -> GfField {
        self.field
    }

    fn zero_in(ctx: &GfField) -> Gf {
        Gf { field: *ctx, v: 0 }
    }

    fn one_in(ctx: &GfField) -> Gf {
        Gf { field: *ctx, v: 1 }
    }

    fn from_i64(ctx: &GfField, v: i64) -> Gf {
        let p = ctx.0.p as i64;
        Gf { field: *ctx, v: v.rem_euclid(p) as u64 }
    }

    fn from_bigint(ctx: &GfField, v: &BigInt) -> Gf {
        let p = BigInt::from(ctx.0.p);
        let r = v.mod_floor(&p).to_u64().expect("residue fits in u64");
        Gf { field: *ctx, v: r }
    }

    fn is_zero(&self) -> bool {
        self.v == 0
    }

    fn inverse(&self) -> Option<Gf> {
        if self.v == 0 {
            return None;
        }
        let d = self.field.0;
        let v = if d.k == 1 {
            inv_mod(self.v, d.p)
        } else {
            let l = d.log[self.v as usize] as u64;
            d.exp[((d.q - 1 - l) % (d.q - 1)) as usize] as u64
        };
        Some(Gf { field: self.field, v })
    }
}

impl FiniteField for Gf {
    fn order(ctx: &GfField) -> u64 {
        ctx.0.q
    }

    fn from_index(ctx: &GfField, idx: u64) -> Gf {
        assert!(idx < ctx.0.q, "index {idx} out of range for {ctx}");
        Gf { field: *ctx, v: idx }
    }

    fn index(&self) -> u64 {
        self.v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_moduli() {
        assert_eq!(default_modulus(3, 2), vec![1, 0, 1]);
        assert_eq!(default_modulus(2, 2), vec![1, 1, 1]);
        assert_eq!(default_modulus(2, 3), vec![1, 0, 1, 1]);
        assert!(!is_irreducible(&[1, 0, 1], 5));
    }

    #[test]
    fn primality() {
        let small: Vec<u64> = (0..30).filter(|&p| is_prime(p)).collect();
        assert_eq!(small, vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29]);
        assert!(is_prime(4_294_967_291));
        assert_eq!(FieldSpec::prime(9), Err(FieldError::NotPrime(9)));
    }

    #[test]
    fn parse_specs() {
        assert_eq!("9".parse::<FieldSpec>().unwrap(), FieldSpec::finite(3, 2).unwrap());
        assert_eq!("GF(5^3)".parse::<FieldSpec>().unwrap(), FieldSpec::finite(5, 3).unwrap());
        assert_eq!("GF(7)".parse::<FieldSpec>().unwrap(), FieldSpec::Prime { p: 7 });
        assert!("12".parse::<FieldSpec>().is_err());
        assert_eq!(FieldSpec::finite(3, 2).unwrap().to_string(), "GF(3^2)");
    }

    #[test]
    fn reducible_modulus_rejected() {
        assert_eq!(
            FieldSpec::with_modulus(5, vec![1, 0, 1]),
            Err(FieldError::Reducible(vec![1, 0, 1]))
        );
    }

    #[test]
    fn extension_inverses() {
        for (p, k) in [(2, 2), (3, 2), (2, 4), (5, 3)] {
            let f = GfField::finite(p, k).unwrap();
            let one = Gf::one_in(&f);
            for a in f.elements().skip(1) {
                assert_eq!(a * a.inverse().unwrap(), one);
            }
            // Frobenius fixes exactly the prime subfield.
            let fixed = f.elements().filter(|a| a.pow(p) == *a).count() as u64;
            assert_eq!(fixed, p);
        }
    }

    #[test]
    fn interning_gives_equal_handles() {
        let a = GfField::finite(7, 2).unwrap();
        let b = GfField::new(&"49".parse().unwrap()).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, GfField::finite(7, 1).unwrap());
    }
}
