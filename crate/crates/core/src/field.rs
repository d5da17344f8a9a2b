//! Exact scalar fields: arbitrary-precision rationals and small prime fields.
//!
//! Every algebraic routine in the crate is generic over [`Field`]. Elements of
//! a prime field carry their modulus, so a runtime [`FieldCtx`] is only needed
//! to conjure constants (`zero`, `one`, integer images) and to parse.

use std::fmt::{self, Debug, Display};
use std::hash::Hash;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

/// Largest prime modulus accepted; roots and discrete logs are found by scan.
pub const MAX_PRIME: u64 = 100_000;

pub type Rational = BigRational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FieldError {
    #[error("modulus {0} is not prime")]
    NotPrime(u64),
    #[error("modulus {0} exceeds the supported bound {MAX_PRIME}")]
    ModulusTooLarge(u64),
    #[error("cannot parse field designator `{0}` (expected `Q` or `Fp:<prime>`)")]
    BadDesignator(String),
    #[error("cannot parse field element `{0}`")]
    BadElement(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("field context {ctx} does not match the element type {expected}")]
    ContextMismatch { ctx: FieldCtx, expected: &'static str },
}

/// Which field a computation lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FieldCtx {
    Rationals,
    PrimeField(u64),
}

impl FieldCtx {
    pub fn prime(p: u64) -> Result<Self, FieldError> {
        if p > MAX_PRIME {
            return Err(FieldError::ModulusTooLarge(p));
        }
        if !is_prime(p) {
            return Err(FieldError::NotPrime(p));
        }
        Ok(FieldCtx::PrimeField(p))
    }

    /// 0 for the rationals.
    pub fn characteristic(&self) -> u64 {
        match self {
            FieldCtx::Rationals => 0,
            FieldCtx::PrimeField(p) => *p,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, FieldCtx::PrimeField(_))
    }
}

impl Display for FieldCtx {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldCtx::Rationals => write!(f, "Q"),
            FieldCtx::PrimeField(p) => write!(f, "Fp:{p}"),
        }
    }
}

impl FromStr for FieldCtx {
    type Err = FieldError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "Q" {
            return Ok(FieldCtx::Rationals);
        }
        let p = s
            .strip_prefix("Fp:")
            .and_then(|rest| rest.trim().parse::<u64>().ok())
            .ok_or_else(|| FieldError::BadDesignator(s.to_string()))?;
        FieldCtx::prime(p)
    }
}

pub fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= p {
        if p % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// An exact field. Constants are produced from a [`FieldCtx`]; the arithmetic
/// operators never need one.
pub trait Field:
    Clone
    + Debug
    + Display
    + Eq
    + Ord
    + Hash
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
{
    /// Human-readable type name used in mismatch errors.
    const NAME: &'static str;

    /// Checks that `ctx` describes this element type.
    fn check_ctx(ctx: &FieldCtx) -> Result<(), FieldError>;

    fn zero(ctx: &FieldCtx) -> Self;

    fn one(ctx: &FieldCtx) -> Self;

    fn from_i64(ctx: &FieldCtx, n: i64) -> Self;

    fn from_bigint(ctx: &FieldCtx, n: &BigInt) -> Self;

    /// Image of a rational number; `None` when its denominator vanishes in the field.
    fn from_rational(ctx: &FieldCtx, q: &Rational) -> Option<Self>;

    fn is_zero(&self) -> bool;

    fn inv(&self) -> Option<Self>;

    /// Field context this element lives in.
    fn ctx(&self) -> FieldCtx;

    fn parse(ctx: &FieldCtx, s: &str) -> Result<Self, FieldError>;

    /// All solutions of `x^k = a` in the field.
    fn kth_roots(&self, k: u32) -> Vec<Self>;

    /// Every element, for finite fields.
    fn elements(ctx: &FieldCtx) -> Option<Vec<Self>>;

    fn is_one(&self) -> bool {
        (self.clone() - Self::one(&self.ctx())).is_zero()
    }

    fn div(&self, other: &Self) -> Result<Self, FieldError> {
        other
            .inv()
            .map(|i| self.clone() * i)
            .ok_or(FieldError::DivisionByZero)
    }

    fn pow(&self, mut e: u64) -> Self {
        let mut base = self.clone();
        let mut acc = Self::one(&self.ctx());
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base.clone();
            }
            e >>= 1;
            if e > 0 {
                base = base.clone() * base;
            }
        }
        acc
    }

    /// Signed power; `None` for a negative power of zero.
    fn powi(&self, e: i64) -> Option<Self> {
        if e >= 0 {
            Some(self.pow(e as u64))
        } else {
            self.inv().map(|i| i.pow(e.unsigned_abs()))
        }
    }
}

// ---------------------------------------------------------------------------
// Rationals

impl Field for Rational {
    const NAME: &'static str = "rational";

    fn check_ctx(ctx: &FieldCtx) -> Result<(), FieldError> {
        match ctx {
            FieldCtx::Rationals => Ok(()),
            _ => Err(FieldError::ContextMismatch {
                ctx: *ctx,
                expected: Self::NAME,
            }),
        }
    }

    fn zero(_: &FieldCtx) -> Self {
        Zero::zero()
    }

    fn one(_: &FieldCtx) -> Self {
        One::one()
    }

    fn from_i64(_: &FieldCtx, n: i64) -> Self {
        BigRational::from_integer(BigInt::from(n))
    }

    fn from_bigint(_: &FieldCtx, n: &BigInt) -> Self {
        BigRational::from_integer(n.clone())
    }

    fn from_rational(_: &FieldCtx, q: &Rational) -> Option<Self> {
        Some(q.clone())
    }

    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }

    fn inv(&self) -> Option<Self> {
        if Zero::is_zero(self) {
            None
        } else {
            Some(self.recip())
        }
    }

    fn ctx(&self) -> FieldCtx {
        FieldCtx::Rationals
    }

    fn parse(_: &FieldCtx, s: &str) -> Result<Self, FieldError> {
        parse_rational(s)
    }

    fn kth_roots(&self, k: u32) -> Vec<Self> {
        rational_roots(self, k)
    }

    fn elements(_: &FieldCtx) -> Option<Vec<Self>> {
        None
    }
}

pub fn parse_rational(s: &str) -> Result<Rational, FieldError> {
    let bad = || FieldError::BadElement(s.to_string());
    let t = s.trim();
    let (num, den) = match t.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (t, "1"),
    };
    let num: BigInt = num.parse().map_err(|_| bad())?;
    let den: BigInt = den.parse().map_err(|_| bad())?;
    if den.is_zero() {
        return Err(FieldError::DivisionByZero);
    }
    Ok(BigRational::new(num, den))
}

/// Exact integer k-th root of a nonnegative integer, if it exists.
fn exact_root(n: &BigInt, k: u32) -> Option<BigInt> {
    let r = n.nth_root(k);
    if num_traits::pow(r.clone(), k as usize) == *n {
        Some(r)
    } else {
        None
    }
}

fn rational_roots(a: &Rational, k: u32) -> Vec<Rational> {
    assert!(k >= 1, "root degree must be positive");
    if k == 1 || Zero::is_zero(a) {
        return vec![a.clone()];
    }
    let negative = a.is_negative();
    if negative && k % 2 == 0 {
        return Vec::new();
    }
    let num = a.numer().abs();
    let den = a.denom().clone();
    let (Some(rn), Some(rd)) = (exact_root(&num, k), exact_root(&den, k)) else {
        return Vec::new();
    };
    let root = BigRational::new(rn, rd);
    if negative {
        vec![-root]
    } else if k % 2 == 0 {
        let mut v = vec![-root.clone(), root];
        v.sort();
        v
    } else {
        vec![root]
    }
}

// ---------------------------------------------------------------------------
// Prime fields

/// Residue modulo a prime `p ≤ MAX_PRIME`, stored reduced in `[0, p)`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Fp {
    value: u32,
    modulus: u32,
}

impl Fp {
    pub fn new(value: i64, modulus: u64) -> Self {
        let m = modulus as i64;
        Fp {
            value: value.rem_euclid(m) as u32,
            modulus: modulus as u32,
        }
    }

    pub fn value(&self) -> u64 {
        self.value as u64
    }

    pub fn modulus(&self) -> u64 {
        self.modulus as u64
    }

    fn same(&self, other: &Fp) -> u64 {
        debug_assert_eq!(self.modulus, other.modulus, "mixed prime fields");
        self.modulus as u64
    }
}

impl Debug for Fp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (mod {})", self.value, self.modulus)
    }
}

impl Display for Fp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

impl PartialOrd for Fp {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Fp {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.modulus, self.value).cmp(&(other.modulus, other.value))
    }
}

impl Add for Fp {
    type Output = Fp;
    fn add(self, rhs: Fp) -> Fp {
        let p = self.same(&rhs);
        Fp {
            value: ((self.value as u64 + rhs.value as u64) % p) as u32,
            modulus: self.modulus,
        }
    }
}

impl Sub for Fp {
    type Output = Fp;
    fn sub(self, rhs: Fp) -> Fp {
        let p = self.same(&rhs);
        Fp {
            value: ((self.value as u64 + p - rhs.value as u64) % p) as u32,
            modulus: self.modulus,
        }
    }
}

impl Mul for Fp {
    type Output = Fp;
    fn mul(self, rhs: Fp) -> Fp {
        let p = self.same(&rhs);
        Fp {
            value: ((self.value as u64 * rhs.value as u64) % p) as u32,
            modulus: self.modulus,
        }
    }
}

impl Neg for Fp {
    type Output = Fp;
    fn neg(self) -> Fp {
        let p = self.modulus as u64;
        Fp {
            value: ((p - self.value as u64) % p) as u32,
            modulus: self.modulus,
        }
    }
}

fn modulus_of(ctx: &FieldCtx) -> u64 {
    match ctx {
        FieldCtx::PrimeField(p) => *p,
        FieldCtx::Rationals => panic!("prime field element requested in the rationals"),
    }
}

impl Field for Fp {
    const NAME: &'static str = "prime field";

    fn check_ctx(ctx: &FieldCtx) -> Result<(), FieldError> {
        match ctx {
            FieldCtx::PrimeField(_) => Ok(()),
            _ => Err(FieldError::ContextMismatch {
                ctx: *ctx,
                expected: Self::NAME,
            }),
        }
    }

    fn zero(ctx: &FieldCtx) -> Self {
        Fp::new(0, modulus_of(ctx))
    }

    fn one(ctx: &FieldCtx) -> Self {
        Fp::new(1, modulus_of(ctx))
    }

    fn from_i64(ctx: &FieldCtx, n: i64) -> Self {
        Fp::new(n, modulus_of(ctx))
    }

    fn from_bigint(ctx: &FieldCtx, n: &BigInt) -> Self {
        let p = modulus_of(ctx);
        let r = n.mod_floor(&BigInt::from(p));
        Fp::new(r.to_i64().expect("reduced residue fits"), p)
    }

    fn from_rational(ctx: &FieldCtx, q: &Rational) -> Option<Self> {
        let num = Self::from_bigint(ctx, q.numer());
        let den = Self::from_bigint(ctx, q.denom());
        den.inv().map(|d| num * d)
    }

    fn is_zero(&self) -> bool {
        self.value == 0
    }

    fn inv(&self) -> Option<Self> {
        if self.value == 0 {
            return None;
        }
        // Fermat: a^(p-2)
        Some(self.pow(self.modulus as u64 - 2))
    }

    fn ctx(&self) -> FieldCtx {
        FieldCtx::PrimeField(self.modulus as u64)
    }

    fn parse(ctx: &FieldCtx, s: &str) -> Result<Self, FieldError> {
        Self::check_ctx(ctx)?;
        let q = parse_rational(s)?;
        Self::from_rational(ctx, &q).ok_or(FieldError::DivisionByZero)
    }

    fn kth_roots(&self, k: u32) -> Vec<Self> {
        assert!(k >= 1, "root degree must be positive");
        if k == 1 {
            return vec![*self];
        }
        let p = self.modulus as u64;
        (0..p)
            .map(|v| Fp::new(v as i64, p))
            .filter(|x| x.pow(k as u64) == *self)
            .collect()
    }

    fn elements(ctx: &FieldCtx) -> Option<Vec<Self>> {
        let p = modulus_of(ctx);
        Some((0..p).map(|v| Fp::new(v as i64, p)).collect())
    }
}

/// Smallest primitive root of the prime `p`.
pub fn primitive_root(p: u64) -> u64 {
    if p == 2 {
        return 1;
    }
    let n = p - 1;
    let factors = prime_factors(n);
    (2..p)
        .find(|&g| {
            let e = Fp::new(g as i64, p);
            factors.iter().all(|q| !e.pow(n / q).is_one())
        })
        .expect("every prime has a primitive root")
}

pub fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            out.push(d);
            while n % d == 0 {
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

/// Discrete logarithm table for `F_p^*` relative to its smallest primitive root.
#[derive(Debug, Clone)]
pub struct DlogTable {
    modulus: u64,
    generator: u64,
    log: Vec<u32>,
}

impl DlogTable {
    pub fn new(p: u64) -> Self {
        let g = primitive_root(p);
        let mut log = vec![0u32; p as usize];
        let mut x = 1u64;
        for e in 0..p - 1 {
            log[x as usize] = e as u32;
            x = x * g % p;
        }
        DlogTable {
            modulus: p,
            generator: g,
            log,
        }
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn generator(&self) -> Fp {
        Fp::new(self.generator as i64, self.modulus)
    }

    /// Logarithm of a nonzero element.
    pub fn log(&self, a: &Fp) -> Option<u64> {
        if a.is_zero() {
            None
        } else {
            Some(self.log[a.value as usize] as u64)
        }
    }

    pub fn exp(&self, e: u64) -> Fp {
        self.generator().pow(e % (self.modulus - 1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f7(v: i64) -> Fp {
        Fp::new(v, 7)
    }

    #[test]
    fn designators_parse() {
        assert_eq!("Q".parse::<FieldCtx>().unwrap(), FieldCtx::Rationals);
        assert_eq!("Fp:7".parse::<FieldCtx>().unwrap(), FieldCtx::PrimeField(7));
        assert_eq!("Fp:9".parse::<FieldCtx>(), Err(FieldError::NotPrime(9)));
        assert!(matches!(
            "Fp:100003".parse::<FieldCtx>(),
            Err(FieldError::ModulusTooLarge(_))
        ));
        assert!("R".parse::<FieldCtx>().is_err());
        assert_eq!(FieldCtx::PrimeField(13).to_string(), "Fp:13");
    }

    #[test]
    fn cube_roots_mod_seven() {
        let mut r = f7(1).kth_roots(3);
        r.sort();
        assert_eq!(r, vec![f7(1), f7(2), f7(4)]);
        let mut r = f7(6).kth_roots(3);
        r.sort();
        assert_eq!(r, vec![f7(3), f7(5), f7(6)]);
        assert_eq!(f7(5).kth_roots(1), vec![f7(5)]);
    }

    #[test]
    fn rational_roots_are_exact() {
        let q = |s: &str| parse_rational(s).unwrap();
        assert_eq!(q("-8/27").kth_roots(3), vec![q("-2/3")]);
        assert_eq!(q("4/9").kth_roots(2), vec![q("-2/3"), q("2/3")]);
        assert!(q("-1").kth_roots(2).is_empty());
        assert!(q("2").kth_roots(2).is_empty());
        assert_eq!(q("7/3").kth_roots(1), vec![q("7/3")]);
        assert_eq!(q("0").kth_roots(5), vec![q("0")]);
    }

    #[test]
    fn rational_parse_normalizes() {
        let r = parse_rational("6/-4").unwrap();
        assert_eq!(r.to_string(), "-3/2");
        assert_eq!(parse_rational("1/0"), Err(FieldError::DivisionByZero));
        assert!(parse_rational("x").is_err());
    }

    #[test]
    fn fp_parse_fractions() {
        let ctx = FieldCtx::PrimeField(7);
        assert_eq!(Fp::parse(&ctx, "1/2").unwrap(), f7(4));
        assert_eq!(Fp::parse(&ctx, "-1").unwrap(), f7(6));
        assert_eq!(Fp::parse(&ctx, "1/7"), Err(FieldError::DivisionByZero));
        assert!(Fp::parse(&FieldCtx::Rationals, "1").is_err());
    }

    #[test]
    fn dlog_table_round_trips() {
        let t = DlogTable::new(13);
        for v in 1..13 {
            let a = Fp::new(v, 13);
            assert_eq!(t.exp(t.log(&a).unwrap()), a);
        }
        assert_eq!(t.generator().value(), 2);
        assert_eq!(t.log(&Fp::new(0, 13)), None);
    }

    #[test]
    fn signed_powers() {
        assert_eq!(f7(3).powi(-1).unwrap() * f7(3), f7(1));
        assert_eq!(f7(0).powi(-2), None);
        assert_eq!(f7(2).powi(3), Some(f7(1)));
    }
}
