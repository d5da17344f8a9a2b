//! Sparse multivariate polynomials over an exact field.
//!
//! Variables are the coordinates `T<group>_<index>` of the ambient affine
//! space. Terms are kept in a map ordered by graded lexicographic order with
//! variables compared by `(group, index)`; the largest key is the leading term.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::field::{Field, FieldCtx, FieldError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId {
    pub group: u8,
    /// 1-based position within the group.
    pub index: u16,
}

impl VarId {
    pub const fn new(group: u8, index: u16) -> Self {
        VarId { group, index }
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "T{}_{}", self.group, self.index)
    }
}

impl FromStr for VarId {
    type Err = PolyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || PolyError::Parse(format!("bad variable name `{s}`"));
        let rest = s.trim().strip_prefix('T').ok_or_else(bad)?;
        let (g, i) = rest.split_once('_').ok_or_else(bad)?;
        let group: u8 = g.parse().map_err(|_| bad())?;
        let index: u16 = i.parse().map_err(|_| bad())?;
        if group > 2 || index == 0 {
            return Err(bad());
        }
        Ok(VarId { group, index })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolyError {
    #[error("no coordinate given for {0}")]
    MissingCoordinate(VarId),
    #[error("polynomial syntax: {0}")]
    Parse(String),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// A monomial as a sorted list of `(variable, exponent)` pairs without zero exponents.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Monomial(Vec<(VarId, u32)>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn var(v: VarId) -> Self {
        Monomial(vec![(v, 1)])
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (VarId, u32)>) -> Self {
        let mut map: BTreeMap<VarId, u32> = BTreeMap::new();
        for (v, e) in pairs {
            *map.entry(v).or_default() += e;
        }
        Monomial(map.into_iter().filter(|&(_, e)| e > 0).collect())
    }

    pub fn exponent(&self, v: VarId) -> u32 {
        self.0
            .binary_search_by_key(&v, |&(w, _)| w)
            .map(|i| self.0[i].1)
            .unwrap_or(0)
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|&(_, e)| e).sum()
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn pairs(&self) -> &[(VarId, u32)] {
        &self.0
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut out = Vec::with_capacity(self.0.len() + other.0.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            let (a, b) = (self.0[i], other.0[j]);
            match a.0.cmp(&b.0) {
                Ordering::Less => {
                    out.push(a);
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(b);
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((a.0, a.1 + b.1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.0[i..]);
        out.extend_from_slice(&other.0[j..]);
        Monomial(out)
    }

    /// `self / other` when `other` divides `self`.
    pub fn div(&self, other: &Monomial) -> Option<Monomial> {
        let mut out = Vec::with_capacity(self.0.len());
        let mut j = 0;
        for &(v, e) in &self.0 {
            if j < other.0.len() && other.0[j].0 < v {
                return None;
            }
            if j < other.0.len() && other.0[j].0 == v {
                let f = other.0[j].1;
                j += 1;
                match e.cmp(&f) {
                    Ordering::Less => return None,
                    Ordering::Equal => {}
                    Ordering::Greater => out.push((v, e - f)),
                }
            } else {
                out.push((v, e));
            }
        }
        if j < other.0.len() {
            return None;
        }
        Some(Monomial(out))
    }

    pub fn rename(&self, f: impl Fn(VarId) -> VarId) -> Monomial {
        Monomial::from_pairs(self.0.iter().map(|&(v, e)| (f(v), e)))
    }

    /// Weighted degree under an integer weight per variable.
    pub fn weight(&self, w: impl Fn(VarId) -> i64) -> i64 {
        self.0.iter().map(|&(v, e)| w(v) * e as i64).sum()
    }
}

impl Ord for Monomial {
    /// Graded lexicographic: total degree first, then the exponent of the
    /// smallest variable, and so on.
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree().cmp(&other.degree()).then_with(|| {
            let (mut i, mut j) = (0, 0);
            loop {
                match (self.0.get(i), other.0.get(j)) {
                    (None, None) => return Ordering::Equal,
                    (Some(_), None) => return Ordering::Greater,
                    (None, Some(_)) => return Ordering::Less,
                    (Some(&(a, ea)), Some(&(b, eb))) => match a.cmp(&b) {
                        Ordering::Less => return Ordering::Greater,
                        Ordering::Greater => return Ordering::Less,
                        Ordering::Equal => {
                            if ea != eb {
                                return ea.cmp(&eb);
                            }
                            i += 1;
                            j += 1;
                        }
                    },
                }
            }
        })
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        for (k, &(v, e)) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, "*")?;
            }
            if e == 1 {
                write!(f, "{v}")?;
            } else {
                write!(f, "{v}^{e}")?;
            }
        }
        Ok(())
    }
}

/// Sparse polynomial; no zero coefficients are stored.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Poly<F: Field> {
    terms: BTreeMap<Monomial, F>,
    ctx: FieldCtx,
}

impl<F: Field> Poly<F> {
    pub fn zero(ctx: FieldCtx) -> Self {
        Poly {
            terms: BTreeMap::new(),
            ctx,
        }
    }

    pub fn constant(ctx: FieldCtx, c: F) -> Self {
        Self::term(ctx, c, Monomial::one())
    }

    pub fn one(ctx: FieldCtx) -> Self {
        Self::constant(ctx, F::one(&ctx))
    }

    pub fn var(ctx: FieldCtx, v: VarId) -> Self {
        Self::term(ctx, F::one(&ctx), Monomial::var(v))
    }

    pub fn term(ctx: FieldCtx, c: F, m: Monomial) -> Self {
        let mut p = Self::zero(ctx);
        if !c.is_zero() {
            p.terms.insert(m, c);
        }
        p
    }

    /// Monomial with coefficient 1.
    pub fn monomial(ctx: FieldCtx, m: Monomial) -> Self {
        Self::term(ctx, F::one(&ctx), m)
    }

    pub fn ctx(&self) -> FieldCtx {
        self.ctx
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Terms in ascending monomial order.
    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Monomial, &F)> {
        self.terms.iter()
    }

    pub fn coeff(&self, m: &Monomial) -> F {
        self.terms
            .get(m)
            .cloned()
            .unwrap_or_else(|| F::zero(&self.ctx))
    }

    pub fn leading_term(&self) -> Option<(&Monomial, &F)> {
        self.terms.iter().next_back()
    }

    pub fn total_degree(&self) -> Option<u32> {
        self.terms.keys().map(Monomial::degree).max()
    }

    pub fn variables(&self) -> Vec<VarId> {
        let mut vs: Vec<VarId> = self
            .terms
            .keys()
            .flat_map(|m| m.pairs().iter().map(|&(v, _)| v))
            .collect();
        vs.sort();
        vs.dedup();
        vs
    }

    fn add_term(&mut self, m: Monomial, c: F) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let s = e.get().clone() + c;
                if s.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = s;
                }
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), -c.clone());
        }
        out
    }

    pub fn neg(&self) -> Self {
        Poly {
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (m.clone(), -c.clone()))
                .collect(),
            ctx: self.ctx,
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero(self.ctx);
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                out.add_term(m1.mul(m2), c1.clone() * c2.clone());
            }
        }
        out
    }

    pub fn scale(&self, c: &F) -> Self {
        if c.is_zero() {
            return Self::zero(self.ctx);
        }
        Poly {
            terms: self
                .terms
                .iter()
                .map(|(m, a)| (m.clone(), a.clone() * c.clone()))
                .collect(),
            ctx: self.ctx,
        }
    }

    pub fn mul_term(&self, c: &F, m: &Monomial) -> Self {
        if c.is_zero() {
            return Self::zero(self.ctx);
        }
        Poly {
            terms: self
                .terms
                .iter()
                .map(|(k, a)| (k.mul(m), a.clone() * c.clone()))
                .collect(),
            ctx: self.ctx,
        }
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut acc = Self::one(self.ctx);
        for _ in 0..e {
            acc = acc.mul(self);
        }
        acc
    }

    /// Formal partial derivative.
    pub fn partial(&self, v: VarId) -> Self {
        let mut out = Self::zero(self.ctx);
        for (m, c) in &self.terms {
            let e = m.exponent(v);
            if e == 0 {
                continue;
            }
            let reduced = m
                .div(&Monomial::var(v))
                .expect("variable occurs in the monomial");
            out.add_term(reduced, c.clone() * F::from_i64(&self.ctx, e as i64));
        }
        out
    }

    /// Evaluates with coordinates supplied by `coord`.
    pub fn eval_with(&self, coord: impl Fn(VarId) -> Option<F>) -> Result<F, PolyError> {
        let mut acc = F::zero(&self.ctx);
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for &(v, e) in m.pairs() {
                let x = coord(v).ok_or(PolyError::MissingCoordinate(v))?;
                t = t * x.pow(e as u64);
            }
            acc = acc + t;
        }
        Ok(acc)
    }

    pub fn eval(&self, pt: &BTreeMap<VarId, F>) -> Result<F, PolyError> {
        self.eval_with(|v| pt.get(&v).cloned())
    }

    /// Substitutes polynomials for variables; unlisted variables are kept.
    pub fn substitute(&self, images: &BTreeMap<VarId, Poly<F>>) -> Self {
        let mut out = Self::zero(self.ctx);
        for (m, c) in &self.terms {
            let mut t = Self::constant(self.ctx, c.clone());
            for &(v, e) in m.pairs() {
                let factor = match images.get(&v) {
                    Some(p) => p.pow(e),
                    None => Self::monomial(self.ctx, Monomial::from_pairs([(v, e)])),
                };
                t = t.mul(&factor);
            }
            out = out.add(&t);
        }
        out
    }

    pub fn rename(&self, f: impl Fn(VarId) -> VarId) -> Self {
        let mut out = Self::zero(self.ctx);
        for (m, c) in &self.terms {
            out.add_term(m.rename(&f), c.clone());
        }
        out
    }

    /// Multivariate division by a single divisor: `self = q·g + r` where no
    /// term of `r` is divisible by the leading monomial of `g`.
    pub fn div_rem(&self, g: &Self) -> (Self, Self) {
        let (lm, lc) = g.leading_term().expect("division by the zero polynomial");
        let lc_inv = lc.inv().expect("leading coefficient is nonzero");
        let mut q = Self::zero(self.ctx);
        let mut r = Self::zero(self.ctx);
        let mut work = self.clone();
        while let Some((m, c)) = work.terms.iter().next_back().map(|(m, c)| (m.clone(), c.clone())) {
            match m.div(lm) {
                Some(shift) => {
                    let factor = c * lc_inv.clone();
                    work = work.sub(&g.mul_term(&factor, &shift));
                    q.add_term(shift, factor);
                }
                None => {
                    work.terms.remove(&m);
                    r.add_term(m, c);
                }
            }
        }
        (q, r)
    }

    /// Membership in the principal ideal `(g)`; returns the quotient when it holds.
    pub fn divided_by(&self, g: &Self) -> Option<Self> {
        let (q, r) = self.div_rem(g);
        r.is_zero().then_some(q)
    }

    pub fn reduce(&self, g: &Self) -> Self {
        self.div_rem(g).1
    }

    /// Maps every coefficient into another field.
    pub fn map_coeffs<G: Field>(
        &self,
        ctx: FieldCtx,
        f: impl Fn(&F) -> Option<G>,
    ) -> Option<Poly<G>> {
        let mut out = Poly::<G>::zero(ctx);
        for (m, c) in &self.terms {
            out.add_term(m.clone(), f(c)?);
        }
        Some(out)
    }

    pub fn parse(ctx: FieldCtx, s: &str) -> Result<Self, PolyError> {
        Self::parse_with_aliases(ctx, s, &BTreeMap::new())
    }

    /// Parses the textual syntax, e.g. `3*T1_1^2*T2_1 - 1/2*T0_1`, also accepting
    /// alias names mapped to canonical variables.
    pub fn parse_with_aliases(
        ctx: FieldCtx,
        s: &str,
        aliases: &BTreeMap<String, VarId>,
    ) -> Result<Self, PolyError> {
        F::check_ctx(&ctx)?;
        let tokens = tokenize(s)?;
        let mut parser = Parser {
            tokens,
            pos: 0,
            ctx,
            aliases,
            _f: std::marker::PhantomData::<F>,
        };
        let p = parser.expr()?;
        if parser.pos != parser.tokens.len() {
            return Err(PolyError::Parse(format!(
                "unexpected trailing input in `{s}`"
            )));
        }
        Ok(p)
    }
}

impl<F: Field> fmt::Debug for Poly<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Poly[{}]({self})", self.ctx)
    }
}

impl<F: Field> fmt::Display for Poly<F> {
    /// Terms in descending order, e.g. `T0_1*T0_2^2 + T1_1^3 - 1/2`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (m, c)) in self.terms.iter().rev().enumerate() {
            let text = c.to_string();
            let (neg, abs) = match text.strip_prefix('-') {
                Some(rest) => (true, rest.to_string()),
                None => (false, text),
            };
            if k == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { '-' } else { '+' })?;
            }
            if m.is_one() {
                write!(f, "{abs}")?;
            } else if abs == "1" {
                write!(f, "{m}")?;
            } else {
                write!(f, "{abs}*{m}")?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(String),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

fn tokenize(s: &str) -> Result<Vec<Token>, PolyError> {
    let chars: Vec<char> = s.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            ' ' | '\t' | '\n' => i += 1,
            '+' => {
                out.push(Token::Plus);
                i += 1
            }
            '-' | '−' => {
                out.push(Token::Minus);
                i += 1
            }
            '*' => {
                out.push(Token::Star);
                i += 1
            }
            '/' => {
                out.push(Token::Slash);
                i += 1
            }
            '^' => {
                out.push(Token::Caret);
                i += 1
            }
            '(' => {
                out.push(Token::LParen);
                i += 1
            }
            ')' => {
                out.push(Token::RParen);
                i += 1
            }
            d if d.is_ascii_digit() => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                out.push(Token::Num(chars[start..i].iter().collect()));
            }
            a if a.is_alphabetic() || a == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push(Token::Ident(chars[start..i].iter().collect()));
            }
            other => {
                return Err(PolyError::Parse(format!("unexpected character `{other}`")));
            }
        }
    }
    Ok(out)
}

struct Parser<'a, F: Field> {
    tokens: Vec<Token>,
    pos: usize,
    ctx: FieldCtx,
    aliases: &'a BTreeMap<String, VarId>,
    _f: std::marker::PhantomData<F>,
}

impl<F: Field> Parser<'_, F> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expr(&mut self) -> Result<Poly<F>, PolyError> {
        let mut negate = false;
        match self.peek() {
            Some(Token::Minus) => {
                negate = true;
                self.pos += 1;
            }
            Some(Token::Plus) => self.pos += 1,
            _ => {}
        }
        let first = self.product()?;
        let mut acc = if negate { first.neg() } else { first };
        loop {
            match self.peek() {
                Some(Token::Plus) => {
                    self.pos += 1;
                    acc = acc.add(&self.product()?);
                }
                Some(Token::Minus) => {
                    self.pos += 1;
                    acc = acc.sub(&self.product()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn product(&mut self) -> Result<Poly<F>, PolyError> {
        let mut acc = self.power()?;
        while let Some(Token::Star) = self.peek() {
            self.pos += 1;
            acc = acc.mul(&self.power()?);
        }
        Ok(acc)
    }

    fn exponent(&mut self) -> Result<u32, PolyError> {
        if let Some(Token::Caret) = self.peek() {
            self.pos += 1;
            match self.next() {
                Some(Token::Num(n)) => n
                    .parse()
                    .map_err(|_| PolyError::Parse(format!("bad exponent `{n}`"))),
                other => Err(PolyError::Parse(format!("expected exponent, got {other:?}"))),
            }
        } else {
            Ok(1)
        }
    }

    fn power(&mut self) -> Result<Poly<F>, PolyError> {
        match self.next() {
            Some(Token::Num(n)) => {
                let text = if let Some(Token::Slash) = self.peek() {
                    self.pos += 1;
                    match self.next() {
                        Some(Token::Num(d)) => format!("{n}/{d}"),
                        other => {
                            return Err(PolyError::Parse(format!(
                                "expected denominator, got {other:?}"
                            )))
                        }
                    }
                } else {
                    n
                };
                let c = F::parse(&self.ctx, &text)?;
                let e = self.exponent()?;
                Ok(Poly::constant(self.ctx, c).pow(e))
            }
            Some(Token::Ident(name)) => {
                let v = match self.aliases.get(&name) {
                    Some(v) => *v,
                    None => name.parse::<VarId>()?,
                };
                let e = self.exponent()?;
                Ok(Poly::monomial(self.ctx, Monomial::from_pairs([(v, e)])))
            }
            Some(Token::LParen) => {
                let inner = self.expr()?;
                match self.next() {
                    Some(Token::RParen) => {}
                    other => return Err(PolyError::Parse(format!("expected `)`, got {other:?}"))),
                }
                let e = self.exponent()?;
                Ok(inner.pow(e))
            }
            other => Err(PolyError::Parse(format!("unexpected token {other:?}"))),
        }
    }
}
