//! Locally nilpotent derivations of `K[X]`: the catalog families, Leibniz
//! application, nilpotency, graded components and exponential flows.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::field::{Field, FieldCtx, Rational};
use crate::model::TrinomialShape;
use crate::poly::{Poly, VarId};

pub const DEFAULT_NILPOTENCY_CAP: usize = 50;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LndError {
    #[error("no zero iterate within {0} steps")]
    Diverged(usize),
    #[error("characteristic {p} is too small for this flow: {detail}")]
    CharacteristicTooSmall { p: u64, detail: String },
    #[error("grading does not make the equation homogeneous (monomial weights {0:?})")]
    InadmissibleGrading(Vec<i64>),
    #[error("cannot parse derivation designator `{0}`")]
    BadDesignator(String),
    #[error("`{designator}` is not available for this shape: {reason}")]
    NotInCatalog { designator: String, reason: String },
    #[error("point has {got} coordinates, expected {expected}")]
    PointLength { got: usize, expected: usize },
}

// ---------------------------------------------------------------------------
// Designators and families

/// Which formula produced a derivation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    /// Pivot `w` has exponent 1; `target` lies in another group.
    Gamma { target: VarId, pivot: VarId },
    DeltaPlus { group: u8, index: u16 },
    DeltaMinus { group: u8, index: u16 },
    /// `D_i` of the single-linear-variable family.
    Dmsms(u16),
    Emsms(u16),
    /// `D_ij` of the several-linear-variables family.
    Ddd(u16, u16),
    Edd(u16, u16),
    Custom,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Gamma { target, pivot } => write!(
                f,
                "gamma:{},{}/{},{}",
                target.group, target.index, pivot.group, pivot.index
            ),
            Family::DeltaPlus { group, index } => write!(f, "delta+:{group},{index}"),
            Family::DeltaMinus { group, index } => write!(f, "delta-:{group},{index}"),
            Family::Dmsms(i) => write!(f, "D:{i}"),
            Family::Emsms(j) => write!(f, "E:{j}"),
            Family::Ddd(i, j) => write!(f, "Dk:{i},{j}"),
            Family::Edd(i, j) => write!(f, "Ek:{i},{j}"),
            Family::Custom => write!(f, "custom"),
        }
    }
}

/// Parsed designator; `gamma` and `delta` may omit their optional parts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Designator {
    Gamma { target: (u8, u16), pivot: Option<(u8, u16)> },
    Delta { plus: bool, group: Option<u8>, index: u16 },
    D(u16),
    E(u16),
    Dk(u16, u16),
    Ek(u16, u16),
}

fn parse_pair(s: &str) -> Option<(u64, u64)> {
    let (a, b) = s.split_once(',')?;
    Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
}

impl FromStr for Designator {
    type Err = LndError;

    fn from_str(s: &str) -> Result<Self, LndError> {
        let bad = || LndError::BadDesignator(s.to_string());
        let (head, args) = s.trim().split_once(':').ok_or_else(bad)?;
        let idx = |x: u64| u16::try_from(x).ok().filter(|&i| i >= 1).ok_or_else(bad);
        let grp = |x: u64| u8::try_from(x).ok().filter(|&g| g <= 2).ok_or_else(bad);
        match head {
            "gamma" => {
                let (t, p) = match args.split_once('/') {
                    Some((t, p)) => (t, Some(p)),
                    None => (args, None),
                };
                let (tg, ti) = parse_pair(t).ok_or_else(bad)?;
                let pivot = match p {
                    Some(p) => {
                        let (pg, pi) = parse_pair(p).ok_or_else(bad)?;
                        Some((grp(pg)?, idx(pi)?))
                    }
                    None => None,
                };
                Ok(Designator::Gamma {
                    target: (grp(tg)?, idx(ti)?),
                    pivot,
                })
            }
            "delta+" | "delta-" => {
                let plus = head == "delta+";
                match parse_pair(args) {
                    Some((g, i)) => Ok(Designator::Delta {
                        plus,
                        group: Some(grp(g)?),
                        index: idx(i)?,
                    }),
                    None => Ok(Designator::Delta {
                        plus,
                        group: None,
                        index: idx(args.trim().parse().map_err(|_| bad())?)?,
                    }),
                }
            }
            "D" | "E" => {
                let i = idx(args.trim().parse().map_err(|_| bad())?)?;
                Ok(if head == "D" { Designator::D(i) } else { Designator::E(i) })
            }
            "Dk" | "Ek" => {
                let (i, j) = parse_pair(args).ok_or_else(bad)?;
                let (i, j) = (idx(i)?, idx(j)?);
                Ok(if head == "Dk" { Designator::Dk(i, j) } else { Designator::Ek(i, j) })
            }
            _ => Err(bad()),
        }
    }
}

// ---------------------------------------------------------------------------
// Roles in the families with linear variables

/// Variables of `x_1⋯x_k·y^a + z^b + s^c` after renumbering: all exponent-1
/// variables share one group, `z` is the lowest other nonempty group and `s`
/// the remaining one (empty for a free term).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Roles {
    pub x: Vec<VarId>,
    pub y: Vec<VarId>,
    pub z: Vec<VarId>,
    pub s: Vec<VarId>,
    pub x_group: usize,
    pub z_group: usize,
    pub s_group: usize,
}

impl Roles {
    pub fn of(shape: &TrinomialShape) -> Option<Roles> {
        let lin = shape.linear_vars();
        let x_group = lin.first()?.group as usize;
        if lin.iter().any(|v| v.group as usize != x_group) {
            return None;
        }
        let y: Vec<VarId> = shape
            .group_vars(x_group)
            .into_iter()
            .filter(|&v| shape.exponent(v) > 1)
            .collect();
        if y.is_empty() {
            return None;
        }
        let others: Vec<usize> = (0..3).filter(|&g| g != x_group).collect();
        let (z_group, s_group) = if shape.group(others[0]).is_empty() {
            (others[1], others[0])
        } else {
            (others[0], others[1])
        };
        Some(Roles {
            x: lin,
            y,
            z: shape.group_vars(z_group),
            s: shape.group_vars(s_group),
            x_group,
            z_group,
            s_group,
        })
    }

    pub fn k(&self) -> usize {
        self.x.len()
    }
}

// ---------------------------------------------------------------------------
// Derivations

/// A derivation of `K[T]`, determined by the images of the variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Derivation<F: Field> {
    images: BTreeMap<VarId, Poly<F>>,
    family: Family,
    ctx: FieldCtx,
}

impl<F: Field> Derivation<F> {
    /// Builds a derivation; variables without an image map to zero.
    pub fn new(ctx: FieldCtx, family: Family, images: BTreeMap<VarId, Poly<F>>) -> Self {
        let images = images.into_iter().filter(|(_, p)| !p.is_zero()).collect();
        Derivation { images, family, ctx }
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn designator(&self) -> String {
        self.family.to_string()
    }

    pub fn ctx(&self) -> FieldCtx {
        self.ctx
    }

    pub fn image(&self, v: VarId) -> Poly<F> {
        self.images.get(&v).cloned().unwrap_or_else(|| Poly::zero(self.ctx))
    }

    /// Nonzero images.
    pub fn images(&self) -> &BTreeMap<VarId, Poly<F>> {
        &self.images
    }

    /// `Σ_v ∂f/∂v · δ(v)`.
    pub fn derive(&self, f: &Poly<F>) -> Poly<F> {
        self.images
            .iter()
            .fold(Poly::zero(self.ctx), |acc, (&v, img)| acc.add(&f.partial(v).mul(img)))
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut images = self.images.clone();
        for (v, p) in &other.images {
            let sum = images.get(v).map_or_else(|| p.clone(), |q| q.add(p));
            images.insert(*v, sum);
        }
        Derivation::new(self.ctx, Family::Custom, images)
    }

    pub fn scale(&self, c: &F) -> Self {
        let images = self.images.iter().map(|(v, p)| (*v, p.scale(c))).collect();
        Derivation::new(self.ctx, self.family.clone(), images)
    }

    /// `δ^k(f)` reduced modulo `g` after each step, for `k = 0, 1, …` until zero.
    pub fn iterates(&self, f: &Poly<F>, g: &Poly<F>, cap: usize) -> Result<Vec<Poly<F>>, LndError> {
        let mut out = vec![f.reduce(g)];
        loop {
            let last = out.last().unwrap();
            if last.is_zero() {
                out.pop();
                return Ok(out);
            }
            if out.len() > cap {
                return Err(LndError::Diverged(cap));
            }
            out.push(self.derive(last).reduce(g));
        }
    }

    /// Least `k ≥ 1` with `δ^k(v) ≡ 0 mod g`.
    pub fn nilpotency_index(&self, v: VarId, g: &Poly<F>, cap: usize) -> Result<usize, LndError> {
        let f = Poly::var(self.ctx, v);
        let mut cur = f;
        for k in 1..=cap {
            cur = self.derive(&cur).reduce(g);
            if cur.is_zero() {
                return Ok(k);
            }
        }
        Err(LndError::Diverged(cap))
    }
}

/// Whether `δ(g) ∈ (g)`, and whether `δ(g) = 0` identically.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WellDefined {
    pub in_ideal: bool,
    pub identically_zero: bool,
}

pub fn well_defined<F: Field>(delta: &Derivation<F>, shape: &TrinomialShape) -> WellDefined {
    let g = shape.equation::<F>(delta.ctx());
    let dg = delta.derive(&g);
    WellDefined {
        in_ideal: dg.divided_by(&g).is_some(),
        identically_zero: dg.is_zero(),
    }
}

// ---------------------------------------------------------------------------
// Catalog

fn var<F: Field>(ctx: FieldCtx, v: VarId) -> Poly<F> {
    Poly::var(ctx, v)
}

/// Group monomial of the shape.
fn group_poly<F: Field>(shape: &TrinomialShape, ctx: FieldCtx, g: usize) -> Poly<F> {
    Poly::monomial(ctx, shape.group_monomial(g))
}

fn gamma<F: Field>(shape: &TrinomialShape, ctx: FieldCtx, target: VarId, pivot: VarId) -> Derivation<F> {
    let ti = group_poly::<F>(shape, ctx, target.group as usize);
    let tw = group_poly::<F>(shape, ctx, pivot.group as usize);
    let images = BTreeMap::from([(pivot, ti.partial(target).neg()), (target, tw.partial(pivot))]);
    Derivation::new(ctx, Family::Gamma { target, pivot }, images)
}

/// `Π T^{l/2}` over the variables of group `g` other than `skip`.
fn half_rest<F: Field>(shape: &TrinomialShape, ctx: FieldCtx, g: usize, skip: VarId) -> Poly<F> {
    shape
        .group_vars(g)
        .into_iter()
        .filter(|&v| v != skip)
        .fold(Poly::one(ctx), |acc, v| acc.mul(&var(ctx, v).pow(shape.exponent(v) / 2)))
}

fn first_two(shape: &TrinomialShape, g: usize) -> Option<VarId> {
    let vars = shape.group_vars(g);
    if vars.is_empty() || vars.iter().any(|&v| shape.exponent(v) % 2 != 0) {
        return None;
    }
    vars.into_iter().find(|&v| shape.exponent(v) == 2)
}

/// Groups `r` whose two complementary groups are even with an exponent 2.
pub fn delta_groups(shape: &TrinomialShape) -> Vec<u8> {
    if shape.has_free_term() {
        return Vec::new();
    }
    [2u8, 1, 0]
        .into_iter()
        .filter(|&r| {
            (0..3)
                .filter(|&o| o != r as usize)
                .all(|o| first_two(shape, o).is_some())
        })
        .collect()
}

/// `δ±` for the all-plus equation `(uP')² + (vQ')² + R`, built from a square
/// root `iota` of −1; `uP' ∓ ιvQ'` lies in the kernel of `δ±`.
fn delta<F: Field>(
    shape: &TrinomialShape,
    ctx: FieldCtx,
    r_group: u8,
    w: VarId,
    plus: bool,
    iota: &F,
) -> Derivation<F> {
    let others: Vec<usize> = (0..3).filter(|&o| o != r_group as usize).collect();
    let (pg, qg) = (others[0], others[1]);
    let u = first_two(shape, pg).expect("even group with a square");
    let v = first_two(shape, qg).expect("even group with a square");
    let p1 = half_rest::<F>(shape, ctx, pg, u);
    let q1 = half_rest::<F>(shape, ctx, qg, v);
    let rw = group_poly::<F>(shape, ctx, r_group as usize).partial(w);
    let two = F::from_i64(&ctx, 2);
    let img_u = rw.mul(&q1).scale(iota).neg();
    let img_v = rw.mul(&p1);
    let a = var::<F>(ctx, u).mul(&p1).scale(iota);
    let b = var::<F>(ctx, v).mul(&q1);
    let (img_v, inner, family) = if plus {
        (img_v.neg(), a.add(&b), Family::DeltaPlus { group: r_group, index: w.index })
    } else {
        (img_v, a.sub(&b), Family::DeltaMinus { group: r_group, index: w.index })
    };
    let img_w = p1.mul(&q1).mul(&inner).scale(&two);
    let images = BTreeMap::from([(u, img_u), (v, img_v), (w, img_w)]);
    Derivation::new(ctx, family, images)
}

fn msms_d<F: Field>(shape: &TrinomialShape, ctx: FieldCtx, roles: &Roles, i: usize) -> Derivation<F> {
    let x = roles.x[0];
    let y = group_poly::<F>(shape, ctx, roles.x_group).partial(x);
    let zi = roles.z[i];
    let z = group_poly::<F>(shape, ctx, roles.z_group);
    let images = BTreeMap::from([(x, z.partial(zi)), (zi, y.neg())]);
    Derivation::new(ctx, Family::Dmsms(i as u16 + 1), images)
}

fn msms_e<F: Field>(shape: &TrinomialShape, ctx: FieldCtx, roles: &Roles, j: usize) -> Derivation<F> {
    let x = roles.x[0];
    let y = group_poly::<F>(shape, ctx, roles.x_group).partial(x);
    let sj = roles.s[j];
    let s = group_poly::<F>(shape, ctx, roles.s_group);
    let images = BTreeMap::from([(x, s.partial(sj)), (sj, y.neg())]);
    Derivation::new(ctx, Family::Emsms(j as u16 + 1), images)
}

fn dd<F: Field>(
    shape: &TrinomialShape,
    ctx: FieldCtx,
    roles: &Roles,
    i: usize,
    j: usize,
    on_s: bool,
) -> Derivation<F> {
    let xi = roles.x[i];
    let xy = group_poly::<F>(shape, ctx, roles.x_group).partial(xi);
    let (tj, t) = if on_s {
        (roles.s[j], group_poly::<F>(shape, ctx, roles.s_group))
    } else {
        (roles.z[j], group_poly::<F>(shape, ctx, roles.z_group))
    };
    let images = BTreeMap::from([(xi, t.partial(tj)), (tj, xy.neg())]);
    let family = if on_s {
        Family::Edd(i as u16 + 1, j as u16 + 1)
    } else {
        Family::Ddd(i as u16 + 1, j as u16 + 1)
    };
    Derivation::new(ctx, family, images)
}

/// Square root of −1 used to normalize `δ±`: the smallest one.
pub fn sqrt_minus_one<F: Field>(ctx: FieldCtx) -> Option<F> {
    let mut roots = (-F::one(&ctx)).kth_roots(2);
    roots.sort();
    roots.into_iter().next()
}

/// Whether the shape has the single-linear-variable structure.
pub fn single_linear(shape: &TrinomialShape) -> Option<Roles> {
    Roles::of(shape).filter(|r| r.k() == 1)
}

/// Whether the shape has `k > 1` linear variables in one group, `m ≥ 1`.
pub fn multi_linear(shape: &TrinomialShape) -> Option<Roles> {
    Roles::of(shape).filter(|r| r.k() > 1)
}

#[derive(Debug, Clone)]
pub struct Catalog<F: Field> {
    pub derivations: Vec<Derivation<F>>,
    /// Families that apply to the shape but cannot be built over this field.
    pub omitted: Vec<(String, String)>,
}

impl<F: Field> Catalog<F> {
    pub fn get(&self, designator: &str) -> Option<&Derivation<F>> {
        self.derivations.iter().find(|d| d.designator() == designator)
    }
}

pub fn lnd_catalog<F: Field>(shape: &TrinomialShape, ctx: FieldCtx) -> Catalog<F> {
    let mut derivations = Vec::new();
    let mut omitted = Vec::new();
    for pivot in shape.linear_vars() {
        for target in shape.vars() {
            if target.group != pivot.group {
                derivations.push(gamma(shape, ctx, target, pivot));
            }
        }
    }
    let groups = delta_groups(shape);
    if !groups.is_empty() {
        match sqrt_minus_one::<F>(ctx) {
            Some(iota) => {
                for &r in &groups {
                    for w in shape.group_vars(r as usize) {
                        for plus in [true, false] {
                            derivations.push(delta(shape, ctx, r, w, plus, &iota));
                        }
                    }
                }
            }
            None => omitted.push((
                "delta±".to_string(),
                format!("-1 has no square root in {ctx}, needed for the all-plus sign normalization"),
            )),
        }
    }
    if let Some(roles) = single_linear(shape) {
        for i in 0..roles.z.len() {
            derivations.push(msms_d(shape, ctx, &roles, i));
        }
        for j in 0..roles.s.len() {
            derivations.push(msms_e(shape, ctx, &roles, j));
        }
    }
    if let Some(roles) = multi_linear(shape) {
        for i in 0..roles.k() {
            for j in 0..roles.z.len() {
                derivations.push(dd(shape, ctx, &roles, i, j, false));
            }
            for j in 0..roles.s.len() {
                derivations.push(dd(shape, ctx, &roles, i, j, true));
            }
        }
    }
    Catalog { derivations, omitted }
}

fn not_available(d: &str, reason: impl Into<String>) -> LndError {
    LndError::NotInCatalog {
        designator: d.to_string(),
        reason: reason.into(),
    }
}

/// Builds the derivation named by a designator string.
pub fn derivation_by_name<F: Field>(
    shape: &TrinomialShape,
    ctx: FieldCtx,
    name: &str,
) -> Result<Derivation<F>, LndError> {
    let des: Designator = name.parse()?;
    let check = |v: VarId| {
        if shape.contains(v) {
            Ok(v)
        } else {
            Err(not_available(name, format!("{v} is not a variable of the shape")))
        }
    };
    match des {
        Designator::Gamma { target, pivot } => {
            let target = check(VarId::new(target.0, target.1))?;
            let pivot = match pivot {
                Some((g, i)) => check(VarId::new(g, i))?,
                None => shape
                    .linear_vars()
                    .into_iter()
                    .find(|v| v.group != target.group)
                    .ok_or_else(|| not_available(name, "no exponent-1 pivot outside the target group"))?,
            };
            if shape.exponent(pivot) != 1 || pivot.group == target.group {
                return Err(not_available(name, "pivot must have exponent 1 and lie in another group"));
            }
            Ok(gamma(shape, ctx, target, pivot))
        }
        Designator::Delta { plus, group, index } => {
            let groups = delta_groups(shape);
            let r = match group {
                Some(g) if groups.contains(&g) => g,
                Some(_) => return Err(not_available(name, "the two other groups are not even with a square")),
                None => *groups
                    .first()
                    .ok_or_else(|| not_available(name, "no pair of even groups with a square"))?,
            };
            let w = check(VarId::new(r, index))?;
            let iota = sqrt_minus_one::<F>(ctx)
                .ok_or_else(|| not_available(name, format!("-1 has no square root in {ctx}")))?;
            Ok(delta(shape, ctx, r, w, plus, &iota))
        }
        Designator::D(i) | Designator::E(i) => {
            let roles = single_linear(shape)
                .ok_or_else(|| not_available(name, "shape has no unique exponent-1 variable"))?;
            let on_s = matches!(des, Designator::E(_));
            let len = if on_s { roles.s.len() } else { roles.z.len() };
            if i as usize > len {
                return Err(not_available(name, format!("index out of range 1..={len}")));
            }
            Ok(if on_s {
                msms_e(shape, ctx, &roles, i as usize - 1)
            } else {
                msms_d(shape, ctx, &roles, i as usize - 1)
            })
        }
        Designator::Dk(i, j) | Designator::Ek(i, j) => {
            let roles = multi_linear(shape)
                .ok_or_else(|| not_available(name, "shape has no group with several exponent-1 variables"))?;
            let on_s = matches!(des, Designator::Ek(..));
            let len = if on_s { roles.s.len() } else { roles.z.len() };
            if i as usize > roles.k() || j as usize > len {
                return Err(not_available(name, "index out of range"));
            }
            Ok(dd(shape, ctx, &roles, i as usize - 1, j as usize - 1, on_s))
        }
    }
}

// ---------------------------------------------------------------------------
// Gradings

/// Integer weights on the variables, in canonical order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GradingWeight(pub Vec<i64>);

impl GradingWeight {
    pub fn of(&self, shape: &TrinomialShape, v: VarId) -> i64 {
        self.0[shape.position(v)]
    }

    /// Weights of the three monomials (0 for the free term).
    pub fn monomial_weights(&self, shape: &TrinomialShape) -> Vec<i64> {
        (0..3)
            .map(|g| shape.group_monomial(g).weight(|v| self.of(shape, v)))
            .collect()
    }

    pub fn is_admissible(&self, shape: &TrinomialShape) -> bool {
        let w = self.monomial_weights(shape);
        self.0.len() == shape.n() && w.iter().all(|&x| x == w[0])
    }
}

/// Splits `δ` into homogeneous components `δ_d` with `deg δ_d(v) = deg v + d`.
pub fn homogeneous_split<F: Field>(
    delta: &Derivation<F>,
    shape: &TrinomialShape,
    w: &GradingWeight,
) -> Result<BTreeMap<i64, Derivation<F>>, LndError> {
    if !w.is_admissible(shape) {
        return Err(LndError::InadmissibleGrading(w.monomial_weights(shape)));
    }
    let ctx = delta.ctx();
    let mut parts: BTreeMap<i64, BTreeMap<VarId, Poly<F>>> = BTreeMap::new();
    for (&v, img) in delta.images() {
        for (m, c) in img.terms() {
            let d = m.weight(|u| w.of(shape, u)) - w.of(shape, v);
            let slot = parts.entry(d).or_default().entry(v).or_insert_with(|| Poly::zero(ctx));
            *slot = slot.add(&Poly::term(ctx, c.clone(), m.clone()));
        }
    }
    Ok(parts
        .into_iter()
        .map(|(d, images)| (d, Derivation::new(ctx, Family::Custom, images)))
        .collect())
}

// ---------------------------------------------------------------------------
// Flows

/// `exp(uδ)` on the generators: `v ↦ Σ_k u^k c_{v,k}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowMap<F: Field> {
    coeffs: BTreeMap<VarId, Vec<Poly<F>>>,
    ctx: FieldCtx,
}

fn factorial_inverse<F: Field>(ctx: &FieldCtx, k: usize) -> Option<F> {
    (1..=k as i64)
        .fold(F::one(ctx), |acc, i| acc * F::from_i64(ctx, i))
        .inv()
}

impl<F: Field> FlowMap<F> {
    /// Series computed in the field itself. In characteristic `p` the truncated
    /// exponential is multiplicative on a monomial `Π v^{e_v}` only when
    /// `Σ e_v (index_v − 1) < p`; this is checked for every monomial of `g`.
    pub fn direct(delta: &Derivation<F>, shape: &TrinomialShape, cap: usize) -> Result<Self, LndError> {
        let ctx = delta.ctx();
        let g = shape.equation::<F>(ctx);
        let mut coeffs = BTreeMap::new();
        let mut index = BTreeMap::new();
        for v in shape.vars() {
            let it = delta.iterates(&Poly::var(ctx, v), &g, cap)?;
            index.insert(v, it.len());
            coeffs.insert(v, it);
        }
        let p = ctx.characteristic();
        if p > 0 {
            for grp in 0..3 {
                let need: usize = shape
                    .group_vars(grp)
                    .into_iter()
                    .map(|v| shape.exponent(v) as usize * index[&v].saturating_sub(1))
                    .sum();
                if need as u64 >= p {
                    return Err(LndError::CharacteristicTooSmall {
                        p,
                        detail: format!(
                            "{} needs divided powers up to order {need}",
                            delta.designator()
                        ),
                    });
                }
            }
        }
        for (_, series) in coeffs.iter_mut() {
            for (k, c) in series.iter_mut().enumerate() {
                let inv = factorial_inverse::<F>(&ctx, k).expect("k! is invertible below p");
                *c = c.scale(&inv);
            }
        }
        Ok(FlowMap { coeffs, ctx })
    }

    /// Series computed over the rationals from `delta_q` and mapped into the
    /// field; valid whenever every divided iterate has coefficients whose
    /// denominators are prime to the characteristic.
    pub fn integral(
        delta_q: &Derivation<Rational>,
        shape: &TrinomialShape,
        ctx: FieldCtx,
        cap: usize,
    ) -> Result<Self, LndError> {
        let q = FlowMap::<Rational>::direct(delta_q, shape, cap)?;
        let mut coeffs = BTreeMap::new();
        for (v, series) in q.coeffs {
            let mapped = series
                .iter()
                .map(|c| c.map_coeffs(ctx, |r| F::from_rational(&ctx, r)))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| LndError::CharacteristicTooSmall {
                    p: ctx.characteristic(),
                    detail: format!(
                        "the flow of {} has a denominator divisible by {}",
                        delta_q.designator(),
                        ctx.characteristic()
                    ),
                })?;
            coeffs.insert(v, mapped);
        }
        Ok(FlowMap { coeffs, ctx })
    }

    pub fn ctx(&self) -> FieldCtx {
        self.ctx
    }

    /// Image of `v` as a list of `u`-coefficients.
    pub fn series(&self, v: VarId) -> &[Poly<F>] {
        &self.coeffs[&v]
    }

    pub fn apply(&self, shape: &TrinomialShape, u: &F, pt: &[F]) -> Result<Vec<F>, LndError> {
        if pt.len() != shape.n() {
            return Err(LndError::PointLength {
                got: pt.len(),
                expected: shape.n(),
            });
        }
        let coord = |v: VarId| Some(pt[shape.position(v)].clone());
        Ok(shape
            .vars()
            .into_iter()
            .map(|v| {
                let mut acc = F::zero(&self.ctx);
                for c in self.coeffs[&v].iter().rev() {
                    acc = acc * u.clone() + c.eval_with(coord).expect("point covers all variables");
                }
                acc
            })
            .collect())
    }
}

/// `exp(uδ)(pt)` through the series computed in the field.
pub fn exp_flow<F: Field>(
    delta: &Derivation<F>,
    shape: &TrinomialShape,
    u: &F,
    pt: &[F],
) -> Result<Vec<F>, LndError> {
    FlowMap::direct(delta, shape, DEFAULT_NILPOTENCY_CAP)?.apply(shape, u, pt)
}

/// Flow of a named derivation. Families with integer coefficients take the
/// integral route; `δ±` needs a square root of −1 and is computed directly.
pub fn flow_by_name<F: Field>(
    shape: &TrinomialShape,
    ctx: FieldCtx,
    name: &str,
) -> Result<FlowMap<F>, LndError> {
    let des: Designator = name.parse()?;
    if matches!(des, Designator::Delta { .. }) {
        let d = derivation_by_name::<F>(shape, ctx, name)?;
        FlowMap::direct(&d, shape, DEFAULT_NILPOTENCY_CAP)
    } else {
        let dq = derivation_by_name::<Rational>(shape, FieldCtx::Rationals, name)?;
        FlowMap::integral(&dq, shape, ctx, DEFAULT_NILPOTENCY_CAP)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Fp;

    const Q: FieldCtx = FieldCtx::Rationals;
    const X: VarId = VarId::new(0, 1);
    const Y: VarId = VarId::new(0, 2);
    const Z: VarId = VarId::new(1, 1);
    const S: VarId = VarId::new(2, 1);

    fn shape_a() -> TrinomialShape {
        TrinomialShape::new(&[1, 2], &[3], &[3]).unwrap()
    }

    fn q(s: &str) -> Poly<Rational> {
        Poly::parse(Q, s).unwrap()
    }

    fn qs(v: &[i64]) -> Vec<Rational> {
        v.iter().map(|&a| Rational::from_i64(&Q, a)).collect()
    }

    #[test]
    fn designators_round_trip() {
        for s in ["gamma:1,1", "gamma:2,1/0,1", "delta+:1", "delta-:2,3", "D:2", "E:1", "Dk:1,2", "Ek:2,1"] {
            assert!(s.parse::<Designator>().is_ok(), "{s}");
        }
        for s in ["gamma:3,1", "D:0", "delta*:1", "Dk:1", "nonsense"] {
            assert!(s.parse::<Designator>().is_err(), "{s}");
        }
    }

    #[test]
    fn catalog_of_shape_a() {
        let a = shape_a();
        let cat = lnd_catalog::<Rational>(&a, Q);
        let names: Vec<String> = cat.derivations.iter().map(|d| d.designator()).collect();
        assert_eq!(names, ["gamma:1,1/0,1", "gamma:2,1/0,1", "D:1", "E:1"]);
        let d1 = cat.get("D:1").unwrap();
        assert_eq!(d1.derive(&q("T0_1")), q("3*T1_1^2"));
        assert_eq!(d1.derive(&q("T1_1")), q("-T0_2^2"));
        assert!(d1.derive(&q("T0_2")).is_zero());
        let g = a.equation::<Rational>(Q);
        assert_eq!(d1.nilpotency_index(X, &g, 50), Ok(4));
        assert_eq!(d1.nilpotency_index(Z, &g, 50), Ok(2));
        assert_eq!(d1.nilpotency_index(Y, &g, 50), Ok(1));
        for d in &cat.derivations {
            let wd = well_defined(d, &a);
            assert!(wd.in_ideal && wd.identically_zero, "{}", d.designator());
        }
    }

    #[test]
    fn rigid_and_h2_catalogs() {
        let b = TrinomialShape::new(&[2], &[3], &[3]).unwrap();
        assert!(lnd_catalog::<Rational>(&b, Q).derivations.is_empty());
        let h2 = TrinomialShape::new(&[2, 2], &[2, 2], &[5]).unwrap();
        let over_q = lnd_catalog::<Rational>(&h2, Q);
        assert!(over_q.derivations.is_empty());
        assert_eq!(over_q.omitted.len(), 1);
        let f13 = FieldCtx::PrimeField(13);
        let cat = lnd_catalog::<Fp>(&h2, f13);
        let names: Vec<String> = cat.derivations.iter().map(|d| d.designator()).collect();
        assert_eq!(names, ["delta+:2,1", "delta-:2,1"]);
        let g = h2.equation::<Fp>(f13);
        for d in &cat.derivations {
            assert!(d.derive(&g).is_zero());
            assert_eq!(d.nilpotency_index(S, &g, 50), Ok(2));
            assert_eq!(d.nilpotency_index(X, &g, 50), Ok(6));
        }
    }

    #[test]
    fn custom_derivation_is_not_well_defined() {
        let a = shape_a();
        let d = Derivation::new(Q, Family::Custom, BTreeMap::from([(S, q("1"))]));
        let wd = well_defined(&d, &a);
        assert!(!wd.in_ideal);
        assert_eq!(d.derive(&a.equation(Q)), q("3*T2_1^2"));
    }

    #[test]
    fn flows_on_shape_a() {
        let a = shape_a();
        let d1 = derivation_by_name::<Rational>(&a, Q, "D:1").unwrap();
        let u = Rational::from_i64(&Q, -1);
        assert_eq!(exp_flow(&d1, &a, &u, &qs(&[-2, 1, 1, 1])).unwrap(), qs(&[-9, 1, 2, 1]));
        let zero = Rational::from_i64(&Q, 0);
        assert_eq!(exp_flow(&d1, &a, &zero, &qs(&[-2, 1, 1, 1])).unwrap(), qs(&[-2, 1, 1, 1]));
        let f7 = FieldCtx::PrimeField(7);
        let flow = flow_by_name::<Fp>(&a, f7, "D:1").unwrap();
        let pt: Vec<Fp> = [5, 0, 6, 1].iter().map(|&x| Fp::new(x, 7)).collect();
        let out = flow.apply(&a, &Fp::new(3, 7), &pt).unwrap();
        assert_eq!(out, [0, 0, 6, 1].iter().map(|&x| Fp::new(x, 7)).collect::<Vec<_>>());
    }

    #[test]
    fn small_characteristic_needs_the_integral_route() {
        let a = shape_a();
        let f3 = FieldCtx::PrimeField(3);
        let d = derivation_by_name::<Fp>(&a, f3, "D:1").unwrap();
        assert!(matches!(
            FlowMap::direct(&d, &a, 50),
            Err(LndError::CharacteristicTooSmall { p: 3, .. })
        ));
        let flow = flow_by_name::<Fp>(&a, f3, "D:1").unwrap();
        let g = a.equation::<Fp>(f3);
        let pt: Vec<Fp> = [1, 1, 1, 1].iter().map(|&x| Fp::new(x, 3)).collect();
        assert!(g.eval_with(|v| Some(pt[a.position(v)])).unwrap().is_zero());
        for u in 0..3 {
            let out = flow.apply(&a, &Fp::new(u, 3), &pt).unwrap();
            assert!(g.eval_with(|v| Some(out[a.position(v)])).unwrap().is_zero());
        }
    }

    #[test]
    fn graded_components() {
        let a = shape_a();
        let d1 = derivation_by_name::<Rational>(&a, Q, "D:1").unwrap();
        let eta = GradingWeight(vec![-2, 1, 0, 0]);
        let parts = homogeneous_split(&d1, &a, &eta).unwrap();
        assert_eq!(parts.keys().copied().collect::<Vec<_>>(), [2]);
        let w = GradingWeight(vec![3, 0, 1, 1]);
        let parts = homogeneous_split(&d1, &a, &w).unwrap();
        assert_eq!(parts.keys().copied().collect::<Vec<_>>(), [-1]);
        let e1 = derivation_by_name::<Rational>(&a, Q, "E:1").unwrap();
        let sum = d1.add(&e1);
        let parts = homogeneous_split(&sum, &a, &eta).unwrap();
        assert_eq!(parts.len(), 1);
        assert_eq!(parts[&2].images(), sum.images());
        assert!(matches!(
            homogeneous_split(&d1, &a, &GradingWeight(vec![1, 0, 0, 0])),
            Err(LndError::InadmissibleGrading(_))
        ));
    }
}
