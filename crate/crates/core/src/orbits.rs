//! Automorphism orbits: family detection, stratum descriptors, orbit counts,
//! special-automorphism descriptors and explicit transport words.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::field::{DlogTable, Field, FieldCtx, Fp};
use crate::lattice;
use crate::lnd::{flow_by_name, LndError, Roles};
use crate::model::{self, HType, LatticeBasis, ShapeError, TrinomialShape, VarPerm};
use crate::poly::VarId;
use crate::strata::{self, StrataError, VarSet};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OrbitError {
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error(transparent)]
    Strata(#[from] StrataError),
    #[error(transparent)]
    Lnd(#[from] LndError),
    #[error("point does not satisfy the equation")]
    PointNotOnVariety,
    #[error("orbits of this family are described only under the kernel conjecture; pass the conjecture flag")]
    ConjectureNotAssumed,
    #[error("unsupported family: {0}")]
    UnsupportedFamily(String),
    #[error("points lie in different orbits ({src} vs {dst})")]
    DifferentOrbits { src: String, dst: String },
    #[error("required root does not exist in the field: {0}")]
    RootUnavailable(String),
    #[error("torus equations have no solution: {0}")]
    DlogUnsolvable(String),
}

// ---------------------------------------------------------------------------
// Families

/// Exponent data of `x_1⋯x_k·y^a + z^b + s^c`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearFamily {
    pub roles: Roles,
    pub a: Vec<u32>,
    pub b: Vec<u32>,
    pub c: Vec<u32>,
    /// gcd of all `b` and `c`.
    pub d: u32,
}

impl LinearFamily {
    fn new(shape: &TrinomialShape, roles: Roles) -> Self {
        let exps = |vs: &[VarId]| vs.iter().map(|&v| shape.exponent(v)).collect::<Vec<u32>>();
        let (a, b, c) = (exps(&roles.y), exps(&roles.z), exps(&roles.s));
        let d = b
            .iter()
            .chain(&c)
            .copied()
            .reduce(|x, y| num_integer::Integer::gcd(&x, &y))
            .unwrap_or(1);
        LinearFamily { roles, a, b, c, d }
    }

    pub fn k(&self) -> usize {
        self.roles.x.len()
    }

    pub fn m(&self) -> usize {
        self.a.len()
    }

    pub fn p(&self) -> usize {
        self.b.len()
    }

    pub fn q(&self) -> usize {
        self.c.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FamilyTag {
    /// A unique exponent-1 variable.
    F1(LinearFamily),
    /// `k > 1` exponent-1 variables in one group.
    F2(LinearFamily),
    FlexibleH(HType),
    RigidCase,
    Other,
}

impl FamilyTag {
    pub fn name(&self) -> String {
        match self {
            FamilyTag::F1(f) => format!("F1(m={},p={},q={},d={})", f.m(), f.p(), f.q(), f.d),
            FamilyTag::F2(f) => format!("F2(k={},m={},p={},q={})", f.k(), f.m(), f.p(), f.q()),
            FamilyTag::FlexibleH(h) => format!("FlexibleH({h})"),
            FamilyTag::RigidCase => "RigidCase".into(),
            FamilyTag::Other => "Other".into(),
        }
    }
}

/// First match in the order flexible, single linear, several linear, rigid.
pub fn family_of(shape: &TrinomialShape) -> Result<FamilyTag, ShapeError> {
    let verdict = model::rigidity_classify(shape)?;
    if let Some(&h) = model::h_types(shape).first() {
        return Ok(FamilyTag::FlexibleH(h));
    }
    if let Some(roles) = Roles::of(shape) {
        let fam = LinearFamily::new(shape, roles);
        return Ok(if fam.k() == 1 { FamilyTag::F1(fam) } else { FamilyTag::F2(fam) });
    }
    Ok(if verdict.is_rigid() { FamilyTag::RigidCase } else { FamilyTag::Other })
}

fn linear_family(shape: &TrinomialShape) -> Result<LinearFamily, OrbitError> {
    match family_of(shape)? {
        FamilyTag::F1(f) => Ok(f),
        other => Err(OrbitError::UnsupportedFamily(format!(
            "{} (requires a unique exponent-1 variable)",
            other.name()
        ))),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MlVerdict {
    Proven(Vec<VarId>),
    Conjectural(Vec<VarId>),
    /// Rigid: the invariant is the whole coordinate ring.
    WholeRing(Vec<VarId>),
    /// Flexible: only constants.
    Constants,
    Unknown,
}

pub fn ml_generators(shape: &TrinomialShape) -> Result<MlVerdict, ShapeError> {
    Ok(match family_of(shape)? {
        FamilyTag::F1(f) => MlVerdict::Proven(f.roles.y),
        FamilyTag::F2(f) => MlVerdict::Conjectural(f.roles.y),
        FamilyTag::RigidCase => MlVerdict::WholeRing(shape.vars()),
        FamilyTag::FlexibleH(_) => MlVerdict::Constants,
        FamilyTag::Other => MlVerdict::Unknown,
    })
}

// ---------------------------------------------------------------------------
// Descriptors

/// 1-based index set into one role list.
pub type IndexSet = BTreeSet<u16>;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StratumDescriptor<F: Field> {
    BigO,
    /// `y` vanishes exactly on `M`, all `z`, `s` nonzero; `r^d = −1`.
    OMeps { m: IndexSet, r: F },
    O1 { m: IndexSet, p: IndexSet, q: IndexSet },
    O2 { m: IndexSet, p: IndexSet, q: IndexSet },
    DD { k: IndexSet, m: IndexSet, p: IndexSet, q: IndexSet },
    DDOMeps { m: IndexSet, r: F },
    DDBigO,
    SingTorus(VarSet),
    RegularFlex,
    TorusStratum(VarSet),
}

fn fmt_set(s: &IndexSet) -> String {
    let v: Vec<String> = s.iter().map(ToString::to_string).collect();
    format!("{{{}}}", v.join(","))
}

impl<F: Field> fmt::Display for StratumDescriptor<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use StratumDescriptor::*;
        match self {
            BigO => write!(f, "O"),
            OMeps { m, r } => write!(f, "O({}, r={r})", fmt_set(m)),
            O1 { m, p, q } => write!(f, "O1({},{},{})", fmt_set(m), fmt_set(p), fmt_set(q)),
            O2 { m, p, q } => write!(f, "O2({},{},{})", fmt_set(m), fmt_set(p), fmt_set(q)),
            DD { k, m, p, q } => write!(
                f,
                "O({},{},{},{})",
                fmt_set(k),
                fmt_set(m),
                fmt_set(p),
                fmt_set(q)
            ),
            DDOMeps { m, r } => write!(f, "O({}, r={r})", fmt_set(m)),
            DDBigO => write!(f, "O"),
            SingTorus(s) => write!(f, "SingTorus{s}"),
            RegularFlex => write!(f, "RegularFlex"),
            TorusStratum(s) => write!(f, "TorusStratum{s}"),
        }
    }
}

impl<F: Field> StratumDescriptor<F> {
    pub fn type_name(&self) -> &'static str {
        use StratumDescriptor::*;
        match self {
            BigO => "BigO",
            OMeps { .. } => "OMeps",
            O1 { .. } => "O1",
            O2 { .. } => "O2",
            DD { .. } => "DD",
            DDOMeps { .. } => "DDOMeps",
            DDBigO => "DDBigO",
            SingTorus(_) => "SingTorus",
            RegularFlex => "RegularFlex",
            TorusStratum(_) => "TorusStratum",
        }
    }

    /// The class after merging the components of `O(M)` over `r`.
    pub fn class(&self) -> Option<DescriptorClass> {
        use StratumDescriptor::*;
        Some(match self {
            BigO => DescriptorClass::BigO,
            OMeps { m, .. } => DescriptorClass::OM(m.clone()),
            O1 { m, p, q } => DescriptorClass::O1(m.clone(), p.clone(), q.clone()),
            O2 { m, p, q } => DescriptorClass::O2(m.clone(), p.clone(), q.clone()),
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Flags {
    pub assume_conjecture: bool,
}

fn zeros(pt: &[impl Field], shape: &TrinomialShape, vars: &[VarId]) -> IndexSet {
    vars.iter()
        .enumerate()
        .filter(|(_, &v)| pt[shape.position(v)].is_zero())
        .map(|(i, _)| i as u16 + 1)
        .collect()
}

/// `Π z^{b/d} / Π s^{c/d}`, the label of an `O(M)` component.
fn component_label<F: Field>(shape: &TrinomialShape, fam: &LinearFamily, pt: &[F]) -> F {
    let ctx = pt[0].ctx();
    let root = |vars: &[VarId], exps: &[u32]| -> F {
        vars.iter().zip(exps).fold(F::one(&ctx), |acc, (&v, &e)| {
            acc * pt[shape.position(v)].pow((e / fam.d) as u64)
        })
    };
    let num = root(&fam.roles.z, &fam.b);
    let den = root(&fam.roles.s, &fam.c);
    num.div(&den).expect("s-coordinates are nonzero")
}

fn check_point<F: Field>(shape: &TrinomialShape, pt: &[F]) -> Result<(), OrbitError> {
    if strata::on_variety(shape, pt)? {
        Ok(())
    } else {
        Err(OrbitError::PointNotOnVariety)
    }
}

pub fn classify_point<F: Field>(
    shape: &TrinomialShape,
    pt: &[F],
    flags: Flags,
) -> Result<StratumDescriptor<F>, OrbitError> {
    let family = family_of(shape)?;
    check_point(shape, pt)?;
    classify_with(shape, &family, pt, flags)
}

/// Classification with a precomputed family.
pub fn classify_with<F: Field>(
    shape: &TrinomialShape,
    family: &FamilyTag,
    pt: &[F],
    flags: Flags,
) -> Result<StratumDescriptor<F>, OrbitError> {
    use StratumDescriptor::*;
    match family {
        FamilyTag::F1(f) => {
            let m = zeros(pt, shape, &f.roles.y);
            if m.is_empty() {
                return Ok(BigO);
            }
            let (p, q) = (zeros(pt, shape, &f.roles.z), zeros(pt, shape, &f.roles.s));
            if p.is_empty() && q.is_empty() {
                return Ok(OMeps {
                    m,
                    r: component_label(shape, f, pt),
                });
            }
            let x = &pt[shape.position(f.roles.x[0])];
            Ok(if x.is_zero() { O2 { m, p, q } } else { O1 { m, p, q } })
        }
        FamilyTag::F2(f) => {
            if !flags.assume_conjecture {
                return Err(OrbitError::ConjectureNotAssumed);
            }
            let k = zeros(pt, shape, &f.roles.x);
            let m = zeros(pt, shape, &f.roles.y);
            let (p, q) = (zeros(pt, shape, &f.roles.z), zeros(pt, shape, &f.roles.s));
            if m.is_empty() {
                let singular = k.len() >= 2 && !p.is_empty() && !q.is_empty();
                return Ok(if singular { DD { k, m, p, q } } else { DDBigO });
            }
            if p.is_empty() && q.is_empty() {
                return Ok(DDOMeps {
                    m,
                    r: component_label(shape, f, pt),
                });
            }
            Ok(DD { k, m, p, q })
        }
        FamilyTag::RigidCase => Ok(TorusStratum(strata::support_zero_set(shape, pt)?)),
        FamilyTag::FlexibleH(h) => {
            let s = strata::support_zero_set(shape, pt)?;
            if !strata::is_singular_stratum(shape, &s) {
                return Ok(RegularFlex);
            }
            let types = model::h_types(shape);
            let covered = types.contains(&HType::H5)
                || (types.contains(&HType::H2) && !types.contains(&HType::H4));
            if covered {
                Ok(SingTorus(s))
            } else {
                Err(OrbitError::UnsupportedFamily(format!(
                    "singular orbits of FlexibleH({h}) are not described"
                )))
            }
        }
        FamilyTag::Other => Err(OrbitError::UnsupportedFamily("Other".into())),
    }
}

// ---------------------------------------------------------------------------
// Counts and gluing

/// Descriptor up to the component label `r`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DescriptorClass {
    BigO,
    OM(IndexSet),
    O1(IndexSet, IndexSet, IndexSet),
    O2(IndexSet, IndexSet, IndexSet),
}

impl fmt::Display for DescriptorClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DescriptorClass::BigO => write!(f, "O"),
            DescriptorClass::OM(m) => write!(f, "O({})", fmt_set(m)),
            DescriptorClass::O1(m, p, q) => write!(f, "O1({},{},{})", fmt_set(m), fmt_set(p), fmt_set(q)),
            DescriptorClass::O2(m, p, q) => write!(f, "O2({},{},{})", fmt_set(m), fmt_set(p), fmt_set(q)),
        }
    }
}

impl DescriptorClass {
    fn m(&self) -> Option<&IndexSet> {
        match self {
            DescriptorClass::BigO => None,
            DescriptorClass::OM(m) | DescriptorClass::O1(m, ..) | DescriptorClass::O2(m, ..) => Some(m),
        }
    }

    fn sort_key(&self) -> (u8, usize, u8, Self) {
        let size = self.m().map_or(0, BTreeSet::len);
        let (tier, kind) = match self {
            DescriptorClass::BigO => (0, 0),
            DescriptorClass::OM(_) => (1, 0),
            DescriptorClass::O1(..) => (2, 0),
            DescriptorClass::O2(..) => (2, 1),
        };
        (tier, size, kind, self.clone())
    }

    /// Vanishing set of the class's variables.
    fn zero_vars(&self, roles: &Roles) -> VarSet {
        let pick = |vars: &[VarId], idx: &IndexSet| -> Vec<VarId> {
            idx.iter().map(|&i| vars[i as usize - 1]).collect()
        };
        match self {
            DescriptorClass::BigO => VarSet::default(),
            DescriptorClass::OM(m) => VarSet::new(pick(&roles.y, m)),
            DescriptorClass::O1(m, p, q) | DescriptorClass::O2(m, p, q) => VarSet::new(
                pick(&roles.y, m)
                    .into_iter()
                    .chain(pick(&roles.z, p))
                    .chain(pick(&roles.s, q)),
            ),
        }
    }

    fn rebuild(&self, roles: &Roles, zero: &VarSet) -> Self {
        let idx = |vars: &[VarId]| -> IndexSet {
            vars.iter()
                .enumerate()
                .filter(|(_, v)| zero.contains(**v))
                .map(|(i, _)| i as u16 + 1)
                .collect()
        };
        let (m, p, q) = (idx(&roles.y), idx(&roles.z), idx(&roles.s));
        match self {
            DescriptorClass::BigO => DescriptorClass::BigO,
            DescriptorClass::OM(_) => DescriptorClass::OM(m),
            DescriptorClass::O1(..) => DescriptorClass::O1(m, p, q),
            DescriptorClass::O2(..) => DescriptorClass::O2(m, p, q),
        }
    }

    /// Image under a variable permutation that preserves the equation.
    pub fn permute(&self, shape: &TrinomialShape, roles: &Roles, sigma: &VarPerm) -> Self {
        let zero = self.zero_vars(roles);
        let image = VarSet::new(zero.iter().map(|&v| sigma.apply_var(shape, v)));
        self.rebuild(roles, &image)
    }
}

fn nonempty_subsets(n: usize) -> Vec<IndexSet> {
    (1u32..1 << n)
        .map(|mask| (0..n).filter(|i| mask >> i & 1 == 1).map(|i| i as u16 + 1).collect())
        .collect()
}

/// Every descriptor class of the single-linear-variable family.
pub fn descriptor_classes(fam: &LinearFamily) -> Vec<DescriptorClass> {
    let mut out = vec![DescriptorClass::BigO];
    let ms = nonempty_subsets(fam.m());
    out.extend(ms.iter().cloned().map(DescriptorClass::OM));
    for m in &ms {
        for p in nonempty_subsets(fam.p()) {
            for q in nonempty_subsets(fam.q()) {
                out.push(DescriptorClass::O1(m.clone(), p.clone(), q.clone()));
                out.push(DescriptorClass::O2(m.clone(), p.clone(), q));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrbitCount {
    pub aut_alg: u64,
    pub aut: u64,
    /// Classes glued by the symmetry group, in listing order.
    pub listing: Vec<Vec<DescriptorClass>>,
}

pub fn aut_alg_formula(m: usize, p: usize, q: usize, d: u32) -> u64 {
    let t = |k: usize| (1u64 << k) - 1;
    1 + t(m) * d as u64 + 2 * t(m) * t(p) * t(q)
}

pub fn orbit_count(shape: &TrinomialShape) -> Result<OrbitCount, OrbitError> {
    let fam = linear_family(shape)?;
    let classes = descriptor_classes(&fam);
    let index: BTreeMap<DescriptorClass, usize> =
        classes.iter().cloned().enumerate().map(|(i, c)| (c, i)).collect();
    let mut parent: Vec<usize> = (0..classes.len()).collect();
    fn root(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for sigma in model::symmetry_generators(shape) {
        for (i, c) in classes.iter().enumerate() {
            let j = index[&c.permute(shape, &fam.roles, &sigma)];
            let (a, b) = (root(&mut parent, i), root(&mut parent, j));
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut glued: BTreeMap<usize, Vec<DescriptorClass>> = BTreeMap::new();
    for (i, c) in classes.iter().enumerate() {
        let r = root(&mut parent, i);
        glued.entry(r).or_default().push(c.clone());
    }
    let mut listing: Vec<Vec<DescriptorClass>> = glued
        .into_values()
        .map(|mut v| {
            v.sort_by_key(DescriptorClass::sort_key);
            v
        })
        .collect();
    listing.sort_by_key(|v| v[0].sort_key());
    Ok(OrbitCount {
        aut_alg: aut_alg_formula(fam.m(), fam.p(), fam.q(), fam.d),
        aut: listing.len() as u64,
        listing,
    })
}

pub fn descriptor_dim<F: Field>(
    shape: &TrinomialShape,
    desc: &StratumDescriptor<F>,
) -> Result<usize, OrbitError> {
    let fam = linear_family(shape)?;
    let top = fam.m() + fam.p() + fam.q();
    use StratumDescriptor::*;
    match desc {
        BigO => Ok(top),
        OMeps { m, .. } => Ok(top - m.len()),
        O1 { m, p, q } => Ok(top + 1 - m.len() - p.len() - q.len()),
        O2 { m, p, q } => Ok(top - m.len() - p.len() - q.len()),
        other => Err(OrbitError::UnsupportedFamily(format!(
            "{} is not a descriptor of the single-linear-variable family",
            other.type_name()
        ))),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SautDescriptor<F: Field> {
    /// Values of `y_1..y_m`.
    Sheet(Vec<F>),
    /// Coordinates of the point other than `x`, constant along the line.
    Line(Vec<(VarId, F)>),
    FixedPoint,
}

pub fn saut_descriptor<F: Field>(shape: &TrinomialShape, pt: &[F]) -> Result<SautDescriptor<F>, OrbitError> {
    let fam = linear_family(shape)?;
    check_point(shape, pt)?;
    let y: Vec<F> = fam.roles.y.iter().map(|&v| pt[shape.position(v)].clone()).collect();
    if y.iter().all(|c| !c.is_zero()) {
        return Ok(SautDescriptor::Sheet(y));
    }
    let s = strata::support_zero_set(shape, pt)?;
    if strata::is_singular_stratum(shape, &s) {
        return Ok(SautDescriptor::FixedPoint);
    }
    let x = fam.roles.x[0];
    Ok(SautDescriptor::Line(
        shape
            .vars()
            .into_iter()
            .filter(|&v| v != x)
            .map(|v| (v, pt[shape.position(v)].clone()))
            .collect(),
    ))
}

// ---------------------------------------------------------------------------
// Words

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AutStep<F: Field> {
    /// Torus element `t(λ)`; `coords` are its diagonal entries.
    Torus { lambda: Vec<F>, coords: Vec<F> },
    Flow { derivation: String, u: F },
    Perm(VarPerm),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AutWord<F: Field> {
    pub steps: Vec<AutStep<F>>,
}

impl<F: Field> Default for AutWord<F> {
    fn default() -> Self {
        AutWord { steps: Vec::new() }
    }
}

impl<F: Field> AutWord<F> {
    pub fn apply(&self, shape: &TrinomialShape, pt: &[F]) -> Result<Vec<F>, OrbitError> {
        let mut cur = pt.to_vec();
        for step in &self.steps {
            cur = match step {
                AutStep::Torus { coords, .. } => cur
                    .iter()
                    .zip(coords)
                    .map(|(a, t)| a.clone() * t.clone())
                    .collect(),
                AutStep::Flow { derivation, u } => {
                    let ctx = pt.first().map_or(FieldCtx::Rationals, F::ctx);
                    flow_by_name::<F>(shape, ctx, derivation)?.apply(shape, u, &cur)?
                }
                AutStep::Perm(sigma) => sigma.apply_point(&cur),
            };
        }
        Ok(cur)
    }

    /// Every torus step is `t(λ)` for the saturated lattice basis.
    pub fn torus_steps_valid(&self, shape: &TrinomialShape) -> bool {
        let lat = model::torus_lattice(shape);
        self.steps.iter().all(|s| match s {
            AutStep::Torus { lambda, coords } => {
                let ctx = coords.first().map_or(FieldCtx::Rationals, F::ctx);
                lat.torus_element(ctx, shape.n(), lambda) == *coords
                    && model::in_stabilizer(shape, coords)
            }
            _ => true,
        })
    }
}

/// Solves `t(λ)_v = c_v` for the listed variables through the Smith form of
/// the exponent matrix and root extraction in the field.
pub fn solve_torus<F: Field>(
    lat: &LatticeBasis,
    shape: &TrinomialShape,
    ctx: FieldCtx,
    targets: &[(VarId, F)],
) -> Result<Vec<F>, OrbitError> {
    let r = lat.rank;
    let a: Vec<Vec<i64>> = targets
        .iter()
        .map(|(v, _)| (0..r).map(|k| lat.basis[k][shape.position(*v)]).collect())
        .collect();
    let s = lattice::smith(&a, r);
    let pow_prod = |row: &[i64], vals: &[F]| -> F {
        row.iter().zip(vals).fold(F::one(&ctx), |acc, (&e, x)| {
            acc * x.powi(e).expect("torus targets are nonzero")
        })
    };
    let c: Vec<F> = targets.iter().map(|(_, x)| x.clone()).collect();
    let sigma: Vec<F> = s.u.iter().map(|row| pow_prod(row, &c)).collect();
    let mut mu = vec![F::one(&ctx); r];
    for (i, si) in sigma.iter().enumerate() {
        let d = s.diag.get(i).copied().unwrap_or(0);
        if d == 0 {
            if !si.is_one() {
                return Err(OrbitError::DlogUnsolvable(format!(
                    "torus character equation {i} requires {si} = 1"
                )));
            }
            continue;
        }
        mu[i] = si
            .kth_roots(d as u32)
            .into_iter()
            .min()
            .ok_or_else(|| OrbitError::RootUnavailable(format!("{d}-th root of {si}")))?;
    }
    Ok((0..r).map(|k| pow_prod(&s.v[k], &mu)).collect())
}

/// The same system solved by discrete logarithms: `A·e ≡ log c (mod p − 1)`.
pub fn solve_torus_dlog(
    lat: &LatticeBasis,
    shape: &TrinomialShape,
    p: u64,
    targets: &[(VarId, Fp)],
) -> Result<Vec<Fp>, OrbitError> {
    let table = DlogTable::new(p);
    let r = lat.rank;
    let a: Vec<Vec<i64>> = targets
        .iter()
        .map(|(v, _)| (0..r).map(|k| lat.basis[k][shape.position(*v)]).collect())
        .collect();
    let logs: Vec<i64> = targets
        .iter()
        .map(|(_, c)| table.log(c).map(|e| e as i64))
        .collect::<Option<_>>()
        .ok_or_else(|| OrbitError::DlogUnsolvable("zero target".into()))?;
    let e = lattice::solve_mod(&a, r, &logs, p as i64 - 1)
        .ok_or_else(|| OrbitError::DlogUnsolvable(format!("no solution modulo {}", p - 1)))?;
    Ok(e.into_iter().map(|k| table.exp(k as u64)).collect())
}

fn torus_step<F: Field>(
    shape: &TrinomialShape,
    ctx: FieldCtx,
    cur: &[F],
    dst: &[F],
    vars: &[VarId],
) -> Result<Option<AutStep<F>>, OrbitError> {
    let lat = model::torus_lattice(shape);
    let targets: Vec<(VarId, F)> = vars
        .iter()
        .map(|&v| {
            let i = shape.position(v);
            (v, dst[i].div(&cur[i]).expect("matched coordinates are nonzero"))
        })
        .collect();
    if targets.iter().all(|(_, c)| c.is_one()) {
        return Ok(None);
    }
    let lambda = solve_torus(&lat, shape, ctx, &targets)?;
    let coords = lat.torus_element(ctx, shape.n(), &lambda);
    Ok(Some(AutStep::Torus { lambda, coords }))
}

fn push_flow<F: Field>(
    shape: &TrinomialShape,
    word: &mut AutWord<F>,
    cur: &mut Vec<F>,
    derivation: String,
    u: F,
) -> Result<(), OrbitError> {
    if u.is_zero() {
        return Ok(());
    }
    let step = AutStep::Flow { derivation, u };
    *cur = AutWord { steps: vec![step.clone()] }.apply(shape, cur)?;
    word.steps.push(step);
    Ok(())
}

/// An automorphism word taking `src` to `dst` inside one orbit of the
/// single-linear-variable family.
pub fn transport<F: Field>(shape: &TrinomialShape, src: &[F], dst: &[F]) -> Result<AutWord<F>, OrbitError> {
    let fam = linear_family(shape)?;
    let family = FamilyTag::F1(fam.clone());
    check_point(shape, src)?;
    check_point(shape, dst)?;
    let flags = Flags::default();
    let (ds, dd) = (
        classify_with(shape, &family, src, flags)?,
        classify_with(shape, &family, dst, flags)?,
    );
    if ds != dd {
        return Err(OrbitError::DifferentOrbits {
            src: ds.to_string(),
            dst: dd.to_string(),
        });
    }
    let mut word = AutWord::default();
    if src == dst {
        return Ok(word);
    }
    let ctx = src[0].ctx();
    let roles = &fam.roles;
    let mut cur = src.to_vec();
    let nonzero_vars = |vars: &[VarId]| -> Vec<VarId> {
        vars.iter().copied().filter(|&v| !dst[shape.position(v)].is_zero()).collect()
    };
    let mut matched: Vec<VarId> = match &ds {
        StratumDescriptor::BigO => roles.y.clone(),
        _ => nonzero_vars(&roles.y)
            .into_iter()
            .chain(nonzero_vars(&roles.z))
            .chain(nonzero_vars(&roles.s))
            .collect(),
    };
    if !matches!(ds, StratumDescriptor::BigO | StratumDescriptor::OMeps { .. }) {
        matched.extend(nonzero_vars(&roles.x));
    }
    if let Some(step) = torus_step(shape, ctx, &cur, dst, &matched)? {
        cur = AutWord { steps: vec![step.clone()] }.apply(shape, &cur)?;
        word.steps.push(step);
    }
    match &ds {
        StratumDescriptor::BigO => {
            let ypart = y_part(shape, roles, &cur);
            let neg_y = -ypart;
            for (tag, vars) in [("D", &roles.z), ("E", &roles.s)] {
                for (j, &v) in vars.iter().enumerate() {
                    let i = shape.position(v);
                    let u = (dst[i].clone() - cur[i].clone()).div(&neg_y).expect("y-part is nonzero");
                    push_flow(shape, &mut word, &mut cur, format!("{tag}:{}", j + 1), u)?;
                }
            }
        }
        StratumDescriptor::OMeps { .. } => {
            let x = shape.position(roles.x[0]);
            let dx = dst[x].clone() - cur[x].clone();
            if !dx.is_zero() {
                let mut done = false;
                for (tag, vars, grp) in [("D", &roles.z, roles.z_group), ("E", &roles.s, roles.s_group)] {
                    let gpoly = crate::poly::Poly::<F>::monomial(ctx, shape.group_monomial(grp));
                    for (j, &v) in vars.iter().enumerate() {
                        let slope = gpoly
                            .partial(v)
                            .eval_with(|w| Some(cur[shape.position(w)].clone()))
                            .expect("point covers every variable");
                        if let Ok(u) = dx.div(&slope) {
                            push_flow(shape, &mut word, &mut cur, format!("{tag}:{}", j + 1), u)?;
                            done = true;
                            break;
                        }
                    }
                    if done {
                        break;
                    }
                }
                if !done {
                    return Err(OrbitError::Lnd(LndError::CharacteristicTooSmall {
                        p: ctx.characteristic(),
                        detail: "every flow moving x has vanishing speed at this point".into(),
                    }));
                }
            }
        }
        _ => {}
    }
    if cur != dst {
        return Err(OrbitError::DlogUnsolvable(
            "transport word does not reach the target".into(),
        ));
    }
    Ok(word)
}

/// `Π y^a` at a point.
fn y_part<F: Field>(shape: &TrinomialShape, roles: &Roles, pt: &[F]) -> F {
    let ctx = pt[0].ctx();
    roles.y.iter().fold(F::one(&ctx), |acc, &v| {
        acc * pt[shape.position(v)].pow(shape.exponent(v) as u64)
    })
}

/// Like [`transport`], but first applies a symmetry of the equation when the
/// two points lie in classes glued by it.
pub fn transport_glued<F: Field>(
    shape: &TrinomialShape,
    src: &[F],
    dst: &[F],
) -> Result<AutWord<F>, OrbitError> {
    match transport(shape, src, dst) {
        Err(OrbitError::DifferentOrbits { src: s, dst: d }) => {
            let n = shape.n();
            for sigma in model::closure(n, &model::symmetry_generators(shape)) {
                if sigma.is_identity() {
                    continue;
                }
                let moved = sigma.apply_point(src);
                if let Ok(mut word) = transport(shape, &moved, dst) {
                    word.steps.insert(0, AutStep::Perm(sigma));
                    return Ok(word);
                }
            }
            Err(OrbitError::DifferentOrbits { src: s, dst: d })
        }
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Rational;

    const Q: FieldCtx = FieldCtx::Rationals;

    fn qs(x: &[i64]) -> Vec<Rational> {
        x.iter().map(|&a| Rational::from_i64(&Q, a)).collect()
    }

    fn fps(x: &[i64], p: u64) -> Vec<Fp> {
        x.iter().map(|&a| Fp::new(a, p)).collect()
    }

    fn set(x: &[u16]) -> IndexSet {
        x.iter().copied().collect()
    }

    fn shape(g: &[&[u32]]) -> TrinomialShape {
        TrinomialShape::new(g[0], g[1], g[2]).unwrap()
    }

    #[test]
    fn families() {
        let a = shape(&[&[1, 2], &[3], &[3]]);
        match family_of(&a).unwrap() {
            FamilyTag::F1(f) => {
                assert_eq!((f.m(), f.p(), f.q(), f.d), (1, 1, 1, 3));
                assert_eq!((f.a.clone(), f.b.clone(), f.c.clone()), (vec![2], vec![3], vec![3]));
            }
            other => panic!("{other:?}"),
        }
        let e = shape(&[&[], &[1, 3, 3], &[3, 3]]);
        assert_eq!(family_of(&e).unwrap().name(), "F1(m=2,p=2,q=0,d=3)");
        let c = shape(&[&[1, 1, 2], &[3], &[3]]);
        assert_eq!(family_of(&c).unwrap().name(), "F2(k=2,m=1,p=1,q=1)");
        assert_eq!(family_of(&shape(&[&[2], &[3], &[3]])).unwrap(), FamilyTag::RigidCase);
        assert_eq!(
            family_of(&shape(&[&[2, 2], &[2, 2], &[5]])).unwrap(),
            FamilyTag::FlexibleH(HType::H2)
        );
        assert_eq!(
            ml_generators(&a).unwrap(),
            MlVerdict::Proven(vec![VarId::new(0, 2)])
        );
        assert_eq!(ml_generators(&c).unwrap(), MlVerdict::Conjectural(vec![VarId::new(0, 3)]));
        assert_eq!(ml_generators(&shape(&[&[2], &[3], &[3]])).unwrap().clone(), MlVerdict::WholeRing(shape(&[&[2], &[3], &[3]]).vars()));
    }

    #[test]
    fn classify_shape_a() {
        let a = shape(&[&[1, 2], &[3], &[3]]);
        let f = Flags::default();
        assert_eq!(classify_point(&a, &qs(&[-2, 1, 1, 1]), f).unwrap(), StratumDescriptor::BigO);
        assert_eq!(
            classify_point(&a, &qs(&[5, 0, -1, 1]), f).unwrap(),
            StratumDescriptor::OMeps { m: set(&[1]), r: Rational::from_i64(&Q, -1) }
        );
        assert_eq!(
            classify_point(&a, &qs(&[3, 0, 0, 0]), f).unwrap(),
            StratumDescriptor::O1 { m: set(&[1]), p: set(&[1]), q: set(&[1]) }
        );
        assert_eq!(
            classify_point(&a, &qs(&[0, 0, 0, 0]), f).unwrap(),
            StratumDescriptor::O2 { m: set(&[1]), p: set(&[1]), q: set(&[1]) }
        );
        assert_eq!(classify_point(&a, &qs(&[1, 1, 1, 1]), f), Err(OrbitError::PointNotOnVariety));
        let c = shape(&[&[1, 1, 2], &[3], &[3]]);
        assert_eq!(
            classify_point(&c, &qs(&[0, 0, 0, 0, 0]), f),
            Err(OrbitError::ConjectureNotAssumed)
        );
        let on = Flags { assume_conjecture: true };
        assert_eq!(
            classify_point(&c, &qs(&[0, 0, 1, 0, 0]), on).unwrap(),
            StratumDescriptor::DD { k: set(&[1, 2]), m: set(&[]), p: set(&[1]), q: set(&[1]) }
        );
    }

    #[test]
    fn counts() {
        let d = shape(&[&[1, 2, 2], &[3], &[3]]);
        let c = orbit_count(&d).unwrap();
        assert_eq!((c.aut_alg, c.aut), (16, 7));
        let names: Vec<Vec<String>> = c
            .listing
            .iter()
            .map(|v| v.iter().map(ToString::to_string).collect())
            .collect();
        assert_eq!(names[1], ["O({1})", "O({2})"]);
        assert_eq!(names[3], ["O1({1},{1},{1})", "O1({2},{1},{1})"]);
        let e = shape(&[&[], &[1, 3, 3], &[3, 3]]);
        let c = orbit_count(&e).unwrap();
        assert_eq!((c.aut_alg, c.aut), (10, 3));
        let a = shape(&[&[1, 2], &[3], &[3]]);
        let c = orbit_count(&a).unwrap();
        assert_eq!((c.aut_alg, c.aut), (6, 4));
        assert!(orbit_count(&shape(&[&[2], &[3], &[3]])).is_err());
    }

    #[test]
    fn dimensions_and_saut() {
        let a = shape(&[&[1, 2], &[3], &[3]]);
        let one = set(&[1]);
        assert_eq!(descriptor_dim::<Rational>(&a, &StratumDescriptor::BigO).unwrap(), 3);
        let o1 = StratumDescriptor::<Rational>::O1 { m: one.clone(), p: one.clone(), q: one.clone() };
        assert_eq!(descriptor_dim(&a, &o1).unwrap(), 1);
        let o2 = StratumDescriptor::<Rational>::O2 { m: one.clone(), p: one.clone(), q: one };
        assert_eq!(descriptor_dim(&a, &o2).unwrap(), 0);
        assert_eq!(
            saut_descriptor(&a, &qs(&[-2, 1, 1, 1])).unwrap(),
            SautDescriptor::Sheet(qs(&[1]))
        );
        assert!(matches!(saut_descriptor(&a, &qs(&[5, 0, -1, 1])).unwrap(), SautDescriptor::Line(_)));
        assert_eq!(saut_descriptor(&a, &qs(&[3, 0, 0, 0])).unwrap(), SautDescriptor::FixedPoint);
    }

    #[test]
    fn hand_computed_words() {
        let a = shape(&[&[1, 2], &[3], &[3]]);
        let w = transport(&a, &qs(&[-2, 1, 1, 1]), &qs(&[-9, 1, 2, 1])).unwrap();
        assert_eq!(
            w.steps,
            vec![AutStep::Flow { derivation: "D:1".into(), u: Rational::from_i64(&Q, -1) }]
        );
        let w = transport(&a, &fps(&[5, 0, 6, 1], 7), &fps(&[0, 0, 6, 1], 7)).unwrap();
        assert_eq!(w.steps, vec![AutStep::Flow { derivation: "D:1".into(), u: Fp::new(3, 7) }]);
        let p = fps(&[5, 0, 6, 1], 7);
        assert!(transport(&a, &p, &p).unwrap().steps.is_empty());
    }

    #[test]
    fn torus_routes_agree() {
        let a = shape(&[&[1, 2], &[3], &[3]]);
        let lat = model::torus_lattice(&a);
        let y = VarId::new(0, 2);
        let z = VarId::new(1, 1);
        for (cy, cz) in [(2, 3), (5, 1), (6, 6)] {
            let t = [(y, Fp::new(cy, 7)), (z, Fp::new(cz, 7))];
            let l1 = solve_torus(&lat, &a, FieldCtx::PrimeField(7), &t).unwrap();
            let l2 = solve_torus_dlog(&lat, &a, 7, &t).unwrap();
            for l in [l1, l2] {
                let coords = lat.torus_element(FieldCtx::PrimeField(7), 4, &l);
                assert_eq!(coords[a.position(y)], t[0].1);
                assert_eq!(coords[a.position(z)], t[1].1);
                assert!(model::in_stabilizer(&a, &coords));
            }
        }
    }

    #[test]
    fn different_components_are_reported() {
        let a = shape(&[&[1, 2], &[3], &[3]]);
        // r = 6 (= -1) and r = 3 over F_7
        let src = fps(&[1, 0, 6, 1], 7);
        let dst = fps(&[1, 0, 3, 1], 7);
        assert!(matches!(transport(&a, &src, &dst), Err(OrbitError::DifferentOrbits { .. })));
    }
}
