//! Trinomial hypersurface data: exponent shape, equation, rigidity and
//! flexibility type, factoriality, torus lattice and variable symmetries.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use num_integer::Integer;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{Field, FieldCtx};
use crate::lattice;
use crate::poly::{Monomial, Poly, VarId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ShapeError {
    #[error("groups 1 and 2 must be nonempty")]
    EmptyGroup12,
    #[error("exponent {value} of T{group}_{index} is not positive")]
    NonPositiveExponent { group: u8, index: u16, value: i64 },
    #[error("expected exactly three exponent groups, got {0}")]
    GroupCount(usize),
    #[error("shape is degenerate: T{0}_1 enters linearly and alone, so X is an affine space")]
    DegenerateShape(u8),
}

/// Exponents `l_ij` of `T0^l0 + T1^l1 + T2^l2`; an empty group 0 is the free term 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TrinomialShape {
    groups: [Vec<u32>; 3],
}

/// Shape file: `{"groups": [[1,2],[3],[3]], "aliases": {"T0_1": "x"}}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShapeFile {
    pub groups: Vec<Vec<i64>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub aliases: BTreeMap<String, String>,
}

impl ShapeFile {
    pub fn shape(&self) -> Result<TrinomialShape, ShapeError> {
        TrinomialShape::validate(&self.groups)
    }

    /// Alias name → variable, for parsing human-readable input.
    pub fn alias_map(&self) -> Result<BTreeMap<String, VarId>, crate::poly::PolyError> {
        self.aliases
            .iter()
            .map(|(var, name)| Ok((name.clone(), var.parse::<VarId>()?)))
            .collect()
    }
}

impl TrinomialShape {
    /// Validates raw exponent lists.
    pub fn validate(raw: &[Vec<i64>]) -> Result<Self, ShapeError> {
        if raw.len() != 3 {
            return Err(ShapeError::GroupCount(raw.len()));
        }
        for (g, group) in raw.iter().enumerate() {
            for (j, &l) in group.iter().enumerate() {
                if l < 1 {
                    return Err(ShapeError::NonPositiveExponent {
                        group: g as u8,
                        index: j as u16 + 1,
                        value: l,
                    });
                }
            }
        }
        if raw[1].is_empty() || raw[2].is_empty() {
            return Err(ShapeError::EmptyGroup12);
        }
        let conv = |g: &Vec<i64>| g.iter().map(|&l| l as u32).collect::<Vec<u32>>();
        Ok(TrinomialShape {
            groups: [conv(&raw[0]), conv(&raw[1]), conv(&raw[2])],
        })
    }

    pub fn new(g0: &[u32], g1: &[u32], g2: &[u32]) -> Result<Self, ShapeError> {
        let raw: Vec<Vec<i64>> = [g0, g1, g2]
            .iter()
            .map(|g| g.iter().map(|&l| l as i64).collect())
            .collect();
        Self::validate(&raw)
    }

    pub fn group(&self, i: usize) -> &[u32] {
        &self.groups[i]
    }

    pub fn groups(&self) -> &[Vec<u32>; 3] {
        &self.groups
    }

    pub fn raw(&self) -> Vec<Vec<i64>> {
        self.groups
            .iter()
            .map(|g| g.iter().map(|&l| l as i64).collect())
            .collect()
    }

    pub fn n(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    pub fn has_free_term(&self) -> bool {
        self.groups[0].is_empty()
    }

    pub fn exponent(&self, v: VarId) -> u32 {
        self.groups[v.group as usize][v.index as usize - 1]
    }

    /// Variables in canonical `(group, index)` order.
    pub fn vars(&self) -> Vec<VarId> {
        (0..3u8)
            .flat_map(|g| (1..=self.groups[g as usize].len() as u16).map(move |j| VarId::new(g, j)))
            .collect()
    }

    pub fn group_vars(&self, g: usize) -> Vec<VarId> {
        (1..=self.groups[g].len() as u16)
            .map(|j| VarId::new(g as u8, j))
            .collect()
    }

    /// Position of `v` in the canonical order.
    pub fn position(&self, v: VarId) -> usize {
        self.groups[..v.group as usize].iter().map(Vec::len).sum::<usize>() + v.index as usize - 1
    }

    pub fn contains(&self, v: VarId) -> bool {
        (v.group as usize) < 3 && v.index >= 1 && (v.index as usize) <= self.groups[v.group as usize].len()
    }

    /// Group index whose monomial is a single linear variable, if any.
    pub fn degenerate_group(&self) -> Option<u8> {
        (0..3).find(|&i| self.groups[i].len() == 1 && self.groups[i][0] == 1).map(|i| i as u8)
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate_group().is_some()
    }

    pub fn group_monomial(&self, g: usize) -> Monomial {
        Monomial::from_pairs(self.group_vars(g).into_iter().zip(self.groups[g].iter().copied()))
    }

    pub fn equation<F: Field>(&self, ctx: FieldCtx) -> Poly<F> {
        (0..3).fold(Poly::zero(ctx), |acc, g| {
            acc.add(&Poly::monomial(ctx, self.group_monomial(g)))
        })
    }

    /// Variables with exponent 1.
    pub fn linear_vars(&self) -> Vec<VarId> {
        self.vars().into_iter().filter(|&v| self.exponent(v) == 1).collect()
    }

    /// Renames the three groups by `perm` (new group `k` is old group `perm[k]`).
    pub fn permute_groups(&self, perm: [usize; 3]) -> Option<Self> {
        let g = [
            self.groups[perm[0]].clone(),
            self.groups[perm[1]].clone(),
            self.groups[perm[2]].clone(),
        ];
        if g[1].is_empty() || g[2].is_empty() {
            return None;
        }
        Some(TrinomialShape { groups: g })
    }
}

impl fmt::Display for TrinomialShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.groups)
    }
}

/// Pure equation in canonical text, e.g. `T0_1*T0_2^2 + T1_1^3 + T2_1^3`.
pub fn equation_of<F: Field>(shape: &TrinomialShape, ctx: FieldCtx) -> Poly<F> {
    shape.equation(ctx)
}

// ---------------------------------------------------------------------------
// Rigidity and flexibility types

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum HType {
    H1,
    H2,
    H3,
    H4,
    H5,
}

impl fmt::Display for HType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Which non-rigidity condition holds, with its indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "condition")]
pub enum RigidityWitness {
    /// Some exponent `l_{group,index}` equals 1.
    LinearVariable { group: u8, index: u16 },
    /// Two groups all of even exponents, each with an exponent equal to 2.
    EvenPair { i: u8, a: u16, j: u8, b: u16 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict")]
pub enum RigidityVerdict {
    Rigid,
    Flexible { htype: HType, witnesses: Vec<RigidityWitness> },
    NonRigidOther { witnesses: Vec<RigidityWitness> },
}

impl RigidityVerdict {
    pub fn is_rigid(&self) -> bool {
        matches!(self, RigidityVerdict::Rigid)
    }

    pub fn witnesses(&self) -> &[RigidityWitness] {
        match self {
            RigidityVerdict::Rigid => &[],
            RigidityVerdict::Flexible { witnesses, .. } | RigidityVerdict::NonRigidOther { witnesses } => {
                witnesses
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            RigidityVerdict::Rigid => "Rigid".into(),
            RigidityVerdict::Flexible { htype, .. } => format!("Flexible({htype})"),
            RigidityVerdict::NonRigidOther { .. } => "NonRigidOther".into(),
        }
    }
}

fn all_even_with_two(group: &[u32]) -> Option<usize> {
    if group.is_empty() || group.iter().any(|l| l % 2 != 0) {
        return None;
    }
    group.iter().position(|&l| l == 2)
}

/// All witnesses of the two non-rigidity conditions.
pub fn rigidity_witnesses(shape: &TrinomialShape) -> Vec<RigidityWitness> {
    let mut out: Vec<RigidityWitness> = shape
        .linear_vars()
        .into_iter()
        .map(|v| RigidityWitness::LinearVariable {
            group: v.group,
            index: v.index,
        })
        .collect();
    if !shape.has_free_term() {
        for i in 0..3 {
            for j in i + 1..3 {
                if let (Some(a), Some(b)) = (
                    all_even_with_two(shape.group(i)),
                    all_even_with_two(shape.group(j)),
                ) {
                    out.push(RigidityWitness::EvenPair {
                        i: i as u8,
                        a: a as u16 + 1,
                        j: j as u8,
                        b: b as u16 + 1,
                    });
                }
            }
        }
    }
    out
}

fn all_ones(g: &[u32]) -> bool {
    !g.is_empty() && g.iter().all(|&l| l == 1)
}

fn all_twos(g: &[u32]) -> bool {
    !g.is_empty() && g.iter().all(|&l| l == 2)
}

fn has_one(g: &[u32]) -> bool {
    g.contains(&1)
}

/// Every H-type the shape matches, up to renumbering of groups and variables.
pub fn h_types(shape: &TrinomialShape) -> Vec<HType> {
    let g = shape.groups();
    let free = shape.has_free_term();
    let mut out = Vec::new();
    // H1: some monomial is a product of distinct variables.
    if g.iter().any(|x| all_ones(x)) {
        out.push(HType::H1);
    }
    // H2: two monomials are products of squares.
    if !free && g.iter().filter(|x| all_twos(x)).count() >= 2 {
        out.push(HType::H2);
    }
    // H3: two monomials each contain a linear variable.
    if g.iter().filter(|x| has_one(x)).count() >= 2 {
        out.push(HType::H3);
    }
    let even2: Vec<bool> = g.iter().map(|x| all_even_with_two(x).is_some()).collect();
    // H4: one monomial with a linear variable, the other two even with a square.
    if !free && (0..3).any(|k| has_one(&g[k]) && (0..3).filter(|&o| o != k).all(|o| even2[o])) {
        out.push(HType::H4);
    }
    // H5: all three monomials even, each with a square.
    if !free && even2.iter().all(|&e| e) {
        out.push(HType::H5);
    }
    out
}

pub fn rigidity_classify(shape: &TrinomialShape) -> Result<RigidityVerdict, ShapeError> {
    if let Some(g) = shape.degenerate_group() {
        return Err(ShapeError::DegenerateShape(g));
    }
    let witnesses = rigidity_witnesses(shape);
    if witnesses.is_empty() {
        return Ok(RigidityVerdict::Rigid);
    }
    Ok(match h_types(shape).first() {
        Some(&htype) => RigidityVerdict::Flexible { htype, witnesses },
        None => RigidityVerdict::NonRigidOther { witnesses },
    })
}

// ---------------------------------------------------------------------------
// Factoriality

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Factoriality {
    /// gcd of each group's exponents; `None` for the free term.
    pub d: [Option<u32>; 3],
    /// `None` when the criterion does not apply (a group is a single linear variable).
    pub is_factorial: Option<bool>,
}

pub fn factoriality(shape: &TrinomialShape) -> Factoriality {
    let gcd_of = |g: &[u32]| -> Option<u32> { g.iter().copied().reduce(|a, b| a.gcd(&b)) };
    let d = [
        gcd_of(shape.group(0)),
        gcd_of(shape.group(1)),
        gcd_of(shape.group(2)),
    ];
    let is_factorial = if shape.has_free_term() {
        Some(d[1] == Some(1) && d[2] == Some(1))
    } else if shape.is_degenerate() {
        None
    } else {
        let v: Vec<u32> = d.iter().map(|x| x.unwrap()).collect();
        Some(v[0].gcd(&v[1]) == 1 && v[0].gcd(&v[2]) == 1 && v[1].gcd(&v[2]) == 1)
    };
    Factoriality { d, is_factorial }
}

// ---------------------------------------------------------------------------
// Torus lattice

/// Saturated lattice of cocharacters `a ∈ Z^n` of the diagonal torus that fix
/// the equation up to a common character; `t(λ)_v = Π_k λ_k^{basis[k][v]}`
/// parametrizes the neutral component.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeBasis {
    pub basis: Vec<Vec<i64>>,
    pub rank: usize,
}

/// Rows of the constraint map whose kernel is the torus lattice.
pub fn torus_constraints(shape: &TrinomialShape) -> Vec<Vec<i64>> {
    let n = shape.n();
    let row_of = |g: usize| -> Vec<i64> {
        let mut r = vec![0i64; n];
        for v in shape.group_vars(g) {
            r[shape.position(v)] = shape.exponent(v) as i64;
        }
        r
    };
    let (r0, r1, r2) = (row_of(0), row_of(1), row_of(2));
    if shape.has_free_term() {
        vec![r1, r2]
    } else {
        let sub = |a: &[i64], b: &[i64]| a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<i64>>();
        vec![sub(&r0, &r1), sub(&r1, &r2)]
    }
}

pub fn torus_lattice(shape: &TrinomialShape) -> LatticeBasis {
    let n = shape.n();
    let kernel = lattice::integer_kernel(&torus_constraints(shape), n);
    let basis = lattice::hermite_rows(&kernel);
    LatticeBasis {
        rank: basis.len(),
        basis,
    }
}

impl LatticeBasis {
    /// Torus element for parameters `λ` (all nonzero).
    pub fn torus_element<F: Field>(&self, ctx: FieldCtx, n: usize, lambda: &[F]) -> Vec<F> {
        (0..n)
            .map(|v| {
                self.basis.iter().zip(lambda).fold(F::one(&ctx), |t, (row, l)| {
                    t * l.powi(row[v]).expect("torus parameters are nonzero")
                })
            })
            .collect()
    }

    pub fn satisfies_constraints(&self, shape: &TrinomialShape) -> bool {
        let cons = torus_constraints(shape);
        self.basis
            .iter()
            .all(|a| cons.iter().all(|r| r.iter().zip(a).map(|(x, y)| x * y).sum::<i64>() == 0))
    }
}

/// True when `t` fixes the equation's span with the neutral-component character
/// relations (`t^{l_0} = t^{l_1} = t^{l_2}`, or `t^{l_1} = t^{l_2} = 1` with a free term).
pub fn in_stabilizer<F: Field>(shape: &TrinomialShape, t: &[F]) -> bool {
    let ch = |g: usize| -> Option<F> {
        let vars = shape.group_vars(g);
        if vars.is_empty() {
            return None;
        }
        Some(vars.iter().fold(F::one(&t[0].ctx()), |acc, &v| {
            acc * t[shape.position(v)].pow(shape.exponent(v) as u64)
        }))
    };
    let (c1, c2) = (ch(1).unwrap(), ch(2).unwrap());
    match ch(0) {
        None => c1.is_one() && c2.is_one(),
        Some(c0) => c0 == c1 && c1 == c2,
    }
}

// ---------------------------------------------------------------------------
// Symmetries

/// A permutation of variables as images in canonical order: `map[i]` is the
/// canonical position of the image of variable `i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VarPerm(pub Vec<usize>);

impl VarPerm {
    pub fn identity(n: usize) -> Self {
        VarPerm((0..n).collect())
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(i, &j)| i == j)
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &VarPerm) -> VarPerm {
        VarPerm(other.0.iter().map(|&j| self.0[j]).collect())
    }

    pub fn inverse(&self) -> VarPerm {
        let mut inv = vec![0; self.0.len()];
        for (i, &j) in self.0.iter().enumerate() {
            inv[j] = i;
        }
        VarPerm(inv)
    }

    pub fn apply_var(&self, shape: &TrinomialShape, v: VarId) -> VarId {
        shape.vars()[self.0[shape.position(v)]]
    }

    /// Coordinates of the image point: the value of variable `i` moves to `map[i]`.
    pub fn apply_point<F: Clone>(&self, pt: &[F]) -> Vec<F> {
        let mut out = pt.to_vec();
        for (i, &j) in self.0.iter().enumerate() {
            out[j] = pt[i].clone();
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymmetryGroup {
    pub generators: Vec<VarPerm>,
    pub order: usize,
}

/// Cap on closure enumeration.
const MAX_GROUP_ORDER: usize = 40_320;

pub fn symmetry_generators(shape: &TrinomialShape) -> Vec<VarPerm> {
    let n = shape.n();
    let mut gens = Vec::new();
    for g in 0..3 {
        let vars = shape.group_vars(g);
        for a in 0..vars.len() {
            for b in a + 1..vars.len() {
                if shape.exponent(vars[a]) == shape.exponent(vars[b]) {
                    let mut p = VarPerm::identity(n);
                    p.0.swap(shape.position(vars[a]), shape.position(vars[b]));
                    gens.push(p);
                }
            }
        }
    }
    for g in 0..3 {
        for h in g + 1..3 {
            let (mut eg, mut eh) = (shape.group(g).to_vec(), shape.group(h).to_vec());
            eg.sort();
            eh.sort();
            if eg.is_empty() || eg != eh {
                continue;
            }
            // match variables by sorted exponent
            let mut vg = shape.group_vars(g);
            let mut vh = shape.group_vars(h);
            vg.sort_by_key(|&v| (shape.exponent(v), v));
            vh.sort_by_key(|&v| (shape.exponent(v), v));
            let mut p = VarPerm::identity(n);
            for (a, b) in vg.iter().zip(&vh) {
                p.0[shape.position(*a)] = shape.position(*b);
                p.0[shape.position(*b)] = shape.position(*a);
            }
            gens.push(p);
        }
    }
    gens
}

/// Every element of the group generated by `gens`, by breadth-first closure.
pub fn closure(n: usize, gens: &[VarPerm]) -> Vec<VarPerm> {
    let mut seen: BTreeSet<VarPerm> = BTreeSet::new();
    let id = VarPerm::identity(n);
    seen.insert(id.clone());
    let mut queue = VecDeque::from([id]);
    while let Some(p) = queue.pop_front() {
        for g in gens {
            let q = g.compose(&p);
            if seen.insert(q.clone()) {
                assert!(seen.len() <= MAX_GROUP_ORDER, "symmetry group too large to enumerate");
                queue.push_back(q);
            }
        }
    }
    seen.into_iter().collect()
}

pub fn symmetry_group(shape: &TrinomialShape) -> SymmetryGroup {
    let generators = symmetry_generators(shape);
    let order = closure(shape.n(), &generators).len();
    SymmetryGroup { generators, order }
}

/// Applies a variable permutation to a polynomial.
pub fn permute_poly<F: Field>(shape: &TrinomialShape, p: &VarPerm, f: &Poly<F>) -> Poly<F> {
    f.rename(|v| p.apply_var(shape, v))
}
