//! Vanishing-set strata `U(S)`, components of the singular locus, the sets
//! `N(S)` and the linked relation between vanishing sets.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::field::{Field, FieldCtx};
use crate::model::TrinomialShape;
use crate::poly::VarId;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StrataError {
    #[error("point does not satisfy the equation")]
    PointNotOnVariety,
    #[error("point has {got} coordinates, expected {expected}")]
    PointLength { got: usize, expected: usize },
    #[error("{0} is not a variable of the shape")]
    UnknownVariable(VarId),
    #[error("U({set}) has no points over {ctx}")]
    EmptyStratum { set: VarSet, ctx: FieldCtx },
}

/// A set of variables, e.g. the vanishing set of a point.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarSet(pub BTreeSet<VarId>);

impl VarSet {
    pub fn new(vars: impl IntoIterator<Item = VarId>) -> Self {
        VarSet(vars.into_iter().collect())
    }

    pub fn contains(&self, v: VarId) -> bool {
        self.0.contains(&v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_subset(&self, other: &VarSet) -> bool {
        self.0.is_subset(&other.0)
    }

    /// The part `S_i` in group `i`.
    pub fn group(&self, i: usize) -> BTreeSet<VarId> {
        self.0.iter().filter(|v| v.group as usize == i).copied().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &VarId> {
        self.0.iter()
    }

    pub fn check(&self, shape: &TrinomialShape) -> Result<(), StrataError> {
        match self.0.iter().find(|&&v| !shape.contains(v)) {
            Some(&v) => Err(StrataError::UnknownVariable(v)),
            None => Ok(()),
        }
    }
}

impl fmt::Display for VarSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = self.0.iter().map(ToString::to_string).collect();
        write!(f, "{{{}}}", names.join(","))
    }
}

/// An irreducible component `X(S)` of the singular locus.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SingComponent {
    pub generator_set: VarSet,
}

fn check_len<F>(shape: &TrinomialShape, pt: &[F]) -> Result<(), StrataError> {
    if pt.len() == shape.n() {
        Ok(())
    } else {
        Err(StrataError::PointLength {
            got: pt.len(),
            expected: shape.n(),
        })
    }
}

pub fn on_variety<F: Field>(shape: &TrinomialShape, pt: &[F]) -> Result<bool, StrataError> {
    check_len(shape, pt)?;
    let ctx = pt.first().map_or(FieldCtx::Rationals, F::ctx);
    let g = shape.equation::<F>(ctx);
    Ok(g.eval_with(|v| Some(pt[shape.position(v)].clone()))
        .expect("point covers every variable")
        .is_zero())
}

pub fn support_zero_set<F: Field>(shape: &TrinomialShape, pt: &[F]) -> Result<VarSet, StrataError> {
    check_len(shape, pt)?;
    Ok(VarSet::new(
        shape.vars().into_iter().filter(|&v| pt[shape.position(v)].is_zero()),
    ))
}

/// Jacobian test: every partial derivative of the equation vanishes at `pt`.
pub fn is_singular<F: Field>(shape: &TrinomialShape, pt: &[F]) -> Result<bool, StrataError> {
    if !on_variety(shape, pt)? {
        return Err(StrataError::PointNotOnVariety);
    }
    let ctx = pt[0].ctx();
    let g = shape.equation::<F>(ctx);
    Ok(shape.vars().into_iter().all(|v| {
        g.partial(v)
            .eval_with(|u| Some(pt[shape.position(u)].clone()))
            .expect("point covers every variable")
            .is_zero()
    }))
}

/// Every choice, per group, of one variable with exponent ≥ 2 or two
/// variables with exponent 1. Hypersurfaces with a free term are smooth.
pub fn singular_components(shape: &TrinomialShape) -> Vec<SingComponent> {
    if shape.has_free_term() {
        return Vec::new();
    }
    let options: Vec<Vec<Vec<VarId>>> = (0..3)
        .map(|g| {
            let vars = shape.group_vars(g);
            let mut opts: Vec<Vec<VarId>> = vars
                .iter()
                .filter(|&&v| shape.exponent(v) >= 2)
                .map(|&v| vec![v])
                .collect();
            let lin: Vec<VarId> = vars.into_iter().filter(|&v| shape.exponent(v) == 1).collect();
            for a in 0..lin.len() {
                for b in a + 1..lin.len() {
                    opts.push(vec![lin[a], lin[b]]);
                }
            }
            opts
        })
        .collect();
    let mut out = Vec::new();
    for a in &options[0] {
        for b in &options[1] {
            for c in &options[2] {
                out.push(SingComponent {
                    generator_set: VarSet::new(a.iter().chain(b).chain(c).copied()),
                });
            }
        }
    }
    out.sort();
    out
}

/// Singularity read off the vanishing set: `U(S)` lies in some component.
pub fn is_singular_stratum(shape: &TrinomialShape, s: &VarSet) -> bool {
    singular_components(shape)
        .iter()
        .any(|c| c.generator_set.is_subset(s))
}

/// Values `t_v` with `Π t_v^{l_v} = c` over the variables of a group, if `c`
/// is a value of that monomial on the torus.
fn realize<F: Field>(shape: &TrinomialShape, g: usize, c: &F) -> Option<Vec<F>> {
    let exps: Vec<i64> = shape.group(g).iter().map(|&l| l as i64).collect();
    // Bezout coefficients for the gcd of the exponents
    let mut gcd = exps[0];
    let mut coef = vec![0i64; exps.len()];
    coef[0] = 1;
    for (j, &l) in exps.iter().enumerate().skip(1) {
        let e = num_integer::Integer::extended_gcd(&gcd, &l);
        for k in coef.iter_mut().take(j) {
            *k *= e.x;
        }
        coef[j] = e.y;
        gcd = e.gcd;
    }
    let r = c.kth_roots(gcd as u32).into_iter().min()?;
    coef.iter().map(|&a| r.powi(a)).collect()
}

/// A point of `U(S)`, or `EmptyStratum` when the field has none.
pub fn stratum_point<F: Field>(
    shape: &TrinomialShape,
    ctx: FieldCtx,
    s: &VarSet,
) -> Result<Vec<F>, StrataError> {
    s.check(shape)?;
    let mut pt: Vec<F> = shape
        .vars()
        .into_iter()
        .map(|v| if s.contains(v) { F::zero(&ctx) } else { F::one(&ctx) })
        .collect();
    let surviving: Vec<usize> = (0..3)
        .filter(|&g| shape.group(g).is_empty() || s.group(g).is_empty())
        .collect();
    let empty = || StrataError::EmptyStratum { set: s.clone(), ctx };
    match surviving.len() {
        0 => Ok(pt),
        1 => Err(empty()),
        2 => {
            let (i, j) = (surviving[0], surviving[1]);
            let candidates: Vec<F> = if shape.group(i).is_empty() {
                vec![F::one(&ctx)]
            } else {
                match F::elements(&ctx) {
                    Some(all) => all.into_iter().filter(|c| !c.is_zero()).collect(),
                    None => vec![F::one(&ctx), -F::one(&ctx)],
                }
            };
            for c in candidates {
                let vi = if shape.group(i).is_empty() {
                    Some(Vec::new())
                } else {
                    realize(shape, i, &c)
                };
                if let (Some(vi), Some(vj)) = (vi, realize(shape, j, &(-c.clone()))) {
                    for (v, x) in shape.group_vars(i).into_iter().zip(vi) {
                        pt[shape.position(v)] = x;
                    }
                    for (v, x) in shape.group_vars(j).into_iter().zip(vj) {
                        pt[shape.position(v)] = x;
                    }
                    return Ok(pt);
                }
            }
            Err(empty())
        }
        _ => Err(empty()),
    }
}

/// `N(S)`: components whose generator set lies in `S`. Requires `U(S) ≠ ∅`.
pub fn containing_components<F: Field>(
    shape: &TrinomialShape,
    ctx: FieldCtx,
    s: &VarSet,
) -> Result<Vec<SingComponent>, StrataError> {
    stratum_point::<F>(shape, ctx, s)?;
    Ok(singular_components(shape)
        .into_iter()
        .filter(|c| c.generator_set.is_subset(s))
        .collect())
}

/// The linked relation: per group, equal parts, or both parts of the form
/// `A` or `A ∪ {one exponent-1 variable}` for the same nonempty set `A` of
/// variables with exponent ≥ 2.
pub fn linked(shape: &TrinomialShape, s: &VarSet, p: &VarSet) -> bool {
    (0..3).all(|i| {
        let (si, pi) = (s.group(i), p.group(i));
        if si == pi {
            return true;
        }
        let heavy = |set: &BTreeSet<VarId>| -> BTreeSet<VarId> {
            set.iter().filter(|&&v| shape.exponent(v) >= 2).copied().collect()
        };
        let (ai, bi) = (heavy(&si), heavy(&pi));
        !ai.is_empty() && ai == bi && si.len() - ai.len() <= 1 && pi.len() - bi.len() <= 1
    })
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Groups indices of `sets` into classes of the linked relation.
pub fn linked_classes(shape: &TrinomialShape, sets: &[VarSet]) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..sets.len()).collect();
    for a in 0..sets.len() {
        for b in a + 1..sets.len() {
            if linked(shape, &sets[a], &sets[b]) {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
    }
    let mut classes: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..sets.len() {
        let r = find(&mut parent, i);
        classes.entry(r).or_default().push(i);
    }
    classes.into_values().collect()
}

/// Every vanishing set `S` with `U(S)` nonempty over the field, in order of
/// increasing size.
pub fn realized_sets<F: Field>(shape: &TrinomialShape, ctx: FieldCtx) -> Vec<VarSet> {
    let vars = shape.vars();
    assert!(vars.len() <= 20, "subset enumeration limited to 20 variables");
    let mut out: Vec<VarSet> = (0u32..1 << vars.len())
        .map(|mask| VarSet::new(vars.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &v)| v)))
        .filter(|s| stratum_point::<F>(shape, ctx, s).is_ok())
        .collect();
    out.sort_by(|a, b| a.len().cmp(&b.len()).then(a.cmp(b)));
    out
}

/// Realized vanishing sets of singular points.
pub fn singular_strata<F: Field>(shape: &TrinomialShape, ctx: FieldCtx) -> Vec<VarSet> {
    realized_sets::<F>(shape, ctx)
        .into_iter()
        .filter(|s| is_singular_stratum(shape, s))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Fp, Rational};

    const Q: FieldCtx = FieldCtx::Rationals;

    fn v(g: u8, i: u16) -> VarId {
        VarId::new(g, i)
    }

    fn qs(x: &[i64]) -> Vec<Rational> {
        x.iter().map(|&a| Rational::from_i64(&Q, a)).collect()
    }

    fn shape_a() -> TrinomialShape {
        TrinomialShape::new(&[1, 2], &[3], &[3]).unwrap()
    }

    fn shape_c() -> TrinomialShape {
        TrinomialShape::new(&[1, 1, 2], &[3], &[3]).unwrap()
    }

    #[test]
    fn zero_sets() {
        let a = shape_a();
        assert!(support_zero_set(&a, &qs(&[-2, 1, 1, 1])).unwrap().is_empty());
        assert_eq!(support_zero_set(&a, &qs(&[5, 0, -1, 1])).unwrap(), VarSet::new([v(0, 2)]));
        assert_eq!(support_zero_set(&a, &qs(&[0, 0, 0, 0])).unwrap().len(), 4);
    }

    #[test]
    fn jacobian() {
        let a = shape_a();
        assert!(is_singular(&a, &qs(&[3, 0, 0, 0])).unwrap());
        assert!(!is_singular(&a, &qs(&[-2, 1, 1, 1])).unwrap());
        let b = TrinomialShape::new(&[2], &[3], &[3]).unwrap();
        assert!(is_singular(&b, &qs(&[0, 0, 0])).unwrap());
        assert_eq!(is_singular(&a, &qs(&[1, 1, 1, 1])), Err(StrataError::PointNotOnVariety));
    }

    #[test]
    fn components() {
        let c = shape_c();
        let comps: Vec<VarSet> = singular_components(&c).into_iter().map(|c| c.generator_set).collect();
        let v1 = VarSet::new([v(0, 3), v(1, 1), v(2, 1)]);
        let v2 = VarSet::new([v(0, 1), v(0, 2), v(1, 1), v(2, 1)]);
        assert_eq!(comps, vec![v2.clone(), v1.clone()]);
        assert_eq!(singular_components(&shape_a()).len(), 1);
        let e = TrinomialShape::new(&[], &[1, 3, 3], &[3, 3]).unwrap();
        assert!(singular_components(&e).is_empty());
        let n = |s: &VarSet| -> Vec<VarSet> {
            containing_components::<Rational>(&c, Q, s)
                .unwrap()
                .into_iter()
                .map(|c| c.generator_set)
                .collect()
        };
        assert_eq!(n(&VarSet::new([v(0, 2), v(0, 3), v(1, 1), v(2, 1)])), vec![v1.clone()]);
        assert_eq!(n(&VarSet::new(c.vars())), vec![v2.clone(), v1]);
        assert_eq!(n(&v2), vec![v2]);
    }

    #[test]
    fn stratum_points() {
        let a = shape_a();
        // only y vanishes: x*0 + z^3 + s^3 = 0 needs z^3 = -s^3
        let s = VarSet::new([v(0, 2)]);
        let pt = stratum_point::<Rational>(&a, Q, &s).unwrap();
        assert!(on_variety(&a, &pt).unwrap());
        assert_eq!(support_zero_set(&a, &pt).unwrap(), s);
        assert!(matches!(
            stratum_point::<Rational>(&a, Q, &VarSet::new([v(1, 1), v(2, 1)])),
            Err(StrataError::EmptyStratum { .. })
        ));
        let h2 = TrinomialShape::new(&[2, 2], &[2, 2], &[5]).unwrap();
        let s = VarSet::new([v(2, 1)]);
        assert!(stratum_point::<Rational>(&h2, Q, &s).is_err());
        let f5 = FieldCtx::PrimeField(5);
        let pt = stratum_point::<Fp>(&h2, f5, &s).unwrap();
        assert!(on_variety(&h2, &pt).unwrap());
        let mixed = TrinomialShape::new(&[2, 3], &[4], &[1, 5]).unwrap();
        let f7 = FieldCtx::PrimeField(7);
        let s = VarSet::new([v(2, 1)]);
        let pt = stratum_point::<Fp>(&mixed, f7, &s).unwrap();
        assert!(on_variety(&mixed, &pt).unwrap());
        assert_eq!(support_zero_set(&mixed, &pt).unwrap(), s);
    }

    #[test]
    fn linked_sets() {
        let a = shape_a();
        let s = VarSet::new([v(0, 2), v(1, 1), v(2, 1)]);
        let p = VarSet::new(a.vars());
        assert!(linked(&a, &s, &p));
        assert!(linked(&a, &s, &s));
        let b = TrinomialShape::new(&[2], &[3], &[3]).unwrap();
        let s = VarSet::new(b.vars());
        assert!(!linked(&b, &s, &VarSet::new([v(0, 1), v(1, 1)])));
        let c = shape_c();
        let all = VarSet::new(c.vars());
        let o2 = VarSet::new([v(0, 2), v(0, 3), v(1, 1), v(2, 1)]);
        let o3 = VarSet::new([v(0, 1), v(0, 3), v(1, 1), v(2, 1)]);
        let o4 = VarSet::new([v(0, 3), v(1, 1), v(2, 1)]);
        let o5 = VarSet::new([v(0, 1), v(0, 2), v(1, 1), v(2, 1)]);
        let classes = linked_classes(&c, &[all, o2, o3, o4, o5]);
        assert_eq!(classes, vec![vec![0], vec![1, 2, 3], vec![4]]);
    }

    #[test]
    fn singular_strata_of_example_shapes() {
        let a = shape_a();
        assert_eq!(singular_strata::<Rational>(&a, Q).len(), 2);
        let c = shape_c();
        assert_eq!(singular_strata::<Rational>(&c, Q).len(), 5);
    }
}
