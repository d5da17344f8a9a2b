use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use trinomial::field::{Field, FieldCtx, Fp, Rational};
use trinomial::harness::sample_point;
use trinomial::lnd::{flow_by_name, lnd_catalog};
use trinomial::model::TrinomialShape;
use trinomial::poly::{Monomial, Poly, VarId};
use trinomial::strata::{linked, VarSet};

const P: u64 = 101;
const F101: FieldCtx = FieldCtx::PrimeField(P);

fn shape_a() -> TrinomialShape {
    TrinomialShape::new(&[1, 2], &[3], &[3]).unwrap()
}

fn shape_c() -> TrinomialShape {
    TrinomialShape::new(&[1, 1, 2], &[3], &[3]).unwrap()
}

fn shape_d() -> TrinomialShape {
    TrinomialShape::new(&[1, 2, 2], &[3], &[3]).unwrap()
}

/// Terms over the variables of shape A with small exponents.
fn term() -> impl Strategy<Value = (i64, [u32; 4])> {
    (-20i64..20, prop::array::uniform4(0u32..3))
}

fn poly_from<F: Field>(ctx: FieldCtx, terms: &[(i64, [u32; 4])]) -> Poly<F> {
    let vars = shape_a().vars();
    terms.iter().fold(Poly::zero(ctx), |acc, (c, e)| {
        let m = Monomial::from_pairs(vars.iter().copied().zip(e.iter().copied()));
        acc.add(&Poly::term(ctx, F::from_i64(&ctx, *c), m))
    })
}

fn polys() -> impl Strategy<Value = Vec<(i64, [u32; 4])>> {
    prop::collection::vec(term(), 0..6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn ring_axioms_over_q(a in polys(), b in polys(), c in polys()) {
        let q = FieldCtx::Rationals;
        let (a, b, c) = (poly_from::<Rational>(q, &a), poly_from::<Rational>(q, &b), poly_from::<Rational>(q, &c));
        prop_assert_eq!(a.add(&b), b.add(&a));
        prop_assert_eq!(a.mul(&b), b.mul(&a));
        prop_assert_eq!(a.mul(&b).mul(&c), a.mul(&b.mul(&c)));
        prop_assert_eq!(a.mul(&b.add(&c)), a.mul(&b).add(&a.mul(&c)));
        prop_assert!(a.sub(&a).is_zero());
        prop_assert_eq!(a.mul(&Poly::one(q)), a.clone());
    }

    #[test]
    fn ring_axioms_over_fp(a in polys(), b in polys(), c in polys()) {
        let (a, b, c) = (poly_from::<Fp>(F101, &a), poly_from::<Fp>(F101, &b), poly_from::<Fp>(F101, &c));
        prop_assert_eq!(a.add(&b).add(&c), a.add(&b.add(&c)));
        prop_assert_eq!(a.mul(&b.add(&c)), a.mul(&b).add(&a.mul(&c)));
        prop_assert!(a.add(&a.neg()).is_zero());
    }

    #[test]
    fn leibniz_rule(a in polys(), b in polys()) {
        let q = FieldCtx::Rationals;
        let (a, b) = (poly_from::<Rational>(q, &a), poly_from::<Rational>(q, &b));
        for d in lnd_catalog::<Rational>(&shape_a(), q).derivations {
            let lhs = d.derive(&a.mul(&b));
            let rhs = d.derive(&a).mul(&b).add(&a.mul(&d.derive(&b)));
            prop_assert_eq!(lhs, rhs, "{}", d.designator());
        }
    }

    #[test]
    fn division_by_the_equation(a in polys(), b in polys()) {
        let q = FieldCtx::Rationals;
        let g = shape_a().equation::<Rational>(q);
        let (a, b) = (poly_from::<Rational>(q, &a), poly_from::<Rational>(q, &b));
        let f = a.mul(&g).add(&b);
        let (quot, rem) = f.div_rem(&g);
        prop_assert_eq!(quot.mul(&g).add(&rem), f.clone());
        prop_assert_eq!(f.reduce(&g), b.reduce(&g));
        prop_assert_eq!(a.mul(&g).divided_by(&g), Some(a.clone()));
        // a normal form is its own remainder
        prop_assert_eq!(rem.reduce(&g), rem);
    }

    #[test]
    fn linked_is_reflexive_and_symmetric(m1 in 0u32..32, m2 in 0u32..32) {
        let c = shape_c();
        let vars = c.vars();
        let set = |m: u32| VarSet::new(vars.iter().enumerate().filter(|(i, _)| m >> i & 1 == 1).map(|(_, &v)| v));
        let (s, p) = (set(m1), set(m2));
        prop_assert!(linked(&c, &s, &s));
        prop_assert_eq!(linked(&c, &s, &p), linked(&c, &p, &s));
    }

    #[test]
    fn flow_group_law(seed in any::<u64>(), u in 0i64..101, v in 0i64..101) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for shape in [shape_a(), shape_d()] {
            let pt = sample_point(&shape, P, 0.2, &mut rng).unwrap();
            for d in lnd_catalog::<Fp>(&shape, F101).derivations {
                let f = flow_by_name::<Fp>(&shape, F101, &d.designator()).unwrap();
                let (u, v) = (Fp::new(u, P), Fp::new(v, P));
                let step = f.apply(&shape, &u, &f.apply(&shape, &v, &pt).unwrap()).unwrap();
                let once = f.apply(&shape, &(u + v), &pt).unwrap();
                prop_assert_eq!(step, once, "{}", d.designator());
            }
        }
    }
}

#[test]
fn variable_names_round_trip() {
    for g in 0..3u8 {
        for i in 1..5u16 {
            let v = VarId::new(g, i);
            assert_eq!(v.to_string().parse::<VarId>().unwrap(), v);
        }
    }
}
