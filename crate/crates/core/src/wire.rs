//! JSON encodings of shapes, points, variable sets, descriptors, words and
//! derivations. Every encoder has a parser that restores an equal value.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::field::{Field, FieldCtx, FieldError};
use crate::lnd::{derivation_by_name, Derivation, LndError};
use crate::model::{self, ShapeError, ShapeFile, TrinomialShape, VarPerm};
use crate::orbits::{
    self, AutStep, AutWord, DescriptorClass, FamilyTag, IndexSet, MlVerdict, OrbitCount,
    SautDescriptor, StratumDescriptor,
};
use crate::poly::{Poly, PolyError, VarId};
use crate::strata::VarSet;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WireError {
    #[error("invalid JSON: {0}")]
    Json(String),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error(transparent)]
    Lnd(#[from] LndError),
    #[error("malformed {what}: {detail}")]
    Malformed { what: &'static str, detail: String },
    #[error("ambiguous point: {0}")]
    AmbiguousPoint(String),
}

fn malformed(what: &'static str, detail: impl Into<String>) -> WireError {
    WireError::Malformed {
        what,
        detail: detail.into(),
    }
}

fn parse_value(text: &str) -> Result<Value, WireError> {
    serde_json::from_str(text).map_err(|e| WireError::Json(e.to_string()))
}

// shapes

pub fn shape_to_json(shape: &TrinomialShape) -> Value {
    json!({ "groups": shape.raw() })
}

pub fn shape_file_from_json(v: &Value) -> Result<ShapeFile, WireError> {
    serde_json::from_value(v.clone()).map_err(|e| malformed("shape", e.to_string()))
}

pub fn shape_from_json(v: &Value) -> Result<TrinomialShape, WireError> {
    Ok(shape_file_from_json(v)?.shape()?)
}

pub fn parse_shape(text: &str) -> Result<ShapeFile, WireError> {
    shape_file_from_json(&parse_value(text)?)
}

// field elements

pub fn element_to_json<F: Field>(x: &F) -> Value {
    Value::String(x.to_string())
}

/// Accepts JSON strings (`"-1/2"`) and integers.
pub fn element_from_json<F: Field>(ctx: FieldCtx, v: &Value) -> Result<F, WireError> {
    match v {
        Value::String(s) => Ok(F::parse(&ctx, s)?),
        Value::Number(n) if n.is_i64() => Ok(F::from_i64(&ctx, n.as_i64().unwrap_or_default())),
        Value::Number(n) => Ok(F::parse(&ctx, &n.to_string())?),
        other => Err(malformed("field element", other.to_string())),
    }
}

// points

pub fn point_to_json<F: Field>(pt: &[F]) -> Value {
    Value::Array(pt.iter().map(element_to_json).collect())
}

/// Ordered array in canonical variable order, or an object keyed by variable
/// names or aliases. A key naming a variable already given is rejected.
pub fn point_from_json<F: Field>(
    shape: &TrinomialShape,
    ctx: FieldCtx,
    aliases: &BTreeMap<String, VarId>,
    v: &Value,
) -> Result<Vec<F>, WireError> {
    let n = shape.n();
    match v {
        Value::Array(items) => {
            if items.len() != n {
                return Err(malformed("point", format!("expected {n} coordinates, got {}", items.len())));
            }
            items.iter().map(|x| element_from_json(ctx, x)).collect()
        }
        Value::Object(map) => {
            let mut slots: Vec<Option<F>> = vec![None; n];
            for (key, val) in map {
                let var = match aliases.get(key) {
                    Some(&v) => v,
                    None => key.parse::<VarId>()?,
                };
                if !shape.contains(var) {
                    return Err(malformed("point", format!("{var} is not a variable of the shape")));
                }
                let slot = &mut slots[shape.position(var)];
                if slot.is_some() {
                    return Err(WireError::AmbiguousPoint(format!("{var} is given twice (key `{key}`)")));
                }
                *slot = Some(element_from_json(ctx, val)?);
            }
            slots
                .into_iter()
                .zip(shape.vars())
                .map(|(s, v)| s.ok_or_else(|| malformed("point", format!("missing coordinate {v}"))))
                .collect()
        }
        other => Err(malformed("point", format!("expected array or object, got {other}"))),
    }
}

pub fn parse_point<F: Field>(
    shape: &TrinomialShape,
    ctx: FieldCtx,
    aliases: &BTreeMap<String, VarId>,
    text: &str,
) -> Result<Vec<F>, WireError> {
    point_from_json(shape, ctx, aliases, &parse_value(text)?)
}

// variable sets

pub fn varset_to_json(s: &VarSet) -> Value {
    json!({ "vars": s.iter().map(ToString::to_string).collect::<Vec<_>>() })
}

pub fn varset_from_json(v: &Value) -> Result<VarSet, WireError> {
    let vars = v
        .get("vars")
        .and_then(Value::as_array)
        .ok_or_else(|| malformed("variable set", "expected {\"vars\": [...]}"))?;
    let parsed = vars
        .iter()
        .map(|x| {
            x.as_str()
                .ok_or_else(|| malformed("variable set", x.to_string()))
                .and_then(|s| Ok(s.parse::<VarId>()?))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(VarSet::new(parsed))
}

// descriptors

fn set_to_json(s: &IndexSet) -> Value {
    json!(s.iter().collect::<Vec<_>>())
}

fn set_from_json(v: &Value, key: &str) -> Result<IndexSet, WireError> {
    let arr = v
        .get(key)
        .and_then(Value::as_array)
        .ok_or_else(|| malformed("descriptor", format!("missing index set `{key}`")))?;
    arr.iter()
        .map(|x| {
            x.as_u64()
                .filter(|&i| i >= 1 && i <= u16::MAX as u64)
                .map(|i| i as u16)
                .ok_or_else(|| malformed("descriptor", format!("bad index {x}")))
        })
        .collect()
}

pub fn descriptor_to_json<F: Field>(d: &StratumDescriptor<F>) -> Value {
    use StratumDescriptor::*;
    let t = d.type_name();
    match d {
        BigO | DDBigO | RegularFlex => json!({ "type": t }),
        OMeps { m, r } | DDOMeps { m, r } => json!({ "type": t, "M": set_to_json(m), "r": element_to_json(r) }),
        O1 { m, p, q } | O2 { m, p, q } => {
            json!({ "type": t, "M": set_to_json(m), "P": set_to_json(p), "Q": set_to_json(q) })
        }
        DD { k, m, p, q } => json!({
            "type": t,
            "K": set_to_json(k),
            "M": set_to_json(m),
            "P": set_to_json(p),
            "Q": set_to_json(q),
        }),
        SingTorus(s) | TorusStratum(s) => json!({ "type": t, "S": varset_to_json(s) }),
    }
}

pub fn descriptor_from_json<F: Field>(ctx: FieldCtx, v: &Value) -> Result<StratumDescriptor<F>, WireError> {
    use StratumDescriptor::*;
    let t = v
        .get("type")
        .and_then(Value::as_str)
        .ok_or_else(|| malformed("descriptor", "missing `type`"))?;
    let r = || -> Result<F, WireError> {
        element_from_json(ctx, v.get("r").ok_or_else(|| malformed("descriptor", "missing `r`"))?)
    };
    let s = || -> Result<VarSet, WireError> {
        varset_from_json(v.get("S").ok_or_else(|| malformed("descriptor", "missing `S`"))?)
    };
    Ok(match t {
        "BigO" => BigO,
        "DDBigO" => DDBigO,
        "RegularFlex" => RegularFlex,
        "OMeps" => OMeps { m: set_from_json(v, "M")?, r: r()? },
        "DDOMeps" => DDOMeps { m: set_from_json(v, "M")?, r: r()? },
        "O1" => O1 { m: set_from_json(v, "M")?, p: set_from_json(v, "P")?, q: set_from_json(v, "Q")? },
        "O2" => O2 { m: set_from_json(v, "M")?, p: set_from_json(v, "P")?, q: set_from_json(v, "Q")? },
        "DD" => DD {
            k: set_from_json(v, "K")?,
            m: set_from_json(v, "M")?,
            p: set_from_json(v, "P")?,
            q: set_from_json(v, "Q")?,
        },
        "SingTorus" => SingTorus(s()?),
        "TorusStratum" => TorusStratum(s()?),
        other => return Err(malformed("descriptor", format!("unknown type `{other}`"))),
    })
}

pub fn class_to_json(c: &DescriptorClass) -> Value {
    match c {
        DescriptorClass::BigO => json!({ "type": "BigO" }),
        DescriptorClass::OM(m) => json!({ "type": "OM", "M": set_to_json(m) }),
        DescriptorClass::O1(m, p, q) => {
            json!({ "type": "O1", "M": set_to_json(m), "P": set_to_json(p), "Q": set_to_json(q) })
        }
        DescriptorClass::O2(m, p, q) => {
            json!({ "type": "O2", "M": set_to_json(m), "P": set_to_json(p), "Q": set_to_json(q) })
        }
    }
}

pub fn class_from_json(v: &Value) -> Result<DescriptorClass, WireError> {
    let t = v.get("type").and_then(Value::as_str).unwrap_or_default();
    Ok(match t {
        "BigO" => DescriptorClass::BigO,
        "OM" => DescriptorClass::OM(set_from_json(v, "M")?),
        "O1" => DescriptorClass::O1(set_from_json(v, "M")?, set_from_json(v, "P")?, set_from_json(v, "Q")?),
        "O2" => DescriptorClass::O2(set_from_json(v, "M")?, set_from_json(v, "P")?, set_from_json(v, "Q")?),
        other => return Err(malformed("descriptor class", format!("unknown type `{other}`"))),
    })
}

pub fn count_to_json(c: &OrbitCount) -> Value {
    json!({
        "aut_alg": c.aut_alg,
        "aut": c.aut,
        "listing": c.listing.iter().map(|orbit| {
            json!({
                "classes": orbit.iter().map(class_to_json).collect::<Vec<_>>(),
                "label": orbit.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ∪ "),
            })
        }).collect::<Vec<_>>(),
    })
}

pub fn count_from_json(v: &Value) -> Result<OrbitCount, WireError> {
    let num = |k: &str| {
        v.get(k)
            .and_then(Value::as_u64)
            .ok_or_else(|| malformed("orbit count", format!("missing `{k}`")))
    };
    let listing = v
        .get("listing")
        .and_then(Value::as_array)
        .ok_or_else(|| malformed("orbit count", "missing `listing`"))?
        .iter()
        .map(|orbit| {
            orbit
                .get("classes")
                .and_then(Value::as_array)
                .ok_or_else(|| malformed("orbit count", "missing `classes`"))?
                .iter()
                .map(class_from_json)
                .collect()
        })
        .collect::<Result<_, _>>()?;
    Ok(OrbitCount {
        aut_alg: num("aut_alg")?,
        aut: num("aut")?,
        listing,
    })
}

pub fn saut_to_json<F: Field>(d: &SautDescriptor<F>) -> Value {
    match d {
        SautDescriptor::Sheet(y) => json!({ "type": "Sheet", "y": point_to_json(y) }),
        SautDescriptor::Line(w) => json!({
            "type": "Line",
            "fixed": w.iter().map(|(v, c)| (v.to_string(), element_to_json(c))).collect::<Map<_, _>>(),
        }),
        SautDescriptor::FixedPoint => json!({ "type": "FixedPoint" }),
    }
}

pub fn saut_from_json<F: Field>(ctx: FieldCtx, v: &Value) -> Result<SautDescriptor<F>, WireError> {
    match v.get("type").and_then(Value::as_str) {
        Some("Sheet") => {
            let y = v
                .get("y")
                .and_then(Value::as_array)
                .ok_or_else(|| malformed("SAut descriptor", "missing `y`"))?;
            Ok(SautDescriptor::Sheet(
                y.iter().map(|x| element_from_json(ctx, x)).collect::<Result<_, _>>()?,
            ))
        }
        Some("Line") => {
            let fixed = v
                .get("fixed")
                .and_then(Value::as_object)
                .ok_or_else(|| malformed("SAut descriptor", "missing `fixed`"))?;
            let mut w = fixed
                .iter()
                .map(|(k, x)| Ok((k.parse::<VarId>()?, element_from_json(ctx, x)?)))
                .collect::<Result<Vec<_>, WireError>>()?;
            w.sort_by_key(|(v, _)| *v);
            Ok(SautDescriptor::Line(w))
        }
        Some("FixedPoint") => Ok(SautDescriptor::FixedPoint),
        _ => Err(malformed("SAut descriptor", v.to_string())),
    }
}

// words

pub fn word_to_json<F: Field>(w: &AutWord<F>) -> Value {
    let steps: Vec<Value> = w
        .steps
        .iter()
        .map(|s| match s {
            AutStep::Torus { lambda, coords } => json!({
                "op": "Torus",
                "lambda": point_to_json(lambda),
                "t": point_to_json(coords),
            }),
            AutStep::Flow { derivation, u } => json!({
                "op": "Flow",
                "derivation": derivation,
                "u": element_to_json(u),
            }),
            AutStep::Perm(p) => json!({ "op": "Perm", "images": p.0 }),
        })
        .collect();
    json!({ "steps": steps })
}

pub fn word_from_json<F: Field>(ctx: FieldCtx, v: &Value) -> Result<AutWord<F>, WireError> {
    let steps = v
        .get("steps")
        .and_then(Value::as_array)
        .ok_or_else(|| malformed("word", "missing `steps`"))?;
    let elems = |s: &Value, k: &str| -> Result<Vec<F>, WireError> {
        s.get(k)
            .and_then(Value::as_array)
            .ok_or_else(|| malformed("word", format!("missing `{k}`")))?
            .iter()
            .map(|x| element_from_json(ctx, x))
            .collect()
    };
    let steps = steps
        .iter()
        .map(|s| match s.get("op").and_then(Value::as_str) {
            Some("Torus") => Ok(AutStep::Torus {
                lambda: elems(s, "lambda")?,
                coords: elems(s, "t")?,
            }),
            Some("Flow") => Ok(AutStep::Flow {
                derivation: s
                    .get("derivation")
                    .and_then(Value::as_str)
                    .ok_or_else(|| malformed("word", "missing `derivation`"))?
                    .to_string(),
                u: element_from_json(ctx, s.get("u").ok_or_else(|| malformed("word", "missing `u`"))?)?,
            }),
            Some("Perm") => {
                let images = s
                    .get("images")
                    .and_then(Value::as_array)
                    .ok_or_else(|| malformed("word", "missing `images`"))?
                    .iter()
                    .map(|x| x.as_u64().map(|i| i as usize).ok_or_else(|| malformed("word", x.to_string())))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(AutStep::Perm(VarPerm(images)))
            }
            _ => Err(malformed("word", s.to_string())),
        })
        .collect::<Result<_, WireError>>()?;
    Ok(AutWord { steps })
}

/// Human rendering: `[Flow D:1 u=-1, Torus t=(1,2,1,1)]`.
pub fn word_display<F: Field>(w: &AutWord<F>) -> String {
    let parts: Vec<String> = w
        .steps
        .iter()
        .map(|s| match s {
            AutStep::Torus { coords, .. } => {
                let t: Vec<String> = coords.iter().map(ToString::to_string).collect();
                format!("Torus t=({})", t.join(","))
            }
            AutStep::Flow { derivation, u } => format!("Flow {derivation} u={u}"),
            AutStep::Perm(p) => format!("Perm {:?}", p.0),
        })
        .collect();
    format!("[{}]", parts.join(", "))
}

// derivations

pub fn derivation_to_json<F: Field>(d: &Derivation<F>) -> Value {
    json!({
        "designator": d.designator(),
        "images": d.images().iter().map(|(v, p)| (v.to_string(), Value::String(p.to_string()))).collect::<Map<_, _>>(),
    })
}

/// Rebuilds from the designator and checks the stored images agree.
pub fn derivation_from_json<F: Field>(
    shape: &TrinomialShape,
    ctx: FieldCtx,
    v: &Value,
) -> Result<Derivation<F>, WireError> {
    let name = v
        .get("designator")
        .and_then(Value::as_str)
        .ok_or_else(|| malformed("derivation", "missing `designator`"))?;
    let d = derivation_by_name::<F>(shape, ctx, name)?;
    if let Some(images) = v.get("images").and_then(Value::as_object) {
        for (k, p) in images {
            let var: VarId = k.parse()?;
            let text = p.as_str().ok_or_else(|| malformed("derivation", p.to_string()))?;
            if Poly::<F>::parse(ctx, text)? != d.image(var) {
                return Err(malformed("derivation", format!("image of {var} disagrees with {name}")));
            }
        }
    }
    Ok(d)
}

// reports

pub fn family_to_json(f: &FamilyTag) -> Value {
    let roles = |r: &crate::lnd::Roles| {
        let names = |vs: &[VarId]| vs.iter().map(ToString::to_string).collect::<Vec<_>>();
        json!({ "x": names(&r.x), "y": names(&r.y), "z": names(&r.z), "s": names(&r.s) })
    };
    match f {
        FamilyTag::F1(l) | FamilyTag::F2(l) => json!({
            "name": if matches!(f, FamilyTag::F1(_)) { "F1" } else { "F2" },
            "k": l.k(), "m": l.m(), "p": l.p(), "q": l.q(), "d": l.d,
            "roles": roles(&l.roles),
        }),
        FamilyTag::FlexibleH(h) => json!({ "name": "FlexibleH", "htype": h.to_string() }),
        FamilyTag::RigidCase => json!({ "name": "RigidCase" }),
        FamilyTag::Other => json!({ "name": "Other" }),
    }
}

/// Classification summary of a shape.
pub fn classification_report(shape: &TrinomialShape) -> Result<Value, WireError> {
    let verdict = model::rigidity_classify(shape)?;
    let family = orbits::family_of(shape)?;
    let lattice = model::torus_lattice(shape);
    let fact = model::factoriality(shape);
    let names = |vs: &[VarId]| vs.iter().map(ToString::to_string).collect::<Vec<_>>();
    let ml = match orbits::ml_generators(shape)? {
        MlVerdict::Proven(v) => json!({ "status": "proven", "generators": names(&v) }),
        MlVerdict::Conjectural(v) => json!({ "status": "conjectural", "generators": names(&v) }),
        MlVerdict::WholeRing(v) => json!({ "status": "whole_ring", "generators": names(&v) }),
        MlVerdict::Constants => json!({ "status": "constants", "generators": [] }),
        MlVerdict::Unknown => json!({ "status": "unknown", "generators": [] }),
    };
    let witnesses: Vec<Value> = verdict
        .witnesses()
        .iter()
        .map(|w| match w {
            model::RigidityWitness::LinearVariable { group, index } => {
                json!({ "kind": "linear_variable", "var": VarId::new(*group, *index).to_string() })
            }
            model::RigidityWitness::EvenPair { i, a, j, b } => json!({
                "kind": "even_pair",
                "vars": [VarId::new(*i, *a).to_string(), VarId::new(*j, *b).to_string()],
            }),
        })
        .collect();
    let sym = model::symmetry_group(shape);
    Ok(json!({
        "shape": shape_to_json(shape),
        "equation": shape.equation::<crate::field::Rational>(FieldCtx::Rationals).to_string(),
        "verdict": verdict.label(),
        "witnesses": witnesses,
        "htypes": model::h_types(shape).iter().map(ToString::to_string).collect::<Vec<_>>(),
        "family": family_to_json(&family),
        "ml": ml,
        "torus_rank": lattice.rank,
        "torus_basis": lattice.basis,
        "factorial": fact.is_factorial,
        "symmetry_order": sym.order,
    }))
}

/// Names of a variable set as used in reports.
pub fn var_names(vars: &BTreeSet<VarId>) -> Vec<String> {
    vars.iter().map(ToString::to_string).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Fp, Rational};

    fn shape_a() -> TrinomialShape {
        TrinomialShape::new(&[1, 2], &[3], &[3]).unwrap()
    }

    #[test]
    fn points_in_both_forms() {
        let a = shape_a();
        let q = FieldCtx::Rationals;
        let none = BTreeMap::new();
        let arr: Vec<Rational> = parse_point(&a, q, &none, "[-2, 1, \"1\", 1]").unwrap();
        let obj: Vec<Rational> =
            parse_point(&a, q, &none, r#"{"T0_1":-2,"T0_2":1,"T1_1":1,"T2_1":"1"}"#).unwrap();
        assert_eq!(arr, obj);
        let aliases: BTreeMap<String, VarId> = [("x".to_string(), VarId::new(0, 1))].into();
        let dup = parse_point::<Rational>(&a, q, &aliases, r#"{"x":1,"T0_1":-2,"T0_2":1,"T1_1":1,"T2_1":1}"#);
        assert!(matches!(dup, Err(WireError::AmbiguousPoint(_))));
        assert!(parse_point::<Rational>(&a, q, &none, "[1,2]").is_err());
        assert_eq!(point_from_json::<Rational>(&a, q, &none, &point_to_json(&arr)).unwrap(), arr);
    }

    #[test]
    fn descriptors_round_trip() {
        let ctx = FieldCtx::PrimeField(7);
        let d = StratumDescriptor::OMeps { m: [1].into(), r: Fp::new(-1, 7) };
        let v = descriptor_to_json(&d);
        assert_eq!(v, json!({"type":"OMeps","M":[1],"r":"6"}));
        assert_eq!(descriptor_from_json::<Fp>(ctx, &v).unwrap(), d);
        let s = StratumDescriptor::<Fp>::SingTorus(VarSet::new([VarId::new(0, 1), VarId::new(1, 1)]));
        assert_eq!(descriptor_from_json::<Fp>(ctx, &descriptor_to_json(&s)).unwrap(), s);
    }

    #[test]
    fn words_and_counts_round_trip() {
        let ctx = FieldCtx::PrimeField(7);
        let w = AutWord {
            steps: vec![
                AutStep::Perm(VarPerm(vec![1, 0, 2, 3])),
                AutStep::Torus { lambda: vec![Fp::new(3, 7)], coords: vec![Fp::new(1, 7), Fp::new(3, 7)] },
                AutStep::Flow { derivation: "D:1".into(), u: Fp::new(3, 7) },
            ],
        };
        assert_eq!(word_from_json::<Fp>(ctx, &word_to_json(&w)).unwrap(), w);
        let d = TrinomialShape::new(&[1, 2, 2], &[3], &[3]).unwrap();
        let c = orbits::orbit_count(&d).unwrap();
        assert_eq!(count_from_json(&count_to_json(&c)).unwrap(), c);
    }

    #[test]
    fn derivations_round_trip() {
        let a = shape_a();
        let ctx = FieldCtx::Rationals;
        let d = derivation_by_name::<Rational>(&a, ctx, "D:1").unwrap();
        let back = derivation_from_json::<Rational>(&a, ctx, &derivation_to_json(&d)).unwrap();
        assert_eq!(back.images(), d.images());
    }

    #[test]
    fn report_of_shape_a() {
        let r = classification_report(&shape_a()).unwrap();
        assert_eq!(r["verdict"], "NonRigidOther");
        assert_eq!(r["family"]["name"], "F1");
        assert_eq!(r["ml"]["generators"], json!(["T0_2"]));
        assert_eq!(r["torus_rank"], 2);
        assert_eq!(shape_from_json(&r["shape"]).unwrap(), shape_a());
    }
}
