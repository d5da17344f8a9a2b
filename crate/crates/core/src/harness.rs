//! Finite-field oracles: exhaustive point enumeration and randomized checks of
//! the partition, invariance and transport claims.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::field::{DlogTable, Field, FieldCtx, FieldError, Fp};
use crate::lnd::{flow_by_name, lnd_catalog, FlowMap};
use crate::model::{self, TrinomialShape, VarPerm};
use crate::orbits::{self, FamilyTag, Flags, OrbitError, StratumDescriptor};
use crate::poly::VarId;
use crate::strata::{self, VarSet};

/// Largest `p^n` scanned by [`enumerate_points`].
pub const ENUMERATION_LIMIT: u128 = 100_000_000;

/// Largest `p^n` for which the randomized checks draw from a full point list.
pub const POOL_LIMIT: u128 = 2_000_000;

const MAX_LISTED_FAILURES: usize = 20;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HarnessError {
    #[error("{p}^{n} points exceed the enumeration limit")]
    TooLarge { p: u64, n: usize },
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Orbit(#[from] OrbitError),
    #[error("could not sample a point on the variety after {0} attempts")]
    SamplingFailed(usize),
}

fn prime_ctx(p: u64) -> Result<FieldCtx, HarnessError> {
    Ok(FieldCtx::prime(p)?)
}

fn space_size(p: u64, n: usize) -> u128 {
    (p as u128).saturating_pow(n as u32)
}

/// Variable solved for during enumeration.
fn solve_var(shape: &TrinomialShape) -> Option<VarId> {
    shape.linear_vars().into_iter().next()
}

/// All points of `X(F_p)` in lexicographic order of their coordinate values.
pub fn enumerate_points(shape: &TrinomialShape, p: u64) -> Result<Vec<Vec<Fp>>, HarnessError> {
    let n = shape.n();
    if space_size(p, n) > ENUMERATION_LIMIT {
        return Err(HarnessError::TooLarge { p, n });
    }
    prime_ctx(p)?;
    let solved = solve_var(shape).map(|v| shape.position(v));
    let free: Vec<usize> = (0..n).filter(|&i| Some(i) != solved).collect();
    let total = space_size(p, free.len()) as u64;
    let g = shape.equation::<Fp>(FieldCtx::PrimeField(p));
    let mut points: Vec<Vec<Fp>> = (0..total)
        .into_par_iter()
        .flat_map_iter(|code| {
            let mut pt = vec![Fp::new(0, p); n];
            let mut c = code;
            for &i in free.iter().rev() {
                pt[i] = Fp::new((c % p) as i64, p);
                c /= p;
            }
            let eval = |pt: &[Fp]| {
                g.eval_with(|v| Some(pt[shape.position(v)].clone()))
                    .expect("point covers every variable")
            };
            let out: Vec<Vec<Fp>> = match solved {
                None => {
                    if eval(&pt).is_zero() {
                        vec![pt]
                    } else {
                        Vec::new()
                    }
                }
                Some(xi) => {
                    // g = x·M + R with M, R free of x
                    let r = eval(&pt);
                    pt[xi] = Fp::new(1, p);
                    let m = eval(&pt) - r.clone();
                    match (-r.clone()).div(&m) {
                        Ok(x) => {
                            pt[xi] = x;
                            vec![pt]
                        }
                        Err(_) if r.is_zero() => (0..p)
                            .map(|x| {
                                let mut q = pt.clone();
                                q[xi] = Fp::new(x as i64, p);
                                q
                            })
                            .collect(),
                        Err(_) => Vec::new(),
                    }
                }
            };
            out.into_iter()
        })
        .collect();
    points.sort();
    Ok(points)
}

/// A random point of `X(F_p)`. Each coordinate is first set to zero with
/// probability `zero_bias`, then one variable is solved for.
pub fn sample_point<R: Rng>(
    shape: &TrinomialShape,
    p: u64,
    zero_bias: f64,
    rng: &mut R,
) -> Result<Vec<Fp>, HarnessError> {
    const ATTEMPTS: usize = 10_000;
    let n = shape.n();
    let ctx = FieldCtx::PrimeField(p);
    let g = shape.equation::<Fp>(ctx);
    let vars = shape.vars();
    for _ in 0..ATTEMPTS {
        let mut pt: Vec<Fp> = (0..n)
            .map(|_| {
                if rng.gen_bool(zero_bias) {
                    Fp::new(0, p)
                } else {
                    Fp::new(rng.gen_range(1..p) as i64, p)
                }
            })
            .collect();
        let v = *vars.choose(rng).expect("shape has variables");
        let i = shape.position(v);
        let eval = |pt: &[Fp]| {
            g.eval_with(|w| Some(pt[shape.position(w)].clone()))
                .expect("point covers every variable")
        };
        // g = v^e·M + R
        pt[i] = Fp::new(0, p);
        let r = eval(&pt);
        pt[i] = Fp::new(1, p);
        let m = eval(&pt) - r.clone();
        if let Ok(target) = (-r.clone()).div(&m) {
            let roots = target.kth_roots(shape.exponent(v));
            if let Some(root) = roots.choose(rng) {
                pt[i] = root.clone();
                return Ok(pt);
            }
        } else if r.is_zero() {
            pt[i] = Fp::new(rng.gen_range(0..p) as i64, p);
            return Ok(pt);
        }
    }
    Err(HarnessError::SamplingFailed(ATTEMPTS))
}

/// Point source for randomized checks: the full list when small enough,
/// otherwise the zero-biased sampler.
enum Pool {
    Listed {
        points: Vec<Vec<Fp>>,
        /// Indices grouped by vanishing set, so small strata are hit.
        by_support: Vec<Vec<usize>>,
    },
    Sampled,
}

impl Pool {
    fn new(shape: &TrinomialShape, p: u64) -> Result<Self, HarnessError> {
        if space_size(p, shape.n()) > POOL_LIMIT {
            return Ok(Pool::Sampled);
        }
        let points = enumerate_points(shape, p)?;
        let mut groups: BTreeMap<VarSet, Vec<usize>> = BTreeMap::new();
        for (i, pt) in points.iter().enumerate() {
            let s = strata::support_zero_set(shape, pt).expect("enumerated points have the right length");
            groups.entry(s).or_default().push(i);
        }
        Ok(Pool::Listed {
            points,
            by_support: groups.into_values().collect(),
        })
    }

    fn draw<R: Rng>(&self, shape: &TrinomialShape, p: u64, rng: &mut R) -> Result<Vec<Fp>, HarnessError> {
        match self {
            Pool::Listed { points, by_support } => {
                let bucket = by_support.choose(rng).expect("variety has points");
                Ok(points[*bucket.choose(rng).expect("buckets are nonempty")].clone())
            }
            Pool::Sampled => sample_point(shape, p, 0.25, rng),
        }
    }

    fn listed(&self) -> Option<&[Vec<Fp>]> {
        match self {
            Pool::Listed { points, .. } => Some(points),
            Pool::Sampled => None,
        }
    }
}

// ---------------------------------------------------------------------------
// Reports

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Totals {
    pub points: u64,
    pub strata_realized: u64,
    pub failures: u64,
    pub expected_negatives: u64,
    pub skipped: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerifyReport {
    pub check: String,
    pub shape: Vec<Vec<i64>>,
    pub field: String,
    pub seed: u64,
    pub trials: u64,
    pub totals: Totals,
    /// Points per descriptor type.
    pub counts: BTreeMap<String, u64>,
    /// Points per full descriptor.
    pub classes: BTreeMap<String, u64>,
    pub verdicts: Vec<Verdict>,
    pub failures: Vec<String>,
    pub notes: Vec<String>,
}

impl VerifyReport {
    fn new(check: &str, shape: &TrinomialShape, p: u64, seed: u64, trials: u64) -> Self {
        VerifyReport {
            check: check.to_string(),
            shape: shape.raw(),
            field: FieldCtx::PrimeField(p).to_string(),
            seed,
            trials,
            totals: Totals::default(),
            counts: BTreeMap::new(),
            classes: BTreeMap::new(),
            verdicts: Vec::new(),
            failures: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.totals.failures == 0 && self.verdicts.iter().all(|v| v.passed)
    }

    fn fail(&mut self, msg: String) {
        self.totals.failures += 1;
        if self.failures.len() < MAX_LISTED_FAILURES {
            self.failures.push(msg);
        }
    }

    fn verdict(&mut self, name: &str, passed: bool, detail: String) {
        self.verdicts.push(Verdict {
            name: name.to_string(),
            passed,
            detail,
        });
    }

    /// Concatenation of several reports on the same shape and field.
    pub fn combine(check: &str, parts: Vec<VerifyReport>) -> VerifyReport {
        let first = parts.first().expect("at least one report");
        let mut out = VerifyReport {
            check: check.to_string(),
            shape: first.shape.clone(),
            field: first.field.clone(),
            seed: first.seed,
            trials: first.trials,
            totals: Totals::default(),
            counts: BTreeMap::new(),
            classes: BTreeMap::new(),
            verdicts: Vec::new(),
            failures: Vec::new(),
            notes: Vec::new(),
        };
        for r in parts {
            out.totals.points = out.totals.points.max(r.totals.points);
            out.totals.strata_realized = out.totals.strata_realized.max(r.totals.strata_realized);
            out.totals.failures += r.totals.failures;
            out.totals.expected_negatives += r.totals.expected_negatives;
            out.totals.skipped += r.totals.skipped;
            if out.counts.is_empty() {
                out.counts = r.counts;
                out.classes = r.classes;
            }
            let tag = |s: String| format!("{}: {s}", r.check);
            out.verdicts.extend(r.verdicts.into_iter().map(|mut v| {
                v.name = format!("{}.{}", r.check, v.name);
                v
            }));
            out.failures.extend(r.failures.into_iter().map(tag));
            out.notes.extend(r.notes.into_iter().map(tag));
        }
        out.failures.truncate(MAX_LISTED_FAILURES);
        out
    }
}

/// Descriptor key of a point; `Err` when the classifier does not apply.
pub type Classifier<'a> = dyn Fn(&[Fp]) -> Result<String, OrbitError> + Sync + 'a;

/// The descriptor the library assigns, rendered with its component label.
pub fn descriptor_key(shape: &TrinomialShape, flags: Flags) -> Result<impl Fn(&[Fp]) -> Result<String, OrbitError> + Sync + '_, OrbitError> {
    let family = orbits::family_of(shape)?;
    Ok(move |pt: &[Fp]| orbits::classify_with(shape, &family, pt, flags).map(|d| d.to_string()))
}

fn type_key(shape: &TrinomialShape, family: &FamilyTag, pt: &[Fp], flags: Flags) -> Result<StratumDescriptor<Fp>, OrbitError> {
    orbits::classify_with(shape, family, pt, flags)
}

// ---------------------------------------------------------------------------
// Partition

pub fn verify_partition(shape: &TrinomialShape, p: u64, flags: Flags) -> Result<VerifyReport, HarnessError> {
    let mut report = VerifyReport::new("partition", shape, p, 0, 0);
    let points = enumerate_points(shape, p)?;
    let family = orbits::family_of(shape).map_err(OrbitError::from)?;
    report.totals.points = points.len() as u64;
    let supports: BTreeSet<VarSet> = points
        .iter()
        .map(|pt| strata::support_zero_set(shape, pt).expect("length checked"))
        .collect();
    report.totals.strata_realized = supports.len() as u64;
    let classified: Vec<Result<StratumDescriptor<Fp>, OrbitError>> =
        points.par_iter().map(|pt| type_key(shape, &family, pt, flags)).collect();
    let mut components: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for (pt, d) in points.iter().zip(&classified) {
        match d {
            Ok(d) => {
                *report.counts.entry(d.type_name().to_string()).or_default() += 1;
                *report.classes.entry(d.to_string()).or_default() += 1;
                if let StratumDescriptor::OMeps { m, r } = d {
                    let key: Vec<String> = m.iter().map(ToString::to_string).collect();
                    components.entry(key.join(",")).or_default().insert(r.to_string());
                }
            }
            Err(e) => report.fail(format!("{}: {e}", crate::wire::point_to_json(pt))),
        }
    }
    let classified_total: u64 = report.counts.values().sum();
    report.verdict(
        "cover",
        classified_total == report.totals.points,
        format!("{classified_total} of {} points classified exactly once", report.totals.points),
    );
    let singular = points
        .par_iter()
        .filter(|pt| strata::is_singular(shape, pt).unwrap_or(false))
        .count();
    let combinatorial = points
        .iter()
        .filter(|pt| strata::is_singular_stratum(shape, &strata::support_zero_set(shape, pt).expect("length checked")))
        .count();
    report.notes.push(format!(
        "singular points: {singular} by the Jacobian test, {combinatorial} by the vanishing-set test"
    ));
    if shape.has_free_term() {
        report.verdict(
            "free_term_smooth",
            singular == 0 || p <= shape.groups().iter().flatten().copied().max().unwrap_or(1) as u64,
            format!("{singular} Jacobian-singular points"),
        );
    }
    if let FamilyTag::F1(fam) = &family {
        let allowed: BTreeSet<String> = orbits::descriptor_classes(fam).iter().map(ToString::to_string).collect();
        let unknown: Vec<String> = classified
            .iter()
            .flatten()
            .filter_map(|d| d.class())
            .map(|c| c.to_string())
            .filter(|c| !allowed.contains(c))
            .collect();
        report.verdict(
            "classes_listed",
            unknown.is_empty(),
            format!("{} points outside the listed classes", unknown.len()),
        );
        let d = fam.d as u64;
        if (p - 1) % (2 * d) == 0 {
            let bad: Vec<String> = components
                .iter()
                .filter(|(_, rs)| rs.len() as u64 != d)
                .map(|(m, rs)| format!("M={{{m}}}: {} components", rs.len()))
                .collect();
            report.verdict(
                "omeps_components",
                bad.is_empty(),
                if bad.is_empty() {
                    format!("every realized M has {d} components")
                } else {
                    bad.join("; ")
                },
            );
        }
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// Invariance

/// One generator of the automorphism group used by the checks.
#[derive(Debug, Clone)]
pub enum Generator {
    Torus,
    Flow(String),
    Perm(VarPerm),
}

/// Generators with their flows precomputed over `F_p`.
pub struct GeneratorSet {
    pub flows: Vec<(String, FlowMap<Fp>)>,
    pub lattice: model::LatticeBasis,
    pub perms: Vec<VarPerm>,
    /// Catalog entries whose flow does not exist over this field, with reasons.
    pub skipped: Vec<(String, String)>,
}

impl GeneratorSet {
    pub fn new(shape: &TrinomialShape, p: u64) -> Self {
        let ctx = FieldCtx::PrimeField(p);
        let catalog = lnd_catalog::<Fp>(shape, ctx);
        let mut flows = Vec::new();
        let mut skipped: Vec<(String, String)> = catalog.omitted.clone();
        for d in &catalog.derivations {
            let name = d.designator();
            match flow_by_name::<Fp>(shape, ctx, &name) {
                Ok(f) => flows.push((name, f)),
                Err(e) => skipped.push((name, e.to_string())),
            }
        }
        let perms = model::symmetry_generators(shape)
            .into_iter()
            .filter(|s| !s.is_identity())
            .collect();
        GeneratorSet {
            flows,
            lattice: model::torus_lattice(shape),
            perms,
            skipped,
        }
    }

    fn list(&self) -> Vec<Generator> {
        let mut out = vec![Generator::Torus];
        out.extend(self.flows.iter().map(|(n, _)| Generator::Flow(n.clone())));
        out.extend(self.perms.iter().cloned().map(Generator::Perm));
        out
    }

    fn flow(&self, name: &str) -> &FlowMap<Fp> {
        &self.flows.iter().find(|(n, _)| n == name).expect("generator listed").1
    }

    fn torus_point(&self, shape: &TrinomialShape, p: u64, lambda: &[Fp], pt: &[Fp]) -> Vec<Fp> {
        let t = self.lattice.torus_element(FieldCtx::PrimeField(p), shape.n(), lambda);
        pt.iter().zip(t).map(|(a, b)| a.clone() * b).collect()
    }

    /// True when every torus element and every flow fixes `pt`.
    fn fixes(&self, shape: &TrinomialShape, p: u64, pt: &[Fp]) -> bool {
        let torus_fixed = (0..shape.n()).all(|i| pt[i].is_zero() || self.lattice.basis.iter().all(|b| b[i] == 0));
        let one = Fp::new(1, p);
        torus_fixed
            && self
                .flows
                .iter()
                .all(|(_, f)| f.apply(shape, &one, pt).map(|q| q == pt).unwrap_or(false))
    }
}

/// Glued class of a point for the single-linear-variable family, or the
/// plain key for other families.
fn glued_key(listing: &Option<Vec<Vec<orbits::DescriptorClass>>>, d: &StratumDescriptor<Fp>) -> String {
    if let (Some(listing), Some(c)) = (listing, d.class()) {
        if let Some(i) = listing.iter().position(|orbit| orbit.contains(&c)) {
            return format!("orbit#{i}");
        }
    }
    d.to_string()
}

#[derive(Debug)]
enum Trial {
    Torus(Vec<Fp>),
    Flow(String, Fp),
    Perm(VarPerm),
}

/// Randomized invariance of the library's descriptors.
pub fn verify_invariance(
    shape: &TrinomialShape,
    p: u64,
    trials: u64,
    seed: u64,
    flags: Flags,
) -> Result<VerifyReport, HarnessError> {
    let key = descriptor_key(shape, flags)?;
    verify_invariance_with(shape, p, trials, seed, flags, &key)
}

/// Randomized invariance of an arbitrary classifier: sampled (point,
/// generator, parameter) triples must preserve the key, singular points must
/// keep their containing components, and a class holding a point fixed by
/// every generator must hold nothing else.
pub fn verify_invariance_with(
    shape: &TrinomialShape,
    p: u64,
    trials: u64,
    seed: u64,
    flags: Flags,
    classify: &Classifier<'_>,
) -> Result<VerifyReport, HarnessError> {
    let mut report = VerifyReport::new("invariance", shape, p, seed, trials);
    let ctx = prime_ctx(p)?;
    let gens = GeneratorSet::new(shape, p);
    for (name, why) in &gens.skipped {
        report.totals.skipped += 1;
        report.notes.push(format!("generator {name} skipped: {why}"));
    }
    let pool = Pool::new(shape, p)?;
    let family = orbits::family_of(shape).map_err(OrbitError::from)?;
    let listing = orbits::orbit_count(shape).ok().map(|c| c.listing);
    let list = gens.list();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut jobs = Vec::with_capacity(trials as usize);
    for _ in 0..trials {
        let pt = pool.draw(shape, p, &mut rng)?;
        let g = list.choose(&mut rng).expect("torus is always present").clone();
        let trial = match g {
            Generator::Torus => Trial::Torus(
                (0..gens.lattice.rank)
                    .map(|_| Fp::new(rng.gen_range(1..p) as i64, p))
                    .collect(),
            ),
            Generator::Flow(n) => Trial::Flow(n, Fp::new(rng.gen_range(0..p) as i64, p)),
            Generator::Perm(s) => Trial::Perm(s),
        };
        jobs.push((pt, trial));
    }
    let outcomes: Vec<Result<Option<String>, String>> = jobs
        .par_iter()
        .map(|(pt, trial)| {
            check_trial(shape, p, ctx, &gens, &family, &listing, flags, classify, pt, trial)
        })
        .collect();
    for o in outcomes {
        match o {
            Ok(None) => {}
            Ok(Some(skip)) => {
                report.totals.skipped += 1;
                if report.notes.len() < MAX_LISTED_FAILURES {
                    report.notes.push(skip);
                }
            }
            Err(msg) => report.fail(msg),
        }
    }
    report.verdict(
        "generators_preserve_descriptors",
        report.totals.failures == 0,
        format!("{} trials over {} generators", trials, list.len()),
    );
    if let Some(points) = pool.listed() {
        report.totals.points = points.len() as u64;
        fixed_point_check(shape, p, &gens, points, classify, &mut report);
    } else {
        report.notes.push("fixed-point check needs the full point list; skipped".into());
    }
    Ok(report)
}

#[allow(clippy::too_many_arguments)]
fn check_trial(
    shape: &TrinomialShape,
    p: u64,
    ctx: FieldCtx,
    gens: &GeneratorSet,
    family: &FamilyTag,
    listing: &Option<Vec<Vec<orbits::DescriptorClass>>>,
    flags: Flags,
    classify: &Classifier<'_>,
    pt: &[Fp],
    trial: &Trial,
) -> Result<Option<String>, String> {
    let image = match trial {
        Trial::Torus(l) => gens.torus_point(shape, p, l, pt),
        Trial::Flow(n, u) => gens.flow(n).apply(shape, u, pt).map_err(|e| e.to_string())?,
        Trial::Perm(s) => s.apply_point(pt),
    };
    let label = || format!("{:?} at {}", trial, crate::wire::point_to_json(pt));
    if !strata::on_variety(shape, &image).map_err(|e| e.to_string())? {
        return Err(format!("{} leaves the variety", label()));
    }
    if let Trial::Perm(_) = trial {
        // permutations preserve the glued class only
        let d0 = orbits::classify_with(shape, family, pt, flags);
        let d1 = orbits::classify_with(shape, family, &image, flags);
        return match (d0, d1) {
            (Ok(a), Ok(b)) => {
                if glued_key(listing, &a) == glued_key(listing, &b) || listing.is_none() {
                    Ok(None)
                } else {
                    Err(format!("{}: glued class {a} ↦ {b}", label()))
                }
            }
            (Err(e), _) | (_, Err(e)) => Ok(Some(format!("{}: {e}", label()))),
        };
    }
    let (k0, k1) = match (classify(pt), classify(&image)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return Ok(Some(format!("{}: {e}", label()))),
    };
    if k0 != k1 {
        return Err(format!("{}: descriptor {k0} ↦ {k1}", label()));
    }
    let s0 = strata::support_zero_set(shape, pt).map_err(|e| e.to_string())?;
    if strata::is_singular_stratum(shape, &s0) {
        let s1 = strata::support_zero_set(shape, &image).map_err(|e| e.to_string())?;
        let n0 = strata::containing_components::<Fp>(shape, ctx, &s0).map_err(|e| e.to_string())?;
        let n1 = strata::containing_components::<Fp>(shape, ctx, &s1).map_err(|e| e.to_string())?;
        if n0 != n1 {
            return Err(format!("{}: containing components change ({s0} ↦ {s1})", label()));
        }
    }
    Ok(None)
}

fn fixed_point_check(
    shape: &TrinomialShape,
    p: u64,
    gens: &GeneratorSet,
    points: &[Vec<Fp>],
    classify: &Classifier<'_>,
    report: &mut VerifyReport,
) {
    let mut members: BTreeMap<String, (u64, Vec<usize>)> = BTreeMap::new();
    for (i, pt) in points.iter().enumerate() {
        if let Ok(k) = classify(pt) {
            let e = members.entry(k).or_default();
            e.0 += 1;
            if gens.fixes(shape, p, pt) {
                e.1.push(i);
            }
        }
    }
    let bad: Vec<String> = members
        .iter()
        .filter(|(_, (size, fixed))| !fixed.is_empty() && *size > 1)
        .map(|(k, (size, fixed))| format!("{k}: {size} points, {} fixed by every generator", fixed.len()))
        .collect();
    for b in &bad {
        report.fail(format!("class mixes fixed and moved points: {b}"));
    }
    report.verdict(
        "fixed_points_isolated",
        bad.is_empty(),
        format!("{} classes checked", members.len()),
    );
}

/// Every point against a generating set of the torus and every flow at
/// every parameter. Feasible for tiny fields.
pub fn verify_invariance_exhaustive(
    shape: &TrinomialShape,
    p: u64,
    flags: Flags,
) -> Result<VerifyReport, HarnessError> {
    let key = descriptor_key(shape, flags)?;
    let ctx = prime_ctx(p)?;
    let mut report = VerifyReport::new("invariance_exhaustive", shape, p, 0, 0);
    let gens = GeneratorSet::new(shape, p);
    for (name, why) in &gens.skipped {
        report.totals.skipped += 1;
        report.notes.push(format!("generator {name} skipped: {why}"));
    }
    let points = enumerate_points(shape, p)?;
    report.totals.points = points.len() as u64;
    let family = orbits::family_of(shape).map_err(OrbitError::from)?;
    let listing = orbits::orbit_count(shape).ok().map(|c| c.listing);
    // the torus is generated by t(g e_k) for a primitive root g
    let g = DlogTable::new(p).generator();
    let r = gens.lattice.rank;
    let mut trials: Vec<Trial> = (0..r)
        .map(|k| {
            Trial::Torus(
                (0..r)
                    .map(|j| if j == k { g.clone() } else { Fp::new(1, p) })
                    .collect(),
            )
        })
        .collect();
    for (n, _) in &gens.flows {
        for u in 1..p {
            trials.push(Trial::Flow(n.clone(), Fp::new(u as i64, p)));
        }
    }
    trials.extend(gens.perms.iter().cloned().map(Trial::Perm));
    let outcomes: Vec<Result<Option<String>, String>> = points
        .par_iter()
        .flat_map_iter(|pt| {
            trials
                .iter()
                .map(|t| check_trial(shape, p, ctx, &gens, &family, &listing, flags, &key, pt, t))
                .collect::<Vec<_>>()
        })
        .collect();
    report.trials = outcomes.len() as u64;
    for o in outcomes {
        match o {
            Ok(None) => {}
            Ok(Some(_)) => report.totals.skipped += 1,
            Err(m) => report.fail(m),
        }
    }
    report.verdict(
        "generators_preserve_descriptors",
        report.totals.failures == 0,
        format!("{} points × {} generator instances", points.len(), trials.len()),
    );
    fixed_point_check(shape, p, &gens, &points, &key, &mut report);
    Ok(report)
}

// ---------------------------------------------------------------------------
// Transport

/// Transport between sampled same-descriptor pairs in the open and `O(M)`
/// strata, plus pairs in different components which must be refused.
pub fn verify_transport(shape: &TrinomialShape, p: u64, trials: u64, seed: u64) -> Result<VerifyReport, HarnessError> {
    let mut report = VerifyReport::new("transport", shape, p, seed, trials);
    let family = orbits::family_of(shape).map_err(OrbitError::from)?;
    let FamilyTag::F1(fam) = &family else {
        return Err(OrbitError::UnsupportedFamily(format!(
            "transport needs a unique exponent-1 variable, found {}",
            family.name()
        ))
        .into());
    };
    if (p - 1) % (2 * fam.d as u64) != 0 {
        report
            .notes
            .push(format!("p ≢ 1 mod {}: some torus roots may be unavailable", 2 * fam.d));
    }
    let pool = Pool::new(shape, p)?;
    let flags = Flags::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buckets: BTreeMap<String, Vec<Vec<Fp>>> = BTreeMap::new();
    let mut open_strata: Vec<String> = Vec::new();
    let draws = (trials as usize * 20).max(400);
    for _ in 0..draws {
        let pt = pool.draw(shape, p, &mut rng)?;
        let d = orbits::classify_with(shape, &family, &pt, flags)?;
        if matches!(d, StratumDescriptor::BigO | StratumDescriptor::OMeps { .. }) {
            let k = d.to_string();
            if !buckets.contains_key(&k) {
                open_strata.push(k.clone());
            }
            let b = buckets.entry(k).or_default();
            if !b.contains(&pt) {
                b.push(pt);
            }
        }
    }
    let usable: Vec<&String> = open_strata.iter().filter(|k| buckets[*k].len() >= 2).collect();
    if usable.is_empty() {
        report.verdict("pairs_found", false, "no stratum with two sampled points".into());
        return Ok(report);
    }
    let mut jobs: Vec<(Vec<Fp>, Vec<Fp>, bool)> = Vec::new();
    for i in 0..trials {
        let k = usable[i as usize % usable.len()];
        let b = &buckets[k];
        let a = rng.gen_range(0..b.len());
        let mut c = rng.gen_range(0..b.len() - 1);
        if c >= a {
            c += 1;
        }
        jobs.push((b[a].clone(), b[c].clone(), true));
    }
    // different components of the same O(M)
    let omeps: Vec<&String> = usable.iter().copied().filter(|k| k.contains("r=")).collect();
    for a in &omeps {
        for b in &omeps {
            let same_m = a.split(", r=").next() == b.split(", r=").next();
            if a < b && same_m {
                jobs.push((buckets[*a][0].clone(), buckets[*b][0].clone(), false));
            }
        }
    }
    let outcomes: Vec<Result<bool, String>> = jobs
        .par_iter()
        .map(|(src, dst, same)| {
            let label = || format!("{} → {}", crate::wire::point_to_json(src), crate::wire::point_to_json(dst));
            match (orbits::transport(shape, src, dst), same) {
                (Ok(w), true) => {
                    let img = w.apply(shape, src).map_err(|e| format!("{}: {e}", label()))?;
                    if img != *dst {
                        return Err(format!("{}: word lands at {}", label(), crate::wire::point_to_json(&img)));
                    }
                    if !w.torus_steps_valid(shape) {
                        return Err(format!("{}: torus step outside the stabilizer", label()));
                    }
                    Ok(false)
                }
                (Err(OrbitError::DifferentOrbits { .. }), false) => Ok(true),
                (Ok(_), false) => Err(format!("{}: points in different components were joined", label())),
                (Err(e), _) => Err(format!("{}: {e}", label())),
            }
        })
        .collect();
    let pairs = jobs.iter().filter(|j| j.2).count();
    for o in outcomes {
        match o {
            Ok(true) => report.totals.expected_negatives += 1,
            Ok(false) => {}
            Err(m) => report.fail(m),
        }
    }
    for k in &usable {
        *report.counts.entry((*k).clone()).or_default() += buckets[*k].len() as u64;
    }
    report.verdict(
        "words_reach_targets",
        report.totals.failures == 0,
        format!(
            "{pairs} same-descriptor pairs over {} strata, {} cross-component refusals",
            usable.len(),
            report.totals.expected_negatives
        ),
    );
    Ok(report)
}

/// Partition, randomized invariance and, for the single-linear-variable
/// family, transport.
pub fn verify_all(
    shape: &TrinomialShape,
    p: u64,
    trials: u64,
    seed: u64,
    flags: Flags,
) -> Result<VerifyReport, HarnessError> {
    let mut parts = vec![
        verify_partition(shape, p, flags)?,
        verify_invariance(shape, p, trials, seed, flags)?,
    ];
    if matches!(orbits::family_of(shape).map_err(OrbitError::from)?, FamilyTag::F1(_)) {
        parts.push(verify_transport(shape, p, trials.min(200), seed)?);
    }
    let mut r = VerifyReport::combine("all", parts);
    r.seed = seed;
    r.trials = trials;
    Ok(r)
}

// ---------------------------------------------------------------------------
// Planted errors, for testing that the checks can fail

/// Classifiers with deliberate mistakes.
pub mod planted {
    use super::*;

    /// Ignores whether `x` vanishes, merging the two classes that differ only there.
    pub fn merge_by_x(shape: &TrinomialShape) -> impl Fn(&[Fp]) -> Result<String, OrbitError> + Sync + '_ {
        move |pt: &[Fp]| {
            let d = orbits::classify_point(shape, pt, Flags::default())?;
            Ok(match d {
                StratumDescriptor::O1 { m, p, q } | StratumDescriptor::O2 { m, p, q } => {
                    StratumDescriptor::<Fp>::O1 { m, p, q }.to_string()
                }
                other => other.to_string(),
            })
        }
    }

    /// Splits the open stratum by whether `x` vanishes.
    pub fn split_open_by_x(shape: &TrinomialShape) -> impl Fn(&[Fp]) -> Result<String, OrbitError> + Sync + '_ {
        move |pt: &[Fp]| {
            let d = orbits::classify_point(shape, pt, Flags::default())?;
            let roles = crate::lnd::Roles::of(shape).expect("single linear variable");
            let x = &pt[shape.position(roles.x[0])];
            Ok(match d {
                StratumDescriptor::BigO if x.is_zero() => "O[x=0]".to_string(),
                other => other.to_string(),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(g: &[&[u32]]) -> TrinomialShape {
        TrinomialShape::new(g[0], g[1], g[2]).unwrap()
    }

    #[test]
    fn point_counts() {
        let b = shape(&[&[2], &[3], &[3]]);
        let a = shape(&[&[1, 2], &[3], &[3]]);
        assert_eq!(enumerate_points(&b, 2).unwrap().len(), 4);
        assert_eq!(enumerate_points(&a, 2).unwrap().len(), 8);
        let pts = enumerate_points(&a, 3).unwrap();
        assert_eq!(pts.len(), 27);
        assert!(pts.windows(2).all(|w| w[0] < w[1]));
        assert!(matches!(enumerate_points(&a, 101), Err(HarnessError::TooLarge { .. })));
    }

    #[test]
    fn enumeration_matches_brute_force() {
        let d = shape(&[&[1, 2, 2], &[3], &[3]]);
        let pts = enumerate_points(&d, 5).unwrap();
        let mut brute = Vec::new();
        for code in 0..5u64.pow(5) {
            let pt: Vec<Fp> = (0..5).map(|i| Fp::new((code / 5u64.pow(4 - i) % 5) as i64, 5)).collect();
            if strata::on_variety(&d, &pt).unwrap() {
                brute.push(pt);
            }
        }
        assert_eq!(pts, brute);
    }

    #[test]
    fn sampler_lands_on_variety() {
        let d = shape(&[&[1, 2, 2], &[3], &[3]]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let pt = sample_point(&d, 101, 0.3, &mut rng).unwrap();
            assert!(strata::on_variety(&d, &pt).unwrap());
        }
    }

    #[test]
    fn partition_of_shape_a() {
        let a = shape(&[&[1, 2], &[3], &[3]]);
        let r = verify_partition(&a, 3, Flags::default()).unwrap();
        assert!(r.passed(), "{r:?}");
        let expect: BTreeMap<String, u64> =
            [("BigO", 18), ("OMeps", 6), ("O1", 2), ("O2", 1)].map(|(k, v)| (k.to_string(), v)).into();
        assert_eq!(r.counts, expect);
        let r7 = verify_partition(&a, 7, Flags::default()).unwrap();
        assert!(r7.verdicts.iter().any(|v| v.name == "omeps_components" && v.passed));
    }

    #[test]
    fn reports_are_deterministic() {
        let a = shape(&[&[1, 2], &[3], &[3]]);
        let r1 = verify_invariance(&a, 7, 100, 9, Flags::default()).unwrap();
        let r2 = verify_invariance(&a, 7, 100, 9, Flags::default()).unwrap();
        assert_eq!(r1, r2);
        assert!(r1.passed(), "{r1:?}");
    }

    #[test]
    fn planted_errors_are_caught() {
        let a = shape(&[&[1, 2], &[3], &[3]]);
        let merged = planted::merge_by_x(&a);
        let r = verify_invariance_with(&a, 7, 200, 0, Flags::default(), &merged).unwrap();
        assert!(!r.passed());
        let split = planted::split_open_by_x(&a);
        let r = verify_invariance_with(&a, 7, 300, 0, Flags::default(), &split).unwrap();
        assert!(!r.passed());
    }

    #[test]
    fn transport_on_shape_a() {
        let a = shape(&[&[1, 2], &[3], &[3]]);
        let r = verify_transport(&a, 7, 30, 3).unwrap();
        assert!(r.passed(), "{r:?}");
        assert!(r.totals.expected_negatives > 0);
    }
}
