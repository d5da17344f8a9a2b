//! Command-line front end. [`run_cli`] parses arguments, runs one command and
//! returns the exit code together with what would be printed.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use trinomial::field::{Field, FieldCtx, FieldError, Fp, Rational};
use trinomial::harness::{self, HarnessError, VerifyReport};
use trinomial::lnd::{self, LndError, DEFAULT_NILPOTENCY_CAP};
use trinomial::model::{ShapeError, ShapeFile, TrinomialShape};
use trinomial::orbits::{self, Flags, OrbitError};
use trinomial::poly::VarId;
use trinomial::strata::{self, StrataError};
use trinomial::wire::{self, WireError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DOMAIN: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "trinomial", version, about = "Classification, derivations and orbits of trinomial hypersurfaces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Print JSON instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Allow orbit descriptions that rest on the kernel conjecture.
    #[arg(long, global = true)]
    pub assume_conjecture: bool,
}

#[derive(Args, Debug, Clone)]
pub struct ShapeArg {
    /// Shape file, or inline JSON such as '{"groups":[[1,2],[3],[3]]}'.
    #[arg(long)]
    pub shape: String,
    /// `Q` or `Fp:<prime>`.
    #[arg(long, default_value = "Q")]
    pub field: String,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Rigidity verdict, family, Makar-Limanov invariant and torus data.
    Classify(ShapeArg),
    /// Classification, derivations, singular strata and orbit counts together.
    Report(ShapeArg),
    /// Locally nilpotent derivations.
    Lnd {
        #[command(subcommand)]
        action: LndAction,
    },
    /// Singular components, singular strata and linked classes.
    Strata(ShapeArg),
    /// Orbit descriptors, counts, special-automorphism descriptors and transport.
    Orbits {
        #[command(subcommand)]
        action: OrbitsAction,
    },
    /// Every point over a prime field.
    Enumerate(ShapeArg),
    /// Brute-force verification over a prime field.
    Verify {
        #[arg(value_enum)]
        check: VerifyKind,
        #[command(flatten)]
        shape: ShapeArg,
        #[arg(long, default_value_t = 200)]
        trials: u64,
    },
}

#[derive(Subcommand, Debug)]
pub enum LndAction {
    List(ShapeArg),
    Check {
        #[command(flatten)]
        shape: ShapeArg,
        /// Designator such as `D:1`, `gamma:1,1/0,1` or `delta+:2,1`.
        #[arg(long)]
        derivation: String,
    },
}

#[derive(Subcommand, Debug)]
pub enum OrbitsAction {
    Classify {
        #[command(flatten)]
        shape: ShapeArg,
        #[arg(long)]
        point: String,
    },
    Count(ShapeArg),
    Transport {
        #[command(flatten)]
        shape: ShapeArg,
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
        /// Also try the symmetries of the equation.
        #[arg(long)]
        glued: bool,
    },
    Saut {
        #[command(flatten)]
        shape: ShapeArg,
        #[arg(long)]
        point: String,
    },
}

#[derive(ValueEnum, Debug, Clone, Copy)]
pub enum VerifyKind {
    Partition,
    Invariance,
    Exhaustive,
    Transport,
    All,
}

/// Result of one invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

#[derive(Debug)]
struct CliError {
    code: i32,
    kind: String,
    detail: String,
}

impl CliError {
    fn usage(detail: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            kind: "usage".into(),
            detail: detail.into(),
        }
    }
}

fn orbit_error(e: OrbitError) -> CliError {
    let (code, kind) = match &e {
        OrbitError::Shape(_) => (EXIT_USAGE, "InvalidShape"),
        OrbitError::Strata(s) => return strata_error(s.clone()),
        OrbitError::Lnd(l) => return lnd_error(l.clone()),
        OrbitError::PointNotOnVariety => (EXIT_USAGE, "PointNotOnVariety"),
        OrbitError::ConjectureNotAssumed => (EXIT_USAGE, "ConjectureNotAssumed"),
        OrbitError::UnsupportedFamily(_) => (EXIT_DOMAIN, "UnsupportedFamily"),
        OrbitError::DifferentOrbits { .. } => (EXIT_DOMAIN, "DifferentOrbits"),
        OrbitError::RootUnavailable(_) => (EXIT_DOMAIN, "RootUnavailable"),
        OrbitError::DlogUnsolvable(_) => (EXIT_DOMAIN, "DlogUnsolvable"),
    };
    CliError {
        code,
        kind: kind.into(),
        detail: e.to_string(),
    }
}

fn lnd_error(e: LndError) -> CliError {
    let (code, kind) = match &e {
        LndError::CharacteristicTooSmall { .. } => (EXIT_DOMAIN, "CharacteristicTooSmall"),
        LndError::NotInCatalog { .. } => (EXIT_DOMAIN, "NotInCatalog"),
        LndError::Diverged { .. } => (EXIT_DOMAIN, "Diverged"),
        LndError::BadDesignator(_) => (EXIT_USAGE, "BadDesignator"),
        _ => (EXIT_USAGE, "InvalidInput"),
    };
    CliError {
        code,
        kind: kind.into(),
        detail: e.to_string(),
    }
}

fn strata_error(e: StrataError) -> CliError {
    let (code, kind) = match &e {
        StrataError::EmptyStratum { .. } => (EXIT_DOMAIN, "EmptyStratum"),
        StrataError::PointNotOnVariety => (EXIT_USAGE, "PointNotOnVariety"),
        _ => (EXIT_USAGE, "InvalidInput"),
    };
    CliError {
        code,
        kind: kind.into(),
        detail: e.to_string(),
    }
}

fn harness_error(e: HarnessError) -> CliError {
    match e {
        HarnessError::Orbit(o) => orbit_error(o),
        HarnessError::Field(f) => field_error(f),
        other => CliError {
            code: EXIT_DOMAIN,
            kind: match other {
                HarnessError::TooLarge { .. } => "TooLarge",
                _ => "SamplingFailed",
            }
            .into(),
            detail: other.to_string(),
        },
    }
}

fn field_error(e: FieldError) -> CliError {
    CliError {
        code: EXIT_USAGE,
        kind: "InvalidField".into(),
        detail: e.to_string(),
    }
}

fn wire_error(e: WireError) -> CliError {
    match e {
        WireError::Lnd(l) => lnd_error(l),
        other => CliError {
            code: EXIT_USAGE,
            kind: "InvalidInput".into(),
            detail: other.to_string(),
        },
    }
}

fn shape_error(e: ShapeError) -> CliError {
    CliError {
        code: EXIT_USAGE,
        kind: "InvalidShape".into(),
        detail: e.to_string(),
    }
}

struct Input {
    shape: TrinomialShape,
    aliases: BTreeMap<String, VarId>,
    ctx: FieldCtx,
}

fn load(arg: &ShapeArg) -> Result<Input, CliError> {
    let text = if arg.shape.trim_start().starts_with('{') {
        arg.shape.clone()
    } else {
        std::fs::read_to_string(Path::new(&arg.shape))
            .map_err(|e| CliError::usage(format!("cannot read shape file {}: {e}", arg.shape)))?
    };
    let file: ShapeFile = wire::parse_shape(&text).map_err(wire_error)?;
    let shape = file.shape().map_err(shape_error)?;
    let aliases = file.alias_map().map_err(|e| CliError::usage(e.to_string()))?;
    let ctx: FieldCtx = arg.field.parse().map_err(field_error)?;
    Ok(Input { shape, aliases, ctx })
}

fn require_prime(ctx: FieldCtx) -> Result<u64, CliError> {
    match ctx {
        FieldCtx::PrimeField(p) => Ok(p),
        FieldCtx::Rationals => Err(CliError::usage("this command needs --field Fp:<prime>")),
    }
}

/// Runs the command named by `argv` (including the program name).
pub fn run_cli<I, T>(argv: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                return Outcome {
                    code: EXIT_OK,
                    stdout: text,
                    stderr: String::new(),
                };
            }
            let err = json!({ "error": "usage", "detail": text.trim() });
            return Outcome {
                code: EXIT_USAGE,
                stdout: format!("{err}\n"),
                stderr: text,
            };
        }
    };
    match dispatch(&cli) {
        Ok((value, verdict)) => {
            let stdout = if cli.json {
                format!("{}\n", serde_json::to_string_pretty(&value).expect("values serialize"))
            } else {
                render_human(&value)
            };
            Outcome {
                code: if verdict { EXIT_OK } else { EXIT_VERIFY },
                stdout,
                stderr: String::new(),
            }
        }
        Err(e) => {
            let err = json!({ "error": e.kind, "detail": e.detail });
            Outcome {
                code: e.code,
                stdout: format!("{err}\n"),
                stderr: if cli.json { String::new() } else { format!("error: {}\n", e.detail) },
            }
        }
    }
}

/// The report value and whether every verification in it passed.
fn dispatch(cli: &Cli) -> Result<(Value, bool), CliError> {
    let flags = Flags {
        assume_conjecture: cli.assume_conjecture,
    };
    let ok = |v: Value| Ok((v, true));
    match &cli.command {
        Command::Classify(a) => {
            let inp = load(a)?;
            ok(wire::classification_report(&inp.shape).map_err(wire_error)?)
        }
        Command::Report(a) => {
            let inp = load(a)?;
            let mut v = wire::classification_report(&inp.shape).map_err(wire_error)?;
            v["lnd"] = by_field(inp.ctx, |ctx| Ok(lnd_list_any(&inp.shape, ctx)), |ctx| Ok(lnd_list_any(&inp.shape, ctx)))?;
            v["strata"] = by_field(inp.ctx, |c| strata_report::<Rational>(&inp.shape, c), |c| strata_report::<Fp>(&inp.shape, c))?;
            v["orbits"] = match orbits::orbit_count(&inp.shape) {
                Ok(c) => wire::count_to_json(&c),
                Err(e) => json!({ "unavailable": e.to_string() }),
            };
            ok(v)
        }
        Command::Lnd { action } => match action {
            LndAction::List(a) => {
                let inp = load(a)?;
                ok(by_field(inp.ctx, |c| Ok(lnd_list_any(&inp.shape, c)), |c| Ok(lnd_list_any(&inp.shape, c)))?)
            }
            LndAction::Check { shape, derivation } => {
                let inp = load(shape)?;
                ok(by_field(
                    inp.ctx,
                    |c| lnd_check::<Rational>(&inp.shape, c, derivation),
                    |c| lnd_check::<Fp>(&inp.shape, c, derivation),
                )?)
            }
        },
        Command::Strata(a) => {
            let inp = load(a)?;
            ok(by_field(inp.ctx, |c| strata_report::<Rational>(&inp.shape, c), |c| strata_report::<Fp>(&inp.shape, c))?)
        }
        Command::Orbits { action } => match action {
            OrbitsAction::Classify { shape, point } => {
                let inp = load(shape)?;
                ok(by_field(
                    inp.ctx,
                    |c| orbit_classify::<Rational>(&inp, c, point, flags),
                    |c| orbit_classify::<Fp>(&inp, c, point, flags),
                )?)
            }
            OrbitsAction::Count(a) => {
                let inp = load(a)?;
                let c = orbits::orbit_count(&inp.shape).map_err(orbit_error)?;
                let mut v = wire::count_to_json(&c);
                v["family"] = wire::family_to_json(&orbits::family_of(&inp.shape).map_err(shape_error)?);
                ok(v)
            }
            OrbitsAction::Transport { shape, from, to, glued } => {
                let inp = load(shape)?;
                ok(by_field(
                    inp.ctx,
                    |c| orbit_transport::<Rational>(&inp, c, from, to, *glued),
                    |c| orbit_transport::<Fp>(&inp, c, from, to, *glued),
                )?)
            }
            OrbitsAction::Saut { shape, point } => {
                let inp = load(shape)?;
                ok(by_field(
                    inp.ctx,
                    |c| orbit_saut::<Rational>(&inp, c, point),
                    |c| orbit_saut::<Fp>(&inp, c, point),
                )?)
            }
        },
        Command::Enumerate(a) => {
            let inp = load(a)?;
            let p = require_prime(inp.ctx)?;
            let pts = harness::enumerate_points(&inp.shape, p).map_err(harness_error)?;
            ok(json!({
                "shape": wire::shape_to_json(&inp.shape),
                "field": inp.ctx.to_string(),
                "count": pts.len(),
                "points": pts.iter().map(|p| wire::point_to_json(p)).collect::<Vec<_>>(),
            }))
        }
        Command::Verify { check, shape, trials } => {
            let inp = load(shape)?;
            let p = require_prime(inp.ctx)?;
            let s = &inp.shape;
            let report: VerifyReport = match check {
                VerifyKind::Partition => harness::verify_partition(s, p, flags),
                VerifyKind::Invariance => harness::verify_invariance(s, p, *trials, cli.seed, flags),
                VerifyKind::Exhaustive => harness::verify_invariance_exhaustive(s, p, flags),
                VerifyKind::Transport => harness::verify_transport(s, p, *trials, cli.seed),
                VerifyKind::All => harness::verify_all(s, p, *trials, cli.seed, flags),
            }
            .map_err(harness_error)?;
            let passed = report.passed();
            let mut v = serde_json::to_value(&report).expect("reports serialize");
            v["passed"] = json!(passed);
            Ok((v, passed))
        }
    }
}

fn by_field<Q, P>(ctx: FieldCtx, q: Q, p: P) -> Result<Value, CliError>
where
    Q: FnOnce(FieldCtx) -> Result<Value, CliError>,
    P: FnOnce(FieldCtx) -> Result<Value, CliError>,
{
    match ctx {
        FieldCtx::Rationals => q(ctx),
        FieldCtx::PrimeField(_) => p(ctx),
    }
}

fn lnd_list_any(shape: &TrinomialShape, ctx: FieldCtx) -> Value {
    match ctx {
        FieldCtx::Rationals => lnd_list::<Rational>(shape, ctx),
        FieldCtx::PrimeField(_) => lnd_list::<Fp>(shape, ctx),
    }
}

fn lnd_list<F: Field>(shape: &TrinomialShape, ctx: FieldCtx) -> Value {
    let cat = lnd::lnd_catalog::<F>(shape, ctx);
    json!({
        "field": ctx.to_string(),
        "derivations": cat.derivations.iter().map(wire::derivation_to_json).collect::<Vec<_>>(),
        "omitted": cat.omitted.iter().map(|(d, why)| json!({ "family": d, "reason": why })).collect::<Vec<_>>(),
    })
}

fn lnd_check<F: Field>(shape: &TrinomialShape, ctx: FieldCtx, name: &str) -> Result<Value, CliError> {
    let d = lnd::derivation_by_name::<F>(shape, ctx, name).map_err(lnd_error)?;
    let wd = lnd::well_defined(&d, shape);
    let g = shape.equation::<F>(ctx);
    let mut nil = serde_json::Map::new();
    for v in shape.vars() {
        let k = d.nilpotency_index(v, &g, DEFAULT_NILPOTENCY_CAP).map_err(lnd_error)?;
        nil.insert(v.to_string(), json!(k));
    }
    Ok(json!({
        "derivation": wire::derivation_to_json(&d),
        "field": ctx.to_string(),
        "well_defined": wd.in_ideal,
        "kills_equation": wd.identically_zero,
        "nilpotency": nil,
    }))
}

fn strata_report<F: Field>(shape: &TrinomialShape, ctx: FieldCtx) -> Result<Value, CliError> {
    let comps = strata::singular_components(shape);
    let sing = strata::singular_strata::<F>(shape, ctx);
    let rows = sing
        .iter()
        .map(|s| {
            let n = strata::containing_components::<F>(shape, ctx, s).map_err(strata_error)?;
            let idx: Vec<usize> = n
                .iter()
                .map(|c| comps.iter().position(|k| k == c).expect("component listed") + 1)
                .collect();
            let pt = strata::stratum_point::<F>(shape, ctx, s).map_err(strata_error)?;
            Ok(json!({ "S": wire::varset_to_json(s), "N": idx, "point": wire::point_to_json(&pt) }))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let classes = strata::linked_classes(shape, &sing);
    Ok(json!({
        "field": ctx.to_string(),
        "singular_components": comps.iter().map(|c| wire::varset_to_json(&c.generator_set)).collect::<Vec<_>>(),
        "singular_strata": rows,
        "linked_classes": classes,
    }))
}

fn point<F: Field>(inp: &Input, ctx: FieldCtx, text: &str) -> Result<Vec<F>, CliError> {
    wire::parse_point(&inp.shape, ctx, &inp.aliases, text).map_err(wire_error)
}

fn orbit_classify<F: Field>(inp: &Input, ctx: FieldCtx, text: &str, flags: Flags) -> Result<Value, CliError> {
    let pt = point::<F>(inp, ctx, text)?;
    let d = orbits::classify_point(&inp.shape, &pt, flags).map_err(orbit_error)?;
    let mut v = json!({
        "point": wire::point_to_json(&pt),
        "descriptor": wire::descriptor_to_json(&d),
        "label": d.to_string(),
    });
    if let Ok(dim) = orbits::descriptor_dim(&inp.shape, &d) {
        v["dim"] = json!(dim);
    }
    Ok(v)
}

fn orbit_transport<F: Field>(
    inp: &Input,
    ctx: FieldCtx,
    from: &str,
    to: &str,
    glued: bool,
) -> Result<Value, CliError> {
    let src = point::<F>(inp, ctx, from)?;
    let dst = point::<F>(inp, ctx, to)?;
    let word = if glued {
        orbits::transport_glued(&inp.shape, &src, &dst)
    } else {
        orbits::transport(&inp.shape, &src, &dst)
    }
    .map_err(orbit_error)?;
    let image = word.apply(&inp.shape, &src).map_err(orbit_error)?;
    Ok(json!({
        "from": wire::point_to_json(&src),
        "to": wire::point_to_json(&dst),
        "word": wire::word_to_json(&word),
        "display": wire::word_display(&word),
        "reaches_target": image == dst,
    }))
}

fn orbit_saut<F: Field>(inp: &Input, ctx: FieldCtx, text: &str) -> Result<Value, CliError> {
    let pt = point::<F>(inp, ctx, text)?;
    let d = orbits::saut_descriptor(&inp.shape, &pt).map_err(orbit_error)?;
    Ok(json!({ "point": wire::point_to_json(&pt), "saut": wire::saut_to_json(&d) }))
}

/// Text rendering of a report value; every scalar in the JSON appears here
/// verbatim.
pub fn render_human(v: &Value) -> String {
    let mut out = String::new();
    render_into(&mut out, v, 0);
    out
}

fn scalar(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        Value::Null => Some("null".into()),
        Value::Array(a) if a.iter().all(|x| !x.is_array() && !x.is_object()) => Some(format!(
            "[{}]",
            a.iter().map(|x| scalar(x).unwrap_or_default()).collect::<Vec<_>>().join(", ")
        )),
        _ => None,
    }
}

fn render_into(out: &mut String, v: &Value, depth: usize) {
    let pad = "  ".repeat(depth);
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                match scalar(x) {
                    Some(s) => {
                        let _ = writeln!(out, "{pad}{k}: {s}");
                    }
                    None => {
                        let _ = writeln!(out, "{pad}{k}:");
                        render_into(out, x, depth + 1);
                    }
                }
            }
        }
        Value::Array(items) => {
            for x in items {
                match scalar(x) {
                    Some(s) => {
                        let _ = writeln!(out, "{pad}- {s}");
                    }
                    None => {
                        let _ = writeln!(out, "{pad}-");
                        render_into(out, x, depth + 1);
                    }
                }
            }
        }
        other => {
            let _ = writeln!(out, "{pad}{}", scalar(other).unwrap_or_default());
        }
    }
}
