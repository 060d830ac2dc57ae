//! Batch front end: `fjrw <command> --config <file> [--out <file>]`.
//!
//! Every command prints one JSON document with sorted keys and rationals as
//! `"p/q"` strings. Exit codes: 0 success, 1 failed check, 2 invalid input.

pub mod config;
pub mod suite;

use std::path::PathBuf;

use clap::Parser;
use serde_json::{json, Value};

pub use config::{load_config, parse_config, Check, Command, ConfigError, Job, JobConfig, VerifyOptions};

use crate::algebra::{HbarSeries, PotentialSeries, UNBOUNDED};
use crate::bmodel::{self, CycleLabel};
use crate::chamber::ChamberIndex;
use crate::error::Error;
use crate::invariants::InvariantEngine;
use crate::spin::{Cell, Selection};
use crate::wallcross::{act_on_chamber, connect, is_identity, preservation_check, PreservationReport};
use crate::{Rational, ScalarText};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_INVALID: i32 = 2;

/// Environment variable fixing the worker-thread count.
pub const THREADS_ENV: &str = "FJRW_THREADS";

#[derive(Debug, Parser)]
#[command(name = "fjrw", version, about = "Exact open/closed FJRW computations for x^r + y^s")]
pub struct Args {
    #[arg(value_enum)]
    pub command: Command,
    /// JSON job description.
    #[arg(long)]
    pub config: PathBuf,
    /// Write the JSON result here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Exit code plus the JSON document to emit.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub doc: Value,
}

impl Outcome {
    fn ok(doc: Value) -> Self {
        Self { code: EXIT_OK, doc }
    }

    fn checked(passed: bool, doc: Value) -> Self {
        Self { code: if passed { EXIT_OK } else { EXIT_FAILED }, doc }
    }

    fn from_error(e: Error) -> Self {
        let code = match e {
            Error::Internal(_) | Error::ConnectMismatch(_) => EXIT_FAILED,
            _ => EXIT_INVALID,
        };
        let unsupported = matches!(e, Error::NoDistinguishedInsertion(_));
        Self { code, doc: json!({ "error": e.to_string(), "unsupported": unsupported }) }
    }

    fn from_config(e: ConfigError) -> Self {
        Self { code: EXIT_INVALID, doc: json!({ "error": e.kind, "violations": e.violations }) }
    }
}

/// Canonical text: pretty JSON with sorted keys and a trailing newline.
pub fn emit_report(doc: &Value) -> String {
    let mut text = serde_json::to_string_pretty(doc).expect("JSON values serialize");
    text.push('\n');
    text
}

/// Loads the configuration, runs it and writes the report; returns the exit code.
pub fn main_with(args: &Args) -> i32 {
    let outcome = match load_config(&args.config, Some(args.command)) {
        Ok(job) => run(&job),
        Err(e) => Outcome::from_config(e),
    };
    let text = emit_report(&outcome.doc);
    match &args.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &text) {
                eprintln!("cannot write {}: {e}", path.display());
                return EXIT_INVALID;
            }
        }
        None => print!("{text}"),
    }
    if outcome.code == EXIT_INVALID {
        if let Some(err) = outcome.doc.get("error") {
            eprintln!("error: {}", err.as_str().unwrap_or_default());
        }
        for v in outcome.doc.get("violations").and_then(Value::as_array).into_iter().flatten() {
            eprintln!("  {}", v.as_str().unwrap_or_default());
        }
    }
    outcome.code
}

pub fn run(job: &Job) -> Outcome {
    let result = match job.command {
        Command::ExtInvariant => ext_invariant(job),
        Command::Amplitude => amplitude(job),
        Command::ChamberBuild => chamber(job).map(|c| Outcome::ok(to_json(&c.to_doc()))),
        Command::ChamberCheck => chamber_check(job),
        Command::Potential => potential(job),
        Command::Period => period(job),
        Command::WallcrossApply => wallcross_apply(job),
        Command::WallcrossConnect => wallcross_connect(job),
        Command::Verify => Ok(verify(job)),
    };
    result.unwrap_or_else(Outcome::from_error)
}

fn to_json<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

/// The provided chamber index, else the minimal one; symmetrized on request.
fn chamber(job: &Job) -> crate::Result<ChamberIndex<Rational>> {
    let nu = match &job.chamber {
        Some(c) => c.clone(),
        None => ChamberIndex::build_minimal(job.markings.clone(), job.dmax.clone())?,
    };
    if job.symmetric {
        nu.symmetrize()
    } else {
        Ok(nu)
    }
}

fn selection_name(sel: &Selection) -> &'static str {
    match sel {
        Selection::TooFewPoints => "too-few-points",
        Selection::NonIntegralRank => "non-integral-rank",
        Selection::DimensionMismatch => "dimension-mismatch",
        Selection::RamondVanishing => "ramond-vanishing",
        Selection::Ok { .. } => "ok",
    }
}

fn ext_invariant(job: &Job) -> crate::Result<Outcome> {
    let engine = InvariantEngine::<Rational>::new(job.params(), job.convention).with_ramond_rule(job.ramond_rule);
    let sel = engine.selection(&job.insertions)?;
    let value = engine.ext_invariant(&job.insertions)?;
    Ok(Outcome::ok(json!({
        "value": value.to_text(),
        "convention": to_json(&job.convention),
        "ramond_rule": to_json(&job.ramond_rule),
        "selection": selection_name(&sel),
        "insertions": to_json(&job.insertions),
    })))
}

fn cell_json(cell: &Cell) -> Value {
    json!({
        "J": cell.labels().collect::<Vec<_>>(),
        "d": cell.entries().iter().map(|&(l, d)| (l.to_string(), json!(d))).collect::<serde_json::Map<_, _>>(),
    })
}

fn amplitude(job: &Job) -> crate::Result<Outcome> {
    let nu = chamber(job)?;
    if let Some(cell) = &job.cell {
        return Ok(Outcome::ok(json!({ "A": nu.amplitude(cell)?.to_text() })));
    }
    let rows: Vec<Value> = nu
        .amplitudes()?
        .into_iter()
        .filter(|(c, _)| !c.is_empty())
        .map(|(c, v)| {
            let mut row = cell_json(&c);
            row["A"] = json!(v.to_text());
            row
        })
        .collect();
    Ok(Outcome::ok(json!({ "amplitudes": rows })))
}

fn chamber_check(job: &Job) -> crate::Result<Outcome> {
    let nu = chamber(job)?;
    let report = nu.check_axioms();
    let violations: Vec<Value> = report
        .violations
        .iter()
        .map(|v| {
            let mut row = cell_json(&v.cell);
            row["condition"] = to_json(&v.condition);
            row["detail"] = json!(v.detail);
            row
        })
        .collect();
    Ok(Outcome::checked(
        report.passed(),
        json!({ "passed": report.passed(), "symmetric": nu.is_symmetric(), "violations": violations }),
    ))
}

fn series_json(w: &PotentialSeries<Rational>) -> Value {
    let terms: Vec<Value> = w
        .terms()
        .map(|(&(k1, k2), c)| json!({ "k1": k1, "k2": k2, "coefficient": c.to_text_map() }))
        .collect();
    let bound = if w.bound() == UNBOUNDED { Value::Null } else { json!(w.bound()) };
    json!({ "bound": bound, "terms": terms })
}

fn hbar_json(h: &HbarSeries<Rational>) -> Value {
    Value::Array(h.terms().map(|(e, c)| json!({ "hbar": e, "coefficient": c.to_text_map() })).collect())
}

fn potential_of(job: &Job) -> crate::Result<PotentialSeries<Rational>> {
    let nu = chamber(job)?;
    if job.symmetric {
        Ok(bmodel::build_potential_sym(&nu)?.0)
    } else {
        bmodel::build_potential(&nu)
    }
}

fn potential(job: &Job) -> crate::Result<Outcome> {
    let w = potential_of(job)?;
    let mut doc = series_json(&w);
    doc["symmetric"] = json!(job.symmetric);
    Ok(Outcome::ok(doc))
}

fn period(job: &Job) -> crate::Result<Outcome> {
    let params = job.params();
    let w = potential_of(job)?;
    let cycles = match job.cycle {
        Some(c) => vec![CycleLabel::new(params, c.a, c.b)?],
        None => CycleLabel::all(params),
    };
    let mut rows = Vec::new();
    for cycle in cycles {
        let series = bmodel::period_integral(params, &w, cycle)?;
        let mut row = json!({ "a": cycle.a, "b": cycle.b, "series": hbar_json(&series) });
        if job.symmetric && cycle.is_good_basis(params) {
            let head = bmodel::flat_head(&series, cycle);
            row["flat_head"] = json!({ "holds": head.holds, "detail": head.detail });
        }
        rows.push(row);
    }
    Ok(Outcome::ok(json!({ "cycles": rows, "symmetric": job.symmetric })))
}

fn preservation_json(rep: &PreservationReport) -> Value {
    json!({
        "passed": rep.passed(),
        "jacobian": rep.jacobian,
        "ideal": rep.ideal,
        "homogeneity": rep.homogeneity,
        "congruence": rep.congruence,
        "details": rep.details,
    })
}

fn wallcross_apply(job: &Job) -> crate::Result<Outcome> {
    let g = job.group.as_ref().expect("validated: group present");
    let nu = chamber(job)?;
    let moved = act_on_chamber(g, &nu)?;
    let rep = preservation_check(g, nu.markings())?;
    Ok(Outcome::checked(
        rep.passed(),
        json!({
            "chamber": to_json(&moved.to_doc()),
            "identity": is_identity(g, nu.markings())?,
            "preservation": preservation_json(&rep),
        }),
    ))
}

fn wallcross_connect(job: &Job) -> crate::Result<Outcome> {
    let target = job.target.as_ref().expect("validated: target present");
    let nu = chamber(job)?;
    let g = connect(&nu, target)?;
    let reached = act_on_chamber(&g, &nu)? == *target;
    Ok(Outcome::checked(reached, json!({ "group": to_json(&g.to_doc()), "reaches_target": reached })))
}

fn verify(job: &Job) -> Outcome {
    let results = suite::run_suite(job);
    let mut passed = true;
    let mut checks = serde_json::Map::new();
    for (name, r) in results {
        let entry = match r {
            Ok(c) => {
                passed &= c.passed;
                json!({ "passed": c.passed, "detail": c.detail })
            }
            Err(e) => {
                passed = false;
                json!({ "passed": false, "error": e })
            }
        };
        checks.insert(name, entry);
    }
    Outcome::checked(
        passed,
        json!({
            "passed": passed,
            "convention": to_json(&job.convention),
            "ramond_rule": to_json(&job.ramond_rule),
            "checks": checks,
        }),
    )
}
