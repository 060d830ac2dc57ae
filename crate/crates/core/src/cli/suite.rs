//! The `verify` command: every identity the engine is expected to satisfy,
//! evaluated on the job's parameters and markings.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use super::config::{Check, Job};
use crate::bmodel;
use crate::chamber::ChamberIndex;
use crate::error::Result;
use crate::invariants::{closed_trr_instances, verify_mirror, ClosedTrr, InvariantEngine};
use crate::scalar::{int, sign};
use crate::spin::{Cell, Marking, MarkingSet};
use crate::wallcross::{act_on_chamber, connect, is_identity, preservation_check, random_element};
use crate::{Rational, ScalarText};

/// Outcome of one check.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub passed: bool,
    pub detail: Value,
}

impl CheckResult {
    fn new(passed: bool, detail: Value) -> Self {
        Self { passed, detail }
    }
}

fn rng(job: &Job, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(job.verify.seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

fn base_chamber(job: &Job) -> Result<ChamberIndex<Rational>> {
    match &job.chamber {
        Some(c) => Ok(c.clone()),
        None => ChamberIndex::build_minimal(job.markings.clone(), job.dmax.clone()),
    }
}

/// Runs the selected checks (all by default) in parallel; the result map is
/// ordered by check name.
pub fn run_suite(job: &Job) -> BTreeMap<String, std::result::Result<CheckResult, String>> {
    let checks: Vec<Check> = job.verify.checks.clone().unwrap_or_else(|| Check::ALL.to_vec());
    checks
        .par_iter()
        .map(|&c| (c.name(), run_check(job, c).map_err(|e| e.to_string())))
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

pub fn run_check(job: &Job, check: Check) -> Result<CheckResult> {
    match check {
        Check::Axioms => axioms(job),
        Check::SimpleInvariants => simple_invariants(job),
        Check::Singletons => singletons(job),
        Check::Period => period(job),
        Check::ChamberIndependence => independence(job),
        Check::Torsor => torsor(job),
        Check::Preservation => preservation(job),
        Check::OpenTrr => open_trr(job),
        Check::ClosedTrr => closed_trr(job),
        Check::Mirror => mirror(job),
        Check::SymCompat => sym_compat(job),
    }
}

fn axioms(job: &Job) -> Result<CheckResult> {
    let report = base_chamber(job)?.check_axioms();
    let v: Vec<String> = report.violations.iter().map(ToString::to_string).collect();
    Ok(CheckResult::new(report.passed(), json!({ "violations": v })))
}

fn simple_invariants(job: &Job) -> Result<CheckResult> {
    let nu = ChamberIndex::<Rational>::build_minimal(job.markings.clone(), job.dmax.clone())?;
    let mut bad = Vec::new();
    let empty = job.markings.balanced_keys(&Cell::empty())?;
    for key in &empty {
        if nu.value(key)? != int(-1) {
            bad.push(format!("empty graph p={}", key.p));
        }
    }
    if empty.len() != 2 {
        bad.push(format!("{} empty graphs, expected 2", empty.len()));
    }
    for l in job.markings.twists().keys() {
        let cell = Cell::new([(*l, 0)])?;
        for key in job.markings.balanced_keys(&cell)? {
            if nu.value(&key)? != int(1) {
                bad.push(format!("singleton {cell} p={}", key.p));
            }
        }
    }
    Ok(CheckResult::new(bad.is_empty(), json!({ "failures": bad })))
}

fn singletons(job: &Job) -> Result<CheckResult> {
    let engine = InvariantEngine::<Rational>::new(job.params(), job.convention);
    let mut bad = Vec::new();
    let mut count = 0;
    for &(a, b) in job.markings.twists().values() {
        for d in 0..=4 {
            count += 1;
            let got = engine.amplitude_of(&[(a, b, d)])?;
            if got != sign::<Rational>(d as i64) {
                bad.push(format!("({a},{b}) d={d}: {}", got.to_text()));
            }
        }
    }
    Ok(CheckResult::new(bad.is_empty(), json!({ "checked": count, "failures": bad })))
}

fn period(job: &Job) -> Result<CheckResult> {
    let nu = base_chamber(job)?;
    let w = bmodel::build_potential(&nu)?;
    let table = bmodel::period_table(job.params(), &w)?;
    let extracted = bmodel::extract_amplitudes(nu.markings(), nu.dmax(), &table)?;
    let direct = nu.amplitudes()?;
    let bad: Vec<String> = direct
        .iter()
        .filter(|(c, _)| !c.is_empty())
        .filter(|(c, v)| extracted.get(*c) != Some(*v))
        .map(|(c, v)| format!("{c}: amplitude {}", v.to_text()))
        .collect();
    Ok(CheckResult::new(bad.is_empty(), json!({ "cells": extracted.len(), "mismatches": bad })))
}

fn independence(job: &Job) -> Result<CheckResult> {
    let nu = base_chamber(job)?;
    let base = nu.amplitudes()?;
    let mut rng = rng(job, 1);
    let mut bad = Vec::new();
    for i in 0..job.verify.samples {
        let g = random_element(nu.markings(), nu.dmax(), 5, &mut rng)?;
        if act_on_chamber(&g, &nu)?.amplitudes()? != base {
            bad.push(i);
        }
    }
    Ok(CheckResult::new(bad.is_empty(), json!({ "samples": job.verify.samples, "failed_samples": bad })))
}

fn torsor(job: &Job) -> Result<CheckResult> {
    let nu = base_chamber(job)?;
    let mut rng = rng(job, 2);
    let mut failures = Vec::new();
    for i in 0..job.verify.samples {
        let g = random_element(nu.markings(), nu.dmax(), 5, &mut rng)?;
        let moved = act_on_chamber(&g, &nu)?;
        let h = connect(&nu, &moved)?;
        if act_on_chamber(&h, &nu)? != moved {
            failures.push(format!("sample {i}: connect does not reproduce g(nu)"));
        }
        if !is_identity(&g, nu.markings())? && moved == nu {
            failures.push(format!("sample {i}: non-identity element fixes nu"));
        }
    }
    Ok(CheckResult::new(failures.is_empty(), json!({ "samples": job.verify.samples, "failures": failures })))
}

fn preservation(job: &Job) -> Result<CheckResult> {
    let nu = base_chamber(job)?;
    let mut rng = rng(job, 3);
    let mut details = Vec::new();
    for i in 0..job.verify.samples {
        let g = random_element::<Rational, _>(nu.markings(), nu.dmax(), 5, &mut rng)?;
        let rep = preservation_check(&g, nu.markings())?;
        if !rep.passed() {
            details.push(format!("sample {i}: {}", rep.details.join("; ")));
        }
    }
    Ok(CheckResult::new(details.is_empty(), json!({ "samples": job.verify.samples, "failures": details })))
}

/// Every non-empty subset of the markings, relabeled `1..k`, with every
/// descendent vector under `dmax`.
fn open_instances(job: &Job) -> Result<Vec<(MarkingSet, Cell)>> {
    let all: Vec<(u32, (u32, u32))> = job.markings.twists().iter().map(|(&l, &t)| (l, t)).collect();
    let mut out = Vec::new();
    for mask in 1u64..(1 << all.len()) {
        let chosen: Vec<(u32, (u32, u32))> = all.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, x)| *x).collect();
        let marks: Vec<Marking> =
            chosen.iter().enumerate().map(|(i, &(_, (a, b)))| Marking { label: i as u32 + 1, a, b }).collect();
        let set = MarkingSet::new(job.params(), &marks)?;
        let bounds: BTreeMap<u32, u32> =
            chosen.iter().enumerate().map(|(i, &(l, _))| (i as u32 + 1, job.dmax.get(&l).copied().unwrap_or(0))).collect();
        for cell in set.cells(&bounds) {
            if cell.len() == chosen.len() {
                out.push((set.clone(), cell));
            }
        }
    }
    Ok(out)
}

fn open_trr(job: &Job) -> Result<CheckResult> {
    let engine = InvariantEngine::<Rational>::new(job.params(), job.convention).with_ramond_rule(job.ramond_rule);
    let mut failures = Vec::new();
    let mut count = 0;
    for (set, cell) in open_instances(job)? {
        let mut residuals = vec![("first", engine.verify_open_trr(&set, &cell, 1, None)?)];
        if cell.len() >= 2 {
            residuals.push(("second", engine.verify_open_trr(&set, &cell, 1, Some(2))?));
            residuals.push(("solved", engine.verify_solved_form(&set, &cell)?));
        }
        for (name, r) in residuals {
            count += 1;
            if !num_traits::Zero::is_zero(&r) {
                let twists: Vec<String> = set.twists().values().map(|(a, b)| format!("({a},{b})")).collect();
                failures.push(format!("{name} identity on {} {cell}: residual {}", twists.join(""), r.to_text()));
            }
        }
    }
    Ok(CheckResult::new(failures.is_empty(), json!({ "identities": count, "failures": failures })))
}

fn closed_trr(job: &Job) -> Result<CheckResult> {
    let params = job.params();
    let engine = InvariantEngine::<Rational>::new(params, job.convention).with_ramond_rule(job.ramond_rule);
    let other = InvariantEngine::<Rational>::new(params, job.convention.other()).with_ramond_rule(job.ramond_rule);
    let (mut zero, mut nonzero_instances, mut unsupported, mut other_failures) = (0usize, 0usize, 0usize, 0usize);
    let mut failures = Vec::new();
    let mut dependent = Vec::new();
    for n in [3, 4] {
        for ins in closed_trr_instances(params, n, 1, 1) {
            match engine.verify_closed_trr(&ins)? {
                ClosedTrr::Unsupported(_) => unsupported += 1,
                ClosedTrr::Residual { residual, nonzero_terms } => {
                    if nonzero_terms > 0 {
                        nonzero_instances += 1;
                    }
                    if num_traits::Zero::is_zero(&residual) {
                        zero += 1;
                    } else {
                        failures.push(format!("{ins:?}: residual {}", residual.to_text()));
                    }
                    if let ClosedTrr::Residual { residual, .. } = other.verify_closed_trr(&ins)? {
                        if !num_traits::Zero::is_zero(&residual) {
                            other_failures += 1;
                        }
                    }
                }
            }
            if !engine.distinguished_independent(&ins).unwrap_or(true) {
                dependent.push(format!("{ins:?}"));
            }
        }
    }
    let passed = failures.is_empty() && dependent.is_empty() && (nonzero_instances == 0 || other_failures > 0);
    Ok(CheckResult::new(
        passed,
        json!({
            "vanishing": zero,
            "nonzero_instances": nonzero_instances,
            "unsupported": unsupported,
            "failures": failures,
            "distinguished_dependent": dependent,
            "other_convention_failures": other_failures,
        }),
    ))
}

fn mirror(job: &Job) -> Result<CheckResult> {
    let nu = base_chamber(job)?;
    let mut rng = rng(job, 4);
    let report = verify_mirror(&nu, job.convention, job.verify.samples.min(5), &mut rng)?;
    Ok(CheckResult::new(report.passed(), serde_json::to_value(&report).expect("serializable report")))
}

fn sym_compat(job: &Job) -> Result<CheckResult> {
    if bmodel::psi_for(&job.markings).is_err() {
        return Ok(CheckResult::new(true, json!({ "applicable": false })));
    }
    let sym = base_chamber(job)?.symmetrize()?;
    let (ws, psi) = bmodel::build_potential_sym(&sym)?;
    let mapped = ws.map_elements(psi.open_ring(), |e| psi.apply(e))?;
    let compatible = mapped == bmodel::build_potential(&sym)?;
    let table = bmodel::period_table(job.params(), &ws)?;
    let mut flat = BTreeMap::new();
    for (cycle, series) in &table {
        if cycle.is_good_basis(job.params()) {
            let head = bmodel::flat_head(series, *cycle);
            flat.insert(cycle.to_string(), json!({ "holds": head.holds, "detail": head.detail }));
        }
    }
    let flat_ok = flat.values().all(|v| v["holds"] == json!(true));
    Ok(CheckResult::new(compatible && flat_ok, json!({ "applicable": true, "psi_compatible": compatible, "flat_head": flat })))
}
