//! Job configuration: JSON schema, loading, and validation that reports every
//! violation at once.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use crate::bmodel::CycleLabel;
use crate::chamber::{ChamberDoc, ChamberIndex};
use crate::invariants::SignConvention;
use crate::spin::{Cell, ClosedInsertion, Marking, MarkingSet, ModelParams, RamondRule};
use crate::wallcross::{GeneratorDoc, GroupElement};
use crate::Rational;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    ExtInvariant,
    Amplitude,
    ChamberBuild,
    ChamberCheck,
    Potential,
    Period,
    WallcrossApply,
    WallcrossConnect,
    Verify,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = serde_json::to_value(self).expect("unit variant");
        f.write_str(v.as_str().expect("string tag"))
    }
}

/// Names of the checks run by `verify`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    Axioms,
    SimpleInvariants,
    Singletons,
    Period,
    ChamberIndependence,
    Torsor,
    Preservation,
    OpenTrr,
    ClosedTrr,
    Mirror,
    SymCompat,
}

impl Check {
    pub const ALL: [Check; 11] = [
        Check::Axioms,
        Check::SimpleInvariants,
        Check::Singletons,
        Check::Period,
        Check::ChamberIndependence,
        Check::Torsor,
        Check::Preservation,
        Check::OpenTrr,
        Check::ClosedTrr,
        Check::Mirror,
        Check::SymCompat,
    ];

    pub fn name(self) -> String {
        serde_json::to_value(self).expect("unit variant").as_str().expect("string tag").to_owned()
    }
}

/// Descendent bounds: one number for every marking, or per label.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DmaxBound {
    Uniform(u32),
    PerLabel(BTreeMap<u32, u32>),
}

impl Default for DmaxBound {
    fn default() -> Self {
        DmaxBound::Uniform(0)
    }
}

/// A chamber index either top level or wrapped as `{"chamber": …}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChamberFile(pub ChamberDoc);

impl<'de> Deserialize<'de> for ChamberFile {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let mut v = serde_json::Value::deserialize(d)?;
        if v.get("entries").is_none() {
            if let Some(inner) = v.get_mut("chamber") {
                v = inner.take();
            }
        }
        serde_json::from_value(v).map(ChamberFile).map_err(serde::de::Error::custom)
    }
}

impl ChamberFile {
    fn into_doc(self) -> ChamberDoc {
        self.0
    }
}

/// Group element file; the report of `wallcross-connect` is accepted as is.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupDoc {
    pub group: Vec<GeneratorDoc>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyOptions {
    #[serde(default)]
    pub checks: Option<Vec<Check>>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_samples() -> usize {
    20
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { checks: None, samples: default_samples(), seed: 0 }
    }
}

/// The raw JSON job description.
#[derive(Clone, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub r: Option<u32>,
    pub s: Option<u32>,
    pub markings: Option<Vec<Marking>>,
    #[serde(default)]
    pub dmax: Option<DmaxBound>,
    pub command: Option<Command>,
    #[serde(default)]
    pub insertions: Option<Vec<ClosedInsertion>>,
    #[serde(default)]
    pub convention: Option<SignConvention>,
    #[serde(default)]
    pub ramond_rule: Option<RamondRule>,
    /// `label → descendent` for a single amplitude.
    #[serde(default)]
    pub cell: Option<BTreeMap<u32, u32>>,
    #[serde(default)]
    pub cycle: Option<CycleLabel>,
    #[serde(default)]
    pub symmetric: bool,
    #[serde(default)]
    pub chamber: Option<ChamberDoc>,
    #[serde(default)]
    pub chamber_file: Option<PathBuf>,
    #[serde(default)]
    pub target: Option<ChamberDoc>,
    #[serde(default)]
    pub target_file: Option<PathBuf>,
    #[serde(default)]
    pub group: Option<Vec<GeneratorDoc>>,
    #[serde(default)]
    pub group_file: Option<PathBuf>,
    #[serde(default)]
    pub verify: Option<VerifyOptions>,
}

/// Why a configuration was rejected.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConfigError {
    pub kind: &'static str,
    pub violations: Vec<String>,
}

impl ConfigError {
    fn one(kind: &'static str, msg: String) -> Self {
        Self { kind, violations: vec![msg] }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} error: {}", self.kind, self.violations.join("; "))
    }
}

impl std::error::Error for ConfigError {}

/// A validated job, with every referenced document loaded.
#[derive(Clone, Debug)]
pub struct Job {
    pub command: Command,
    pub markings: MarkingSet,
    pub dmax: BTreeMap<u32, u32>,
    pub chamber: Option<ChamberIndex<Rational>>,
    pub target: Option<ChamberIndex<Rational>>,
    pub group: Option<GroupElement<Rational>>,
    pub insertions: Vec<ClosedInsertion>,
    pub convention: SignConvention,
    pub ramond_rule: RamondRule,
    pub cell: Option<Cell>,
    pub cycle: Option<CycleLabel>,
    pub symmetric: bool,
    pub verify: VerifyOptions,
}

impl Job {
    pub fn params(&self) -> ModelParams {
        self.markings.params()
    }
}

pub fn parse_config(text: &str) -> Result<JobConfig, ConfigError> {
    serde_json::from_str(text).map_err(|e| ConfigError::one("schema", e.to_string()))
}

/// Reads and validates a configuration file; relative document paths are
/// resolved against the file's directory.
pub fn load_config(path: &Path, command: Option<Command>) -> Result<Job, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::one("io", format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_config(&text)?.resolve(command, base)
}

fn read_json<T: for<'de> Deserialize<'de>>(base: &Path, path: &Path, field: &str, out: &mut Vec<String>) -> Option<T> {
    let full = if path.is_absolute() { path.to_path_buf() } else { base.join(path) };
    match std::fs::read_to_string(&full) {
        Err(e) => {
            out.push(format!("{field}: cannot read {}: {e}", full.display()));
            None
        }
        Ok(text) => match serde_json::from_str(&text) {
            Ok(v) => Some(v),
            Err(e) => {
                out.push(format!("{field}: {}: {e}", full.display()));
                None
            }
        },
    }
}

fn pick<T>(inline: Option<T>, file: Option<T>, field: &str, out: &mut Vec<String>) -> Option<T> {
    match (inline, file) {
        (Some(_), Some(_)) => {
            out.push(format!("{field} and {field}_file are mutually exclusive"));
            None
        }
        (a, b) => a.or(b),
    }
}

impl JobConfig {
    /// Validates against the command (from the command line, or the
    /// `command` field) and loads referenced documents.
    pub fn resolve(self, command: Option<Command>, base: &Path) -> Result<Job, ConfigError> {
        let mut v = Vec::new();
        let command = match (command, self.command) {
            (Some(a), Some(b)) if a != b => {
                v.push(format!("command: config says {b} but {a} was requested"));
                a
            }
            (Some(a), _) | (None, Some(a)) => a,
            (None, None) => return Err(ConfigError::one("schema", "command: missing".into())),
        };

        let chamber_doc = {
            let file = self.chamber_file.as_ref().and_then(|p| read_json::<ChamberFile>(base, p, "chamber_file", &mut v)).map(ChamberFile::into_doc);
            pick(self.chamber, file, "chamber", &mut v)
        };
        let target_doc = {
            let file = self.target_file.as_ref().and_then(|p| read_json::<ChamberFile>(base, p, "target_file", &mut v)).map(ChamberFile::into_doc);
            pick(self.target, file, "target", &mut v)
        };
        let group_docs = {
            let file = self.group_file.as_ref().and_then(|p| read_json::<GroupDoc>(base, p, "group_file", &mut v)).map(|g| g.group);
            pick(self.group, file, "group", &mut v)
        };

        let r = self.r.or(chamber_doc.as_ref().map(|c| c.r));
        let s = self.s.or(chamber_doc.as_ref().map(|c| c.s));
        let markings = self.markings.or(chamber_doc.as_ref().map(|c| c.markings.clone()));
        if r.is_none() {
            v.push("r: missing".into());
        }
        if s.is_none() {
            v.push("s: missing".into());
        }
        if markings.is_none() && command != Command::ExtInvariant {
            v.push("markings: missing".into());
        }
        let (r, s) = (r.unwrap_or(0), s.unwrap_or(0));
        if r < 2 && self.r.is_some() {
            v.push(format!("r: {r} must be at least 2"));
        }
        if s < 2 && self.s.is_some() {
            v.push(format!("s: {s} must be at least 2"));
        }
        let markings = markings.unwrap_or_default();
        if markings.is_empty() && command != Command::ExtInvariant {
            v.push("markings: at least one marking is required".into());
        }
        let mut seen = BTreeSet::new();
        for (i, m) in markings.iter().enumerate() {
            if m.label == 0 {
                v.push(format!("markings[{i}].label: labels must be positive"));
            }
            if !seen.insert(m.label) {
                v.push(format!("markings[{i}].label: duplicate label {}", m.label));
            }
            if r >= 2 && m.a >= r {
                v.push(format!("markings[{i}].a: {} must be below r = {r}", m.a));
            }
            if s >= 2 && m.b >= s {
                v.push(format!("markings[{i}].b: {} must be below s = {s}", m.b));
            }
        }
        if markings.len() > 12 {
            v.push(format!("markings: {} markings exceed the supported 12", markings.len()));
        }

        let dmax_bound = self.dmax.or(chamber_doc.as_ref().map(|c| DmaxBound::PerLabel(c.dmax.clone()))).unwrap_or_default();
        let dmax: BTreeMap<u32, u32> = match &dmax_bound {
            DmaxBound::Uniform(d) => seen.iter().map(|&l| (l, *d)).collect(),
            DmaxBound::PerLabel(map) => {
                for l in map.keys() {
                    if !seen.contains(l) {
                        v.push(format!("dmax.{l}: no marking with this label"));
                    }
                }
                seen.iter().map(|&l| (l, map.get(&l).copied().unwrap_or(0))).collect()
            }
        };

        let insertions = self.insertions.unwrap_or_default();
        for (i, q) in insertions.iter().enumerate() {
            if r >= 2 && (q.a < -1 || q.a >= r as i32) {
                v.push(format!("insertions[{i}].a: {} outside -1..{}", q.a, r as i32 - 1));
            }
            if s >= 2 && (q.b < -1 || q.b >= s as i32) {
                v.push(format!("insertions[{i}].b: {} outside -1..{}", q.b, s as i32 - 1));
            }
        }
        if command == Command::ExtInvariant && insertions.is_empty() {
            v.push("insertions: required for ext-invariant".into());
        }

        let cell = self.cell.as_ref().map(|c| {
            for (l, d) in c {
                if !seen.contains(l) {
                    v.push(format!("cell.{l}: no marking with this label"));
                } else if *d > dmax.get(l).copied().unwrap_or(0) {
                    v.push(format!("cell.{l}: descendent {d} exceeds dmax {}", dmax[l]));
                }
            }
            Cell::new(c.iter().map(|(&l, &d)| (l, d))).expect("map keys are distinct")
        });
        if let Some(c) = &self.cycle {
            if r >= 2 && s >= 2 && (c.a >= r || c.b >= s) {
                v.push(format!("cycle: ({},{}) outside 0..{} x 0..{}", c.a, c.b, r - 1, s - 1));
            }
        }
        match command {
            Command::ChamberCheck if chamber_doc.is_none() => v.push("chamber: required for chamber-check".into()),
            Command::WallcrossApply if group_docs.is_none() => v.push("group: required for wallcross-apply".into()),
            Command::WallcrossConnect if target_doc.is_none() => v.push("target: required for wallcross-connect".into()),
            _ => {}
        }

        if !v.is_empty() {
            return Err(ConfigError { kind: "schema", violations: v });
        }

        let params = ModelParams::new(r, s).map_err(|e| ConfigError::one("schema", e.to_string()))?;
        let set = MarkingSet::new(params, &markings).map_err(|e| ConfigError::one("schema", e.to_string()))?;
        let mut load = |doc: Option<ChamberDoc>, field: &str| -> Option<ChamberIndex<Rational>> {
            let doc = doc?;
            if doc.r != r || doc.s != s || sorted(&doc.markings) != sorted(&markings) {
                v.push(format!("{field}: parameters or markings differ from the job"));
                return None;
            }
            match ChamberIndex::from_doc(&doc) {
                Ok(c) => Some(c),
                Err(e) => {
                    v.push(format!("{field}: {e}"));
                    None
                }
            }
        };
        let chamber = load(chamber_doc, "chamber");
        let target = load(target_doc, "target");
        let group = group_docs.and_then(|g| match GroupElement::from_doc(&set, &g) {
            Ok(g) => Some(g),
            Err(e) => {
                v.push(format!("group: {e}"));
                None
            }
        });
        if !v.is_empty() {
            return Err(ConfigError { kind: "schema", violations: v });
        }
        Ok(Job {
            command,
            markings: set,
            dmax,
            chamber,
            target,
            group,
            insertions,
            convention: self.convention.unwrap_or_default(),
            ramond_rule: self.ramond_rule.unwrap_or_default(),
            cell,
            cycle: self.cycle,
            symmetric: self.symmetric,
            verify: self.verify.unwrap_or_default(),
        })
    }
}

fn sorted(m: &[Marking]) -> Vec<Marking> {
    let mut m = m.to_vec();
    m.sort_unstable();
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolve(text: &str) -> Result<Job, ConfigError> {
        parse_config(text)?.resolve(None, Path::new("."))
    }

    #[test]
    fn valid_three_marking_config() {
        let job = resolve(
            r#"{"r":3,"s":3,"markings":[{"label":1,"a":1,"b":1},{"label":2,"a":1,"b":1},{"label":3,"a":2,"b":2}],"dmax":1,"command":"chamber-build"}"#,
        )
        .unwrap();
        assert_eq!(job.markings.len(), 3);
        assert_eq!(job.dmax.values().copied().collect::<Vec<_>>(), vec![1, 1, 1]);
    }

    #[test]
    fn collects_every_violation() {
        let err = resolve(
            r#"{"r":3,"s":3,"markings":[{"label":1,"a":3,"b":1},{"label":1,"a":1,"b":5}],"command":"amplitude","cell":{"7":0}}"#,
        )
        .unwrap_err();
        let text = err.violations.join("\n");
        assert!(text.contains("markings[0].a"), "{text}");
        assert!(text.contains("duplicate label 1"), "{text}");
        assert!(text.contains("markings[1].b"), "{text}");
        assert!(text.contains("cell.7"), "{text}");
        assert_eq!(err.violations.len(), 4);
    }

    #[test]
    fn unknown_fields_rejected() {
        let err = parse_config(r#"{"r":3,"s":3,"markings":[],"colour":1}"#).unwrap_err();
        assert!(err.violations[0].contains("colour"));
    }

    #[test]
    fn command_conflict() {
        let err = parse_config(r#"{"r":3,"s":3,"markings":[{"label":1,"a":1,"b":1}],"command":"period"}"#)
            .unwrap()
            .resolve(Some(Command::Potential), Path::new("."))
            .unwrap_err();
        assert!(err.violations[0].contains("period"));
    }
}
