use std::path::{Path, PathBuf};
use std::process::Command;

use fjrw_core::chamber::{ChamberDoc, ChamberIndex};
use fjrw_core::spin::{Marking, MarkingSet, ModelParams};
use fjrw_core::wallcross::{act_on_chamber, random_element};
use fjrw_core::Rational;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tempfile::TempDir;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

impl Run {
    fn json(&self) -> Value {
        serde_json::from_str(&self.stdout).expect("stdout is JSON")
    }
}

fn fjrw(command: &str, config: &Path, extra: &[&str], env: &[(&str, &str)]) -> Run {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fjrw"));
    cmd.arg(command).arg("--config").arg(config).args(extra);
    for (k, v) in env {
        cmd.env(k, v);
    }
    let out = cmd.output().expect("binary runs");
    Run {
        code: out.status.code().expect("exit code"),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn write(dir: &TempDir, name: &str, v: &Value) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, serde_json::to_string(v).unwrap()).unwrap();
    path
}

fn reference() -> Value {
    json!({
        "r": 3, "s": 3,
        "markings": [{"label": 1, "a": 1, "b": 1}, {"label": 2, "a": 1, "b": 1}, {"label": 3, "a": 2, "b": 2}],
        "dmax": 1
    })
}

#[test]
fn amplitude_of_two_markings() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "a.json",
        &json!({"r": 3, "s": 3, "markings": [{"label": 1, "a": 1, "b": 1}, {"label": 2, "a": 1, "b": 1}], "cell": {"1": 0, "2": 0}}),
    );
    let run = fjrw("amplitude", &cfg, &[], &[]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    assert_eq!(run.json(), json!({"A": "1"}));
}

#[test]
fn ext_invariant_three_point() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "e.json",
        &json!({"r": 3, "s": 3, "insertions": [{"a": -1, "b": -1, "d": 0}, {"a": 1, "b": 1, "d": 0}, {"a": 1, "b": 1, "d": 0}]}),
    );
    let run = fjrw("ext-invariant", &cfg, &[], &[]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    assert_eq!(run.json()["value"], "1");
    assert_eq!(run.json()["convention"], "open-ms");
}

#[test]
fn unsupported_invariant_is_reported() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "e.json",
        &json!({"r": 3, "s": 3, "insertions": [{"a": -1, "b": 1, "d": 0}, {"a": 1, "b": -1, "d": 0}, {"a": 2, "b": 2, "d": 0}, {"a": 2, "b": 2, "d": 0}]}),
    );
    let run = fjrw("ext-invariant", &cfg, &[], &[]);
    if run.code != 0 {
        assert_eq!(run.code, 2);
        assert_eq!(run.json()["unsupported"], true);
    }
}

#[test]
fn verify_reference_config() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "v.json", &reference());
    let run = fjrw("verify", &cfg, &[], &[]);
    assert_eq!(run.code, 0, "{}", run.stdout);
    let doc = run.json();
    assert_eq!(doc["passed"], true);
    assert_eq!(doc["checks"].as_object().unwrap().len(), 11);
}

#[test]
fn output_is_deterministic_and_thread_independent() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "v.json", &reference());
    let a = fjrw("verify", &cfg, &[], &[]);
    let b = fjrw("verify", &cfg, &[], &[("FJRW_THREADS", "1")]);
    assert_eq!(a.stdout, b.stdout);
    let p1 = fjrw("period", &cfg, &[], &[("FJRW_THREADS", "3")]);
    let p2 = fjrw("period", &cfg, &[], &[]);
    assert_eq!(p1.stdout, p2.stdout);
}

#[test]
fn schema_violations_exit_2() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "bad.json",
        &json!({"r": 3, "s": 3, "markings": [{"label": 1, "a": 3, "b": 1}, {"label": 1, "a": 0, "b": 0}]}),
    );
    let run = fjrw("chamber-build", &cfg, &[], &[]);
    assert_eq!(run.code, 2);
    let violations = run.json()["violations"].as_array().unwrap().clone();
    assert!(violations.iter().any(|v| v.as_str().unwrap().contains("markings[0].a")));
    assert!(violations.iter().any(|v| v.as_str().unwrap().contains("duplicate label 1")));
    assert!(run.stderr.contains("markings[0].a"));

    let unknown = write(&dir, "unknown.json", &json!({"r": 3, "s": 3, "markings": [], "extra": 1}));
    assert_eq!(fjrw("chamber-build", &unknown, &[], &[]).code, 2);
    let garbage = dir.path().join("garbage.json");
    std::fs::write(&garbage, "{ not json").unwrap();
    assert_eq!(fjrw("chamber-build", &garbage, &[], &[]).code, 2);
}

#[test]
fn chamber_build_check_and_perturbation() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.json", &json!({"r": 3, "s": 3, "markings": [{"label": 1, "a": 1, "b": 1}], "dmax": 1}));
    let out = dir.path().join("chamber.json");
    let run = fjrw("chamber-build", &cfg, &["--out", out.to_str().unwrap()], &[]);
    assert_eq!(run.code, 0);
    assert!(run.stdout.is_empty());
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.contains("\"-3/2\""));

    let check = write(&dir, "check.json", &json!({"chamber_file": "chamber.json"}));
    let run = fjrw("chamber-check", &check, &[], &[]);
    assert_eq!(run.code, 0, "{}", run.stdout);
    assert_eq!(run.json()["passed"], true);

    let mut doc: Value = serde_json::from_str(&text).unwrap();
    for e in doc["entries"].as_array_mut().unwrap() {
        if e["value"] == "-3/2" {
            e["value"] = json!("7");
        }
    }
    write(&dir, "perturbed.json", &doc);
    let check = write(&dir, "check2.json", &json!({"chamber_file": "perturbed.json"}));
    let run = fjrw("chamber-check", &check, &[], &[]);
    assert_eq!(run.code, 1);
    assert!(!run.json()["violations"].as_array().unwrap().is_empty());
}

#[test]
fn connect_then_apply_reaches_target() {
    let params = ModelParams::new(3, 3).unwrap();
    let marks = vec![Marking { label: 1, a: 1, b: 1 }, Marking { label: 2, a: 1, b: 1 }, Marking { label: 3, a: 2, b: 2 }];
    let set = MarkingSet::new(params, &marks).unwrap();
    let dmax = set.twists().keys().map(|&l| (l, 1)).collect();
    let nu = ChamberIndex::<Rational>::build_minimal(set.clone(), dmax).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let g = random_element::<Rational, _>(&set, nu.dmax(), 4, &mut rng).unwrap();
    let target = act_on_chamber(&g, &nu).unwrap();

    let dir = TempDir::new().unwrap();
    write(&dir, "target.json", &serde_json::to_value(target.to_doc()).unwrap());
    let mut cfg = reference();
    cfg["target_file"] = json!("target.json");
    let cfg = write(&dir, "connect.json", &cfg);
    let group = dir.path().join("group.json");
    let run = fjrw("wallcross-connect", &cfg, &["--out", group.to_str().unwrap()], &[]);
    assert_eq!(run.code, 0, "{}", run.stderr);

    let mut cfg = reference();
    cfg["group_file"] = json!("group.json");
    let cfg = write(&dir, "apply.json", &cfg);
    let run = fjrw("wallcross-apply", &cfg, &[], &[]);
    assert_eq!(run.code, 0, "{}", run.stdout);
    let moved: ChamberDoc = serde_json::from_value(run.json()["chamber"].clone()).unwrap();
    assert_eq!(ChamberIndex::<Rational>::from_doc(&moved).unwrap(), target);
    assert_eq!(run.json()["preservation"]["passed"], true);
}

#[test]
fn period_keeps_negative_exponents() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "p.json", &reference());
    let run = fjrw("period", &cfg, &[], &[]);
    assert_eq!(run.code, 0);
    let doc = run.json();
    let exps: Vec<i64> = doc["cycles"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|c| c["series"].as_array().unwrap().iter().map(|t| t["hbar"].as_i64().unwrap()))
        .collect();
    assert!(exps.iter().any(|&e| e < -1));
    assert_eq!(doc["cycles"].as_array().unwrap().len(), 9);
}

#[test]
fn symmetric_potential_and_flat_head() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "s.json",
        &json!({
            "r": 3, "s": 3,
            "markings": [{"label": 1, "a": 1, "b": 1}, {"label": 2, "a": 1, "b": 1}, {"label": 3, "a": 0, "b": 1}],
            "dmax": 1, "symmetric": true
        }),
    );
    let run = fjrw("potential", &cfg, &[], &[]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    assert!(run.stdout.contains("t[1,1,0]"));
    let run = fjrw("period", &cfg, &[], &[]);
    for c in run.json()["cycles"].as_array().unwrap() {
        if let Some(h) = c.get("flat_head") {
            assert_eq!(h["holds"], true, "{c}");
        }
    }
}

#[test]
fn chamber_doc_round_trip() {
    let params = ModelParams::new(3, 4).unwrap();
    let marks = vec![Marking { label: 2, a: 1, b: 2 }, Marking { label: 5, a: 2, b: 3 }];
    let set = MarkingSet::new(params, &marks).unwrap();
    let nu = ChamberIndex::<Rational>::build_minimal(set, [(2, 1), (5, 2)].into_iter().collect()).unwrap();
    let text = serde_json::to_string(&nu.to_doc()).unwrap();
    let back: ChamberDoc = serde_json::from_str(&text).unwrap();
    assert_eq!(ChamberIndex::<Rational>::from_doc(&back).unwrap(), nu);
}
