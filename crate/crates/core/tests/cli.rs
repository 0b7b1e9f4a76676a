use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use oblivq::qmath::ComplexMatrix;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_oblivq"))
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn run(file: &Path, out: &Path, extra: &[&str]) -> Output {
    bin().arg("run").arg(file).arg("--out").arg(out).args(extra).output().expect("binary runs")
}

fn summary(dir: &Path) -> Vec<(String, String)> {
    let text = fs::read_to_string(dir.join("summary.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("key,value"));
    lines.map(|l| {
        let (k, v) = l.split_once(',').unwrap();
        (k.to_string(), v.to_string())
    })
    .collect()
}

fn value(rows: &[(String, String)], key: &str) -> f64 {
    rows.iter().find(|(k, _)| k == key).unwrap_or_else(|| panic!("no `{key}` row")).1.parse().unwrap()
}

fn write_variant(dir: &Path, base: &str, edit: impl FnOnce(&mut serde_json::Value)) -> PathBuf {
    let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(scenario(base)).unwrap()).unwrap();
    edit(&mut v);
    let path = dir.join(format!("variant-{base}"));
    fs::write(&path, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    path
}

#[test]
fn every_golden_scenario_validates() {
    for entry in fs::read_dir(Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")).unwrap() {
        let path = entry.unwrap().path();
        let out = bin().arg("validate").arg(&path).output().unwrap();
        assert_eq!(out.status.code(), Some(0), "{}: {}", path.display(), String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn dbqc_golden_matches_oracle_and_reruns_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let out = run(&scenario("dbqc.json"), dir, &["--seed", "7", "--shots", "10000"]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for file in ["records.jsonl", "summary.csv"] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file} differs");
    }
    let rows = summary(&a);
    let (est, se) = (value(&rows, "estimate"), value(&rows, "stderr"));
    // Oracle: |<+| H RY(0.7) |0>|^2 computed independently.
    let psi = &(&oblivq::qmath::gates::h() * &oblivq::qmath::gates::ry(0.7)) * &ComplexMatrix::basis(2, 0);
    let plus = ComplexMatrix::column(&[oblivq::C64::new(0.5f64.sqrt(), 0.0); 2]);
    let oracle = plus.inner_product(&psi).norm_sqr();
    assert!((value(&rows, "oracle") - oracle).abs() < 1e-12);
    assert!((est - oracle).abs() <= 3.0 * se, "{est} vs {oracle} (stderr {se})");
    assert_eq!(value(&rows, "oqt_ops"), 2.0);
    assert_eq!(fs::read_to_string(a.join("records.jsonl")).unwrap().lines().count(), 10_000);
}

#[test]
fn one_shot_gives_one_record() {
    let tmp = tempfile::tempdir().unwrap();
    for name in ["dbqc.json", "knit_exact.json", "knit_sampled.json", "channel_compose.json", "pingpong.json"] {
        let dir = tmp.path().join(name);
        let out = run(&scenario(name), &dir, &["--shots", "1"]);
        assert_eq!(out.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&out.stderr));
        assert_eq!(fs::read_to_string(dir.join("records.jsonl")).unwrap().lines().count(), 1, "{name}");
    }
}

#[test]
fn resolved_scenario_carries_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&scenario("oqt_sequence.json"), tmp.path(), &["--seed", "99", "--shots", "12", "--tolerance", "1e-6"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("resolved-scenario.json")).unwrap()).unwrap();
    assert_eq!(v["seed"], 99);
    assert_eq!(v["shots"], 12);
    assert_eq!(v["tolerance"], 1e-6);
}

#[test]
fn knit_exact_equals_direct_simulation() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&scenario("knit_exact.json"), tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(0));
    let rows = summary(tmp.path());
    assert!((value(&rows, "estimate") - value(&rows, "oracle")).abs() <= 1e-10);
    assert_eq!(value(&rows, "overhead"), 16.0);
}

#[test]
fn undeclared_ebit_is_semantic() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_variant(tmp.path(), "dbqc.json", |v| v["protocol"]["ebit"] = "missing".into());
    assert_eq!(bin().arg("validate").arg(&path).output().unwrap().status.code(), Some(4));
    assert_eq!(run(&path, &tmp.path().join("o"), &[]).status.code(), Some(4));
    assert!(!tmp.path().join("o").exists());
}

#[test]
fn non_unitary_gate_is_schema() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_variant(tmp.path(), "dbqc.json", |v| {
        v["gates"]["ua"] = serde_json::json!({ "matrix": [[[1.0, 0.0], [1.0, 0.0]], [[0.0, 0.0], [1.0, 0.0]]] });
    });
    let out = bin().arg("validate").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gates.ua"));
}

#[test]
fn malformed_text_is_parse_error() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.json");
    fs::write(&path, "{ \"version\": 1, ").unwrap();
    assert_eq!(bin().arg("validate").arg(&path).output().unwrap().status.code(), Some(2));
}

#[test]
fn unknown_field_is_schema_error() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_variant(tmp.path(), "dbqc.json", |v| v["colour"] = "blue".into());
    assert_eq!(bin().arg("validate").arg(&path).output().unwrap().status.code(), Some(3));
}

#[test]
fn capacity_overflow_exits_five() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_variant(tmp.path(), "knit_exact.json", |v| v["capacity"] = 4.into());
    assert_eq!(run(&path, &tmp.path().join("o"), &[]).status.code(), Some(5));
}

#[test]
fn unwritable_output_exits_six() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "").unwrap();
    assert_eq!(run(&scenario("channel_compose.json"), &blocker.join("sub"), &["--shots", "3"]).status.code(), Some(6));
}

#[test]
fn validate_only_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("o");
    let out = run(&scenario("triparty_i.json"), &dir, &["--validate-only"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(!dir.exists());
}

#[test]
fn environment_does_not_override_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin()
        .arg("run")
        .arg(scenario("channel_compose.json"))
        .args(["--seed", "5", "--out"])
        .arg(tmp.path())
        .env("OBLIVQ_SEED", "6")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(fs::read_to_string(tmp.path().join("summary.csv")).unwrap().contains("seed,5\n"));
}
