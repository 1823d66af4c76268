use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ctlab::cli::{CacheRecord, ComputeOutput};
use ctlab::verify::IdentityResult;

fn ctlab(cache: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ctlab"))
        .args(args)
        .arg("--cache")
        .arg(cache)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn cache_in(dir: &tempfile::TempDir) -> std::path::PathBuf {
    dir.path().join("cache.jsonl")
}

#[test]
fn compute_reports_point_for_seven() {
    let dir = tempfile::tempdir().unwrap();
    let o = ctlab(&cache_in(&dir), &["compute", "7"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("ExpectSolutions(BSD)"));
    assert!(out.contains("(2, -1)"));
}

#[test]
fn compute_json_has_exact_value_and_sha() {
    let dir = tempfile::tempdir().unwrap();
    let o = ctlab(&cache_in(&dir), &["compute", "5", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["S_D"]["numerator"], "1");
    assert_eq!(v["S_D"]["denominator"], "1");
    assert_eq!(v["sha_prediction"], "1");
    assert_eq!(v["verdict"], "NoRationalSolutions");
    let parsed: ComputeOutput = serde_json::from_slice(&o.stdout).unwrap();
    let again = serde_json::to_string(&parsed).unwrap();
    assert_eq!(serde_json::from_str::<ComputeOutput>(&again).unwrap(), parsed);
}

#[test]
fn compute_second_run_comes_from_cache() {
    let dir = tempfile::tempdir().unwrap();
    let cache = cache_in(&dir);
    let first = ctlab(&cache, &["compute", "41", "--json"]);
    let second = ctlab(&cache, &["compute", "41", "--json"]);
    let a: ComputeOutput = serde_json::from_slice(&first.stdout).unwrap();
    let b: ComputeOutput = serde_json::from_slice(&second.stdout).unwrap();
    assert!(a.diagnostics.is_some());
    assert!(b.diagnostics.is_none());
    assert_eq!(a.record, b.record);
    assert_eq!(a.sha_prediction.as_deref(), Some("4"));
    assert_eq!(b.sha_prediction.as_deref(), Some("4"));
}

#[test]
fn validation_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    for d in ["9", "1", "2", "16", "8"] {
        let o = ctlab(&cache_in(&dir), &["compute", d]);
        assert_eq!(o.status.code(), Some(2), "D = {d}");
        assert!(o.stdout.is_empty());
        assert!(stderr(&o).contains("cube-free"), "{}", stderr(&o));
    }
    assert!(!cache_in(&dir).exists());
}

#[test]
fn unknown_suite_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = ctlab(&cache_in(&dir), &["verify", "--suite", "everything"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("siegel-weil"));
}

#[test]
fn verify_siegel_weil_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = ctlab(&cache_in(&dir), &["verify", "--suite", "siegel-weil", "--nmax", "1000", "--json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: Vec<IdentityResult> = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report.len(), 1);
    assert!(report[0].pass);
}

#[test]
fn verify_appendix_for_seven() {
    let dir = tempfile::tempdir().unwrap();
    let o = ctlab(&cache_in(&dir), &["verify", "--suite", "appendix", "--d", "7"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(!stdout(&o).contains("FAIL"));
    assert!(stderr(&o).contains("0 failed"));
}

#[test]
fn search_examples() {
    let dir = tempfile::tempdir().unwrap();
    let c = cache_in(&dir);
    assert_eq!(stdout(&ctlab(&c, &["search", "13", "--height", "10"])).trim(), "(7/3, 2/3)");
    assert_eq!(stdout(&ctlab(&c, &["search", "7", "--height", "1"])).trim(), "(2, -1)");
    let none = ctlab(&c, &["search", "5", "--height", "1000"]);
    assert_eq!(none.status.code(), Some(0));
    assert_eq!(stdout(&none).trim(), "none ≤ 1000");
    let j: serde_json::Value = serde_json::from_slice(&ctlab(&c, &["search", "13", "--height", "10", "--json"]).stdout).unwrap();
    assert_eq!(j["point"]["x"], "7/3");
}

fn csv_rows(out: &str) -> Vec<String> {
    out.lines().skip(1).map(str::to_owned).collect()
}

#[test]
fn table_filters_caches_and_reproduces() {
    let dir = tempfile::tempdir().unwrap();
    let cache = cache_in(&dir);
    let first = ctlab(&cache, &["table", "2", "50"]);
    assert_eq!(first.status.code(), Some(0), "{}", stderr(&first));
    let rows = csv_rows(&stdout(&first));
    let ds: Vec<u64> = rows.iter().map(|r| r.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(ds, [5, 7, 11, 13, 17, 19, 23, 25, 29, 31, 35, 37, 41, 43, 47, 49]);
    let stored = fs::read_to_string(&cache).unwrap();
    assert_eq!(stored.lines().next(), Some(r#"{"format":"ctlab-cache","v":1}"#));
    assert_eq!(stored.lines().count(), 1 + ds.len());

    let second = ctlab(&cache, &["table", "2", "50"]);
    assert_eq!(stdout(&second), stdout(&first));
    assert_eq!(fs::read_to_string(&cache).unwrap(), stored, "rerun must not recompute");

    let fresh = ctlab(&cache, &["table", "2", "50", "--no-cache", "--seed", "7"]);
    assert_eq!(fresh.status.code(), Some(0), "{}", stderr(&fresh));
    assert_eq!(stdout(&fresh), stdout(&first));
    assert_eq!(fs::read_to_string(&cache).unwrap(), stored);
}

#[test]
fn table_json_lines_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let o = ctlab(&cache_in(&dir), &["table", "40", "50", "--json"]);
    let records: Vec<CacheRecord> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records.iter().map(|r| r.d).collect::<Vec<_>>(), [41, 43, 47, 49]);
    for r in &records {
        let back: CacheRecord = serde_json::from_str(&serde_json::to_string(r).unwrap()).unwrap();
        assert_eq!(&back, r);
    }
}

#[test]
fn tampered_cache_is_caught_by_recomputation() {
    let dir = tempfile::tempdir().unwrap();
    let cache = cache_in(&dir);
    ctlab(&cache, &["compute", "5"]);
    let text = fs::read_to_string(&cache).unwrap();
    fs::write(&cache, text.replace(r#""numerator":"1""#, r#""numerator":"4""#)).unwrap();
    let o = ctlab(&cache, &["compute", "5", "--no-cache"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("consistency"), "{}", stderr(&o));
}

#[test]
fn torn_last_line_is_dropped() {
    let dir = tempfile::tempdir().unwrap();
    let cache = cache_in(&dir);
    ctlab(&cache, &["compute", "5"]);
    let mut text = fs::read_to_string(&cache).unwrap();
    text.push_str(r#"{"D":7,"S_D":{"numer"#);
    fs::write(&cache, &text).unwrap();
    let o = ctlab(&cache, &["compute", "7"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let stored = fs::read_to_string(&cache).unwrap();
    assert_eq!(stored.lines().count(), 3);
    for line in stored.lines().skip(1) {
        serde_json::from_str::<CacheRecord>(line).unwrap();
    }
}

#[test]
fn foreign_cache_file_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cache = cache_in(&dir);
    fs::write(&cache, "D,S_D\n5,1\n").unwrap();
    let o = ctlab(&cache, &["compute", "5"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("not a ctlab cache"));
}
