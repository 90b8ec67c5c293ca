use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn grazing(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_grazing")).args(args).env("RUST_LOG", "warn").output().expect("run grazing")
}

fn out_arg(dir: &Path) -> String {
    dir.display().to_string()
}

#[test]
fn validate_passes_at_desk_scale() {
    let dir = tempfile::tempdir().unwrap();
    let o = grazing(&["validate", "--n", "2", "--out", &out_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let csv = fs::read_to_string(dir.path().join("validate.csv")).unwrap();
    assert!(csv.starts_with("# version="));
    assert!(csv.contains("config_hash="));
    assert!(!csv.contains(",FAIL,"));
}

#[test]
fn corrupt_cache_fails_only_the_cache_check() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    fs::create_dir_all(&cache).unwrap();
    fs::write(cache.join("validate_modes_n1.bin"), b"not a mode table").unwrap();
    let o = grazing(&["validate", "--n", "2", "--out", &out_arg(dir.path()), "--cache", &out_arg(&cache)]);
    assert_eq!(o.status.code(), Some(1));
    let csv = fs::read_to_string(dir.path().join("validate.csv")).unwrap();
    let failed: Vec<&str> = csv.lines().filter(|l| l.contains(",FAIL,")).collect();
    assert_eq!(failed.len(), 1);
    assert!(failed[0].starts_with("cache.validation"));
}

#[test]
fn non_integrable_gamma_skips_mode_checks() {
    let dir = tempfile::tempdir().unwrap();
    let o = grazing(&["validate", "--n", "2", "--out", &out_arg(dir.path()), "--set", "gamma=-3"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("validate.csv")).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("modes.symmetry,SKIP,NON_INTEGRABLE")));
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = grazing(&["modes", "--out", &out_arg(dir.path()), "--set", "colour=blue"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown key"));
}

#[test]
fn single_epsilon_reports_nan_slopes() {
    let dir = tempfile::tempdir().unwrap();
    let o = grazing(&["grazing-study", "--n", "1", "--eps", "0.1", "--out", &out_arg(dir.path()), "--set", "kind=rescaled"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("single epsilon"));
    let slopes = fs::read_to_string(dir.path().join("grazing_slopes.csv")).unwrap();
    assert_eq!(slopes.lines().filter(|l| l.ends_with(",NaN")).count(), 3);
}

#[test]
fn modes_writes_sorted_table_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "kind = cutoff\nn = 1\n").unwrap();
    let o = grazing(&["modes", "--config", &out_arg(&cfg), "--out", &out_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(0));
    let table = fs::read_to_string(dir.path().join("modes.csv")).unwrap();
    let rows: Vec<&str> = table.lines().skip(2).collect();
    assert!(!rows.is_empty() && rows.len() <= 30);
}

#[test]
fn boltzmann_fast_relaxation_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = grazing(&["relax", "--n", "2", "--evaluator", "fast", "--out", &out_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
}
