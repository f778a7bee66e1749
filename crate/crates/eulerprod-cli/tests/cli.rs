//! End-to-end checks of the binary: exit codes, JSON output, cache
//! round trips, and the documented CSV headers. Everything runs at t<=2
//! so the whole file stays fast.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_eulerprod")
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("eulerprod-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(bin())
        .args(args)
        .arg("--out")
        .arg(dir.join("out"))
        .arg("--cache-dir")
        .arg(dir.join("cache"))
        .output()
        .expect("binary must run")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).to_string()
}

#[test]
fn predict_slope_reference_value() {
    let dir = tmp_dir("predict");
    let out = run(&["predict", "--t", "3", "--alpha", "0.5", "--what", "slope"], &dir);
    assert!(out.status.success());
    let first_line = stdout(&out).lines().next().unwrap().to_string();
    let v: serde_json::Value = serde_json::from_str(&first_line).unwrap();
    let value = v["value"].as_f64().unwrap();
    assert!((value - 1.1101355).abs() < 1e-6, "slope {value}");
}

#[test]
fn predict_other_quantities() {
    let dir = tmp_dir("predict2");
    for (what, extra, expect) in [
        ("threshold", vec![], 3.3304065f64),
        ("beta-c", vec![], 2.5118521),
        ("barrier-upper", vec!["--y", "2", "--k", "0"], 4.7320508),
    ] {
        let mut args = vec!["predict", "--t", "3", "--alpha", "0.5", "--what", what];
        args.extend(extra);
        let out = run(&args, &dir);
        assert!(out.status.success(), "{what}: {}", String::from_utf8_lossy(&out.stderr));
        let first_line = stdout(&out).lines().next().unwrap().to_string();
        let v: serde_json::Value = serde_json::from_str(&first_line).unwrap();
        let value = v["value"].as_f64().unwrap();
        assert!((value - expect).abs() < 1e-6, "{what}: {value} vs {expect}");
    }
}

#[test]
fn unknown_flag_exits_2_with_usage() {
    let dir = tmp_dir("usage");
    let out = run(&["predict", "--bogus-flag"], &dir);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr).to_lowercase();
    assert!(err.contains("usage"), "stderr: {err}");
}

#[test]
fn config_validation_exit_codes() {
    let dir = tmp_dir("config");
    // alpha outside (0,1) is a configuration error: exit 2.
    let bad = dir.join("bad.conf");
    std::fs::write(&bad, "t = 3\nalpha = 1.5\n").unwrap();
    let out = run(&["predict", "--config", bad.to_str().unwrap(), "--what", "slope"], &dir);
    assert_eq!(out.status.code(), Some(2));

    // Non-integer t rejected at parse.
    std::fs::write(&bad, "t = 2.5\n").unwrap();
    let out = run(&["predict", "--config", bad.to_str().unwrap(), "--what", "slope"], &dir);
    assert_eq!(out.status.code(), Some(2));

    // Exact mode beyond the cap: exit 2.
    let out = run(&["sieve", "--t", "4", "--mode", "exact-prime"], &dir);
    assert_eq!(out.status.code(), Some(2));

    // A good config file works, flags override it.
    std::fs::write(&bad, "t = 2\nalpha = 0.5\nseed = 9\n").unwrap();
    let out = run(&["predict", "--config", bad.to_str().unwrap(), "--what", "slope"], &dir);
    assert!(out.status.success());
}

#[test]
fn sieve_writes_and_validates_cache() {
    let dir = tmp_dir("sieve");
    let out = run(&["sieve", "--t", "2", "--mertens", "1000,10000"], &dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.join("cache").join("bands-t2-exact-prime.bin").exists());

    let out = run(&["sieve", "--t", "2", "--validate"], &dir);
    assert!(out.status.success());
    assert!(stdout(&out).contains("valid"));

    // Summary JSON conforms to the shipped schema's required keys.
    let summary_path = dir.join("out").join("sieve-summary.json");
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&summary_path).unwrap()).unwrap();
    let schema: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(
            Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/schemas/summary.schema.json"),
        )
        .unwrap(),
    )
    .unwrap();
    for key in schema["required"].as_array().unwrap() {
        let key = key.as_str().unwrap();
        assert!(!summary[key].is_null(), "summary missing required key {key}");
    }
    for key in schema["properties"]["config"]["required"].as_array().unwrap() {
        let key = key.as_str().unwrap();
        assert!(!summary["config"][key].is_null(), "config missing required key {key}");
    }
    // Manifest is appended, one JSON object per line.
    let manifest = std::fs::read_to_string(dir.join("out").join("manifest.jsonl")).unwrap();
    assert!(manifest.lines().count() >= 2);
    for line in manifest.lines() {
        let entry: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(entry["schema"], "eulerprod-manifest-v1");
    }
}

#[test]
fn cov_builds_cache_and_dumps_csv() {
    let dir = tmp_dir("cov");
    let out = run(&["cov", "--t", "2", "--csv", "--band", "1"], &dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.join("out").join("cov-lags.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "lag_index,delta_h,value");
    // lag 0 of band 1 is the band-1 variance 0.4220113.
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[0], "0");
    let v: f64 = first[2].parse().unwrap();
    assert!((v - 0.4220113).abs() < 1e-6);
}

#[test]
fn sample_tail_counts_hitting_paircorr_run() {
    let dir = tmp_dir("pipeline");
    let base = ["--t", "2", "--alpha", "0.5", "--seed", "11"];

    let mut args = vec!["sample", "--n", "64", "--dump"];
    args.extend(base);
    let out = run(&args, &dir);
    assert!(out.status.success(), "sample: {}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.join("out").join("samples.csv")).unwrap();
    assert!(csv.starts_with("sample_id,h_index,value"));

    let mut args = vec!["tail", "--y-grid", "0,0.5,1", "--n", "10000"];
    args.extend(base);
    let out = run(&args, &dir);
    assert!(out.status.success(), "tail: {}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.join("out").join("tail.csv")).unwrap();
    assert!(csv.starts_with("y,threshold,hits,n,p_hat,ci_lo,ci_hi,predicted_shape,dropped"));

    let mut args = vec!["counts", "--y", "0", "--delta", "1", "--n", "2000"];
    args.extend(base);
    let out = run(&args, &dir);
    assert!(out.status.success(), "counts: {}", String::from_utf8_lossy(&out.stderr));

    let mut args = vec!["hitting", "--y", "0", "--n", "2000"];
    args.extend(base);
    let out = run(&args, &dir);
    assert!(out.status.success(), "hitting: {}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.join("out").join("hitting-summary.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(summary["payload"]["partition_exact"], true);

    let mut args = vec!["paircorr", "--y", "0", "--n", "10000"];
    args.extend(base);
    let out = run(&args, &dir);
    assert!(out.status.success(), "paircorr: {}", String::from_utf8_lossy(&out.stderr));

    let mut args = vec!["moments", "--a-list", "1,2", "--n", "2000"];
    args.extend(base);
    let out = run(&args, &dir);
    assert!(out.status.success(), "moments: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn ballot_sweep_from_file() {
    let dir = tmp_dir("ballot");
    let sweep = dir.join("sweep.conf");
    std::fs::write(
        &sweep,
        "kind = upper-a2\nj=8 a=0.2 b0=2 x=1.8 delta=1\nj=16 a=0.2 b0=2 x=2.6 delta=1\n",
    )
    .unwrap();
    let out = run(&["ballot", "--sweep", sweep.to_str().unwrap(), "--mc", "2000"], &dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.join("out").join("ballot-sweep.csv")).unwrap();
    assert!(csv.starts_with("j,a,b0,x,delta,dp,mc,mc_stderr,envelope,ratio"));
    assert_eq!(csv.lines().count(), 3);

    // A malformed sweep file is a config error.
    std::fs::write(&sweep, "j=8 a=0.2\n").unwrap();
    let out = run(&["ballot", "--sweep", sweep.to_str().unwrap()], &dir);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn report_smoke_suite_passes() {
    let dir = tmp_dir("report");
    let out = run(&["report", "--suite", "smoke"], &dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("PASS"));
    assert!(!text.contains("FAIL"));

    let out = run(&["report", "--suite", "bogus"], &dir);
    assert_eq!(out.status.code(), Some(2));
}
