use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rap::io::write_snapshots_jsonl;
use rap::packer::{checkpoint_grid, Checkpoint, SnapshotSeries};
use rap::Order;
use serde_json::Value;

fn rap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rap"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn rap_ok(args: &[&str]) -> String {
    let out = rap(args);
    assert!(
        out.status.success(),
        "rap {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/packing_d2_n10000.csv")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn simulate_writes_one_packing_per_replica() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.ini");
    fs::write(&cfg, "[run]\ndim = 2\nside = 1\nn = 1e4\nseed = 11\n").unwrap();
    let out = dir.path().join("a");
    rap_ok(&["simulate", "--config", s(&cfg), "--out", s(&out)]);
    let csv = fs::read_to_string(out.join("packing_seed11.csv")).unwrap();
    assert_eq!(csv.lines().count(), 10_000 + 3);
    let manifest = read_json(&out.join("manifest.json"));
    assert_eq!(manifest["seeds"], serde_json::json!([11]));
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    assert!(manifest["threads"].as_u64().unwrap() >= 1);
}

#[test]
fn manifest_rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    rap_ok(&["simulate", "--dim", "3", "--side", "2", "--n", "3000", "--replicas", "2", "--seed", "4", "--out", s(&a)]);
    rap_ok(&["simulate", "--manifest", s(&a.join("manifest.json")), "--out", s(&b)]);
    for name in ["packing_seed4.csv", "packing_seed5.csv", "snapshots_seed4.jsonl", "snapshots_seed5.jsonl"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let err = rap(&["simulate", "--manifest", s(&a.join("manifest.json")), "--n", "10", "--out", s(&b)]);
    assert!(!err.status.success());
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let run = |threads: &str, out: &Path| {
        let status = Command::new(env!("CARGO_BIN_EXE_rap"))
            .env("RAP_THREADS", threads)
            .args(["simulate", "--n", "2000", "--replicas", "3", "--out", s(out)])
            .output()
            .unwrap();
        assert!(status.status.success());
    };
    let (a, b) = (dir.path().join("one"), dir.path().join("three"));
    run("1", &a);
    run("3", &b);
    for k in 0..3 {
        let name = format!("snapshots_seed{k}.jsonl");
        assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap());
    }
    assert_eq!(read_json(&b.join("manifest.json"))["threads"], 3);
}

#[test]
fn replicas_get_distinct_seed_stamped_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r");
    rap_ok(&["simulate", "--n", "500", "--replicas", "8", "--seed", "100", "--out", s(&out)]);
    let mut contents = Vec::new();
    for seed in 100..108 {
        contents.push(fs::read(out.join(format!("packing_seed{seed}.csv"))).unwrap());
    }
    contents.sort();
    contents.dedup();
    assert_eq!(contents.len(), 8);
}

#[test]
fn probe_fixture_with_three_models() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p");
    let stdout = rap_ok(&["probe", "--packing", s(&fixture()), "--count", "2e5", "--models", "ud,it,affine", "--out", s(&out)]);
    assert!(stdout.contains("IT"));
    let probe = fs::read_to_string(out.join("probe.csv")).unwrap();
    assert_eq!(probe.lines().next().unwrap(), "ln_r_bin_center,density");
    assert_eq!(probe.lines().count(), 1 + 256);
    let cmp = fs::read_to_string(out.join("comparison.csv")).unwrap();
    assert_eq!(cmp.lines().next().unwrap(), "ln_r_bin_center,empirical,UD,IT,affine");
    assert!(cmp.lines().skip(1).all(|l| l.split(',').count() == 5));
    let ks = read_json(&out.join("comparison.json"))["ks"].clone();
    assert!(ks["IT"].as_f64().unwrap() < ks["affine"].as_f64().unwrap());
    let side = read_json(&out.join("probe.json"));
    assert_eq!(side["attempts"], 200_000);

    let again = dir.path().join("q");
    rap_ok(&["probe", "--manifest", s(&out.join("manifest.json")), "--out", s(&again)]);
    for name in ["probe.csv", "comparison.csv", "comparison.json", "probe.json"] {
        assert_eq!(fs::read(out.join(name)).unwrap(), fs::read(again.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn probe_count_defaults_to_one_million() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p");
    rap_ok(&["probe", "--packing", s(&fixture()), "--models", "it", "--out", s(&out)]);
    assert_eq!(read_json(&out.join("probe.json"))["attempts"], 1_000_000);
}

#[test]
fn malformed_packing_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "dim,side,seed\n2,1,0\nx1,x2,r\n0.5,0.5,0.1\n0.2,oops,0.1\n").unwrap();
    let out = rap(&["probe", "--packing", s(&bad), "--out", s(&dir.path().join("p"))]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 5"), "{err}");
}

#[test]
fn solve_single_and_all() {
    let one: Value = serde_json::from_str(rap_ok(&["solve", "--model", "it", "--dim", "2"]).trim()).unwrap();
    assert!((one["lambda1"].as_f64().unwrap() - 0.3614).abs() < 5e-5);
    assert_eq!(one["model"], "IT");

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("table.json");
    rap_ok(&["solve", "--all", "--out", s(&path)]);
    let table = read_json(&path);
    assert_eq!(table["solutions"].as_array().unwrap().len(), 6);
    assert_eq!(table["reference"].as_array().unwrap().len(), 3);

    let bad = rap(&["solve", "--model", "it", "--dim", "5"]);
    assert_eq!(bad.status.code(), Some(2));
}

/// Uniform in `[0, 1)` from a splitmix64 hash of `x`.
fn unit(x: u64) -> f64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    (z ^ (z >> 31)) as f64 / 2f64.powi(64)
}

/// Replicas whose `M_1` grows with local exponent `lambda + b (ln n)^c`.
fn synthetic_ensemble(dir: &Path, replicas: u64, truth: (f64, f64, f64)) {
    let (l, b, c) = truth;
    for k in 0..replicas {
        let checkpoints = checkpoint_grid(1_000_000, 32)
            .into_iter()
            .filter(|&n| n >= 10)
            .enumerate()
            .map(|(i, n)| {
                let u = (n as f64).ln();
                let ln_m = l * u + b * u.powf(c + 1.0) / (c + 1.0);
                let wobble = 1.0 + 1e-3 * (unit(k * 1_000_003 + i as u64) - 0.5);
                Checkpoint {
                    n,
                    moments: [(Order::ONE, ln_m.exp() * wobble)].into_iter().collect(),
                    pore: (n as f64).powf(-0.3) * wobble,
                    attempts: n,
                    hist: None,
                    radii: None,
                }
            })
            .collect();
        let mut buf = Vec::new();
        write_snapshots_jsonl(&SnapshotSeries { checkpoints }, &mut buf).unwrap();
        fs::write(dir.join(format!("snapshots_seed{k}.jsonl")), buf).unwrap();
    }
}

#[test]
fn fit_recovers_synthetic_exponent() {
    let dir = tempfile::tempdir().unwrap();
    let truth = (0.361, -0.5, -1.2);
    synthetic_ensemble(dir.path(), 6, truth);
    let out = dir.path().join("fit");
    rap_ok(&["fit", "--snapshots", s(dir.path()), "--dim", "2", "--alphas", "1,2", "--out", s(&out)]);
    let f = read_json(&out.join("fit_alpha1.json"));
    assert_eq!(f["alpha"], 1);
    let (lambda, sigma) = (f["lambda"].as_f64().unwrap(), f["sigma"].as_f64().unwrap());
    assert!((lambda - truth.0).abs() < 3.0 * sigma + 1e-3, "{lambda} +/- {sigma}");
    assert!(f["window"][0].as_u64().unwrap() >= 1000);
    let pore = read_json(&out.join("fit_alpha2.json"));
    assert!((pore["lambda"].as_f64().unwrap() + 0.3).abs() < 0.01);
    assert!(out.join("likelihood_alpha1.json").exists());
}

#[test]
fn fit_reports_missing_alpha() {
    let dir = tempfile::tempdir().unwrap();
    synthetic_ensemble(dir.path(), 2, (0.361, -0.5, -1.2));
    let out = rap(&["fit", "--snapshots", s(dir.path()), "--dim", "2", "--alphas", "1.5"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("available orders: 1"), "{err}");
}

#[test]
fn fit_rejects_mismatched_grids() {
    let dir = tempfile::tempdir().unwrap();
    synthetic_ensemble(dir.path(), 2, (0.361, -0.5, -1.2));
    let path = dir.path().join("snapshots_seed1.jsonl");
    let text = fs::read_to_string(&path).unwrap();
    let shorter: Vec<&str> = text.lines().take(50).collect();
    fs::write(&path, shorter.join("\n")).unwrap();
    let out = rap(&["fit", "--snapshots", s(dir.path()), "--dim", "2"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("aggregation"));
}

#[test]
fn report_bundles_solved_and_fitted() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    rap_ok(&["simulate", "--n", "2e4", "--replicas", "3", "--out", s(&sim)]);
    let out = dir.path().join("rep");
    let md = rap_ok(&["report", "--snapshots", s(&sim), "--alphas", "1", "--out", s(&out)]);
    assert!(md.contains("| IT | 2.5660 |"));
    let rep = read_json(&out.join("report.json"));
    assert_eq!(rep["solved"].as_array().unwrap().len(), 2);
    assert!(rep["cdf_slope"]["gamma"].is_number());
    assert_eq!(rep["radius_cdf"][0][1], 20_000.0);
}
