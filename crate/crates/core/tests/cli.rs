//! The `trawlkit` binary end to end.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn trawlkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trawlkit")).args(args).env_remove("TRAWLKIT_MASTER_SEED").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_writes_integer_csv_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p.csv");
    let args = [
        "simulate",
        "--seed",
        "poisson",
        "--trawl",
        "power-law:alpha=1.5",
        "--n",
        "1000",
        "--master-seed",
        "42",
        "--out",
        path_str(&out),
    ];
    let o = trawlkit(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("k,x"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 1000);
    for (i, row) in rows.iter().enumerate() {
        let (k, x) = row.split_once(',').unwrap();
        assert_eq!(k.parse::<usize>().unwrap(), i + 1);
        let x: f64 = x.parse().unwrap();
        assert!(x >= 0.0 && x.fract() == 0.0, "{row}");
    }
    let side: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("p.json")).unwrap()).unwrap();
    assert_eq!(side["master_seed"], 42);
    assert_eq!(side["n"], 1000);
    assert!(side["theoretical_mean"].as_f64().unwrap() > 0.0);

    // rerun is byte-identical
    let again = dir.path().join("q.csv");
    let mut args2 = args;
    args2[10] = path_str(&again);
    assert_eq!(code(&trawlkit(&args2)), 0);
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn master_seed_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, env: Option<&str>| {
        let out = dir.path().join(name);
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_trawlkit"));
        cmd.args(["simulate", "--seed", "bm", "--trawl", "geometric:a=0.5", "--n", "50", "--out", path_str(&out)]);
        match env {
            Some(v) => cmd.env("TRAWLKIT_MASTER_SEED", v),
            None => cmd.env_remove("TRAWLKIT_MASTER_SEED"),
        };
        assert!(cmd.status().unwrap().success());
        std::fs::read_to_string(out).unwrap()
    };
    let a = run("a.csv", Some("9"));
    let b = run("b.csv", Some("9"));
    let c = run("c.csv", None);
    assert_eq!(a, b);
    assert_ne!(a, c);
    let side: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("a.json")).unwrap()).unwrap();
    assert_eq!(side["master_seed"], 9);
}

#[test]
fn invalid_models_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    // Bernoulli needs every a_j ≤ 1
    let o = trawlkit(&[
        "simulate",
        "--seed",
        "bernoulli",
        "--trawl",
        "custom:values=1.5;0.5",
        "--n",
        "10",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(code(&o), 2);
    assert!(!out.exists());
    assert_eq!(code(&trawlkit(&["theory", "--seed", "poisson", "--trawl", "power-law:alpha=2.5"])), 2);
    assert_eq!(code(&trawlkit(&["theory", "--seed", "poisson", "--nonsense"])), 2);
    assert_eq!(code(&trawlkit(&["theory", "--seed", "poisson"])), 2);
    assert_eq!(code(&trawlkit(&["bogus"])), 2);
}

#[test]
fn theory_reports_constants() {
    let o = trawlkit(&["theory", "--seed", "poisson", "--trawl", "power-law:c0=1,alpha=1.5", "--max-lag", "3"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["c1"].as_f64().unwrap() - 2.0).abs() < 1e-12);
    assert!((v["H"].as_f64().unwrap() - 0.75).abs() < 1e-15);
    assert_eq!(v["autocov"].as_array().unwrap().len(), 4);

    let o = trawlkit(&["theory", "--seed", "bm", "--trawl", "geometric:a=0.5"]);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["sigma2"].as_f64().unwrap() - 6.0).abs() < 1e-9);
    assert!((v["autocov"][1].as_f64().unwrap() - 1.0).abs() < 1e-10);
}

#[test]
fn acf_reads_a_simulated_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.csv");
    let sim = ["simulate", "--seed", "bm", "--trawl", "geometric:a=0.5", "--n", "20000", "--out", path_str(&path)];
    assert_eq!(code(&trawlkit(&sim)), 0);
    let o =
        trawlkit(&["acf", "--input", path_str(&path), "--max-lag", "2", "--seed", "bm", "--trawl", "geometric:a=0.5"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<Vec<f64>> =
        text.lines().skip(1).map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 3);
    for r in rows {
        assert!((r[1] - r[2]).abs() < 0.15, "{r:?}");
    }
}

fn write_config(dir: &Path, name: &str, extra: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    let body = format!(
        r#"{{"experiment": "ShortMemoryCLT", "seed_model": {{"tag": "bm"}},
            "trawl": {{"tag": "geometric", "params": {{"a": 0.5}}}},
            "n": 512, "replicas": 400, "master_seed": 7{extra}}}"#
    );
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn experiment_exit_codes_and_worker_independence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "clt.json", "");
    let run = |workers: &str, tag: &str| {
        let report = dir.path().join(format!("{tag}.json"));
        let csv = dir.path().join(format!("{tag}.csv"));
        let o = trawlkit(&[
            "experiment",
            "--config",
            path_str(&cfg),
            "--workers",
            workers,
            "--report",
            path_str(&report),
            "--per-replica",
            path_str(&csv),
        ]);
        let mut v: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
        v["wall_clock_seconds"] = Value::Null;
        (code(&o), v, std::fs::read_to_string(csv).unwrap())
    };
    let (c1, r1, csv1) = run("1", "w1");
    let (c8, r8, csv8) = run("8", "w8");
    assert_eq!(c1, 0, "{r1:#}");
    assert_eq!(c8, 0);
    assert_eq!(r1, r8);
    assert_eq!(csv1, csv8);
    assert!(csv1.starts_with("replica,n,statistic,value\n"));
    assert_eq!((csv1.lines().count() - 1) % 400, 0);

    let strict = write_config(dir.path(), "strict.json", r#", "tolerances": {"se_multiplier": 0.0, "ks_level": 1.0}"#);
    let o = trawlkit(&["experiment", "--config", path_str(&strict)]);
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("strict.json.report.json").exists());
    assert!(String::from_utf8_lossy(&o.stderr).contains("FAIL"));

    let bad = write_config(dir.path(), "bad.json", r#", "tolerances": {"nope": 1}"#);
    assert_eq!(code(&trawlkit(&["experiment", "--config", path_str(&bad)])), 2);
}
