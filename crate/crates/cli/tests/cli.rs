use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hierfl_core::bounds::{g_c_end, BoundParams};

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn hierfl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hierfl")).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn run_small(out: &Path, extra: &[&str]) -> Output {
    let config = example("small.toml");
    let mut args = vec!["run", "-c", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend(extra);
    hierfl(&args)
}

#[test]
fn run_writes_checked_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = run_small(&out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in
        ["trace.csv", "cost.csv", "cost_summary.txt", "bounds.csv", "divergence.txt", "partition.txt", "manifest.toml"]
    {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("final_accuracy"));

    let o = hierfl(&["validate", "--artifacts", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));

    let trace = out.join("trace.csv");
    let text = fs::read_to_string(&trace).unwrap();
    fs::write(&trace, text.replacen("cloud_agg", "edge_agg", 1)).unwrap();
    let o = hierfl(&["validate", "--artifacts", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("trace.csv"), "{}", stderr(&o));
}

#[test]
fn overrides_change_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(run_small(&a, &["--set", "bounds.enabled=false"]).status.success());
    assert!(run_small(&b, &["--set", "bounds.enabled=false", "--seed", "8"]).status.success());
    assert_ne!(fs::read(a.join("trace.csv")).unwrap(), fs::read(b.join("trace.csv")).unwrap());
    assert!(!a.join("bounds.csv").exists());
}

#[test]
fn bad_configs_exit_with_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "seed = 1\n[schedule]\nkapa1 = 3\n").unwrap();
    let o = hierfl(&["validate", "-c", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("kapa1"), "{}", stderr(&o));

    fs::write(&path, "[schedule]\nkappa1 = 4\nkappa2 = 2\ntotal_updates = 10\n").unwrap();
    let o = hierfl(&["validate", "-c", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));

    let o = hierfl(&["validate"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bounds_grid_matches_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("bounds.csv");
    let o = hierfl(&[
        "bounds",
        "--kappa1",
        "2,4",
        "--kappa2",
        "1,3",
        "--eta",
        "0.05",
        "--delta",
        "0.5",
        "--big-delta",
        "0.2",
        "--beta",
        "2",
        "--out",
        csv_path.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut reader = csv::Reader::from_path(&csv_path).unwrap();
    let headers = reader.headers().unwrap().clone();
    assert_eq!(&headers[0], "kappa1");
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 4);
    for r in &rows {
        let (k1, k2): (usize, usize) = (r[0].parse().unwrap(), r[1].parse().unwrap());
        let expected = g_c_end(&BoundParams::new(2.0, 0.5, 0.2, 0.05, k1, k2)).unwrap();
        let got: f64 = r[6].parse().unwrap();
        assert!((got - expected).abs() <= 1e-12 * expected.max(1.0), "κ1={k1} κ2={k2}: {got} vs {expected}");
    }
}

#[test]
fn cost_repricing_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    assert!(run_small(&out, &["--set", "bounds.enabled=false"]).status.success());
    let priced = dir.path().join("priced");
    let config = example("small.toml");
    let o = hierfl(&[
        "cost",
        "--trace",
        out.join("trace.csv").to_str().unwrap(),
        "-c",
        config.to_str().unwrap(),
        "--out",
        priced.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read(out.join("cost.csv")).unwrap(), fs::read(priced.join("cost.csv")).unwrap());

    let o = hierfl(&[
        "cost",
        "--trace",
        out.join("trace.csv").to_str().unwrap(),
        "-c",
        config.to_str().unwrap(),
        "--set",
        "cost.cpu_freq=2e9",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = fs::read_to_string(out.join("cost_summary.txt")).unwrap();
    assert_ne!(String::from_utf8(o.stdout).unwrap(), summary);
}

#[test]
fn sweep_rejects_conflicting_axes() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("sweep.toml");
    fs::write(&spec, "kappa1 = [2, 3]\nkappa2 = [1]\ncloud_period = 6\n").unwrap();
    let config = example("small.toml");
    let o = hierfl(&[
        "sweep",
        "-c",
        config.to_str().unwrap(),
        "--spec",
        spec.to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("cloud_period"), "{}", stderr(&o));
}

#[test]
fn example_sweep_runs_every_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    let config = example("small.toml");
    let spec = example("sweep.toml");
    let o = hierfl(&[
        "sweep",
        "-c",
        config.to_str().unwrap(),
        "--spec",
        spec.to_str().unwrap(),
        "--set",
        "bounds.enabled=false",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut reader = csv::Reader::from_path(out.join("sweep.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 8);
    for r in &rows {
        assert_eq!(&r[5], "ok");
        let (k1, k2): (usize, usize) = (r[1].parse().unwrap(), r[2].parse().unwrap());
        assert_eq!(k1 * k2, 12);
    }
    let o = hierfl(&["validate", "--artifacts", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
}
