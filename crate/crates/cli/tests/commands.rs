//! End-to-end runs of the binary on a small synthetic dataset.

mod common;

use std::path::Path;
use std::process::{Command, Output};

use elasticzo::metrics::parse_metrics;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_elasticzo")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn train_args<'a>(data: &'a str, out: &'a str, extra: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec!["train", "--data-dir", data, "--out-dir", out, "--set", "epochs=2", "--set", "batch=16"];
    for e in extra {
        v.push("--set");
        v.push(e);
    }
    v
}

fn metrics(dir: &Path) -> String {
    std::fs::read_to_string(dir.join("metrics.csv")).unwrap()
}

#[test]
fn identical_runs_give_identical_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    common::write_synthetic(&data, 96, 40);
    let data = data.to_str().unwrap();
    for (mode, precision) in [("cls1", "fp32"), ("full_zo", "fp32"), ("cls1", "int8")] {
        let a = tmp.path().join(format!("a_{mode}_{precision}"));
        let b = tmp.path().join(format!("b_{mode}_{precision}"));
        let extra = [&*format!("partition={mode}"), &*format!("precision={precision}")];
        ok(&train_args(data, a.to_str().unwrap(), &extra));
        ok(&train_args(data, b.to_str().unwrap(), &extra));
        assert_eq!(metrics(&a), metrics(&b), "{mode} {precision}");
        let c = tmp.path().join(format!("c_{mode}_{precision}"));
        ok(&[&train_args(data, c.to_str().unwrap(), &extra)[..], &["--seed", "5"]].concat());
        assert_ne!(metrics(&a), metrics(&c));
    }
}

#[test]
fn lr_schedule_appears_in_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    common::write_synthetic(&data, 16, 10);
    let out = tmp.path().join("out");
    ok(&[
        "train", "--data-dir", data.to_str().unwrap(), "--out-dir", out.to_str().unwrap(),
        "--set", "epochs=21", "--set", "batch=16", "--set", "lr=0.01",
    ]);
    let rows = parse_metrics(&metrics(&out)).unwrap();
    assert_eq!(rows.len(), 22);
    assert_eq!(rows[0].stage, "init");
    let lr = |e: usize| rows.iter().find(|r| r.stage == "train" && r.epoch == e).unwrap().lr;
    assert!((lr(0) - 0.01).abs() < 1e-9);
    assert!((lr(10) - 0.008).abs() < 1e-9);
    assert!((lr(20) - 0.0064).abs() < 1e-9);
    let timings = std::fs::read_to_string(out.join("timings.csv")).unwrap();
    assert!(timings.starts_with("stage,epoch,forward,loss,zo_perturb,zo_update,bp_backward"));
}

#[test]
fn eval_is_idempotent_and_matches_training_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    common::write_synthetic(&data, 64, 30);
    let d = data.to_str().unwrap();
    for precision in ["fp32", "int8"] {
        let out = tmp.path().join(precision);
        ok(&train_args(d, out.to_str().unwrap(), &[&*format!("precision={precision}")]));
        let ckpt = out.join("final.ckpt");
        let args = ["eval", "--data-dir", d, "--checkpoint", ckpt.to_str().unwrap()];
        let first = ok(&args);
        assert_eq!(first, ok(&args));
        let last = parse_metrics(&metrics(&out)).unwrap().pop().unwrap();
        assert_eq!(first.trim(), format!("test_loss {:.6} test_acc {:.6}", last.test_loss, last.test_acc));
    }
}

#[test]
fn zero_epoch_finetune_reports_the_baseline() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    common::write_synthetic(&data, 64, 30);
    let d = data.to_str().unwrap();
    let base = tmp.path().join("base");
    ok(&train_args(d, base.to_str().unwrap(), &[]));
    let ckpt = base.join("final.ckpt");
    let ft = tmp.path().join("ft");
    let args = [
        "finetune", "--data-dir", d, "--out-dir", ft.to_str().unwrap(), "--base", ckpt.to_str().unwrap(),
        "--set", "epochs=0", "--set", "rotate_n=20",
    ];
    ok(&args);
    let rows = parse_metrics(&metrics(&ft)).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].stage, "baseline");
    // Same subset, same base: identical baseline.
    let ft2 = tmp.path().join("ft2");
    let mut args2 = args;
    args2[4] = ft2.to_str().unwrap();
    ok(&args2);
    assert_eq!(metrics(&ft), metrics(&ft2));
}

#[test]
fn config_errors_name_fields() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.cfg");
    std::fs::write(&cfg, "batch = 0\nr_max = 200\n").unwrap();
    let out = run(&["train", "--config", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("batch") && err.contains("r_max"), "{err}");
    let out = run(&["train", "--set", "warp=9"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("warp"));
}

#[test]
fn memreport_and_signtest_write_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let stdout = ok(&["memreport", "--out-dir", out, "--batch", "32"]);
    assert!(stdout.contains("5485136") && stdout.contains("2742568"), "{stdout}");
    let csv = std::fs::read_to_string(tmp.path().join("memreport.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 13 * 3);

    let shape = tmp.path().join("fc.shape");
    std::fs::write(&shape, "input 4\nlinear 4 3\n").unwrap();
    let stdout = ok(&["memreport", "--out-dir", out, "--batch", "2", "--model", shape.to_str().unwrap()]);
    assert!(stdout.contains(" 168 bytes"), "{stdout}");

    let stdout = ok(&["signtest", "--out-dir", out, "--trials", "500", "--batch", "1"]);
    assert!(stdout.starts_with("trials 500"));
    assert!(tmp.path().join("signtest.csv").exists());
}

#[test]
fn untrained_lenet_is_near_chance_on_mnist() {
    let Some(dir) = common::mnist_dir() else {
        eprintln!("MNIST files not found; skipping");
        return;
    };
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    ok(&["train", "--data-dir", dir.to_str().unwrap(), "--out-dir", out, "--set", "epochs=0", "--set", "train_limit=100"]);
    let rows = parse_metrics(&metrics(tmp.path())).unwrap();
    assert!((0.05..=0.20).contains(&rows[0].test_acc), "{}", rows[0].test_acc);
}
