use std::path::Path;
use std::process::{Command, Output};

fn jlcm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jlcm")).current_dir(dir).args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = jlcm(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

const FIT: [&str; 8] = ["--data", "sim.csv", "--iterations", "400", "--burn-in", "150", "--seed", "3"];

#[test]
fn simulate_fit_predict_closed_loop() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["simulate", "--seed", "2", "--n", "30", "--out", "sim.csv", "--truth", "truth.csv"]);
    let fit = ok(d, &[&["fit"][..], &FIT[..], &["--chain", "a.txt", "--summary", "a.csv"]].concat());
    assert!(fit.contains("dic_variant=conditional") && fit.contains("dic_penalty=half_variance"), "{fit}");
    let summary = std::fs::read_to_string(d.join("a.csv")).unwrap();
    assert!(summary.lines().any(|l| l.starts_with("beta_2_2,")));

    ok(d, &["predict", "--data", "sim.csv", "--chain", "a.txt", "--t", "0.4", "--dt", "0,0.1,0.2", "--out", "p.csv"]);
    let pred = std::fs::read_to_string(d.join("p.csv")).unwrap();
    assert_eq!(pred.lines().next().unwrap(), "id,series,class,time,value");
    let mut zero_rows = 0;
    for row in pred.lines().skip(1) {
        let f: Vec<&str> = row.split(',').collect();
        if f[1] == "survival" && f[3].parse::<f64>().unwrap() == 0.4 {
            assert_eq!(f[4].parse::<f64>().unwrap(), 1.0);
            zero_rows += 1;
        }
    }
    assert_eq!(zero_rows, 30);

    let auc = ok(d, &["auc", "--data", "sim.csv", "--chain", "a.txt", "--t", "0.4", "--dt", "0.3"]);
    assert!(auc.starts_with("auc="), "{auc}");
    ok(d, &["classify", "--data", "sim.csv", "--chain", "a.txt", "--out", "m.csv"]);
}

#[test]
fn same_seed_gives_identical_chain_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["simulate", "--seed", "4", "--n", "20", "--out", "sim.csv"]);
    ok(d, &[&["fit"][..], &FIT[..], &["--chain", "a.txt", "--summary", "a.csv"]].concat());
    ok(d, &[&["fit"][..], &FIT[..], &["--chain", "b.txt", "--summary", "b.csv"]].concat());
    assert_eq!(std::fs::read(d.join("a.txt")).unwrap(), std::fs::read(d.join("b.txt")).unwrap());
}

#[test]
fn failures_exit_nonzero_with_error_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = jlcm(dir.path(), &["fit", "--data", "missing.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error kind=io"));
    let out = jlcm(dir.path(), &["fit", "--k"]);
    assert_eq!(out.status.code(), Some(2));
}
