use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mscv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mscv")).args(args).output().expect("binary runs")
}

fn small_run(out: &Path) -> Output {
    mscv(&[
        "run",
        "--test",
        "1",
        "--cv",
        "bgk,equilibrium",
        "--lambda",
        "optimal,one",
        "--samples",
        "4",
        "--seed",
        "3",
        "--set",
        "n_v=16",
        "--set",
        "v_max=8.0",
        "--set",
        "n_angles=4",
        "--set",
        "t_final=0.3",
        "--set",
        "dt=0.1",
        "--set",
        "report_interval=0.1",
        "--set",
        "reference_nodes=4",
        "--out",
        out.to_str().unwrap(),
    ])
}

#[test]
fn unknown_test_is_a_config_error() {
    let out = mscv(&["run", "--test", "9"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown test 9"));
}

#[test]
fn unknown_flag_prints_usage() {
    let out = mscv(&["run", "--test", "1", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn bad_values_are_config_errors() {
    for args in [
        vec!["run", "--test", "1", "--cv", "magic"],
        vec!["run", "--test", "1", "--set", "no_such_key=1"],
        vec!["run", "--test", "3", "--cv", "equilibrium"],
        vec!["run", "--test", "1", "--set", "samples"],
    ] {
        let out = mscv(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn allocation_of_the_reference_costs() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cost.toml");
    fs::write(&path, "c = 1.25\nc1 = 1.0\nc2 = 1.25\nn_a = 8\nn_v = 32\nsamples = 10\n").unwrap();
    let out = mscv(&["allocate", "--cost-config", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout), "M_E1=1000\nM_E2=819200\n");
    fs::write(&path, "c = -1.0\nc1 = 1.0\nc2 = 1.25\nn_a = 8\nn_v = 32\n").unwrap();
    assert_eq!(mscv(&["allocate", "--cost-config", path.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn validate_passes() {
    let out = mscv(&["validate"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().count() >= 10);
    assert!(text.lines().all(|l| l.starts_with("PASS")));
}

#[test]
fn runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let first = small_run(&a);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    assert!(small_run(&b).status.success());
    for file in ["error_curve.csv", "lambda_field.csv", "moments.csv", "config.toml"] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file}");
    }
    // One progress line per report time.
    let stdout = String::from_utf8_lossy(&first.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("t=")).count(), 4);
    let curves = fs::read_to_string(a.join("error_curve.csv")).unwrap();
    assert!(curves.contains(",bgk-one,L1s0,"));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "test = 1\nsamples = 7\nseed = 5\nn_v = 16\nv_max = 8.0\nn_angles = 4\nt_final = 0.1\ndt = 0.1\n\
         report_interval = 0.1\nreference_nodes = 2\ncv = [\"equilibrium\"]\n",
    )
    .unwrap();
    let out_dir = dir.path().join("o");
    let out = mscv(&["run", "--config", cfg.to_str().unwrap(), "--samples", "3", "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let echoed = fs::read_to_string(out_dir.join("config.toml")).unwrap();
    assert!(echoed.contains("samples = 3\n") && echoed.contains("seed = 5\n"), "{echoed}");
    let meta = fs::read_to_string(out_dir.join("meta.json")).unwrap();
    assert!(meta.contains("\"samples\": 3"));
}
