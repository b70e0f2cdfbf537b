use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn nslps(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nslps")).args(args).output().expect("binary runs")
}

#[test]
fn golden_table_is_reproduced_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("gd.csv");
    let conf = data("gd_grid1.conf");
    let run = nslps(&["--config", conf.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let expected = std::fs::read_to_string(data("gd_grid1.csv")).unwrap();
    assert_eq!(std::fs::read_to_string(&out).unwrap(), expected);
}

#[test]
fn flags_override_config_keys() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("one.csv");
    let conf = data("gd_grid1.conf");
    let run = nslps(&["--config", conf.to_str().unwrap(), "--levels", "1", "--tend", "0.02", "--out", out.to_str().unwrap()]);
    assert!(run.status.success());
    let csv = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("1,"));
}

#[test]
fn flags_alone_form_a_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let run = nslps(&[
        "--method", "DIVLPS", "--degree", "2", "--grid", "2", "--levels", "0", "--nu", "1e-4,1e-2", "--tend", "0.02",
        "--out", out.to_str().unwrap(),
    ]);
    assert!(run.status.success());
    let csv = std::fs::read_to_string(&out).unwrap();
    let nus: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').nth(2).unwrap()).collect();
    assert_eq!(nus.len(), 2);
    assert!(nus[0].parse::<f64>().unwrap() > nus[1].parse::<f64>().unwrap());
}

#[test]
fn configuration_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let out = out.to_str().unwrap();
    for args in [
        vec!["--method", "SUPG", "--degree", "2", "--grid", "1", "--levels", "1", "--out", out],
        vec!["--method", "GD", "--grid", "1", "--levels", "1", "--out", out],
        vec!["--method", "HALFRATE", "--degree", "2", "--grid", "1", "--levels", "1", "--nu", "1", "--out", out],
        vec!["--config", "/nonexistent/run.conf"],
    ] {
        let run = nslps(&args);
        assert_eq!(run.status.code(), Some(1), "{args:?}");
        assert!(String::from_utf8_lossy(&run.stderr).contains("configuration error"));
    }
}

#[test]
fn solver_failure_exits_with_two_and_leaves_a_log() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("tight.conf");
    std::fs::write(&conf, "method = GD\ndegree = 2\ngrid = 1\nlevels = 1\ntend = 0.02\npicard_max_iter = 1\n").unwrap();
    let out = dir.path().join("tight.csv");
    let run = nslps(&["--config", conf.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(2));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().count(), 1, "header only");
    let log = std::fs::read_to_string(dir.path().join("tight.csv.err.log")).unwrap();
    assert!(log.contains("level 1") && log.contains("step 1"), "{log}");
}
