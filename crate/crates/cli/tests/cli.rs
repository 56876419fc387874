use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn segsim(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_segsim"))
        .args(args)
        .current_dir(cwd)
        .env_remove("SEGSIM_OUT_DIR")
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// The last stderr line parsed as the machine-readable error.
fn error_line(out: &Output) -> serde_json::Value {
    let text = stderr(out);
    let line = text.lines().last().expect("an error line");
    serde_json::from_str(line).unwrap_or_else(|_| panic!("not JSON: {line}"))
}

fn echo(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("config.json")).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

const SMALL: &[&str] = &["--runs", "2", "--horizon", "150", "--n-agents", "40"];

#[test]
fn simulate_writes_outputs_and_reruns_identically() {
    let tmp = TempDir::new().unwrap();
    for dir in ["a", "b"] {
        let mut args = vec!["simulate", "--seed", "7", "--out", dir];
        args.extend(SMALL);
        let out = segsim(&args, tmp.path());
        assert!(out.status.success(), "{}", stderr(&out));
    }
    for name in ["histogram2d_attr.csv", "histogram2d_pref.csv", "summary.csv"] {
        let a = fs::read(tmp.path().join("a").join(name)).unwrap();
        let b = fs::read(tmp.path().join("b").join(name)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{name} differs between identical runs");
    }
    let rows = csv_rows(&tmp.path().join("a/histogram2d_attr.csv"));
    assert_eq!(rows[0], ["bin_x_low", "bin_y_low", "count"]);
    assert_eq!(rows.len(), 1 + 50 * 50);
    let total: u64 = rows[1..].iter().map(|r| r[2].parse::<u64>().unwrap()).sum();
    assert_eq!(total, 2 * 100 * 40);
}

#[test]
fn different_seeds_differ() {
    let tmp = TempDir::new().unwrap();
    for (dir, seed) in [("a", "1"), ("b", "2")] {
        let mut args = vec!["simulate", "--seed", seed, "--out", dir];
        args.extend(SMALL);
        assert!(segsim(&args, tmp.path()).status.success());
    }
    let a = fs::read(tmp.path().join("a/summary.csv")).unwrap();
    let b = fs::read(tmp.path().join("b/summary.csv")).unwrap();
    assert_ne!(a, b);
}

#[test]
fn floats_use_seventeen_significant_digits() {
    let tmp = TempDir::new().unwrap();
    let mut args = vec!["simulate", "--out", "o"];
    args.extend(SMALL);
    assert!(segsim(&args, tmp.path()).status.success());
    let rows = csv_rows(&tmp.path().join("o/summary.csv"));
    let binder = &rows[1][4];
    let mantissa = binder.split('e').next().unwrap().trim_start_matches('-');
    assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17, "{binder}");
    binder.parse::<f64>().unwrap();
}

#[test]
fn flags_override_file_and_defaults_fill_the_rest() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("c.json"), r#"{"temperature": 0.1, "n_runs": 2, "horizon": 120, "n_agents": 20}"#).unwrap();
    let out = segsim(&["simulate", "--config", "c.json", "--temperature", "0.2", "--out", "o"], tmp.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let cfg = echo(&tmp.path().join("o"));
    assert_eq!(cfg["temperature"], 0.2);
    assert_eq!(cfg["n_runs"], 2);
    assert_eq!(cfg["theta1"], 0.3);
    assert_eq!(cfg["forgetting_rate"], 0.1);
    assert_eq!(cfg["variant"], "four_action");
}

#[test]
fn config_echo_is_a_valid_config() {
    let tmp = TempDir::new().unwrap();
    let mut args = vec!["simulate", "--out", "first", "--theta", "0.2"];
    args.extend(SMALL);
    assert!(segsim(&args, tmp.path()).status.success());
    let out = segsim(&["simulate", "--config", "first/config.json", "--out", "second"], tmp.path());
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(
        fs::read(tmp.path().join("first/summary.csv")).unwrap(),
        fs::read(tmp.path().join("second/summary.csv")).unwrap()
    );
    assert_eq!(echo(&tmp.path().join("second"))["theta2"], 0.8);
}

#[test]
fn unknown_key_is_a_config_error_naming_the_key() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("c.json"), r#"{"temprature": 0.1}"#).unwrap();
    let out = segsim(&["simulate", "--config", "c.json"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    let err = error_line(&out);
    assert_eq!(err["error"], "config");
    assert!(err["message"].as_str().unwrap().contains("temprature"));
    assert_eq!(stderr(&out).lines().count(), 1);
}

#[test]
fn type_mismatch_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("c.json"), r#"{"horizon": 0.5}"#).unwrap();
    let out = segsim(&["sweep", "--config", "c.json"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_line(&out)["error"], "config");
}

#[test]
fn invalid_parameters_are_config_errors() {
    let tmp = TempDir::new().unwrap();
    for args in [
        vec!["simulate", "--theta1", "1.5"],
        vec!["simulate", "--temperature", "-0.1"],
        vec!["simulate", "--variant", "three_action"],
        vec!["sweep", "--param", "mu_bid", "--values", "0.5"],
        vec!["meanfield-tc", "--t-lo", "0.5", "--t-hi", "0.4"],
        vec!["simulate", "--no-such-flag"],
    ] {
        let out = segsim(&args, tmp.path());
        assert_eq!(out.status.code(), Some(1), "{args:?}: {}", stderr(&out));
        assert_eq!(error_line(&out)["error"], "config", "{args:?}");
    }
    let missing = segsim(&["simulate", "--config", "missing.json"], tmp.path());
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn output_dir_from_environment() {
    let tmp = TempDir::new().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_segsim"))
        .args(["meanfield-tc"])
        .current_dir(tmp.path())
        .env("SEGSIM_OUT_DIR", tmp.path().join("from_env"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(tmp.path().join("from_env/phase_boundary.csv").exists());

    let out = Command::new(env!("CARGO_BIN_EXE_segsim"))
        .args(["meanfield-tc", "--out", "flag"])
        .current_dir(tmp.path())
        .env("SEGSIM_OUT_DIR", tmp.path().join("ignored"))
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(tmp.path().join("flag/phase_boundary.csv").exists());
    assert!(!tmp.path().join("ignored").exists());
}

#[test]
fn sweep_writes_one_row_per_value() {
    let tmp = TempDir::new().unwrap();
    let mut args = vec!["sweep", "--param", "theta", "--values", "0.2,0.3,0.4", "--out", "o"];
    args.extend(SMALL);
    let out = segsim(&args, tmp.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let binder = csv_rows(&tmp.path().join("o/binder_vs_T.csv"));
    assert_eq!(binder[0], ["theta", "binder_bs", "binder_12", "binder_mean", "stderr"]);
    assert_eq!(binder.len(), 4);
    let pers = csv_rows(&tmp.path().join("o/persistence_vs_T.csv"));
    assert_eq!(&pers[0][..3], ["theta", "mean_t", "censored_fraction"]);
    assert_eq!(pers.len(), 4);
    assert_eq!(pers[2][0].parse::<f64>().unwrap(), 0.3);
}

#[test]
fn temperature_sweep_columns() {
    let tmp = TempDir::new().unwrap();
    let mut args = vec!["sweep", "--values", "0.1,0.3", "--out", "o"];
    args.extend(SMALL);
    assert!(segsim(&args, tmp.path()).status.success());
    let binder = csv_rows(&tmp.path().join("o/binder_vs_T.csv"));
    assert_eq!(binder[0][0], "temperature");
    let pers = csv_rows(&tmp.path().join("o/persistence_vs_T.csv"));
    assert_eq!(pers[0][0], "temperature");
}

#[test]
fn numerical_failure_exits_two_and_keeps_partial_output() {
    let tmp = TempDir::new().unwrap();
    // recording nothing leaves no samples, so the Binder cumulant is undefined
    let mut args = vec!["sweep", "--values", "0.1,0.2", "--out", "o", "--record-last", "0"];
    args.extend(SMALL);
    let out = segsim(&args, tmp.path());
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert_eq!(error_line(&out)["error"], "numerical");
    let rows = csv_rows(&tmp.path().join("o/binder_vs_T.csv"));
    assert_eq!(rows.len(), 2, "header and the failing row are on disk");
    assert!(tmp.path().join("o/config.json").exists());

    let out = segsim(&["meanfield-tc", "--t-lo", "0.2", "--t-hi", "0.25", "--out", "mf"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_line(&out)["code"], 2);
}

#[test]
fn meanfield_flow_outputs() {
    let tmp = TempDir::new().unwrap();
    let out = segsim(&["meanfield-flow", "--temperature", "0.29", "--grid", "7", "--out", "o"], tmp.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let flow = csv_rows(&tmp.path().join("o/flowfield.csv"));
    assert_eq!(flow[0], ["f1", "f2", "df1_dt", "df2_dt"]);
    assert_eq!(flow.len(), 1 + 49);
    let fps = csv_rows(&tmp.path().join("o/fixed_points.csv"));
    assert_eq!(fps.len(), 1 + 3);
    let stable = fps[1..].iter().filter(|r| r.last().unwrap() == "true").count();
    assert_eq!(stable, 2);
}

#[test]
fn meanfield_phase_matches_known_boundary() {
    let tmp = TempDir::new().unwrap();
    let out = segsim(&["meanfield-phase", "--thetas", "0.1,0.3,0.5", "--out", "o"], tmp.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = csv_rows(&tmp.path().join("o/phase_boundary.csv"));
    assert_eq!(rows[0], ["theta", "t_c"]);
    let tc: Vec<f64> = rows[1..].iter().map(|r| r[1].parse().unwrap()).collect();
    for (got, want) in tc.iter().zip([0.263, 0.308, 0.349]) {
        assert!((got - want).abs() < 0.002, "{tc:?}");
    }
}

#[test]
fn help_exits_zero() {
    let tmp = TempDir::new().unwrap();
    let out = segsim(&["--help"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    for sub in ["simulate", "sweep", "meanfield-flow", "meanfield-tc", "meanfield-phase"] {
        assert!(String::from_utf8_lossy(&out.stdout).contains(sub));
        let out = segsim(&[sub, "--help"], tmp.path());
        assert_eq!(out.status.code(), Some(0));
        let text = String::from_utf8_lossy(&out.stdout);
        for flag in ["--seed", "--runs", "--out", "--config"] {
            assert!(text.contains(flag), "{sub} lacks {flag}");
        }
    }
}
