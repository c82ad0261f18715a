use std::process::{Command, Output};

use serde_json::Value;

fn modsum(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_modsum"))
        .args(args)
        .env_remove("MODSUM_SEED")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success() || out.status.code() == Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is json")
}

#[test]
fn secure_sum_reports_the_sum_and_digest() {
    let out = modsum(&["run-protocol", "--name", "secure-sum", "--m", "3", "--q", "2", "--c", "1", "--seed", "7"]);
    let v = json(&out);
    assert_eq!(v["command"], "run-protocol");
    assert_eq!(v["seed"], 7);
    assert_eq!(v["config"]["m"], 3);
    assert_eq!(v["result"]["correct"], true);
    let inputs: u32 = v["result"]["inputs"].as_array().unwrap().iter().map(|s| s.as_str().unwrap().parse::<u32>().unwrap()).sum();
    for o in v["result"]["outputs"].as_array().unwrap() {
        assert_eq!(o.as_str().unwrap(), (inputs % 2).to_string());
    }
    assert_eq!(v["result"]["transcript_digest"].as_str().unwrap().len(), 64);
}

#[test]
fn same_seed_gives_identical_reports() {
    let args = ["run-protocol", "--name", "anon-auth", "--m", "4", "--e", "2", "--d", "2", "--seed", "5"];
    let a = modsum(&args);
    let b = modsum(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn jobs_do_not_change_repeated_runs() {
    let base = ["run-protocol", "--name", "cheater-detect", "--q", "2", "--c", "2", "--repeat", "300", "--seed", "9"];
    let one = modsum(&[&base[..], &["--jobs", "1"]].concat());
    let four = modsum(&[&base[..], &["--jobs", "4"]].concat());
    assert!(one.status.success());
    assert_eq!(one.stdout, four.stdout);
}

#[test]
fn cheater_detect_success_rate_near_one_minus_q_to_minus_c() {
    let v = json(&modsum(&["run-protocol", "--name", "cheater-ss", "--q", "2", "--c", "3", "--repeat", "10000", "--seed", "1"]));
    let (lo, hi) = (v["result"]["ci95_low"].as_f64().unwrap(), v["result"]["ci95_high"].as_f64().unwrap());
    assert!(lo <= 0.875 && 0.875 <= hi, "[{lo}, {hi}]");
}

#[test]
fn player_j_passes_on_ghz() {
    let out = modsum(&["verify", "--protocol", "player-j", "--m", "3", "--n", "500", "--seed", "2"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["result"]["passed"], true);
}

#[test]
fn product_source_exits_two() {
    let out = modsum(&["verify", "--protocol", "player-j", "--m", "3", "--n", "200", "--source", "product"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["result"]["passed"], false);
}

#[test]
fn trusted_report_carries_fidelity_bound() {
    let v = json(&modsum(&["verify", "--protocol", "trusted", "--alpha", "0.05", "--n", "12"]));
    let fid = v["result"]["diagnostics"]["fidelity_bound"].as_f64().unwrap();
    assert!((fid - 0.2).abs() < 1e-12);
}

#[test]
fn modification_attack_exact_is_one_third() {
    let v = json(&modsum(&["attack", "--name", "modification", "--q", "2", "--c", "2", "--mode", "exact"]));
    assert_eq!(v["result"]["exact"]["rational"], "1/3");
}

#[test]
fn rushing_attack_exact_is_one() {
    let v = json(&modsum(&["attack", "--name", "rushing", "--mode", "exact"]));
    assert_eq!(v["result"]["exact"]["value"], 1.0);
}

#[test]
fn oversized_exact_attack_suggests_monte_carlo() {
    let out = modsum(&["attack", "--name", "collusion", "--m", "6", "--q", "5", "--e", "3", "--d", "2"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--mode mc"));
}

#[test]
fn secure_sum_audit_is_zero_bits() {
    let v = json(&modsum(&["audit", "--protocol", "secure-sum", "--colluders", "3", "--m", "3"]));
    assert_eq!(v["result"]["exact"], true);
    for bits in v["result"]["leakage"].as_object().unwrap().values() {
        assert_eq!(bits.as_f64().unwrap(), 0.0);
    }
}

#[test]
fn seed_falls_back_to_environment() {
    let args = ["run-protocol", "--name", "secure-sum", "--m", "3"];
    let run = |seed: &str| {
        Command::new(env!("CARGO_BIN_EXE_modsum")).args(args).env("MODSUM_SEED", seed).output().unwrap()
    };
    let env = run("42");
    assert_eq!(json(&env)["seed"], 42);
    let flag = modsum(&[&args[..], &["--seed", "42"]].concat());
    assert_eq!(env.stdout, flag.stdout);
    assert_eq!(run("x").status.code(), Some(1));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    std::fs::write(&path, "name = \"secure-sum\"\nm = 4\nq = 3\nseed = 1\nformat = \"csv\"\n").unwrap();
    let p = path.to_str().unwrap();
    let out = modsum(&["run-protocol", "--config", p, "--m", "5", "--format", "json"]);
    let v = json(&out);
    assert_eq!(v["config"]["m"], 5);
    assert_eq!(v["config"]["q"], 3);
    let csv = modsum(&["run-protocol", "--config", p]);
    assert!(String::from_utf8_lossy(&csv.stdout).starts_with("correct,protocol,transcript_digest\n"));

    std::fs::write(&path, "nme = \"secure-sum\"\n").unwrap();
    let bad = modsum(&["run-protocol", "--config", p]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("unknown field"));
}

#[test]
fn csv_output_and_file_output() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("audit.csv");
    let out = modsum(&[
        "audit", "--protocol", "secret-share", "--m", "3", "--colluders", "2", "--format", "csv", "--output",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("bits,exact,target"));
    assert_eq!(lines.next(), Some("0.0,true,y"));
}

#[test]
fn sweep_rows_follow_value_order() {
    let out = modsum(&[
        "sweep", "--experiment", "attack", "--name", "modification", "--param", "q", "--values", "2,3,4", "--format",
        "csv",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let exact: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').nth(5).unwrap()).collect();
    assert_eq!(exact, ["1/3", "1/4", "1/5"]);
}

#[test]
fn sweep_rejects_unknown_parameter() {
    let out = modsum(&["sweep", "--experiment", "audit", "--param", "zz", "--values", "1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn parse_errors_exit_one_and_help_exits_zero() {
    assert_eq!(modsum(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(modsum(&["attack", "--q", "x"]).status.code(), Some(1));
    assert_eq!(modsum(&["--help"]).status.code(), Some(0));
    assert_eq!(modsum(&["--version"]).status.code(), Some(0));
}
