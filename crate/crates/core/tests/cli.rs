mod common;

use std::process::Command;

use tamperchain::chain::ChainStore;
use tamperchain::netsim::EventLog;

fn run(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_tamperchain"))
        .args(args)
        .output()
        .expect("binary runs")
}

#[test]
fn scenario_run_writes_artifacts() {
    let out = tempfile::tempdir().unwrap();
    let config = common::scenario_dir().join("s3-light.toml");
    let o = run(&["--config", config.to_str().unwrap(), "--out", out.path().to_str().unwrap()]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{stdout}");
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS ")).count(), 5);

    let log = std::fs::read_to_string(out.path().join("events.jsonl")).unwrap();
    let golden = std::fs::read_to_string(common::golden_dir().join("s3-light.jsonl")).unwrap();
    assert_eq!(log, golden);
    assert!(EventLog::parse_jsonl(&log).is_ok());

    let verdict: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.path().join("verdict.json")).unwrap()).unwrap();
    assert_eq!(verdict["passed"], true);
    for node in ["m1", "m2", "e1", "e2"] {
        let store = ChainStore::load(&out.path().join(format!("chains/{node}.tcdb"))).unwrap();
        assert!(store.head_height() > 50);
    }
    assert!(!out.path().join("chains/l1.tcdb").exists());
}

#[test]
fn seed_sweep_and_overrides() {
    let out = tempfile::tempdir().unwrap();
    let config = common::scenario_dir().join("s3-light.toml");
    let o = run(&[
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
        "--seeds",
        "3..5",
        "--until",
        "1000000",
        "--no-assert",
    ]);
    assert!(o.status.success());
    for seed in [3, 4] {
        let v = std::fs::read_to_string(out.path().join(format!("seed-{seed}/verdict.json"))).unwrap();
        assert!(v.contains(&format!("\"seed\": {seed}")));
    }
}

#[test]
fn failing_assertion_exits_1_and_bad_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let failing = dir.path().join("f.toml");
    std::fs::write(
        &failing,
        "name = \"f\"\nhorizon_ms = 60000\n[[assert]]\nkind = \"log_contains\"\nevent = \"TamperDetected\"\n",
    )
    .unwrap();
    let o = run(&["--config", failing.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("FAIL "));

    let bad = dir.path().join("b.toml");
    std::fs::write(&bad, "name = \"b\"\nhorizon_ms = 1000\nhorizon = 5\n").unwrap();
    let o = run(&["--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("config error"));
}
