//! Event logs of the bundled scenarios, frozen byte for byte.
//!
//! Regenerate after an intended behaviour change with
//! `UPDATE_GOLDEN=1 cargo test --test golden`.

mod common;

use std::fs;

use tamperchain::scenario::{run_scenario_file, Overrides};

fn check(name: &str) {
    let path = common::scenario_dir().join(format!("{name}.toml"));
    let report = run_scenario_file(&path, &Overrides::default()).expect("scenario runs");
    let got = report.log.to_jsonl();
    let golden = common::golden_dir().join(format!("{name}.jsonl"));
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::create_dir_all(common::golden_dir()).unwrap();
        fs::write(&golden, &got).unwrap();
        return;
    }
    let want = fs::read_to_string(&golden)
        .unwrap_or_else(|e| panic!("{}: {e}; run with UPDATE_GOLDEN=1", golden.display()));
    if got != want {
        let line = got
            .lines()
            .zip(want.lines())
            .position(|(a, b)| a != b)
            .unwrap_or_else(|| got.lines().count().min(want.lines().count()));
        panic!(
            "{name}: log differs from golden at line {}\n got: {:?}\nwant: {:?}",
            line + 1,
            got.lines().nth(line),
            want.lines().nth(line)
        );
    }
}

#[test]
fn demo_recovery() {
    check("demo-recovery");
}

#[test]
fn s1_low() {
    check("s1-low");
}

#[test]
fn s1_high() {
    check("s1-high");
}

#[test]
fn s2_low() {
    check("s2-low");
}

#[test]
fn s2_high() {
    check("s2-high");
}

#[test]
fn s3_light() {
    check("s3-light");
}

#[test]
fn majority_attack() {
    check("majority-attack");
}
