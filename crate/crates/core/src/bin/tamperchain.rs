use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use tamperchain::scenario::{run_scenario, sweep, ConfigError, Overrides, ScenarioConfig, ScenarioReport};

/// Runs a tamper scenario and writes its event log and verdict.
#[derive(Debug, Parser)]
#[command(name = "tamperchain", version)]
struct Args {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the horizon, in simulated milliseconds.
    #[arg(long)]
    until: Option<u64>,
    /// Artifact directory. Defaults to `out/<scenario name>`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exit with status 1 when an assertion fails (default).
    #[arg(long = "assert", overrides_with = "no_assert")]
    assert: bool,
    /// Report assertion results but always exit 0.
    #[arg(long = "no-assert")]
    no_assert: bool,
    /// Runs every seed in `A..B`, in parallel, one artifact directory each.
    #[arg(long, value_parser = parse_range)]
    seeds: Option<std::ops::Range<u64>>,
}

fn parse_range(s: &str) -> Result<std::ops::Range<u64>, String> {
    let (a, b) = s.split_once("..").ok_or("expected A..B")?;
    let a: u64 = a.parse().map_err(|e| format!("{e}"))?;
    let b: u64 = b.parse().map_err(|e| format!("{e}"))?;
    if a >= b {
        return Err("empty seed range".into());
    }
    Ok(a..b)
}

fn report(r: &ScenarioReport, dir: &std::path::Path) -> std::io::Result<bool> {
    r.write_artifacts(dir)?;
    for v in &r.verdict {
        println!("{} {} ({})", if v.passed { "PASS" } else { "FAIL" }, v.assertion, v.detail);
    }
    println!(
        "{} seed={} {} -> {}",
        r.name,
        r.seed,
        if r.passed() { "passed" } else { "failed" },
        dir.display()
    );
    Ok(r.passed())
}

fn config_error(e: impl std::fmt::Display) -> ExitCode {
    eprintln!("config error: {e}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let mut cfg = match ScenarioConfig::load(&args.config) {
        Ok(c) => c,
        Err(e) => return config_error(e),
    };
    cfg.apply(&Overrides {
        seed: args.seed,
        until_ms: args.until,
    });
    let out = args.out.clone().unwrap_or_else(|| PathBuf::from("out").join(&cfg.name));
    let results: Vec<(PathBuf, Result<ScenarioReport, ConfigError>)> = match &args.seeds {
        Some(range) => sweep(&cfg, range.clone())
            .into_iter()
            .zip(range.clone())
            .map(|(r, s)| (out.join(format!("seed-{s}")), r))
            .collect(),
        None => vec![(out, run_scenario(&cfg))],
    };
    let mut all_passed = true;
    for (dir, r) in results {
        let r = match r {
            Ok(r) => r,
            Err(e) => return config_error(e),
        };
        match report(&r, &dir) {
            Ok(passed) => all_passed &= passed,
            Err(e) => {
                eprintln!("cannot write artifacts: {e}");
                return ExitCode::from(2);
            }
        }
    }
    if all_passed || args.no_assert {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
