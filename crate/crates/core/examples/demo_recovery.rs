// Runs the bundled recovery scenario and prints what each node reports for
// the tampered reading over time.
use std::path::Path;

use tamperchain::scenario::{build_simulation, ScenarioConfig};

fn main() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/demo-recovery.toml");
    let cfg = ScenarioConfig::load(&path).expect("bundled scenario");
    let mut sim = build_simulation(&cfg).unwrap();

    let tamper_at = cfg.tamper[0].at_ms;
    for t in [tamper_at - 1, tamper_at + 1, tamper_at + 60_000, cfg.horizon_ms] {
        sim.run(t);
        let values: Vec<String> = sim
            .query_record("dev-1", 0)
            .into_iter()
            .map(|(n, v)| format!("{n}={}", v.map_or("-".into(), |c| format!("{:.2}", c as f64 / 100.0))))
            .collect();
        println!("t={:>7.1}s  {}", t as f64 / 1000.0, values.join("  "));
    }
    for e in sim.log.events.iter().filter(|e| e.kind.starts_with("Tamper")) {
        println!("{:>9} {:<3} {:<16} {}", e.time, e.node, e.kind, e.detail);
    }
}
