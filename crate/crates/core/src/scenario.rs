//! Scenario files: a TOML description of a network, its devices, a schedule
//! of tampers and queries, and the assertions checked at the horizon.
//! The grammar is documented in `docs/config.md`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::iot::{fixture_source, logs_in_state, parse_fixture, DeviceConfig, ReadingSource, TamperLog};
use crate::netsim::{
    EventKind, EventLog, LightTamper, NodeConfig, NodeStore, Role, SimParams, Simulation, TamperAction,
};
use crate::params::ChainParams;
use crate::state::DEFAULT_CONTRACT;
use crate::tamper::majority_attack_rate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Network,
    Majority,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceEntry {
    pub device_id: String,
    pub host: String,
    #[serde(default = "default_contract")]
    pub contract: String,
    #[serde(default = "default_interval")]
    pub interval_secs: u64,
    /// Inline reading source.
    #[serde(default)]
    pub source: Option<ReadingSource>,
    /// Reading fixture path, relative to the scenario file.
    #[serde(default)]
    pub fixture: Option<PathBuf>,
}

fn default_contract() -> String {
    DEFAULT_CONTRACT.to_string()
}

fn default_interval() -> u64 {
    crate::iot::DEFAULT_READING_INTERVAL_SECS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TamperEntry {
    pub at_ms: u64,
    #[serde(flatten)]
    pub action: TamperAction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LightTamperEntry {
    pub at_ms: u64,
    #[serde(flatten)]
    pub tamper: LightTamper,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryEntry {
    pub at_ms: u64,
    pub device_id: String,
    pub seq: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeSet {
    /// Full nodes whose storage was never tampered with.
    #[default]
    Honest,
    /// Every full node.
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Assertion {
    /// A record has `value` in canonical state on the chosen full nodes.
    Record {
        device_id: String,
        seq: u64,
        value: i64,
        #[serde(default)]
        nodes: NodeSet,
    },
    /// Every honest full node holds a tamper log naming the record with the
    /// given old and new values.
    TamperLogOnChain {
        device_id: String,
        seq: u64,
        old: i64,
        new: i64,
    },
    /// No tampered block is canonical on an honest node and the original
    /// record value stands there.
    TamperedNonCanonical,
    /// Honest nodes held the original record again within `blocks` honest
    /// blocks of every injection.
    RecoveredWithin { blocks: u64 },
    /// Every honest full node demoted `node`, optionally with a given error.
    Demoted {
        node: String,
        #[serde(default)]
        error: Option<String>,
    },
    /// Nothing reaches `node` from a peer after that peer demoted it.
    NoDeliveriesAfterDemotion { node: String },
    LogContains {
        event: String,
        #[serde(default)]
        node: Option<String>,
        #[serde(default)]
        error: Option<String>,
    },
    /// The light node reorganized back onto the honest canonical chain.
    LightRecovered { node: String },
    /// Every transaction stranded on `node` was rebroadcast and then included
    /// within `blocks` blocks.
    StrandedMinedWithin { node: String, blocks: u64 },
    /// Attack win rate at `power` within the bounds.
    AttackRate {
        power: f64,
        #[serde(default)]
        min: Option<f64>,
        #[serde(default)]
        max: Option<f64>,
    },
    /// Attack win rate never decreases as power grows.
    AttackMonotone,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MajorityConfig {
    pub powers: Vec<f64>,
    pub fork_depth: u64,
    pub horizon_blocks: u64,
    /// Seeds `seed .. seed + runs`.
    pub runs: u64,
}

impl Default for MajorityConfig {
    fn default() -> Self {
        MajorityConfig {
            powers: vec![0.1, 0.3, 0.5, 0.7, 0.9],
            fork_depth: 2,
            horizon_blocks: 200,
            runs: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub horizon_ms: u64,
    #[serde(default)]
    pub chain: ChainParams,
    #[serde(default)]
    pub sim: SimParams,
    #[serde(default = "default_nodes")]
    pub nodes: Vec<NodeConfig>,
    #[serde(default)]
    pub devices: Vec<DeviceEntry>,
    #[serde(default)]
    pub tamper: Vec<TamperEntry>,
    #[serde(default)]
    pub light_tamper: Vec<LightTamperEntry>,
    #[serde(default)]
    pub query: Vec<QueryEntry>,
    #[serde(default)]
    pub majority: MajorityConfig,
    #[serde(default, rename = "assert")]
    pub assertions: Vec<Assertion>,
    /// Directory used to resolve fixture paths; set by the loader.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Two miners splitting the hash rate evenly and three endpoints.
pub fn default_nodes() -> Vec<NodeConfig> {
    let miner = |id: &str| NodeConfig {
        id: id.into(),
        role: Role::Miner,
        mining_power: 0.5,
    };
    let endpoint = |id: &str| NodeConfig {
        id: id.into(),
        role: Role::Endpoint,
        mining_power: 0.0,
    };
    vec![miner("m1"), miner("m2"), endpoint("e1"), endpoint("e2"), endpoint("e3")]
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid scenario file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Fixture(#[from] crate::iot::FixtureError),
    #[error(transparent)]
    Sim(#[from] crate::netsim::SimError),
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot write artifacts: {0}")]
    Io(#[from] std::io::Error),
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub until_ms: Option<u64>,
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<ScenarioConfig, ConfigError> {
        let cfg: ScenarioConfig = toml::from_str(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<ScenarioConfig, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = ScenarioConfig::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(until) = o.until_ms {
            self.horizon_ms = until;
        }
    }

    /// Resolves reading sources, loading fixtures from disk.
    pub fn device_configs(&self) -> Result<Vec<DeviceConfig>, ConfigError> {
        let mut out = Vec::new();
        for d in &self.devices {
            let source = match (&d.source, &d.fixture) {
                (Some(s), None) => s.clone(),
                (None, Some(path)) => {
                    let full = self.base_dir.join(path);
                    let text = fs::read_to_string(&full).map_err(|source| ConfigError::Io { path: full, source })?;
                    fixture_source(&parse_fixture(&text)?, &d.device_id, d.interval_secs)?
                }
                _ => {
                    return Err(ConfigError::Invalid(format!(
                        "device {} needs exactly one of source or fixture",
                        d.device_id
                    )))
                }
            };
            out.push(DeviceConfig {
                device_id: d.device_id.clone(),
                host: d.host.clone(),
                contract: d.contract.clone(),
                interval_secs: d.interval_secs,
                source,
            });
        }
        Ok(out)
    }

    /// Checks cross references and timing.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.mode == Mode::Majority {
            let m = &self.majority;
            if m.powers.iter().any(|p| !(0.0..1.0).contains(p)) {
                return bad("majority powers must lie in [0, 1)".into());
            }
            if m.fork_depth == 0 || m.runs == 0 {
                return bad("majority fork_depth and runs must be positive".into());
            }
            return Ok(());
        }
        if self.horizon_ms == 0 {
            return bad("horizon_ms must be positive".into());
        }
        let roles: BTreeMap<&str, Role> = self.nodes.iter().map(|n| (n.id.as_str(), n.role)).collect();
        let devices: BTreeSet<&str> = self.devices.iter().map(|d| d.device_id.as_str()).collect();
        for d in &self.devices {
            if !roles.contains_key(d.host.as_str()) {
                return bad(format!("device {} is hosted on unknown node {}", d.device_id, d.host));
            }
        }
        let mut times = Vec::new();
        for t in &self.tamper {
            match roles.get(t.action.spec.target_node.as_str()) {
                None => return bad(format!("tamper targets unknown node {}", t.action.spec.target_node)),
                Some(Role::Light) => return bad(format!("tamper target {} is a light node", t.action.spec.target_node)),
                Some(_) => {}
            }
            times.push(t.at_ms);
        }
        for t in &self.light_tamper {
            if roles.get(t.tamper.node.as_str()) != Some(&Role::Light) {
                return bad(format!("light_tamper target {} is not a light node", t.tamper.node));
            }
            times.push(t.at_ms);
        }
        for q in &self.query {
            if !devices.contains(q.device_id.as_str()) {
                return bad(format!("query names unknown device {}", q.device_id));
            }
            times.push(q.at_ms);
        }
        if let Some(t) = times.iter().find(|t| **t >= self.horizon_ms) {
            return bad(format!("event at {t} ms is not before the horizon {} ms", self.horizon_ms));
        }
        for a in &self.assertions {
            let node = match a {
                Assertion::Demoted { node, .. }
                | Assertion::NoDeliveriesAfterDemotion { node }
                | Assertion::LightRecovered { node }
                | Assertion::StrandedMinedWithin { node, .. } => Some(node),
                Assertion::LogContains { node, .. } => node.as_ref(),
                _ => None,
            };
            if let Some(n) = node {
                if !roles.contains_key(n.as_str()) {
                    return bad(format!("assertion names unknown node {n}"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssertionResult {
    pub assertion: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeSummary {
    pub node: String,
    pub role: Role,
    pub honest: bool,
    pub head: String,
    pub height: u64,
    pub td: String,
    pub bad_peers: Vec<String>,
    pub stranded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateSummary {
    pub power: f64,
    pub wins: usize,
    pub runs: usize,
    pub rate: f64,
}

pub struct ScenarioReport {
    pub name: String,
    pub seed: u64,
    pub log: EventLog,
    pub verdict: Vec<AssertionResult>,
    pub summaries: Vec<NodeSummary>,
    /// Tamper logs found in each full node's canonical state.
    pub tamper_logs: BTreeMap<String, Vec<TamperLog>>,
    pub rates: Vec<RateSummary>,
    /// Full-node stores, for writing chain database files.
    pub stores: BTreeMap<String, crate::chain::ChainStore>,
}

impl ScenarioReport {
    pub fn passed(&self) -> bool {
        self.verdict.iter().all(|r| r.passed)
    }

    /// Writes `events.jsonl`, `chains.json`, `tamper_logs.json`,
    /// `verdict.json` and one `chains/<node>.tcdb` per full node.
    pub fn write_artifacts(&self, dir: &Path) -> Result<(), std::io::Error> {
        fs::create_dir_all(dir.join("chains"))?;
        fs::write(dir.join("events.jsonl"), self.log.to_jsonl())?;
        fs::write(dir.join("chains.json"), pretty(&self.summaries))?;
        fs::write(dir.join("tamper_logs.json"), pretty(&self.tamper_logs))?;
        let verdict = serde_json::json!({
            "scenario": self.name,
            "seed": self.seed,
            "passed": self.passed(),
            "assertions": self.verdict,
            "attack_rates": self.rates,
        });
        fs::write(dir.join("verdict.json"), pretty(&verdict))?;
        for (node, store) in &self.stores {
            store
                .save(&dir.join("chains").join(format!("{node}.tcdb")))
                .map_err(|e| std::io::Error::other(e.to_string()))?;
        }
        Ok(())
    }
}

fn pretty<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("json") + "\n"
}

/// Loads, validates and runs a scenario file.
pub fn run_scenario_file(path: &Path, overrides: &Overrides) -> Result<ScenarioReport, ScenarioError> {
    let mut cfg = ScenarioConfig::load(path)?;
    cfg.apply(overrides);
    Ok(run_scenario(&cfg)?)
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioReport, ConfigError> {
    cfg.validate()?;
    match cfg.mode {
        Mode::Network => run_network(cfg),
        Mode::Majority => Ok(run_majority(cfg)),
    }
}

/// Builds the simulation with the whole schedule queued, without running it.
pub fn build_simulation(cfg: &ScenarioConfig) -> Result<Simulation, ConfigError> {
    let devices = cfg.device_configs()?;
    let mut sim = Simulation::new(cfg.chain.clone(), cfg.sim.clone(), &cfg.nodes, devices, cfg.seed)?;
    for t in &cfg.tamper {
        sim.schedule(t.at_ms, EventKind::TamperAction(Box::new(t.action.clone())));
    }
    for t in &cfg.light_tamper {
        sim.schedule(t.at_ms, EventKind::LightTamper(t.tamper.clone()));
    }
    for q in &cfg.query {
        sim.schedule(
            q.at_ms,
            EventKind::Query {
                device_id: q.device_id.clone(),
                seq: q.seq,
            },
        );
    }
    Ok(sim)
}

fn run_network(cfg: &ScenarioConfig) -> Result<ScenarioReport, ConfigError> {
    let mut sim = build_simulation(cfg)?;
    sim.run(cfg.horizon_ms);
    let verdict = cfg.assertions.iter().map(|a| check(a, &sim)).collect();
    let summaries = sim
        .nodes()
        .map(|n| NodeSummary {
            node: n.node_id.clone(),
            role: n.role,
            honest: sim.is_honest(&n.node_id),
            head: n.store.head().to_hex(),
            height: n.store.head_height(),
            td: n.store.head_td().to_string(),
            bad_peers: n
                .peers
                .values()
                .filter(|p| !p.is_active())
                .map(|p| p.peer_id.clone())
                .collect(),
            stranded: n.stranded().len(),
        })
        .collect();
    let mut tamper_logs = BTreeMap::new();
    let mut stores = BTreeMap::new();
    for n in sim.nodes() {
        if let NodeStore::Full(s) = &n.store {
            tamper_logs.insert(n.node_id.clone(), logs_in_state(s.canonical_state(), DEFAULT_CONTRACT));
            stores.insert(n.node_id.clone(), s.clone());
        }
    }
    Ok(ScenarioReport {
        name: cfg.name.clone(),
        seed: cfg.seed,
        log: sim.log.clone(),
        verdict,
        summaries,
        tamper_logs,
        rates: Vec::new(),
        stores,
    })
}

fn run_majority(cfg: &ScenarioConfig) -> ScenarioReport {
    let m = &cfg.majority;
    let mut log = EventLog::default();
    let mut rates = Vec::new();
    for &power in &m.powers {
        let (rate, outcomes) = majority_attack_rate(
            &cfg.chain,
            power,
            m.fork_depth,
            m.horizon_blocks,
            cfg.seed..cfg.seed + m.runs,
        );
        for (i, o) in outcomes.iter().enumerate() {
            log.push(
                0,
                "attacker",
                "AttackRun",
                format!(
                    "power={power} seed={} won={} gap={} honest_blocks={} attacker_blocks={}",
                    cfg.seed + i as u64,
                    o.attacker_won,
                    o.final_td_gap,
                    o.honest_blocks,
                    o.attacker_blocks
                ),
                None,
            );
        }
        let wins = outcomes.iter().filter(|o| o.attacker_won).count();
        log.push(
            0,
            "attacker",
            "AttackRate",
            format!("power={power} wins={wins}/{} rate={rate}", outcomes.len()),
            None,
        );
        rates.push(RateSummary {
            power,
            wins,
            runs: outcomes.len(),
            rate,
        });
    }
    let verdict = cfg
        .assertions
        .iter()
        .map(|a| check_rates(a, &rates))
        .collect();
    ScenarioReport {
        name: cfg.name.clone(),
        seed: cfg.seed,
        log,
        verdict,
        summaries: Vec::new(),
        tamper_logs: BTreeMap::new(),
        rates,
        stores: BTreeMap::new(),
    }
}

fn result(a: &Assertion, passed: bool, detail: String) -> AssertionResult {
    AssertionResult {
        assertion: serde_json::to_string(a).expect("json"),
        passed,
        detail,
    }
}

fn check_rates(a: &Assertion, rates: &[RateSummary]) -> AssertionResult {
    match a {
        Assertion::AttackRate { power, min, max } => {
            let Some(r) = rates.iter().find(|r| (r.power - power).abs() < 1e-9) else {
                return result(a, false, format!("power {power} was not run"));
            };
            let ok = min.is_none_or(|m| r.rate >= m) && max.is_none_or(|m| r.rate <= m);
            result(a, ok, format!("rate {} ({}/{})", r.rate, r.wins, r.runs))
        }
        Assertion::AttackMonotone => {
            let mut sorted = rates.to_vec();
            sorted.sort_by(|x, y| x.power.total_cmp(&y.power));
            let ok = sorted.windows(2).all(|w| w[0].rate <= w[1].rate);
            let seq: Vec<String> = sorted.iter().map(|r| format!("{}:{}", r.power, r.rate)).collect();
            result(a, ok, seq.join(" "))
        }
        _ => result(a, false, "only attack assertions apply in majority mode".into()),
    }
}

/// Evaluates one assertion against a finished simulation.
pub fn check(a: &Assertion, sim: &Simulation) -> AssertionResult {
    let honest: Vec<_> = sim.honest_full_nodes().collect();
    match a {
        Assertion::Record {
            device_id,
            seq,
            value,
            nodes,
        } => {
            let q = sim.query_record(device_id, *seq);
            let wrong: Vec<String> = q
                .iter()
                .filter(|(n, _)| *nodes == NodeSet::All || sim.is_honest(n))
                .filter(|(_, v)| **v != Some(*value))
                .map(|(n, v)| format!("{n}={v:?}"))
                .collect();
            result(a, wrong.is_empty() && !q.is_empty(), format!("mismatch: [{}]", wrong.join(", ")))
        }
        Assertion::TamperLogOnChain { device_id, seq, old, new } => {
            let field = format!("state:{device_id}:{seq}");
            let missing: Vec<String> = honest
                .iter()
                .filter(|n| {
                    let s = n.store.full().expect("full");
                    !logs_in_state(s.canonical_state(), DEFAULT_CONTRACT).iter().any(|l| {
                        l.field == field && l.old_text() == old.to_string() && l.new_text() == new.to_string()
                    })
                })
                .map(|n| n.node_id.clone())
                .collect();
            result(a, missing.is_empty(), format!("missing on [{}]", missing.join(", ")))
        }
        Assertion::TamperedNonCanonical => {
            let mut bad = Vec::new();
            for t in &sim.metrics.tampers {
                for n in &honest {
                    let s = n.store.full().expect("full");
                    let value = s.canonical_state().record(DEFAULT_CONTRACT, &t.device_id, t.seq);
                    let canonical = t.receipt.tampered != t.receipt.original && s.is_canonical(&t.receipt.tampered);
                    if canonical || value.map(|r| r.temperature) != Some(t.receipt.old_value) {
                        bad.push(n.node_id.clone());
                    }
                }
            }
            let ok = bad.is_empty() && !sim.metrics.tampers.is_empty();
            result(a, ok, format!("{} tampers, violated on [{}]", sim.metrics.tampers.len(), bad.join(", ")))
        }
        Assertion::RecoveredWithin { blocks } => {
            let worst = sim.metrics.tampers.iter().map(|t| t.recovery_blocks).max();
            let ok = worst.is_some_and(|w| w <= *blocks);
            result(a, ok, format!("worst recovery {worst:?} honest blocks"))
        }
        Assertion::Demoted { node, error } => {
            let missing: Vec<String> = honest
                .iter()
                .filter(|n| n.node_id != *node)
                .filter(|n| {
                    !sim.metrics.demotions.iter().any(|d| {
                        d.by == n.node_id && d.peer == *node && error.as_ref().is_none_or(|e| d.error.to_string() == *e)
                    })
                })
                .map(|n| n.node_id.clone())
                .collect();
            result(a, missing.is_empty(), format!("not demoted by [{}]", missing.join(", ")))
        }
        Assertion::NoDeliveriesAfterDemotion { node } => {
            let demoted_at: BTreeMap<&str, u64> = sim
                .metrics
                .demotions
                .iter()
                .filter(|d| d.peer == *node)
                .map(|d| (d.by.as_str(), d.time))
                .collect();
            let late = sim
                .metrics
                .deliveries
                .iter()
                .filter(|(t, from, to)| to == node && demoted_at.get(from.as_str()).is_some_and(|d| t > d))
                .count();
            let ok = !demoted_at.is_empty() && late == 0;
            result(a, ok, format!("{} demotions, {late} later deliveries", demoted_at.len()))
        }
        Assertion::LogContains { event, node, error } => {
            let count = sim
                .log
                .events
                .iter()
                .filter(|e| e.kind == *event)
                .filter(|e| node.as_ref().is_none_or(|n| e.node == *n))
                .filter(|e| error.as_ref().is_none_or(|x| e.error.as_ref() == Some(x)))
                .count();
            result(a, count > 0, format!("{count} matching events"))
        }
        Assertion::LightRecovered { node } => {
            let light = sim.node(node).and_then(|n| n.store.light());
            let reference = sim.reference_node().and_then(|n| n.store.full());
            let (Some(light), Some(reference)) = (light, reference) else {
                return result(a, false, "missing light or reference node".into());
            };
            let on_honest = reference.is_canonical(&light.head());
            let reorged = sim.metrics.light_reorgs.iter().any(|(_, n)| n == node);
            result(
                a,
                on_honest && reorged,
                format!("head on honest chain: {on_honest}, reorganized: {reorged}"),
            )
        }
        Assertion::StrandedMinedWithin { node, blocks } => {
            let Some(reference) = sim.reference_node().and_then(|n| n.store.full()) else {
                return result(a, false, "no reference node".into());
            };
            let records: Vec<_> = sim.metrics.stranded.iter().filter(|r| r.node == *node).collect();
            let mut worst = 0;
            let mut ok = !records.is_empty();
            for r in &records {
                let included = (1..=reference.head_height()).find(|h| {
                    reference
                        .canonical_block(*h)
                        .is_some_and(|b| b.transactions.iter().any(|tx| tx.hash() == r.tx))
                });
                match (included, r.rebroadcast_head) {
                    (Some(h), Some(at)) => worst = worst.max(h.saturating_sub(at)),
                    _ => ok = false,
                }
            }
            ok &= worst <= *blocks;
            result(a, ok, format!("{} stranded, worst {worst} blocks", records.len()))
        }
        Assertion::AttackRate { .. } | Assertion::AttackMonotone => {
            result(a, false, "attack assertions apply in majority mode only".into())
        }
    }
}

/// Runs one scenario for each seed in `seeds`, in parallel.
pub fn sweep(cfg: &ScenarioConfig, seeds: std::ops::Range<u64>) -> Vec<Result<ScenarioReport, ConfigError>> {
    use rayon::prelude::*;
    seeds
        .into_par_iter()
        .map(|seed| {
            let mut c = cfg.clone();
            c.seed = seed;
            run_scenario(&c)
        })
        .collect()
}
