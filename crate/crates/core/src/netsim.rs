//! Discrete-event simulation of a small full-mesh network: mining races,
//! block and transaction gossip, header/body sync, light clients, bad-peer
//! demotion, sensor ingestion and tamper injection.
//!
//! Everything is driven from one event queue ordered by `(time, insertion)`
//! and every random draw comes from a per-node ChaCha stream, so a run is a
//! pure function of its inputs.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use primitive_types::U256;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{ChainStore, HeaderChain, ImportOutcome};
use crate::iot::{audit_store, make_sensor_tx, tamper_log_tx, DeviceConfig, IotError, TamperLog};
use crate::miner::{mine_child, select_transactions};
use crate::params::ChainParams;
use crate::pow::ComputeBudget;
use crate::primitives::{Block, Hash256, Header, Transaction};
use crate::state::DEFAULT_CONTRACT;
use crate::tamper::{forge_light_headers, tamper_store, TamperEdit, TamperError, TamperReceipt, TamperSpec};
use crate::validation::ValidationError;

pub const LATENCY_MS: u64 = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Miner,
    Endpoint,
    Light,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeConfig {
    pub id: String,
    pub role: Role,
    #[serde(default)]
    pub mining_power: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimParams {
    pub latency_ms: u64,
    /// How often light nodes look for a sync peer.
    pub light_sync_interval_ms: u64,
    /// Period of the background chain audit on full nodes; 0 disables it.
    pub audit_interval_ms: u64,
    /// A sync request to the same peer is not repeated within this window.
    pub sync_retry_ms: u64,
    /// Headers returned per GetHeaders request.
    pub max_headers: u64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            latency_ms: LATENCY_MS,
            light_sync_interval_ms: 10_000,
            audit_interval_ms: 600_000,
            sync_retry_ms: 2_000,
            max_headers: 192,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PeerStatus {
    Active,
    Bad,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeerRecord {
    pub peer_id: String,
    pub role: Role,
    pub advertised_head: Hash256,
    pub advertised_td: U256,
    pub advertised_height: u64,
    pub status: PeerStatus,
}

impl PeerRecord {
    pub fn is_active(&self) -> bool {
        self.status == PeerStatus::Active
    }
}

#[derive(Debug, Clone)]
pub enum NodeStore {
    Full(ChainStore),
    Light(HeaderChain),
}

impl NodeStore {
    pub fn head(&self) -> Hash256 {
        match self {
            NodeStore::Full(s) => s.head(),
            NodeStore::Light(c) => c.head(),
        }
    }

    pub fn head_td(&self) -> U256 {
        match self {
            NodeStore::Full(s) => s.head_td(),
            NodeStore::Light(c) => c.head_td(),
        }
    }

    pub fn head_height(&self) -> u64 {
        match self {
            NodeStore::Full(s) => s.head_height(),
            NodeStore::Light(c) => c.head_header().height,
        }
    }

    pub fn full(&self) -> Option<&ChainStore> {
        match self {
            NodeStore::Full(s) => Some(s),
            NodeStore::Light(_) => None,
        }
    }

    pub fn light(&self) -> Option<&HeaderChain> {
        match self {
            NodeStore::Light(c) => Some(c),
            NodeStore::Full(_) => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NodeSim {
    pub node_id: String,
    pub role: Role,
    pub mining_power: f64,
    pub store: NodeStore,
    pub peers: BTreeMap<String, PeerRecord>,
    pub tx_pool: Vec<Transaction>,
    rng: ChaCha8Rng,
    next_seq: u64,
    stranded: Vec<Transaction>,
    pending_logs: Vec<TamperLog>,
    detected: BTreeSet<(Hash256, String)>,
    mining_token: u64,
    sync_requested: BTreeMap<String, u64>,
}

impl NodeSim {
    pub fn stranded(&self) -> &[Transaction] {
        &self.stranded
    }

    pub fn is_full(&self) -> bool {
        self.role != Role::Light
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    NewBlock(Box<Block>),
    NewTx(Transaction),
    Status { head: Hash256, td: U256, height: u64 },
    GetHeaders { from_height: u64 },
    Headers(Vec<Header>),
    GetBodies(Vec<Hash256>),
    Bodies(Vec<Block>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TamperAction {
    #[serde(flatten)]
    pub spec: TamperSpec,
    /// Also push the tampered block to the target's peers.
    #[serde(default)]
    pub announce: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LightTamper {
    pub node: String,
    /// Forged height relative to the highest full-node head.
    #[serde(default = "default_above")]
    pub above: u64,
    #[serde(default = "default_light_budget")]
    pub budget: u64,
}

fn default_above() -> u64 {
    3
}

fn default_light_budget() -> u64 {
    1 << 24
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    BlockFound { node: String, token: u64 },
    Deliver { from: String, to: String, msg: Message },
    SensorTick { device: usize, tick: u64 },
    TamperAction(Box<TamperAction>),
    LightTamper(LightTamper),
    SyncTick { node: String },
    AuditTick { node: String, periodic: bool },
    Query { device_id: String, seq: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimEvent {
    pub time: u64,
    pub kind: EventKind,
}

/// One line of the JSONL event log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEvent {
    pub time: u64,
    pub node: String,
    pub kind: String,
    pub detail: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventLog {
    pub events: Vec<LogEvent>,
}

impl EventLog {
    pub fn push(&mut self, time: u64, node: &str, kind: &str, detail: String, error: Option<String>) {
        self.events.push(LogEvent {
            time,
            node: node.to_string(),
            kind: kind.to_string(),
            detail,
            error,
        });
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("log lines serialize"));
            out.push('\n');
        }
        out
    }

    pub fn write_jsonl(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(self.to_jsonl().as_bytes())
    }

    pub fn parse_jsonl(text: &str) -> Result<EventLog, serde_json::Error> {
        let events = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<_, _>>()?;
        Ok(EventLog { events })
    }

    pub fn of_kind<'a>(&'a self, kind: &'a str) -> impl Iterator<Item = &'a LogEvent> + 'a {
        self.events.iter().filter(move |e| e.kind == kind)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TamperRecord {
    pub time: u64,
    pub receipt: TamperReceipt,
    pub device_id: String,
    pub seq: u64,
    /// Honest blocks found before the injection.
    pub honest_blocks_at: u64,
    /// Honest blocks found after injection up to the last moment any honest
    /// node's canonical record differed from the original.
    pub recovery_blocks: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrandedRecord {
    pub node: String,
    pub tx: Hash256,
    pub stranded_at: u64,
    pub rebroadcast_at: Option<u64>,
    /// Head height of the first honest miner at rebroadcast time.
    pub rebroadcast_head: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Demotion {
    pub time: u64,
    pub by: String,
    pub peer: String,
    pub error: ValidationError,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Metrics {
    pub tampers: Vec<TamperRecord>,
    pub demotions: Vec<Demotion>,
    /// `(time, from, to)` of every delivered message.
    pub deliveries: Vec<(u64, String, String)>,
    pub honest_blocks_found: u64,
    pub stranded: Vec<StrandedRecord>,
    pub light_reorgs: Vec<(u64, String)>,
    pub light_tampered: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BroadcastReport {
    pub tx: Hash256,
    pub recipients: Vec<String>,
}

impl BroadcastReport {
    pub fn is_stranded(&self) -> bool {
        self.recipients.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("duplicate node id {0}")]
    DuplicateNode(String),
    #[error("device {device} is hosted on unknown node {host}")]
    UnknownHost { device: String, host: String },
    #[error("mining power must be non-negative and sum to 1 over miners, got {0}")]
    BadPower(f64),
    #[error("device {0} has a zero reading interval")]
    ZeroInterval(String),
}

pub struct Simulation {
    params: ChainParams,
    sim: SimParams,
    seed: u64,
    now: u64,
    until: u64,
    insertion: u64,
    queue: BTreeMap<(u64, u64), EventKind>,
    nodes: BTreeMap<String, NodeSim>,
    devices: Vec<DeviceConfig>,
    /// Nodes whose storage has been tampered with.
    tampered: BTreeSet<String>,
    pub log: EventLog,
    pub metrics: Metrics,
}

fn node_rng(seed: u64, id: &str) -> ChaCha8Rng {
    let h = crate::primitives::hash_concat(&[&seed.to_be_bytes(), id.as_bytes()]);
    ChaCha8Rng::from_seed(h.0)
}

impl Simulation {
    pub fn new(
        params: ChainParams,
        sim: SimParams,
        nodes: &[NodeConfig],
        devices: Vec<DeviceConfig>,
        seed: u64,
    ) -> Result<Simulation, SimError> {
        let mut map = BTreeMap::new();
        for n in nodes {
            if map.contains_key(&n.id) {
                return Err(SimError::DuplicateNode(n.id.clone()));
            }
            if n.mining_power.is_nan() || n.mining_power < 0.0 {
                return Err(SimError::BadPower(n.mining_power));
            }
            let store = match n.role {
                Role::Light => NodeStore::Light(HeaderChain::new(params.clone())),
                _ => NodeStore::Full(ChainStore::new(params.clone())),
            };
            map.insert(
                n.id.clone(),
                NodeSim {
                    node_id: n.id.clone(),
                    role: n.role,
                    mining_power: if n.role == Role::Miner { n.mining_power } else { 0.0 },
                    store,
                    peers: BTreeMap::new(),
                    tx_pool: Vec::new(),
                    rng: node_rng(seed, &n.id),
                    next_seq: 0,
                    stranded: Vec::new(),
                    pending_logs: Vec::new(),
                    detected: BTreeSet::new(),
                    mining_token: 0,
                    sync_requested: BTreeMap::new(),
                },
            );
        }
        let total: f64 = map.values().filter(|n| n.role == Role::Miner).map(|n| n.mining_power).sum();
        let any_miner = map.values().any(|n| n.role == Role::Miner);
        if any_miner && (total - 1.0).abs() > 1e-9 {
            return Err(SimError::BadPower(total));
        }
        let (genesis, _) = params.genesis();
        let (ghash, gtd) = (genesis.hash(), genesis.header.difficulty);
        let roles: Vec<(String, Role)> = map.values().map(|n| (n.node_id.clone(), n.role)).collect();
        for node in map.values_mut() {
            for (id, role) in &roles {
                if *id != node.node_id {
                    node.peers.insert(
                        id.clone(),
                        PeerRecord {
                            peer_id: id.clone(),
                            role: *role,
                            advertised_head: ghash,
                            advertised_td: gtd,
                            advertised_height: 0,
                            status: PeerStatus::Active,
                        },
                    );
                }
            }
        }
        for d in &devices {
            if !map.contains_key(&d.host) {
                return Err(SimError::UnknownHost {
                    device: d.device_id.clone(),
                    host: d.host.clone(),
                });
            }
            if d.interval_secs == 0 {
                return Err(SimError::ZeroInterval(d.device_id.clone()));
            }
        }
        let mut s = Simulation {
            params,
            sim,
            seed,
            now: 0,
            until: 0,
            insertion: 0,
            queue: BTreeMap::new(),
            nodes: map,
            devices,
            tampered: BTreeSet::new(),
            log: EventLog::default(),
            metrics: Metrics::default(),
        };
        let ids: Vec<String> = s.nodes.keys().cloned().collect();
        for id in &ids {
            s.redraw_mining(id);
            match s.nodes[id].role {
                Role::Light => s.schedule(s.sim.light_sync_interval_ms, EventKind::SyncTick { node: id.clone() }),
                _ if s.sim.audit_interval_ms > 0 => s.schedule(
                    s.sim.audit_interval_ms,
                    EventKind::AuditTick {
                        node: id.clone(),
                        periodic: true,
                    },
                ),
                _ => {}
            }
        }
        for i in 0..s.devices.len() {
            let t = s.devices[i].interval_secs * 1000;
            s.schedule(t, EventKind::SensorTick { device: i, tick: 1 });
        }
        Ok(s)
    }

    pub fn params(&self) -> &ChainParams {
        &self.params
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn node(&self, id: &str) -> Option<&NodeSim> {
        self.nodes.get(id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &NodeSim> {
        self.nodes.values()
    }

    pub fn devices(&self) -> &[DeviceConfig] {
        &self.devices
    }

    /// Nodes whose storage was never tampered with.
    pub fn is_honest(&self, id: &str) -> bool {
        !self.tampered.contains(id)
    }

    pub fn honest_full_nodes(&self) -> impl Iterator<Item = &NodeSim> {
        self.nodes
            .values()
            .filter(|n| n.is_full() && !self.tampered.contains(&n.node_id))
    }

    pub fn schedule(&mut self, time: u64, kind: EventKind) {
        let time = time.max(self.now);
        self.queue.insert((time, self.insertion), kind);
        self.insertion += 1;
    }

    pub fn schedule_all(&mut self, events: impl IntoIterator<Item = SimEvent>) {
        for e in events {
            self.schedule(e.time, e.kind);
        }
    }

    /// Processes every event with time at most `until`.
    pub fn run(&mut self, until: u64) -> &EventLog {
        self.until = until;
        while let Some(entry) = self.queue.first_entry() {
            if entry.key().0 > until {
                break;
            }
            let ((time, _), kind) = entry.remove_entry();
            self.now = time;
            self.dispatch(kind);
        }
        self.now = self.now.max(until);
        &self.log
    }

    /// Whether any event is still queued at or before `until`.
    pub fn has_pending(&self, until: u64) -> bool {
        self.queue.keys().next().is_some_and(|(t, _)| *t <= until)
    }

    fn emit(&mut self, node: &str, kind: &str, detail: String, error: Option<String>) {
        self.log.push(self.now, node, kind, detail, error);
    }

    fn dispatch(&mut self, kind: EventKind) {
        match kind {
            EventKind::BlockFound { node, token } => self.on_block_found(&node, token),
            EventKind::Deliver { from, to, msg } => self.on_deliver(&from, &to, msg),
            EventKind::SensorTick { device, tick } => self.on_sensor_tick(device, tick),
            EventKind::TamperAction(action) => {
                let _ = self.inject(&action);
            }
            EventKind::LightTamper(t) => {
                let network = self.network_height();
                let forged = network + t.above;
                match self.tamper_light_head(&t.node, forged, ComputeBudget::new(t.budget)) {
                    Ok(hashes) => {
                        let td = self.nodes[&t.node].store.head_td();
                        self.emit(
                            &t.node,
                            "LightTamper",
                            format!("forged {} headers to h={forged} td={td} network h={network}", hashes.len()),
                            None,
                        );
                    }
                    Err(e) => self.emit(&t.node, "TamperFailed", e.to_string(), None),
                }
            }
            EventKind::SyncTick { node } => self.on_sync_tick(&node),
            EventKind::AuditTick { node, periodic } => self.on_audit_tick(&node, periodic),
            EventKind::Query { device_id, seq } => {
                for (node, value) in self.query_record(&device_id, seq) {
                    let v = value.map_or("missing".to_string(), |v| v.to_string());
                    self.emit(&node, "Query", format!("{device_id}:{seq}={v}"), None);
                }
            }
        }
    }

    fn blocked(&self, a: &str, b: &str) -> bool {
        let bad = |x: &str, y: &str| {
            self.nodes
                .get(x)
                .and_then(|n| n.peers.get(y))
                .is_none_or(|p| !p.is_active())
        };
        bad(a, b) || bad(b, a)
    }

    fn send(&mut self, from: &str, to: &str, msg: Message) {
        if self.blocked(from, to) {
            return;
        }
        let t = self.now + self.sim.latency_ms;
        self.schedule(
            t,
            EventKind::Deliver {
                from: from.to_string(),
                to: to.to_string(),
                msg,
            },
        );
    }

    fn active_peers(&self, id: &str) -> Vec<String> {
        self.nodes[id]
            .peers
            .values()
            .filter(|p| p.is_active())
            .map(|p| p.peer_id.clone())
            .collect()
    }

    fn network_height(&self) -> u64 {
        self.nodes
            .values()
            .filter(|n| n.is_full())
            .map(|n| n.store.head_height())
            .max()
            .unwrap_or(0)
    }

    fn redraw_mining(&mut self, id: &str) {
        let spacing = self.params.target_spacing_secs.max(1) as f64;
        let node = self.nodes.get_mut(id).expect("known node");
        if node.role != Role::Miner || node.mining_power <= 0.0 {
            return;
        }
        node.mining_token += 1;
        let token = node.mining_token;
        let rate = node.mining_power / spacing;
        let secs = Exp::new(rate).expect("positive rate").sample(&mut node.rng);
        let delay = ((secs * 1000.0).ceil() as u64).max(1);
        let t = self.now + delay;
        self.schedule(
            t,
            EventKind::BlockFound {
                node: id.to_string(),
                token,
            },
        );
    }

    fn on_block_found(&mut self, id: &str, token: u64) {
        let node = self.nodes.get_mut(id).expect("known node");
        if token != node.mining_token {
            return;
        }
        let NodeStore::Full(store) = &mut node.store else { return };
        let parent = store.head_block().header.clone();
        let state = store.canonical_state().clone();
        let txs = select_transactions(&node.tx_pool, &state, parent.gas_limit);
        let uncles = store.uncle_candidates(store.head());
        let timestamp = (self.now / 1000).max(parent.timestamp + 1);
        let rng_seed = node.rng.next_u64();
        let (block, transition) = mine_child(&parent, &state, txs, uncles, timestamp, rng_seed, &self.params)
            .expect("honest block assembly");
        let failed: BTreeSet<Hash256> = transition
            .receipts
            .iter()
            .filter(|r| !r.success)
            .map(|r| r.tx_hash)
            .collect();
        node.tx_pool.retain(|tx| !failed.contains(&tx.hash()));
        let hash = block.hash();
        store.insert_validated(block.clone(), transition.state);
        let td = store.head_td();
        let detail = format!(
            "{} h={} txs={} uncles={} td={td}",
            hash.short(),
            block.height(),
            block.transactions.len(),
            block.uncles.len()
        );
        if self.is_honest(id) {
            self.metrics.honest_blocks_found += 1;
        }
        self.emit(id, "BlockFound", detail, None);
        for peer in self.active_peers(id) {
            self.send(id, &peer, Message::NewBlock(Box::new(block.clone())));
        }
        self.on_head_change(id);
    }

    fn on_head_change(&mut self, id: &str) {
        let node = &self.nodes[id];
        if node.is_full() {
            let (head, td, height) = (node.store.head(), node.store.head_td(), node.store.head_height());
            for peer in self.active_peers(id) {
                self.send(id, &peer, Message::Status { head, td, height });
            }
        }
        self.redraw_mining(id);
        self.retry_stranded(id);
        self.try_upload(id);
        self.track_recovery(id);
    }

    fn track_recovery(&mut self, id: &str) {
        if !self.is_honest(id) {
            return;
        }
        let Some(store) = self.nodes[id].store.full() else { return };
        let found = self.metrics.honest_blocks_found;
        for t in &mut self.metrics.tampers {
            let value = store
                .canonical_state()
                .record(DEFAULT_CONTRACT, &t.device_id, t.seq)
                .map(|r| r.temperature);
            let diverged = value != Some(t.receipt.old_value)
                || (t.receipt.tampered != t.receipt.original && store.is_canonical(&t.receipt.tampered));
            if diverged {
                t.recovery_blocks = found.saturating_sub(t.honest_blocks_at);
            }
        }
    }

    fn demote(&mut self, by: &str, peer: &str, error: ValidationError) {
        let node = self.nodes.get_mut(by).expect("known node");
        let Some(rec) = node.peers.get_mut(peer) else { return };
        if !rec.is_active() {
            return;
        }
        rec.status = PeerStatus::Bad;
        node.sync_requested.remove(peer);
        self.metrics.demotions.push(Demotion {
            time: self.now,
            by: by.to_string(),
            peer: peer.to_string(),
            error,
        });
        self.emit(by, "PeerDemoted", format!("peer={peer}"), Some(error.to_string()));
    }

    fn request_sync(&mut self, id: &str, peer: &str, from_height: u64) {
        let now = self.now;
        let retry = self.sim.sync_retry_ms;
        let node = self.nodes.get_mut(id).expect("known node");
        if let Some(t) = node.sync_requested.get(peer) {
            if now < t + retry {
                return;
            }
        }
        node.sync_requested.insert(peer.to_string(), now);
        self.emit(id, "SyncRequest", format!("peer={peer} from={from_height}"), None);
        self.send(id, peer, Message::GetHeaders { from_height });
    }

    /// First height to request from `peer`: a few blocks below the lower
    /// of the two heads, so the reply links to something already known.
    fn sync_from(&self, id: &str, peer: &str) -> u64 {
        let node = &self.nodes[id];
        let theirs = node.peers.get(peer).map_or(0, |p| p.advertised_height);
        node.store.head_height().min(theirs).saturating_sub(8).max(1)
    }

    fn on_deliver(&mut self, from: &str, to: &str, msg: Message) {
        if self.blocked(from, to) {
            return;
        }
        self.metrics
            .deliveries
            .push((self.now, from.to_string(), to.to_string()));
        match msg {
            Message::NewBlock(block) => self.on_new_block(from, to, *block),
            Message::NewTx(tx) => {
                let node = self.nodes.get_mut(to).expect("known node");
                if !node.is_full() || node.tx_pool.contains(&tx) {
                    return;
                }
                let detail = format!("tx {} from {from} seq={}", tx.hash().short(), tx.seq);
                node.tx_pool.push(tx);
                self.emit(to, "NewTxMsg", detail, None);
            }
            Message::Status { head, td, height } => {
                let node = self.nodes.get_mut(to).expect("known node");
                if let Some(p) = node.peers.get_mut(from) {
                    p.advertised_head = head;
                    p.advertised_td = td;
                    p.advertised_height = height;
                }
                if node.is_full() && td > node.store.head_td() {
                    let h = self.sync_from(to, from);
                    self.request_sync(to, from, h);
                }
                self.retry_stranded(to);
            }
            Message::GetHeaders { from_height } => {
                let Some(store) = self.nodes[to].store.full() else { return };
                let last = store
                    .head_height()
                    .min(from_height + self.sim.max_headers.saturating_sub(1));
                let headers: Vec<Header> = (from_height..=last)
                    .filter_map(|h| store.canonical_block(h).map(|b| b.header.clone()))
                    .collect();
                self.send(to, from, Message::Headers(headers));
            }
            Message::Headers(headers) => self.on_headers(from, to, headers),
            Message::GetBodies(hashes) => {
                let Some(store) = self.nodes[to].store.full() else { return };
                let blocks: Vec<Block> = hashes.iter().filter_map(|h| store.block(h).cloned()).collect();
                self.send(to, from, Message::Bodies(blocks));
            }
            Message::Bodies(blocks) => {
                self.nodes.get_mut(to).expect("known node").sync_requested.remove(from);
                for b in blocks {
                    if !self.import_logged(from, to, b, "SyncImport") {
                        break;
                    }
                }
            }
        }
    }

    fn on_new_block(&mut self, from: &str, to: &str, block: Block) {
        match self.nodes[to].role {
            Role::Light => {
                if self.nodes[to].store.light().is_some_and(|c| c.contains(&block.hash())) {
                    return;
                }
                let h = block.height();
                let outcome = self.light_import_header(to, block.header);
                self.log_import(to, from, &block_detail_light(h), "NewBlockMsg", &outcome);
                self.after_import(from, to, &outcome);
            }
            _ => {
                if self.nodes[to].store.full().is_some_and(|s| s.contains(&block.hash())) {
                    return;
                }
                self.import_logged(from, to, block, "NewBlockMsg");
            }
        }
    }

    /// Imports a full block, logs it, and reacts. Returns false if the sender
    /// was demoted.
    fn import_logged(&mut self, from: &str, to: &str, block: Block, kind: &str) -> bool {
        let NodeStore::Full(store) = &mut self.nodes.get_mut(to).expect("known node").store else {
            return true;
        };
        let what = format!("{} h={}", block.hash().short(), block.height());
        if store.contains(&block.hash()) {
            return true;
        }
        let outcome = store.import_block(block);
        self.log_import(to, from, &what, kind, &outcome);
        self.after_import(from, to, &outcome)
    }

    fn log_import(&mut self, to: &str, from: &str, what: &str, kind: &str, outcome: &ImportOutcome) {
        let error = match outcome {
            ImportOutcome::Rejected(e) => Some(e.to_string()),
            _ => None,
        };
        let detail = match outcome {
            ImportOutcome::Rejected(_) => format!("{what} from {from} -> Rejected"),
            o => format!("{what} from {from} -> {}", o.name()),
        };
        self.emit(to, kind, detail, error);
    }

    fn after_import(&mut self, from: &str, to: &str, outcome: &ImportOutcome) -> bool {
        match outcome {
            ImportOutcome::Rejected(ValidationError::UnknownParent) => {
                let h = self.sync_from(to, from);
                self.request_sync(to, from, h);
                true
            }
            ImportOutcome::Rejected(e) if e.is_falsification() => {
                self.demote(to, from, *e);
                false
            }
            ImportOutcome::Rejected(_) | ImportOutcome::SideChain => true,
            o => {
                if self.nodes[to].role == Role::Light && matches!(o, ImportOutcome::Reorganized { .. }) {
                    self.metrics.light_reorgs.push((self.now, to.to_string()));
                }
                self.on_head_change(to);
                true
            }
        }
    }

    fn on_headers(&mut self, from: &str, to: &str, headers: Vec<Header>) {
        let Some(first) = headers.first() else {
            self.nodes.get_mut(to).expect("known node").sync_requested.remove(from);
            return;
        };
        let parent_known = match &self.nodes[to].store {
            NodeStore::Full(s) => s.contains(&first.parent_hash),
            NodeStore::Light(c) => c.contains(&first.parent_hash),
        };
        if !parent_known && first.height > 1 {
            self.nodes.get_mut(to).expect("known node").sync_requested.remove(from);
            self.request_sync(to, from, 1);
            return;
        }
        match self.nodes[to].role {
            Role::Light => {
                self.nodes.get_mut(to).expect("known node").sync_requested.remove(from);
                for h in headers {
                    if self.nodes[to].store.light().is_some_and(|c| c.contains(&h.hash())) {
                        continue;
                    }
                    let what = block_detail_light(h.height);
                    let outcome = self.light_import_header(to, h);
                    self.log_import(to, from, &what, "SyncImport", &outcome);
                    if !self.after_import(from, to, &outcome) {
                        break;
                    }
                }
            }
            _ => {
                let store = self.nodes[to].store.full().expect("full node");
                let wanted: Vec<Hash256> = headers
                    .iter()
                    .map(|h| h.hash())
                    .filter(|h| !store.contains(h))
                    .collect();
                if wanted.is_empty() {
                    self.nodes.get_mut(to).expect("known node").sync_requested.remove(from);
                } else {
                    self.send(to, from, Message::GetBodies(wanted));
                }
            }
        }
    }

    /// Header-only import on a light node.
    pub fn light_import_header(&mut self, id: &str, header: Header) -> ImportOutcome {
        match &mut self.nodes.get_mut(id).expect("known node").store {
            NodeStore::Light(c) => c.import_header(header),
            NodeStore::Full(_) => ImportOutcome::Rejected(ValidationError::MissingParentState),
        }
    }

    /// An active full peer advertising a strictly better (td, height) than
    /// the node's own head, best first.
    pub fn select_sync_peer(&self, id: &str) -> Option<&PeerRecord> {
        let node = &self.nodes[id];
        let local = (node.store.head_td(), node.store.head_height());
        node.peers
            .values()
            .filter(|p| p.is_active() && p.role != Role::Light)
            .filter(|p| (p.advertised_td, p.advertised_height) > local)
            .max_by(|a, b| {
                (a.advertised_td, a.advertised_height)
                    .cmp(&(b.advertised_td, b.advertised_height))
                    .then(b.peer_id.cmp(&a.peer_id))
            })
    }

    /// Peers that will take a transaction from `id`: active full nodes whose
    /// advertised head is not behind the sender's.
    fn tx_recipients(&self, id: &str) -> Vec<String> {
        let node = &self.nodes[id];
        let local = node.store.head_td();
        node.peers
            .values()
            .filter(|p| p.is_active() && p.role != Role::Light && p.advertised_td >= local)
            .map(|p| p.peer_id.clone())
            .collect()
    }

    /// Sends `tx` from `id` to every suitable peer. With no suitable peer the
    /// transaction is kept as stranded and retried later.
    pub fn send_transaction(&mut self, id: &str, tx: Transaction) -> BroadcastReport {
        let hash = tx.hash();
        let recipients = self.tx_recipients(id);
        let node = self.nodes.get_mut(id).expect("known node");
        if node.is_full() && !node.tx_pool.contains(&tx) {
            node.tx_pool.push(tx.clone());
        }
        if recipients.is_empty() {
            node.stranded.push(tx.clone());
            self.metrics.stranded.push(StrandedRecord {
                node: id.to_string(),
                tx: hash,
                stranded_at: self.now,
                rebroadcast_at: None,
                rebroadcast_head: None,
            });
            self.emit(
                id,
                "TxStranded",
                format!("tx {} seq={} broadcast to null", hash.short(), tx.seq),
                None,
            );
        } else {
            self.emit(
                id,
                "TxSent",
                format!("tx {} seq={} recipients={}", hash.short(), tx.seq, recipients.len()),
                None,
            );
            for r in &recipients {
                self.send(id, r, Message::NewTx(tx.clone()));
            }
        }
        BroadcastReport { tx: hash, recipients }
    }

    fn retry_stranded(&mut self, id: &str) {
        if self.nodes[id].stranded.is_empty() {
            return;
        }
        let recipients = self.tx_recipients(id);
        if recipients.is_empty() {
            return;
        }
        let txs = std::mem::take(&mut self.nodes.get_mut(id).expect("known node").stranded);
        let reference = self.reference_height();
        for tx in txs {
            let hash = tx.hash();
            self.emit(
                id,
                "TxRebroadcast",
                format!("tx {} seq={} recipients={}", hash.short(), tx.seq, recipients.len()),
                None,
            );
            for r in &recipients {
                self.send(id, r, Message::NewTx(tx.clone()));
            }
            if let Some(rec) = self
                .metrics
                .stranded
                .iter_mut()
                .find(|r| r.tx == hash && r.rebroadcast_at.is_none())
            {
                rec.rebroadcast_at = Some(self.now);
                rec.rebroadcast_head = reference;
            }
        }
    }

    /// First honest miner, used as the reference view of the network.
    pub fn reference_node(&self) -> Option<&NodeSim> {
        self.nodes
            .values()
            .find(|n| n.role == Role::Miner && self.is_honest(&n.node_id))
            .or_else(|| self.honest_full_nodes().next())
    }

    fn reference_height(&self) -> Option<u64> {
        self.reference_node().map(|n| n.store.head_height())
    }

    fn on_sensor_tick(&mut self, device: usize, tick: u64) {
        let dev = self.devices[device].clone();
        let reading = dev.reading_at_tick(tick);
        let host = dev.host.clone();
        let seq = self.nodes[&host].next_seq;
        let tx = make_sensor_tx(&dev, &reading, &host, seq).expect("reading belongs to device");
        self.nodes.get_mut(&host).expect("known node").next_seq += 1;
        self.emit(
            &host,
            "SensorTick",
            format!(
                "{} seq={} t={} temp={}",
                reading.device_id, reading.seq, reading.reading_time, reading.temperature
            ),
            None,
        );
        self.send_transaction(&host, tx);
        let next = (tick + 1) * dev.interval_secs * 1000;
        if next <= self.until {
            self.schedule(next, EventKind::SensorTick { device, tick: tick + 1 });
        }
    }

    fn on_sync_tick(&mut self, id: &str) {
        self.retry_stranded(id);
        if let Some(peer) = self.select_sync_peer(id).map(|p| p.peer_id.clone()) {
            let h = self.sync_from(id, &peer);
            self.request_sync(id, &peer, h);
        } else {
            let node = &self.nodes[id];
            let best = node
                .peers
                .values()
                .filter(|p| p.is_active() && p.role != Role::Light)
                .map(|p| p.advertised_td)
                .max()
                .unwrap_or_default();
            if node.store.head_td() > best {
                let detail = format!(
                    "local h={} td={} best peer td={best}",
                    node.store.head_height(),
                    node.store.head_td()
                );
                self.emit(id, "NoSuitablePeer", detail, None);
            }
        }
        let t = self.now + self.sim.light_sync_interval_ms;
        self.schedule(t, EventKind::SyncTick { node: id.to_string() });
    }

    /// Runs the local chain audit on a full node.
    pub fn audit_local_chain(&self, id: &str) -> Vec<TamperLog> {
        self.nodes
            .get(id)
            .and_then(|n| n.store.full())
            .map(|s| audit_store(s, id, self.now))
            .unwrap_or_default()
    }

    fn on_audit_tick(&mut self, id: &str, periodic: bool) {
        let logs = self.audit_local_chain(id);
        for log in logs {
            let node = self.nodes.get_mut(id).expect("known node");
            if !node.detected.insert((log.block_hash, log.field.clone())) {
                continue;
            }
            let detail = format!(
                "block {} field {} old={} new={}",
                log.block_hash.short(),
                log.field,
                log.old_text(),
                log.new_text()
            );
            node.pending_logs.push(log);
            self.emit(id, "TamperDetected", detail, None);
        }
        self.try_upload(id);
        if periodic && self.sim.audit_interval_ms > 0 {
            let t = self.now + self.sim.audit_interval_ms;
            self.schedule(
                t,
                EventKind::AuditTick {
                    node: id.to_string(),
                    periodic,
                },
            );
        }
    }

    /// Uploads pending tamper logs once the node's own canonical chain
    /// audits clean again.
    fn try_upload(&mut self, id: &str) {
        if self.nodes[id].pending_logs.is_empty() || !self.audit_local_chain(id).is_empty() {
            return;
        }
        let logs = std::mem::take(&mut self.nodes.get_mut(id).expect("known node").pending_logs);
        for log in logs {
            if let Err(e) = self.upload_tamper_log(id, &log) {
                if !matches!(e, IotError::Stranded(_)) {
                    self.emit(id, "TamperLogSkipped", e.to_string(), None);
                }
            }
        }
    }

    /// Wraps `log` into a transaction and broadcasts it. A log already in
    /// canonical state is skipped by content hash.
    pub fn upload_tamper_log(&mut self, id: &str, log: &TamperLog) -> Result<Transaction, IotError> {
        let node = self.nodes.get(id).ok_or_else(|| IotError::UnknownNode(id.to_string()))?;
        if let Some(store) = node.store.full() {
            if store
                .canonical_state()
                .log_entry(DEFAULT_CONTRACT, &log.content_hash())
                .is_some()
            {
                return Err(IotError::AlreadyRecorded);
            }
        }
        let tx = tamper_log_tx(log, DEFAULT_CONTRACT, id, node.next_seq);
        self.nodes.get_mut(id).expect("known node").next_seq += 1;
        self.emit(
            id,
            "TamperLogUpload",
            format!(
                "block {} field {} tx {}",
                log.block_hash.short(),
                log.field,
                tx.hash().short()
            ),
            None,
        );
        let report = self.send_transaction(id, tx.clone());
        if report.is_stranded() {
            return Err(IotError::Stranded(tx));
        }
        Ok(tx)
    }

    /// Applies a tamper to its target node's store only.
    pub fn inject(&mut self, action: &TamperAction) -> Result<TamperReceipt, TamperError> {
        let spec = &action.spec;
        let id = spec.target_node.clone();
        let rng_seed = self.seed ^ self.now.rotate_left(17) ^ self.insertion;
        let result = match self.nodes.get_mut(&id) {
            None => Err(TamperError::UnknownNode(id.clone())),
            Some(node) => match &mut node.store {
                NodeStore::Full(store) => tamper_store(store, &id, spec, rng_seed),
                NodeStore::Light(_) => Err(TamperError::TargetMissing(format!("{id} holds no block bodies"))),
            },
        };
        let receipt = match result {
            Ok(r) => r,
            Err(e) => {
                self.emit(&id, "TamperAction", "failed".into(), None);
                self.emit(&id, "TamperFailed", e.to_string(), None);
                return Err(e);
            }
        };
        self.tampered.insert(id.clone());
        let TamperEdit::Temperature { device_id, seq, .. } = &spec.edit;
        self.emit(
            &id,
            "TamperAction",
            format!(
                "h={} {} -> {} state:{device_id}:{seq} {}->{} seal={:?} td_delta={} canonical={}",
                receipt.height,
                receipt.original.short(),
                receipt.tampered.short(),
                receipt.old_value,
                receipt.new_value,
                receipt.seal,
                spec.claimed_td_delta,
                receipt.canonical
            ),
            None,
        );
        self.metrics.tampers.push(TamperRecord {
            time: self.now,
            receipt: receipt.clone(),
            device_id: device_id.clone(),
            seq: *seq,
            honest_blocks_at: self.metrics.honest_blocks_found,
            recovery_blocks: 0,
        });
        if receipt.canonical {
            self.on_head_change(&id);
        }
        if action.announce {
            let store = self.nodes[&id].store.full().expect("full node");
            let mut blocks = vec![store.block(&receipt.tampered).cloned().expect("stored")];
            blocks.extend(receipt.rebuilt.iter().filter_map(|h| store.block(h).cloned()));
            for peer in self.active_peers(&id) {
                for b in &blocks {
                    self.send(&id, &peer, Message::NewBlock(Box::new(b.clone())));
                }
            }
        }
        let t = self.now + 1;
        self.schedule(
            t,
            EventKind::AuditTick {
                node: id.clone(),
                periodic: false,
            },
        );
        Ok(receipt)
    }

    /// Grows a light node's header chain to `forged_height` with honestly
    /// sealed headers, above every full node's head.
    pub fn tamper_light_head(
        &mut self,
        id: &str,
        forged_height: u64,
        budget: ComputeBudget,
    ) -> Result<Vec<Hash256>, TamperError> {
        let network = self.network_height();
        let rng_seed = self.seed ^ self.now;
        let node = self
            .nodes
            .get_mut(id)
            .ok_or_else(|| TamperError::UnknownNode(id.to_string()))?;
        let NodeStore::Light(chain) = &mut node.store else {
            return Err(TamperError::NotLightNode(id.to_string()));
        };
        if forged_height <= network {
            return Err(TamperError::HeightNotAbove {
                forged: forged_height,
                network,
            });
        }
        let hashes = forge_light_headers(chain, forged_height, budget, rng_seed)?;
        self.tampered.insert(id.to_string());
        self.metrics.light_tampered.insert(id.to_string());
        self.on_head_change(id);
        Ok(hashes)
    }

    /// Each full node's canonical value for a device record, in centi-degrees.
    pub fn query_record(&self, device_id: &str, seq: u64) -> BTreeMap<String, Option<i64>> {
        let contract = self
            .devices
            .iter()
            .find(|d| d.device_id == device_id)
            .map_or(DEFAULT_CONTRACT, |d| d.contract.as_str());
        self.nodes
            .values()
            .filter_map(|n| n.store.full().map(|s| (n, s)))
            .map(|(n, s)| {
                let v = s.canonical_state().record(contract, device_id, seq).map(|r| r.temperature);
                (n.node_id.clone(), v)
            })
            .collect()
    }
}

fn block_detail_light(height: u64) -> String {
    format!("header h={height}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::iot::ReadingSource;

    fn topology(miners: &[(&str, f64)], endpoints: &[&str]) -> Vec<NodeConfig> {
        let mut out: Vec<NodeConfig> = miners
            .iter()
            .map(|(id, p)| NodeConfig {
                id: id.to_string(),
                role: Role::Miner,
                mining_power: *p,
            })
            .collect();
        out.extend(endpoints.iter().map(|id| NodeConfig {
            id: id.to_string(),
            role: Role::Endpoint,
            mining_power: 0.0,
        }));
        out
    }

    fn params() -> ChainParams {
        ChainParams {
            genesis_difficulty: 64,
            ..ChainParams::default()
        }
    }

    #[test]
    fn no_miners_only_sensor_ticks() {
        let dev = DeviceConfig {
            device_id: "d".into(),
            host: "e1".into(),
            contract: DEFAULT_CONTRACT.into(),
            interval_secs: 60,
            source: ReadingSource::Scripted { values: vec![2000] },
        };
        let nodes = topology(&[], &["e1", "e2"]);
        let sim_params = SimParams {
            audit_interval_ms: 0,
            ..SimParams::default()
        };
        let mut sim = Simulation::new(params(), sim_params, &nodes, vec![dev], 1).unwrap();
        sim.run(300_000);
        assert!(sim.log.of_kind("SensorTick").count() == 5);
        assert!(sim
            .log
            .events
            .iter()
            .all(|e| matches!(e.kind.as_str(), "SensorTick" | "TxSent" | "NewTxMsg")));
    }

    #[test]
    fn power_must_sum_to_one() {
        let nodes = topology(&[("m1", 0.5), ("m2", 0.4)], &[]);
        assert!(matches!(
            Simulation::new(params(), SimParams::default(), &nodes, vec![], 0),
            Err(SimError::BadPower(_))
        ));
    }

    #[test]
    fn honest_network_converges() {
        let nodes = topology(&[("m1", 0.5), ("m2", 0.5)], &["e1"]);
        let mut sim = Simulation::new(params(), SimParams::default(), &nodes, vec![], 3).unwrap();
        sim.run(400_000);
        sim.run(400_000 + 1000);
        let heads: BTreeSet<Hash256> = sim.nodes().map(|n| n.store.head()).collect();
        assert_eq!(heads.len(), 1);
        assert!(sim.metrics.demotions.is_empty());
    }

    #[test]
    fn same_seed_same_log() {
        let nodes = topology(&[("m1", 0.5), ("m2", 0.5)], &["e1"]);
        let run = |seed| {
            let mut sim = Simulation::new(params(), SimParams::default(), &nodes, vec![], seed).unwrap();
            sim.run(200_000);
            sim.log.to_jsonl()
        };
        assert_eq!(run(5), run(5));
        assert_ne!(run(5), run(6));
    }

    #[test]
    fn log_round_trips() {
        let mut log = EventLog::default();
        log.push(1, "m1", "NewBlockMsg", "x".into(), Some("InvalidHeader(BadSeal)".into()));
        log.push(2, "m2", "BlockFound", "y".into(), None);
        let text = log.to_jsonl();
        assert!(text.starts_with(r#"{"time":1,"node":"m1","kind":"NewBlockMsg","detail":"x","error":"InvalidHeader(BadSeal)"}"#));
        assert!(!text.lines().nth(1).unwrap().contains("error"));
        assert_eq!(EventLog::parse_jsonl(&text).unwrap(), log);
    }
}
