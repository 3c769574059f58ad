//! Sensor ingestion, local chain audit, and tamper logs that are written
//! back onto the chain.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::chain::ChainStore;
use crate::error::DecodeError;
use crate::pow::{verify_pow, EpochSeed};
use crate::primitives::{hash, receipt_root, tx_root, Block, Decoder, Encoder, Hash256, Transaction};
use crate::state::{apply_transactions, Payload, SensorRecord, StateKey, WorldState, DEFAULT_CONTRACT, FIXED_TX_GAS};

pub const DEFAULT_READING_INTERVAL_SECS: u64 = 1800;

/// A record of content found changed on a node's local chain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TamperLog {
    pub detecting_node: String,
    pub block_hash: Hash256,
    pub field: String,
    pub old_value: Vec<u8>,
    pub new_value: Vec<u8>,
    /// Simulation time in milliseconds.
    pub detected_at: u64,
}

impl TamperLog {
    pub fn encode(&self) -> Vec<u8> {
        Encoder::new()
            .str(&self.detecting_node)
            .fixed(&self.block_hash.0)
            .str(&self.field)
            .bytes(&self.old_value)
            .bytes(&self.new_value)
            .u64(self.detected_at)
            .finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<TamperLog, DecodeError> {
        let mut dec = Decoder::new(bytes);
        let log = TamperLog {
            detecting_node: dec.string()?,
            block_hash: dec.hash()?,
            field: dec.string()?,
            old_value: dec.bytes()?,
            new_value: dec.bytes()?,
            detected_at: dec.u64()?,
        };
        dec.finish()?;
        Ok(log)
    }

    /// Key under which the log is stored on chain.
    pub fn content_hash(&self) -> Hash256 {
        hash(&self.encode())
    }

    pub fn old_text(&self) -> String {
        String::from_utf8_lossy(&self.old_value).into_owned()
    }

    pub fn new_text(&self) -> String {
        String::from_utf8_lossy(&self.new_value).into_owned()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReadingSource {
    /// Centi-degree readings used in order; the last one repeats.
    Scripted { values: Vec<i64> },
    /// Uniform noise around a base value.
    Seeded { seed: u64, base: i64, spread: i64 },
}

impl ReadingSource {
    pub fn reading(&self, index: u64) -> i64 {
        match self {
            ReadingSource::Scripted { values } => values
                .get(index as usize)
                .or(values.last())
                .copied()
                .unwrap_or(0),
            ReadingSource::Seeded { seed, base, spread } => {
                if *spread <= 0 {
                    return *base;
                }
                let h = hash(&Encoder::new().u64(*seed).u64(index).finish());
                let r = u64::from_be_bytes(h.0[..8].try_into().unwrap());
                base + (r % (2 * *spread as u64 + 1)) as i64 - spread
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceConfig {
    pub device_id: String,
    /// Node the sensor is attached to; transactions are sent from it.
    pub host: String,
    #[serde(default = "default_contract")]
    pub contract: String,
    #[serde(default = "default_interval")]
    pub interval_secs: u64,
    pub source: ReadingSource,
}

fn default_contract() -> String {
    DEFAULT_CONTRACT.to_string()
}

fn default_interval() -> u64 {
    DEFAULT_READING_INTERVAL_SECS
}

impl DeviceConfig {
    /// The reading taken at tick `k` (1-based): time `k * interval`, device sequence `k - 1`.
    pub fn reading_at_tick(&self, k: u64) -> SensorRecord {
        SensorRecord {
            device_id: self.device_id.clone(),
            reading_time: k * self.interval_secs,
            temperature: self.source.reading(k.saturating_sub(1)),
            seq: k.saturating_sub(1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IotError {
    #[error("reading from {got} does not belong to device {expected}")]
    WrongDevice { expected: String, got: String },
    #[error("no suitable peer: transaction stranded")]
    Stranded(Transaction),
    #[error("tamper log already recorded on chain")]
    AlreadyRecorded,
    #[error("unknown node {0}")]
    UnknownNode(String),
}

/// Wraps a reading into a contract transaction from `sender` with sequence `seq`.
pub fn make_sensor_tx(
    dev: &DeviceConfig,
    reading: &SensorRecord,
    sender: &str,
    seq: u64,
) -> Result<Transaction, IotError> {
    if reading.device_id != dev.device_id {
        return Err(IotError::WrongDevice {
            expected: dev.device_id.clone(),
            got: reading.device_id.clone(),
        });
    }
    Ok(Transaction {
        sender: sender.to_string(),
        contract: dev.contract.clone(),
        payload: Payload::Reading(reading.clone()).encode(),
        seq,
        gas: FIXED_TX_GAS,
    })
}

pub fn tamper_log_tx(log: &TamperLog, contract: &str, sender: &str, seq: u64) -> Transaction {
    Transaction {
        sender: sender.to_string(),
        contract: contract.to_string(),
        payload: Payload::TamperLog(log.encode()).encode(),
        seq,
        gas: FIXED_TX_GAS,
    }
}

/// Tamper logs stored under `contract` in `state`.
pub fn logs_in_state(state: &WorldState, contract: &str) -> Vec<TamperLog> {
    state
        .log_entries(contract)
        .iter()
        .filter_map(|b| TamperLog::decode(b).ok())
        .collect()
}

/// Re-validates every canonical block of `store` from genesis: hash linkage,
/// body commitments, re-execution, stored post-state, seal and total
/// difficulty. Returns one log per block that fails, ordered by height.
pub fn audit_store(store: &ChainStore, node: &str, now_ms: u64) -> Vec<TamperLog> {
    let chain = store.canonical_chain();
    let mut logs = Vec::new();
    for pair in chain.windows(2) {
        let (parent_hash, hash) = (pair[0], pair[1]);
        let Some(block) = store.block(&hash) else { continue };
        let Some((field, old, new)) = first_fault(store, parent_hash, block) else {
            continue;
        };
        let (field, old_value, new_value) = state_diff(store, block)
            .unwrap_or((field, old.into_bytes(), new.into_bytes()));
        logs.push(TamperLog {
            detecting_node: node.to_string(),
            block_hash: hash,
            field,
            old_value,
            new_value,
            detected_at: now_ms,
        });
    }
    logs
}

fn first_fault(store: &ChainStore, parent_hash: Hash256, block: &Block) -> Option<(String, String, String)> {
    let header = &block.header;
    if header.parent_hash != parent_hash {
        return Some(("parent_hash".into(), parent_hash.to_hex(), header.parent_hash.to_hex()));
    }
    let computed_tx_root = tx_root(&block.transactions);
    if computed_tx_root != header.tx_root {
        return Some(("tx_root".into(), header.tx_root.to_hex(), computed_tx_root.to_hex()));
    }
    let parent_state = store.post_state(&parent_hash)?;
    match apply_transactions(parent_state, &block.transactions, header.gas_limit) {
        Err(_) => return Some(("gas_used".into(), header.gas_used.to_string(), "overflow".into())),
        Ok(t) => {
            if t.gas_used != header.gas_used {
                return Some(("gas_used".into(), header.gas_used.to_string(), t.gas_used.to_string()));
            }
            if t.bloom != header.bloom {
                return Some(("bloom".into(), hex::encode(header.bloom.0), hex::encode(t.bloom.0)));
            }
            let rr = receipt_root(&t.receipts);
            if rr != header.receipt_root {
                return Some(("receipt_root".into(), header.receipt_root.to_hex(), rr.to_hex()));
            }
            if t.state.root() != header.state_root {
                return Some(("state_root".into(), header.state_root.to_hex(), t.state.root().to_hex()));
            }
        }
    }
    let hash = block.hash();
    if let Some(stored) = store.post_state(&hash) {
        if stored.root() != header.state_root {
            return Some(("state_root".into(), header.state_root.to_hex(), stored.root().to_hex()));
        }
    }
    let seed = EpochSeed::for_height(header.height, store.params());
    if !verify_pow(header, &seed) {
        return Some(("seal".into(), "valid".into(), format!("nonce={}", header.nonce)));
    }
    let expected_td = store.total_difficulty(&parent_hash).ok()? + header.difficulty;
    let stored_td = store.total_difficulty(&hash).ok()?;
    if stored_td != expected_td {
        return Some(("total_difficulty".into(), expected_td.to_string(), stored_td.to_string()));
    }
    None
}

/// Names the changed sensor record, if the original content is recoverable
/// locally: from a seal-valid sibling of the block, or by re-executing the
/// block against its stored post-state.
fn state_diff(store: &ChainStore, block: &Block) -> Option<(String, Vec<u8>, Vec<u8>)> {
    let hash = block.hash();
    let tampered = store.post_state(&hash)?;
    let mut references: Vec<WorldState> = store
        .blocks()
        .filter(|(h, b)| {
            **h != hash && b.parent_hash() == block.parent_hash() && store.seal_valid(h)
        })
        .filter_map(|(h, _)| store.post_state(h).cloned())
        .collect();
    if let Some(parent_state) = store.post_state(&block.parent_hash()) {
        if let Ok(t) = apply_transactions(parent_state, &block.transactions, block.header.gas_limit) {
            references.push(t.state);
        }
    }
    references
        .iter()
        .find_map(|reference| diff_records(reference.entries(), tampered.entries()))
}

fn diff_records(
    original: &BTreeMap<Vec<u8>, Vec<u8>>,
    tampered: &BTreeMap<Vec<u8>, Vec<u8>>,
) -> Option<(String, Vec<u8>, Vec<u8>)> {
    for (key, new) in tampered {
        let Some(old) = original.get(key) else { continue };
        if old == new {
            continue;
        }
        if let Some(StateKey::Record { device_id, seq, .. }) = StateKey::parse(key) {
            let (Ok(o), Ok(n)) = (SensorRecord::decode(old), SensorRecord::decode(new)) else {
                continue;
            };
            return Some((
                format!("state:{device_id}:{seq}"),
                o.temperature.to_string().into_bytes(),
                n.temperature.to_string().into_bytes(),
            ));
        }
    }
    None
}

/// One row of a reading fixture: `device,time,temperature`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureRow {
    pub device: String,
    /// Seconds since genesis.
    pub time: u64,
    /// Centi-degrees Celsius.
    pub temperature: i64,
}

#[derive(Debug, thiserror::Error)]
pub enum FixtureError {
    #[error("fixture parse error: {0}")]
    Parse(#[from] csv::Error),
    #[error("device {device}: row {index} has time {got}, expected {expected}")]
    OffSchedule {
        device: String,
        index: usize,
        got: u64,
        expected: u64,
    },
    #[error("device {0} has no rows in the fixture")]
    NoRows(String),
}

/// Parses a reading fixture. Lines starting with `#` are comments.
pub fn parse_fixture(text: &str) -> Result<Vec<FixtureRow>, FixtureError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    Ok(reader.deserialize().collect::<Result<Vec<FixtureRow>, _>>()?)
}

/// The scripted source for `device` from fixture rows. The device's k-th row
/// (1-based) must be timed at `k * interval_secs`.
pub fn fixture_source(rows: &[FixtureRow], device: &str, interval_secs: u64) -> Result<ReadingSource, FixtureError> {
    let mut mine: Vec<&FixtureRow> = rows.iter().filter(|r| r.device == device).collect();
    mine.sort_by_key(|r| r.time);
    if mine.is_empty() {
        return Err(FixtureError::NoRows(device.to_string()));
    }
    for (i, r) in mine.iter().enumerate() {
        let expected = (i as u64 + 1) * interval_secs;
        if r.time != expected {
            return Err(FixtureError::OffSchedule {
                device: device.to_string(),
                index: i,
                got: r.time,
                expected,
            });
        }
    }
    Ok(ReadingSource::Scripted {
        values: mine.iter().map(|r| r.temperature).collect(),
    })
}
