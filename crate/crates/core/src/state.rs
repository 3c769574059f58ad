//! World state: sensor records stored under a contract, the state transition
//! a block's transactions drive, and the Merkle commitment over it.

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use crate::error::DecodeError;
use crate::primitives::{hash, merkle_root, Bloom, Decoder, Encoder, Hash256, Receipt, Transaction};

/// Gas charged for every transaction, successful or not.
pub const FIXED_TX_GAS: u64 = 21_000;
pub const DEFAULT_GAS_LIMIT: u64 = 1_000_000;
pub const DEFAULT_CONTRACT: &str = "iot-contract";

/// Lowest and highest representable temperatures, in centi-degrees Celsius.
pub const MIN_CENTI_CELSIUS: i64 = -27_315;
pub const MAX_CENTI_CELSIUS: i64 = 100_000;

const REGION_NONCE: u8 = 0x00;
const REGION_RECORD: u8 = 0x01;
const REGION_LOG: u8 = 0x02;

const PAYLOAD_READING: u8 = 0x01;
const PAYLOAD_LOG: u8 = 0x02;

#[derive(Debug, Clone, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct SensorRecord {
    pub device_id: String,
    /// Seconds since simulation start.
    pub reading_time: u64,
    /// Centi-degrees Celsius.
    pub temperature: i64,
    pub seq: u64,
}

impl SensorRecord {
    pub fn encode(&self) -> Vec<u8> {
        Encoder::new()
            .str(&self.device_id)
            .u64(self.reading_time)
            .i64(self.temperature)
            .u64(self.seq)
            .finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut dec = Decoder::new(bytes);
        let rec = SensorRecord {
            device_id: dec.string()?,
            reading_time: dec.u64()?,
            temperature: dec.i64()?,
            seq: dec.u64()?,
        };
        dec.finish()?;
        Ok(rec)
    }

    pub fn in_range(&self) -> bool {
        (MIN_CENTI_CELSIUS..=MAX_CENTI_CELSIUS).contains(&self.temperature)
    }
}

/// What a contract transaction carries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Payload {
    Reading(SensorRecord),
    /// Encoded tamper log, opaque to the state layer.
    TamperLog(Vec<u8>),
}

impl Payload {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        match self {
            Payload::Reading(r) => {
                out.push(PAYLOAD_READING);
                out.extend(r.encode());
            }
            Payload::TamperLog(body) => {
                out.push(PAYLOAD_LOG);
                out.extend_from_slice(body);
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        match bytes.split_first() {
            Some((&PAYLOAD_READING, rest)) => Ok(Payload::Reading(SensorRecord::decode(rest)?)),
            Some((&PAYLOAD_LOG, rest)) => Ok(Payload::TamperLog(rest.to_vec())),
            Some((&tag, _)) => Err(DecodeError::UnknownTag(tag)),
            None => Err(DecodeError::Truncated),
        }
    }
}

pub fn nonce_key(sender: &str) -> Vec<u8> {
    Encoder::new().u8(REGION_NONCE).str(sender).finish()
}

pub fn record_key(contract: &str, device_id: &str, seq: u64) -> Vec<u8> {
    Encoder::new()
        .u8(REGION_RECORD)
        .str(contract)
        .str(device_id)
        .u64(seq)
        .finish()
}

pub fn log_key(contract: &str, content_hash: &Hash256) -> Vec<u8> {
    Encoder::new()
        .u8(REGION_LOG)
        .str(contract)
        .fixed(&content_hash.0)
        .finish()
}

/// A decoded state key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StateKey {
    Nonce { sender: String },
    Record { contract: String, device_id: String, seq: u64 },
    Log { contract: String, content_hash: Hash256 },
}

impl StateKey {
    pub fn parse(key: &[u8]) -> Option<StateKey> {
        let (&region, rest) = key.split_first()?;
        let mut dec = Decoder::new(rest);
        let parsed = match region {
            REGION_NONCE => StateKey::Nonce {
                sender: dec.string().ok()?,
            },
            REGION_RECORD => StateKey::Record {
                contract: dec.string().ok()?,
                device_id: dec.string().ok()?,
                seq: dec.u64().ok()?,
            },
            REGION_LOG => StateKey::Log {
                contract: dec.string().ok()?,
                content_hash: dec.hash().ok()?,
            },
            _ => return None,
        };
        dec.finish().ok()?;
        Some(parsed)
    }
}

/// Bloom bits a successful write to `key` under `contract` contributes.
pub fn bloom_for(contract: &str, key: &[u8]) -> Bloom {
    let digest = crate::primitives::hash_concat(&[contract.as_bytes(), key]);
    let mut bloom = Bloom::default();
    for i in 0..3 {
        bloom.set_bit(digest.0[i]);
    }
    bloom
}

/// Immutable key-value snapshot with a cached Merkle root.
#[derive(Clone, Debug)]
pub struct WorldState {
    entries: Arc<BTreeMap<Vec<u8>, Vec<u8>>>,
    root: Hash256,
}

impl PartialEq for WorldState {
    fn eq(&self, other: &Self) -> bool {
        self.root == other.root && self.entries == other.entries
    }
}

impl Eq for WorldState {}

impl Default for WorldState {
    fn default() -> Self {
        Self::from_entries(BTreeMap::new())
    }
}

fn leaf(key: &[u8], value: &[u8]) -> Vec<u8> {
    Encoder::new().bytes(key).bytes(value).finish()
}

impl WorldState {
    pub fn from_entries(entries: BTreeMap<Vec<u8>, Vec<u8>>) -> Self {
        let root = merkle_root(entries.iter().map(|(k, v)| leaf(k, v)));
        WorldState {
            entries: Arc::new(entries),
            root,
        }
    }

    pub fn root(&self) -> Hash256 {
        self.root
    }

    pub fn get(&self, key: &[u8]) -> Option<&[u8]> {
        self.entries.get(key).map(Vec::as_slice)
    }

    pub fn entries(&self) -> &BTreeMap<Vec<u8>, Vec<u8>> {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Copy with `key` set to `value`. Used by tamper tooling; honest writes
    /// go through [`apply_transactions`].
    pub fn with_entry(&self, key: Vec<u8>, value: Vec<u8>) -> WorldState {
        let mut map = (*self.entries).clone();
        map.insert(key, value);
        WorldState::from_entries(map)
    }

    pub fn next_seq(&self, sender: &str) -> u64 {
        self.get(&nonce_key(sender))
            .and_then(|v| v.try_into().ok())
            .map(u64::from_be_bytes)
            .unwrap_or(0)
    }

    pub fn record(&self, contract: &str, device_id: &str, seq: u64) -> Option<SensorRecord> {
        self.get(&record_key(contract, device_id, seq))
            .and_then(|v| SensorRecord::decode(v).ok())
    }

    pub fn log_entry(&self, contract: &str, content_hash: &Hash256) -> Option<&[u8]> {
        self.get(&log_key(contract, content_hash))
    }

    /// All tamper-log bodies stored under `contract`, in key order.
    pub fn log_entries(&self, contract: &str) -> Vec<Vec<u8>> {
        self.entries
            .iter()
            .filter(|(k, _)| {
                matches!(StateKey::parse(k), Some(StateKey::Log { contract: c, .. }) if c == contract)
            })
            .map(|(_, v)| v.clone())
            .collect()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut enc = Encoder::new();
        enc.u32(self.entries.len() as u32);
        for (k, v) in self.entries.iter() {
            enc.bytes(k).bytes(v);
        }
        enc.finish()
    }

    pub fn read(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        let n = dec.u32()?;
        let mut map = BTreeMap::new();
        for _ in 0..n {
            let k = dec.bytes()?;
            let v = dec.bytes()?;
            map.insert(k, v);
        }
        Ok(WorldState::from_entries(map))
    }
}

pub fn read_record(state: &WorldState, device_id: &str, seq: u64) -> Option<SensorRecord> {
    state.record(DEFAULT_CONTRACT, device_id, seq)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StateError {
    #[error("gas limit exceeded: {needed} > {limit}")]
    GasLimitExceeded { needed: u64, limit: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub state: WorldState,
    pub receipts: Vec<Receipt>,
    pub gas_used: u64,
    pub bloom: Bloom,
}

/// Executes `txs` in order on top of `parent`. `parent` itself is untouched.
pub fn apply_transactions(
    parent: &WorldState,
    txs: &[Transaction],
    gas_limit: u64,
) -> Result<Transition, StateError> {
    let needed = FIXED_TX_GAS.saturating_mul(txs.len() as u64);
    if needed > gas_limit {
        return Err(StateError::GasLimitExceeded {
            needed,
            limit: gas_limit,
        });
    }
    if txs.is_empty() {
        return Ok(Transition {
            state: parent.clone(),
            receipts: Vec::new(),
            gas_used: 0,
            bloom: Bloom::default(),
        });
    }

    let mut map = (*parent.entries).clone();
    let mut receipts = Vec::with_capacity(txs.len());
    let mut bloom = Bloom::default();
    for tx in txs {
        let bits = execute(&mut map, tx);
        let receipt = Receipt {
            tx_hash: tx.hash(),
            success: bits.is_some(),
            gas_used: FIXED_TX_GAS,
            bloom_bits: bits.unwrap_or_default(),
        };
        bloom.accrue(&receipt.bloom_bits);
        receipts.push(receipt);
    }
    Ok(Transition {
        state: WorldState::from_entries(map),
        receipts,
        gas_used: needed,
        bloom,
    })
}

/// Applies one transaction, returning its bloom bits on success.
fn execute(map: &mut BTreeMap<Vec<u8>, Vec<u8>>, tx: &Transaction) -> Option<Bloom> {
    let nkey = nonce_key(&tx.sender);
    let expected = map
        .get(&nkey)
        .and_then(|v| v.as_slice().try_into().ok())
        .map(u64::from_be_bytes)
        .unwrap_or(0);
    if tx.seq != expected || tx.contract.is_empty() {
        return None;
    }
    let (key, value) = match Payload::decode(&tx.payload).ok()? {
        Payload::Reading(rec) => {
            if !rec.in_range() {
                return None;
            }
            let key = record_key(&tx.contract, &rec.device_id, rec.seq);
            if map.contains_key(&key) {
                return None;
            }
            (key, rec.encode())
        }
        Payload::TamperLog(body) => (log_key(&tx.contract, &hash(&body)), body),
    };
    let bits = bloom_for(&tx.contract, &key);
    map.insert(key, value);
    map.insert(nkey, (expected + 1).to_be_bytes().to_vec());
    Some(bits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn reading_tx(sender: &str, seq: u64, device: &str, dseq: u64, temp: i64) -> Transaction {
        let rec = SensorRecord {
            device_id: device.into(),
            reading_time: 1800 * (dseq + 1),
            temperature: temp,
            seq: dseq,
        };
        Transaction {
            sender: sender.into(),
            contract: DEFAULT_CONTRACT.into(),
            payload: Payload::Reading(rec).encode(),
            seq,
            gas: FIXED_TX_GAS,
        }
    }

    #[test]
    fn empty_transition_is_identity() {
        let s = WorldState::default();
        let t = apply_transactions(&s, &[], DEFAULT_GAS_LIMIT).unwrap();
        assert_eq!(t.state, s);
        assert!(t.receipts.is_empty());
        assert_eq!(t.gas_used, 0);
        assert!(t.bloom.is_empty());
    }

    #[test]
    fn write_then_read() {
        let s = WorldState::default();
        let t = apply_transactions(&s, &[reading_tx("e3", 0, "dev-3", 7, 3400)], DEFAULT_GAS_LIMIT)
            .unwrap();
        assert_ne!(t.state.root(), s.root());
        assert_eq!(read_record(&t.state, "dev-3", 7).unwrap().temperature, 3400);
        assert!(read_record(&t.state, "dev-9", 0).is_none());
        assert!(t.receipts[0].success);
        assert_eq!(t.gas_used, FIXED_TX_GAS);
        // parent untouched
        assert!(s.is_empty());
    }

    #[test]
    fn bad_seq_fails_without_state_change() {
        let s = WorldState::default();
        let t = apply_transactions(&s, &[reading_tx("e1", 3, "dev-1", 0, 3400)], DEFAULT_GAS_LIMIT)
            .unwrap();
        assert!(!t.receipts[0].success);
        assert_eq!(t.state.root(), s.root());
        assert!(t.bloom.is_empty());
        assert_eq!(t.gas_used, FIXED_TX_GAS);
    }

    #[test]
    fn out_of_range_and_duplicate_records_fail() {
        let s = WorldState::default();
        let txs = [
            reading_tx("e1", 0, "dev-1", 0, MIN_CENTI_CELSIUS - 1),
            reading_tx("e1", 0, "dev-1", 0, 100),
            reading_tx("e1", 1, "dev-1", 0, 200),
        ];
        let t = apply_transactions(&s, &txs, DEFAULT_GAS_LIMIT).unwrap();
        let ok: Vec<bool> = t.receipts.iter().map(|r| r.success).collect();
        assert_eq!(ok, vec![false, true, false]);
        assert_eq!(read_record(&t.state, "dev-1", 0).unwrap().temperature, 100);
    }

    #[test]
    fn gas_limit_exceeded() {
        let txs: Vec<_> = (0..3).map(|i| reading_tx("e1", i, "dev-1", i, 1)).collect();
        let err = apply_transactions(&WorldState::default(), &txs, 2 * FIXED_TX_GAS).unwrap_err();
        assert_eq!(
            err,
            StateError::GasLimitExceeded {
                needed: 3 * FIXED_TX_GAS,
                limit: 2 * FIXED_TX_GAS
            }
        );
    }

    #[test]
    fn bloom_is_or_of_receipts() {
        let txs: Vec<_> = (0..4).map(|i| reading_tx("e1", i, "dev-1", i, 1)).collect();
        let t = apply_transactions(&WorldState::default(), &txs, DEFAULT_GAS_LIMIT).unwrap();
        let mut acc = Bloom::default();
        for r in &t.receipts {
            acc.accrue(&r.bloom_bits);
        }
        assert_eq!(acc, t.bloom);
    }

    #[test]
    fn key_parsing() {
        assert_eq!(
            StateKey::parse(&record_key("c", "dev-1", 5)),
            Some(StateKey::Record {
                contract: "c".into(),
                device_id: "dev-1".into(),
                seq: 5
            })
        );
        assert_eq!(
            StateKey::parse(&nonce_key("e1")),
            Some(StateKey::Nonce { sender: "e1".into() })
        );
        assert_eq!(StateKey::parse(&[9, 9]), None);
    }

    proptest! {
        #[test]
        fn root_ignores_insertion_order(
            entries in proptest::collection::btree_map(
                proptest::collection::vec(any::<u8>(), 1..8),
                proptest::collection::vec(any::<u8>(), 0..8),
                0..24,
            ),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut pairs: Vec<_> = entries.clone().into_iter().collect();
            pairs.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let mut state = WorldState::default();
            for (k, v) in pairs {
                state = state.with_entry(k, v);
            }
            prop_assert_eq!(state.root(), WorldState::from_entries(entries).root());
        }

        #[test]
        fn transition_is_deterministic_and_pure(temps in proptest::collection::vec(-500i64..5000, 0..10)) {
            let txs: Vec<_> = temps
                .iter()
                .enumerate()
                .map(|(i, t)| reading_tx("e1", i as u64, "dev-1", i as u64, *t))
                .collect();
            let parent = WorldState::default().with_entry(b"k".to_vec(), b"v".to_vec());
            let before = parent.root();
            let a = apply_transactions(&parent, &txs, DEFAULT_GAS_LIMIT).unwrap();
            let b = apply_transactions(&parent, &txs, DEFAULT_GAS_LIMIT).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(parent.root(), before);
        }
    }
}
