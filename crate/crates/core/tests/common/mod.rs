#![allow(dead_code)]

use std::path::PathBuf;

use primitive_types::U256;
use tamperchain::chain::ChainStore;
use tamperchain::miner::{assemble, seal_header};
use tamperchain::params::ChainParams;
use tamperchain::pow::ComputeBudget;
use tamperchain::primitives::{hash, Block, Hash256, Header, Transaction};
use tamperchain::validation::{HeaderFault, UncleFault, ValidationError};
use tamperchain::state::{Payload, SensorRecord, DEFAULT_CONTRACT, FIXED_TX_GAS};

pub fn scenario_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

pub fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/golden")
}

pub const SCENARIOS: [&str; 7] = [
    "demo-recovery",
    "s1-low",
    "s1-high",
    "s2-low",
    "s2-high",
    "s3-light",
    "majority-attack",
];

pub fn params(difficulty: u64) -> ChainParams {
    ChainParams {
        genesis_difficulty: difficulty,
        ..ChainParams::default()
    }
}

pub fn reading_tx(sender: &str, seq: u64, device: &str, temperature: i64) -> Transaction {
    let record = SensorRecord {
        device_id: device.to_string(),
        reading_time: 60 * (seq + 1),
        temperature,
        seq,
    };
    Transaction {
        sender: sender.to_string(),
        contract: DEFAULT_CONTRACT.to_string(),
        payload: Payload::Reading(record).encode(),
        seq,
        gas: FIXED_TX_GAS,
    }
}

/// Unsealed child of `parent` in `store`.
pub fn unsealed(store: &ChainStore, parent: Hash256, txs: Vec<Transaction>, uncles: Vec<Header>, dt: u64) -> Block {
    let p = store.header(&parent).expect("parent");
    let state = store.post_state(&parent).expect("parent state");
    let ts = p.timestamp + dt;
    assemble(p, state, txs, uncles, ts, store.params()).expect("assemble").0
}

pub fn seal(block: &mut Block, params: &ChainParams, rng_seed: u64) {
    seal_header(&mut block.header, ComputeBudget::ample(), rng_seed, params).expect("seal");
}

/// Sealed honest child of `parent`.
pub fn child(store: &ChainStore, parent: Hash256, txs: Vec<Transaction>, uncles: Vec<Header>, dt: u64, rng_seed: u64) -> Block {
    let mut b = unsealed(store, parent, txs, uncles, dt);
    seal(&mut b, store.params(), rng_seed);
    b
}

/// Imports `n` honest empty blocks on the head and returns their hashes.
pub fn extend(store: &mut ChainStore, n: usize, rng_seed: u64) -> Vec<Hash256> {
    (0..n)
        .map(|i| {
            let b = child(store, store.head(), Vec::new(), Vec::new(), 13, rng_seed + i as u64);
            let h = b.hash();
            assert!(!matches!(
                store.import_block(b),
                tamperchain::chain::ImportOutcome::Rejected(_)
            ));
            h
        })
        .collect()
}

pub fn u256(v: u64) -> U256 {
    U256::from(v)
}

/// Ways to break a candidate block, in import-check order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Violation {
    UnknownParent,
    MissingParentState,
    BadSeal,
    BadUncle,
    GasUsed,
    Bloom,
    TxRoot,
    ReceiptRoot,
    StateRoot,
}

impl Violation {
    pub const ALL: [Violation; 9] = [
        Violation::UnknownParent,
        Violation::MissingParentState,
        Violation::BadSeal,
        Violation::BadUncle,
        Violation::GasUsed,
        Violation::Bloom,
        Violation::TxRoot,
        Violation::ReceiptRoot,
        Violation::StateRoot,
    ];

    pub fn expected(self) -> ValidationError {
        match self {
            Violation::UnknownParent => ValidationError::UnknownParent,
            Violation::MissingParentState => ValidationError::MissingParentState,
            Violation::BadSeal => ValidationError::InvalidHeader(HeaderFault::BadSeal),
            Violation::BadUncle => ValidationError::InvalidUncles(UncleFault::InvalidUncleHeader),
            Violation::GasUsed => ValidationError::GasUsedMismatch,
            Violation::Bloom => ValidationError::BloomMismatch,
            Violation::TxRoot => ValidationError::TxRootMismatch,
            Violation::ReceiptRoot => ValidationError::ReceiptRootMismatch,
            Violation::StateRoot => ValidationError::StateRootMismatch,
        }
    }

    /// Both pick the parent, so they cannot be combined.
    pub fn compatible(a: Violation, b: Violation) -> bool {
        !matches!(
            (a.min(b), a.max(b)),
            (Violation::UnknownParent, Violation::MissingParentState)
        )
    }
}

/// A small chain with a fork, a block stored without its post-state and a
/// block the validating store has never seen.
///
/// `main`: genesis, b1 (one reading), orphan o1, b2 = head, y (no state).
/// `shadow`: the same plus y with state and its child z.
pub struct ValidationFixture {
    pub main: ChainStore,
    pub shadow: ChainStore,
    pub stateless: Hash256,
    pub foreign: Hash256,
    pub orphan: Header,
}

impl ValidationFixture {
    pub fn new() -> Self {
        let mut main = ChainStore::new(params(16));
        let g = main.head();
        let b1 = child(&main, g, vec![reading_tx("s", 0, "dev", 2100)], Vec::new(), 13, 1);
        main.import_block(b1.clone());
        let o1 = child(&main, g, Vec::new(), Vec::new(), 14, 2);
        main.import_block(o1.clone());
        let b2 = child(&main, b1.hash(), Vec::new(), Vec::new(), 13, 3);
        main.import_block(b2);
        let mut shadow = main.clone();
        let y = child(&shadow, shadow.head(), Vec::new(), Vec::new(), 13, 4);
        shadow.import_block(y.clone());
        let z = child(&shadow, y.hash(), Vec::new(), Vec::new(), 13, 5);
        shadow.import_block(z.clone());
        let td = shadow.total_difficulty(&y.hash()).unwrap();
        let stateless = main.raw_insert(y, None, td);
        ValidationFixture {
            main,
            shadow,
            stateless,
            foreign: z.hash(),
            orphan: o1.header,
        }
    }

    /// A child block carrying one reading, broken in every listed way.
    pub fn candidate(&self, violations: &[Violation], rng_seed: u64) -> Block {
        let has = |v| violations.contains(&v);
        let parent = if has(Violation::UnknownParent) {
            self.foreign
        } else if has(Violation::MissingParentState) {
            self.stateless
        } else {
            self.main.head()
        };
        let seq = self.shadow.post_state(&parent).unwrap().next_seq("s");
        let txs = vec![reading_tx("s", seq, "dev", 2200 + seq as i64)];
        let uncles = if has(Violation::BadUncle) {
            let mut u = self.orphan.clone();
            u.nonce = u.nonce.wrapping_add(1);
            vec![u]
        } else {
            Vec::new()
        };
        let mut b = unsealed(&self.shadow, parent, txs, uncles, 13);
        let h = &mut b.header;
        if has(Violation::GasUsed) {
            h.gas_used += 1;
        }
        if has(Violation::Bloom) {
            h.bloom.0[31] ^= 0x01;
        }
        if has(Violation::TxRoot) {
            h.tx_root = hash(b"not the txs");
        }
        if has(Violation::ReceiptRoot) {
            h.receipt_root = hash(b"not the receipts");
        }
        if has(Violation::StateRoot) {
            h.state_root = hash(b"not the state");
        }
        seal(&mut b, self.shadow.params(), rng_seed);
        if has(Violation::BadSeal) {
            b.header.nonce = b.header.nonce.wrapping_add(1);
        }
        b
    }
}

impl Default for ValidationFixture {
    fn default() -> Self {
        Self::new()
    }
}
