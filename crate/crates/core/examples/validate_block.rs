// Build an honest block, then break it one field at a time and watch which
// import check rejects it.
use tamperchain::chain::ChainStore;
use tamperchain::miner::{assemble, seal_header};
use tamperchain::params::ChainParams;
use tamperchain::pow::ComputeBudget;
use tamperchain::primitives::{hash, Block, Transaction};
use tamperchain::state::{Payload, SensorRecord, DEFAULT_CONTRACT, FIXED_TX_GAS};
use tamperchain::validation::validate_block;

fn reading(temperature: i64) -> Transaction {
    let record = SensorRecord {
        device_id: "dev-1".into(),
        reading_time: 1800,
        temperature,
        seq: 0,
    };
    Transaction {
        sender: "e1".into(),
        contract: DEFAULT_CONTRACT.into(),
        payload: Payload::Reading(record).encode(),
        seq: 0,
        gas: FIXED_TX_GAS,
    }
}

fn main() {
    let params = ChainParams {
        genesis_difficulty: 64,
        ..ChainParams::default()
    };
    let store = ChainStore::new(params.clone());
    let parent = store.head_block().header.clone();
    let (block, _) = assemble(&parent, store.canonical_state(), vec![reading(3400)], vec![], 13, &params).unwrap();

    let sealed = |mut b: Block| {
        seal_header(&mut b.header, ComputeBudget::ample(), 9, &params).unwrap();
        b
    };
    println!("{:<22} {:?}", "honest", validate_block(&sealed(block.clone()), &store).map(|_| "ok"));

    let mut edits: Vec<(&str, Block)> = Vec::new();
    let mut b = block.clone();
    b.header.state_root = hash(b"forged state");
    edits.push(("state_root", sealed(b)));
    let mut b = block.clone();
    b.transactions = vec![reading(-400)];
    edits.push(("transaction body", sealed(b)));
    let mut b = block.clone();
    b.header.gas_used = 0;
    edits.push(("gas_used", sealed(b)));
    let mut b = sealed(block.clone());
    b.header.nonce ^= 1;
    edits.push(("nonce", b));
    let mut b = sealed(block);
    b.header.parent_hash = hash(b"elsewhere");
    edits.push(("parent_hash", b));

    for (what, b) in edits {
        let err = validate_block(&b, &store).unwrap_err();
        println!("{what:<22} {err} (check {})", err.step());
    }
}
