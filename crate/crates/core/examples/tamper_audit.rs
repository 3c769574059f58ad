// Rewrite a stored reading the way someone with database access would, then
// let the node's own audit find it and draft the tamper log.
use tamperchain::chain::ChainStore;
use tamperchain::iot::{audit_store, tamper_log_tx};
use tamperchain::miner::mine_child;
use tamperchain::params::ChainParams;
use tamperchain::primitives::Transaction;
use tamperchain::state::{Payload, SensorRecord, DEFAULT_CONTRACT, FIXED_TX_GAS};
use tamperchain::tamper::{tamper_store, BlockRef, Reseal, TamperEdit, TamperSpec};

fn main() {
    let params = ChainParams {
        genesis_difficulty: 64,
        ..ChainParams::default()
    };
    let mut store = ChainStore::new(params);
    for seq in 0..3u64 {
        let tx = Transaction {
            sender: "e1".into(),
            contract: DEFAULT_CONTRACT.into(),
            payload: Payload::Reading(SensorRecord {
                device_id: "dev-1".into(),
                reading_time: 1800 * (seq + 1),
                temperature: 3400 - 10 * seq as i64,
                seq,
            })
            .encode(),
            seq,
            gas: FIXED_TX_GAS,
        };
        let p = store.head_block().header.clone();
        let (b, _) = mine_child(&p, store.canonical_state(), vec![tx], vec![], p.timestamp + 13, seq, store.params()).unwrap();
        store.import_block(b);
    }
    println!("clean audit: {} findings", audit_store(&store, "e1", 0).len());

    let spec = TamperSpec {
        target_node: "e1".into(),
        target_block: BlockRef::Record {
            device_id: "dev-1".into(),
            seq: 0,
        },
        edit: TamperEdit::Temperature {
            device_id: "dev-1".into(),
            seq: 0,
            value: -400,
        },
        reseal: Reseal::FakeNonce { nonce: 0xdead_beef },
        claimed_td_delta: 0,
    };
    let receipt = tamper_store(&mut store, "e1", &spec, 1).unwrap();
    println!(
        "tampered h={} {} -> {} ({:?}), canonical read now {:?}",
        receipt.height,
        receipt.original.short(),
        receipt.tampered.short(),
        receipt.seal,
        store.canonical_state().record(DEFAULT_CONTRACT, "dev-1", 0).map(|r| r.temperature)
    );
    println!("seal valid: {}", store.seal_valid(&receipt.tampered));

    for log in audit_store(&store, "e1", 1_860_000) {
        println!("finding: block {} {} {} -> {}", log.block_hash.short(), log.field, log.old_text(), log.new_text());
        let tx = tamper_log_tx(&log, DEFAULT_CONTRACT, "e1", 3);
        println!("  log tx {} ({} bytes payload)", tx.hash().short(), tx.payload.len());
    }
}
