// Sensor readings as contract transactions, and the state root they commit to.
use tamperchain::iot::{make_sensor_tx, DeviceConfig, ReadingSource};
use tamperchain::state::{apply_transactions, read_record, WorldState, DEFAULT_CONTRACT, DEFAULT_GAS_LIMIT};

fn main() {
    let dev = DeviceConfig {
        device_id: "dev-1".into(),
        host: "e1".into(),
        contract: DEFAULT_CONTRACT.into(),
        interval_secs: 1800,
        source: ReadingSource::Scripted {
            values: vec![3400, 3385, 3372],
        },
    };
    let txs: Vec<_> = (1..=3)
        .map(|k| make_sensor_tx(&dev, &dev.reading_at_tick(k), "e1", k - 1).unwrap())
        .collect();

    let empty = WorldState::default();
    let t = apply_transactions(&empty, &txs, DEFAULT_GAS_LIMIT).unwrap();
    println!("empty root {}", empty.root().to_hex());
    println!("after 3 readings {} ({} entries, gas {})", t.state.root().to_hex(), t.state.len(), t.gas_used);
    for seq in 0..3 {
        let r = read_record(&t.state, "dev-1", seq).unwrap();
        println!("  dev-1 #{seq} at {}s: {:.2} C", r.reading_time, r.temperature as f64 / 100.0);
    }

    // Replaying a sequence number fails without touching state.
    let replay = apply_transactions(&t.state, &txs[..1], DEFAULT_GAS_LIMIT).unwrap();
    println!("replay receipt success: {}, root unchanged: {}", replay.receipts[0].success, replay.state.root() == t.state.root());
}
