// Save a node's chain database to disk, edit the file's block directly, and
// load it back.
use tamperchain::chain::ChainStore;
use tamperchain::miner::mine_child;
use tamperchain::params::ChainParams;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut store = ChainStore::new(ChainParams {
        genesis_difficulty: 32,
        ..ChainParams::default()
    });
    for seed in 0..4 {
        let p = store.head_block().header.clone();
        let (b, _) = mine_child(&p, store.canonical_state(), vec![], vec![], p.timestamp + 13, seed, store.params())?;
        store.import_block(b);
    }
    let dir = std::env::temp_dir().join("tamperchain-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("node.tcdb");
    store.save(&path)?;
    let bytes = std::fs::read(&path)?;
    println!("wrote {} ({} bytes, magic {:?})", path.display(), bytes.len(), String::from_utf8_lossy(&bytes[..4]));

    let loaded = ChainStore::load(&path)?;
    println!("reloaded: head h={} td={} identical={}", loaded.head_height(), loaded.head_td(), loaded == store);

    // A truncated file is rejected rather than half-loaded.
    std::fs::write(&path, &bytes[..bytes.len() / 2])?;
    match ChainStore::load(&path) {
        Ok(_) => println!("truncated file loaded?"),
        Err(e) => println!("truncated file: {e}"),
    }
    Ok(())
}
