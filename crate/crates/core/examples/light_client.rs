// A header-only node: follows total difficulty, gets pushed ahead of the
// network by forged headers, and falls back once honest work overtakes them.
use tamperchain::chain::{ChainStore, HeaderChain};
use tamperchain::miner::mine_child;
use tamperchain::params::ChainParams;
use tamperchain::pow::ComputeBudget;
use tamperchain::tamper::forge_light_headers;

fn main() {
    let params = ChainParams {
        genesis_difficulty: 16,
        ..ChainParams::default()
    };
    let mut full = ChainStore::new(params.clone());
    let mut light = HeaderChain::new(params.clone());

    let mine = |full: &mut ChainStore, seed: u64| {
        let p = full.head_block().header.clone();
        let (b, _) = mine_child(&p, full.canonical_state(), vec![], vec![], p.timestamp + 13, seed, full.params()).unwrap();
        full.import_block(b.clone());
        b.header
    };
    for i in 0..5 {
        light.import_header(mine(&mut full, i));
    }
    println!("synced: light h={} td={}", light.head_header().height, light.head_td());

    let forged = forge_light_headers(&mut light, 8, ComputeBudget::new(1 << 20), 7).unwrap();
    println!("forged {} headers: light h={} td={}, network td={}", forged.len(), light.head_header().height, light.head_td(), full.head_td());

    // Honest headers land on a side branch until they carry more work.
    let mut seed = 100;
    loop {
        let outcome = light.import_header(mine(&mut full, seed));
        println!("  honest h={} -> {}", full.head_height(), outcome.name());
        seed += 1;
        if full.is_canonical(&light.head()) {
            break;
        }
    }
    println!("light head back on the network chain at h={}", light.head_header().height);
}
