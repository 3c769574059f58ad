// Two branches race from genesis; the node follows the heavier one.
use tamperchain::chain::ChainStore;
use tamperchain::miner::mine_child;
use tamperchain::params::ChainParams;
use tamperchain::primitives::Hash256;

fn grow(store: &mut ChainStore, mut parent: Hash256, spacing: &[u64], seed: u64) -> Hash256 {
    for (i, dt) in spacing.iter().enumerate() {
        let p = store.header(&parent).unwrap().clone();
        let state = store.post_state(&parent).unwrap().clone();
        let (b, _) = mine_child(&p, &state, vec![], vec![], p.timestamp + dt, seed + i as u64, store.params()).unwrap();
        parent = b.hash();
        let outcome = store.import_block(b);
        println!(
            "  h={} d={} td={} -> {}",
            p.height + 1,
            store.header(&parent).unwrap().difficulty,
            store.total_difficulty(&parent).unwrap(),
            outcome.name()
        );
    }
    parent
}

fn main() {
    let mut store = ChainStore::new(ChainParams::default());
    let genesis = store.head();

    // Slow blocks lower the difficulty, fast ones raise it.
    println!("branch A, three slow blocks:");
    let a = grow(&mut store, genesis, &[20, 20, 20], 1);
    println!("branch B, three fast blocks:");
    let b = grow(&mut store, genesis, &[5, 5, 5], 100);

    println!("head is branch {}", if store.head() == b { "B" } else { "A" });
    println!("A tip canonical: {}", store.is_canonical(&a));
    println!("uncle candidates on B: {}", store.uncle_candidates(store.head()).len());
}
