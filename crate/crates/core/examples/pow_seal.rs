// Seal a header, verify it, then show that editing any sealed field breaks it.
use primitive_types::U256;
use tamperchain::params::ChainParams;
use tamperchain::pow::{apply_seal, difficulty_target, mine, verify_pow, ComputeBudget, EpochSeed};

fn main() {
    let params = ChainParams {
        genesis_difficulty: 1 << 16,
        ..ChainParams::default()
    };
    let (genesis, _) = params.genesis();
    let mut header = genesis.header.clone();
    header.height = 1;
    header.parent_hash = genesis.hash();
    header.timestamp = 13;

    let seed = EpochSeed::for_height(header.height, &params);
    let seal = mine(&header, &seed, ComputeBudget::ample(), 42).expect("ample budget");
    apply_seal(&mut header, &seal);
    println!("difficulty {} target {:#x}", header.difficulty, difficulty_target(header.difficulty).unwrap());
    println!("sealed after {} attempts, nonce {}", seal.attempts, seal.nonce);
    println!("verifies: {}", verify_pow(&header, &seed));

    let mut forged = header.clone();
    forged.gas_used += 1;
    println!("gas_used + 1 verifies: {}", verify_pow(&forged, &seed));

    // A cheaper difficulty does not rescue a forged header either.
    forged.difficulty = U256::from(16u64);
    println!("and at difficulty 16: {}", verify_pow(&forged, &seed));

    // Short of the budget, mining reports the work that was spent.
    let err = mine(&header, &seed, ComputeBudget::new(10), 1).unwrap_err();
    println!("10-attempt budget: {err}");
}
