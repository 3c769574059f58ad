//! Block assembly for honest miners (and, with edits, for attackers).

use std::collections::BTreeMap;

use crate::params::ChainParams;
use crate::pow::{apply_seal, calc_difficulty, mine, ComputeBudget, EpochSeed, PowError, Seal};
use crate::primitives::{receipt_root, tx_root, uncle_root, Block, Hash256, Header, Transaction};
use crate::state::{apply_transactions, StateError, Transition, WorldState, FIXED_TX_GAS};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BuildError {
    #[error(transparent)]
    Pow(#[from] PowError),
    #[error(transparent)]
    State(#[from] StateError),
}

/// Picks pool transactions that will execute successfully, in pool order,
/// following each sender's sequence from `state`.
pub fn select_transactions(
    pool: &[Transaction],
    state: &WorldState,
    gas_limit: u64,
) -> Vec<Transaction> {
    let max_txs = (gas_limit / FIXED_TX_GAS) as usize;
    let mut next: BTreeMap<&str, u64> = BTreeMap::new();
    let mut chosen: Vec<Transaction> = Vec::new();
    // Loop until no more progress, so out-of-order arrivals still chain up.
    loop {
        let before = chosen.len();
        for tx in pool {
            if chosen.len() >= max_txs {
                return chosen;
            }
            let expected = *next
                .entry(tx.sender.as_str())
                .or_insert_with(|| state.next_seq(&tx.sender));
            if tx.seq == expected && !chosen.contains(tx) {
                next.insert(tx.sender.as_str(), expected + 1);
                chosen.push(tx.clone());
            }
        }
        if chosen.len() == before {
            return chosen;
        }
    }
}

/// Builds an unsealed child of `parent` with all commitments filled in.
pub fn assemble(
    parent: &Header,
    parent_state: &WorldState,
    transactions: Vec<Transaction>,
    uncles: Vec<Header>,
    timestamp: u64,
    params: &ChainParams,
) -> Result<(Block, Transition), BuildError> {
    let difficulty = calc_difficulty(parent, timestamp, params)?;
    let transition = apply_transactions(parent_state, &transactions, parent.gas_limit)?;
    let header = Header {
        parent_hash: parent.hash(),
        uncle_root: uncle_root(&uncles),
        state_root: transition.state.root(),
        tx_root: tx_root(&transactions),
        receipt_root: receipt_root(&transition.receipts),
        bloom: transition.bloom,
        difficulty,
        height: parent.height + 1,
        gas_limit: parent.gas_limit,
        gas_used: transition.gas_used,
        timestamp,
        nonce: 0,
        mix_digest: Hash256::ZERO,
    };
    Ok((
        Block {
            header,
            transactions,
            uncles,
        },
        transition,
    ))
}

/// Seals the header in place.
pub fn seal_header(
    header: &mut Header,
    budget: ComputeBudget,
    rng_seed: u64,
    params: &ChainParams,
) -> Result<Seal, PowError> {
    let seed = EpochSeed::for_height(header.height, params);
    let seal = mine(header, &seed, budget, rng_seed)?;
    apply_seal(header, &seal);
    Ok(seal)
}

/// Assembles and seals a child of `parent` with an unbounded budget.
pub fn mine_child(
    parent: &Header,
    parent_state: &WorldState,
    transactions: Vec<Transaction>,
    uncles: Vec<Header>,
    timestamp: u64,
    rng_seed: u64,
    params: &ChainParams,
) -> Result<(Block, Transition), BuildError> {
    let (mut block, transition) =
        assemble(parent, parent_state, transactions, uncles, timestamp, params)?;
    seal_header(&mut block.header, ComputeBudget::ample(), rng_seed, params)?;
    Ok((block, transition))
}
