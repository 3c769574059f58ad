use primitive_types::U256;
use serde::{Deserialize, Serialize};

use crate::primitives::{empty_root, uncle_root, Block, Bloom, Hash256, Header, MAX_UNCLES, UNCLE_DEPTH};
use crate::state::{WorldState, DEFAULT_GAS_LIMIT};

/// Desired block spacing in simulated seconds.
pub const TARGET_SPACING_SECS: u64 = 13;
pub const MIN_DIFFICULTY: u64 = 16;
/// Blocks per epoch seed.
pub const EPOCH_BLOCKS: u64 = 30;
pub const DEFAULT_GENESIS_DIFFICULTY: u64 = 256;

/// Consensus constants shared by every node of a network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainParams {
    pub genesis_difficulty: u64,
    pub genesis_timestamp: u64,
    pub gas_limit: u64,
    pub target_spacing_secs: u64,
    pub min_difficulty: u64,
    pub epoch_blocks: u64,
    pub max_uncles: usize,
    pub uncle_depth: u64,
}

impl Default for ChainParams {
    fn default() -> Self {
        ChainParams {
            genesis_difficulty: DEFAULT_GENESIS_DIFFICULTY,
            genesis_timestamp: 0,
            gas_limit: DEFAULT_GAS_LIMIT,
            target_spacing_secs: TARGET_SPACING_SECS,
            min_difficulty: MIN_DIFFICULTY,
            epoch_blocks: EPOCH_BLOCKS,
            max_uncles: MAX_UNCLES,
            uncle_depth: UNCLE_DEPTH,
        }
    }
}

impl ChainParams {
    /// The genesis block and its (empty) post-state.
    pub fn genesis(&self) -> (Block, WorldState) {
        let state = WorldState::default();
        let header = Header {
            parent_hash: Hash256::ZERO,
            uncle_root: uncle_root(&[]),
            state_root: state.root(),
            tx_root: empty_root(),
            receipt_root: empty_root(),
            bloom: Bloom::default(),
            difficulty: U256::from(self.genesis_difficulty.max(1)),
            height: 0,
            gas_limit: self.gas_limit,
            gas_used: 0,
            timestamp: self.genesis_timestamp,
            nonce: 0,
            mix_digest: Hash256::ZERO,
        };
        (
            Block {
                header,
                transactions: Vec::new(),
                uncles: Vec::new(),
            },
            state,
        )
    }
}
