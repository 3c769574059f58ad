//! Block import validation.
//!
//! [`validate_block`] runs the import checks in a fixed order and reports the
//! first one that fails:
//!
//! 1. the block is already imported with its post-state ([`ValidationError::KnownBlock`])
//! 2. the parent block is unknown
//! 3. the parent's post-state is missing
//! 4. the header (height, timestamp, difficulty, gas, seal) is invalid
//! 5. an uncle header is invalid or misplaced
//! 6. declared gas used or bloom disagrees with re-execution
//! 7. the transaction or receipt root disagrees with the body
//! 8. the declared state root disagrees with re-execution
//!
//! Steps 6 to 8 share a single re-execution of the block's transactions.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::chain::ChainStore;
use crate::params::ChainParams;
use crate::pow::{calc_difficulty, verify_pow, EpochSeed};
use crate::primitives::{receipt_root, tx_root, uncle_root, Block, Hash256, Header};
use crate::state::{apply_transactions, Transition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HeaderFault {
    BadHeight,
    BadTimestamp,
    BadDifficulty,
    BadGas,
    BadSeal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UncleFault {
    TooManyUncles,
    UncleRootMismatch,
    UnknownUncleParent,
    StaleUncle,
    DuplicateUncle,
    InvalidUncleHeader,
}

impl fmt::Display for HeaderFault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl fmt::Display for UncleFault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Error)]
pub enum ValidationError {
    #[error("KnownBlock")]
    KnownBlock,
    #[error("UnknownParent")]
    UnknownParent,
    #[error("MissingParentState")]
    MissingParentState,
    #[error("InvalidHeader({0})")]
    InvalidHeader(HeaderFault),
    #[error("InvalidUncles({0})")]
    InvalidUncles(UncleFault),
    #[error("GasUsedMismatch")]
    GasUsedMismatch,
    #[error("BloomMismatch")]
    BloomMismatch,
    #[error("TxRootMismatch")]
    TxRootMismatch,
    #[error("ReceiptRootMismatch")]
    ReceiptRootMismatch,
    #[error("StateRootMismatch")]
    StateRootMismatch,
}

impl ValidationError {
    /// Variant name without the reason.
    pub fn name(&self) -> &'static str {
        match self {
            ValidationError::KnownBlock => "KnownBlock",
            ValidationError::UnknownParent => "UnknownParent",
            ValidationError::MissingParentState => "MissingParentState",
            ValidationError::InvalidHeader(_) => "InvalidHeader",
            ValidationError::InvalidUncles(_) => "InvalidUncles",
            ValidationError::GasUsedMismatch => "GasUsedMismatch",
            ValidationError::BloomMismatch => "BloomMismatch",
            ValidationError::TxRootMismatch => "TxRootMismatch",
            ValidationError::ReceiptRootMismatch => "ReceiptRootMismatch",
            ValidationError::StateRootMismatch => "StateRootMismatch",
        }
    }

    /// Position of the failing check in the import pipeline (1-based).
    pub fn step(&self) -> u8 {
        match self {
            ValidationError::KnownBlock => 1,
            ValidationError::UnknownParent => 2,
            ValidationError::MissingParentState => 3,
            ValidationError::InvalidHeader(_) => 4,
            ValidationError::InvalidUncles(_) => 5,
            ValidationError::GasUsedMismatch | ValidationError::BloomMismatch => 6,
            ValidationError::TxRootMismatch | ValidationError::ReceiptRootMismatch => 7,
            ValidationError::StateRootMismatch => 8,
        }
    }

    /// Errors that prove the block was forged, as opposed to the receiver
    /// merely lacking context. These mark the block bad and demote its sender.
    pub fn is_falsification(&self) -> bool {
        !matches!(
            self,
            ValidationError::KnownBlock
                | ValidationError::UnknownParent
                | ValidationError::MissingParentState
        )
    }

    pub fn parse(s: &str) -> Option<ValidationError> {
        use HeaderFault::*;
        use UncleFault::*;
        let all = [
            ValidationError::KnownBlock,
            ValidationError::UnknownParent,
            ValidationError::MissingParentState,
            ValidationError::GasUsedMismatch,
            ValidationError::BloomMismatch,
            ValidationError::TxRootMismatch,
            ValidationError::ReceiptRootMismatch,
            ValidationError::StateRootMismatch,
        ];
        let headers = [BadHeight, BadTimestamp, BadDifficulty, BadGas, BadSeal]
            .map(ValidationError::InvalidHeader);
        let uncles = [
            TooManyUncles,
            UncleRootMismatch,
            UnknownUncleParent,
            StaleUncle,
            DuplicateUncle,
            InvalidUncleHeader,
        ]
        .map(ValidationError::InvalidUncles);
        all.into_iter()
            .chain(headers)
            .chain(uncles)
            .find(|e| e.to_string() == s)
    }
}

pub fn validate_header(
    header: &Header,
    parent: &Header,
    params: &ChainParams,
) -> Result<(), HeaderFault> {
    if header.height != parent.height + 1 {
        return Err(HeaderFault::BadHeight);
    }
    if header.timestamp <= parent.timestamp {
        return Err(HeaderFault::BadTimestamp);
    }
    match calc_difficulty(parent, header.timestamp, params) {
        Ok(d) if d == header.difficulty => {}
        _ => return Err(HeaderFault::BadDifficulty),
    }
    if header.gas_used > header.gas_limit || header.gas_limit != parent.gas_limit {
        return Err(HeaderFault::BadGas);
    }
    if !verify_pow(header, &EpochSeed::for_height(header.height, params)) {
        return Err(HeaderFault::BadSeal);
    }
    Ok(())
}

/// The last `uncle_depth + 1` blocks ending at `tip`, newest first, along
/// with every uncle hash they include.
pub(crate) fn uncle_window(store: &ChainStore, tip: Hash256) -> (Vec<Hash256>, BTreeSet<Hash256>) {
    let mut ancestors = Vec::new();
    let mut included = BTreeSet::new();
    let mut cursor = Some(tip);
    while let Some(h) = cursor {
        if ancestors.len() as u64 > store.params().uncle_depth {
            break;
        }
        let Some(block) = store.block(&h) else { break };
        ancestors.push(h);
        included.extend(block.uncles.iter().map(|u| u.hash()));
        cursor = (block.height() > 0).then_some(block.parent_hash());
    }
    (ancestors, included)
}

/// Checks a block's uncles against the chain it extends. The block's parent
/// must already be in `store`.
pub fn validate_uncles(block: &Block, store: &ChainStore) -> Result<(), UncleFault> {
    let params = store.params();
    if block.uncles.len() > params.max_uncles {
        return Err(UncleFault::TooManyUncles);
    }
    if block.header.uncle_root != uncle_root(&block.uncles) {
        return Err(UncleFault::UncleRootMismatch);
    }
    if block.uncles.is_empty() {
        return Ok(());
    }
    let parent = block.parent_hash();
    let (ancestors, mut included) = uncle_window(store, parent);
    for uncle in &block.uncles {
        let h = uncle.hash();
        if !included.insert(h) || ancestors.contains(&h) {
            return Err(UncleFault::DuplicateUncle);
        }
        let Some(uncle_parent) = store.header(&uncle.parent_hash) else {
            return Err(UncleFault::UnknownUncleParent);
        };
        if uncle.parent_hash == parent || !ancestors.contains(&uncle.parent_hash) {
            return Err(UncleFault::StaleUncle);
        }
        validate_header(uncle, uncle_parent, params).map_err(|_| UncleFault::InvalidUncleHeader)?;
    }
    Ok(())
}

/// Runs the full import pipeline. On success returns the re-execution result
/// so the caller can store the post-state without executing twice.
pub fn validate_block(block: &Block, store: &ChainStore) -> Result<Transition, ValidationError> {
    let hash = block.hash();
    if store.contains(&hash) && store.post_state(&hash).is_some() {
        return Err(ValidationError::KnownBlock);
    }
    let Some(parent) = store.block(&block.parent_hash()) else {
        return Err(ValidationError::UnknownParent);
    };
    let Some(parent_state) = store.post_state(&block.parent_hash()) else {
        return Err(ValidationError::MissingParentState);
    };
    let params = store.params();
    validate_header(&block.header, &parent.header, params).map_err(ValidationError::InvalidHeader)?;
    validate_uncles(block, store).map_err(ValidationError::InvalidUncles)?;

    let header = &block.header;
    let transition = apply_transactions(parent_state, &block.transactions, header.gas_limit)
        .map_err(|_| ValidationError::GasUsedMismatch)?;
    if transition.gas_used != header.gas_used {
        return Err(ValidationError::GasUsedMismatch);
    }
    if transition.bloom != header.bloom {
        return Err(ValidationError::BloomMismatch);
    }
    if header.tx_root != tx_root(&block.transactions) {
        return Err(ValidationError::TxRootMismatch);
    }
    if header.receipt_root != receipt_root(&transition.receipts) {
        return Err(ValidationError::ReceiptRootMismatch);
    }
    if header.state_root != transition.state.root() {
        return Err(ValidationError::StateRootMismatch);
    }
    Ok(transition)
}
