//! Ethash-shaped sealing without the DAG: the mix digest is the hash of the
//! header's seal hash, the nonce and a per-epoch seed, and must not exceed
//! `(2^256 - 1) / difficulty`.

use primitive_types::U256;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::params::ChainParams;
use crate::primitives::{hash, hash_concat, seal_hash, Hash256, Header};

/// Number of trials between two cancellation checks in [`mine_cancellable`].
pub const CANCEL_CHECK_INTERVAL: u64 = 1024;

const EPOCH_GENESIS_TAG: &[u8] = b"tamperchain/epoch/0";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpochSeed {
    pub epoch_index: u64,
    pub seed: Hash256,
}

impl EpochSeed {
    pub fn for_epoch(epoch_index: u64) -> EpochSeed {
        let mut seed = hash(EPOCH_GENESIS_TAG);
        for _ in 0..epoch_index {
            seed = hash(&seed.0);
        }
        EpochSeed { epoch_index, seed }
    }

    pub fn for_height(height: u64, params: &ChainParams) -> EpochSeed {
        Self::for_epoch(height / params.epoch_blocks.max(1))
    }

    pub fn next(&self) -> EpochSeed {
        EpochSeed {
            epoch_index: self.epoch_index + 1,
            seed: hash(&self.seed.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComputeBudget {
    pub max_attempts: u64,
}

impl ComputeBudget {
    pub const fn new(max_attempts: u64) -> Self {
        ComputeBudget { max_attempts }
    }

    /// Effectively unbounded; what honest miners use.
    pub const fn ample() -> Self {
        ComputeBudget {
            max_attempts: u64::MAX,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Seal {
    pub nonce: u64,
    pub mix_digest: Hash256,
    pub attempts: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PowError {
    #[error("difficulty must be at least 1")]
    ZeroDifficulty,
    #[error("insufficient computation: no valid nonce within {attempts} attempts")]
    Exhausted { attempts: u64 },
    #[error("mining cancelled after {attempts} attempts")]
    Cancelled { attempts: u64 },
    #[error("child timestamp {child} is not after parent timestamp {parent}")]
    NonMonotonicTimestamp { parent: u64, child: u64 },
}

pub fn difficulty_target(difficulty: U256) -> Result<U256, PowError> {
    if difficulty.is_zero() {
        return Err(PowError::ZeroDifficulty);
    }
    Ok(U256::MAX / difficulty)
}

pub fn mix(seal: &Hash256, nonce: u64, seed: &EpochSeed) -> Hash256 {
    hash_concat(&[&seal.0, &nonce.to_be_bytes(), &seed.seed.0])
}

pub fn mine(
    header: &Header,
    seed: &EpochSeed,
    budget: ComputeBudget,
    rng_seed: u64,
) -> Result<Seal, PowError> {
    mine_cancellable(header, seed, budget, rng_seed, || false)
}

/// Nonce search starting at a point drawn from `rng_seed` and counting up.
/// `cancel` is polled every [`CANCEL_CHECK_INTERVAL`] trials.
pub fn mine_cancellable(
    header: &Header,
    seed: &EpochSeed,
    budget: ComputeBudget,
    rng_seed: u64,
    mut cancel: impl FnMut() -> bool,
) -> Result<Seal, PowError> {
    mine_against(header, header.difficulty, seed, budget, rng_seed, &mut cancel)
}

/// Like [`mine`], but against an arbitrary difficulty rather than the one in
/// the header. A seal found at a higher difficulty also satisfies a lower one.
pub fn mine_at_difficulty(
    header: &Header,
    difficulty: U256,
    seed: &EpochSeed,
    budget: ComputeBudget,
    rng_seed: u64,
) -> Result<Seal, PowError> {
    mine_against(header, difficulty, seed, budget, rng_seed, &mut || false)
}

fn mine_against(
    header: &Header,
    difficulty: U256,
    seed: &EpochSeed,
    budget: ComputeBudget,
    rng_seed: u64,
    cancel: &mut dyn FnMut() -> bool,
) -> Result<Seal, PowError> {
    let target = difficulty_target(difficulty)?;
    let seal = seal_hash(header);
    let mut nonce = ChaCha8Rng::seed_from_u64(rng_seed).next_u64();
    let mut attempts = 0u64;
    while attempts < budget.max_attempts {
        if attempts > 0 && attempts.is_multiple_of(CANCEL_CHECK_INTERVAL) && cancel() {
            return Err(PowError::Cancelled { attempts });
        }
        attempts += 1;
        let digest = mix(&seal, nonce, seed);
        if digest.to_u256() <= target {
            return Ok(Seal {
                nonce,
                mix_digest: digest,
                attempts,
            });
        }
        nonce = nonce.wrapping_add(1);
    }
    Err(PowError::Exhausted { attempts })
}

pub fn verify_pow(header: &Header, seed: &EpochSeed) -> bool {
    let Ok(target) = difficulty_target(header.difficulty) else {
        return false;
    };
    let digest = mix(&seal_hash(header), header.nonce, seed);
    digest == header.mix_digest && digest.to_u256() <= target
}

/// Difficulty rule: +1/128 of the parent's difficulty when the block came
/// faster than the target spacing, -1/128 otherwise, floored at the minimum.
pub fn calc_difficulty(
    parent: &Header,
    child_timestamp: u64,
    params: &ChainParams,
) -> Result<U256, PowError> {
    if child_timestamp <= parent.timestamp {
        return Err(PowError::NonMonotonicTimestamp {
            parent: parent.timestamp,
            child: child_timestamp,
        });
    }
    let d = parent.difficulty;
    let step = d / U256::from(128u64);
    let next = if child_timestamp - parent.timestamp < params.target_spacing_secs {
        d.saturating_add(step)
    } else {
        d.saturating_sub(step)
    };
    Ok(next.max(U256::from(params.min_difficulty)))
}

/// Applies a seal to a header.
pub fn apply_seal(header: &mut Header, seal: &Seal) {
    header.nonce = seal.nonce;
    header.mix_digest = seal.mix_digest;
}
