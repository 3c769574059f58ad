//! Attack injection. Edits are made directly on a node's stored chain, the
//! way someone with write access to its database would, followed by an
//! optional attempt to make the edited block look properly sealed.

use primitive_types::U256;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{ChainStore, HeaderChain, ImportOutcome};
use crate::miner::{assemble, mine_child};
use crate::params::ChainParams;
use crate::pow::{apply_seal, mine_at_difficulty, ComputeBudget, EpochSeed, PowError};
use crate::primitives::{hash_concat, Block, Hash256, Transaction};
use crate::state::{record_key, Payload, SensorRecord, WorldState, DEFAULT_CONTRACT, FIXED_TX_GAS};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockRef {
    Height(u64),
    Hash(Hash256),
    /// The canonical block carrying a device's reading.
    Record { device_id: String, seq: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "field", rename_all = "snake_case")]
pub enum TamperEdit {
    /// Rewrite the temperature of a stored reading.
    Temperature { device_id: String, seq: u64, value: i64 },
}

impl TamperEdit {
    pub fn path(&self) -> String {
        match self {
            TamperEdit::Temperature { device_id, seq, .. } => format!("state:{device_id}:{seq}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Reseal {
    /// Body and state edited in place; header untouched.
    None,
    /// Roots recomputed, arbitrary nonce and mix digest written.
    FakeNonce { nonce: u64 },
    /// Roots recomputed and the block re-mined under a budget.
    HonestRepow { budget: u64 },
    /// As `HonestRepow`, and every canonical descendant is re-mined on top.
    RebuildDescendants { budget: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TamperSpec {
    pub target_node: String,
    pub target_block: BlockRef,
    pub edit: TamperEdit,
    pub reseal: Reseal,
    /// Added to the node's stored total difficulty for the tampered block.
    #[serde(default)]
    pub claimed_td_delta: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SealOutcome {
    Untouched,
    Fake,
    Mined { attempts: u64 },
    /// The budget ran out; a fake seal was written instead.
    Exhausted { attempts: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TamperReceipt {
    pub node: String,
    pub original: Hash256,
    pub tampered: Hash256,
    pub height: u64,
    pub seal: SealOutcome,
    /// Re-mined descendants, oldest first.
    pub rebuilt: Vec<Hash256>,
    /// Whether the node's canonical head now sits on the tampered branch.
    pub canonical: bool,
    pub old_value: i64,
    pub new_value: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TamperError {
    #[error("tamper target missing: {0}")]
    TargetMissing(String),
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("node {0} is not a light node")]
    NotLightNode(String),
    #[error("forged height {forged} must exceed network height {network}")]
    HeightNotAbove { forged: u64, network: u64 },
    #[error("budget exhausted after {attempts} attempts")]
    BudgetTooSmall { attempts: u64 },
}

fn resolve(store: &ChainStore, target: &BlockRef) -> Result<Hash256, TamperError> {
    match target {
        BlockRef::Height(h) => store
            .canonical_hash(*h)
            .filter(|_| *h > 0)
            .ok_or_else(|| TamperError::TargetMissing(format!("height {h}"))),
        BlockRef::Hash(h) if store.contains(h) => Ok(*h),
        BlockRef::Hash(h) => Err(TamperError::TargetMissing(format!("block {h:?}"))),
        BlockRef::Record { device_id, seq } => store
            .canonical_chain()
            .into_iter()
            .find(|h| {
                store.block(h).is_some_and(|b| {
                    b.transactions
                        .iter()
                        .any(|tx| reading_of(tx).is_some_and(|r| r.device_id == *device_id && r.seq == *seq))
                })
            })
            .ok_or_else(|| TamperError::TargetMissing(format!("record {device_id}:{seq}"))),
    }
}

fn reading_of(tx: &Transaction) -> Option<SensorRecord> {
    match Payload::decode(&tx.payload).ok()? {
        Payload::Reading(r) => Some(r),
        Payload::TamperLog(_) => None,
    }
}

fn forged_mix(nonce: u64) -> Hash256 {
    hash_concat(&[b"forged-mix", &nonce.to_be_bytes()])
}

fn add_signed(v: U256, delta: i64) -> U256 {
    if delta >= 0 {
        v.saturating_add(U256::from(delta as u64))
    } else {
        v.saturating_sub(U256::from(delta.unsigned_abs()))
    }
}

/// Applies `spec` (minus its node selection) to one store.
///
/// The tampered block is written next to the original. With a negative
/// `claimed_td_delta` it stays a side block and is queued as an uncle for the
/// node's next mined block; otherwise the node's canonical head is forced
/// onto it.
pub fn tamper_store(
    store: &mut ChainStore,
    node: &str,
    spec: &TamperSpec,
    rng_seed: u64,
) -> Result<TamperReceipt, TamperError> {
    let params = store.params().clone();
    let original = resolve(store, &spec.target_block)?;
    let block = store.block(&original).cloned().expect("resolved");
    let TamperEdit::Temperature { device_id, seq, value } = &spec.edit;

    let idx = block
        .transactions
        .iter()
        .position(|tx| reading_of(tx).is_some_and(|r| r.device_id == *device_id && r.seq == *seq))
        .ok_or_else(|| TamperError::TargetMissing(format!("record {device_id}:{seq} in block")))?;
    let mut record = reading_of(&block.transactions[idx]).expect("matched above");
    let old_value = record.temperature;
    record.temperature = *value;
    let mut txs = block.transactions.clone();
    txs[idx].payload = Payload::Reading(record.clone()).encode();

    let parent_hash = block.parent_hash();
    let parent = store
        .block(&parent_hash)
        .cloned()
        .ok_or_else(|| TamperError::TargetMissing("parent block".into()))?;
    let parent_state = store
        .post_state(&parent_hash)
        .cloned()
        .ok_or_else(|| TamperError::TargetMissing("parent state".into()))?;
    let parent_td = store.total_difficulty(&parent_hash).expect("parent stored");

    if let Reseal::None = spec.reseal {
        let contract = &txs[idx].contract;
        let state = store
            .post_state(&original)
            .cloned()
            .unwrap_or_default()
            .with_entry(record_key(contract, device_id, *seq), record.encode());
        let td = add_signed(store.total_difficulty(&original).expect("stored"), spec.claimed_td_delta);
        let tampered = Block {
            header: block.header.clone(),
            transactions: txs,
            uncles: block.uncles.clone(),
        };
        store.raw_insert(tampered, Some(state), td);
        return Ok(TamperReceipt {
            node: node.to_string(),
            original,
            tampered: original,
            height: block.height(),
            seal: SealOutcome::Untouched,
            rebuilt: Vec::new(),
            canonical: store.is_canonical(&original),
            old_value,
            new_value: *value,
        });
    }

    let (mut forged, transition) = assemble(
        &parent.header,
        &parent_state,
        txs,
        block.uncles.clone(),
        block.header.timestamp,
        &params,
    )
    .map_err(|e| TamperError::TargetMissing(e.to_string()))?;
    let mut remaining = ComputeBudget::ample();
    let seal = match spec.reseal {
        Reseal::None => unreachable!(),
        Reseal::FakeNonce { nonce } => {
            forged.header.nonce = nonce;
            forged.header.mix_digest = forged_mix(nonce);
            SealOutcome::Fake
        }
        Reseal::HonestRepow { budget } | Reseal::RebuildDescendants { budget } => {
            // Work must justify the claimed difficulty, not just the header's.
            let claimed = add_signed(forged.header.difficulty, spec.claimed_td_delta.max(0));
            let seed = EpochSeed::for_height(forged.header.height, &params);
            match mine_at_difficulty(&forged.header, claimed, &seed, ComputeBudget::new(budget), rng_seed) {
                Ok(s) => {
                    apply_seal(&mut forged.header, &s);
                    remaining = ComputeBudget::new(budget - s.attempts);
                    SealOutcome::Mined { attempts: s.attempts }
                }
                Err(PowError::Exhausted { attempts }) | Err(PowError::Cancelled { attempts }) => {
                    let nonce = rng_seed;
                    forged.header.nonce = nonce;
                    forged.header.mix_digest = forged_mix(nonce);
                    remaining = ComputeBudget::new(0);
                    SealOutcome::Exhausted { attempts }
                }
                Err(PowError::ZeroDifficulty) | Err(PowError::NonMonotonicTimestamp { .. }) => {
                    return Err(TamperError::TargetMissing("unsealable header".into()))
                }
            }
        }
    };

    let td = add_signed(parent_td + forged.header.difficulty, spec.claimed_td_delta);
    let forged_header = forged.header.clone();
    let tampered = store.raw_insert(forged, Some(transition.state), td);
    let mut tip = tampered;
    let mut rebuilt = Vec::new();

    if let (Reseal::RebuildDescendants { .. }, SealOutcome::Mined { .. }) = (spec.reseal, seal) {
        let descendants: Vec<Block> = ((block.height() + 1)..=store.head_height())
            .filter_map(|h| store.canonical_block(h).cloned())
            .collect();
        for (i, d) in descendants.into_iter().enumerate() {
            let tip_block = store.block(&tip).cloned().expect("stored");
            let tip_state = store.post_state(&tip).cloned().expect("stored");
            let Ok((mut next, t)) = assemble(
                &tip_block.header,
                &tip_state,
                d.transactions.clone(),
                d.uncles.clone(),
                d.header.timestamp,
                &params,
            ) else {
                break;
            };
            let seed = EpochSeed::for_height(next.header.height, &params);
            let Ok(s) = mine_at_difficulty(
                &next.header,
                next.header.difficulty,
                &seed,
                remaining,
                rng_seed.wrapping_add(i as u64 + 1),
            ) else {
                break;
            };
            remaining = ComputeBudget::new(remaining.max_attempts.saturating_sub(s.attempts));
            apply_seal(&mut next.header, &s);
            let td = store.total_difficulty(&tip).expect("stored") + next.header.difficulty;
            tip = store.raw_insert(next, Some(t.state), td);
            rebuilt.push(tip);
        }
    }

    let canonical = if spec.claimed_td_delta >= 0 {
        store.raw_force_head(tip).expect("tip stored");
        true
    } else {
        store.raw_queue_uncle(forged_header);
        false
    };

    Ok(TamperReceipt {
        node: node.to_string(),
        original,
        tampered,
        height: block.height(),
        seal,
        rebuilt,
        canonical,
        old_value,
        new_value: *value,
    })
}

/// Extends a light node's header chain with honestly sealed headers up to
/// `forged_height`, pushing its local height and total difficulty above the
/// rest of the network. Returns the forged hashes, oldest first.
pub fn forge_light_headers(
    chain: &mut HeaderChain,
    forged_height: u64,
    budget: ComputeBudget,
    rng_seed: u64,
) -> Result<Vec<Hash256>, TamperError> {
    let params = chain.params().clone();
    let mut remaining = budget.max_attempts;
    let mut out = Vec::new();
    while chain.head_header().height < forged_height {
        let parent = chain.head_header().clone();
        let (mut block, _) = assemble(
            &parent,
            &WorldState::default(),
            Vec::new(),
            Vec::new(),
            parent.timestamp + params.target_spacing_secs,
            &params,
        )
        .map_err(|e| TamperError::TargetMissing(e.to_string()))?;
        block.header.state_root = parent.state_root;
        let seed = EpochSeed::for_height(block.header.height, &params);
        let seal = mine_at_difficulty(
            &block.header,
            block.header.difficulty,
            &seed,
            ComputeBudget::new(remaining),
            rng_seed.wrapping_add(block.header.height),
        )
        .map_err(|e| match e {
            PowError::Exhausted { attempts } => TamperError::BudgetTooSmall {
                attempts: budget.max_attempts - remaining + attempts,
            },
            other => TamperError::TargetMissing(other.to_string()),
        })?;
        remaining -= seal.attempts;
        apply_seal(&mut block.header, &seal);
        let hash = block.header.hash();
        match chain.import_header(block.header) {
            ImportOutcome::Rejected(e) => return Err(TamperError::TargetMissing(e.to_string())),
            _ => out.push(hash),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AttackOutcome {
    pub attacker_won: bool,
    /// Attacker fork td minus honest chain td when the run stopped.
    pub final_td_gap: i128,
    pub honest_blocks: u64,
    pub attacker_blocks: u64,
    /// Number of blocks mined (both sides) when the fork was published.
    pub published_after: Option<u64>,
}

fn signed_gap(a: U256, b: U256) -> i128 {
    if a >= b {
        (a - b).low_u128() as i128
    } else {
        -((b - a).low_u128() as i128)
    }
}

const ATTACK_DEVICE: &str = "dev-1";
const ATTACK_SENDER: &str = "e1";
pub const ATTACK_ORIGINAL: i64 = 3400;
pub const ATTACK_FORGED: i64 = -400;

fn attack_reading(temperature: i64) -> Transaction {
    Transaction {
        sender: ATTACK_SENDER.into(),
        contract: DEFAULT_CONTRACT.into(),
        payload: Payload::Reading(SensorRecord {
            device_id: ATTACK_DEVICE.into(),
            reading_time: 1800,
            temperature,
            seq: 0,
        })
        .encode(),
        seq: 0,
        gas: FIXED_TX_GAS,
    }
}

/// Private-fork race. The honest network has mined `fork_depth` blocks, the
/// first of which holds a 34.00 °C reading. An attacker with share
/// `attacker_power` of the hash rate forks from genesis with the reading
/// rewritten to -4.00 °C and publishes as soon as its fork has strictly more
/// total difficulty. Block arrivals are an exponential race; every block is
/// really mined and validated. The run ends after `horizon_blocks` blocks.
pub fn majority_attack(
    params: &ChainParams,
    attacker_power: f64,
    fork_depth: u64,
    horizon_blocks: u64,
    seed: u64,
) -> AttackOutcome {
    let spacing = params.target_spacing_secs as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut honest = ChainStore::new(params.clone());
    let genesis = honest.head();
    let mut now = 0.0f64;

    for i in 0..fork_depth.max(1) {
        now += spacing;
        let head = honest.head_block().header.clone();
        let txs = if i == 0 { vec![attack_reading(ATTACK_ORIGINAL)] } else { vec![] };
        let (b, _) = mine_child(
            &head,
            honest.canonical_state(),
            txs,
            vec![],
            (now as u64).max(head.timestamp + 1),
            seed ^ i,
            params,
        )
        .expect("honest block");
        honest.import_block(b);
    }

    let mut attacker = honest.clone();
    attacker.raw_force_head(genesis).expect("genesis");
    let mut attacker_fork: Vec<Block> = Vec::new();

    let honest_rate = (1.0 - attacker_power).max(0.0) / spacing;
    let attacker_rate = attacker_power.max(0.0) / spacing;
    let draw = |rate: f64, rng: &mut ChaCha8Rng| {
        if rate > 0.0 {
            Exp::new(rate).expect("positive rate").sample(rng)
        } else {
            f64::INFINITY
        }
    };

    let (mut honest_blocks, mut attacker_blocks) = (0u64, 0u64);
    let mut published_after = None;
    let mut final_td_gap = signed_gap(attacker.head_td(), honest.head_td());
    while honest_blocks + attacker_blocks < horizon_blocks {
        let h = draw(honest_rate, &mut rng);
        let a = draw(attacker_rate, &mut rng);
        if !h.is_finite() && !a.is_finite() {
            break;
        }
        now += h.min(a);
        let salt = seed.wrapping_mul(1_000_003).wrapping_add(honest_blocks + attacker_blocks);
        if h <= a {
            let head = honest.head_block().header.clone();
            let (b, _) = mine_child(
                &head,
                honest.canonical_state(),
                vec![],
                vec![],
                (now as u64).max(head.timestamp + 1),
                salt,
                params,
            )
            .expect("honest block");
            honest.import_block(b);
            honest_blocks += 1;
        } else {
            let head = attacker.head_block().header.clone();
            let txs = if head.height == 0 { vec![attack_reading(ATTACK_FORGED)] } else { vec![] };
            let (b, t) = mine_child(
                &head,
                attacker.canonical_state(),
                txs,
                vec![],
                (now as u64).max(head.timestamp + 1),
                salt,
                params,
            )
            .expect("attacker block");
            attacker.insert_validated(b.clone(), t.state);
            attacker_fork.push(b);
            attacker_blocks += 1;
        }
        final_td_gap = signed_gap(attacker.head_td(), honest.head_td());
        if final_td_gap > 0 {
            for b in attacker_fork.drain(..) {
                honest.import_block(b);
            }
            published_after = Some(honest_blocks + attacker_blocks);
            break;
        }
    }

    let reading = honest
        .canonical_state()
        .record(DEFAULT_CONTRACT, ATTACK_DEVICE, 0)
        .map(|r| r.temperature);
    AttackOutcome {
        attacker_won: reading == Some(ATTACK_FORGED),
        final_td_gap,
        honest_blocks,
        attacker_blocks,
        published_after,
    }
}

/// Win fraction of [`majority_attack`] over `seeds`, run in parallel.
pub fn majority_attack_rate(
    params: &ChainParams,
    attacker_power: f64,
    fork_depth: u64,
    horizon_blocks: u64,
    seeds: impl IntoIterator<Item = u64>,
) -> (f64, Vec<AttackOutcome>) {
    use rayon::prelude::*;
    let seeds: Vec<u64> = seeds.into_iter().collect();
    let outcomes: Vec<AttackOutcome> = seeds
        .par_iter()
        .map(|s| majority_attack(params, attacker_power, fork_depth, horizon_blocks, *s))
        .collect();
    let wins = outcomes.iter().filter(|o| o.attacker_won).count();
    (wins as f64 / outcomes.len().max(1) as f64, outcomes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::iot::audit_store;
    use crate::pow::verify_pow;

    fn params() -> ChainParams {
        ChainParams {
            genesis_difficulty: 16,
            ..ChainParams::default()
        }
    }

    fn store_with_reading() -> ChainStore {
        let params = params();
        let mut store = ChainStore::new(params.clone());
        for i in 0..3u64 {
            let head = store.head_block().header.clone();
            let txs = if i == 0 { vec![attack_reading(ATTACK_ORIGINAL)] } else { vec![] };
            let (b, _) = mine_child(&head, store.canonical_state(), txs, vec![], head.timestamp + 13, i, &params).unwrap();
            assert!(store.import_block(b).head_changed());
        }
        store
    }

    fn spec(reseal: Reseal, delta: i64) -> TamperSpec {
        TamperSpec {
            target_node: "n".into(),
            target_block: BlockRef::Record { device_id: ATTACK_DEVICE.into(), seq: 0 },
            edit: TamperEdit::Temperature { device_id: ATTACK_DEVICE.into(), seq: 0, value: ATTACK_FORGED },
            reseal,
            claimed_td_delta: delta,
        }
    }

    fn record(store: &ChainStore) -> i64 {
        store.canonical_state().record(DEFAULT_CONTRACT, ATTACK_DEVICE, 0).unwrap().temperature
    }

    #[test]
    fn fake_seal_is_forced_head_and_fails_pow() {
        let mut store = store_with_reading();
        let other = store.clone();
        let r = tamper_store(&mut store, "n", &spec(Reseal::FakeNonce { nonce: 7 }, 0), 1).unwrap();
        assert_eq!(r.seal, SealOutcome::Fake);
        assert!(r.canonical);
        assert_eq!(store.head(), r.tampered);
        assert_eq!(record(&store), ATTACK_FORGED);
        let h = store.header(&r.tampered).unwrap();
        assert!(!verify_pow(h, &EpochSeed::for_height(h.height, store.params())));
        assert_eq!(other.encode(), store_with_reading().encode());
    }

    #[test]
    fn audit_names_the_changed_record() {
        let mut store = store_with_reading();
        tamper_store(&mut store, "n", &spec(Reseal::FakeNonce { nonce: 7 }, 0), 1).unwrap();
        let logs = audit_store(&store, "n", 5);
        assert_eq!(logs.len(), 1);
        assert_eq!(logs[0].field, "state:dev-1:0");
        assert_eq!(logs[0].old_text(), "3400");
        assert_eq!(logs[0].new_text(), "-400");
    }

    #[test]
    fn honest_repow_seals_and_negative_delta_queues_uncle() {
        let mut store = store_with_reading();
        let head = store.head();
        let r = tamper_store(&mut store, "n", &spec(Reseal::HonestRepow { budget: 1 << 20 }, -1), 3).unwrap();
        assert!(matches!(r.seal, SealOutcome::Mined { .. }));
        assert!(!r.canonical);
        assert_eq!(store.head(), head);
        assert_eq!(store.forced_uncles().len(), 1);
        assert_eq!(store.forced_uncles()[0].hash(), r.tampered);
        assert!(store.seal_valid(&r.tampered));
    }

    #[test]
    fn tiny_budget_falls_back_to_fake_seal() {
        let mut store = store_with_reading();
        let r = tamper_store(&mut store, "n", &spec(Reseal::HonestRepow { budget: 4 }, 1 << 20), 3).unwrap();
        assert!(matches!(r.seal, SealOutcome::Exhausted { .. }));
        assert!(!store.seal_valid(&r.tampered));
    }

    #[test]
    fn rebuild_keeps_height_and_moves_head() {
        let mut store = store_with_reading();
        let height = store.head_height();
        let r = tamper_store(&mut store, "n", &spec(Reseal::RebuildDescendants { budget: 1 << 20 }, 0), 3).unwrap();
        assert_eq!(r.rebuilt.len(), 2);
        assert_eq!(store.head_height(), height);
        assert_eq!(store.head(), *r.rebuilt.last().unwrap());
        assert_eq!(record(&store), ATTACK_FORGED);
    }

    #[test]
    fn in_place_edit_keeps_hash() {
        let mut store = store_with_reading();
        let original = store.canonical_hash(1).unwrap();
        let r = tamper_store(&mut store, "n", &spec(Reseal::None, 0), 0).unwrap();
        assert_eq!(r.tampered, original);
        assert_eq!(store.post_state(&original).unwrap().record(DEFAULT_CONTRACT, ATTACK_DEVICE, 0).unwrap().temperature, ATTACK_FORGED);
        assert!(!audit_store(&store, "n", 0).is_empty());
    }

    #[test]
    fn missing_target() {
        let mut store = ChainStore::new(params());
        let err = tamper_store(&mut store, "n", &spec(Reseal::None, 0), 0).unwrap_err();
        assert!(matches!(err, TamperError::TargetMissing(_)));
    }

    #[test]
    fn forged_light_headers_raise_td() {
        let mut chain = HeaderChain::new(params());
        let forged = forge_light_headers(&mut chain, 3, ComputeBudget::ample(), 9).unwrap();
        assert_eq!(forged.len(), 3);
        assert_eq!(chain.head_header().height, 3);
        assert_eq!(chain.head_td(), U256::from(64));
        let mut poor = HeaderChain::new(params());
        let err = forge_light_headers(&mut poor, 3, ComputeBudget::new(1), 9).unwrap_err();
        assert!(matches!(err, TamperError::BudgetTooSmall { .. }));
    }

    /// Chance that a +1/-1 walk started at `-depth`, stepping up with
    /// probability `p`, reaches +1 within `steps` steps.
    fn walk_oracle(p: f64, depth: i64, steps: usize) -> f64 {
        let span = (depth + steps as i64 + 2) as usize;
        let offset = depth + steps as i64;
        let mut prob = vec![0.0f64; 2 * span + 1];
        prob[offset as usize] = 1.0;
        let goal = (offset + depth + 1) as usize;
        let mut won = 0.0;
        for _ in 0..steps {
            let mut next = vec![0.0f64; prob.len()];
            for (i, &m) in prob.iter().enumerate() {
                if m == 0.0 {
                    continue;
                }
                next[i + 1] += m * p;
                next[i - 1] += m * (1.0 - p);
            }
            won += next[goal];
            next[goal] = 0.0;
            prob = next;
        }
        won
    }

    #[test]
    fn walk_oracle_matches_gamblers_ruin_limit() {
        // Frozen: (0.3/0.7)^3.
        assert!((walk_oracle(0.3, 2, 2000) - 0.078_717_201).abs() < 1e-6);
        assert!((walk_oracle(0.7, 2, 2000) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn attack_rate_tracks_random_walk() {
        let p = params();
        for power in [0.2, 0.6] {
            let (rate, outcomes) = majority_attack_rate(&p, power, 2, 60, 0..60);
            let expect = walk_oracle(power, 2, 60);
            assert!((rate - expect).abs() < 0.2, "power {power}: {rate} vs {expect}");
            for o in &outcomes {
                assert_eq!(o.attacker_won, o.final_td_gap > 0);
                assert_eq!(o.attacker_won, o.published_after.is_some());
            }
        }
    }

    #[test]
    fn attack_is_deterministic() {
        let p = params();
        assert_eq!(majority_attack(&p, 0.5, 2, 40, 11), majority_attack(&p, 0.5, 2, 40, 11));
    }
}
