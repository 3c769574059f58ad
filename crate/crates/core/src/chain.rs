//! Per-node chain database: blocks, post-states, total difficulty, the
//! canonical index, and fork choice by strictly greater total difficulty.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use primitive_types::U256;
use thiserror::Error;

use crate::error::{DecodeError, StoreFileError};
use crate::params::ChainParams;
use crate::pow::verify_pow;
use crate::pow::EpochSeed;
use crate::primitives::{read_block, read_header, write_block, write_header, Block, Decoder, Encoder, Hash256, Header};
use crate::state::WorldState;
use crate::validation::{uncle_window, validate_block, validate_header, ValidationError};

const STORE_MAGIC: &[u8; 4] = b"TCDB";
const STORE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChainError {
    #[error("unknown block {0:?}")]
    UnknownBlock(Hash256),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ImportOutcome {
    ExtendedCanonical,
    SideChain,
    Reorganized {
        old_head: Hash256,
        new_head: Hash256,
        reverted: Vec<Hash256>,
    },
    Rejected(ValidationError),
}

impl ImportOutcome {
    pub fn name(&self) -> String {
        match self {
            ImportOutcome::ExtendedCanonical => "ExtendedCanonical".into(),
            ImportOutcome::SideChain => "SideChain".into(),
            ImportOutcome::Reorganized { reverted, .. } => format!("Reorganized(reverted={})", reverted.len()),
            ImportOutcome::Rejected(e) => format!("Rejected({e})"),
        }
    }

    pub fn head_changed(&self) -> bool {
        matches!(
            self,
            ImportOutcome::ExtendedCanonical | ImportOutcome::Reorganized { .. }
        )
    }
}

/// Result of rewriting the canonical index onto a new head.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reorg {
    /// Previously canonical blocks, oldest first.
    pub reverted: Vec<Hash256>,
    /// Newly canonical blocks, oldest first.
    pub applied: Vec<Hash256>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainStore {
    params: ChainParams,
    genesis: Hash256,
    blocks: BTreeMap<Hash256, Block>,
    post_states: BTreeMap<Hash256, WorldState>,
    td: BTreeMap<Hash256, U256>,
    canonical: BTreeMap<u64, Hash256>,
    head: Hash256,
    bad_blocks: BTreeMap<Hash256, ValidationError>,
    /// Headers queued for inclusion as uncles regardless of validity. Empty
    /// on honest nodes; tamper tooling fills it.
    forced_uncles: Vec<Header>,
}

impl ChainStore {
    pub fn new(params: ChainParams) -> Self {
        let (genesis, state) = params.genesis();
        let hash = genesis.hash();
        let td = genesis.header.difficulty;
        ChainStore {
            params,
            genesis: hash,
            blocks: BTreeMap::from([(hash, genesis)]),
            post_states: BTreeMap::from([(hash, state)]),
            td: BTreeMap::from([(hash, td)]),
            canonical: BTreeMap::from([(0, hash)]),
            head: hash,
            bad_blocks: BTreeMap::new(),
            forced_uncles: Vec::new(),
        }
    }

    pub fn params(&self) -> &ChainParams {
        &self.params
    }

    pub fn genesis_hash(&self) -> Hash256 {
        self.genesis
    }

    pub fn contains(&self, hash: &Hash256) -> bool {
        self.blocks.contains_key(hash)
    }

    pub fn block(&self, hash: &Hash256) -> Option<&Block> {
        self.blocks.get(hash)
    }

    pub fn header(&self, hash: &Hash256) -> Option<&Header> {
        self.blocks.get(hash).map(|b| &b.header)
    }

    pub fn blocks(&self) -> impl Iterator<Item = (&Hash256, &Block)> {
        self.blocks.iter()
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn post_state(&self, hash: &Hash256) -> Option<&WorldState> {
        self.post_states.get(hash)
    }

    pub fn total_difficulty(&self, hash: &Hash256) -> Result<U256, ChainError> {
        self.td.get(hash).copied().ok_or(ChainError::UnknownBlock(*hash))
    }

    pub fn head(&self) -> Hash256 {
        self.head
    }

    pub fn head_block(&self) -> &Block {
        &self.blocks[&self.head]
    }

    pub fn head_td(&self) -> U256 {
        self.td[&self.head]
    }

    pub fn head_height(&self) -> u64 {
        self.head_block().height()
    }

    pub fn canonical_hash(&self, height: u64) -> Option<Hash256> {
        self.canonical.get(&height).copied()
    }

    pub fn canonical_block(&self, height: u64) -> Option<&Block> {
        self.canonical_hash(height).and_then(|h| self.blocks.get(&h))
    }

    /// Canonical hashes from genesis to head.
    pub fn canonical_chain(&self) -> Vec<Hash256> {
        self.canonical.values().copied().collect()
    }

    pub fn is_canonical(&self, hash: &Hash256) -> bool {
        self.blocks
            .get(hash)
            .is_some_and(|b| self.canonical.get(&b.height()) == Some(hash))
    }

    /// Post-state of the canonical head.
    pub fn canonical_state(&self) -> &WorldState {
        &self.post_states[&self.head]
    }

    pub fn bad_block(&self, hash: &Hash256) -> Option<ValidationError> {
        self.bad_blocks.get(hash).copied()
    }

    pub fn bad_blocks(&self) -> impl Iterator<Item = (&Hash256, &ValidationError)> {
        self.bad_blocks.iter()
    }

    /// Validates and stores `block`, then applies fork choice.
    pub fn import_block(&mut self, block: Block) -> ImportOutcome {
        let hash = block.hash();
        if let Some(err) = self.bad_blocks.get(&hash) {
            return ImportOutcome::Rejected(*err);
        }
        match validate_block(&block, self) {
            Ok(transition) => self.insert_validated(block, transition.state),
            Err(err) => {
                if err.is_falsification() {
                    self.bad_blocks.insert(hash, err);
                }
                ImportOutcome::Rejected(err)
            }
        }
    }

    /// Stores a block the caller vouches for (a miner's own block) without
    /// running validation. The parent must be present.
    pub fn insert_validated(&mut self, block: Block, post_state: WorldState) -> ImportOutcome {
        let hash = block.hash();
        let parent = block.parent_hash();
        let td = self.td[&parent] + block.header.difficulty;
        self.blocks.insert(hash, block);
        self.post_states.insert(hash, post_state);
        self.td.insert(hash, td);
        self.choose_head(hash)
    }

    fn choose_head(&mut self, hash: Hash256) -> ImportOutcome {
        let block = &self.blocks[&hash];
        if block.parent_hash() == self.head {
            self.canonical.insert(block.height(), hash);
            self.head = hash;
            return ImportOutcome::ExtendedCanonical;
        }
        if self.td[&hash] > self.head_td() {
            let old_head = self.head;
            let reorg = self.reorg(hash).expect("block was just inserted");
            return ImportOutcome::Reorganized {
                old_head,
                new_head: hash,
                reverted: reorg.reverted,
            };
        }
        ImportOutcome::SideChain
    }

    /// Rewrites the canonical index so that it ends at `new_head`. Fork
    /// choice is the caller's job.
    pub fn reorg(&mut self, new_head: Hash256) -> Result<Reorg, ChainError> {
        if !self.blocks.contains_key(&new_head) {
            return Err(ChainError::UnknownBlock(new_head));
        }
        let mut applied = Vec::new();
        let mut cursor = new_head;
        while !self.is_canonical(&cursor) {
            applied.push(cursor);
            let block = &self.blocks[&cursor];
            match self.blocks.get(&block.parent_hash()) {
                Some(_) if block.height() > 0 => cursor = block.parent_hash(),
                _ => return Err(ChainError::UnknownBlock(block.parent_hash())),
            }
        }
        let ancestor_height = self.blocks[&cursor].height();
        let reverted: Vec<Hash256> = self
            .canonical
            .split_off(&(ancestor_height + 1))
            .into_values()
            .collect();
        applied.reverse();
        for h in &applied {
            self.canonical.insert(self.blocks[h].height(), *h);
        }
        self.head = new_head;
        Ok(Reorg { reverted, applied })
    }

    /// Seal-valid orphan headers that a child of `tip` may include as uncles.
    /// Queued forced uncles come first.
    pub fn uncle_candidates(&self, tip: Hash256) -> Vec<Header> {
        let (ancestors, included) = uncle_window(self, tip);
        let in_window = |h: &Header| {
            let hash = h.hash();
            h.parent_hash != tip
                && ancestors.contains(&h.parent_hash)
                && !ancestors.contains(&hash)
                && !included.contains(&hash)
        };
        let mut out: Vec<Header> = Vec::new();
        let mut seen = BTreeSet::new();
        for h in &self.forced_uncles {
            if in_window(h) && seen.insert(h.hash()) {
                out.push(h.clone());
            }
        }
        let mut honest: Vec<&Block> = self
            .blocks
            .values()
            .filter(|b| {
                let hash = b.hash();
                b.height() > 0
                    && !self.bad_blocks.contains_key(&hash)
                    && !self.forced_uncles.iter().any(|f| f.hash() == hash)
                    && in_window(&b.header)
                    && self
                        .header(&b.parent_hash())
                        .is_some_and(|p| validate_header(&b.header, p, &self.params).is_ok())
            })
            .collect();
        honest.sort_by_key(|b| (std::cmp::Reverse(b.height()), b.hash()));
        for b in honest {
            if seen.insert(b.hash()) {
                out.push(b.header.clone());
            }
        }
        out.truncate(self.params.max_uncles);
        out
    }

    /// Walks from `hash` to genesis.
    pub fn ancestry(&self, hash: Hash256) -> Vec<Hash256> {
        let mut out = Vec::new();
        let mut cursor = Some(hash);
        while let Some(h) = cursor {
            let Some(b) = self.blocks.get(&h) else { break };
            out.push(h);
            cursor = (b.height() > 0).then_some(b.parent_hash());
        }
        out
    }

    pub fn seal_valid(&self, hash: &Hash256) -> bool {
        self.header(hash)
            .is_some_and(|h| h.height == 0 || verify_pow(h, &EpochSeed::for_height(h.height, &self.params)))
    }

    // Raw database edits. These bypass validation and fork choice, the way
    // someone with write access to the node's storage would.

    pub fn raw_insert(&mut self, block: Block, post_state: Option<WorldState>, td: U256) -> Hash256 {
        let hash = block.hash();
        self.blocks.insert(hash, block);
        match post_state {
            Some(s) => {
                self.post_states.insert(hash, s);
            }
            None => {
                self.post_states.remove(&hash);
            }
        }
        self.td.insert(hash, td);
        hash
    }

    pub fn raw_set_td(&mut self, hash: Hash256, td: U256) {
        self.td.insert(hash, td);
    }

    /// Points the canonical index at `hash` without comparing difficulty.
    pub fn raw_force_head(&mut self, hash: Hash256) -> Result<Reorg, ChainError> {
        self.reorg(hash)
    }

    pub fn raw_remove_state(&mut self, hash: &Hash256) -> Option<WorldState> {
        self.post_states.remove(hash)
    }

    pub fn raw_queue_uncle(&mut self, header: Header) {
        self.forced_uncles.push(header);
    }

    pub fn forced_uncles(&self) -> &[Header] {
        &self.forced_uncles
    }

    pub fn mark_bad(&mut self, hash: Hash256, err: ValidationError) {
        self.bad_blocks.insert(hash, err);
    }

    /// Serializes the whole store. Layout in `docs/encoding.md`.
    pub fn encode(&self) -> Vec<u8> {
        let p = &self.params;
        let mut enc = Encoder::new();
        enc.fixed(STORE_MAGIC)
            .u32(STORE_VERSION)
            .u64(p.genesis_difficulty)
            .u64(p.genesis_timestamp)
            .u64(p.gas_limit)
            .u64(p.target_spacing_secs)
            .u64(p.min_difficulty)
            .u64(p.epoch_blocks)
            .u64(p.max_uncles as u64)
            .u64(p.uncle_depth)
            .fixed(&self.genesis.0)
            .fixed(&self.head.0)
            .u32(self.blocks.len() as u32);
        for (hash, block) in &self.blocks {
            write_block(&mut enc, block);
            enc.u256(self.td[hash]);
            match self.post_states.get(hash) {
                Some(state) => {
                    enc.u8(1);
                    let bytes = state.encode();
                    enc.fixed(&bytes);
                }
                None => {
                    enc.u8(0);
                }
            }
        }
        enc.u32(self.canonical.len() as u32);
        for (height, hash) in &self.canonical {
            enc.u64(*height).fixed(&hash.0);
        }
        enc.u32(self.bad_blocks.len() as u32);
        for (hash, err) in &self.bad_blocks {
            enc.fixed(&hash.0).str(&err.to_string());
        }
        enc.u32(self.forced_uncles.len() as u32);
        for h in &self.forced_uncles {
            write_header(&mut enc, h);
        }
        enc.finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<ChainStore, DecodeError> {
        let mut dec = Decoder::new(bytes);
        let magic = dec.fixed::<4>()?;
        if &magic != STORE_MAGIC || dec.u32()? != STORE_VERSION {
            return Err(DecodeError::BadMagic);
        }
        let params = ChainParams {
            genesis_difficulty: dec.u64()?,
            genesis_timestamp: dec.u64()?,
            gas_limit: dec.u64()?,
            target_spacing_secs: dec.u64()?,
            min_difficulty: dec.u64()?,
            epoch_blocks: dec.u64()?,
            max_uncles: dec.u64()? as usize,
            uncle_depth: dec.u64()?,
        };
        let genesis = dec.hash()?;
        let head = dec.hash()?;
        let mut blocks = BTreeMap::new();
        let mut post_states = BTreeMap::new();
        let mut td = BTreeMap::new();
        for _ in 0..dec.u32()? {
            let block = read_block(&mut dec)?;
            let hash = block.hash();
            td.insert(hash, dec.u256()?);
            if dec.u8()? == 1 {
                post_states.insert(hash, WorldState::read(&mut dec)?);
            }
            blocks.insert(hash, block);
        }
        let mut canonical = BTreeMap::new();
        for _ in 0..dec.u32()? {
            canonical.insert(dec.u64()?, dec.hash()?);
        }
        let mut bad_blocks = BTreeMap::new();
        for _ in 0..dec.u32()? {
            let hash = dec.hash()?;
            let name = dec.string()?;
            let err = ValidationError::parse(&name)
                .ok_or_else(|| DecodeError::Dangling(format!("error name {name}")))?;
            bad_blocks.insert(hash, err);
        }
        let mut forced_uncles = Vec::new();
        for _ in 0..dec.u32()? {
            forced_uncles.push(read_header(&mut dec)?);
        }
        dec.finish()?;
        for h in canonical.values().chain([&genesis, &head]) {
            if !blocks.contains_key(h) {
                return Err(DecodeError::Dangling(format!("block {h:?}")));
            }
        }
        Ok(ChainStore {
            params,
            genesis,
            blocks,
            post_states,
            td,
            canonical,
            head,
            bad_blocks,
            forced_uncles,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), StoreFileError> {
        std::fs::write(path, self.encode())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<ChainStore, StoreFileError> {
        Ok(ChainStore::decode(&std::fs::read(path)?)?)
    }
}

/// Header-only chain kept by light nodes. Headers are checked for linkage,
/// difficulty and seal; no state is held or re-executed.
#[derive(Debug, Clone, PartialEq)]
pub struct HeaderChain {
    params: ChainParams,
    headers: BTreeMap<Hash256, Header>,
    td: BTreeMap<Hash256, U256>,
    canonical: BTreeMap<u64, Hash256>,
    head: Hash256,
}

impl HeaderChain {
    pub fn new(params: ChainParams) -> Self {
        let (genesis, _) = params.genesis();
        let hash = genesis.hash();
        HeaderChain {
            td: BTreeMap::from([(hash, genesis.header.difficulty)]),
            headers: BTreeMap::from([(hash, genesis.header)]),
            canonical: BTreeMap::from([(0, hash)]),
            head: hash,
            params,
        }
    }

    pub fn params(&self) -> &ChainParams {
        &self.params
    }

    pub fn head(&self) -> Hash256 {
        self.head
    }

    pub fn head_header(&self) -> &Header {
        &self.headers[&self.head]
    }

    pub fn head_td(&self) -> U256 {
        self.td[&self.head]
    }

    pub fn header(&self, hash: &Hash256) -> Option<&Header> {
        self.headers.get(hash)
    }

    pub fn contains(&self, hash: &Hash256) -> bool {
        self.headers.contains_key(hash)
    }

    pub fn total_difficulty(&self, hash: &Hash256) -> Result<U256, ChainError> {
        self.td.get(hash).copied().ok_or(ChainError::UnknownBlock(*hash))
    }

    pub fn canonical_hash(&self, height: u64) -> Option<Hash256> {
        self.canonical.get(&height).copied()
    }

    pub fn is_canonical(&self, hash: &Hash256) -> bool {
        self.headers
            .get(hash)
            .is_some_and(|h| self.canonical.get(&h.height) == Some(hash))
    }

    pub fn import_header(&mut self, header: Header) -> ImportOutcome {
        let hash = header.hash();
        if self.headers.contains_key(&hash) {
            return ImportOutcome::Rejected(ValidationError::KnownBlock);
        }
        let Some(parent) = self.headers.get(&header.parent_hash) else {
            return ImportOutcome::Rejected(ValidationError::UnknownParent);
        };
        if let Err(fault) = validate_header(&header, parent, &self.params) {
            return ImportOutcome::Rejected(ValidationError::InvalidHeader(fault));
        }
        let td = self.td[&header.parent_hash] + header.difficulty;
        let extends_head = header.parent_hash == self.head;
        let height = header.height;
        self.headers.insert(hash, header);
        self.td.insert(hash, td);
        if extends_head {
            self.canonical.insert(height, hash);
            self.head = hash;
            return ImportOutcome::ExtendedCanonical;
        }
        if td > self.head_td() {
            let old_head = self.head;
            let mut applied = Vec::new();
            let mut cursor = hash;
            while !self.is_canonical(&cursor) {
                applied.push(cursor);
                cursor = self.headers[&cursor].parent_hash;
            }
            let fork_height = self.headers[&cursor].height;
            let reverted = self.canonical.split_off(&(fork_height + 1)).into_values().collect();
            for h in applied.into_iter().rev() {
                self.canonical.insert(self.headers[&h].height, h);
            }
            self.head = hash;
            return ImportOutcome::Reorganized {
                old_head,
                new_head: hash,
                reverted,
            };
        }
        ImportOutcome::SideChain
    }
}
