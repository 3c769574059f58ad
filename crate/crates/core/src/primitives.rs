//! Hashing, canonical byte encoding and the block/transaction types shared
//! by every other module.
//!
//! Every integer is written big-endian at a fixed width and every variable
//! length field is prefixed with its `u32` length, in declaration order. The
//! layout is documented in `docs/encoding.md`.

use std::fmt;

use primitive_types::U256;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::DecodeError;

/// Maximum number of uncle headers a block may reference.
pub const MAX_UNCLES: usize = 2;
/// How many generations back an uncle's parent may sit.
pub const UNCLE_DEPTH: u64 = 6;

/// A 32-byte SHA-256 digest.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Hash256(pub [u8; 32]);

impl Hash256 {
    pub const ZERO: Hash256 = Hash256([0u8; 32]);

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    /// Big-endian integer view, used for target comparisons.
    pub fn to_u256(&self) -> U256 {
        U256::from_big_endian(&self.0)
    }

    /// First eight bytes in hex, for log lines.
    pub fn short(&self) -> String {
        hex::encode(&self.0[..8])
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Option<Hash256> {
        let bytes = hex::decode(s).ok()?;
        let arr: [u8; 32] = bytes.try_into().ok()?;
        Some(Hash256(arr))
    }
}

impl fmt::Debug for Hash256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", self.short())
    }
}

impl fmt::Display for Hash256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", self.to_hex())
    }
}

impl Serialize for Hash256 {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Hash256 {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Hash256::from_hex(s.trim_start_matches("0x"))
            .ok_or_else(|| serde::de::Error::custom("expected 32-byte hex digest"))
    }
}

/// SHA-256 of `data`.
pub fn hash(data: &[u8]) -> Hash256 {
    Hash256(Sha256::digest(data).into())
}

/// SHA-256 over the concatenation of `parts`.
pub fn hash_concat(parts: &[&[u8]]) -> Hash256 {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    Hash256(h.finalize().into())
}

/// Root of an empty Merkle tree: the hash of the empty byte string.
pub fn empty_root() -> Hash256 {
    hash(&[])
}

/// Binary Merkle root over the leaf hashes of `items`.
///
/// An odd node at the end of a layer is paired with itself. A single item
/// yields its own leaf hash, and an empty list yields [`empty_root`].
pub fn merkle_root<I, T>(items: I) -> Hash256
where
    I: IntoIterator<Item = T>,
    T: AsRef<[u8]>,
{
    let mut layer: Vec<Hash256> = items.into_iter().map(|i| hash(i.as_ref())).collect();
    if layer.is_empty() {
        return empty_root();
    }
    while layer.len() > 1 {
        layer = layer
            .chunks(2)
            .map(|pair| {
                let right = pair.get(1).unwrap_or(&pair[0]);
                hash_concat(&[&pair[0].0, &right.0])
            })
            .collect();
    }
    layer[0]
}

/// 256-bit log filter.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Bloom(pub [u8; 32]);

impl Bloom {
    pub fn set_bit(&mut self, index: u8) {
        self.0[(index / 8) as usize] |= 1 << (index % 8);
    }

    pub fn contains_bit(&self, index: u8) -> bool {
        self.0[(index / 8) as usize] & (1 << (index % 8)) != 0
    }

    pub fn accrue(&mut self, other: &Bloom) {
        for (a, b) in self.0.iter_mut().zip(other.0.iter()) {
            *a |= b;
        }
    }

    pub fn is_empty(&self) -> bool {
        self.0.iter().all(|b| *b == 0)
    }
}

impl fmt::Debug for Bloom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Bloom({})", hex::encode(self.0))
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Header {
    pub parent_hash: Hash256,
    /// Commitment to the encoded uncle header list.
    pub uncle_root: Hash256,
    pub state_root: Hash256,
    pub tx_root: Hash256,
    pub receipt_root: Hash256,
    pub bloom: Bloom,
    pub difficulty: U256,
    pub height: u64,
    pub gas_limit: u64,
    pub gas_used: u64,
    /// Simulation time in seconds.
    pub timestamp: u64,
    pub nonce: u64,
    pub mix_digest: Hash256,
}

impl Header {
    pub fn hash(&self) -> Hash256 {
        block_hash(self)
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Hash, PartialOrd, Ord)]
pub struct Transaction {
    pub sender: String,
    pub contract: String,
    pub payload: Vec<u8>,
    pub seq: u64,
    pub gas: u64,
}

impl Transaction {
    pub fn hash(&self) -> Hash256 {
        hash(&encode_transaction(self))
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Receipt {
    pub tx_hash: Hash256,
    pub success: bool,
    pub gas_used: u64,
    pub bloom_bits: Bloom,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Block {
    pub header: Header,
    pub transactions: Vec<Transaction>,
    pub uncles: Vec<Header>,
}

impl Block {
    pub fn hash(&self) -> Hash256 {
        block_hash(&self.header)
    }

    pub fn height(&self) -> u64 {
        self.header.height
    }

    pub fn parent_hash(&self) -> Hash256 {
        self.header.parent_hash
    }
}

/// Append-only writer for the canonical encoding.
#[derive(Default)]
pub struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.buf.push(v);
        self
    }

    pub fn u32(&mut self, v: u32) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn i64(&mut self, v: i64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn u256(&mut self, v: U256) -> &mut Self {
        self.buf.extend_from_slice(&v.to_big_endian());
        self
    }

    pub fn fixed(&mut self, bytes: &[u8]) -> &mut Self {
        self.buf.extend_from_slice(bytes);
        self
    }

    /// Length-prefixed byte string.
    pub fn bytes(&mut self, bytes: &[u8]) -> &mut Self {
        self.u32(bytes.len() as u32);
        self.buf.extend_from_slice(bytes);
        self
    }

    pub fn str(&mut self, s: &str) -> &mut Self {
        self.bytes(s.as_bytes())
    }

    pub fn finish(&mut self) -> Vec<u8> {
        std::mem::take(&mut self.buf)
    }
}

/// Cursor over an encoded buffer.
pub struct Decoder<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Decoder { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        let end = self.pos.checked_add(n).ok_or(DecodeError::Truncated)?;
        if end > self.buf.len() {
            return Err(DecodeError::Truncated);
        }
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8, DecodeError> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32, DecodeError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64, DecodeError> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn i64(&mut self) -> Result<i64, DecodeError> {
        Ok(i64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn u256(&mut self) -> Result<U256, DecodeError> {
        Ok(U256::from_big_endian(self.take(32)?))
    }

    pub fn fixed<const N: usize>(&mut self) -> Result<[u8; N], DecodeError> {
        Ok(self.take(N)?.try_into().unwrap())
    }

    pub fn hash(&mut self) -> Result<Hash256, DecodeError> {
        Ok(Hash256(self.take(32)?.try_into().unwrap()))
    }

    pub fn bytes(&mut self) -> Result<Vec<u8>, DecodeError> {
        let len = self.u32()? as usize;
        Ok(self.take(len)?.to_vec())
    }

    pub fn string(&mut self) -> Result<String, DecodeError> {
        String::from_utf8(self.bytes()?).map_err(|_| DecodeError::InvalidUtf8)
    }

    pub fn is_empty(&self) -> bool {
        self.pos == self.buf.len()
    }

    pub fn finish(self) -> Result<(), DecodeError> {
        if self.is_empty() {
            Ok(())
        } else {
            Err(DecodeError::TrailingBytes(self.buf.len() - self.pos))
        }
    }
}

pub fn write_header(enc: &mut Encoder, h: &Header) {
    enc.fixed(&h.parent_hash.0)
        .fixed(&h.uncle_root.0)
        .fixed(&h.state_root.0)
        .fixed(&h.tx_root.0)
        .fixed(&h.receipt_root.0)
        .fixed(&h.bloom.0)
        .u256(h.difficulty)
        .u64(h.height)
        .u64(h.gas_limit)
        .u64(h.gas_used)
        .u64(h.timestamp)
        .u64(h.nonce)
        .fixed(&h.mix_digest.0);
}

pub fn read_header(dec: &mut Decoder<'_>) -> Result<Header, DecodeError> {
    Ok(Header {
        parent_hash: dec.hash()?,
        uncle_root: dec.hash()?,
        state_root: dec.hash()?,
        tx_root: dec.hash()?,
        receipt_root: dec.hash()?,
        bloom: Bloom(dec.hash()?.0),
        difficulty: dec.u256()?,
        height: dec.u64()?,
        gas_limit: dec.u64()?,
        gas_used: dec.u64()?,
        timestamp: dec.u64()?,
        nonce: dec.u64()?,
        mix_digest: dec.hash()?,
    })
}

/// Fixed-width encoding of a header (296 bytes).
pub fn encode_header(h: &Header) -> Vec<u8> {
    let mut enc = Encoder::new();
    write_header(&mut enc, h);
    enc.finish()
}

pub fn decode_header(bytes: &[u8]) -> Result<Header, DecodeError> {
    let mut dec = Decoder::new(bytes);
    let h = read_header(&mut dec)?;
    dec.finish()?;
    Ok(h)
}

pub fn block_hash(h: &Header) -> Hash256 {
    hash(&encode_header(h))
}

/// Hash of the header with `nonce` and `mix_digest` zeroed: what a miner commits to.
pub fn seal_hash(h: &Header) -> Hash256 {
    let mut unsealed = h.clone();
    unsealed.nonce = 0;
    unsealed.mix_digest = Hash256::ZERO;
    block_hash(&unsealed)
}

pub fn write_transaction(enc: &mut Encoder, tx: &Transaction) {
    enc.str(&tx.sender)
        .str(&tx.contract)
        .bytes(&tx.payload)
        .u64(tx.seq)
        .u64(tx.gas);
}

pub fn read_transaction(dec: &mut Decoder<'_>) -> Result<Transaction, DecodeError> {
    Ok(Transaction {
        sender: dec.string()?,
        contract: dec.string()?,
        payload: dec.bytes()?,
        seq: dec.u64()?,
        gas: dec.u64()?,
    })
}

pub fn encode_transaction(tx: &Transaction) -> Vec<u8> {
    let mut enc = Encoder::new();
    write_transaction(&mut enc, tx);
    enc.finish()
}

pub fn encode_receipt(r: &Receipt) -> Vec<u8> {
    Encoder::new()
        .fixed(&r.tx_hash.0)
        .u8(r.success as u8)
        .u64(r.gas_used)
        .fixed(&r.bloom_bits.0)
        .finish()
}

/// `u32` count followed by each fixed-width header.
pub fn encode_uncles(uncles: &[Header]) -> Vec<u8> {
    let mut enc = Encoder::new();
    enc.u32(uncles.len() as u32);
    for u in uncles {
        write_header(&mut enc, u);
    }
    enc.finish()
}

pub fn uncle_root(uncles: &[Header]) -> Hash256 {
    hash(&encode_uncles(uncles))
}

pub fn tx_root(txs: &[Transaction]) -> Hash256 {
    merkle_root(txs.iter().map(encode_transaction))
}

pub fn receipt_root(receipts: &[Receipt]) -> Hash256 {
    merkle_root(receipts.iter().map(encode_receipt))
}

pub fn write_block(enc: &mut Encoder, b: &Block) {
    write_header(enc, &b.header);
    enc.u32(b.transactions.len() as u32);
    for tx in &b.transactions {
        write_transaction(enc, tx);
    }
    enc.u32(b.uncles.len() as u32);
    for u in &b.uncles {
        write_header(enc, u);
    }
}

pub fn read_block(dec: &mut Decoder<'_>) -> Result<Block, DecodeError> {
    let header = read_header(dec)?;
    let ntx = dec.u32()?;
    let transactions = (0..ntx)
        .map(|_| read_transaction(dec))
        .collect::<Result<_, _>>()?;
    let nunc = dec.u32()?;
    let uncles = (0..nunc)
        .map(|_| read_header(dec))
        .collect::<Result<_, _>>()?;
    Ok(Block {
        header,
        transactions,
        uncles,
    })
}

pub fn encode_block(b: &Block) -> Vec<u8> {
    let mut enc = Encoder::new();
    write_block(&mut enc, b);
    enc.finish()
}

pub fn decode_block(bytes: &[u8]) -> Result<Block, DecodeError> {
    let mut dec = Decoder::new(bytes);
    let b = read_block(&mut dec)?;
    dec.finish()?;
    Ok(b)
}
