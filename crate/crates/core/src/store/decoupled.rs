//! Decoupled insertion: cells carry an explicit index from a large sparse
//! domain `0..2^bits`, so a new cell can be written at the midpoint of its
//! neighbours without moving anything. A background pass later reassigns
//! equidistant indices and applies a fresh rotation.

use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::cipher::Ciphertext;
use crate::coins::CoinSource;
use crate::error::{Error, Result};

pub const MIN_INDEX_BITS: u16 = 8;
pub const MAX_INDEX_BITS: u16 = 256;

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SparseIndex(BigUint);

impl SparseIndex {
    pub fn new(v: impl Into<BigUint>) -> Self {
        Self(v.into())
    }

    pub fn value(&self) -> &BigUint {
        &self.0
    }

    /// Big-endian, left-padded to `width` bytes.
    pub fn to_be_bytes(&self, width: usize) -> Vec<u8> {
        let raw = self.0.to_bytes_be();
        let raw: &[u8] = if raw == [0] { &[] } else { &raw };
        assert!(raw.len() <= width, "sparse index wider than {width} bytes");
        let mut out = vec![0u8; width - raw.len()];
        out.extend_from_slice(raw);
        out
    }

    pub fn from_be_bytes(bytes: &[u8]) -> Self {
        Self(BigUint::from_bytes_be(bytes))
    }
}

impl fmt::Debug for SparseIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u64> for SparseIndex {
    fn from(v: u64) -> Self {
        Self(BigUint::from(v))
    }
}

/// Progress of one rebalancing pass. Entries are staged into a shadow copy
/// and swapped in when the pass completes, so readers never observe a
/// half-reindexed store.
#[derive(Clone, Debug)]
pub struct RebalanceCursor {
    pub next_position: usize,
    pub pending_rotation: usize,
    generation: u64,
    staged: Vec<(SparseIndex, Ciphertext)>,
}

impl RebalanceCursor {
    pub fn is_done(&self, store: &DecoupledStore) -> bool {
        self.generation == store.generation && self.next_position >= store.len()
    }
}

#[derive(Clone, Debug)]
pub struct DecoupledStore {
    bits: u16,
    entries: Vec<(SparseIndex, Ciphertext)>,
    generation: u64,
}

impl DecoupledStore {
    pub fn new(bits: u16) -> Result<Self> {
        if !(MIN_INDEX_BITS..=MAX_INDEX_BITS).contains(&bits) || !bits.is_multiple_of(8) {
            return Err(Error::InvalidArgument(format!(
                "sparse index bits must be a multiple of 8 in {MIN_INDEX_BITS}..={MAX_INDEX_BITS}, got {bits}"
            )));
        }
        Ok(Self {
            bits,
            entries: Vec::new(),
            generation: 0,
        })
    }

    /// Entries must be strictly increasing and inside the index domain.
    pub fn from_entries(bits: u16, entries: Vec<(SparseIndex, Ciphertext)>) -> Result<Self> {
        let mut s = Self::new(bits)?;
        let limit = s.domain_size();
        for w in entries.windows(2) {
            if w[0].0 >= w[1].0 {
                return Err(Error::Format("sparse indices not strictly increasing".into()));
            }
        }
        if entries.last().is_some_and(|e| e.0 .0 >= limit) {
            return Err(Error::Format("sparse index outside domain".into()));
        }
        s.entries = entries;
        Ok(s)
    }

    pub fn bits(&self) -> u16 {
        self.bits
    }

    /// `|D| = 2^bits`, also the exclusive upper sentinel.
    pub fn domain_size(&self) -> BigUint {
        BigUint::one() << self.bits as usize
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(SparseIndex, Ciphertext)] {
        &self.entries
    }

    /// Cell of rank `j`.
    pub fn get(&self, j: usize) -> Result<&Ciphertext> {
        self.entries
            .get(j)
            .map(|e| &e.1)
            .ok_or(Error::IndexOutOfRange {
                index: j as u64,
                len: self.entries.len() as u64,
            })
    }

    pub fn index_of(&self, j: usize) -> Result<&SparseIndex> {
        self.entries
            .get(j)
            .map(|e| &e.0)
            .ok_or(Error::IndexOutOfRange {
                index: j as u64,
                len: self.entries.len() as u64,
            })
    }

    /// Resolves a `(left, right)` neighbour pair to the rank the new cell
    /// takes. `None` is the sentinel at either end; `(None, None)` is only
    /// valid on an empty store.
    fn slot_for(&self, left: Option<usize>, right: Option<usize>) -> Result<usize> {
        let n = self.entries.len();
        let bad = || {
            Error::InvalidArgument(format!(
                "ranks {left:?}/{right:?} are not adjacent in a store of {n}"
            ))
        };
        match (left, right) {
            (None, None) if n == 0 => Ok(0),
            (None, Some(0)) if n > 0 => Ok(0),
            (Some(l), None) if n > 0 && l == n - 1 => Ok(n),
            (Some(l), Some(r)) if r == l + 1 && r < n => Ok(r),
            _ => Err(bad()),
        }
    }

    fn bounds(&self, slot: usize) -> (BigUint, BigUint) {
        let lower = if slot == 0 {
            BigUint::zero()
        } else {
            self.entries[slot - 1].0 .0.clone()
        };
        let upper = match self.entries.get(slot) {
            Some(e) => e.0 .0.clone(),
            None => self.domain_size(),
        };
        (lower, upper)
    }

    /// Writes `c` at the midpoint between its neighbours. Fails with
    /// [`Error::Collision`] when the neighbours are at most one apart.
    pub fn insert_between(
        &mut self,
        left: Option<usize>,
        right: Option<usize>,
        c: Ciphertext,
    ) -> Result<SparseIndex> {
        let slot = self.slot_for(left, right)?;
        self.insert_at_slot(slot, c)
    }

    fn insert_at_slot(&mut self, slot: usize, c: Ciphertext) -> Result<SparseIndex> {
        let (lower, upper) = self.bounds(slot);
        if upper <= &lower + 1u32 {
            return Err(Error::Collision);
        }
        let mid = (&upper - &lower) / 2u32 + &lower;
        let idx = SparseIndex(mid);
        self.entries.insert(slot, (idx.clone(), c));
        self.generation += 1;
        Ok(idx)
    }

    /// [`insert_between`](Self::insert_between), respacing the surrounding
    /// neighbourhood first when the gap is exhausted.
    pub fn insert_between_or_respace(
        &mut self,
        left: Option<usize>,
        right: Option<usize>,
        c: Ciphertext,
    ) -> Result<SparseIndex> {
        let slot = self.slot_for(left, right)?;
        match self.insert_at_slot(slot, c) {
            Err(Error::Collision) => {
                self.respace_around(slot)?;
                self.insert_at_slot(slot, c)
            }
            other => other,
        }
    }

    /// Spreads the entries of the smallest window around `slot` whose bounds
    /// leave at least twice the room needed, so the gap at `slot` opens up.
    /// Returns the respaced rank range.
    pub fn respace_around(&mut self, slot: usize) -> Result<(usize, usize)> {
        let n = self.entries.len();
        let mut lo = slot.saturating_sub(1);
        let mut hi = (slot + 1).min(n);
        loop {
            let lower = if lo == 0 {
                BigUint::zero()
            } else {
                self.entries[lo - 1].0 .0.clone()
            };
            let upper = match self.entries.get(hi) {
                Some(e) => e.0 .0.clone(),
                None => self.domain_size(),
            };
            let k = hi - lo;
            let span = &upper - &lower;
            if span >= BigUint::from(2 * (k as u64 + 2)) {
                let step = span / (k as u64 + 1);
                for (i, e) in self.entries[lo..hi].iter_mut().enumerate() {
                    e.0 = SparseIndex(&lower + &step * (i as u64 + 1));
                }
                self.generation += 1;
                log::debug!("respaced ranks {lo}..{hi} of {n}");
                return Ok((lo, hi));
            }
            if lo == 0 && hi == n {
                return Err(Error::IndexSpaceExhausted);
            }
            let width = (hi - lo).max(1);
            lo = lo.saturating_sub(width);
            hi = (hi + width).min(n);
        }
    }

    /// Starts a rebalancing pass with a fresh rotation offset.
    pub fn begin_rebalance(&self, coins: &mut CoinSource) -> RebalanceCursor {
        let n = self.entries.len();
        RebalanceCursor {
            next_position: 0,
            pending_rotation: if n == 0 { 0 } else { coins.below(n) },
            generation: self.generation,
            staged: Vec::with_capacity(n),
        }
    }

    /// Re-indexes up to `batch` entries. After the last batch, the entry with
    /// post-rotation rank `i` sits at `(i + 1) * floor(|D| / (n + 1))`.
    /// A store modified since the cursor was created restarts the pass.
    /// Returns whether the pass is complete.
    pub fn rebalance_step(&mut self, cursor: &mut RebalanceCursor, batch: usize) -> Result<bool> {
        let n = self.entries.len();
        if cursor.generation != self.generation {
            cursor.next_position = 0;
            cursor.staged.clear();
            cursor.pending_rotation = if n == 0 { 0 } else { cursor.pending_rotation % n };
            cursor.generation = self.generation;
        }
        if cursor.next_position >= n {
            return Ok(true);
        }
        let step = self.domain_size() / (n as u64 + 1);
        if step.is_zero() {
            return Err(Error::IndexSpaceExhausted);
        }
        let end = cursor.next_position.saturating_add(batch.max(1)).min(n);
        for i in cursor.next_position..end {
            let src = (i + cursor.pending_rotation) % n;
            let idx = SparseIndex(&step * (i as u64 + 1));
            cursor.staged.push((idx, self.entries[src].1));
        }
        cursor.next_position = end;
        if end == n {
            self.entries = std::mem::take(&mut cursor.staged);
            self.generation += 1;
            cursor.generation = self.generation;
            return Ok(true);
        }
        Ok(false)
    }

    /// Runs a complete pass.
    pub fn rebalance(&mut self, coins: &mut CoinSource) -> Result<usize> {
        let mut cursor = self.begin_rebalance(coins);
        let rotation = cursor.pending_rotation;
        while !self.rebalance_step(&mut cursor, usize::MAX)? {}
        Ok(rotation)
    }

    /// Largest minus smallest gap between consecutive indices.
    pub fn gap_spread(&self) -> Option<BigUint> {
        let gaps: Vec<BigUint> = self
            .entries
            .windows(2)
            .map(|w| &w[1].0 .0 - &w[0].0 .0)
            .collect();
        let max = gaps.iter().max()?;
        let min = gaps.iter().min()?;
        Some(max - min)
    }
}

impl PartialEq for DecoupledStore {
    fn eq(&self, other: &Self) -> bool {
        self.bits == other.bits && self.entries == other.entries
    }
}

impl Eq for DecoupledStore {}
