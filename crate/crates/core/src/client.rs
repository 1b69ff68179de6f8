//! Client side of the interactive protocols.
//!
//! The server holds a rotation of the sorted sequence of ciphertexts. The
//! client decrypts cell 0 to learn a reference value `r`; reading plaintexts
//! relative to `r` (`(v - r) mod N`) then gives a non-decreasing sequence over
//! the whole array, which supports ordinary binary search. The one exception is
//! a run of equal values that wraps from the last cell back to cell 0: then
//! the run is located first and the search runs on the cells between its two
//! halves, relative to `r + 1`.

use std::collections::{HashMap, VecDeque};

use crate::cipher::{CellCipher, Ciphertext, SecretKey};
use crate::coins::CoinSource;
use crate::domain::{Domain, RangeQuery, RangeResult};
use crate::error::{Error, Result};
use crate::store::{DenseStore, StoreMode, StoreState};
use crate::transport::Session;

/// Decrypted cells fetched during one operation.
struct Probe<'a> {
    session: &'a mut Session,
    cipher: &'a CellCipher,
    seen: HashMap<usize, u64>,
}

impl<'a> Probe<'a> {
    fn new(session: &'a mut Session, cipher: &'a CellCipher) -> Self {
        Self {
            session,
            cipher,
            seen: HashMap::new(),
        }
    }

    fn value(&mut self, j: usize) -> Result<u64> {
        if let Some(&v) = self.seen.get(&j) {
            return Ok(v);
        }
        let c = self.session.get_cell(j)?;
        let v = self.cipher.decrypt(&c)?;
        self.seen.insert(j, v);
        Ok(v)
    }
}

/// How the rotated array lines up with the modular order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Layout {
    /// Offsets from `base` (the value of cell 0) never decrease.
    Sorted { base: u64 },
    /// Every cell holds `value`.
    Uniform { value: u64 },
    /// Cells `0..head` and `tail..n` hold `value`; offsets from `value + 1`
    /// never decrease over `head..tail`.
    Wrapped { value: u64, head: usize, tail: usize },
}

/// Visits `lo..hi` midpoint-first, so a long run of non-matching cells is
/// found after a few probes.
fn bisection_order(lo: usize, hi: usize) -> impl Iterator<Item = usize> {
    let mut queue = VecDeque::new();
    if lo < hi {
        queue.push_back((lo, hi));
    }
    std::iter::from_fn(move || {
        let (l, h) = queue.pop_front()?;
        let mid = l + (h - l) / 2;
        if l < mid {
            queue.push_back((l, mid));
        }
        if mid + 1 < h {
            queue.push_back((mid + 1, h));
        }
        Some(mid)
    })
}

/// Index-space search for the first `j` in `lo..hi` with `pred(j)`, assuming
/// `pred` is monotone (false then true). Returns `hi` if none.
fn partition_point(
    lo: usize,
    hi: usize,
    mut pred: impl FnMut(usize) -> Result<bool>,
) -> Result<usize> {
    let (mut l, mut u) = (lo, hi);
    while l < u {
        let j = l + (u - l) / 2;
        if pred(j)? {
            u = j;
        } else {
            l = j + 1;
        }
    }
    Ok(l)
}

pub struct Client {
    cipher: CellCipher,
    domain: Domain,
    mode: StoreMode,
}

impl Client {
    pub fn new(key: &SecretKey, domain: Domain, mode: StoreMode) -> Self {
        Self {
            cipher: CellCipher::new(key, domain),
            domain,
            mode,
        }
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn mode(&self) -> StoreMode {
        self.mode
    }

    pub fn cipher(&self) -> &CellCipher {
        &self.cipher
    }

    fn offset(&self, v: u64, base: u64) -> u64 {
        self.domain.offset(v, base)
    }

    fn layout(&self, p: &mut Probe<'_>, n: usize) -> Result<Layout> {
        debug_assert!(n > 0);
        let first = p.value(0)?;
        if n == 1 {
            return Ok(Layout::Sorted { base: first });
        }
        if p.value(n - 1)? != first {
            return Ok(Layout::Sorted { base: first });
        }
        // The run of `first` may wrap. Any other value sits strictly between
        // its two halves; without one the array is uniform.
        let mut other = None;
        for j in bisection_order(1, n - 1) {
            if p.value(j)? != first {
                other = Some(j);
                break;
            }
        }
        let Some(mid) = other else {
            return Ok(Layout::Uniform { value: first });
        };
        let head = partition_point(1, mid, |j| Ok(p.value(j)? != first))?;
        let tail = partition_point(mid + 1, n - 1, |j| Ok(p.value(j)? == first))?;
        Ok(Layout::Wrapped {
            value: first,
            head,
            tail,
        })
    }

    fn base_of(&self, value: u64) -> u64 {
        (value as u128 + 1).rem_euclid(self.domain.size() as u128) as u64
    }

    fn jmin_in(&self, p: &mut Probe<'_>, layout: Layout, n: usize, a: u64) -> Result<usize> {
        Ok(match layout {
            Layout::Uniform { .. } => 0,
            Layout::Sorted { base } => {
                let ka = self.offset(a, base);
                if ka == 0 {
                    0
                } else {
                    let j = partition_point(1, n, |j| Ok(self.offset(p.value(j)?, base) >= ka))?;
                    if j == n {
                        0
                    } else {
                        j
                    }
                }
            }
            Layout::Wrapped { value, head, tail } => {
                if a == value {
                    tail
                } else {
                    let base = self.base_of(value);
                    let ka = self.offset(a, base);
                    partition_point(head, tail, |j| Ok(self.offset(p.value(j)?, base) >= ka))?
                }
            }
        })
    }

    fn jmax_in(&self, p: &mut Probe<'_>, layout: Layout, n: usize, b: u64) -> Result<usize> {
        Ok(match layout {
            Layout::Uniform { .. } => n - 1,
            Layout::Sorted { base } => {
                let kb = self.offset(b, base);
                partition_point(1, n, |j| Ok(self.offset(p.value(j)?, base) > kb))? - 1
            }
            Layout::Wrapped { value, head, tail } => {
                if b == value {
                    head - 1
                } else {
                    let base = self.base_of(value);
                    let kb = self.offset(b, base);
                    partition_point(head, tail, |j| Ok(self.offset(p.value(j)?, base) > kb))? - 1
                }
            }
        })
    }

    /// First cell of the run of the smallest stored value at or cyclically
    /// after `a`.
    pub fn find_jmin(&self, session: &mut Session, a: u64) -> Result<usize> {
        self.domain.check(a)?;
        let n = session.length()?;
        if n == 0 {
            return Err(Error::EmptyStore);
        }
        let mut p = Probe::new(session, &self.cipher);
        let layout = self.layout(&mut p, n)?;
        self.jmin_in(&mut p, layout, n, a)
    }

    /// Last cell of the run of the largest stored value at or cyclically
    /// before `b`.
    pub fn find_jmax(&self, session: &mut Session, b: u64) -> Result<usize> {
        self.domain.check(b)?;
        let n = session.length()?;
        if n == 0 {
            return Err(Error::EmptyStore);
        }
        let mut p = Probe::new(session, &self.cipher);
        let layout = self.layout(&mut p, n)?;
        self.jmax_in(&mut p, layout, n, b)
    }

    /// Indices of exactly the cells whose plaintext lies in `q`.
    pub fn search_range(&self, session: &mut Session, q: RangeQuery) -> Result<RangeResult> {
        self.domain.check(q.a)?;
        self.domain.check(q.b)?;
        let n = session.length()?;
        if n == 0 {
            return Ok(RangeResult::empty());
        }
        let mut p = Probe::new(session, &self.cipher);
        let layout = self.layout(&mut p, n)?;
        if let Layout::Uniform { value } = layout {
            return Ok(if q.matches(value, self.domain) {
                RangeResult::cyclic(0, n, n)
            } else {
                RangeResult::empty()
            });
        }
        let lo = self.jmin_in(&mut p, layout, n, q.a)?;
        let hi = self.jmax_in(&mut p, layout, n, q.b)?;
        // Nothing in range: the nearest value above `a` is already past `b`.
        if !q.matches(p.value(lo)?, self.domain) {
            return Ok(RangeResult::empty());
        }
        let len = (hi + n - lo) % n + 1;
        Ok(RangeResult::cyclic(lo, len, n))
    }

    /// Index of the first cell holding the smallest plaintext.
    pub fn find_rotation(&self, session: &mut Session) -> Result<usize> {
        self.find_jmin(session, 0)
    }

    /// The `k` smallest plaintexts in ascending order.
    pub fn top_k(&self, session: &mut Session, k: usize) -> Result<Vec<u64>> {
        let n = session.length()?;
        if k > n {
            return Err(Error::TooFewCells { k, len: n });
        }
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        let mut p = Probe::new(session, &self.cipher);
        let layout = self.layout(&mut p, n)?;
        let start = self.jmin_in(&mut p, layout, n, 0)?;
        (0..k).map(|i| p.value((start + i) % n)).collect()
    }

    /// Decrypts the cells named by a search result.
    pub fn fetch(&self, session: &mut Session, result: &RangeResult) -> Result<Vec<(usize, u64)>> {
        result
            .indices()
            .map(|j| Ok((j, self.cipher.decrypt(&session.get_cell(j)?)?)))
            .collect()
    }

    /// Slot (insert-before index) for `m` in an array of `n >= 1` cells.
    fn slot_for(
        &self,
        p: &mut Probe<'_>,
        n: usize,
        m: u64,
        coins: &mut CoinSource,
    ) -> Result<usize> {
        let layout = self.layout(p, n)?;
        let (base, mut l, mut u) = match layout {
            Layout::Uniform { value } => {
                // slot n is slot 0 up to rotation
                return Ok(if m == value { coins.below(n) } else { n });
            }
            Layout::Wrapped { value, head, tail } => {
                if m == value {
                    let i = coins.below(head + 1 + n - tail);
                    return Ok(if i <= head { i } else { tail + i - head - 1 });
                }
                (self.base_of(value), head, tail)
            }
            Layout::Sorted { base } => {
                if m == base {
                    // the run of `m` starts at cell 0 and ends before n - 1
                    (base, 0, n - 1)
                } else {
                    (base, 1, n)
                }
            }
        };
        let km = self.offset(m, base);
        while l < u {
            let j = l + (u - l) / 2;
            let kj = self.offset(p.value(j)?, base);
            if kj < km || (kj == km && coins.flip()) {
                l = j + 1;
            } else {
                u = j;
            }
        }
        Ok(l)
    }

    /// Runs the insertion protocol for `m`. Returns the new cell count.
    pub fn insert(&self, session: &mut Session, m: u64, coins: &mut CoinSource) -> Result<usize> {
        let c = self.cipher.encrypt(m)?;
        let n = session.length()?;
        let slot = if n == 0 {
            0
        } else {
            let mut p = Probe::new(session, &self.cipher);
            self.slot_for(&mut p, n, m, coins)?
        };
        self.send(session, n, slot, &c)?;
        Ok(n + 1)
    }

    fn send(&self, session: &mut Session, n: usize, slot: usize, c: &Ciphertext) -> Result<()> {
        match self.mode {
            StoreMode::Dense => session.insert_at(slot, c),
            StoreMode::Decoupled => {
                let left = slot.checked_sub(1);
                let right = (slot < n).then_some(slot);
                session.insert_between(left, right, c).map(|_| ())
            }
        }
    }

    /// Builds the dense store that inserting `values` one by one would yield,
    /// without the interaction: sorted cells under a uniform rotation.
    pub fn bulk_dense(&self, values: &[u64], coins: &mut CoinSource) -> Result<StoreState> {
        let mut sorted = values.to_vec();
        sorted.sort_unstable();
        let cells = sorted
            .iter()
            .map(|&m| self.cipher.encrypt(m))
            .collect::<Result<Vec<_>>>()?;
        let rotation = if cells.is_empty() { 0 } else { coins.below(cells.len()) };
        Ok(StoreState::Dense(DenseStore::from_cells(cells, rotation)))
    }

    /// Plaintexts of every cell in index order. Test and tooling helper; a
    /// real client would not read the whole store.
    pub fn decrypt_all(&self, store: &StoreState) -> Result<Vec<u64>> {
        (0..store.len())
            .map(|j| self.cipher.decrypt(store.get_cell(j)?))
            .collect()
    }
}
