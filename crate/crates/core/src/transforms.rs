//! Legacy schemes recast as cell arrays with the same leakage, so the
//! plaintext-guessing attacks can be run against them and against the rotated
//! store on equal terms.
//!
//! * deterministic encryption: one bucket per distinct plaintext at
//!   `prf(k, m, n)` (linear probing on collisions) with duplicates chained;
//! * deterministic order-preserving encryption: the bucket of a distinct
//!   plaintext is its rank among distinct plaintexts;
//! * frequency-hiding order-preserving encryption: one cell per occurrence in
//!   sorted order, ties in random order.
//!
//! Cells are probabilistically encrypted; what leaks is only the structure:
//! bucket positions, chain pointers and cell order.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::cipher::{prf, CellCipher, Ciphertext, SecretKey};
use crate::coins::CoinSource;
use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::store::format::{self, Header, Reader, MODE_DET, MODE_FHOPE, MODE_OPE};
use crate::store::StoreState;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainSlot {
    pub keyword: Ciphertext,
    pub row_id: Ciphertext,
    pub next: Option<usize>,
}

/// Shared shape of the deterministic and order-preserving transforms.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainedTable {
    pub slots: Vec<Option<ChainSlot>>,
}

pub type DetEseds = ChainedTable;
pub type OpeEseds = ChainedTable;

fn row_domain() -> Domain {
    Domain::new(u64::MAX).expect("non-zero")
}

/// Distinct plaintexts in ascending order, each with its row ids in input
/// order. Row ids are input positions.
fn group(values: &[u64]) -> BTreeMap<u64, Vec<u64>> {
    let mut groups: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
    for (id, &v) in values.iter().enumerate() {
        groups.entry(v).or_default().push(id as u64);
    }
    groups
}

impl ChainedTable {
    fn assemble(
        key: &SecretKey,
        domain: Domain,
        values: &[u64],
        heads: Vec<(u64, usize)>,
        groups: &BTreeMap<u64, Vec<u64>>,
    ) -> Result<Self> {
        let n = values.len();
        let cells = CellCipher::new(key, domain);
        let rows = CellCipher::new(key, row_domain());
        let mut taken = vec![false; n];
        for &(_, slot) in &heads {
            taken[slot] = true;
        }
        let mut free = (0..n).filter(|&s| !taken[s]);
        let mut slots: Vec<Option<ChainSlot>> = vec![None; n];
        for (v, head) in heads {
            let ids = &groups[&v];
            let mut positions = vec![head];
            for _ in 1..ids.len() {
                positions.push(free.next().expect("one slot per occurrence"));
            }
            for (h, (&pos, &id)) in positions.iter().zip(ids).enumerate() {
                slots[pos] = Some(ChainSlot {
                    keyword: cells.encrypt(v)?,
                    row_id: rows.encrypt(id)?,
                    next: positions.get(h + 1).copied(),
                });
            }
        }
        Ok(Self { slots })
    }

    /// Heads at `prf(k, m, n)`, probing forward past occupied buckets.
    pub fn build_det(key: &SecretKey, domain: Domain, values: &[u64]) -> Result<Self> {
        for &v in values {
            domain.check(v)?;
        }
        let n = values.len();
        let groups = group(values);
        let mut occupied = vec![false; n];
        let mut heads = Vec::with_capacity(groups.len());
        for &v in groups.keys() {
            let mut slot = prf(key, v, n as u64)? as usize;
            while occupied[slot] {
                slot = (slot + 1) % n;
            }
            occupied[slot] = true;
            heads.push((v, slot));
        }
        Self::assemble(key, domain, values, heads, &groups)
    }

    /// Head of the `i`-th smallest distinct plaintext at index `i`.
    pub fn build_ope(key: &SecretKey, domain: Domain, values: &[u64]) -> Result<Self> {
        for &v in values {
            domain.check(v)?;
        }
        let groups = group(values);
        let heads = groups.keys().enumerate().map(|(i, &v)| (v, i)).collect();
        Self::assemble(key, domain, values, heads, &groups)
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Slots nobody points to. Derived from the pointers alone.
    pub fn heads(&self) -> Vec<usize> {
        let mut pointed = vec![false; self.slots.len()];
        for s in self.slots.iter().flatten() {
            if let Some(nx) = s.next {
                pointed[nx] = true;
            }
        }
        (0..self.slots.len())
            .filter(|&i| self.slots[i].is_some() && !pointed[i])
            .collect()
    }

    /// Follows a chain from its head.
    pub fn chain(&self, head: usize) -> Vec<usize> {
        let mut out = vec![head];
        let mut cur = self.slots[head].as_ref().and_then(|s| s.next);
        while let Some(j) = cur {
            out.push(j);
            cur = self.slots[j].as_ref().and_then(|s| s.next);
        }
        out
    }

    /// Row ids stored under `keyword` in a deterministic-transform table.
    pub fn lookup_det(&self, key: &SecretKey, domain: Domain, keyword: u64) -> Result<Vec<u64>> {
        let n = self.slots.len();
        if n == 0 {
            return Ok(Vec::new());
        }
        let cells = CellCipher::new(key, domain);
        let mut is_head = vec![false; n];
        for h in self.heads() {
            is_head[h] = true;
        }
        let start = prf(key, keyword, n as u64)? as usize;
        for step in 0..n {
            let j = (start + step) % n;
            // heads were placed before any duplicate, so a probe sequence
            // ends at the first non-head
            if !is_head[j] {
                break;
            }
            let slot = self.slots[j].as_ref().expect("heads are occupied");
            if cells.decrypt(&slot.keyword)? == keyword {
                return self.rows_of(key, j);
            }
        }
        Ok(Vec::new())
    }

    fn rows_of(&self, key: &SecretKey, head: usize) -> Result<Vec<u64>> {
        let rows = CellCipher::new(key, row_domain());
        self.chain(head)
            .into_iter()
            .map(|j| rows.decrypt(&self.slots[j].as_ref().unwrap().row_id))
            .collect()
    }

    /// Plaintext of every occupied slot, in slot order.
    pub fn plaintexts(&self, key: &SecretKey, domain: Domain) -> Result<Vec<u64>> {
        let cells = CellCipher::new(key, domain);
        self.slots
            .iter()
            .flatten()
            .map(|s| cells.decrypt(&s.keyword))
            .collect()
    }

    fn save(&self, mode: u8, sink: &mut impl Write) -> Result<()> {
        Header {
            mode,
            domain_bits: 0,
            count: self.slots.len() as u64,
        }
        .write(sink)?;
        for slot in &self.slots {
            match slot {
                None => sink.write_all(&[0])?,
                Some(s) => {
                    sink.write_all(&[1])?;
                    format::write_ciphertext(sink, &s.keyword)?;
                    format::write_ciphertext(sink, &s.row_id)?;
                    let next = s.next.map_or(-1, |j| j as i64);
                    sink.write_all(&next.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    fn read_slots(r: &mut Reader<'_>, count: u64) -> Result<Self> {
        let mut slots = Vec::with_capacity(r.capacity_hint(count, 1));
        for _ in 0..count {
            match r.u8()? {
                0 => slots.push(None),
                1 => {
                    let keyword = r.ciphertext()?;
                    let row_id = r.ciphertext()?;
                    let next = match r.i64()? {
                        -1 => None,
                        j if j >= 0 && (j as u64) < count => Some(j as usize),
                        j => return Err(Error::Format(format!("bad chain pointer {j}"))),
                    };
                    slots.push(Some(ChainSlot {
                        keyword,
                        row_id,
                        next,
                    }));
                }
                f => return Err(Error::Format(format!("bad slot flag {f}"))),
            }
        }
        Ok(Self { slots })
    }
}

/// One cell per occurrence, sorted, ties in coin-flip order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FhopeEseds {
    pub cells: Vec<Ciphertext>,
}

impl FhopeEseds {
    pub fn build(
        key: &SecretKey,
        domain: Domain,
        values: &[u64],
        coins: &mut CoinSource,
    ) -> Result<Self> {
        Ok(Self::build_traced(key, domain, values, coins)?.0)
    }

    /// Also returns, per cell, the input position it came from.
    pub fn build_traced(
        key: &SecretKey,
        domain: Domain,
        values: &[u64],
        coins: &mut CoinSource,
    ) -> Result<(Self, Vec<usize>)> {
        let cipher = CellCipher::new(key, domain);
        let mut order: Vec<(u64, u64, usize)> = values
            .iter()
            .enumerate()
            .map(|(i, &v)| (v, rand::RngCore::next_u64(coins.rng()), i))
            .collect();
        order.sort_unstable();
        let cells = order
            .iter()
            .map(|&(v, _, _)| cipher.encrypt(v))
            .collect::<Result<Vec<_>>>()?;
        Ok((Self { cells }, order.into_iter().map(|t| t.2).collect()))
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn plaintexts(&self, key: &SecretKey, domain: Domain) -> Result<Vec<u64>> {
        let cipher = CellCipher::new(key, domain);
        self.cells.iter().map(|c| cipher.decrypt(c)).collect()
    }
}

/// A built legacy structure, for persistence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Transform {
    Det(DetEseds),
    Ope(OpeEseds),
    Fhope(FhopeEseds),
}

impl Transform {
    pub fn save(&self, sink: &mut impl Write) -> Result<()> {
        match self {
            Transform::Det(t) => t.save(MODE_DET, sink),
            Transform::Ope(t) => t.save(MODE_OPE, sink),
            Transform::Fhope(t) => {
                Header {
                    mode: MODE_FHOPE,
                    domain_bits: 0,
                    count: t.cells.len() as u64,
                }
                .write(sink)?;
                for c in &t.cells {
                    format::write_ciphertext(sink, c)?;
                }
                Ok(())
            }
        }
    }

    pub fn load(source: &mut impl Read) -> Result<Self> {
        let buf = format::read_all(source)?;
        Self::from_bytes(&buf)
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader::new(buf);
        let h = Header::read(&mut r)?;
        let t = match h.mode {
            MODE_DET => Transform::Det(ChainedTable::read_slots(&mut r, h.count)?),
            MODE_OPE => Transform::Ope(ChainedTable::read_slots(&mut r, h.count)?),
            MODE_FHOPE => {
                let mut cells = Vec::with_capacity(r.capacity_hint(h.count, 4 + Ciphertext::LEN));
                for _ in 0..h.count {
                    cells.push(r.ciphertext()?);
                }
                Transform::Fhope(FhopeEseds { cells })
            }
            m => return Err(Error::Format(format!("mode {m} is not a transform"))),
        };
        r.finish()?;
        Ok(t)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.save(&mut out).expect("writing to a Vec cannot fail");
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    Det,
    Ope,
    Fhope,
    Eseds,
}

/// What a snapshot adversary sees of one cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CellView {
    pub position: usize,
    /// Cells with the same class are known to hold equal plaintexts.
    pub class: usize,
    /// Rank of the class in the leaked order, if order leaks.
    pub order: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LeakageView {
    pub scheme: Scheme,
    pub cells: Vec<CellView>,
}

impl LeakageView {
    pub fn n(&self) -> usize {
        self.cells.len()
    }

    pub fn class_count(&self) -> usize {
        self.cells.iter().map(|c| c.class + 1).max().unwrap_or(0)
    }

    /// Occurrences per class, indexed by class id.
    pub fn class_sizes(&self) -> Vec<u64> {
        let mut sizes = vec![0u64; self.class_count()];
        for c in &self.cells {
            sizes[c.class] += 1;
        }
        sizes
    }

    /// Class ids sorted by leaked order; `None` if order does not leak.
    pub fn classes_in_order(&self) -> Option<Vec<usize>> {
        let mut ranked: Vec<(usize, usize)> = Vec::new();
        let mut seen = vec![false; self.class_count()];
        for c in &self.cells {
            let o = c.order?;
            if !seen[c.class] {
                seen[c.class] = true;
                ranked.push((o, c.class));
            }
        }
        ranked.sort_unstable();
        Some(ranked.into_iter().map(|x| x.1).collect())
    }

    fn unique_cells(scheme: Scheme, n: usize) -> Self {
        Self {
            scheme,
            cells: (0..n)
                .map(|i| CellView {
                    position: i,
                    class: i,
                    order: Some(i),
                })
                .collect(),
        }
    }

    fn chained(scheme: Scheme, t: &ChainedTable) -> Self {
        let mut cells = Vec::with_capacity(t.len());
        for (class, head) in t.heads().into_iter().enumerate() {
            for pos in t.chain(head) {
                cells.push(CellView {
                    position: pos,
                    class,
                    order: (scheme == Scheme::Ope).then_some(head),
                });
            }
        }
        cells.sort_by_key(|c| c.position);
        if scheme == Scheme::Ope {
            // heads occupy 0..d, so the head index is the order rank
            debug_assert!(cells.iter().all(|c| c.order.unwrap() < t.len()));
        }
        Self { scheme, cells }
    }
}

pub fn leakage_det(t: &DetEseds) -> LeakageView {
    LeakageView::chained(Scheme::Det, t)
}

pub fn leakage_ope(t: &OpeEseds) -> LeakageView {
    LeakageView::chained(Scheme::Ope, t)
}

pub fn leakage_fhope(t: &FhopeEseds) -> LeakageView {
    LeakageView::unique_cells(Scheme::Fhope, t.len())
}

/// The rotated store leaks nothing but its size.
pub fn leakage_eseds(s: &StoreState) -> LeakageView {
    LeakageView::unique_cells(Scheme::Eseds, s.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cipher::keygen;

    fn dom() -> Domain {
        Domain::new(64).unwrap()
    }

    #[test]
    fn det_chains_by_keyword() {
        let k = keygen(256).unwrap();
        let t = ChainedTable::build_det(&k, dom(), &[5, 5, 9]).unwrap();
        let heads = t.heads();
        assert_eq!(heads.len(), 2);
        let mut shapes: Vec<usize> = heads.iter().map(|&h| t.chain(h).len()).collect();
        shapes.sort();
        assert_eq!(shapes, vec![1, 2]);
        // heads at prf buckets, probing forward only on collision
        let b5 = prf(&k, 5, 3).unwrap() as usize;
        let b9 = prf(&k, 9, 3).unwrap() as usize;
        let h5 = *heads.iter().find(|&&h| t.chain(h).len() == 2).unwrap();
        let h9 = *heads.iter().find(|&&h| t.chain(h).len() == 1).unwrap();
        assert_eq!(h5, b5);
        assert_eq!(h9, if b9 == b5 { (b9 + 1) % 3 } else { b9 });
        assert_eq!(t.lookup_det(&k, dom(), 5).unwrap(), vec![0, 1]);
        assert_eq!(t.lookup_det(&k, dom(), 9).unwrap(), vec![2]);
        assert!(t.lookup_det(&k, dom(), 7).unwrap().is_empty());
    }

    #[test]
    fn det_singleton() {
        let k = keygen(128).unwrap();
        let t = ChainedTable::build_det(&k, dom(), &[7]).unwrap();
        assert_eq!(t.slots.len(), 1);
        assert_eq!(t.slots[0].as_ref().unwrap().next, None);
    }

    #[test]
    fn det_lookup_is_complete() {
        let k = keygen(256).unwrap();
        let values: Vec<u64> = (0..200).map(|i| (i * i + 3 * i) % 41).collect();
        let t = ChainedTable::build_det(&k, dom(), &values).unwrap();
        for kw in 0..64 {
            let mut want: Vec<u64> = values
                .iter()
                .enumerate()
                .filter(|(_, &v)| v == kw)
                .map(|(i, _)| i as u64)
                .collect();
            want.sort();
            let mut got = t.lookup_det(&k, dom(), kw).unwrap();
            got.sort();
            assert_eq!(got, want, "keyword {kw}");
        }
    }

    #[test]
    fn ope_orders_distinct_values() {
        let k = keygen(256).unwrap();
        let t = ChainedTable::build_ope(&k, dom(), &[9, 5, 5]).unwrap();
        let pts = t.plaintexts(&k, dom()).unwrap();
        assert_eq!(pts, vec![5, 9, 5]);
        assert_eq!(t.chain(0), vec![0, 2]);
        assert_eq!(t.chain(1), vec![1]);

        let t = ChainedTable::build_ope(&k, dom(), &[1, 2, 3]).unwrap();
        assert_eq!(t.plaintexts(&k, dom()).unwrap(), vec![1, 2, 3]);

        let t = ChainedTable::build_ope(&k, dom(), &[4, 4, 4]).unwrap();
        assert_eq!(t.heads(), vec![0]);
        assert_eq!(t.chain(0).len(), 3);
    }

    #[test]
    fn fhope_sorted_with_random_ties() {
        let k = keygen(256).unwrap();
        for seed in 0..20 {
            let t = FhopeEseds::build(&k, dom(), &[0, 1], &mut CoinSource::seeded(seed)).unwrap();
            assert_eq!(t.plaintexts(&k, dom()).unwrap(), vec![0, 1]);
        }
        let t = FhopeEseds::build(&k, dom(), &[2, 1, 2], &mut CoinSource::seeded(0)).unwrap();
        assert_eq!(t.plaintexts(&k, dom()).unwrap(), vec![1, 2, 2]);

        let mut orders = std::collections::HashSet::new();
        for seed in 0..50 {
            let (t, src) =
                FhopeEseds::build_traced(&k, dom(), &[3, 3], &mut CoinSource::seeded(seed)).unwrap();
            assert_eq!(t.plaintexts(&k, dom()).unwrap(), vec![3, 3]);
            orders.insert(src);
        }
        assert_eq!(orders.len(), 2);
    }

    #[test]
    fn views_leak_only_structure() {
        let k = keygen(256).unwrap();
        let det = ChainedTable::build_det(&k, dom(), &[5, 5, 9]).unwrap();
        let v = leakage_det(&det);
        let mut sizes = v.class_sizes();
        sizes.sort();
        assert_eq!(sizes, vec![1, 2]);
        assert!(v.classes_in_order().is_none());

        let ope = ChainedTable::build_ope(&k, dom(), &[9, 5, 5]).unwrap();
        let v = leakage_ope(&ope);
        assert_eq!(v.classes_in_order().unwrap(), vec![0, 1]);
        assert_eq!(v.class_sizes(), vec![2, 1]);

        let store_a = StoreState::dense();
        assert_eq!(leakage_eseds(&store_a).n(), 0);

        let f1 = FhopeEseds::build(&k, dom(), &[9, 1, 3], &mut CoinSource::seeded(0)).unwrap();
        let f2 = FhopeEseds::build(&k, dom(), &[3, 9, 1], &mut CoinSource::seeded(1)).unwrap();
        assert_eq!(leakage_fhope(&f1), leakage_fhope(&f2));
    }

    #[test]
    fn transform_files_round_trip() {
        let k = keygen(256).unwrap();
        let values: Vec<u64> = (0..1000).map(|i| (i * 7919) % 64).collect();
        let all = [
            Transform::Det(ChainedTable::build_det(&k, dom(), &values).unwrap()),
            Transform::Ope(ChainedTable::build_ope(&k, dom(), &values).unwrap()),
            Transform::Fhope(
                FhopeEseds::build(&k, dom(), &values, &mut CoinSource::seeded(2)).unwrap(),
            ),
        ];
        for (t, mode) in all.iter().zip([2u8, 3, 4]) {
            let bytes = t.to_bytes();
            assert_eq!(bytes[8], mode);
            assert_eq!(&Transform::from_bytes(&bytes).unwrap(), t);
            assert!(Transform::from_bytes(&bytes[..bytes.len() - 3]).is_err());
            assert!(StoreState::from_bytes(&bytes).is_err());
        }
    }
}
