//! Server-side cell storage.
//!
//! A [`StoreState`] is either dense (cells at implicit indices `0..n`, rotated
//! on every insert) or decoupled (cells at explicit sparse indices, inserted at
//! neighbour midpoints and periodically rebalanced). Both expose cells by
//! logical rank through [`StoreState::get_cell`]. No key material is held here.

mod decoupled;
mod dense;
pub mod format;

use std::io::{Read, Write};

pub use decoupled::{DecoupledStore, RebalanceCursor, SparseIndex, MAX_INDEX_BITS, MIN_INDEX_BITS};
pub use dense::DenseStore;

use crate::cipher::Ciphertext;
use crate::coins::CoinSource;
use crate::error::{Error, Result};
use format::{Header, Reader, MODE_DECOUPLED, MODE_DENSE};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StoreMode {
    Dense,
    Decoupled,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StoreState {
    Dense(DenseStore),
    Decoupled(DecoupledStore),
}

impl Default for StoreState {
    fn default() -> Self {
        StoreState::Dense(DenseStore::new())
    }
}

impl StoreState {
    pub fn dense() -> Self {
        Self::default()
    }

    pub fn decoupled(bits: u16) -> Result<Self> {
        Ok(StoreState::Decoupled(DecoupledStore::new(bits)?))
    }

    pub fn mode(&self) -> StoreMode {
        match self {
            StoreState::Dense(_) => StoreMode::Dense,
            StoreState::Decoupled(_) => StoreMode::Decoupled,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            StoreState::Dense(s) => s.len(),
            StoreState::Decoupled(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get_cell(&self, j: usize) -> Result<&Ciphertext> {
        match self {
            StoreState::Dense(s) => s.get(j),
            StoreState::Decoupled(s) => s.get(j),
        }
    }

    /// Dense only: shift-insert at `l`, then rotate by a uniform offset.
    /// Returns the offset applied.
    pub fn insert_at(&mut self, l: usize, c: Ciphertext, coins: &mut CoinSource) -> Result<usize> {
        match self {
            StoreState::Dense(s) => s.insert_at(l, c, coins),
            _ => Err(Error::WrongMode { expected: "dense" }),
        }
    }

    pub fn insert_between(
        &mut self,
        left: Option<usize>,
        right: Option<usize>,
        c: Ciphertext,
    ) -> Result<SparseIndex> {
        match self {
            StoreState::Decoupled(s) => s.insert_between(left, right, c),
            _ => Err(Error::WrongMode {
                expected: "decoupled",
            }),
        }
    }

    pub fn as_dense(&self) -> Option<&DenseStore> {
        match self {
            StoreState::Dense(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_decoupled(&self) -> Option<&DecoupledStore> {
        match self {
            StoreState::Decoupled(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_decoupled_mut(&mut self) -> Option<&mut DecoupledStore> {
        match self {
            StoreState::Decoupled(s) => Some(s),
            _ => None,
        }
    }

    pub fn cells(&self) -> Vec<Ciphertext> {
        (0..self.len()).map(|j| *self.get_cell(j).unwrap()).collect()
    }

    pub fn save(&self, sink: &mut impl Write) -> Result<()> {
        match self {
            StoreState::Dense(s) => {
                Header {
                    mode: MODE_DENSE,
                    domain_bits: 0,
                    count: s.len() as u64,
                }
                .write(sink)?;
                for c in s.iter() {
                    format::write_ciphertext(sink, c)?;
                }
            }
            StoreState::Decoupled(s) => {
                Header {
                    mode: MODE_DECOUPLED,
                    domain_bits: s.bits(),
                    count: s.len() as u64,
                }
                .write(sink)?;
                let width = s.bits() as usize / 8;
                for (idx, c) in s.entries() {
                    sink.write_all(&idx.to_be_bytes(width))?;
                    format::write_ciphertext(sink, c)?;
                }
            }
        }
        Ok(())
    }

    pub fn load(source: &mut impl Read) -> Result<Self> {
        let buf = format::read_all(source)?;
        Self::from_bytes(&buf)
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader::new(buf);
        let h = Header::read(&mut r)?;
        let record = 4 + Ciphertext::LEN;
        let state = match h.mode {
            MODE_DENSE => {
                let mut cells = Vec::with_capacity(r.capacity_hint(h.count, record));
                for _ in 0..h.count {
                    cells.push(r.ciphertext()?);
                }
                StoreState::Dense(DenseStore::from_cells(cells, 0))
            }
            MODE_DECOUPLED => {
                if h.domain_bits % 8 != 0
                    || !(MIN_INDEX_BITS..=MAX_INDEX_BITS).contains(&h.domain_bits)
                {
                    return Err(Error::Format(format!("bad index width {}", h.domain_bits)));
                }
                let width = h.domain_bits as usize / 8;
                let mut entries = Vec::with_capacity(r.capacity_hint(h.count, width + record));
                for _ in 0..h.count {
                    let idx = SparseIndex::from_be_bytes(r.take(width)?);
                    entries.push((idx, r.ciphertext()?));
                }
                StoreState::Decoupled(DecoupledStore::from_entries(h.domain_bits, entries)?)
            }
            other => return Err(Error::Format(format!("mode {other} is not a store"))),
        };
        r.finish()?;
        Ok(state)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.save(&mut out).expect("writing to a Vec cannot fail");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cipher::{encrypt, keygen};
    use crate::domain::Domain;

    fn cts(n: usize) -> Vec<Ciphertext> {
        let k = keygen(128).unwrap();
        let d = Domain::new(1 << 20).unwrap();
        (0..n).map(|i| encrypt(&k, d, i as u64).unwrap()).collect()
    }

    #[test]
    fn length_tracks_inserts() {
        let mut s = StoreState::dense();
        assert_eq!(s.len(), 0);
        let mut coins = CoinSource::seeded(0);
        for (i, c) in cts(5).into_iter().enumerate() {
            s.insert_at(0, c, &mut coins).unwrap();
            assert_eq!(s.len(), i + 1);
        }
    }

    #[test]
    fn wrong_mode_is_rejected() {
        let c = cts(1)[0];
        let mut d = StoreState::dense();
        assert!(matches!(
            d.insert_between(None, None, c),
            Err(Error::WrongMode { .. })
        ));
        let mut s = StoreState::decoupled(32).unwrap();
        assert!(matches!(
            s.insert_at(0, c, &mut CoinSource::seeded(0)),
            Err(Error::WrongMode { .. })
        ));
    }

    #[test]
    fn round_trip_empty_and_large() {
        for s in [StoreState::dense(), StoreState::decoupled(256).unwrap()] {
            assert_eq!(StoreState::from_bytes(&s.to_bytes()).unwrap(), s);
        }
        let mut coins = CoinSource::seeded(1);
        let mut dense = StoreState::dense();
        let mut dec = StoreState::decoupled(64).unwrap();
        for (i, c) in cts(1000).into_iter().enumerate() {
            let l = coins.below(i + 1);
            dense.insert_at(l, c, &mut coins).unwrap();
            let d = dec.as_decoupled_mut().unwrap();
            let (left, right) = (l.checked_sub(1), (l < i).then_some(l));
            d.insert_between_or_respace(left, right, c).unwrap();
        }
        assert_eq!(StoreState::from_bytes(&dense.to_bytes()).unwrap(), dense);
        assert_eq!(StoreState::from_bytes(&dec.to_bytes()).unwrap(), dec);
    }

    #[test]
    fn header_layout() {
        let bytes = StoreState::decoupled(16).unwrap().to_bytes();
        assert_eq!(&bytes[..6], b"ESEDS\0");
        assert_eq!(&bytes[6..8], &[1, 0]);
        assert_eq!(bytes[8], 1);
        assert_eq!(&bytes[9..11], &[16, 0]);
        assert_eq!(&bytes[11..19], &[0; 8]);
        assert_eq!(bytes.len(), 19);
    }

    #[test]
    fn corrupt_files_rejected() {
        let mut s = StoreState::dense();
        let mut coins = CoinSource::seeded(2);
        for c in cts(3) {
            s.insert_at(0, c, &mut coins).unwrap();
        }
        let good = s.to_bytes();

        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(StoreState::from_bytes(&bad), Err(Error::Format(_))));

        let mut bad = good.clone();
        bad[6] = 2;
        assert!(matches!(StoreState::from_bytes(&bad), Err(Error::Format(_))));

        assert!(StoreState::from_bytes(&good[..good.len() - 1]).is_err());

        let mut bad = good.clone();
        bad.push(0);
        assert!(StoreState::from_bytes(&bad).is_err());

        let mut bad = good.clone();
        bad[11..19].copy_from_slice(&u64::MAX.to_le_bytes());
        assert!(StoreState::from_bytes(&bad).is_err());
    }
}
