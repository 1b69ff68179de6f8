use crate::cipher::Ciphertext;
use crate::coins::CoinSource;
use crate::error::{Error, Result};

/// Array of cells addressed by logical index. The physical vector is read
/// starting at `start`, so a rotation only moves the offset.
#[derive(Clone, Debug, Default)]
pub struct DenseStore {
    cells: Vec<Ciphertext>,
    start: usize,
}

impl DenseStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Cells in logical order, then rotated left by `rotation`.
    pub fn from_cells(cells: Vec<Ciphertext>, rotation: usize) -> Self {
        let start = if cells.is_empty() { 0 } else { rotation % cells.len() };
        Self { cells, start }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    #[inline]
    fn physical(&self, j: usize) -> usize {
        let p = self.start + j;
        if p >= self.cells.len() {
            p - self.cells.len()
        } else {
            p
        }
    }

    pub fn get(&self, j: usize) -> Result<&Ciphertext> {
        if j >= self.cells.len() {
            return Err(Error::IndexOutOfRange {
                index: j as u64,
                len: self.cells.len() as u64,
            });
        }
        Ok(&self.cells[self.physical(j)])
    }

    /// Inserts `c` before logical index `l`, then rotates by a uniform offset
    /// in `0..n` (new `n`).
    pub fn insert_at(&mut self, l: usize, c: Ciphertext, coins: &mut CoinSource) -> Result<usize> {
        self.check_slot(l)?;
        let s = coins.below(self.cells.len() + 1);
        self.insert_rotated(l, c, s)?;
        Ok(s)
    }

    /// Insert followed by `C'[j] := C[j + s mod n]`.
    pub fn insert_rotated(&mut self, l: usize, c: Ciphertext, s: usize) -> Result<()> {
        self.check_slot(l)?;
        let n = self.cells.len();
        let q = self.start + l;
        if q > n {
            // Lands physically before the logical head, which shifts right.
            self.cells.insert(q - n, c);
            self.start += 1;
        } else {
            self.cells.insert(q, c);
        }
        self.start = (self.start + s) % self.cells.len();
        Ok(())
    }

    fn check_slot(&self, l: usize) -> Result<()> {
        if l > self.cells.len() {
            return Err(Error::IndexOutOfRange {
                index: l as u64,
                len: self.cells.len() as u64 + 1,
            });
        }
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = &Ciphertext> + '_ {
        self.cells[self.start..]
            .iter()
            .chain(self.cells[..self.start].iter())
    }

    /// Rewrites the physical vector in logical order.
    pub fn materialize(&mut self) {
        self.cells.rotate_left(self.start);
        self.start = 0;
    }
}

impl PartialEq for DenseStore {
    fn eq(&self, other: &Self) -> bool {
        self.len() == other.len() && self.iter().eq(other.iter())
    }
}

impl Eq for DenseStore {}
