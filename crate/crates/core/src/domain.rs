use crate::error::{Error, Result};

/// Plaintext domain `0..size`, compared modulo `size`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Domain {
    size: u64,
}

impl Domain {
    pub fn new(size: u64) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidArgument("domain size must be at least 1".into()));
        }
        Ok(Self { size })
    }

    /// Domain of `2^bits` values, `bits` in `1..=63`.
    pub fn with_bits(bits: u32) -> Result<Self> {
        if !(1..=63).contains(&bits) {
            return Err(Error::InvalidArgument(format!(
                "domain bits must be in 1..=63, got {bits}"
            )));
        }
        Self::new(1u64 << bits)
    }

    pub fn size(&self) -> u64 {
        self.size
    }

    pub fn contains(&self, m: u64) -> bool {
        m < self.size
    }

    pub fn check(&self, m: u64) -> Result<()> {
        if self.contains(m) {
            Ok(())
        } else {
            Err(Error::OutOfDomain {
                value: m,
                size: self.size,
            })
        }
    }

    /// `(x - r) mod size`: the position of `x` when the domain is read
    /// starting at `r`.
    #[inline]
    pub fn offset(&self, x: u64, r: u64) -> u64 {
        ((x as u128 + self.size as u128 - r as u128) % self.size as u128) as u64
    }

    /// Whether `m` lies on the cyclic interval from `a` up to `b` (inclusive).
    /// With `a <= b` this is the plain interval.
    #[inline]
    pub fn in_cyclic_range(&self, m: u64, a: u64, b: u64) -> bool {
        self.offset(m, a) <= self.offset(b, a)
    }
}

/// `((x - r) mod N) < ((y - r) mod N)`.
#[inline]
pub fn mod_less(x: u64, y: u64, r: u64, dom: Domain) -> bool {
    dom.offset(x, r) < dom.offset(y, r)
}

/// Inclusive range `[a, b]`. `a > b` wraps through `N - 1` back to `0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RangeQuery {
    pub a: u64,
    pub b: u64,
}

impl RangeQuery {
    pub fn new(a: u64, b: u64, dom: Domain) -> Result<Self> {
        dom.check(a)?;
        dom.check(b)?;
        Ok(Self { a, b })
    }

    pub fn wraps(&self) -> bool {
        self.a > self.b
    }

    pub fn matches(&self, m: u64, dom: Domain) -> bool {
        dom.in_cyclic_range(m, self.a, self.b)
    }
}

/// Inclusive interval of cell indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Segment {
    pub lo: usize,
    pub hi: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.hi - self.lo + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Cells matched by a range search: zero, one or two disjoint segments in
/// ascending order. Two segments only occur when the match wraps past the last
/// cell, in which case the first one starts at index 0.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RangeResult {
    pub segments: Vec<Segment>,
}

impl RangeResult {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Cyclic run of `len` cells starting at `start` in an array of `n` cells.
    pub fn cyclic(start: usize, len: usize, n: usize) -> Self {
        if len == 0 {
            return Self::empty();
        }
        debug_assert!(start < n && len <= n);
        if len == n {
            return Self {
                segments: vec![Segment { lo: 0, hi: n - 1 }],
            };
        }
        let end = start + len - 1;
        if end < n {
            Self {
                segments: vec![Segment { lo: start, hi: end }],
            }
        } else {
            Self {
                segments: vec![
                    Segment {
                        lo: 0,
                        hi: end - n,
                    },
                    Segment { lo: start, hi: n - 1 },
                ],
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn len(&self) -> usize {
        self.segments.iter().map(Segment::len).sum()
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.segments.iter().flat_map(|s| s.lo..=s.hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mod_less_examples() {
        let d8 = Domain::new(8).unwrap();
        assert!(mod_less(6, 1, 5, d8));
        assert!(mod_less(3, 7, 0, d8));
        assert!(!mod_less(7, 3, 0, d8));
        for x in 0..8 {
            for r in 0..8 {
                assert!(!mod_less(x, x, r, d8));
            }
        }
    }

    #[test]
    fn mod_less_is_strict_total_order() {
        for size in 1..=32u64 {
            let d = Domain::new(size).unwrap();
            for r in 0..size {
                for x in 0..size {
                    for y in 0..size {
                        let xy = mod_less(x, y, r, d);
                        let yx = mod_less(y, x, r, d);
                        // antisymmetry and totality
                        assert!(!(xy && yx));
                        assert_eq!(x != y, xy || yx);
                        for z in 0..size {
                            if xy && mod_less(y, z, r, d) {
                                assert!(mod_less(x, z, r, d));
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn offset_handles_full_width() {
        let d = Domain::new(u64::MAX).unwrap();
        assert_eq!(d.offset(0, u64::MAX - 1), 1);
        assert_eq!(d.offset(u64::MAX - 1, 0), u64::MAX - 1);
    }

    #[test]
    fn cyclic_result_forms() {
        assert_eq!(RangeResult::cyclic(0, 0, 4), RangeResult::empty());
        assert_eq!(
            RangeResult::cyclic(1, 2, 4).segments,
            vec![Segment { lo: 1, hi: 2 }]
        );
        assert_eq!(
            RangeResult::cyclic(3, 2, 4).segments,
            vec![Segment { lo: 0, hi: 0 }, Segment { lo: 3, hi: 3 }]
        );
        assert_eq!(
            RangeResult::cyclic(2, 4, 4).segments,
            vec![Segment { lo: 0, hi: 3 }]
        );
        assert_eq!(RangeResult::cyclic(3, 2, 4).indices().collect::<Vec<_>>(), vec![0, 3]);
    }

    #[test]
    fn wrap_queries_match_both_ends() {
        let d = Domain::new(8).unwrap();
        let q = RangeQuery::new(6, 1, d).unwrap();
        assert!(q.wraps());
        let hits: Vec<u64> = (0..8).filter(|&m| q.matches(m, d)).collect();
        assert_eq!(hits, vec![0, 1, 6, 7]);
        assert!(RangeQuery::new(0, 8, d).is_err());
    }
}
