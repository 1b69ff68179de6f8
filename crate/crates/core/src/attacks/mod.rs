//! Plaintext-guessing attacks on leakage views, given the adversary's
//! background knowledge of the plaintext distribution. All attacks are
//! deterministic: ties are broken by class id and then plaintext value.

mod assignment;

use std::collections::BTreeMap;

pub use assignment::{assignment_cost, min_cost_assignment};

use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::transforms::LeakageView;

/// Occurrence counts keyed by plaintext value or by ciphertext class id.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Histogram {
    counts: BTreeMap<u64, u64>,
    total: u64,
}

impl Histogram {
    pub fn of(values: impl IntoIterator<Item = u64>) -> Self {
        let mut h = Self::default();
        for v in values {
            *h.counts.entry(v).or_default() += 1;
            h.total += 1;
        }
        h
    }

    /// Class sizes of a leakage view, keyed by class id.
    pub fn of_classes(view: &LeakageView) -> Self {
        Self::of(view.cells.iter().map(|c| c.class as u64))
    }

    pub fn get(&self, key: u64) -> u64 {
        self.counts.get(&key).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Number of keys with a non-zero count.
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.counts.iter().map(|(&k, &c)| (k, c))
    }

    pub fn max_count(&self) -> u64 {
        self.counts.values().copied().max().unwrap_or(0)
    }

    /// Keys by count descending, then key ascending.
    fn by_frequency(&self) -> Vec<(u64, u64)> {
        let mut v: Vec<(u64, u64)> = self.iter().collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        v
    }
}

/// Cumulative counts along an ordered key sequence. Values are integers over
/// a common denominator `total`, so comparisons are exact.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cdf {
    keys: Vec<u64>,
    cumulative: Vec<u64>,
    total: u64,
}

impl Cdf {
    pub fn along(hist: &Histogram, keys: impl IntoIterator<Item = u64>) -> Self {
        let keys: Vec<u64> = keys.into_iter().collect();
        let mut acc = 0;
        let cumulative = keys
            .iter()
            .map(|&k| {
                acc += hist.get(k);
                acc
            })
            .collect();
        Self {
            keys,
            cumulative,
            total: hist.total(),
        }
    }

    /// Over every value of the domain, in order.
    pub fn over_domain(hist: &Histogram, domain: Domain) -> Self {
        Self::along(hist, 0..domain.size())
    }

    /// Over ciphertext classes in leaked order. `None` if order does not leak.
    pub fn of_view(view: &LeakageView) -> Option<Self> {
        let order = view.classes_in_order()?;
        Some(Self::along(
            &Histogram::of_classes(view),
            order.into_iter().map(|c| c as u64),
        ))
    }

    pub fn keys(&self) -> &[u64] {
        &self.keys
    }

    pub fn cumulative(&self) -> &[u64] {
        &self.cumulative
    }

    pub fn total(&self) -> u64 {
        self.total
    }
}

/// A plaintext guess per ciphertext class.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AttackMapping {
    pub guesses: BTreeMap<usize, u64>,
}

impl AttackMapping {
    pub fn guess(&self, class: usize) -> Option<u64> {
        self.guesses.get(&class).copied()
    }

    /// One guess per cell, in position order. Unmapped classes guess `None`.
    pub fn per_cell(&self, view: &LeakageView) -> Vec<Option<u64>> {
        let mut cells = view.cells.clone();
        cells.sort_by_key(|c| c.position);
        cells.iter().map(|c| self.guess(c.class)).collect()
    }
}

fn norm_cost(d: i128, p: u32) -> i128 {
    d.abs().pow(p)
}

fn check_norm(p: u32) -> Result<()> {
    if p == 1 || p == 2 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("norm order {p} (expected 1 or 2)")))
    }
}

/// Aligns classes and known plaintexts, both sorted by frequency.
pub fn frequency_analysis(c_hist: &Histogram, m_hist: &Histogram) -> Result<AttackMapping> {
    if c_hist.total() != m_hist.total() {
        return Err(Error::TotalMismatch {
            left: c_hist.total(),
            right: m_hist.total(),
        });
    }
    let m = m_hist.by_frequency();
    let mut out = AttackMapping::default();
    for (i, (class, _)) in c_hist.by_frequency().into_iter().enumerate() {
        // more classes than known values: reuse the rarest known value
        if let Some(&(v, _)) = m.get(i).or(m.last()) {
            out.guesses.insert(class as usize, v);
        }
    }
    Ok(out)
}

/// Permutation minimising the l_p distance between class counts and known
/// plaintext counts. The shorter side is padded with zero counts.
pub fn lp_optimization(c_hist: &Histogram, m_hist: &Histogram, p: u32) -> Result<AttackMapping> {
    check_norm(p)?;
    let c = c_hist.by_frequency();
    let m = m_hist.by_frequency();
    let k = c.len().max(m.len());
    let count = |v: &[(u64, u64)], i: usize| v.get(i).map_or(0, |x| x.1) as i128;
    // The diagonal is the frequency alignment; an off-diagonal penalty
    // smaller than any unit of real cost makes it the preferred optimum.
    let scale = k as i128 + 1;
    let cost: Vec<Vec<i128>> = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| {
                    norm_cost(count(&c, i) - count(&m, j), p) * scale + i128::from(i != j)
                })
                .collect()
        })
        .collect();
    let assigned = min_cost_assignment(&cost);
    let mut out = AttackMapping::default();
    for (i, &(class, _)) in c.iter().enumerate() {
        // a class matched to padding still gets a guess: the most frequent value
        if let Some(&(v, _)) = m.get(assigned[i]).or(m.first()) {
            out.guesses.insert(class as usize, v);
        }
    }
    Ok(out)
}

/// The i-th class in leaked order is the i-th domain value. Needs every
/// domain value present.
pub fn sorting_attack(classes_in_order: &[usize], domain: Domain) -> Result<AttackMapping> {
    if classes_in_order.len() as u64 != domain.size() {
        return Err(Error::NotDense {
            classes: classes_in_order.len(),
            domain: domain.size(),
        });
    }
    Ok(AttackMapping {
        guesses: classes_in_order
            .iter()
            .enumerate()
            .map(|(i, &c)| (c, i as u64))
            .collect(),
    })
}

/// Assignment of ordered classes to domain values minimising
/// `|Δhist|^p + |Δcdf|^p` summed over classes.
pub fn cumulative_attack(
    c_hist: &Histogram,
    c_cdf: &Cdf,
    m_hist: &Histogram,
    m_cdf: &Cdf,
    p: u32,
) -> Result<AttackMapping> {
    check_norm(p)?;
    if c_hist.total() != m_hist.total() {
        return Err(Error::TotalMismatch {
            left: c_hist.total(),
            right: m_hist.total(),
        });
    }
    let rows = c_cdf.keys().len();
    let cols = m_cdf.keys().len();
    if rows > cols {
        return Err(Error::InvalidArgument(format!(
            "{rows} ciphertext classes but only {cols} candidate values"
        )));
    }
    let cost: Vec<Vec<i128>> = (0..rows)
        .map(|i| {
            let hc = c_hist.get(c_cdf.keys()[i]) as i128;
            let cc = c_cdf.cumulative()[i] as i128;
            (0..cols)
                .map(|j| {
                    let hm = m_hist.get(m_cdf.keys()[j]) as i128;
                    let cm = m_cdf.cumulative()[j] as i128;
                    norm_cost(hc - hm, p) + norm_cost(cc - cm, p)
                })
                .collect()
        })
        .collect();
    let assigned = min_cost_assignment(&cost);
    Ok(AttackMapping {
        guesses: (0..rows)
            .map(|i| (c_cdf.keys()[i] as usize, m_cdf.keys()[assigned[i]]))
            .collect(),
    })
}

/// Position `i` of a sorted structure is the `i`-th smallest known
/// plaintext. Classes are positions.
pub fn bucketing_attack(n: usize, known: &[u64]) -> Result<AttackMapping> {
    if known.len() != n {
        return Err(Error::SizeMismatch {
            left: n,
            right: known.len(),
        });
    }
    let mut sorted = known.to_vec();
    sorted.sort_unstable();
    Ok(AttackMapping {
        guesses: sorted.into_iter().enumerate().collect(),
    })
}

/// Fraction of cells guessed exactly.
pub fn score(guesses: &[Option<u64>], truth: &[u64]) -> Result<f64> {
    if guesses.len() != truth.len() {
        return Err(Error::SizeMismatch {
            left: guesses.len(),
            right: truth.len(),
        });
    }
    if truth.is_empty() {
        return Ok(1.0);
    }
    let hits = guesses
        .iter()
        .zip(truth)
        .filter(|(g, t)| **g == Some(**t))
        .count();
    Ok(hits as f64 / truth.len() as f64)
}

/// `max_m #(m) / n`: accuracy of always guessing the most frequent value.
pub fn frequency_baseline(multiset: &[u64]) -> f64 {
    if multiset.is_empty() {
        return 0.0;
    }
    Histogram::of(multiset.iter().copied()).max_count() as f64 / multiset.len() as f64
}
