//! Wall-clock benchmarks of range and top-k queries on an embedded store,
//! next to the same queries on a sorted plaintext array.
//!
//! Plaintexts are distinct and uniform. A range query of size `r` starts at a
//! uniformly chosen rank and ends `r - 1` ranks later, so every query returns
//! exactly `r` cells.

use std::collections::HashSet;
use std::hint::black_box;
use std::sync::Arc;
use std::time::Instant;

use eseds_core::cipher::SecretKey;
use eseds_core::client::Client;
use eseds_core::coins::CoinSource;
use eseds_core::domain::{Domain, RangeQuery};
use eseds_core::store::StoreMode;
use eseds_core::transport::{Server, Session};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{CliError, Result};
use crate::targets::seeded_key;

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub db_sizes: Vec<usize>,
    pub range_sizes: Vec<usize>,
    pub k_values: Vec<usize>,
    pub repeats: usize,
    pub warmup: usize,
    pub seed: u64,
    /// Queries timed together in one repetition.
    pub queries_per_rep: usize,
    pub domain_bits: u32,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            db_sizes: (1..=10).map(|i| i * 100_000).collect(),
            range_sizes: (1..=10).map(|i| i * 10).collect(),
            k_values: (1..=10).map(|i| i * 10).collect(),
            repeats: 30,
            warmup: 10,
            seed: 0,
            queries_per_rep: 20,
            domain_bits: 40,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.repeats <= self.warmup {
            return Err(CliError::Usage(format!(
                "repeats ({}) must exceed warmup ({})",
                self.repeats, self.warmup
            )));
        }
        if self.queries_per_rep == 0 || self.db_sizes.is_empty() {
            return Err(CliError::Usage("nothing to measure".into()));
        }
        let largest = *self.db_sizes.iter().max().unwrap();
        if (largest as u128) > (1u128 << self.domain_bits) {
            return Err(CliError::Usage(format!(
                "cannot draw {largest} distinct values from 2^{} ",
                self.domain_bits
            )));
        }
        if self.db_sizes.contains(&0) {
            return Err(CliError::Usage("database sizes must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QueryKind {
    Range,
    TopK,
}

impl QueryKind {
    pub fn name(self) -> &'static str {
        match self {
            QueryKind::Range => "range",
            QueryKind::TopK => "topk",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    pub mean: f64,
    /// Half-width of the 95% confidence interval of the mean.
    pub ci95: f64,
}

impl Summary {
    pub fn of(samples: &[f64]) -> Self {
        let m = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / m;
        if samples.len() < 2 {
            return Self { mean, ci95: 0.0 };
        }
        let sd = (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt();
        let t = StudentsT::new(0.0, 1.0, m - 1.0)
            .expect("positive degrees of freedom")
            .inverse_cdf(0.975);
        Self {
            mean,
            ci95: t * sd / m.sqrt(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct BenchRow {
    pub kind: QueryKind,
    pub n: usize,
    /// Range size or k.
    pub size: usize,
    /// Per query, in microseconds.
    pub encrypted: Summary,
    pub plaintext: Summary,
    /// Most `GET_CELL` requests spent locating the result of one query,
    /// excluding the cells returned.
    pub max_search_cells: u64,
    pub reps_kept: usize,
}

impl BenchRow {
    pub const HEADER: [&'static str; 9] = [
        "query",
        "n",
        "size",
        "mean_us",
        "ci95_us",
        "plain_mean_us",
        "plain_ci95_us",
        "max_search_cells",
        "reps",
    ];

    pub fn record(&self) -> [String; 9] {
        [
            self.kind.name().to_string(),
            self.n.to_string(),
            self.size.to_string(),
            format!("{:.3}", self.encrypted.mean),
            format!("{:.3}", self.encrypted.ci95),
            format!("{:.3}", self.plaintext.mean),
            format!("{:.3}", self.plaintext.ci95),
            self.max_search_cells.to_string(),
            self.reps_kept.to_string(),
        ]
    }
}

/// `n` distinct values drawn uniformly from the domain, sorted.
pub fn distinct_sorted(n: usize, domain: Domain, coins: &mut CoinSource) -> Vec<u64> {
    let mut seen = HashSet::with_capacity(n);
    while seen.len() < n {
        seen.insert(rand::Rng::gen_range(coins.rng(), 0..domain.size()));
    }
    let mut v: Vec<u64> = seen.into_iter().collect();
    v.sort_unstable();
    v
}

/// An embedded store over `sorted` plus a client and session for it.
pub struct Fixture {
    pub client: Client,
    pub server: Arc<Server>,
    pub session: Session,
    pub sorted: Vec<u64>,
}

impl Fixture {
    pub fn new(key: &SecretKey, domain: Domain, sorted: Vec<u64>, coins: &mut CoinSource) -> Result<Self> {
        let client = Client::new(key, domain, StoreMode::Dense);
        let store = client.bulk_dense(&sorted, coins)?;
        let server = Arc::new(Server::new(store, coins.fork()));
        Ok(Self {
            client,
            session: Session::in_process(Arc::clone(&server)),
            server,
            sorted,
        })
    }

    pub fn rank_query(&self, start: usize, size: usize) -> Result<RangeQuery> {
        let a = self.sorted[start];
        let b = self.sorted[start + size - 1];
        Ok(RangeQuery::new(a, b, self.client.domain())?)
    }
}

fn plain_range(sorted: &[u64], a: u64, b: u64) -> Vec<u64> {
    let lo = sorted.partition_point(|&x| x < a);
    let hi = sorted.partition_point(|&x| x <= b);
    sorted[lo..hi].to_vec()
}

fn time_per_query(queries: usize, mut f: impl FnMut(usize) -> Result<()>) -> Result<f64> {
    let t = Instant::now();
    for i in 0..queries {
        f(i)?;
    }
    Ok(t.elapsed().as_secs_f64() * 1e6 / queries as f64)
}

fn measure_range(fx: &mut Fixture, size: usize, cfg: &BenchConfig, coins: &mut CoinSource) -> Result<BenchRow> {
    let n = fx.sorted.len();
    let (mut enc, mut plain) = (Vec::new(), Vec::new());
    let mut max_cells = 0;
    for rep in 0..cfg.repeats {
        let starts: Vec<usize> = (0..cfg.queries_per_rep)
            .map(|_| coins.below(n - size + 1))
            .collect();
        let queries = starts
            .iter()
            .map(|&s| fx.rank_query(s, size))
            .collect::<Result<Vec<_>>>()?;
        let e = time_per_query(queries.len(), |i| {
            let before = fx.session.stats();
            let r = fx.client.search_range(&mut fx.session, queries[i])?;
            max_cells = max_cells.max(fx.session.stats().since(&before).cells_fetched);
            let rows = fx.client.fetch(&mut fx.session, &r)?;
            debug_assert_eq!(rows.len(), size);
            black_box(rows);
            Ok(())
        })?;
        let p = time_per_query(queries.len(), |i| {
            black_box(plain_range(&fx.sorted, queries[i].a, queries[i].b));
            Ok(())
        })?;
        if rep >= cfg.warmup {
            enc.push(e);
            plain.push(p);
        }
    }
    Ok(BenchRow {
        kind: QueryKind::Range,
        n,
        size,
        encrypted: Summary::of(&enc),
        plaintext: Summary::of(&plain),
        max_search_cells: max_cells,
        reps_kept: enc.len(),
    })
}

/// Repetitions are interleaved across `ks` so that a transient slowdown is
/// spread over all k instead of landing on one of them.
fn measure_topk(fx: &mut Fixture, ks: &[usize], cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    let mut enc = vec![Vec::new(); ks.len()];
    let mut plain = vec![Vec::new(); ks.len()];
    let mut max_cells = vec![0u64; ks.len()];
    for rep in 0..cfg.repeats {
        for (slot, &k) in ks.iter().enumerate() {
            let e = time_per_query(cfg.queries_per_rep, |_| {
                let before = fx.session.stats();
                let top = fx.client.top_k(&mut fx.session, k)?;
                let spent = fx.session.stats().since(&before).cells_fetched;
                max_cells[slot] = max_cells[slot].max(spent.saturating_sub(k as u64));
                black_box(top);
                Ok(())
            })?;
            let p = time_per_query(cfg.queries_per_rep, |_| {
                black_box(fx.sorted[..k].to_vec());
                Ok(())
            })?;
            if rep >= cfg.warmup {
                enc[slot].push(e);
                plain[slot].push(p);
            }
        }
    }
    Ok(ks
        .iter()
        .enumerate()
        .map(|(slot, &k)| BenchRow {
            kind: QueryKind::TopK,
            n: fx.sorted.len(),
            size: k,
            encrypted: Summary::of(&enc[slot]),
            plaintext: Summary::of(&plain[slot]),
            max_search_cells: max_cells[slot],
            reps_kept: enc[slot].len(),
        })
        .collect())
}

pub fn run(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    cfg.validate()?;
    let domain = Domain::with_bits(cfg.domain_bits)?;
    let mut coins = CoinSource::seeded(cfg.seed);
    let key = seeded_key(&mut coins);
    let largest = *cfg.db_sizes.iter().max().unwrap();
    let mut rows = Vec::new();
    for &n in &cfg.db_sizes {
        let sorted = distinct_sorted(n, domain, &mut coins);
        let mut fx = Fixture::new(&key, domain, sorted, &mut coins)?;
        for &r in cfg.range_sizes.iter().filter(|&&r| r >= 1 && r <= n) {
            rows.push(measure_range(&mut fx, r, cfg, &mut coins)?);
        }
        if n == largest {
            let ks: Vec<usize> = cfg.k_values.iter().copied().filter(|&k| k >= 1 && k <= n).collect();
            rows.extend(measure_topk(&mut fx, &ks, cfg)?);
        }
    }
    Ok(rows)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Least-squares line through `(x, y)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> LinearFit {
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    LinearFit {
        slope,
        intercept: my - slope * mx,
        r2,
    }
}

/// Mean range-query time at the largest `n` over the smallest, for one range
/// size.
pub fn growth_ratio(rows: &[BenchRow], range_size: usize) -> Option<f64> {
    let pick: Vec<&BenchRow> = rows
        .iter()
        .filter(|r| r.kind == QueryKind::Range && r.size == range_size)
        .collect();
    let lo = pick.iter().min_by_key(|r| r.n)?;
    let hi = pick.iter().max_by_key(|r| r.n)?;
    Some(hi.encrypted.mean / lo.encrypted.mean)
}

/// Linear fit of top-k time against k.
pub fn topk_fit(rows: &[BenchRow]) -> Option<LinearFit> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.kind == QueryKind::TopK)
        .map(|r| (r.size as f64, r.encrypted.mean))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    Some(linear_fit(&xs, &ys))
}
