//! Shared fixtures for the criterion benches.

use std::collections::HashSet;
use std::sync::Arc;

use rand::Rng;

use eseds_core::{Client, CoinSource, Domain, RangeQuery, Result, SecretKey, Server, Session, StoreMode};

pub const DOMAIN_BITS: u32 = 40;

/// A dense store over `n` distinct uniform plaintexts, served in-process.
pub struct Fixture {
    pub client: Client,
    pub server: Arc<Server>,
    pub session: Session,
    pub sorted: Vec<u64>,
}

impl Fixture {
    pub fn new(n: usize, seed: u64) -> Result<Self> {
        let mut coins = CoinSource::seeded(seed);
        let domain = Domain::with_bits(DOMAIN_BITS)?;
        let key = SecretKey::from_bytes(&[7u8; 16])?;
        let sorted = distinct_sorted(n, domain, &mut coins);
        let client = Client::new(&key, domain, StoreMode::Dense);
        let store = client.bulk_dense(&sorted, &mut coins)?;
        let server = Arc::new(Server::new(store, coins.fork()));
        Ok(Self {
            client,
            session: Session::in_process(Arc::clone(&server)),
            server,
            sorted,
        })
    }

    /// The range covering `size` consecutive plaintexts from rank `start`.
    pub fn rank_query(&self, start: usize, size: usize) -> Result<RangeQuery> {
        RangeQuery::new(self.sorted[start], self.sorted[start + size - 1], self.client.domain())
    }

    /// A fresh session on a copy of the store, for benches that mutate it.
    pub fn fork_session(&self) -> Session {
        Session::in_process(Arc::new(Server::new(self.server.snapshot(), CoinSource::seeded(0))))
    }
}

fn distinct_sorted(n: usize, domain: Domain, coins: &mut CoinSource) -> Vec<u64> {
    let mut seen = HashSet::with_capacity(n);
    while seen.len() < n {
        seen.insert(coins.rng().gen_range(0..domain.size()));
    }
    let mut v: Vec<u64> = seen.into_iter().collect();
    v.sort_unstable();
    v
}
