//! Builds a structure over a multiset and returns what a snapshot adversary
//! sees of it, together with the true plaintext at every position.

use std::sync::Arc;

use eseds_core::cipher::SecretKey;
use eseds_core::client::Client;
use eseds_core::coins::CoinSource;
use eseds_core::domain::Domain;
use eseds_core::store::{StoreMode, StoreState};
use eseds_core::transforms::{
    leakage_det, leakage_eseds, leakage_fhope, leakage_ope, ChainedTable, FhopeEseds, LeakageView,
};
use eseds_core::transport::{Server, Session};
use rand::RngCore;

use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Target {
    #[value(name = "main_eseds")]
    MainEseds,
    Fhope,
    Ope,
    Det,
}

impl Target {
    pub fn name(self) -> &'static str {
        match self {
            Target::MainEseds => "main_eseds",
            Target::Fhope => "fhope",
            Target::Ope => "ope",
            Target::Det => "det",
        }
    }
}

pub struct Built {
    pub view: LeakageView,
    /// Plaintext at each position.
    pub truth: Vec<u64>,
}

/// A key drawn from `coins`, so seeded runs are reproducible.
pub fn seeded_key(coins: &mut CoinSource) -> SecretKey {
    let mut bytes = [0u8; 16];
    coins.fill_bytes(&mut bytes);
    SecretKey::from_bytes(&bytes).expect("16-byte key")
}

/// Main-scheme store built by running the insert protocol for each value in
/// order against an in-process server.
pub fn build_main_store(
    key: &SecretKey,
    domain: Domain,
    values: &[u64],
    coins: &mut CoinSource,
) -> Result<StoreState> {
    let server = Arc::new(Server::new(StoreState::dense(), coins.fork()));
    let mut session = Session::in_process(Arc::clone(&server));
    let client = Client::new(key, domain, StoreMode::Dense);
    for &m in values {
        client.insert(&mut session, m, coins)?;
    }
    drop(session);
    Ok(server.snapshot())
}

pub fn build(
    target: Target,
    key: &SecretKey,
    domain: Domain,
    values: &[u64],
    coins: &mut CoinSource,
) -> Result<Built> {
    Ok(match target {
        Target::MainEseds => {
            let store = build_main_store(key, domain, values, coins)?;
            let truth = Client::new(key, domain, StoreMode::Dense).decrypt_all(&store)?;
            Built {
                view: leakage_eseds(&store),
                truth,
            }
        }
        Target::Fhope => {
            let t = FhopeEseds::build(key, domain, values, coins)?;
            Built {
                view: leakage_fhope(&t),
                truth: t.plaintexts(key, domain)?,
            }
        }
        Target::Ope => {
            let t = ChainedTable::build_ope(key, domain, values)?;
            Built {
                view: leakage_ope(&t),
                truth: t.plaintexts(key, domain)?,
            }
        }
        Target::Det => {
            let t = ChainedTable::build_det(key, domain, values)?;
            Built {
                view: leakage_det(&t),
                truth: t.plaintexts(key, domain)?,
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truth_is_per_position() {
        let dom = Domain::new(16).unwrap();
        let values = [1, 3, 3, 7];
        for target in [Target::MainEseds, Target::Fhope, Target::Ope, Target::Det] {
            let mut coins = CoinSource::seeded(5);
            let key = seeded_key(&mut coins);
            let b = build(target, &key, dom, &values, &mut coins).unwrap();
            assert_eq!(b.view.n(), 4);
            let mut sorted = b.truth.clone();
            sorted.sort();
            assert_eq!(sorted, values, "{target:?}");
        }
    }
}
