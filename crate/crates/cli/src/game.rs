//! Empirical indistinguishability game for data structures.
//!
//! Each trial: the adversary picks two equal-size multisets, one is built at
//! random, and the adversary names a position and a plaintext guess. It wins
//! if the cell at that position holds the guessed value. Its advantage is how
//! far the win rate sits above the guessed value's frequency in the union of
//! the two multisets.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use eseds_core::coins::CoinSource;
use eseds_core::domain::Domain;
use eseds_core::error::Error;
use eseds_core::transforms::LeakageView;

use crate::error::{CliError, Result};
use crate::targets::{self, Target};

pub const MIN_TRIALS: usize = 100;

pub trait Adversary {
    fn name(&self) -> &'static str;

    /// First phase: the two candidate multisets.
    fn choose(&mut self, coins: &mut CoinSource) -> (Vec<u64>, Vec<u64>);

    /// Second phase: a position and a plaintext guess for it.
    fn guess(&mut self, view: &LeakageView, coins: &mut CoinSource) -> (usize, u64);
}

/// Both multisets are `{0, 1}`; always guesses that position 0 holds 0.
/// Wins every time against any scheme that stores cells in sorted order.
#[derive(Clone, Copy, Debug, Default)]
pub struct PositionGuesser;

impl Adversary for PositionGuesser {
    fn name(&self) -> &'static str {
        "position_guesser"
    }

    fn choose(&mut self, _: &mut CoinSource) -> (Vec<u64>, Vec<u64>) {
        (vec![0, 1], vec![0, 1])
    }

    fn guess(&mut self, _: &LeakageView, _: &mut CoinSource) -> (usize, u64) {
        (0, 0)
    }
}

/// `n` zeros against `n` ones; guesses from a fingerprint of everything it
/// observes.
#[derive(Clone, Copy, Debug)]
pub struct MultisetDistinguisher {
    pub n: usize,
}

impl Default for MultisetDistinguisher {
    fn default() -> Self {
        Self { n: 4 }
    }
}

impl Adversary for MultisetDistinguisher {
    fn name(&self) -> &'static str {
        "multiset_distinguisher"
    }

    fn choose(&mut self, _: &mut CoinSource) -> (Vec<u64>, Vec<u64>) {
        (vec![0; self.n], vec![1; self.n])
    }

    fn guess(&mut self, view: &LeakageView, _: &mut CoinSource) -> (usize, u64) {
        let mut h = DefaultHasher::new();
        for c in &view.cells {
            (c.position, c.class, c.order).hash(&mut h);
        }
        (0, h.finish() & 1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum AdversaryKind {
    #[value(name = "position_guesser")]
    PositionGuesser,
    #[value(name = "multiset_distinguisher")]
    MultisetDistinguisher,
}

impl AdversaryKind {
    pub fn instantiate(self) -> Box<dyn Adversary> {
        match self {
            AdversaryKind::PositionGuesser => Box::new(PositionGuesser),
            AdversaryKind::MultisetDistinguisher => Box::new(MultisetDistinguisher::default()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct GameConfig {
    pub trials: usize,
    pub adversary: AdversaryKind,
    pub target: Target,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrialOutcome {
    pub success: bool,
    /// Frequency of the guessed value in the union of both multisets.
    pub p: f64,
}

#[derive(Clone, Debug)]
pub struct GameReport {
    pub target: Target,
    pub adversary: &'static str,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub mean_p: f64,
    /// `|success_rate - mean_p|`.
    pub advantage: f64,
    /// Standard error of the win rate if the adversary had no advantage.
    pub sigma: f64,
    pub outcomes: Vec<TrialOutcome>,
}

fn game_domain(m0: &[u64], m1: &[u64]) -> Result<Domain> {
    let top = m0.iter().chain(m1).copied().max().unwrap_or(0);
    Ok(Domain::new(top.saturating_add(1))?)
}

/// One run of the experiment. Unequal multiset sizes are rejected.
pub fn run_trial(
    adversary: &mut dyn Adversary,
    target: Target,
    coins: &mut CoinSource,
) -> Result<TrialOutcome> {
    let (m0, m1) = adversary.choose(coins);
    if m0.len() != m1.len() {
        return Err(CliError::Core(Error::SizeMismatch {
            left: m0.len(),
            right: m1.len(),
        }));
    }
    let domain = game_domain(&m0, &m1)?;
    let chosen = if coins.flip() { &m1 } else { &m0 };
    let key = targets::seeded_key(coins);
    let built = targets::build(target, &key, domain, chosen, coins)?;
    let (j, m) = adversary.guess(&built.view, coins);
    let success = built.truth.get(j) == Some(&m);
    let hits = m0.iter().chain(&m1).filter(|&&x| x == m).count();
    Ok(TrialOutcome {
        success,
        p: hits as f64 / (m0.len() + m1.len()) as f64,
    })
}

pub fn run_game(cfg: &GameConfig) -> Result<GameReport> {
    let mut adversary = cfg.adversary.instantiate();
    run_game_with(cfg, adversary.as_mut())
}

pub fn run_game_with(cfg: &GameConfig, adversary: &mut dyn Adversary) -> Result<GameReport> {
    if cfg.trials < MIN_TRIALS {
        return Err(CliError::Usage(format!(
            "at least {MIN_TRIALS} trials are needed, got {}",
            cfg.trials
        )));
    }
    let mut master = CoinSource::seeded(cfg.seed);
    let outcomes = (0..cfg.trials)
        .map(|_| run_trial(adversary, cfg.target, &mut master.fork()))
        .collect::<Result<Vec<_>>>()?;
    let t = outcomes.len() as f64;
    let successes = outcomes.iter().filter(|o| o.success).count();
    let success_rate = successes as f64 / t;
    let mean_p = outcomes.iter().map(|o| o.p).sum::<f64>() / t;
    Ok(GameReport {
        target: cfg.target,
        adversary: adversary.name(),
        trials: cfg.trials,
        successes,
        success_rate,
        mean_p,
        advantage: (success_rate - mean_p).abs(),
        sigma: (mean_p * (1.0 - mean_p) / t).sqrt(),
        outcomes,
    })
}
