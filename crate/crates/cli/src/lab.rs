//! Attack lab: builds a target over synthetic data and runs one attack with
//! perfect background knowledge (the adversary knows the multiset).

use eseds_core::attacks::{
    bucketing_attack, cumulative_attack, frequency_analysis, frequency_baseline, lp_optimization,
    score, sorting_attack, AttackMapping, Cdf, Histogram,
};
use eseds_core::coins::CoinSource;
use eseds_core::domain::Domain;
use eseds_core::error::Error;
use eseds_core::transforms::Scheme;
use rand::seq::SliceRandom;
use rand_distr::{Distribution as _, Zipf};

use crate::error::{CliError, Result};
use crate::targets::{self, Built, Target};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum AttackKind {
    Frequency,
    Lp,
    Sorting,
    Cumulative,
    Bucketing,
}

impl AttackKind {
    pub fn name(self) -> &'static str {
        match self {
            AttackKind::Frequency => "frequency",
            AttackKind::Lp => "lp",
            AttackKind::Sorting => "sorting",
            AttackKind::Cumulative => "cumulative",
            AttackKind::Bucketing => "bucketing",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Distribution {
    Uniform,
    /// Zipf with exponent 1 over the domain.
    Zipf,
    /// Every domain value at least once, the rest uniform.
    Dense,
}

#[derive(Clone, Debug)]
pub struct AttackConfig {
    pub target: Target,
    pub attack: AttackKind,
    pub n: usize,
    pub domain: Domain,
    pub distribution: Distribution,
    pub seed: u64,
    pub trials: usize,
    pub norm: u32,
}

#[derive(Clone, Debug)]
pub struct AttackReport {
    pub attack: AttackKind,
    pub target: Target,
    pub n: usize,
    pub domain: u64,
    pub trials: usize,
    pub accuracy: f64,
    pub std_error: f64,
    /// Mean of `max_m #(m) / n` over the sampled multisets.
    pub baseline: f64,
    pub per_trial: Vec<f64>,
}

impl AttackReport {
    /// One `name=value` line per metric.
    pub fn lines(&self) -> Vec<String> {
        vec![
            format!("attack={}", self.attack.name()),
            format!("target={}", self.target.name()),
            format!("n={}", self.n),
            format!("N={}", self.domain),
            format!("trials={}", self.trials),
            format!("accuracy={:.6}", self.accuracy),
            format!("std_error={:.6}", self.std_error),
            format!("baseline={:.6}", self.baseline),
        ]
    }
}

pub fn sample(
    distribution: Distribution,
    n: usize,
    domain: Domain,
    coins: &mut CoinSource,
) -> Result<Vec<u64>> {
    let size = domain.size();
    Ok(match distribution {
        Distribution::Uniform => (0..n).map(|_| coins.below(size as usize) as u64).collect(),
        Distribution::Zipf => {
            let z = Zipf::new(size, 1.0)
                .map_err(|e| CliError::Usage(format!("zipf over {size} values: {e}")))?;
            (0..n).map(|_| z.sample(coins.rng()) as u64 - 1).collect()
        }
        Distribution::Dense => {
            if (n as u64) < size {
                return Err(CliError::Usage(format!(
                    "a dense sample needs n >= N ({n} < {size})"
                )));
            }
            let mut v: Vec<u64> = (0..size).collect();
            v.extend((size as usize..n).map(|_| coins.below(size as usize) as u64));
            v.shuffle(coins.rng());
            v
        }
    })
}

fn inapplicable(attack: AttackKind, target: Target, why: &str) -> CliError {
    CliError::Inapplicable(format!(
        "{} attack is inapplicable to {}: {why}",
        attack.name(),
        target.name()
    ))
}

/// Runs `attack` on a built target. Returns the mapping applied per cell.
pub fn attack_mapping(
    attack: AttackKind,
    target: Target,
    norm: u32,
    built: &Built,
    known: &[u64],
    domain: Domain,
) -> Result<AttackMapping> {
    let view = &built.view;
    let c_hist = Histogram::of_classes(view);
    let m_hist = Histogram::of(known.iter().copied());
    match attack {
        AttackKind::Frequency => Ok(frequency_analysis(&c_hist, &m_hist)?),
        AttackKind::Lp => Ok(lp_optimization(&c_hist, &m_hist, norm)?),
        AttackKind::Sorting => {
            let order = view
                .classes_in_order()
                .ok_or_else(|| inapplicable(attack, target, "order does not leak"))?;
            sorting_attack(&order, domain).map_err(|e| match e {
                Error::NotDense { classes, domain } => inapplicable(
                    attack,
                    target,
                    &format!("ciphertexts not dense ({classes} classes, domain {domain})"),
                ),
                e => e.into(),
            })
        }
        AttackKind::Cumulative => {
            let c_cdf = Cdf::of_view(view)
                .ok_or_else(|| inapplicable(attack, target, "order does not leak"))?;
            if c_cdf.keys().len() as u64 > domain.size() {
                return Err(inapplicable(attack, target, "more classes than domain values"));
            }
            let m_cdf = Cdf::over_domain(&m_hist, domain);
            Ok(cumulative_attack(&c_hist, &c_cdf, &m_hist, &m_cdf, norm)?)
        }
        AttackKind::Bucketing => {
            if !matches!(view.scheme, Scheme::Fhope | Scheme::Eseds) {
                return Err(inapplicable(attack, target, "cells are not in sorted positions"));
            }
            Ok(bucketing_attack(view.n(), known)?)
        }
    }
}

pub fn run(cfg: &AttackConfig) -> Result<AttackReport> {
    if cfg.trials == 0 {
        return Err(CliError::Usage("trials must be at least 1".into()));
    }
    if cfg.n == 0 {
        return Err(CliError::Usage("n must be at least 1".into()));
    }
    let mut master = CoinSource::seeded(cfg.seed);
    let mut per_trial = Vec::with_capacity(cfg.trials);
    let mut baseline = 0.0;
    for _ in 0..cfg.trials {
        let mut coins = master.fork();
        let values = sample(cfg.distribution, cfg.n, cfg.domain, &mut coins)?;
        let key = targets::seeded_key(&mut coins);
        let built = targets::build(cfg.target, &key, cfg.domain, &values, &mut coins)?;
        let mapping = attack_mapping(cfg.attack, cfg.target, cfg.norm, &built, &values, cfg.domain)?;
        per_trial.push(score(&mapping.per_cell(&built.view), &built.truth)?);
        baseline += frequency_baseline(&values);
    }
    let t = per_trial.len() as f64;
    let accuracy = per_trial.iter().sum::<f64>() / t;
    let var = if per_trial.len() > 1 {
        per_trial.iter().map(|a| (a - accuracy).powi(2)).sum::<f64>() / (t - 1.0)
    } else {
        0.0
    };
    Ok(AttackReport {
        attack: cfg.attack,
        target: cfg.target,
        n: cfg.n,
        domain: cfg.domain.size(),
        trials: cfg.trials,
        accuracy,
        std_error: (var / t).sqrt(),
        baseline: baseline / t,
        per_trial,
    })
}
