//! Random search over biaffine MLP hyperparameters.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::trainer::{train, TrainOutcome};
use crate::dataset::Example;
use crate::error::{Error, Result};
use crate::probes::{ProbeFamily, ProbeKind};
use crate::scalar::Real;
use crate::seed::{derive_seed_indexed, rng_for};

/// Default number of independently trained configurations.
pub const SEARCH_TRIALS: usize = 50;

pub const MLP_LAYER_CHOICES: [usize; 3] = [0, 1, 2];
pub const DROPOUT_RANGE: (f64, f64) = (0.0, 0.5);
pub const HIDDEN_RANGE: (usize, usize) = (32, 512);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiaffineTrial {
    pub mlp_layers: usize,
    pub dropout: f64,
    pub mlp_hidden: usize,
    /// Filled in once the trial is trained.
    pub dev_loss_bits: Option<f64>,
}

impl BiaffineTrial {
    /// `base` with this trial's MLP settings.
    pub fn apply(&self, base: &TrainConfig) -> TrainConfig {
        TrainConfig {
            mlp_layers: self.mlp_layers,
            mlp_hidden: self.mlp_hidden,
            dropout: self.dropout,
            ..base.clone()
        }
    }
}

#[derive(Clone, Debug)]
pub struct SearchOutcome<T> {
    pub best: BiaffineTrial,
    pub best_config: TrainConfig,
    pub outcome: TrainOutcome<T>,
    pub trials: Vec<BiaffineTrial>,
}

/// The trial sequence for a seed: layers from {0, 1, 2}, dropout from
/// [0, 0.5] and hidden width from [32, 512], each uniform.
pub fn sample_biaffine_trials(n_trials: usize, seed: u64) -> Vec<BiaffineTrial> {
    let mut rng = rng_for(seed, "biaffine-search");
    (0..n_trials)
        .map(|_| BiaffineTrial {
            mlp_layers: MLP_LAYER_CHOICES[rng.random_range(0..MLP_LAYER_CHOICES.len())],
            dropout: rng.random_range(DROPOUT_RANGE.0..=DROPOUT_RANGE.1),
            mlp_hidden: rng.random_range(HIDDEN_RANGE.0..=HIDDEN_RANGE.1),
            dev_loss_bits: None,
        })
        .collect()
}

/// Trains one biaffine probe per sampled trial and keeps the one with the
/// lowest dev loss.
pub fn hyper_search_biaffine<T: Real>(
    train_set: &[Example<T>],
    dev: &[Example<T>],
    n_trials: usize,
    base: &TrainConfig,
) -> Result<SearchOutcome<T>> {
    if n_trials == 0 {
        return Err(Error::Config("hyperparameter search needs at least one trial".into()));
    }
    if train_set.is_empty() || dev.is_empty() {
        return Err(Error::EmptyDataset("search needs nonempty train and dev splits".into()));
    }
    let mut trials = sample_biaffine_trials(n_trials, base.seed);
    let mut best: Option<(usize, TrainConfig, TrainOutcome<T>)> = None;
    for (k, trial) in trials.iter_mut().enumerate() {
        let mut config = trial.apply(base);
        config.seed = derive_seed_indexed(base.seed, "biaffine-trial", k as u64);
        let outcome = train(ProbeKind::contextual(ProbeFamily::Biaffine), train_set, dev, &config)?;
        trial.dev_loss_bits = Some(outcome.best_dev_bits);
        log::info!(
            "trial {k}: layers {} hidden {} dropout {:.3} -> dev {:.4} bits",
            trial.mlp_layers,
            trial.mlp_hidden,
            trial.dropout,
            outcome.best_dev_bits
        );
        if best.as_ref().is_none_or(|(_, _, b)| outcome.best_dev_bits < b.best_dev_bits) {
            best = Some((k, config, outcome));
        }
    }
    let (k, best_config, outcome) = best.expect("at least one trial");
    Ok(SearchOutcome { best: trials[k].clone(), best_config, outcome, trials })
}
