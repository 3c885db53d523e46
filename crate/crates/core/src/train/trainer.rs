use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adamw::AdamW;
use super::config::TrainConfig;
use super::loss::{accumulate_loss_gradient, nats_to_bits, sentence_loss};
use crate::dataset::{max_len, Example};
use crate::error::{Error, Result};
use crate::probes::{Mode, ProbeKind, ProbeParams, ProbeShape};
use crate::scalar::Real;
use crate::seed::{derive_seed_indexed, rng_for};

/// Sentences per gradient-accumulation chunk. Chunks may run on different
/// threads; their sums are combined in chunk order, so results do not
/// depend on the thread count.
const CHUNK: usize = 16;

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainLogRecord {
    pub step: usize,
    pub epoch: usize,
    /// Mean per-sentence training loss since the previous record.
    pub train_loss_bits: f64,
    pub dev_loss_bits: f64,
    pub best_dev_loss_bits: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<T> {
    /// Parameters with the lowest dev loss seen.
    pub params: ProbeParams<T>,
    pub best_dev_bits: f64,
    pub best_step: usize,
    pub steps: usize,
    pub stopped_early: bool,
    pub log: Vec<TrainLogRecord>,
}

/// Shape of a freshly initialised probe for this config and data.
pub fn probe_shape<T: Real>(config: &TrainConfig, d1: usize, data: &[&[Example<T>]]) -> ProbeShape {
    ProbeShape {
        d1,
        d2: config.hidden,
        mlp_layers: config.mlp_layers,
        mlp_hidden: config.mlp_hidden,
        max_len: max_len(data).max(config.max_len),
    }
}

/// Mean per-sentence loss in bits, evaluation mode.
pub fn mean_loss_bits<T: Real>(params: &ProbeParams<T>, data: &[Example<T>]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset("no sentences to evaluate".into()));
    }
    let losses: Vec<f64> = data
        .par_iter()
        .map(|ex| sentence_loss(params, &ex.reprs, &ex.gold).map(|l| l.to_f64_lossy()))
        .collect::<Result<_>>()?;
    Ok(nats_to_bits(losses.iter().sum::<f64>() / data.len() as f64))
}

/// Trains a fresh probe of `kind` with minibatch AdamW and dev-loss early
/// stopping.
pub fn train<T: Real>(
    kind: ProbeKind,
    train: &[Example<T>],
    dev: &[Example<T>],
    config: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyDataset("training split is empty".into()));
    }
    if dev.is_empty() {
        return Err(Error::EmptyDataset("dev split is empty".into()));
    }
    let d1 = train[0].reprs.d1();
    let shape = probe_shape(config, d1, &[train, dev]);
    let mut init_rng = rng_for(config.seed, "init");
    let params = ProbeParams::init(kind, &shape, &mut init_rng)?;
    train_from(params, train, dev, config)
}

/// Continues training from the given parameters.
pub fn train_from<T: Real>(
    mut params: ProbeParams<T>,
    train: &[Example<T>],
    dev: &[Example<T>],
    config: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    config.validate()?;
    if train.is_empty() || dev.is_empty() {
        return Err(Error::EmptyDataset("training and dev splits must be nonempty".into()));
    }
    let start = Instant::now();
    let mut opt = AdamW::new(config.adamw(), &params);
    let mut shuffle_rng = rng_for(config.seed, "shuffle");
    let mut order: Vec<usize> = (0..train.len()).collect();

    let mut best_dev = mean_loss_bits(&params, dev)?;
    let mut best = params.clone();
    let mut best_step = 0;
    let mut bad_evals = 0;
    let mut log = Vec::new();
    let mut window_loss = 0.0;
    let mut window_count = 0usize;
    let mut step = 0;
    let mut epoch = 0;
    let mut stopped_early = false;

    'outer: loop {
        order.shuffle(&mut shuffle_rng);
        for batch in order.chunks(config.batch_size) {
            let (loss, grad) = batch_gradient(&params, train, batch, config, step)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    step,
                    detail: format!("batch loss {loss} over {} sentences", batch.len()),
                });
            }
            opt.step(&mut params, &grad);
            step += 1;
            window_loss += loss;
            window_count += batch.len();

            let last = step >= config.max_batches;
            if step % config.eval_every == 0 || last {
                let dev_bits = mean_loss_bits(&params, dev)?;
                if !dev_bits.is_finite() {
                    return Err(Error::NonFiniteLoss { step, detail: format!("dev loss {dev_bits}") });
                }
                if dev_bits < best_dev {
                    best_dev = dev_bits;
                    best = params.clone();
                    best_step = step;
                    bad_evals = 0;
                } else {
                    bad_evals += 1;
                }
                log.push(TrainLogRecord {
                    step,
                    epoch,
                    train_loss_bits: nats_to_bits(window_loss / window_count.max(1) as f64),
                    dev_loss_bits: dev_bits,
                    best_dev_loss_bits: best_dev,
                });
                log::debug!(
                    "step {step}: dev {dev_bits:.4} bits (best {best_dev:.4}), {:.1}s",
                    start.elapsed().as_secs_f64()
                );
                window_loss = 0.0;
                window_count = 0;
                if bad_evals >= config.patience {
                    stopped_early = true;
                    break 'outer;
                }
            }
            if last {
                break 'outer;
            }
        }
        epoch += 1;
    }

    Ok(TrainOutcome { params: best, best_dev_bits: best_dev, best_step, steps: step, stopped_early, log })
}

/// Summed loss (nats) and summed gradient over one batch.
fn batch_gradient<T: Real>(
    params: &ProbeParams<T>,
    data: &[Example<T>],
    batch: &[usize],
    config: &TrainConfig,
    step: usize,
) -> Result<(f64, ProbeParams<T>)> {
    let partials: Vec<(f64, ProbeParams<T>)> = batch
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut grad = params.zeros_like();
            let mut total = 0.0;
            for &k in chunk {
                let ex = &data[k];
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed_indexed(
                    config.seed,
                    "dropout",
                    (step as u64) << 32 | k as u64,
                ));
                let mut mode = Mode::Train { rng: &mut rng, dropout: config.dropout };
                let loss = accumulate_loss_gradient(params, &ex.reprs, &ex.gold, &mut mode, &mut grad)
                    .map_err(|e| match e {
                        e if e.is_numeric() => Error::NonFiniteLoss {
                            step,
                            detail: format!("sentence {}: {e}", ex.id),
                        },
                        e => e,
                    })?;
                total += loss.to_f64_lossy();
            }
            Ok((total, grad))
        })
        .collect::<Result<_>>()?;

    let mut iter = partials.into_iter();
    let (mut loss, mut grad) = iter.next().expect("batch is nonempty");
    for (l, g) in iter {
        loss += l;
        grad.add_scaled(&g, T::one());
    }
    Ok((loss, grad))
}
