//! Losses, gradients and the training loop.

mod adamw;
mod config;
mod loss;
mod search;
mod trainer;

pub use adamw::{AdamW, AdamWConfig};
pub use config::{parse_kv, TrainConfig};
pub use loss::{loss_gradient, nats_to_bits, sentence_loss, sentence_loss_bits};
pub use search::{hyper_search_biaffine, sample_biaffine_trials, BiaffineTrial, SearchOutcome, SEARCH_TRIALS};
pub use trainer::{mean_loss_bits, probe_shape, train, train_from, TrainLogRecord, TrainOutcome};
