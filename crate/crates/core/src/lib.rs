//! Structured probing of frozen contextual representations.
//!
//! Probes shaped like a single attention head (plus structural, biaffine and
//! content-free positional variants) score edges between tokens; a
//! matrix-tree likelihood over single-root dependency trees turns those
//! scores into a distribution over trees. Training such probes and
//! comparing their held-out cross-entropies yields V-information estimates.
//!
//! The numeric core is generic over [`Real`] (`f32` or `f64`). The aliases
//! below fix the scalar to `f64`, which is what training, gradient checks
//! and the file formats use.

pub mod checkpoint;
pub mod dataset;
pub mod error;
pub mod heads;
pub mod info;
pub mod probes;
pub mod manifest;
pub mod scalar;
pub mod seed;
pub mod spantree;
pub mod synth;
pub mod train;
pub mod treebank;

pub use dataset::{Example, Splits};
pub use error::{Error, Result};
pub use probes::{ProbeFamily, ProbeKind, ProbeParams, SentenceReprs};
pub use scalar::Real;
pub use spantree::{DepTree, EdgeMarginals, EdgeWeights};
pub use train::TrainConfig;

pub type EdgeWeightsF64 = EdgeWeights<f64>;
pub type EdgeMarginalsF64 = EdgeMarginals<f64>;
pub type SentenceReprsF64 = SentenceReprs<f64>;
pub type ProbeParamsF64 = ProbeParams<f64>;
pub type ExampleF64 = Example<f64>;

pub type EdgeWeightsF32 = EdgeWeights<f32>;
pub type SentenceReprsF32 = SentenceReprs<f32>;
pub type ProbeParamsF32 = ProbeParams<f32>;
