//! Probe families that map sentence representations to edge weights.

mod forward;
mod params;
mod reprs;
mod softmax;

pub(crate) use forward::Mode;
pub(crate) use softmax::{log_softmax_at, softmax_backward};

pub use forward::{attn_logits, biaffine_logits, positional_reprs, structural_logits};
pub use params::{
    AttentionalParams, BiaffineParams, MlpLayer, ProbeFamily, ProbeKind, ProbeParams, ProbeShape,
    Scorer, StructuralParams, DEFAULT_HIDDEN,
};
pub use reprs::SentenceReprs;
pub use softmax::{mask_logits, weights_from_logits};
