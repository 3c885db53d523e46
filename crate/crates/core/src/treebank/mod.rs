//! Treebank and exported-artifact I/O.

mod align;
mod attn;
pub(crate) mod bin;
mod conllu;
mod repr;

pub use align::{align, align_attn, Joined};
pub use attn::{read_attn, write_attn, AttnFile, AttnSentence, ATTN_MAGIC, ROW_SUM_TOL};
pub use conllu::{format_conllu, parse_conllu, read_conllu, Corpus, Sentence};
pub use repr::{read_reprs, write_reprs, ReprFile, ReprSentence, REPR_MAGIC};
