//! Exact computations over root-constrained directed spanning trees.

mod decode;
mod enumerate;
mod elim;
mod lu;
mod mtt;
mod tree;
mod weights;

pub use decode::map_tree;
pub use enumerate::{enumerate_trees, MAX_ENUMERATION_TOKENS};
pub use mtt::{
    edge_marginals, log_partition, log_partition_and_marginals, log_partition_and_marginals_lu,
    log_partition_lu, tree_log_prob, tree_log_weight,
};
pub use tree::{validate_heads, DepTree};
pub use weights::{EdgeMarginals, EdgeWeights};
