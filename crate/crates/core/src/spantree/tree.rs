use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single-root dependency tree over `n` tokens.
///
/// `heads()[k]` is the head of token `k + 1`; a head of `0` marks the
/// sentence root. Tokens are numbered from 1 so that index 0 stays free for
/// the synthetic root node of [`EdgeWeights`](super::EdgeWeights).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DepTree {
    heads: Vec<usize>,
}

impl DepTree {
    /// Builds a tree from a head vector, checking that it is a single-root
    /// arborescence.
    pub fn new(heads: Vec<usize>) -> Result<Self> {
        validate_heads(&heads)?;
        Ok(DepTree { heads })
    }

    pub(crate) fn from_heads_unchecked(heads: Vec<usize>) -> Self {
        debug_assert!(validate_heads(&heads).is_ok());
        DepTree { heads }
    }

    pub fn len(&self) -> usize {
        self.heads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heads.is_empty()
    }

    pub fn heads(&self) -> &[usize] {
        &self.heads
    }

    /// Head of token `dep` (1-based).
    pub fn head(&self, dep: usize) -> usize {
        self.heads[dep - 1]
    }

    /// The token attached to the root.
    pub fn root_token(&self) -> usize {
        self.heads.iter().position(|&h| h == 0).map(|k| k + 1).unwrap_or(0)
    }

    /// Edges as `(head, dependent)` pairs with 1-based dependents.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.heads.iter().enumerate().map(|(k, &h)| (h, k + 1))
    }

    pub fn into_heads(self) -> Vec<usize> {
        self.heads
    }
}

/// Checks the single-root arborescence invariants on a raw head vector.
pub fn validate_heads(heads: &[usize]) -> Result<()> {
    let n = heads.len();
    if n == 0 {
        return Err(Error::InvalidTree("tree has no tokens".into()));
    }
    let mut roots = 0;
    for (k, &h) in heads.iter().enumerate() {
        if h > n {
            return Err(Error::InvalidTree(format!(
                "token {} has head {h} outside 0..={n}",
                k + 1
            )));
        }
        if h == k + 1 {
            return Err(Error::InvalidTree(format!("token {h} heads itself")));
        }
        if h == 0 {
            roots += 1;
        }
    }
    if roots != 1 {
        return Err(Error::InvalidTree(format!("expected one root, found {roots}")));
    }

    // 0 = unvisited, 1 = on the current path, 2 = known to reach the root.
    let mut state = vec![0u8; n + 1];
    state[0] = 2;
    let mut path = Vec::new();
    for start in 1..=n {
        let mut v = start;
        while state[v] == 0 {
            state[v] = 1;
            path.push(v);
            v = heads[v - 1];
        }
        if state[v] == 1 {
            return Err(Error::InvalidTree(format!("cycle through token {v}")));
        }
        for u in path.drain(..) {
            state[u] = 2;
        }
    }
    Ok(())
}
