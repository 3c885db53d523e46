use super::tree::{validate_heads, DepTree};
use crate::error::{Error, Result};

/// Largest sentence length accepted by [`enumerate_trees`].
pub const MAX_ENUMERATION_TOKENS: usize = 7;

/// Every single-root arborescence over `n` tokens, in lexicographic order of
/// head vectors. There are `n^(n-1)` of them.
pub fn enumerate_trees(n: usize) -> Result<Vec<DepTree>> {
    if n == 0 {
        return Err(Error::InvalidTree("cannot enumerate trees over 0 tokens".into()));
    }
    if n > MAX_ENUMERATION_TOKENS {
        return Err(Error::SizeLimit(format!(
            "enumeration supports at most {MAX_ENUMERATION_TOKENS} tokens, got {n}"
        )));
    }
    let mut out = Vec::new();
    let mut heads = vec![0usize; n];
    loop {
        if validate_heads(&heads).is_ok() {
            out.push(DepTree::from_heads_unchecked(heads.clone()));
        }
        // Odometer increment over {0..n}^n, last position fastest.
        let mut k = n;
        loop {
            if k == 0 {
                return Ok(out);
            }
            k -= 1;
            if heads[k] < n {
                heads[k] += 1;
                break;
            }
            heads[k] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_counts() {
        assert_eq!(enumerate_trees(1).unwrap().len(), 1);
        assert_eq!(enumerate_trees(2).unwrap().len(), 2);
        assert_eq!(enumerate_trees(3).unwrap().len(), 9);
    }

    #[test]
    fn size_limit() {
        assert!(matches!(enumerate_trees(8), Err(Error::SizeLimit(_))));
    }

    #[test]
    fn sorted_and_unique() {
        let trees = enumerate_trees(4).unwrap();
        assert!(trees.windows(2).all(|w| w[0] < w[1]));
    }
}
