use ndarray::{s, Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Per-token vectors for one sentence at one layer, with the root vector in
/// row 0.
#[derive(Clone, Debug, PartialEq)]
pub struct SentenceReprs<T> {
    layer: usize,
    vectors: Array2<T>,
}

impl<T: Real> SentenceReprs<T> {
    /// Prepends the all-zero root row to `n×d1` token vectors.
    pub fn from_tokens(layer: usize, tokens: ArrayView2<'_, T>) -> Result<Self> {
        let (n, d1) = tokens.dim();
        let mut vectors = Array2::zeros((n + 1, d1));
        vectors.slice_mut(s![1.., ..]).assign(&tokens);
        Self::new(layer, vectors)
    }

    /// `(n+1)×d1` vectors whose row 0 must be exactly zero.
    pub fn new(layer: usize, vectors: Array2<T>) -> Result<Self> {
        let reprs = Self::with_root(layer, vectors)?;
        if reprs.vectors.row(0).iter().any(|&v| v != T::zero()) {
            return Err(Error::Dimension("root representation must be all zeros".into()));
        }
        Ok(reprs)
    }

    /// `(n+1)×d1` vectors with an arbitrary (e.g. learned) root row.
    pub fn with_root(layer: usize, vectors: Array2<T>) -> Result<Self> {
        if vectors.nrows() < 2 || vectors.ncols() == 0 {
            return Err(Error::Dimension(format!(
                "representations need n >= 1 tokens and d1 >= 1, got shape {:?}",
                vectors.dim()
            )));
        }
        if vectors.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("representation entry".into()));
        }
        Ok(SentenceReprs { layer, vectors })
    }

    pub fn n(&self) -> usize {
        self.vectors.nrows() - 1
    }

    pub fn d1(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn layer(&self) -> usize {
        self.layer
    }

    pub fn vectors(&self) -> &Array2<T> {
        &self.vectors
    }
}
