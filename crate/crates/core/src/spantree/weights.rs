use ndarray::Array2;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Nonnegative edge weights over the synthetic root plus `n` tokens.
///
/// `get(i, j)` is the weight of the edge head `i` → dependent `j`, with
/// index 0 reserved for the root. Column 0 and the diagonal are always zero.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeWeights<T> {
    w: Array2<T>,
}

impl<T: Real> EdgeWeights<T> {
    /// Wraps an `(n+1)×(n+1)` matrix, checking the weight invariants.
    pub fn new(w: Array2<T>) -> Result<Self> {
        let (rows, cols) = w.dim();
        if rows != cols || rows < 2 {
            return Err(Error::Dimension(format!(
                "edge weights must be (n+1)x(n+1) with n >= 1, got {rows}x{cols}"
            )));
        }
        for ((i, j), &v) in w.indexed_iter() {
            if !v.is_finite() || v < T::zero() {
                return Err(Error::InvalidWeights(format!("w[{i}][{j}] = {v}")));
            }
            if (j == 0 || i == j) && v != T::zero() {
                return Err(Error::InvalidWeights(format!(
                    "w[{i}][{j}] = {v} must be zero (root column or diagonal)"
                )));
            }
        }
        Ok(EdgeWeights { w })
    }

    /// Builds weights from any square matrix, zeroing the root column and the
    /// diagonal first.
    pub fn from_masked(mut w: Array2<T>) -> Result<Self> {
        let (rows, cols) = w.dim();
        if rows == cols {
            for i in 0..rows {
                w[[i, 0]] = T::zero();
                w[[i, i]] = T::zero();
            }
        }
        Self::new(w)
    }

    /// Every legal edge gets weight `c`.
    pub fn uniform(n: usize, c: T) -> Result<Self> {
        let mut w = Array2::from_elem((n + 1, n + 1), c);
        for i in 0..=n {
            w[[i, 0]] = T::zero();
            w[[i, i]] = T::zero();
        }
        Self::new(w)
    }

    pub(crate) fn new_unchecked(w: Array2<T>) -> Self {
        EdgeWeights { w }
    }

    /// Number of tokens.
    pub fn n(&self) -> usize {
        self.w.nrows() - 1
    }

    #[inline]
    pub fn get(&self, head: usize, dep: usize) -> T {
        self.w[[head, dep]]
    }

    pub fn matrix(&self) -> &Array2<T> {
        &self.w
    }

    pub fn into_matrix(self) -> Array2<T> {
        self.w
    }

    /// Multiplies every weight by `lambda > 0`.
    pub fn scaled(&self, lambda: T) -> Result<Self> {
        if !(lambda > T::zero()) || !lambda.is_finite() {
            return Err(Error::InvalidWeights(format!("scale {lambda} must be positive")));
        }
        Self::new(self.w.mapv(|v| v * lambda))
    }
}

/// Edge marginals of the Gibbs distribution over single-root trees.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeMarginals<T> {
    pub(crate) mu: Array2<T>,
}

impl<T: Real> EdgeMarginals<T> {
    pub fn n(&self) -> usize {
        self.mu.nrows() - 1
    }

    #[inline]
    pub fn get(&self, head: usize, dep: usize) -> T {
        self.mu[[head, dep]]
    }

    pub fn matrix(&self) -> &Array2<T> {
        &self.mu
    }

    pub fn into_matrix(self) -> Array2<T> {
        self.mu
    }

    /// Expected number of incoming edges for each dependent; every entry is 1.
    pub fn column_sums(&self) -> Vec<T> {
        (1..=self.n())
            .map(|j| (0..=self.n()).map(|i| self.mu[[i, j]]).sum())
            .collect()
    }

    /// Expected number of root attachments; always 1.
    pub fn root_mass(&self) -> T {
        self.mu.row(0).iter().copied().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rejects_diagonal_and_root_column() {
        assert!(EdgeWeights::new(array![[0.0, 1.0], [0.0, 1.0]]).is_err());
        assert!(EdgeWeights::new(array![[1.0, 1.0], [0.0, 0.0]]).is_err());
        assert!(EdgeWeights::new(array![[0.0, -1.0], [0.0, 0.0]]).is_err());
        assert!(EdgeWeights::new(array![[0.0, 1.0], [0.0, 0.0]]).is_ok());
    }

    #[test]
    fn rejects_bad_shape() {
        assert!(matches!(
            EdgeWeights::new(Array2::<f64>::zeros((2, 3))),
            Err(Error::Dimension(_))
        ));
        assert!(EdgeWeights::new(Array2::<f64>::zeros((1, 1))).is_err());
    }

    #[test]
    fn from_masked_zeroes_illegal_cells() {
        let w = EdgeWeights::from_masked(Array2::from_elem((3, 3), 0.5f64)).unwrap();
        assert_eq!(w.get(1, 1), 0.0);
        assert_eq!(w.get(2, 0), 0.0);
        assert_eq!(w.get(1, 2), 0.5);
    }
}
