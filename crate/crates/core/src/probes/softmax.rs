use ndarray::Array2;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::spantree::EdgeWeights;

/// Sets the root column and the diagonal to the `-inf` sentinel.
pub fn mask_logits<T: Real>(alpha: &mut Array2<T>) {
    let m = alpha.nrows();
    for i in 0..m {
        alpha[[i, 0]] = T::neg_infinity();
        alpha[[i, i]] = T::neg_infinity();
    }
}

/// Row-wise softmax over dependents `j` for every head row `i`.
///
/// The root column and the diagonal are always excluded, as is any cell
/// holding `-inf`. A token row with no structurally legal cell (a one-token
/// sentence) becomes an all-zero row; any other row without a finite logit
/// is rejected.
pub fn weights_from_logits<T: Real>(alpha: &Array2<T>) -> Result<EdgeWeights<T>> {
    let (rows, cols) = alpha.dim();
    if rows != cols || rows < 2 {
        return Err(Error::Dimension(format!(
            "logits must be (n+1)x(n+1) with n >= 1, got {rows}x{cols}"
        )));
    }
    let n = rows - 1;
    let mut w = Array2::zeros((rows, cols));
    for i in 0..rows {
        let mut max = T::neg_infinity();
        for j in 1..cols {
            if j == i {
                continue;
            }
            let a = alpha[[i, j]];
            if a.is_nan() || a == T::infinity() {
                return Err(Error::NonFinite(format!("logit[{i}][{j}] = {a}")));
            }
            if a > max {
                max = a;
            }
        }
        if max == T::neg_infinity() {
            if i >= 1 && n == 1 {
                continue;
            }
            return Err(Error::DegenerateRow { row: i });
        }
        let mut total = T::zero();
        for j in 1..cols {
            if j == i {
                continue;
            }
            let e = (alpha[[i, j]] - max).exp();
            w[[i, j]] = e;
            total += e;
        }
        for j in 1..cols {
            w[[i, j]] /= total;
        }
    }
    Ok(EdgeWeights::new_unchecked(w))
}

/// `log w[i][j]` computed from the logits directly, so it stays finite when
/// the weight itself underflows.
pub(crate) fn log_softmax_at<T: Real>(alpha: &Array2<T>, i: usize, j: usize) -> T {
    let cols = alpha.ncols();
    let legal = || (1..cols).filter(move |&c| c != i).map(move |c| alpha[[i, c]]);
    let max = legal().fold(T::neg_infinity(), T::max);
    let total: T = legal().map(|a| (a - max).exp()).sum();
    alpha[[i, j]] - max - total.ln()
}

/// Pulls `∂L/∂log w` back through the row softmax to `∂L/∂α`.
pub(crate) fn softmax_backward<T: Real>(w: &EdgeWeights<T>, grad_log_w: &Array2<T>) -> Array2<T> {
    let m = grad_log_w.nrows();
    let mut out = Array2::zeros((m, m));
    for i in 0..m {
        let mut row_total = T::zero();
        for j in 1..m {
            if j != i {
                row_total += grad_log_w[[i, j]];
            }
        }
        for j in 1..m {
            if j != i {
                out[[i, j]] = grad_log_w[[i, j]] - w.get(i, j) * row_total;
            }
        }
    }
    out
}
