//! Cancellation-free evaluation of the single-root tree partition function.
//!
//! Token nodes are eliminated one at a time. Eliminating `k` with pivot
//! `p_k = Σ_i a[i][k]` replaces every pair weight by
//! `a[i][j] + a[i][k]·a[k][j] / p_k` (paths through `k`) and every root
//! weight by `ε[j] + a[k][j]·ε[k] / p_k`. After `n-1` eliminations the
//! remaining node's root weight `ε_last` gives
//!
//! ```text
//! Z = ε_last · Π p_k
//! ```
//!
//! This is the coefficient of the single-root term in the multi-root
//! partition function, and equals the determinant of the root-substituted
//! Laplacian. Every step adds, multiplies and divides nonnegative numbers,
//! so `log Z` keeps full relative accuracy even when the determinant route
//! cancels catastrophically (saturated softmax weights whose greedy heads
//! form a cycle).
//!
//! Marginals come from reverse-mode differentiation through the recorded
//! eliminations; each step stores one row, one column and the pivot, so the
//! tape is `O(n²)`.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::scalar::Real;

struct Step<T> {
    node: usize,
    pivot: T,
    /// `a[i][node]` at elimination time, zero for inactive `i`.
    col: Array1<T>,
    /// `a[node][j]` at elimination time, zero for inactive `j`.
    row: Array1<T>,
    eps: T,
}

pub(crate) struct Elimination<T> {
    steps: Vec<Step<T>>,
    last: usize,
    last_eps: T,
    pub log_z: T,
}

/// `a` is the token-to-token weight matrix (`n×n`, zero diagonal, entry
/// `[h][d]` for head `h` → dependent `d`), `eps` the root weights.
pub(crate) fn eliminate<T: Real>(mut a: Array2<T>, mut eps: Array1<T>) -> Result<Elimination<T>> {
    let n = eps.len();
    let mut active = vec![true; n];
    let mut steps = Vec::with_capacity(n.saturating_sub(1));
    let mut log_z = T::zero();
    for _ in 1..n {
        let mut best: Option<(usize, T)> = None;
        for k in (0..n).filter(|&k| active[k]) {
            let p: T = (0..n).filter(|&i| active[i] && i != k).map(|i| a[[i, k]]).sum();
            if best.is_none_or(|(_, b)| p > b) {
                best = Some((k, p));
            }
        }
        let (k, p) = best.expect("at least two active nodes");
        if !(p > T::zero()) {
            return Err(Error::SingularSystem(
                "no single-root tree: two tokens are unreachable from any other token".into(),
            ));
        }
        let mut col = Array1::zeros(n);
        let mut row = Array1::zeros(n);
        for i in 0..n {
            if active[i] && i != k {
                col[i] = a[[i, k]];
                row[i] = a[[k, i]];
            }
        }
        let inv = T::one() / p;
        for i in 0..n {
            if col[i] == T::zero() {
                continue;
            }
            let ci = col[i] * inv;
            for j in 0..n {
                if j != i && row[j] != T::zero() {
                    a[[i, j]] += ci * row[j];
                }
            }
        }
        let ek = eps[k];
        if ek != T::zero() {
            for j in 0..n {
                if row[j] != T::zero() {
                    eps[j] += row[j] * ek * inv;
                }
            }
        }
        log_z += p.ln();
        active[k] = false;
        steps.push(Step { node: k, pivot: p, col, row, eps: ek });
    }
    let last = (0..n).find(|&k| active[k]).expect("one node remains");
    let last_eps = eps[last];
    if !(last_eps > T::zero()) {
        return Err(Error::SingularSystem("no tree attaches to the root".into()));
    }
    log_z += last_eps.ln();
    Ok(Elimination { steps, last, last_eps, log_z })
}

impl<T: Real> Elimination<T> {
    /// `(∂ log Z / ∂a, ∂ log Z / ∂ε)` with respect to the inputs of
    /// [`eliminate`].
    pub(crate) fn gradient(&self, n: usize) -> (Array2<T>, Array1<T>) {
        let mut ga = Array2::zeros((n, n));
        let mut ge = Array1::zeros(n);
        ge[self.last] = T::one() / self.last_eps;
        let mut rank = vec![self.steps.len(); n];
        for (r, step) in self.steps.iter().enumerate() {
            rank[step.node] = r;
        }
        for step in self.steps.iter().rev() {
            let k = step.node;
            let p = step.pivot;
            let inv = T::one() / p;
            let mut g_col = Array1::<T>::zeros(n);
            let mut g_row = Array1::<T>::zeros(n);
            let mut g_p = inv;

            // ε[j] += row[j]·ε_k / p
            let mut g_eps_k = T::zero();
            for j in 0..n {
                if step.row[j] != T::zero() {
                    let g = ge[j];
                    g_eps_k += g * step.row[j] * inv;
                    g_row[j] += g * step.eps * inv;
                    g_p -= g * step.row[j] * step.eps * inv * inv;
                }
            }
            ge[k] += g_eps_k;

            // a[i][j] += col[i]·row[j] / p
            for i in 0..n {
                if step.col[i] == T::zero() {
                    continue;
                }
                let mut acc_row_dot = T::zero();
                for j in 0..n {
                    if j != i && step.row[j] != T::zero() {
                        let g = ga[[i, j]];
                        acc_row_dot += g * step.row[j];
                        g_row[j] += g * step.col[i] * inv;
                    }
                }
                g_col[i] += acc_row_dot * inv;
                g_p -= acc_row_dot * step.col[i] * inv * inv;
            }

            // p = Σ_i col[i] over the nodes still active at this step.
            for i in 0..n {
                if rank[i] > rank[k] {
                    ga[[i, k]] += g_col[i] + g_p;
                    ga[[k, i]] += g_row[i];
                }
            }
        }
        (ga, ge)
    }

}
