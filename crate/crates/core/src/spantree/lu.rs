//! Dense LU factorisation with partial pivoting.

use ndarray::Array2;

use crate::scalar::Real;

pub(crate) struct Lu<T> {
    lu: Array2<T>,
    perm: Vec<usize>,
    sign: T,
}

impl<T: Real> Lu<T> {
    /// Factors `a` in place as `P a = L U`. Returns `None` when a pivot is
    /// exactly zero.
    pub fn factor(mut a: Array2<T>) -> Option<Self> {
        let n = a.nrows();
        debug_assert_eq!(n, a.ncols());
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = T::one();
        for k in 0..n {
            let mut p = k;
            let mut best = a[[k, k]].abs();
            for r in k + 1..n {
                let v = a[[r, k]].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best == T::zero() || !best.is_finite() {
                return None;
            }
            if p != k {
                for c in 0..n {
                    a.swap([k, c], [p, c]);
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let pivot = a[[k, k]];
            for r in k + 1..n {
                let f = a[[r, k]] / pivot;
                a[[r, k]] = f;
                if f != T::zero() {
                    for c in k + 1..n {
                        let u = a[[k, c]];
                        a[[r, c]] -= f * u;
                    }
                }
            }
        }
        Some(Lu { lu: a, perm, sign })
    }

    /// `(sign, log|det|)` of the factored matrix.
    pub fn log_det(&self) -> (T, T) {
        let mut sign = self.sign;
        let mut log = T::zero();
        for k in 0..self.lu.nrows() {
            let d = self.lu[[k, k]];
            if d < T::zero() {
                sign = -sign;
            }
            log += d.abs().ln();
        }
        (sign, log)
    }

    /// Inverse of the factored matrix, column by column.
    pub fn inverse(&self) -> Array2<T> {
        let n = self.lu.nrows();
        let mut inv = Array2::zeros((n, n));
        let mut x = vec![T::zero(); n];
        for col in 0..n {
            // Solve L y = P e_col.
            for r in 0..n {
                let mut s = if self.perm[r] == col { T::one() } else { T::zero() };
                for c in 0..r {
                    s -= self.lu[[r, c]] * x[c];
                }
                x[r] = s;
            }
            // Solve U x = y.
            for r in (0..n).rev() {
                let mut s = x[r];
                for c in r + 1..n {
                    s -= self.lu[[r, c]] * x[c];
                }
                x[r] = s / self.lu[[r, r]];
            }
            for r in 0..n {
                inv[[r, col]] = x[r];
            }
        }
        inv
    }
}
