//! Matrix-tree computations over single-root arborescences.
//!
//! The Laplacian over tokens `1..=n` has `L[j][j] = Σ_{i≥1, i≠j} w[i][j]` and
//! `L[i][j] = -w[i][j]`; its first row is then replaced by the root weights
//! `w[0][j]`. The determinant of that matrix is the total weight of all
//! trees with exactly one root attachment.
//!
//! Each column `j` only involves weights of edges into `j`, so columns are
//! divided by their largest incoming weight first and the log of that scale
//! is added back afterwards.
//!
//! The default routines evaluate that determinant by node elimination
//! (see `elim`), which stays accurate for saturated weights. The `_lu`
//! variants factor the matrix directly and serve as a cross-check.

use ndarray::{Array1, Array2};

use super::elim::eliminate;
use super::lu::Lu;
use super::tree::DepTree;
use super::weights::{EdgeMarginals, EdgeWeights};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Weights with each column divided by its largest incoming weight, and
/// `Σ_j log s_j`.
fn column_scaled<T: Real>(w: &EdgeWeights<T>) -> Result<(Array2<T>, T)> {
    let n = w.n();
    let mut scaled = w.matrix().clone();
    let mut log_scale = T::zero();
    for j in 1..=n {
        let s = (0..=n)
            .filter(|&i| i != j)
            .map(|i| w.get(i, j))
            .fold(T::zero(), T::max);
        if s == T::zero() {
            return Err(Error::SingularSystem(format!("token {j} has no incoming weight")));
        }
        log_scale += s.ln();
        for i in 0..=n {
            scaled[[i, j]] /= s;
        }
    }
    Ok((scaled, log_scale))
}

fn split_root<T: Real>(scaled: &Array2<T>) -> (Array2<T>, Array1<T>) {
    let n = scaled.nrows() - 1;
    let tokens = scaled.slice(ndarray::s![1.., 1..]).to_owned();
    let root = scaled.slice(ndarray::s![0, 1..]).to_owned();
    debug_assert_eq!(root.len(), n);
    (tokens, root)
}

/// Log of the total weight of all single-root spanning arborescences.
pub fn log_partition<T: Real>(w: &EdgeWeights<T>) -> Result<T> {
    let (scaled, log_scale) = column_scaled(w)?;
    let (a, eps) = split_root(&scaled);
    Ok(eliminate(a, eps)?.log_z + log_scale)
}

/// Edge marginals `∂ log Z / ∂ log w[i][j]`, together with `log Z`.
pub fn log_partition_and_marginals<T: Real>(
    w: &EdgeWeights<T>,
) -> Result<(T, EdgeMarginals<T>)> {
    let n = w.n();
    let (scaled, log_scale) = column_scaled(w)?;
    let (a, eps) = split_root(&scaled);
    let elim = eliminate(a, eps)?;
    let (ga, ge) = elim.gradient(n);
    let mut mu = Array2::zeros((n + 1, n + 1));
    for m in 1..=n {
        mu[[0, m]] = scaled[[0, m]] * ge[m - 1];
        for h in 1..=n {
            if h != m {
                mu[[h, m]] = scaled[[h, m]] * ga[[h - 1, m - 1]];
            }
        }
    }
    Ok((elim.log_z + log_scale, EdgeMarginals { mu }))
}

struct Factored<T> {
    scaled: Array2<T>,
    lu: Lu<T>,
    log_scale: T,
}

fn factor<T: Real>(w: &EdgeWeights<T>) -> Result<Factored<T>> {
    let n = w.n();
    let (scaled, log_scale) = column_scaled(w)?;
    let mut lap = Array2::zeros((n, n));
    for j in 1..=n {
        let mut diag = T::zero();
        for i in 1..=n {
            if i != j {
                let v = scaled[[i, j]];
                diag += v;
                lap[[i - 1, j - 1]] = -v;
            }
        }
        lap[[j - 1, j - 1]] = diag;
    }
    for j in 1..=n {
        lap[[0, j - 1]] = scaled[[0, j]];
    }

    let lu = Lu::factor(lap)
        .ok_or_else(|| Error::SingularSystem("root-substituted Laplacian is singular".into()))?;
    Ok(Factored { scaled, lu, log_scale })
}

/// `log Z` as the LU determinant of the root-substituted Laplacian
/// (`L[j][j] = Σ_{i≥1} w[i][j]`, `L[i][j] = -w[i][j]`, row 1 replaced by
/// `w[0][·]`). Loses accuracy once weights saturate.
pub fn log_partition_lu<T: Real>(w: &EdgeWeights<T>) -> Result<T> {
    let f = factor(w)?;
    let (sign, log) = f.lu.log_det();
    if sign <= T::zero() || !log.is_finite() {
        return Err(Error::SingularSystem(format!(
            "tree determinant is not positive (sign {sign}, log {log})"
        )));
    }
    Ok(log + f.log_scale)
}

/// Marginals from the inverse of the root-substituted Laplacian.
pub fn log_partition_and_marginals_lu<T: Real>(
    w: &EdgeWeights<T>,
) -> Result<(T, EdgeMarginals<T>)> {
    let log_z = log_partition_lu(w)?;
    let f = factor(w)?;
    let inv = f.lu.inverse();
    let n = w.n();
    let mut mu = Array2::zeros((n + 1, n + 1));
    for m in 1..=n {
        // Root weights live in row 1 of the substituted matrix.
        mu[[0, m]] = f.scaled[[0, m]] * inv[[m - 1, 0]];
        for h in 1..=n {
            if h == m {
                continue;
            }
            let mut d = T::zero();
            if m != 1 {
                d += inv[[m - 1, m - 1]];
            }
            if h != 1 {
                d -= inv[[m - 1, h - 1]];
            }
            mu[[h, m]] = f.scaled[[h, m]] * d;
        }
    }
    Ok((log_z, EdgeMarginals { mu }))
}

pub fn edge_marginals<T: Real>(w: &EdgeWeights<T>) -> Result<EdgeMarginals<T>> {
    log_partition_and_marginals(w).map(|(_, mu)| mu)
}

/// Sum of log weights of the tree's edges; `-inf` if any edge has weight 0.
pub fn tree_log_weight<T: Real>(w: &EdgeWeights<T>, tree: &DepTree) -> Result<T> {
    check_tree_size(w, tree)?;
    Ok(tree.edges().map(|(h, d)| w.get(h, d).ln()).sum())
}

/// `log q(tree)` under the Gibbs distribution over single-root trees.
pub fn tree_log_prob<T: Real>(w: &EdgeWeights<T>, tree: &DepTree) -> Result<T> {
    let numerator = tree_log_weight(w, tree)?;
    let log_z = log_partition(w)?;
    if numerator == T::neg_infinity() {
        return Ok(numerator);
    }
    // Rounding may push a near-certain tree a hair above zero.
    Ok((numerator - log_z).min(T::zero()))
}

pub(crate) fn check_tree_size<T: Real>(w: &EdgeWeights<T>, tree: &DepTree) -> Result<()> {
    if tree.len() != w.n() {
        return Err(Error::Dimension(format!(
            "tree has {} tokens, weights have {}",
            tree.len(),
            w.n()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn single_token() {
        let w = EdgeWeights::new(array![[0.0, 1.0], [0.0, 0.0]]).unwrap();
        assert_eq!(log_partition(&w).unwrap(), 0.0);
        let mu = edge_marginals(&w).unwrap();
        assert_eq!(mu.get(0, 1), 1.0);
    }

    #[test]
    fn two_tokens_uniform_half() {
        // Two trees, each of weight 0.25.
        let w = EdgeWeights::uniform(2, 0.5).unwrap();
        assert!((log_partition(&w).unwrap() - 0.5f64.ln()).abs() < 1e-14);
        let mu = edge_marginals(&w).unwrap();
        for (h, d) in [(0, 1), (0, 2), (1, 2), (2, 1)] {
            assert!((mu.get(h, d) - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn three_tokens_uniform() {
        let c = 0.3f64;
        let w = EdgeWeights::uniform(3, c).unwrap();
        let want = 3.0 * c.ln() + 9f64.ln();
        assert!((log_partition(&w).unwrap() - want).abs() < 1e-12);
        let tree = DepTree::new(vec![0, 1, 1]).unwrap();
        assert!((tree_log_prob(&w, &tree).unwrap() - (1.0f64 / 9.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn zero_weight_edge_gives_neg_infinity() {
        let mut m = EdgeWeights::uniform(3, 1.0).unwrap().into_matrix();
        m[[1, 2]] = 0.0;
        let w = EdgeWeights::new(m).unwrap();
        let tree = DepTree::new(vec![0, 1, 2]).unwrap();
        assert_eq!(tree_log_prob(&w, &tree).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn no_root_weight_is_singular() {
        let mut m = EdgeWeights::uniform(3, 1.0).unwrap().into_matrix();
        m.row_mut(0).fill(0.0);
        let w = EdgeWeights::new(m).unwrap();
        assert!(matches!(log_partition(&w), Err(Error::SingularSystem(_))));
    }

    #[test]
    fn tree_size_mismatch() {
        let w = EdgeWeights::uniform(3, 1.0).unwrap();
        let tree = DepTree::new(vec![0, 1]).unwrap();
        assert!(matches!(tree_log_prob(&w, &tree), Err(Error::Dimension(_))));
    }

    #[test]
    fn survives_tiny_weights() {
        // Raw determinant would underflow: 40 tokens with weights near 1e-300.
        let w = EdgeWeights::uniform(40, 1e-300).unwrap();
        let lz = log_partition(&w).unwrap();
        let want = 40.0 * 1e-300f64.ln() + 39.0 * 40f64.ln();
        assert!((lz - want).abs() < 1e-8 * want.abs());
    }

    fn brute(w: &EdgeWeights<f64>) -> (f64, Array2<f64>) {
        let n = w.n();
        let mut z = 0.0;
        let mut mu = Array2::zeros((n + 1, n + 1));
        for t in crate::spantree::enumerate_trees(n).unwrap() {
            let p: f64 = t.edges().map(|(h, d)| w.get(h, d)).product();
            z += p;
            for (h, d) in t.edges() {
                mu[[h, d]] += p;
            }
        }
        (z.ln(), mu / z)
    }

    fn lcg(state: &mut u64) -> f64 {
        *state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (*state >> 11) as f64 / (1u64 << 53) as f64
    }

    #[test]
    fn routes_agree_on_random_weights() {
        let mut st = 7;
        for n in 1..=6 {
            for _ in 0..20 {
                let mut m = Array2::zeros((n + 1, n + 1));
                for h in 0..=n {
                    for d in 1..=n {
                        if h != d {
                            m[[h, d]] = 0.05 + lcg(&mut st);
                        }
                    }
                }
                let w = EdgeWeights::new(m).unwrap();
                let (bz, bmu) = brute(&w);
                let (z, mu) = log_partition_and_marginals(&w).unwrap();
                let (lz, lmu) = log_partition_and_marginals_lu(&w).unwrap();
                assert!((z - bz).abs() <= 1e-12 * bz.abs().max(1.0));
                assert!((lz - bz).abs() <= 1e-12 * bz.abs().max(1.0));
                for (a, b) in mu.matrix().iter().zip(bmu.iter()) {
                    assert!((a - b).abs() < 1e-12, "{a} vs {b}");
                }
                for (a, b) in lmu.matrix().iter().zip(bmu.iter()) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn saturated_cycle_stays_accurate() {
        // Greedy heads 1→2→3→1 dominate; every tree must break the cycle
        // through a weight of 1e-12, so the determinant cancels.
        let big = 1.0;
        let small = 1e-12;
        let mut m = Array2::from_elem((4, 4), small * small);
        for i in 0..4 {
            m[[i, 0]] = 0.0;
            m[[i, i]] = 0.0;
        }
        m[[1, 2]] = big;
        m[[2, 3]] = big;
        m[[3, 1]] = big;
        m[[0, 1]] = small;
        m[[0, 2]] = small;
        m[[0, 3]] = small;
        let w = EdgeWeights::new(m).unwrap();
        let (bz, bmu) = brute(&w);
        let (z, mu) = log_partition_and_marginals(&w).unwrap();
        assert!((z - bz).abs() < 1e-12 * bz.abs(), "{z} vs {bz}");
        for (a, b) in mu.matrix().iter().zip(bmu.iter()) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn two_unreachable_tokens_are_singular() {
        let mut m = Array2::zeros((4, 4));
        m[[0, 1]] = 1.0;
        m[[0, 2]] = 1.0;
        m[[1, 3]] = 1.0;
        let w = EdgeWeights::new(m).unwrap();
        assert!(matches!(log_partition(&w), Err(Error::SingularSystem(_))));
    }
}
