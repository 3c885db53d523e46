//! Maximum-weight single-root arborescence (Chu-Liu-Edmonds).
//!
//! Edge scores are lexicographic triples: minus the number of root
//! attachments, the log weight, and an exact integer key that ranks equal-
//! weight trees by their head vector. The integer key of edge `h → j` is
//! `-h·B^(n-j)` with `B = n + 1`, so the key of a whole tree is minus its
//! head vector read as a base-`B` number. The first component enforces the
//! single-root constraint; the last makes the optimum unique and equal to
//! the lexicographically smallest head vector among all maxima.

use std::cmp::Ordering;

use num_bigint::BigInt;

use super::tree::DepTree;
use super::weights::EdgeWeights;
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Debug)]
struct Score<T> {
    roots: i64,
    log_weight: T,
    key: BigInt,
}

impl<T: Real> Score<T> {
    fn sub(&self, other: &Self) -> Self {
        Score {
            roots: self.roots - other.roots,
            log_weight: self.log_weight - other.log_weight,
            key: &self.key - &other.key,
        }
    }

    fn cmp(&self, other: &Self) -> Ordering {
        self.roots
            .cmp(&other.roots)
            .then_with(|| {
                self.log_weight
                    .partial_cmp(&other.log_weight)
                    .unwrap_or(Ordering::Equal)
            })
            .then_with(|| self.key.cmp(&other.key))
    }
}

type ScoreMatrix<T> = Vec<Vec<Option<Score<T>>>>;

/// The argmax-weight single-root tree; ties go to the lexicographically
/// smallest head vector.
pub fn map_tree<T: Real>(w: &EdgeWeights<T>) -> Result<DepTree> {
    let n = w.n();
    let base = BigInt::from(n + 1);
    let mut place = vec![BigInt::from(1); n + 1];
    // place[j] = B^(n-j)
    for j in (1..n).rev() {
        place[j] = &place[j + 1] * &base;
    }

    let mut scores: ScoreMatrix<T> = vec![vec![None; n + 1]; n + 1];
    for (h, row) in scores.iter_mut().enumerate() {
        for (d, cell) in row.iter_mut().enumerate().skip(1) {
            if h == d {
                continue;
            }
            let v = w.get(h, d);
            if v > T::zero() {
                *cell = Some(Score {
                    roots: if h == 0 { -1 } else { 0 },
                    log_weight: v.ln(),
                    key: -(&place[d] * BigInt::from(h)),
                });
            }
        }
    }

    let parents = chu_liu_edmonds(&scores)
        .ok_or_else(|| Error::SingularSystem("no spanning tree with positive weight".into()))?;
    let heads: Vec<usize> = parents[1..].to_vec();
    let roots = heads.iter().filter(|&&h| h == 0).count();
    if roots != 1 {
        return Err(Error::SingularSystem(
            "no single-root tree with positive weight".into(),
        ));
    }
    Ok(DepTree::from_heads_unchecked(heads))
}

fn find_cycle(parent: &[usize]) -> Option<Vec<usize>> {
    let m = parent.len();
    let mut state = vec![0u8; m];
    state[0] = 2;
    for start in 1..m {
        if state[start] != 0 {
            continue;
        }
        let mut path = Vec::new();
        let mut v = start;
        while state[v] == 0 {
            state[v] = 1;
            path.push(v);
            v = parent[v];
        }
        if state[v] == 1 {
            let pos = path.iter().position(|&u| u == v).unwrap();
            return Some(path[pos..].to_vec());
        }
        for u in path {
            state[u] = 2;
        }
    }
    None
}

fn chu_liu_edmonds<T: Real>(scores: &ScoreMatrix<T>) -> Option<Vec<usize>> {
    let m = scores.len();
    let mut best = vec![0usize; m];
    for v in 1..m {
        let mut arg: Option<usize> = None;
        for u in 0..m {
            if u == v {
                continue;
            }
            if let Some(s) = &scores[u][v] {
                let better = match arg {
                    None => true,
                    Some(a) => s.cmp(scores[a][v].as_ref().unwrap()) == Ordering::Greater,
                };
                if better {
                    arg = Some(u);
                }
            }
        }
        best[v] = arg?;
    }

    let cycle = match find_cycle(&best) {
        None => return Some(best),
        Some(c) => c,
    };

    let mut in_cycle = vec![false; m];
    for &v in &cycle {
        in_cycle[v] = true;
    }
    let mut new_id = vec![0usize; m];
    let mut old_of_new = Vec::with_capacity(m);
    for v in 0..m {
        if !in_cycle[v] {
            new_id[v] = old_of_new.len();
            old_of_new.push(v);
        }
    }
    let c = old_of_new.len();
    for &v in &cycle {
        new_id[v] = c;
    }
    let mm = c + 1;

    let mut contracted: ScoreMatrix<T> = vec![vec![None; mm]; mm];
    let mut enter_via = vec![usize::MAX; mm];
    let mut leave_via = vec![usize::MAX; mm];
    for (nu, &u) in old_of_new.iter().enumerate() {
        for (nx, &x) in old_of_new.iter().enumerate() {
            if u != x {
                contracted[nu][nx] = scores[u][x].clone();
            }
        }
        // u → cycle: gain of replacing v's cycle edge by u → v.
        let mut best_in: Option<(Score<T>, usize)> = None;
        for &v in &cycle {
            if let (Some(s), Some(kept)) = (&scores[u][v], &scores[best[v]][v]) {
                let adj = s.sub(kept);
                if best_in.as_ref().is_none_or(|(b, _)| adj.cmp(b) == Ordering::Greater) {
                    best_in = Some((adj, v));
                }
            }
        }
        if let Some((s, v)) = best_in {
            contracted[nu][c] = Some(s);
            enter_via[nu] = v;
        }
        // cycle → u
        if u != 0 {
            let mut best_out: Option<(Score<T>, usize)> = None;
            for &v in &cycle {
                if let Some(s) = &scores[v][u] {
                    if best_out.as_ref().is_none_or(|(b, _)| s.cmp(b) == Ordering::Greater) {
                        best_out = Some((s.clone(), v));
                    }
                }
            }
            if let Some((s, v)) = best_out {
                contracted[c][nu] = Some(s);
                leave_via[nu] = v;
            }
        }
    }

    let sub = chu_liu_edmonds(&contracted)?;
    let mut parents = best;
    for (nx, &x) in old_of_new.iter().enumerate().skip(1) {
        let p = sub[nx];
        parents[x] = if p == c { leave_via[nx] } else { old_of_new[p] };
    }
    let nu = sub[c];
    parents[enter_via[nu]] = old_of_new[nu];
    Some(parents)
}

/// Score of a complete tree as the sum of its edge scores.
#[cfg(test)]
fn tree_score<T: Real>(w: &EdgeWeights<T>, tree: &DepTree) -> (i64, T, BigInt) {
    let n = w.n();
    let base = BigInt::from(n + 1);
    let mut key = BigInt::from(0);
    for &h in tree.heads() {
        key = key * &base + BigInt::from(h);
    }
    let log_w = tree.edges().map(|(h, d)| w.get(h, d).ln()).sum();
    (-1, log_w, -key)
}
