// Test-only oracles shared by the integration tests and the acceptance suite.
#![allow(dead_code)]

use ndarray::Array2;
use probekit::probes::{ProbeShape, SentenceReprs};
use probekit::spantree::{enumerate_trees, DepTree, EdgeWeights};
use probekit::train::{loss_gradient, sentence_loss};
use probekit::ProbeParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const FD_STEP: f64 = 1e-5;
pub const FD_REL_TOL: f64 = 1e-4;
/// Denominator floor for the relative error of near-zero coordinates.
pub const FD_FLOOR: f64 = 1e-6;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random positive weights in `[0.05, 1.05)` on every legal edge.
pub fn random_weights(n: usize, rng: &mut ChaCha8Rng) -> EdgeWeights<f64> {
    let m = Array2::from_shape_fn((n + 1, n + 1), |_| 0.05 + rng.random::<f64>());
    EdgeWeights::from_masked(m).unwrap()
}

pub fn tree_weight(w: &EdgeWeights<f64>, t: &DepTree) -> f64 {
    t.edges().map(|(h, d)| w.get(h, d)).product()
}

/// Brute-force partition function over all enumerated trees.
pub fn brute_partition(w: &EdgeWeights<f64>) -> f64 {
    enumerate_trees(w.n()).unwrap().iter().map(|t| tree_weight(w, t)).sum()
}

/// Brute-force edge marginals `Σ_a p(a)·1[(i,j) ∈ a]`.
pub fn brute_marginals(w: &EdgeWeights<f64>) -> Array2<f64> {
    let n = w.n();
    let trees = enumerate_trees(n).unwrap();
    let z: f64 = trees.iter().map(|t| tree_weight(w, t)).sum();
    let mut mu = Array2::zeros((n + 1, n + 1));
    for t in &trees {
        let p = tree_weight(w, t) / z;
        for (h, d) in t.edges() {
            mu[[h, d]] += p;
        }
    }
    mu
}

/// Brute-force argmax tree with the lexicographic tie-break.
pub fn brute_map(w: &EdgeWeights<f64>) -> DepTree {
    let mut best: Option<(f64, DepTree)> = None;
    for t in enumerate_trees(w.n()).unwrap() {
        let s = tree_weight(w, &t);
        if best.as_ref().is_none_or(|(b, _)| s > *b) {
            best = Some((s, t));
        }
    }
    best.unwrap().1
}

pub fn random_reprs(n: usize, d1: usize, rng: &mut ChaCha8Rng) -> SentenceReprs<f64> {
    let tokens = Array2::from_shape_simple_fn((n, d1), || rng.sample::<f64, _>(StandardNormal));
    SentenceReprs::from_tokens(0, tokens.view()).unwrap()
}

pub fn random_tree(n: usize, rng: &mut ChaCha8Rng) -> DepTree {
    let trees = enumerate_trees(n).unwrap();
    trees[rng.random_range(0..trees.len())].clone()
}

pub fn small_shape(d1: usize, mlp_layers: usize, max_len: usize) -> ProbeShape {
    ProbeShape {
        d1,
        d2: 3,
        mlp_layers,
        mlp_hidden: if mlp_layers > 0 { 4 } else { 0 },
        max_len,
    }
}

pub struct FdReport {
    pub coords: usize,
    /// Coordinates skipped because a ReLU hinge lies within the step: the
    /// two one-sided slopes disagree there and no finite difference is valid.
    pub kinks: usize,
    pub max_rel_err: f64,
}

/// Compares the analytic gradient with central finite differences on every
/// parameter coordinate.
pub fn fd_check(params: &ProbeParams<f64>, reprs: &SentenceReprs<f64>, gold: &DepTree) -> FdReport {
    let (l0, grad) = loss_gradient(params, reprs, gold).unwrap();
    let analytic: Vec<f64> = grad.tensors().iter().flat_map(|t| t.iter().copied()).collect();
    let mut max_rel_err = 0f64;
    let mut kinks = 0;
    let mut k_all = 0;
    for t in 0..params.tensors().len() {
        for k in 0..params.tensors()[t].len() {
            let mut plus = params.clone();
            let mut minus = params.clone();
            plus.tensors_mut()[t].as_slice_mut().unwrap()[k] += FD_STEP;
            minus.tensors_mut()[t].as_slice_mut().unwrap()[k] -= FD_STEP;
            let lp = sentence_loss(&plus, reprs, gold).unwrap();
            let lm = sentence_loss(&minus, reprs, gold).unwrap();
            let (right, left) = ((lp - l0) / FD_STEP, (l0 - lm) / FD_STEP);
            let a = analytic[k_all];
            k_all += 1;
            if (right - left).abs() > 1e-2 * right.abs().max(left.abs()).max(1e-2) {
                kinks += 1;
                continue;
            }
            let numeric = (lp - lm) / (2.0 * FD_STEP);
            max_rel_err = max_rel_err.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(FD_FLOOR));
        }
    }
    FdReport { coords: analytic.len(), kinks, max_rel_err }
}
