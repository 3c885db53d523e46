//! Forward and reverse passes for every probe family.
//!
//! Logits are indexed `alpha[i][j]` = score of head `i` for dependent `j`,
//! over the root (index 0) plus tokens. Backward passes take `∂L/∂alpha`
//! with zeros in masked cells and accumulate parameter gradients.

use ndarray::{s, Array2, Axis};
use rand::{Rng, RngCore};

use super::params::{AttentionalParams, BiaffineParams, MlpLayer, ProbeParams, Scorer, StructuralParams};
use super::reprs::SentenceReprs;
use super::softmax::{mask_logits, weights_from_logits};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::spantree::EdgeWeights;

/// Whether dropout is active.
pub enum Mode<'a> {
    Eval,
    Train { rng: &'a mut dyn RngCore, dropout: f64 },
}

impl Mode<'_> {
    fn mask<T: Real>(&mut self, dim: (usize, usize)) -> Option<Array2<T>> {
        match self {
            Mode::Train { rng, dropout } if *dropout > 0.0 => {
                let p = *dropout;
                let keep = T::of(1.0 / (1.0 - p));
                Some(Array2::from_shape_simple_fn(dim, || {
                    if rng.random::<f64>() < p { T::zero() } else { keep }
                }))
            }
            _ => None,
        }
    }

    fn drop<T: Real>(&mut self, x: Array2<T>) -> (Array2<T>, Option<Array2<T>>) {
        match self.mask(x.dim()) {
            Some(m) => (&x * &m, Some(m)),
            None => (x, None),
        }
    }
}

fn apply_mask<T: Real>(g: Array2<T>, mask: &Option<Array2<T>>) -> Array2<T> {
    match mask {
        Some(m) => g * m,
        None => g,
    }
}

pub(crate) struct AttnCache<T> {
    x: Array2<T>,
    m_in: Option<Array2<T>>,
    keys: Array2<T>,
    queries: Array2<T>,
    m_k: Option<Array2<T>>,
    m_q: Option<Array2<T>>,
}

fn attn_forward<T: Real>(p: &AttentionalParams<T>, x: &Array2<T>, mode: &mut Mode) -> (Array2<T>, AttnCache<T>) {
    let (x, m_in) = mode.drop(x.clone());
    let (keys, m_k) = mode.drop(x.dot(&p.key.t()));
    let (queries, m_q) = mode.drop(x.dot(&p.query.t()));
    let alpha = keys.dot(&queries.t());
    (alpha, AttnCache { x, m_in, keys, queries, m_k, m_q })
}

fn attn_backward<T: Real>(
    p: &AttentionalParams<T>,
    c: &AttnCache<T>,
    d_alpha: &Array2<T>,
    g: &mut AttentionalParams<T>,
) -> Array2<T> {
    let d_keys = apply_mask(d_alpha.dot(&c.queries), &c.m_k);
    let d_queries = apply_mask(d_alpha.t().dot(&c.keys), &c.m_q);
    g.key += &d_keys.t().dot(&c.x);
    g.query += &d_queries.t().dot(&c.x);
    apply_mask(d_keys.dot(&p.key) + d_queries.dot(&p.query), &c.m_in)
}

pub(crate) struct StructCache<T> {
    x: Array2<T>,
    m_in: Option<Array2<T>>,
    proj: Array2<T>,
    m_b: Option<Array2<T>>,
}

fn struct_forward<T: Real>(p: &StructuralParams<T>, x: &Array2<T>, mode: &mut Mode) -> (Array2<T>, StructCache<T>) {
    let (x, m_in) = mode.drop(x.clone());
    // One mask for the shared projection keeps the logits symmetric.
    let (proj, m_b) = mode.drop(x.dot(&p.proj.t()));
    let alpha = proj.dot(&proj.t());
    (alpha, StructCache { x, m_in, proj, m_b })
}

fn struct_backward<T: Real>(
    p: &StructuralParams<T>,
    c: &StructCache<T>,
    d_alpha: &Array2<T>,
    g: &mut StructuralParams<T>,
) -> Array2<T> {
    let sym = d_alpha + &d_alpha.t();
    let d_proj = apply_mask(sym.dot(&c.proj), &c.m_b);
    g.proj += &d_proj.t().dot(&c.x);
    apply_mask(d_proj.dot(&p.proj), &c.m_in)
}

pub(crate) struct MlpCache<T> {
    inputs: Vec<Array2<T>>,
    pre: Vec<Array2<T>>,
    masks: Vec<Option<Array2<T>>>,
}

fn mlp_forward<T: Real>(layers: &[MlpLayer<T>], x: &Array2<T>, mode: &mut Mode) -> (Array2<T>, MlpCache<T>) {
    let mut cache = MlpCache { inputs: Vec::new(), pre: Vec::new(), masks: Vec::new() };
    let mut h = x.clone();
    for l in layers {
        let z = h.dot(&l.weight.t()) + &l.bias;
        let (out, mask) = mode.drop(z.mapv(|v| v.max(T::zero())));
        cache.inputs.push(std::mem::replace(&mut h, out));
        cache.pre.push(z);
        cache.masks.push(mask);
    }
    (h, cache)
}

fn mlp_backward<T: Real>(
    layers: &[MlpLayer<T>],
    c: &MlpCache<T>,
    d_out: Array2<T>,
    g: &mut [MlpLayer<T>],
) -> Array2<T> {
    let mut d = d_out;
    for k in (0..layers.len()).rev() {
        let mut dz = apply_mask(d, &c.masks[k]);
        dz.zip_mut_with(&c.pre[k], |g, &z| {
            if z <= T::zero() {
                *g = T::zero();
            }
        });
        g[k].weight += &dz.t().dot(&c.inputs[k]);
        g[k].bias += &dz.sum_axis(Axis(0)).insert_axis(Axis(0));
        d = dz.dot(&layers[k].weight);
    }
    d
}

pub(crate) struct BiaffineCache<T> {
    m_in: Option<Array2<T>>,
    head: Array2<T>,
    dep: Array2<T>,
    head_cache: MlpCache<T>,
    dep_cache: MlpCache<T>,
}

fn biaffine_forward<T: Real>(p: &BiaffineParams<T>, x: &Array2<T>, mode: &mut Mode) -> (Array2<T>, BiaffineCache<T>) {
    let (x, m_in) = mode.drop(x.clone());
    let (head, head_cache) = mlp_forward(&p.head_mlp, &x, mode);
    let (dep, dep_cache) = mlp_forward(&p.dep_mlp, &x, mode);
    let alpha = head.dot(&p.bilinear).dot(&dep.t());
    (alpha, BiaffineCache { m_in, head, dep, head_cache, dep_cache })
}

fn biaffine_backward<T: Real>(
    p: &BiaffineParams<T>,
    c: &BiaffineCache<T>,
    d_alpha: &Array2<T>,
    g: &mut BiaffineParams<T>,
) -> Array2<T> {
    let da_dep = d_alpha.dot(&c.dep);
    g.bilinear += &c.head.t().dot(&da_dep);
    let d_head = da_dep.dot(&p.bilinear.t());
    let d_dep = d_alpha.t().dot(&c.head).dot(&p.bilinear);
    let dx = mlp_backward(&p.head_mlp, &c.head_cache, d_head, &mut g.head_mlp)
        + mlp_backward(&p.dep_mlp, &c.dep_cache, d_dep, &mut g.dep_mlp);
    apply_mask(dx, &c.m_in)
}

pub(crate) enum Cache<T> {
    Attentional(AttnCache<T>),
    Structural(StructCache<T>),
    Biaffine(BiaffineCache<T>),
}

pub(crate) struct Forward<T> {
    /// Masked logits.
    pub alpha: Array2<T>,
    pub cache: Cache<T>,
    pub n: usize,
}

impl<T: Real> ProbeParams<T> {
    fn input(&self, reprs: &SentenceReprs<T>) -> Result<Array2<T>> {
        match &self.positions {
            Some(_) => Ok(positional_reprs(self, reprs.n())?.vectors().clone()),
            None => {
                if reprs.d1() != self.d1() {
                    return Err(Error::Dimension(format!(
                        "probe expects d1 = {}, representations have {}",
                        self.d1(),
                        reprs.d1()
                    )));
                }
                Ok(reprs.vectors().clone())
            }
        }
    }

    pub(crate) fn forward(&self, reprs: &SentenceReprs<T>, mode: &mut Mode) -> Result<Forward<T>> {
        let x = self.input(reprs)?;
        let (mut alpha, cache) = match &self.scorer {
            Scorer::Attentional(p) => {
                let (a, c) = attn_forward(p, &x, mode);
                (a, Cache::Attentional(c))
            }
            Scorer::Structural(p) => {
                let (a, c) = struct_forward(p, &x, mode);
                (a, Cache::Structural(c))
            }
            Scorer::Biaffine(p) => {
                let (a, c) = biaffine_forward(p, &x, mode);
                (a, Cache::Biaffine(c))
            }
        };
        mask_logits(&mut alpha);
        Ok(Forward { alpha, cache, n: reprs.n() })
    }

    /// Accumulates parameter gradients for `∂L/∂alpha` into `grad`.
    pub(crate) fn backward(&self, fwd: &Forward<T>, d_alpha: &Array2<T>, grad: &mut ProbeParams<T>) {
        let dx = match (&self.scorer, &fwd.cache, &mut grad.scorer) {
            (Scorer::Attentional(p), Cache::Attentional(c), Scorer::Attentional(g)) => attn_backward(p, c, d_alpha, g),
            (Scorer::Structural(p), Cache::Structural(c), Scorer::Structural(g)) => struct_backward(p, c, d_alpha, g),
            (Scorer::Biaffine(p), Cache::Biaffine(c), Scorer::Biaffine(g)) => biaffine_backward(p, c, d_alpha, g),
            _ => unreachable!("gradient layout does not match parameters"),
        };
        if let Some(gp) = &mut grad.positions {
            let mut rows = gp.slice_mut(s![..=fwd.n, ..]);
            rows += &dx;
        }
    }

    /// Masked logits in evaluation mode.
    pub fn logits(&self, reprs: &SentenceReprs<T>) -> Result<Array2<T>> {
        Ok(self.forward(reprs, &mut Mode::Eval)?.alpha)
    }

    /// Softmaxed edge weights in evaluation mode.
    pub fn edge_weights(&self, reprs: &SentenceReprs<T>) -> Result<EdgeWeights<T>> {
        weights_from_logits(&self.logits(reprs)?)
    }
}

fn check_d1<T: Real>(want: usize, reprs: &SentenceReprs<T>) -> Result<()> {
    if reprs.d1() != want {
        return Err(Error::Dimension(format!(
            "probe expects d1 = {want}, representations have {}",
            reprs.d1()
        )));
    }
    Ok(())
}

/// `alpha[i][j] = (K r_i)·(Q r_j)`, root column and diagonal masked.
pub fn attn_logits<T: Real>(p: &AttentionalParams<T>, reprs: &SentenceReprs<T>) -> Result<Array2<T>> {
    if p.key.dim() != p.query.dim() || p.key.nrows() == 0 {
        return Err(Error::Dimension(format!(
            "key {:?} and query {:?} must share a nonempty shape",
            p.key.dim(),
            p.query.dim()
        )));
    }
    check_d1(p.key.ncols(), reprs)?;
    let (mut alpha, _) = attn_forward(p, reprs.vectors(), &mut Mode::Eval);
    mask_logits(&mut alpha);
    Ok(alpha)
}

/// `alpha[i][j] = (B r_i)·(B r_j)`, root column and diagonal masked.
pub fn structural_logits<T: Real>(p: &StructuralParams<T>, reprs: &SentenceReprs<T>) -> Result<Array2<T>> {
    check_d1(p.proj.ncols(), reprs)?;
    let (mut alpha, _) = struct_forward(p, reprs.vectors(), &mut Mode::Eval);
    mask_logits(&mut alpha);
    Ok(alpha)
}

/// `alpha[i][j] = MLP_head(r_i)ᵀ W MLP_dep(r_j)` in evaluation mode.
pub fn biaffine_logits<T: Real>(p: &BiaffineParams<T>, reprs: &SentenceReprs<T>) -> Result<Array2<T>> {
    check_d1(p.d1(), reprs)?;
    let (mut alpha, _) = biaffine_forward(p, reprs.vectors(), &mut Mode::Eval);
    mask_logits(&mut alpha);
    Ok(alpha)
}

/// The first `n+1` position embeddings of a positional probe, used in place
/// of contextual vectors. Row 0 is the learned root position.
pub fn positional_reprs<T: Real>(params: &ProbeParams<T>, n: usize) -> Result<SentenceReprs<T>> {
    let pos = params
        .positions
        .as_ref()
        .ok_or_else(|| Error::Config("probe has no position embeddings".into()))?;
    let max_len = pos.nrows() - 1;
    if n > max_len {
        return Err(Error::SizeLimit(format!(
            "sentence of {n} tokens exceeds positional max_len {max_len}"
        )));
    }
    SentenceReprs::with_root(0, pos.slice(s![..=n, ..]).to_owned())
}
