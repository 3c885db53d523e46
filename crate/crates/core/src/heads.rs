//! Frozen attention heads and branching baselines used as parsers.

use std::io::{Read, Write};
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifest::RunManifest;
use crate::spantree::{map_tree, DepTree, EdgeWeights};
use crate::treebank::{align_attn, AttnFile, Corpus};

/// Weight given to every root attachment when decoding a head; attention
/// carries no root weight, but a single-root tree must exist.
pub const ROOT_EPSILON: f64 = 1e-6;

/// Fraction of tokens whose predicted head matches.
pub fn uas(pred: &DepTree, gold: &DepTree) -> Result<f64> {
    uas_heads(pred.heads(), gold.heads())
}

pub fn uas_heads(pred: &[usize], gold: &[usize]) -> Result<f64> {
    let (hits, total) = attachment_counts(pred, gold)?;
    Ok(hits as f64 / total as f64)
}

fn attachment_counts(pred: &[usize], gold: &[usize]) -> Result<(usize, usize)> {
    if pred.len() != gold.len() || gold.is_empty() {
        return Err(Error::Dimension(format!(
            "predicted {} heads for a {}-token gold tree",
            pred.len(),
            gold.len()
        )));
    }
    Ok((pred.iter().zip(gold).filter(|(a, b)| a == b).count(), gold.len()))
}

/// Token-weighted UAS over `(predicted heads, gold heads)` pairs.
pub fn corpus_uas<'a>(pairs: impl IntoIterator<Item = (&'a [usize], &'a [usize])>) -> Result<f64> {
    let mut hits = 0;
    let mut total = 0;
    for (p, g) in pairs {
        let (h, t) = attachment_counts(p, g)?;
        hits += h;
        total += t;
    }
    if total == 0 {
        return Err(Error::EmptyDataset("no sentences to score".into()));
    }
    Ok(hits as f64 / total as f64)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decoder {
    /// Highest-weight single-root tree.
    #[default]
    Map,
    /// Independent argmax per token; need not form a tree.
    Greedy,
}

impl FromStr for Decoder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "map" => Ok(Decoder::Map),
            "greedy" => Ok(Decoder::Greedy),
            _ => Err(Error::Config(format!("unknown decoder {s:?}, expected map or greedy"))),
        }
    }
}

/// Edge weights from one `n×n` attention matrix: `w[i][j] = A[i-1][j-1]`
/// off the diagonal, [`ROOT_EPSILON`] on the root row, zero root column.
pub fn head_weights(attn: ArrayView2<'_, f32>) -> Result<EdgeWeights<f64>> {
    let n = attn.nrows();
    if attn.ncols() != n || n == 0 {
        return Err(Error::Dimension(format!("attention matrix is {:?}", attn.dim())));
    }
    let mut w = Array2::zeros((n + 1, n + 1));
    for j in 1..=n {
        w[[0, j]] = ROOT_EPSILON;
        for i in 1..=n {
            if i != j {
                w[[i, j]] = f64::from(attn[[i - 1, j - 1]]);
            }
        }
    }
    EdgeWeights::new(w)
}

/// Predicted head vector for one attention matrix.
pub fn decode_head(attn: ArrayView2<'_, f32>, decoder: Decoder) -> Result<Vec<usize>> {
    let w = head_weights(attn)?;
    match decoder {
        Decoder::Map => Ok(map_tree(&w)?.into_heads()),
        Decoder::Greedy => Ok((1..=w.n())
            .map(|j| {
                let mut best = 0;
                for i in 1..=w.n() {
                    if i != j && w.get(i, j) > w.get(best, j) {
                        best = i;
                    }
                }
                best
            })
            .collect()),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeadScore {
    pub layer: usize,
    pub head: usize,
    /// Position within its layer, 1 for the least accurate head.
    pub rank: usize,
    pub uas: f64,
}

/// Corpus UAS of one head.
pub fn head_as_parser(attn: &AttnFile, corpus: &Corpus, layer: usize, head: usize, decoder: Decoder) -> Result<f64> {
    if layer >= attn.n_layers || head >= attn.n_heads {
        return Err(Error::Dimension(format!(
            "head ({layer}, {head}) outside {} layers × {} heads",
            attn.n_layers, attn.n_heads
        )));
    }
    let joined = align_attn(corpus, attn)?;
    let preds: Vec<Vec<usize>> = joined
        .pairs
        .par_iter()
        .map(|(_, a)| decode_head(a.matrix(layer, head, attn.n_heads), decoder))
        .collect::<Result<_>>()?;
    corpus_uas(preds.iter().zip(&joined.pairs).map(|(p, (s, _))| (p.as_slice(), s.gold.heads())))
}

/// Scores every head of every layer and ranks heads within each layer.
/// Equal scores rank the lower head index first.
pub fn score_heads(attn: &AttnFile, corpus: &Corpus, decoder: Decoder) -> Result<Vec<HeadScore>> {
    let mut out = Vec::with_capacity(attn.n_layers * attn.n_heads);
    for layer in 0..attn.n_layers {
        let mut scores: Vec<HeadScore> = (0..attn.n_heads)
            .map(|head| {
                Ok(HeadScore { layer, head, rank: 0, uas: head_as_parser(attn, corpus, layer, head, decoder)? })
            })
            .collect::<Result<_>>()?;
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[a].uas.total_cmp(&scores[b].uas).then(a.cmp(&b)));
        for (r, &k) in order.iter().enumerate() {
            scores[k].rank = r + 1;
        }
        out.extend(scores);
    }
    Ok(out)
}

/// CSV with columns `layer,head,rank,uas`, optionally preceded by a `#`
/// line holding the run manifest.
pub fn write_heads_csv<W: Write>(mut w: W, scores: &[HeadScore], manifest: Option<&RunManifest>) -> Result<()> {
    write_manifest_line(&mut w, manifest)?;
    let mut wr = csv::Writer::from_writer(w);
    for s in scores {
        wr.serialize(s).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_heads_csv<R: Read>(r: R) -> Result<Vec<HeadScore>> {
    let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
    rd.deserialize()
        .enumerate()
        .map(|(k, row)| row.map_err(|e| Error::Parse { line: k + 2, msg: e.to_string() }))
        .collect()
}

pub(crate) fn write_manifest_line<W: Write>(w: &mut W, manifest: Option<&RunManifest>) -> Result<()> {
    if let Some(m) = manifest {
        writeln!(w, "# {}", m.to_json())?;
    }
    Ok(())
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse { line: 0, msg: format!("{other:?}") },
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branching {
    Left,
    Right,
}

impl FromStr for Branching {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "left" => Ok(Branching::Left),
            "right" => Ok(Branching::Right),
            _ => Err(Error::Config(format!("unknown direction {s:?}"))),
        }
    }
}

/// Right: every token heads the next one. Left: every token is headed by
/// the next one.
pub fn branching_baseline(direction: Branching, n: usize) -> Result<DepTree> {
    if n == 0 {
        return Err(Error::InvalidTree("empty sentence".into()));
    }
    let heads = match direction {
        Branching::Right => (0..n).collect(),
        Branching::Left => (2..=n).chain([0]).collect(),
    };
    DepTree::new(heads)
}

/// Corpus UAS of a branching baseline against gold trees.
pub fn branching_uas<'a>(direction: Branching, gold: impl IntoIterator<Item = &'a DepTree>) -> Result<f64> {
    let gold: Vec<&DepTree> = gold.into_iter().collect();
    let preds = gold
        .iter()
        .map(|g| branching_baseline(direction, g.len()))
        .collect::<Result<Vec<_>>>()?;
    corpus_uas(preds.iter().zip(&gold).map(|(p, g)| (p.heads(), g.heads())))
}
