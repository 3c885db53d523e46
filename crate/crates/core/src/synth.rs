//! Synthetic corpora with known structure, used by tests, the acceptance
//! suite and the `synth` command.

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::Example;
use crate::error::Result;
use crate::probes::{AttentionalParams, ProbeParams, Scorer, SentenceReprs};
use crate::seed::rng_for;
use crate::spantree::{map_tree, DepTree};
use crate::treebank::{format_conllu, AttnFile, AttnSentence, Corpus, ReprFile, ReprSentence, Sentence};

/// Settings of the planted-attention generator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantedConfig {
    pub sentences: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub d1: usize,
    /// Width of the hidden key/query maps.
    pub d2: usize,
    /// Standard deviation of the hidden key/query entries.
    pub scale: f64,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        PlantedConfig { sentences: 2000, min_len: 3, max_len: 12, d1: 32, d2: 16, scale: 0.35, seed: 0 }
    }
}

fn normal_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, sd: f64, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || sd * rng.sample::<f64, _>(StandardNormal))
}

/// Sentences whose representations are i.i.d. standard normal and whose
/// gold tree is the MAP tree of a hidden random attentional probe. The tree
/// is a deterministic function of the representations.
pub fn planted_corpus(cfg: &PlantedConfig) -> Result<(Vec<Example<f64>>, ProbeParams<f64>)> {
    let mut rng = rng_for(cfg.seed, "planted");
    let hidden = ProbeParams {
        scorer: Scorer::Attentional(AttentionalParams {
            key: normal_matrix(cfg.d2, cfg.d1, cfg.scale, &mut rng),
            query: normal_matrix(cfg.d2, cfg.d1, cfg.scale, &mut rng),
        }),
        positions: None,
    };
    let mut out = Vec::with_capacity(cfg.sentences);
    for k in 0..cfg.sentences {
        let n = rng.random_range(cfg.min_len..=cfg.max_len);
        let tokens = normal_matrix(n, cfg.d1, 1.0, &mut rng);
        let reprs = SentenceReprs::from_tokens(0, tokens.view())?;
        let gold = map_tree(&hidden.edge_weights(&reprs)?)?;
        out.push(Example::new(format!("planted-{k}"), reprs, gold)?);
    }
    Ok((out, hidden))
}

/// A random tree over `n` tokens that prefers short attachments: tokens join
/// the growing tree in random order, each picking a head among the tokens
/// already placed with probability decaying in distance.
pub fn random_tree<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DepTree {
    let mut order: Vec<usize> = (1..=n).collect();
    for k in (1..n).rev() {
        order.swap(k, rng.random_range(0..=k));
    }
    let mut heads = vec![0usize; n];
    for (k, &tok) in order.iter().enumerate().skip(1) {
        let placed = &order[..k];
        let weights: Vec<f64> = placed.iter().map(|&h| 1.0 / (h.abs_diff(tok) as f64)).collect();
        let total: f64 = weights.iter().sum();
        let mut u = rng.random::<f64>() * total;
        let mut pick = placed[placed.len() - 1];
        for (&h, &w) in placed.iter().zip(&weights) {
            if u < w {
                pick = h;
                break;
            }
            u -= w;
        }
        heads[tok - 1] = pick;
    }
    DepTree::new(heads).expect("construction yields a single-root tree")
}

/// Settings of the synthetic export sample: a small treebank with
/// representation and attention files standing in for a pretrained and an
/// untrained encoder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExportSampleConfig {
    pub sentences: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Width of each half of a token vector; `d1 = 2 * id_dim`.
    pub id_dim: usize,
    /// Strength of the head-identity half in each "trained" layer.
    pub layer_signal: Vec<f64>,
    pub noise: f64,
    pub n_heads: usize,
    pub seed: u64,
}

impl Default for ExportSampleConfig {
    fn default() -> Self {
        ExportSampleConfig {
            sentences: 240,
            min_len: 3,
            max_len: 14,
            id_dim: 8,
            layer_signal: vec![0.2, 0.6, 1.2, 0.8],
            noise: 0.5,
            n_heads: 4,
            seed: 0,
        }
    }
}

pub struct ExportSample {
    pub conllu: String,
    pub corpus: Corpus,
    /// Token vectors `[own identity; identity of the syntactic head]` plus
    /// noise, with the head half scaled per layer.
    pub trained: ReprFile,
    /// Same layout, but the second half is an unrelated random vector.
    pub untrained: ReprFile,
    /// Per layer: a head whose row for each token peaks on that token's
    /// dependents, then previous-token, uniform and next-token heads (as many as `n_heads` allows).
    pub attn: AttnFile,
}

fn attention_rows<R: Rng + ?Sized>(kind: usize, heads: &[usize], sharpness: f64, rng: &mut R) -> Vec<f32> {
    let n = heads.len();
    let mut m = vec![0f64; n * n];
    for q in 0..n {
        let row = &mut m[q * n..(q + 1) * n];
        let targets: Vec<usize> = match kind {
            0 => (0..n).filter(|&k| heads[k] == q + 1).collect(),
            1 => vec![q.saturating_sub(1)],
            3 => vec![(q + 1).min(n - 1)],
            _ => Vec::new(),
        };
        for (k, v) in row.iter_mut().enumerate() {
            *v = 0.02 + 0.1 * rng.random::<f64>();
            if targets.contains(&k) {
                *v += sharpness;
            }
        }
        let total: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= total);
    }
    m.into_iter().map(|v| v as f32).collect()
}

/// Generates the export sample deterministically from the config's seed.
pub fn export_sample(cfg: &ExportSampleConfig) -> Result<ExportSample> {
    let mut rng = rng_for(cfg.seed, "export-sample");
    let n_layers = cfg.layer_signal.len();
    let d = cfg.id_dim;
    let mut sentences = Vec::with_capacity(cfg.sentences);
    let mut trained = Vec::with_capacity(cfg.sentences);
    let mut untrained = Vec::with_capacity(cfg.sentences);
    let mut attn = Vec::with_capacity(cfg.sentences);
    for k in 0..cfg.sentences {
        let n = rng.random_range(cfg.min_len..=cfg.max_len);
        let tree = random_tree(n, &mut rng);
        let id = format!("sample-{k:04}");
        sentences.push(Sentence {
            sent_id: id.clone(),
            tokens: (1..=n).map(|k| format!("w{k}")).collect(),
            gold: tree.clone(),
        });

        let ident = normal_matrix(n + 1, d, 1.0, &mut rng);
        let unrelated = normal_matrix(n, d, 1.0, &mut rng);
        let mut t_data = Vec::with_capacity(n_layers * n * 2 * d);
        let mut u_data = Vec::with_capacity(n_layers * n * 2 * d);
        for &signal in &cfg.layer_signal {
            for j in 0..n {
                let head_row = tree.heads()[j];
                for c in 0..d {
                    t_data.push((ident[[j + 1, c]] + cfg.noise * rng.sample::<f64, _>(StandardNormal)) as f32);
                    u_data.push((ident[[j + 1, c]] + cfg.noise * rng.sample::<f64, _>(StandardNormal)) as f32);
                }
                for c in 0..d {
                    let planted = signal * ident[[head_row, c]];
                    t_data.push((planted + cfg.noise * rng.sample::<f64, _>(StandardNormal)) as f32);
                    let plain = signal * unrelated[[j, c]];
                    u_data.push((plain + cfg.noise * rng.sample::<f64, _>(StandardNormal)) as f32);
                }
            }
        }
        trained.push(ReprSentence { sent_id: id.clone(), n_tokens: n, data: t_data });
        untrained.push(ReprSentence { sent_id: id.clone(), n_tokens: n, data: u_data });

        let mut a_data = Vec::with_capacity(n_layers * cfg.n_heads * n * n);
        for &signal in &cfg.layer_signal {
            for h in 0..cfg.n_heads {
                a_data.extend(attention_rows(h % 4, tree.heads(), 0.04 * signal, &mut rng));
            }
        }
        attn.push(AttnSentence { sent_id: id, n_tokens: n, data: a_data });
    }
    let corpus = Corpus { sentences, dropped: 0 };
    Ok(ExportSample {
        conllu: format_conllu(&corpus.sentences),
        corpus,
        trained: ReprFile::new(2 * d, n_layers, trained)?,
        untrained: ReprFile::new(2 * d, n_layers, untrained)?,
        attn: AttnFile::new(n_layers, cfg.n_heads, attn)?,
    })
}
