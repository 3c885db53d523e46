use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Default key/query width, matching the per-head size of base-sized
/// transformer encoders.
pub const DEFAULT_HIDDEN: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeFamily {
    Attentional,
    Structural,
    Biaffine,
}

impl ProbeFamily {
    pub const ALL: [ProbeFamily; 3] = [
        ProbeFamily::Attentional,
        ProbeFamily::Structural,
        ProbeFamily::Biaffine,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProbeFamily::Attentional => "attentional",
            ProbeFamily::Structural => "structural",
            ProbeFamily::Biaffine => "biaffine",
        }
    }
}

impl fmt::Display for ProbeFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProbeFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "attentional" => Ok(ProbeFamily::Attentional),
            "structural" => Ok(ProbeFamily::Structural),
            "biaffine" => Ok(ProbeFamily::Biaffine),
            _ => Err(Error::Config(format!("unknown probe family {s:?}"))),
        }
    }
}

/// A probe family, evaluated either on contextual representations or on
/// learned position embeddings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ProbeKind {
    pub family: ProbeFamily,
    pub positional: bool,
}

impl ProbeKind {
    pub fn contextual(family: ProbeFamily) -> Self {
        ProbeKind { family, positional: false }
    }

    pub fn positional(family: ProbeFamily) -> Self {
        ProbeKind { family, positional: true }
    }
}

impl fmt::Display for ProbeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.positional {
            write!(f, "positional-{}", self.family)
        } else {
            write!(f, "{}", self.family)
        }
    }
}

impl FromStr for ProbeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.strip_prefix("positional-") {
            Some(rest) => Ok(ProbeKind::positional(rest.parse()?)),
            None => Ok(ProbeKind::contextual(s.parse()?)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttentionalParams<T> {
    /// `d2×d1`
    pub key: Array2<T>,
    /// `d2×d1`
    pub query: Array2<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StructuralParams<T> {
    /// `d2×d1` projection shared by both sides of every edge.
    pub proj: Array2<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpLayer<T> {
    /// `out×in`
    pub weight: Array2<T>,
    /// `1×out`
    pub bias: Array2<T>,
}

/// Per-side MLPs (linear, ReLU, dropout per layer) feeding a bilinear scorer.
#[derive(Clone, Debug, PartialEq)]
pub struct BiaffineParams<T> {
    pub head_mlp: Vec<MlpLayer<T>>,
    pub dep_mlp: Vec<MlpLayer<T>>,
    /// `head_width×dep_width`
    pub bilinear: Array2<T>,
}

impl<T: Real> BiaffineParams<T> {
    pub fn new(
        head_mlp: Vec<MlpLayer<T>>,
        dep_mlp: Vec<MlpLayer<T>>,
        bilinear: Array2<T>,
        d1: usize,
    ) -> Result<Self> {
        let head_out = check_mlp(&head_mlp, d1, "head")?;
        let dep_out = check_mlp(&dep_mlp, d1, "dependent")?;
        if bilinear.dim() != (head_out, dep_out) {
            return Err(Error::Dimension(format!(
                "bilinear matrix is {:?}, expected ({head_out}, {dep_out})",
                bilinear.dim()
            )));
        }
        Ok(BiaffineParams { head_mlp, dep_mlp, bilinear })
    }

    pub fn d1(&self) -> usize {
        match self.head_mlp.first() {
            Some(l) => l.weight.ncols(),
            None => self.bilinear.nrows(),
        }
    }
}

fn check_mlp<T: Real>(layers: &[MlpLayer<T>], d1: usize, side: &str) -> Result<usize> {
    if layers.len() > 2 {
        return Err(Error::Dimension(format!(
            "{side} MLP has {} layers, at most 2 supported",
            layers.len()
        )));
    }
    let mut width = d1;
    for (k, l) in layers.iter().enumerate() {
        if l.weight.ncols() != width || l.bias.dim() != (1, l.weight.nrows()) {
            return Err(Error::Dimension(format!(
                "{side} MLP layer {k} has weight {:?} and bias {:?} after width {width}",
                l.weight.dim(),
                l.bias.dim()
            )));
        }
        width = l.weight.nrows();
    }
    Ok(width)
}

#[derive(Clone, Debug, PartialEq)]
pub enum Scorer<T> {
    Attentional(AttentionalParams<T>),
    Structural(StructuralParams<T>),
    Biaffine(BiaffineParams<T>),
}

/// Parameters of one probe. `positions`, when present, holds `max_len+1`
/// trainable position embeddings (row 0 for the root) that replace the
/// contextual representations.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeParams<T> {
    pub scorer: Scorer<T>,
    pub positions: Option<Array2<T>>,
}

/// Everything needed to initialise a probe.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeShape {
    pub d1: usize,
    /// Key/query/projection width for the attentional and structural probes.
    pub d2: usize,
    pub mlp_layers: usize,
    pub mlp_hidden: usize,
    /// Longest sentence a positional probe must handle.
    pub max_len: usize,
}

impl ProbeShape {
    pub fn new(d1: usize) -> Self {
        ProbeShape { d1, d2: DEFAULT_HIDDEN, mlp_layers: 0, mlp_hidden: 0, max_len: 0 }
    }
}

fn linear_init<T: Real, R: Rng + ?Sized>(rows: usize, cols: usize, fan_in: usize, rng: &mut R) -> Array2<T> {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
    Array2::from_shape_simple_fn((rows, cols), || T::of(dist.sample(rng)))
}

impl<T: Real> ProbeParams<T> {
    /// Random initialisation: uniform `±1/sqrt(fan_in)` for linear maps and
    /// standard normal position embeddings.
    pub fn init<R: Rng + ?Sized>(kind: ProbeKind, shape: &ProbeShape, rng: &mut R) -> Result<Self> {
        let d1 = shape.d1;
        if d1 == 0 {
            return Err(Error::Dimension("d1 must be positive".into()));
        }
        let scorer = match kind.family {
            ProbeFamily::Attentional => {
                if shape.d2 == 0 {
                    return Err(Error::Dimension("d2 must be positive".into()));
                }
                Scorer::Attentional(AttentionalParams {
                    key: linear_init(shape.d2, d1, d1, rng),
                    query: linear_init(shape.d2, d1, d1, rng),
                })
            }
            ProbeFamily::Structural => {
                if shape.d2 == 0 {
                    return Err(Error::Dimension("d2 must be positive".into()));
                }
                Scorer::Structural(StructuralParams { proj: linear_init(shape.d2, d1, d1, rng) })
            }
            ProbeFamily::Biaffine => {
                if shape.mlp_layers > 2 || (shape.mlp_layers > 0 && shape.mlp_hidden == 0) {
                    return Err(Error::Dimension(format!(
                        "unsupported MLP shape: {} layers of width {}",
                        shape.mlp_layers, shape.mlp_hidden
                    )));
                }
                let make_mlp = |rng: &mut R| {
                    let mut width = d1;
                    (0..shape.mlp_layers)
                        .map(|_| {
                            let layer = MlpLayer {
                                weight: linear_init(shape.mlp_hidden, width, width, rng),
                                bias: linear_init(1, shape.mlp_hidden, width, rng),
                            };
                            width = shape.mlp_hidden;
                            layer
                        })
                        .collect::<Vec<_>>()
                };
                let head_mlp = make_mlp(rng);
                let dep_mlp = make_mlp(rng);
                let width = if shape.mlp_layers == 0 { d1 } else { shape.mlp_hidden };
                let bilinear = linear_init(width, width, width, rng);
                Scorer::Biaffine(BiaffineParams::new(head_mlp, dep_mlp, bilinear, d1)?)
            }
        };
        let positions = if kind.positional {
            if shape.max_len == 0 {
                return Err(Error::Dimension("positional probe needs max_len >= 1".into()));
            }
            Some(Array2::from_shape_simple_fn((shape.max_len + 1, d1), || {
                let v: f64 = StandardNormal.sample(rng);
                T::of(v)
            }))
        } else {
            None
        };
        Ok(ProbeParams { scorer, positions })
    }

    pub fn kind(&self) -> ProbeKind {
        let family = match self.scorer {
            Scorer::Attentional(_) => ProbeFamily::Attentional,
            Scorer::Structural(_) => ProbeFamily::Structural,
            Scorer::Biaffine(_) => ProbeFamily::Biaffine,
        };
        ProbeKind { family, positional: self.positions.is_some() }
    }

    /// Input width expected by the scorer.
    pub fn d1(&self) -> usize {
        match &self.scorer {
            Scorer::Attentional(p) => p.key.ncols(),
            Scorer::Structural(p) => p.proj.ncols(),
            Scorer::Biaffine(p) => p.d1(),
        }
    }

    /// Longest sentence a positional probe supports.
    pub fn max_len(&self) -> Option<usize> {
        self.positions.as_ref().map(|p| p.nrows() - 1)
    }

    /// All trainable tensors in a fixed order.
    pub fn tensors(&self) -> Vec<&Array2<T>> {
        let mut out = Vec::new();
        match &self.scorer {
            Scorer::Attentional(p) => {
                out.push(&p.key);
                out.push(&p.query);
            }
            Scorer::Structural(p) => out.push(&p.proj),
            Scorer::Biaffine(p) => {
                for l in p.head_mlp.iter().chain(&p.dep_mlp) {
                    out.push(&l.weight);
                    out.push(&l.bias);
                }
                out.push(&p.bilinear);
            }
        }
        if let Some(pos) = &self.positions {
            out.push(pos);
        }
        out
    }

    /// Mutable view of [`tensors`](Self::tensors), same order.
    pub fn tensors_mut(&mut self) -> Vec<&mut Array2<T>> {
        let mut out = Vec::new();
        match &mut self.scorer {
            Scorer::Attentional(p) => {
                out.push(&mut p.key);
                out.push(&mut p.query);
            }
            Scorer::Structural(p) => out.push(&mut p.proj),
            Scorer::Biaffine(p) => {
                for l in p.head_mlp.iter_mut().chain(p.dep_mlp.iter_mut()) {
                    out.push(&mut l.weight);
                    out.push(&mut l.bias);
                }
                out.push(&mut p.bilinear);
            }
        }
        if let Some(pos) = &mut self.positions {
            out.push(pos);
        }
        out
    }

    /// MLP depth per side for a biaffine probe, zero otherwise.
    pub fn mlp_layers(&self) -> usize {
        match &self.scorer {
            Scorer::Biaffine(p) => p.head_mlp.len(),
            _ => 0,
        }
    }

    /// Rebuilds parameters from tensors in [`tensors`](Self::tensors) order.
    pub fn from_tensors(kind: ProbeKind, mlp_layers: usize, tensors: Vec<Array2<T>>) -> Result<Self> {
        let expected = match kind.family {
            ProbeFamily::Attentional => 2,
            ProbeFamily::Structural => 1,
            ProbeFamily::Biaffine => 4 * mlp_layers + 1,
        } + usize::from(kind.positional);
        if tensors.len() != expected {
            return Err(Error::Dimension(format!(
                "{kind} probe with {mlp_layers} MLP layers needs {expected} tensors, got {}",
                tensors.len()
            )));
        }
        let mut it = tensors.into_iter();
        let mut next = || it.next().expect("length checked");
        let scorer = match kind.family {
            ProbeFamily::Attentional => {
                let key = next();
                let query = next();
                if key.dim() != query.dim() {
                    return Err(Error::Dimension(format!(
                        "key is {:?} but query is {:?}",
                        key.dim(),
                        query.dim()
                    )));
                }
                Scorer::Attentional(AttentionalParams { key, query })
            }
            ProbeFamily::Structural => Scorer::Structural(StructuralParams { proj: next() }),
            ProbeFamily::Biaffine => {
                let mut layers = Vec::with_capacity(2 * mlp_layers);
                for _ in 0..2 * mlp_layers {
                    let weight = next();
                    let bias = next();
                    layers.push(MlpLayer { weight, bias });
                }
                let dep_mlp = layers.split_off(mlp_layers);
                let bilinear = next();
                let d1 = match layers.first() {
                    Some(l) => l.weight.ncols(),
                    None => bilinear.nrows(),
                };
                Scorer::Biaffine(BiaffineParams::new(layers, dep_mlp, bilinear, d1)?)
            }
        };
        let positions = kind.positional.then(next);
        let params = ProbeParams { scorer, positions };
        if let Some(pos) = &params.positions {
            if pos.ncols() != params.d1() || pos.nrows() < 2 {
                return Err(Error::Dimension(format!(
                    "position table is {:?} for input width {}",
                    pos.dim(),
                    params.d1()
                )));
            }
        }
        Ok(params)
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.fill(T::zero());
        }
        z
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// `self += scale * other`; both must share a layout.
    pub fn add_scaled(&mut self, other: &Self, scale: T) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.scaled_add(scale, b);
        }
    }

    /// Converts to another scalar type.
    pub fn cast<U: Real>(&self) -> ProbeParams<U> {
        let c = |a: &Array2<T>| a.mapv(|v| U::of(v.to_f64_lossy()));
        let layer = |l: &MlpLayer<T>| MlpLayer { weight: c(&l.weight), bias: c(&l.bias) };
        let scorer = match &self.scorer {
            Scorer::Attentional(p) => Scorer::Attentional(AttentionalParams { key: c(&p.key), query: c(&p.query) }),
            Scorer::Structural(p) => Scorer::Structural(StructuralParams { proj: c(&p.proj) }),
            Scorer::Biaffine(p) => Scorer::Biaffine(BiaffineParams {
                head_mlp: p.head_mlp.iter().map(layer).collect(),
                dep_mlp: p.dep_mlp.iter().map(layer).collect(),
                bilinear: c(&p.bilinear),
            }),
        };
        ProbeParams { scorer, positions: self.positions.as_ref().map(c) }
    }
}
