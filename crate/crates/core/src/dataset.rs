use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::probes::SentenceReprs;
use crate::scalar::Real;
use crate::seed::{derive_seed, fnv1a, splitmix};
use crate::spantree::DepTree;

/// One sentence's representations paired with its gold tree.
#[derive(Clone, Debug, PartialEq)]
pub struct Example<T> {
    pub id: String,
    pub reprs: SentenceReprs<T>,
    pub gold: DepTree,
}

impl<T: Real> Example<T> {
    pub fn new(id: impl Into<String>, reprs: SentenceReprs<T>, gold: DepTree) -> Result<Self> {
        if reprs.n() != gold.len() {
            return Err(Error::ShapeMismatch(format!(
                "representations have {} tokens, tree has {}",
                reprs.n(),
                gold.len()
            )));
        }
        Ok(Example { id: id.into(), reprs, gold })
    }

    pub fn n(&self) -> usize {
        self.gold.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Splits<T> {
    pub train: Vec<Example<T>>,
    pub dev: Vec<Example<T>>,
    pub test: Vec<Example<T>>,
}

/// Which split a sentence falls in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

/// Fractions used by [`split_by_id`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub dev: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        SplitFractions { dev: 0.1, test: 0.1 }
    }
}

/// Assigns a split from a hash of the sentence id, so the assignment is
/// stable across layers, probes and runs.
pub fn split_of(id: &str, seed: u64, fractions: SplitFractions) -> Split {
    let h = splitmix(fnv1a(id.as_bytes()) ^ derive_seed(seed, "split"));
    // Top 53 bits as a uniform in [0, 1).
    let u = (h >> 11) as f64 / (1u64 << 53) as f64;
    if u < fractions.test {
        Split::Test
    } else if u < fractions.test + fractions.dev {
        Split::Dev
    } else {
        Split::Train
    }
}

pub fn split_by_id<T: Real>(examples: Vec<Example<T>>, seed: u64, fractions: SplitFractions) -> Splits<T> {
    let mut out = Splits { train: Vec::new(), dev: Vec::new(), test: Vec::new() };
    for ex in examples {
        match split_of(&ex.id, seed, fractions) {
            Split::Train => out.train.push(ex),
            Split::Dev => out.dev.push(ex),
            Split::Test => out.test.push(ex),
        }
    }
    out
}

/// Longest sentence across all splits.
pub fn max_len<T: Real>(splits: &[&[Example<T>]]) -> usize {
    splits.iter().flat_map(|s| s.iter()).map(|e| e.n()).max().unwrap_or(0)
}
