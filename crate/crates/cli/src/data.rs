use std::path::{Path, PathBuf};

use probekit::dataset::{split_by_id, SplitFractions, Splits};
use probekit::treebank::{align, read_conllu, read_reprs, Corpus, ReprFile};

use crate::args::SplitArgs;
use crate::Failure;

pub fn fractions(a: &SplitArgs) -> Result<SplitFractions, Failure> {
    let ok = |v: f64| (0.0..1.0).contains(&v) && v > 0.0;
    if !ok(a.dev_frac) || !ok(a.test_frac) || a.dev_frac + a.test_frac >= 1.0 {
        return Err(Failure::Usage(format!(
            "dev and test fractions must be positive and sum below 1, got {} and {}",
            a.dev_frac, a.test_frac
        )));
    }
    Ok(SplitFractions { dev: a.dev_frac, test: a.test_frac })
}

pub struct Loaded {
    pub corpus: Corpus,
    pub reprs: ReprFile,
}

pub fn load(treebank: &Path, reprs: &Path) -> Result<Loaded, Failure> {
    let corpus = read_conllu(treebank)?;
    if corpus.dropped > 0 {
        log::warn!("{} sentence(s) in {} failed tree checks and were dropped", corpus.dropped, treebank.display());
    }
    let reprs = read_reprs(reprs)?;
    Ok(Loaded { corpus, reprs })
}

impl Loaded {
    pub fn splits(&self, layer: usize, seed: u64, fractions: SplitFractions) -> Result<Splits<f64>, Failure> {
        let joined = align(&self.corpus, &self.reprs)?;
        let examples = joined.examples(&self.reprs, layer)?;
        let splits = split_by_id(examples, seed, fractions);
        for (name, part) in [("train", &splits.train), ("dev", &splits.dev), ("test", &splits.test)] {
            if part.is_empty() {
                return Err(probekit::Error::EmptyDataset(format!("{name} split is empty")).into());
            }
        }
        Ok(splits)
    }
}

/// `out` with its extension replaced by `suffix`, e.g. `model.prbp` →
/// `model.log.jsonl`.
pub fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}{suffix}"))
}
