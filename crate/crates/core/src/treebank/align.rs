//! Inner join of a treebank with representation or attention files.

use std::collections::HashMap;

use log::warn;

use super::attn::{AttnFile, AttnSentence};
use super::conllu::{Corpus, Sentence};
use super::repr::{ReprFile, ReprSentence};
use crate::dataset::Example;
use crate::error::{Error, Result};
use crate::probes::SentenceReprs;

/// Treebank sentences paired with their records, in treebank order.
#[derive(Clone, Debug)]
pub struct Joined<'a, R> {
    pub pairs: Vec<(&'a Sentence, &'a R)>,
    /// Treebank sentences without a record.
    pub missing: usize,
    /// Records without a treebank sentence.
    pub extra: usize,
}

impl<R> Joined<'_, R> {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

fn join<'a, R>(
    corpus: &'a Corpus,
    records: &'a [R],
    id: impl Fn(&R) -> &str,
    n: impl Fn(&R) -> usize,
    what: &str,
) -> Result<Joined<'a, R>> {
    let by_id: HashMap<&str, &R> = records.iter().map(|r| (id(r), r)).collect();
    let mut pairs = Vec::new();
    let mut offenders = Vec::new();
    let mut missing = Vec::new();
    for s in &corpus.sentences {
        match by_id.get(s.sent_id.as_str()) {
            Some(r) if n(r) == s.n() => pairs.push((s, *r)),
            Some(r) => offenders.push(format!("{} ({} tokens in treebank, {} in {what})", s.sent_id, s.n(), n(r))),
            None => missing.push(s.sent_id.as_str()),
        }
    }
    if !offenders.is_empty() {
        return Err(Error::ShapeMismatch(format!(
            "token counts disagree for {} sentence(s): {}",
            offenders.len(),
            offenders.join(", ")
        )));
    }
    let in_corpus: std::collections::HashSet<&str> =
        corpus.sentences.iter().map(|s| s.sent_id.as_str()).collect();
    let extra: Vec<&str> = records.iter().map(&id).filter(|i| !in_corpus.contains(i)).collect();
    if !missing.is_empty() {
        warn!("{} treebank sentence(s) have no {what} record, e.g. {:?}", missing.len(), &missing[..missing.len().min(5)]);
    }
    if !extra.is_empty() {
        warn!("{} {what} record(s) are not in the treebank, e.g. {:?}", extra.len(), &extra[..extra.len().min(5)]);
    }
    if pairs.is_empty() {
        return Err(Error::EmptyCorpus(format!("no sentence ids shared between treebank and {what}")));
    }
    Ok(Joined { pairs, missing: missing.len(), extra: extra.len() })
}

pub fn align<'a>(corpus: &'a Corpus, reprs: &'a ReprFile) -> Result<Joined<'a, ReprSentence>> {
    join(corpus, &reprs.sentences, |r| &r.sent_id, |r| r.n_tokens, "representations")
}

pub fn align_attn<'a>(corpus: &'a Corpus, attn: &'a AttnFile) -> Result<Joined<'a, AttnSentence>> {
    join(corpus, &attn.sentences, |r| &r.sent_id, |r| r.n_tokens, "attention")
}

impl Joined<'_, ReprSentence> {
    /// Examples for one layer, with a zero root row prepended and values
    /// widened to `f64`.
    pub fn examples(&self, reprs: &ReprFile, layer: usize) -> Result<Vec<Example<f64>>> {
        if layer >= reprs.n_layers {
            return Err(Error::Dimension(format!(
                "layer {layer} requested, file has {} layers",
                reprs.n_layers
            )));
        }
        self.pairs
            .iter()
            .map(|(s, r)| {
                let vectors = r.layer(layer, reprs.d1).mapv(f64::from);
                let reprs = SentenceReprs::from_tokens(layer, vectors.view())?;
                Example::new(s.sent_id.clone(), reprs, s.gold.clone())
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spantree::DepTree;

    fn corpus(lens: &[(&str, usize)]) -> Corpus {
        let sentences = lens
            .iter()
            .map(|&(id, n)| Sentence {
                sent_id: id.into(),
                tokens: vec!["w".into(); n],
                gold: DepTree::new((0..n).collect()).unwrap(),
            })
            .collect();
        Corpus { sentences, dropped: 0 }
    }

    fn reprs(lens: &[(&str, usize)]) -> ReprFile {
        let s = lens
            .iter()
            .map(|&(id, n)| ReprSentence { sent_id: id.into(), n_tokens: n, data: vec![0.5; 2 * n * 3] })
            .collect();
        ReprFile::new(3, 2, s).unwrap()
    }

    #[test]
    fn exact_match_joins() {
        let c = corpus(&[("a", 2), ("b", 3)]);
        let r = reprs(&[("b", 3), ("a", 2), ("z", 1)]);
        let j = align(&c, &r).unwrap();
        assert_eq!(j.len(), 2);
        assert_eq!(j.extra, 1);
        let ex = j.examples(&r, 1).unwrap();
        assert_eq!(ex[0].id, "a");
        assert_eq!(ex[1].reprs.vectors().dim(), (4, 3));
        assert_eq!(ex[1].reprs.vectors()[[0, 0]], 0.0);
        assert_eq!(ex[1].reprs.vectors()[[1, 0]], 0.5);
        assert!(j.examples(&r, 2).is_err());
    }

    #[test]
    fn off_by_one_lists_offenders() {
        let c = corpus(&[("a", 2), ("b", 3)]);
        let r = reprs(&[("a", 3), ("b", 2)]);
        match align(&c, &r) {
            Err(Error::ShapeMismatch(m)) => assert!(m.contains("a (") && m.contains("b (")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn disjoint_is_empty() {
        let c = corpus(&[("a", 2)]);
        let r = reprs(&[("b", 2)]);
        assert!(matches!(align(&c, &r), Err(Error::EmptyCorpus(_))));
    }
}
