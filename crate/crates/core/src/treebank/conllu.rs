//! CoNLL-U reader producing unlabelled trees.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use log::warn;

use crate::error::{Error, Result};
use crate::spantree::{validate_heads, DepTree};

/// One treebank sentence.
#[derive(Clone, Debug, PartialEq)]
pub struct Sentence {
    pub sent_id: String,
    pub tokens: Vec<String>,
    pub gold: DepTree,
}

impl Sentence {
    pub fn n(&self) -> usize {
        self.tokens.len()
    }
}

/// Sentences that parsed into valid trees, plus how many were dropped.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Corpus {
    pub sentences: Vec<Sentence>,
    pub dropped: usize,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    /// Mean number of word tokens per sentence.
    pub fn mean_sentence_length(&self) -> f64 {
        if self.sentences.is_empty() {
            return 0.0;
        }
        let total: usize = self.sentences.iter().map(Sentence::n).sum();
        total as f64 / self.sentences.len() as f64
    }
}

/// Renders sentences as minimal CoNLL-U: form, head and a `root`/`dep`
/// relation, other columns left as `_`.
pub fn format_conllu(sentences: &[Sentence]) -> String {
    let mut out = String::new();
    for s in sentences {
        out.push_str(&format!("# sent_id = {}\n", s.sent_id));
        for (k, (form, &h)) in s.tokens.iter().zip(s.gold.heads()).enumerate() {
            let rel = if h == 0 { "root" } else { "dep" };
            out.push_str(&format!("{}\t{form}\t_\t_\t_\t_\t{h}\t{rel}\t_\t_\n", k + 1));
        }
        out.push('\n');
    }
    out
}

pub fn read_conllu(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(crate::error::at_path(path))?;
    parse_conllu(&text).map_err(|e| match e {
        Error::EmptyCorpus(m) => Error::EmptyCorpus(format!("{}: {m}", path.display())),
        other => other,
    })
}

#[derive(Default)]
struct Block {
    first_line: usize,
    sent_id: Option<String>,
    tokens: Vec<String>,
    heads: Vec<usize>,
}

/// Parses CoNLL-U text. Multiword ranges (`3-4`) and empty nodes (`5.1`)
/// are skipped; sentences whose heads do not form a single-root tree are
/// dropped with a warning.
pub fn parse_conllu(text: &str) -> Result<Corpus> {
    let mut corpus = Corpus::default();
    let mut seen = HashSet::new();
    let mut block = Block::default();
    let mut ordinal = 0usize;

    let mut finish = |block: Block, corpus: &mut Corpus| -> Result<()> {
        if block.tokens.is_empty() {
            if block.sent_id.is_some() {
                return Err(Error::Parse { line: block.first_line, msg: "sentence has no word lines".into() });
            }
            return Ok(());
        }
        ordinal += 1;
        let sent_id = block.sent_id.unwrap_or_else(|| format!("s{ordinal}"));
        if !seen.insert(sent_id.clone()) {
            return Err(Error::Parse { line: block.first_line, msg: format!("duplicate sent_id {sent_id:?}") });
        }
        match validate_heads(&block.heads) {
            Ok(()) => corpus.sentences.push(Sentence {
                sent_id,
                tokens: block.tokens,
                gold: DepTree::new(block.heads)?,
            }),
            Err(e) => {
                warn!("dropping sentence {sent_id:?} (line {}): {e}", block.first_line);
                corpus.dropped += 1;
            }
        }
        Ok(())
    };

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            finish(std::mem::take(&mut block), &mut corpus)?;
            continue;
        }
        if block.first_line == 0 {
            block.first_line = line_no;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once('=') {
                if key.trim() == "sent_id" {
                    block.sent_id = Some(value.trim().to_string());
                }
            }
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(Error::Parse { line: line_no, msg: format!("expected 10 tab-separated columns, found {}", cols.len()) });
        }
        let id = cols[0];
        if id.contains('-') || id.contains('.') {
            continue;
        }
        let id: usize = id
            .parse()
            .map_err(|_| Error::Parse { line: line_no, msg: format!("bad token id {id:?}") })?;
        if id != block.tokens.len() + 1 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("token id {id} out of sequence, expected {}", block.tokens.len() + 1),
            });
        }
        let head: usize = cols[6]
            .parse()
            .map_err(|_| Error::Parse { line: line_no, msg: format!("bad head {:?}", cols[6]) })?;
        block.tokens.push(cols[1].to_string());
        block.heads.push(head);
    }
    finish(block, &mut corpus)?;

    if corpus.sentences.is_empty() {
        return Err(Error::EmptyCorpus(format!("no valid sentences ({} dropped)", corpus.dropped)));
    }
    Ok(corpus)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tok(id: &str, form: &str, head: &str) -> String {
        format!("{id}\t{form}\t_\t_\t_\t_\t{head}\t_\t_\t_\n")
    }

    #[test]
    fn heads_map_to_tree() {
        let text = format!("# sent_id = a\n{}{}\n", tok("1", "hi", "2"), tok("2", "there", "0"));
        let c = parse_conllu(&text).unwrap();
        assert_eq!(c.sentences[0].sent_id, "a");
        assert_eq!(c.sentences[0].gold.heads(), &[2, 0]);
        assert_eq!(c.sentences[0].tokens, vec!["hi", "there"]);
    }

    #[test]
    fn ranges_and_empty_nodes_skipped() {
        let text = format!(
            "{}{}{}{}{}",
            tok("1", "a", "0"),
            tok("2-3", "bc", "_"),
            tok("2", "b", "1"),
            tok("2.1", "x", "_"),
            tok("3", "c", "2"),
        );
        let c = parse_conllu(&text).unwrap();
        assert_eq!(c.sentences[0].gold.heads(), &[0, 1, 2]);
        assert_eq!(c.sentences[0].sent_id, "s1");
    }

    #[test]
    fn two_roots_dropped() {
        let text = format!(
            "{}{}\n{}{}\n",
            tok("1", "a", "0"),
            tok("2", "b", "0"),
            tok("1", "a", "0"),
            tok("2", "b", "1"),
        );
        let c = parse_conllu(&text).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.dropped, 1);
    }

    #[test]
    fn only_invalid_is_empty() {
        let text = format!("{}{}\n", tok("1", "a", "0"), tok("2", "b", "0"));
        assert!(matches!(parse_conllu(&text), Err(Error::EmptyCorpus(_))));
        assert!(matches!(parse_conllu(""), Err(Error::EmptyCorpus(_))));
    }

    #[test]
    fn parse_errors_carry_line() {
        let text = format!("{}1\tb\n", tok("1", "a", "0"));
        assert!(matches!(parse_conllu(&text), Err(Error::Parse { line: 2, .. })));
        let text = format!("{}{}", tok("1", "a", "0"), tok("2", "b", "x"));
        assert!(matches!(parse_conllu(&text), Err(Error::Parse { line: 2, .. })));
        let text = format!("# sent_id = d\n{}\n# sent_id = d\n{}", tok("1", "a", "0"), tok("1", "a", "0"));
        assert!(matches!(parse_conllu(&text), Err(Error::Parse { line: 4, .. })));
    }

    #[test]
    fn format_round_trips() {
        let text = format!("# sent_id = a\n{}{}\n", tok("1", "hi", "2"), tok("2", "there", "0"));
        let c = parse_conllu(&text).unwrap();
        assert_eq!(parse_conllu(&format_conllu(&c.sentences)).unwrap(), c);
    }

    #[test]
    fn mean_length() {
        let text = format!("{}\n{}{}{}", tok("1", "a", "0"), tok("1", "a", "0"), tok("2", "b", "1"), tok("3", "c", "1"));
        assert_eq!(parse_conllu(&text).unwrap().mean_sentence_length(), 2.0);
    }
}
