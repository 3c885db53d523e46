//! `ATTW` files: per-sentence attention matrices for every layer and head.
//!
//! ```text
//! "ATTW" u32:version=1 u32:n_layers u32:n_heads u32:n_sentences
//! per sentence: u16:id_len id_bytes u32:n_tokens f32[n_layers·n_heads·n_tokens·n_tokens]
//! ```
//!
//! Little-endian; layer-major, then head, then the query row and key
//! column of each matrix.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::ArrayView2;

use super::bin::{put_f32s, put_short_str, put_u32, u32_of, Reader, VERSION};
use crate::error::{Error, Result};

pub const ATTN_MAGIC: [u8; 4] = *b"ATTW";

/// Tolerance on attention row sums in exported files.
pub const ROW_SUM_TOL: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub struct AttnSentence {
    pub sent_id: String,
    pub n_tokens: usize,
    /// `n_layers × n_heads × n_tokens × n_tokens`.
    pub data: Vec<f32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttnFile {
    pub n_layers: usize,
    pub n_heads: usize,
    pub sentences: Vec<AttnSentence>,
}

impl AttnSentence {
    /// Row `i` is the attention distribution of token `i+1` over all tokens.
    pub fn matrix(&self, layer: usize, head: usize, n_heads: usize) -> ArrayView2<'_, f32> {
        let block = self.n_tokens * self.n_tokens;
        let start = (layer * n_heads + head) * block;
        ArrayView2::from_shape((self.n_tokens, self.n_tokens), &self.data[start..start + block])
            .expect("validated block size")
    }
}

impl AttnFile {
    /// Checks shapes only; see [`check_row_sums`](Self::check_row_sums).
    pub fn new(n_layers: usize, n_heads: usize, sentences: Vec<AttnSentence>) -> Result<Self> {
        let file = AttnFile { n_layers, n_heads, sentences };
        file.validate_shapes()?;
        Ok(file)
    }

    fn validate_shapes(&self) -> Result<()> {
        if self.n_layers == 0 || self.n_heads == 0 {
            return Err(Error::ShapeMismatch(format!(
                "n_layers = {} and n_heads = {} must both be positive",
                self.n_layers, self.n_heads
            )));
        }
        let mut seen = HashSet::new();
        for s in &self.sentences {
            if !seen.insert(s.sent_id.as_str()) {
                return Err(Error::ShapeMismatch(format!("duplicate sent_id {:?}", s.sent_id)));
            }
            let want = self.n_layers * self.n_heads * s.n_tokens * s.n_tokens;
            if s.n_tokens == 0 || s.data.len() != want {
                return Err(Error::ShapeMismatch(format!(
                    "sentence {:?} with {} tokens holds {} floats, expected {want}",
                    s.sent_id,
                    s.n_tokens,
                    s.data.len()
                )));
            }
        }
        Ok(())
    }

    /// Every attention row must be a distribution within [`ROW_SUM_TOL`].
    pub fn check_row_sums(&self) -> Result<()> {
        for s in &self.sentences {
            for layer in 0..self.n_layers {
                for head in 0..self.n_heads {
                    let m = s.matrix(layer, head, self.n_heads);
                    for (i, row) in m.rows().into_iter().enumerate() {
                        let sum: f64 = row.iter().map(|&v| f64::from(v)).sum();
                        let ok = row.iter().all(|v| v.is_finite() && *v >= 0.0);
                        if !ok || (sum - 1.0).abs() > ROW_SUM_TOL {
                            return Err(Error::InvalidWeights(format!(
                                "sentence {:?} layer {layer} head {head} row {i} sums to {sum}",
                                s.sent_id
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn get(&self, sent_id: &str) -> Option<&AttnSentence> {
        self.sentences.iter().find(|s| s.sent_id == sent_id)
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        self.validate_shapes()?;
        w.write_all(&ATTN_MAGIC)?;
        put_u32(w, VERSION)?;
        put_u32(w, u32_of(self.n_layers, "n_layers")?)?;
        put_u32(w, u32_of(self.n_heads, "n_heads")?)?;
        put_u32(w, u32_of(self.sentences.len(), "n_sentences")?)?;
        for s in &self.sentences {
            put_short_str(w, &s.sent_id)?;
            put_u32(w, u32_of(s.n_tokens, "n_tokens")?)?;
            put_f32s(w, &s.data)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut r = Reader::new(r);
        r.header(ATTN_MAGIC)?;
        let n_layers = r.u32(&|| "n_layers".into())? as usize;
        let n_heads = r.u32(&|| "n_heads".into())? as usize;
        let count = r.u32(&|| "n_sentences".into())? as usize;
        let mut sentences = Vec::with_capacity(count.min(1 << 20));
        for k in 0..count {
            let sent_id = r.short_str(&|| format!("sent_id of sentence {k}"))?;
            let n_tokens = r.u32(&|| format!("token count of {sent_id:?}"))? as usize;
            let len = n_layers * n_heads * n_tokens * n_tokens;
            let data = r.f32s(len, &|| format!("attention of {sent_id:?}"))?;
            sentences.push(AttnSentence { sent_id, n_tokens, data });
        }
        r.finish()?;
        let file = AttnFile::new(n_layers, n_heads, sentences)?;
        file.check_row_sums()?;
        Ok(file)
    }
}

pub fn read_attn(path: impl AsRef<Path>) -> Result<AttnFile> {
    let path = path.as_ref();
    AttnFile::read_from(BufReader::new(File::open(path).map_err(crate::error::at_path(path))?))
}

pub fn write_attn(path: impl AsRef<Path>, file: &AttnFile) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    file.write_to(&mut w)?;
    w.flush()?;
    Ok(())
}
