//! `REPR` files: per-sentence, per-layer token vectors.
//!
//! ```text
//! "REPR" u32:version=1 u32:d1 u32:n_layers u32:n_sentences
//! per sentence: u16:id_len id_bytes u32:n_tokens f32[n_layers·n_tokens·d1]
//! ```
//!
//! Everything is little-endian; the floats are layer-major, then token, then
//! dimension.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::ArrayView2;

use super::bin::{put_f32s, put_short_str, put_u32, u32_of, Reader, VERSION};
use crate::error::{Error, Result};

pub const REPR_MAGIC: [u8; 4] = *b"REPR";

#[derive(Clone, Debug, PartialEq)]
pub struct ReprSentence {
    pub sent_id: String,
    pub n_tokens: usize,
    /// `n_layers × n_tokens × d1`, layer-major.
    pub data: Vec<f32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReprFile {
    pub d1: usize,
    pub n_layers: usize,
    pub sentences: Vec<ReprSentence>,
}

impl ReprSentence {
    /// `n_tokens × d1` vectors of one layer.
    pub fn layer(&self, layer: usize, d1: usize) -> ArrayView2<'_, f32> {
        let block = self.n_tokens * d1;
        let slice = &self.data[layer * block..(layer + 1) * block];
        ArrayView2::from_shape((self.n_tokens, d1), slice).expect("validated block size")
    }
}

impl ReprFile {
    pub fn new(d1: usize, n_layers: usize, sentences: Vec<ReprSentence>) -> Result<Self> {
        let file = ReprFile { d1, n_layers, sentences };
        file.validate()?;
        Ok(file)
    }

    fn validate(&self) -> Result<()> {
        if self.d1 == 0 || self.n_layers == 0 {
            return Err(Error::ShapeMismatch(format!(
                "d1 = {} and n_layers = {} must both be positive",
                self.d1, self.n_layers
            )));
        }
        let mut seen = HashSet::new();
        for s in &self.sentences {
            if !seen.insert(s.sent_id.as_str()) {
                return Err(Error::ShapeMismatch(format!("duplicate sent_id {:?}", s.sent_id)));
            }
            if s.n_tokens == 0 {
                return Err(Error::ShapeMismatch(format!("sentence {:?} has no tokens", s.sent_id)));
            }
            if s.data.len() != self.n_layers * s.n_tokens * self.d1 {
                return Err(Error::ShapeMismatch(format!(
                    "sentence {:?} holds {} floats, expected {}",
                    s.sent_id,
                    s.data.len(),
                    self.n_layers * s.n_tokens * self.d1
                )));
            }
            if let Some(bad) = s.data.iter().position(|v| !v.is_finite()) {
                return Err(Error::ShapeMismatch(format!(
                    "sentence {:?} has a non-finite value at offset {bad}",
                    s.sent_id
                )));
            }
        }
        Ok(())
    }

    pub fn get(&self, sent_id: &str) -> Option<&ReprSentence> {
        self.sentences.iter().find(|s| s.sent_id == sent_id)
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        self.validate()?;
        w.write_all(&REPR_MAGIC)?;
        put_u32(w, VERSION)?;
        put_u32(w, u32_of(self.d1, "d1")?)?;
        put_u32(w, u32_of(self.n_layers, "n_layers")?)?;
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
        r.header(REPR_MAGIC)?;
        let d1 = r.u32(&|| "d1".into())? as usize;
        let n_layers = r.u32(&|| "n_layers".into())? as usize;
        let count = r.u32(&|| "n_sentences".into())? as usize;
        let mut sentences = Vec::with_capacity(count.min(1 << 20));
        for k in 0..count {
            let sent_id = r.short_str(&|| format!("sent_id of sentence {k}"))?;
            let n_tokens = r.u32(&|| format!("token count of {sent_id:?}"))? as usize;
            let data = r.f32s(n_layers * n_tokens * d1, &|| format!("vectors of {sent_id:?}"))?;
            sentences.push(ReprSentence { sent_id, n_tokens, data });
        }
        r.finish()?;
        ReprFile::new(d1, n_layers, sentences)
    }
}

pub fn read_reprs(path: impl AsRef<Path>) -> Result<ReprFile> {
    let path = path.as_ref();
    ReprFile::read_from(BufReader::new(File::open(path).map_err(crate::error::at_path(path))?))
}

pub fn write_reprs(path: impl AsRef<Path>, file: &ReprFile) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    file.write_to(&mut w)?;
    w.flush()?;
    Ok(())
}
