//! `PRBP` probe checkpoints.
//!
//! ```text
//! "PRBP" u32:version=1 u8:family u8:positional u32:layer u32:mlp_layers
//! u32:n_tensors, per tensor: u32:rows u32:cols f64[rows·cols] (row-major)
//! u32:meta_len meta_json
//! ```
//!
//! Family tags: 0 attentional, 1 structural, 2 biaffine. Little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::probes::{ProbeFamily, ProbeKind, ProbeParams};
use crate::treebank::bin::{put_f64s, put_u32, u32_of, Reader, VERSION};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"PRBP";

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: ProbeParams<f64>,
    pub layer: usize,
    /// Free-form metadata; commands store their manifest, config and scores here.
    pub meta: Value,
}

fn family_tag(f: ProbeFamily) -> u8 {
    match f {
        ProbeFamily::Attentional => 0,
        ProbeFamily::Structural => 1,
        ProbeFamily::Biaffine => 2,
    }
}

impl Checkpoint {
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        let kind = self.params.kind();
        w.write_all(&CHECKPOINT_MAGIC)?;
        put_u32(w, VERSION)?;
        w.write_all(&[family_tag(kind.family), u8::from(kind.positional)])?;
        put_u32(w, u32_of(self.layer, "layer")?)?;
        put_u32(w, u32_of(self.params.mlp_layers(), "mlp_layers")?)?;
        let tensors = self.params.tensors();
        put_u32(w, u32_of(tensors.len(), "n_tensors")?)?;
        for t in tensors {
            put_u32(w, u32_of(t.nrows(), "rows")?)?;
            put_u32(w, u32_of(t.ncols(), "cols")?)?;
            put_f64s(w, t.iter().copied())?;
        }
        let meta = serde_json::to_vec(&self.meta).map_err(|e| Error::Config(e.to_string()))?;
        put_u32(w, u32_of(meta.len(), "meta_len")?)?;
        w.write_all(&meta)?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut r = Reader::new(r);
        r.header(CHECKPOINT_MAGIC)?;
        let family = match r.u8(&|| "family tag".into())? {
            0 => ProbeFamily::Attentional,
            1 => ProbeFamily::Structural,
            2 => ProbeFamily::Biaffine,
            t => return Err(Error::ShapeMismatch(format!("unknown family tag {t}"))),
        };
        let positional = match r.u8(&|| "positional flag".into())? {
            0 => false,
            1 => true,
            t => return Err(Error::ShapeMismatch(format!("bad positional flag {t}"))),
        };
        let layer = r.u32(&|| "layer".into())? as usize;
        let mlp_layers = r.u32(&|| "mlp_layers".into())? as usize;
        let count = r.u32(&|| "tensor count".into())? as usize;
        let mut tensors = Vec::with_capacity(count.min(64));
        for k in 0..count {
            let rows = r.u32(&|| format!("rows of tensor {k}"))? as usize;
            let cols = r.u32(&|| format!("cols of tensor {k}"))? as usize;
            let data = r.f64s(rows * cols, &|| format!("tensor {k}"))?;
            tensors.push(Array2::from_shape_vec((rows, cols), data).expect("length matches"));
        }
        let len = r.u32(&|| "metadata length".into())? as usize;
        let meta_bytes = r.bytes(len, &|| "metadata".into())?;
        r.finish()?;
        let meta = serde_json::from_slice(&meta_bytes)
            .map_err(|e| Error::ShapeMismatch(format!("checkpoint metadata is not JSON: {e}")))?;
        let kind = ProbeKind { family, positional };
        let params = ProbeParams::from_tensors(kind, mlp_layers, tensors)
            .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
        Ok(Checkpoint { params, layer, meta })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Checkpoint::read_from(BufReader::new(File::open(path).map_err(crate::error::at_path(path))?))
    }
}
