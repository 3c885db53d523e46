//! Little-endian primitives shared by the binary formats.

use std::io::{self, Read, Write};

use crate::error::{Error, Result};

pub(crate) const VERSION: u32 = 1;

pub(crate) struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    pub fn new(inner: R) -> Self {
        Reader { inner }
    }

    fn fill(&mut self, buf: &mut [u8], what: &dyn Fn() -> String) -> Result<()> {
        self.inner.read_exact(buf).map_err(|e| {
            if e.kind() == io::ErrorKind::UnexpectedEof {
                Error::ShapeMismatch(format!("file truncated while reading {}", what()))
            } else {
                Error::Io(e)
            }
        })
    }

    pub fn header(&mut self, magic: [u8; 4]) -> Result<()> {
        let mut found = [0u8; 4];
        self.fill(&mut found, &|| "magic".into())?;
        if found != magic {
            return Err(Error::MagicMismatch { expected: magic, found });
        }
        let version = self.u32(&|| "version".into())?;
        if version != VERSION {
            return Err(Error::VersionMismatch { expected: VERSION, found: version });
        }
        Ok(())
    }

    pub fn u8(&mut self, what: &dyn Fn() -> String) -> Result<u8> {
        let mut b = [0u8; 1];
        self.fill(&mut b, what)?;
        Ok(b[0])
    }

    pub fn u16(&mut self, what: &dyn Fn() -> String) -> Result<u16> {
        let mut b = [0u8; 2];
        self.fill(&mut b, what)?;
        Ok(u16::from_le_bytes(b))
    }

    pub fn u32(&mut self, what: &dyn Fn() -> String) -> Result<u32> {
        let mut b = [0u8; 4];
        self.fill(&mut b, what)?;
        Ok(u32::from_le_bytes(b))
    }

    pub fn bytes(&mut self, len: usize, what: &dyn Fn() -> String) -> Result<Vec<u8>> {
        let mut b = vec![0u8; len];
        self.fill(&mut b, what)?;
        Ok(b)
    }

    /// A `u16`-length-prefixed UTF-8 string.
    pub fn short_str(&mut self, what: &dyn Fn() -> String) -> Result<String> {
        let len = self.u16(what)? as usize;
        let b = self.bytes(len, what)?;
        String::from_utf8(b).map_err(|_| Error::ShapeMismatch(format!("{} is not UTF-8", what())))
    }

    pub fn f32s(&mut self, count: usize, what: &dyn Fn() -> String) -> Result<Vec<f32>> {
        let b = self.bytes(count * 4, what)?;
        Ok(b.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
    }

    pub fn f64s(&mut self, count: usize, what: &dyn Fn() -> String) -> Result<Vec<f64>> {
        let b = self.bytes(count * 8, what)?;
        Ok(b.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }

    /// Fails unless the input is exhausted.
    pub fn finish(mut self) -> Result<()> {
        let mut b = [0u8; 1];
        match self.inner.read(&mut b)? {
            0 => Ok(()),
            _ => Err(Error::ShapeMismatch("trailing bytes after last record".into())),
        }
    }
}

pub(crate) fn u32_of(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::ShapeMismatch(format!("{what} = {v} does not fit in u32")))
}

pub(crate) fn put_u32<W: Write>(w: &mut W, v: u32) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

pub(crate) fn put_short_str<W: Write>(w: &mut W, s: &str) -> Result<()> {
    let len = u16::try_from(s.len())
        .map_err(|_| Error::ShapeMismatch(format!("sent_id of {} bytes exceeds u16", s.len())))?;
    w.write_all(&len.to_le_bytes())?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

pub(crate) fn put_f32s<W: Write>(w: &mut W, v: &[f32]) -> io::Result<()> {
    let mut buf = Vec::with_capacity(v.len() * 4);
    for x in v {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    w.write_all(&buf)
}

pub(crate) fn put_f64s<W: Write>(w: &mut W, v: impl Iterator<Item = f64>) -> io::Result<()> {
    let mut buf = Vec::new();
    for x in v {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    w.write_all(&buf)
}
