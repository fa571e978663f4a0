use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::data::EmbeddingTable;
use crate::numeric::Matrix;
use crate::Result;

pub const MAGIC: [u8; 4] = *b"LSE1";
pub const FORMAT_VERSION: u16 = 1;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormatError {
    #[error("bad magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported version {0}")]
    UnsupportedVersion(u16),
    #[error("crc mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    CrcMismatch { stored: u32, computed: u32 },
    #[error("truncated while reading {0}")]
    Truncated(&'static str),
    #[error("{0} unexpected trailing bytes")]
    TrailingBytes(usize),
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("invalid utf-8 in {0}")]
    InvalidUtf8(&'static str),
    #[error("{0}")]
    Invalid(String),
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], FormatError> {
        if self.bytes.len() - self.pos < n {
            return Err(FormatError::Truncated(what));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u16(&mut self, what: &'static str) -> Result<u16, FormatError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &'static str) -> Result<u64, FormatError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn string(&mut self, what: &'static str) -> Result<&'a [u8], FormatError> {
        let len = self.u32(what)? as usize;
        self.take(len, what)
    }
}

fn push_str(out: &mut Vec<u8>, s: &str) -> Result<(), FormatError> {
    let len = u32::try_from(s.len())
        .map_err(|_| FormatError::Invalid("string longer than 4 GiB".into()))?;
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(s.as_bytes());
    Ok(())
}

/// Serializes a table; values are stored as 32-bit floats.
pub fn encode_embedding_file(t: &EmbeddingTable) -> Result<Vec<u8>, FormatError> {
    let m = t.dim();
    let mut out = Vec::with_capacity(26 + t.source_tag().len() + t.len() * (12 + 4 * m));
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(m as u32).to_le_bytes());
    out.extend_from_slice(&(t.len() as u64).to_le_bytes());
    push_str(&mut out, t.source_tag())?;
    for (r, id) in t.ids().iter().enumerate() {
        push_str(&mut out, id)?;
        for (c, &v) in t.vectors().row(r).iter().enumerate() {
            let f = v as f32;
            if !f.is_finite() {
                return Err(FormatError::NonFinite { row: r, col: c });
            }
            out.extend_from_slice(&f.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

/// Parses and verifies a serialized table. Structure is checked first,
/// then the CRC, then the decoded content.
pub fn decode_embedding_file(bytes: &[u8]) -> Result<EmbeddingTable, FormatError> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic: [u8; 4] = cur.take(4, "magic")?.try_into().unwrap();
    if magic != MAGIC {
        return Err(FormatError::BadMagic(magic));
    }
    let version = cur.u16("version")?;
    if version != FORMAT_VERSION {
        return Err(FormatError::UnsupportedVersion(version));
    }
    let m = cur.u32("latent dimension")? as usize;
    let rows = cur.u64("row count")?;
    let tag = cur.string("source tag")?;

    let row_bytes = 4 + 4 * m;
    let cap = usize::try_from(rows)
        .unwrap_or(usize::MAX)
        .min(bytes.len() / row_bytes.max(1));
    let mut raw_ids = Vec::with_capacity(cap);
    let mut values = Vec::with_capacity(cap.saturating_mul(m));
    for _ in 0..rows {
        raw_ids.push(cur.string("row id")?);
        for chunk in cur.take(4 * m, "row values")?.chunks_exact(4) {
            values.push(f32::from_le_bytes(chunk.try_into().unwrap()));
        }
    }
    let body_end = cur.pos;
    let stored = cur.u32("crc")?;
    if cur.pos != bytes.len() {
        return Err(FormatError::TrailingBytes(bytes.len() - cur.pos));
    }
    let computed = crc32fast::hash(&bytes[..body_end]);
    if stored != computed {
        return Err(FormatError::CrcMismatch { stored, computed });
    }

    let source_tag =
        std::str::from_utf8(tag).map_err(|_| FormatError::InvalidUtf8("source tag"))?;
    let ids = raw_ids
        .into_iter()
        .map(|b| {
            std::str::from_utf8(b)
                .map(str::to_owned)
                .map_err(|_| FormatError::InvalidUtf8("row id"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(FormatError::NonFinite {
            row: i / m,
            col: i % m,
        });
    }
    let n = ids.len();
    let vectors = Matrix::from_vec(n, m, values.into_iter().map(f64::from).collect())
        .map_err(|e| FormatError::Invalid(e.to_string()))?;
    EmbeddingTable::new(ids, vectors, source_tag).map_err(|e| FormatError::Invalid(e.to_string()))
}

pub fn write_embedding_file(t: &EmbeddingTable, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_embedding_file(t)?)?;
    Ok(())
}

pub fn read_embedding_file(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    Ok(decode_embedding_file(&fs::read(path)?)?)
}
