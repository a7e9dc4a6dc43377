//! Embedding stores and their on-disk formats.
//!
//! Binary layout (little-endian):
//!
//! ```text
//! "SASVEMB1"                 8 bytes
//! dim                        u32
//! count                      u32
//! count × { id_len: u16, id: [u8; id_len] (UTF-8), values: [f32; dim] }
//! ```
//!
//! Records are written in ascending id order. The TSV form has one row per
//! utterance: the id followed by `dim` tab-separated decimals.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;

use crate::{Error, Result};

pub const BINARY_MAGIC: &[u8; 8] = b"SASVEMB1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StoreKind {
    Asv,
    Cm,
}

impl StoreKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StoreKind::Asv => "asv store",
            StoreKind::Cm => "cm store",
        }
    }
}

impl fmt::Display for StoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StoreFormat {
    Binary,
    Tsv,
}

/// Utterance id to fixed-length embedding. Immutable once loaded; values are
/// held in `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    kind: StoreKind,
    dim: usize,
    entries: BTreeMap<String, Vec<f64>>,
}

impl EmbeddingStore {
    pub fn new(kind: StoreKind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::format(
                "embedding store",
                "dimension must be positive",
            ));
        }
        Ok(Self {
            kind,
            dim,
            entries: BTreeMap::new(),
        })
    }

    pub fn insert(&mut self, id: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        let id = id.into();
        if vector.len() != self.dim {
            return Err(Error::shape(self.dim, vector.len()));
        }
        if !crate::vector::all_finite(&vector) {
            return Err(Error::NonFinite("embedding"));
        }
        if self.entries.contains_key(&id) {
            return Err(Error::DuplicateId(id));
        }
        self.entries.insert(id, vector);
        Ok(())
    }

    pub fn kind(&self) -> StoreKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.entries.get(id).map(Vec::as_slice)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.entries.contains_key(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn require(&self, id: &str) -> Result<&[f64]> {
        self.get(id).ok_or_else(|| Error::MissingUtterances {
            store: self.kind.as_str(),
            ids: vec![id.to_string()],
        })
    }

    /// Ids from `ids` that are absent, deduplicated, in first-seen order.
    pub fn missing<'a, I: IntoIterator<Item = &'a str>>(&self, ids: I) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for id in ids {
            if !self.contains(id) && !out.iter().any(|m| m == id) {
                out.push(id.to_string());
            }
        }
        out
    }

    /// Mean of all vectors, `None` when empty.
    pub fn mean(&self) -> Option<Vec<f64>> {
        if self.entries.is_empty() {
            return None;
        }
        let mut acc = vec![0.0; self.dim];
        for v in self.entries.values() {
            crate::vector::axpy(1.0, v, &mut acc);
        }
        let n = self.entries.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        Some(acc)
    }

    /// Arithmetic mean of the listed utterances' embeddings.
    pub fn enrollment_embedding<S: AsRef<str>>(&self, utterance_ids: &[S]) -> Result<Vec<f64>> {
        if utterance_ids.is_empty() {
            return Err(Error::Empty("enrollment utterance list"));
        }
        let missing = self.missing(utterance_ids.iter().map(AsRef::as_ref));
        if !missing.is_empty() {
            return Err(Error::MissingUtterances {
                store: self.kind.as_str(),
                ids: missing,
            });
        }
        if let [single] = utterance_ids {
            return Ok(self.entries[single.as_ref()].clone());
        }
        let mut acc = vec![0.0; self.dim];
        for id in utterance_ids {
            crate::vector::axpy(1.0, &self.entries[id.as_ref()], &mut acc);
        }
        let n = utterance_ids.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        Ok(acc)
    }

    /// Binary encoding. Values are rounded to `f32`.
    pub fn to_binary(&self) -> Result<Vec<u8>> {
        let count = u32::try_from(self.entries.len())
            .map_err(|_| Error::format("embedding store", "too many entries"))?;
        let dim = u32::try_from(self.dim)
            .map_err(|_| Error::format("embedding store", "dimension too large"))?;
        let mut out = Vec::with_capacity(16 + self.entries.len() * (2 + 16 + 4 * self.dim));
        out.extend_from_slice(BINARY_MAGIC);
        out.extend_from_slice(&dim.to_le_bytes());
        out.extend_from_slice(&count.to_le_bytes());
        for (id, v) in &self.entries {
            let len = u16::try_from(id.len()).map_err(|_| {
                Error::format(
                    "embedding store",
                    format!("id longer than 65535 bytes: {id:.32}..."),
                )
            })?;
            out.extend_from_slice(&len.to_le_bytes());
            out.extend_from_slice(id.as_bytes());
            for &x in v {
                out.extend_from_slice(&(x as f32).to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_binary(bytes: &[u8], kind: StoreKind) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != BINARY_MAGIC {
            return Err(Error::format("embedding store", "bad magic"));
        }
        let dim = r.u32()? as usize;
        let count = r.u32()? as usize;
        let mut store = Self::new(kind, dim)?;
        // Each record needs at least 2 + 4·dim bytes.
        let min_record = 2u64 + 4 * dim as u64;
        if (count as u64).saturating_mul(min_record) > r.remaining() as u64 {
            return Err(Error::format("embedding store", "truncated file"));
        }
        for _ in 0..count {
            let len = r.u16()? as usize;
            let id = std::str::from_utf8(r.take(len)?)
                .map_err(|_| Error::format("embedding store", "id is not valid UTF-8"))?
                .to_string();
            let raw = r.take(4 * dim)?;
            let v = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                .collect();
            store.insert(id, v)?;
        }
        if r.remaining() != 0 {
            return Err(Error::format(
                "embedding store",
                "trailing bytes after last record",
            ));
        }
        Ok(store)
    }

    /// TSV encoding in shortest round-trip decimal form.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (id, v) in &self.entries {
            out.push_str(id);
            for x in v {
                let _ = write!(out, "\t{x:?}");
            }
            out.push('\n');
        }
        out
    }

    /// Parses TSV rows. The dimension is taken from the first row, so an
    /// input without rows is rejected.
    pub fn from_tsv(text: &str, kind: StoreKind) -> Result<Self> {
        let mut store: Option<Self> = None;
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut cols = line.split('\t');
            let id = cols.next().unwrap_or_default().trim();
            if id.is_empty() {
                return Err(Error::parse(i + 1, "empty utterance id"));
            }
            let values = cols
                .map(|c| {
                    c.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::parse(i + 1, format!("invalid value {c:?}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            let s = match store.as_mut() {
                Some(s) => s,
                None => store.insert(
                    Self::new(kind, values.len())
                        .map_err(|_| Error::parse(i + 1, "row has no values"))?,
                ),
            };
            s.insert(id, values)
                .map_err(|e| Error::parse(i + 1, e.to_string()))?;
        }
        store.ok_or_else(|| Error::format("embedding store", "TSV input has no rows"))
    }

    /// Detects the format from the magic bytes.
    pub fn from_bytes(bytes: &[u8], kind: StoreKind) -> Result<Self> {
        if bytes.starts_with(BINARY_MAGIC) {
            Self::from_binary(bytes, kind)
        } else {
            let text = std::str::from_utf8(bytes)
                .map_err(|_| Error::format("embedding store", "neither binary nor UTF-8 TSV"))?;
            Self::from_tsv(text, kind)
        }
    }

    pub fn load(path: impl AsRef<Path>, kind: StoreKind) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?, kind)
    }

    pub fn write(&self, path: impl AsRef<Path>, format: StoreFormat) -> Result<()> {
        match format {
            StoreFormat::Binary => fs::write(path, self.to_binary()?)?,
            StoreFormat::Tsv => fs::write(path, self.to_tsv())?,
        }
        Ok(())
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.remaining() {
            return Err(Error::format("embedding store", "truncated file"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}
