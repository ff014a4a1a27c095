//! Embedding vectors, precomputed embedding tables and a deterministic
//! character 3-gram embedder for running without a neural encoder.

use std::collections::HashMap;
use std::path::Path;

use crate::corpusio::{read_lines, LineWriter};
use crate::error::{Error, Result};
use crate::scalar::{dot, Scalar};

/// Dimension of multilingual BERT-base hidden states.
pub const BERT_BASE_DIM: usize = 768;

/// Magic bytes of the binary embedding format.
pub const BINARY_MAGIC: &[u8; 4] = b"DAEM";

/// A dense vector with finite components.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding<T>(Vec<T>);

impl<T: Scalar> Embedding<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter(
                "embedding must have at least one component".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { key: None });
        }
        Ok(Embedding(values))
    }

    pub fn values(&self) -> &[T] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> T {
        dot(&self.0, &self.0).sqrt()
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }
}

/// Scale `v` to unit L2 norm.
pub fn normalize_vector<T: Scalar>(v: &Embedding<T>) -> Result<Embedding<T>> {
    normalize_slice(v.values()).map(Embedding)
}

pub(crate) fn normalize_slice<T: Scalar>(v: &[T]) -> Result<Vec<T>> {
    let norm = dot(v, v).sqrt();
    if norm == T::zero() || !norm.is_finite() {
        return Err(Error::ZeroVector { key: None });
    }
    Ok(v.iter().map(|x| *x / norm).collect())
}

/// Cosine similarity, clamped to `[-1, 1]`.
pub fn cosine<T: Scalar>(a: &Embedding<T>, b: &Embedding<T>) -> Result<T> {
    cosine_slices(a.values(), b.values())
}

pub(crate) fn cosine_slices<T: Scalar>(a: &[T], b: &[T]) -> Result<T> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            key: None,
            expected: a.len(),
            found: b.len(),
        });
    }
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == T::zero() || nb == T::zero() {
        return Err(Error::ZeroVector { key: None });
    }
    let c = dot(a, b) / (na * nb);
    Ok(c.max(-T::one()).min(T::one()))
}

/// Table of unit-normalized vectors keyed by term surface or sentence line
/// number. Keeps insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore<T> {
    dim: usize,
    keys: Vec<String>,
    data: Vec<T>,
    index: HashMap<String, usize>,
}

impl<T: Scalar> EmbeddingStore<T> {
    pub fn new(dim: usize) -> Self {
        EmbeddingStore {
            dim,
            keys: Vec::new(),
            data: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Insert a vector, normalizing it. Rejects wrong dimensions, zero or
    /// non-finite vectors and repeated keys.
    pub fn insert(&mut self, key: impl Into<String>, values: &[T]) -> Result<()> {
        let key = key.into();
        if values.len() != self.dim {
            return Err(Error::DimensionMismatch {
                key: Some(key),
                expected: self.dim,
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { key: Some(key) });
        }
        let unit = normalize_slice(values).map_err(|_| Error::ZeroVector {
            key: Some(key.clone()),
        })?;
        if self.index.contains_key(&key) {
            return Err(Error::InvalidParameter(format!(
                "duplicate embedding key `{key}`"
            )));
        }
        self.index.insert(key.clone(), self.keys.len());
        self.keys.push(key);
        self.data.extend(unit);
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&[T]> {
        self.index.get(key).map(|&i| self.row(i))
    }

    pub fn embedding(&self, key: &str) -> Option<Embedding<T>> {
        self.get(key).map(|v| Embedding(v.to_vec()))
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn keys(&self) -> &[String] {
        &self.keys
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[T])> {
        self.keys
            .iter()
            .enumerate()
            .map(|(i, k)| (k.as_str(), self.row(i)))
    }

    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        let mut w = LineWriter::create(path)?;
        for (key, v) in self.iter() {
            let floats: Vec<String> = v.iter().map(|x| x.to_string()).collect();
            w.line(&format!("{key}\t{}", floats.join(" ")))?;
        }
        w.finish()
    }

    /// Binary layout, all integers little-endian:
    /// `"DAEM"`, dimension `u32`, record count `u64`, then per record the key
    /// length `u32`, the UTF-8 key bytes and `d` `f32` components.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::with_capacity(16 + self.data.len() * 4);
        buf.extend_from_slice(BINARY_MAGIC);
        buf.extend_from_slice(&(self.dim as u32).to_le_bytes());
        buf.extend_from_slice(&(self.len() as u64).to_le_bytes());
        for (key, v) in self.iter() {
            buf.extend_from_slice(&(key.len() as u32).to_le_bytes());
            buf.extend_from_slice(key.as_bytes());
            for x in v {
                buf.extend_from_slice(&(x.as_f64() as f32).to_le_bytes());
            }
        }
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }
}

/// Load a TSV (`key<TAB>f1 f2 … fd`) or binary embedding file; the format
/// is detected from the leading magic bytes. Vectors are L2-normalized.
pub fn load_embeddings<T: Scalar>(path: &Path) -> Result<EmbeddingStore<T>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let store = if bytes.starts_with(BINARY_MAGIC) {
        parse_binary(path, &bytes)?
    } else {
        drop(bytes);
        parse_tsv(path)?
    };
    log::info!(
        "{}: {} embeddings of dimension {}",
        path.display(),
        store.len(),
        store.dim()
    );
    Ok(store)
}

fn parse_tsv<T: Scalar>(path: &Path) -> Result<EmbeddingStore<T>> {
    let mut store: Option<EmbeddingStore<T>> = None;
    for (n, line) in read_lines(path)?.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (key, floats) = line
            .split_once('\t')
            .ok_or_else(|| Error::format(path, format!("line {}: missing tab after key", n + 1)))?;
        let values = floats
            .split_whitespace()
            .map(|f| f.parse::<f64>().map(T::from_f64_lossy))
            .collect::<Result<Vec<T>, _>>()
            .map_err(|e| Error::format(path, format!("line {}: {e}", n + 1)))?;
        let store = store.get_or_insert_with(|| EmbeddingStore::new(values.len()));
        store.insert(key, &values)?;
    }
    store
        .filter(|s| s.dim() > 0)
        .ok_or_else(|| Error::format(path, "no embeddings"))
}

fn parse_binary<T: Scalar>(path: &Path, bytes: &[u8]) -> Result<EmbeddingStore<T>> {
    let mut r = ByteReader {
        path,
        bytes,
        pos: 4,
    };
    let dim = r.u32()? as usize;
    let count = r.u64()?;
    if dim == 0 {
        return Err(Error::format(path, "dimension is zero"));
    }
    let mut store = EmbeddingStore::new(dim);
    let mut row = Vec::with_capacity(dim);
    for _ in 0..count {
        let len = r.u32()? as usize;
        let key = std::str::from_utf8(r.take(len)?)
            .map_err(|_| Error::format(path, "key is not UTF-8"))?
            .to_string();
        row.clear();
        for _ in 0..dim {
            row.push(T::from_f64_lossy(f32::read_le(r.take(4)?) as f64));
        }
        store.insert(key, &row)?;
    }
    if r.pos != bytes.len() {
        return Err(Error::format(path, "trailing bytes after last record"));
    }
    Ok(store)
}

pub(crate) struct ByteReader<'a> {
    pub path: &'a Path,
    pub bytes: &'a [u8],
    pub pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::format(self.path, "unexpected end of file")),
        }
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn scalar<T: Scalar>(&mut self) -> Result<T> {
        Ok(T::read_le(self.take(T::BYTES)?))
    }

    pub fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        std::str::from_utf8(self.take(len)?)
            .map(str::to_string)
            .map_err(|_| Error::format(self.path, "string is not UTF-8"))
    }
}

fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in seed.to_le_bytes().iter().chain(bytes) {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic stand-in for a sentence encoder.
///
/// Each character 3-gram of the text (padded with boundary markers) is
/// hashed with the seed into a random ±1 vector; the vectors are summed and
/// L2-normalized. Accumulation is done in integers so the output is bitwise
/// identical on every platform.
pub fn fallback_embed<T: Scalar>(text: &str, dim: usize, seed: u64) -> Result<Embedding<T>> {
    if dim < 8 {
        return Err(Error::InvalidParameter(format!(
            "fallback embedding dimension {dim} < 8"
        )));
    }
    if text.trim().is_empty() {
        return Err(Error::EmptyText);
    }
    let mut padded = vec!['\u{2}'];
    padded.extend(text.chars());
    padded.push('\u{3}');

    let mut sums = vec![0i64; dim];
    let mut first: Option<Vec<i64>> = None;
    let mut gram = String::with_capacity(12);
    for window in padded.windows(3) {
        gram.clear();
        gram.extend(window);
        let mut state = fnv1a(seed, gram.as_bytes());
        let mut bits = 0u64;
        for (i, s) in sums.iter_mut().enumerate() {
            if i % 64 == 0 {
                bits = splitmix64(&mut state);
            }
            *s += if bits & 1 == 1 { 1 } else { -1 };
            bits >>= 1;
        }
        if first.is_none() {
            first = Some(sums.clone());
        }
    }
    if sums.iter().all(|&s| s == 0) {
        sums = first.expect("at least one 3-gram");
    }
    let norm = (sums.iter().map(|&s| (s * s) as f64).sum::<f64>()).sqrt();
    Embedding::new(
        sums.iter()
            .map(|&s| T::from_f64_lossy(s as f64 / norm))
            .collect(),
    )
}

/// Source of embeddings for arbitrary text (dictionary terms, phrases,
/// sentences).
pub trait TextEmbedder<T: Scalar>: Sync {
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Embedding<T>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FallbackEmbedder {
    pub dim: usize,
    pub seed: u64,
}

impl<T: Scalar> TextEmbedder<T> for FallbackEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Embedding<T>> {
        fallback_embed(text, self.dim, self.seed)
    }
}

/// Looks text up in a store, optionally falling back to the 3-gram embedder
/// for missing keys.
pub struct StoreEmbedder<'a, T> {
    pub store: &'a EmbeddingStore<T>,
    pub fallback: Option<FallbackEmbedder>,
}

impl<T: Scalar> TextEmbedder<T> for StoreEmbedder<'_, T> {
    fn dim(&self) -> usize {
        self.store.dim()
    }

    fn embed(&self, text: &str) -> Result<Embedding<T>> {
        if let Some(e) = self.store.embedding(text) {
            return Ok(e);
        }
        match self.fallback {
            Some(fb) if fb.dim == self.store.dim() => fallback_embed(text, fb.dim, fb.seed),
            Some(fb) => Err(Error::DimensionMismatch {
                key: Some(text.to_string()),
                expected: self.store.dim(),
                found: fb.dim,
            }),
            None => Err(Error::InvalidParameter(format!(
                "no embedding for `{text}`"
            ))),
        }
    }
}
