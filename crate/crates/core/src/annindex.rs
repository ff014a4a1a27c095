//! IVF-flat approximate nearest-neighbour index with spherical k-means.
//!
//! Every vector is unit-normalized, so inner product equals cosine
//! similarity. Search probes the `nprobe` partitions whose centroids score
//! highest against the query and ranks candidates by inner product, breaking
//! ties by ascending id.

use std::cmp::Ordering;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::embedding::{normalize_slice, ByteReader, EmbeddingStore};
use crate::error::{Error, Result};
use crate::scalar::{dot, Scalar};

pub const INDEX_MAGIC: &[u8; 4] = b"DAIV";
pub const INDEX_VERSION: u32 = 1;

/// `max(1, ⌊√count⌋)`.
pub fn default_clusters(count: usize) -> usize {
    ((count as f64).sqrt().floor() as usize).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IvfParams {
    pub n_clusters: usize,
    pub seed: u64,
    pub max_iters: usize,
}

impl IvfParams {
    pub fn for_count(count: usize) -> Self {
        IvfParams {
            n_clusters: default_clusters(count),
            seed: 42,
            max_iters: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchHit<T> {
    pub sentence_id: usize,
    pub score: T,
}

/// Unit vectors with integer ids, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatVectors<T> {
    dim: usize,
    ids: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> FlatVectors<T> {
    pub fn new(dim: usize) -> Self {
        FlatVectors {
            dim,
            ids: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn with_capacity(dim: usize, n: usize) -> Self {
        FlatVectors {
            dim,
            ids: Vec::with_capacity(n),
            data: Vec::with_capacity(n * dim),
        }
    }

    /// Add a vector, normalizing it to unit length.
    pub fn push(&mut self, id: usize, values: &[T]) -> Result<()> {
        if values.len() != self.dim {
            return Err(Error::DimensionMismatch {
                key: Some(id.to_string()),
                expected: self.dim,
                found: values.len(),
            });
        }
        let unit = normalize_slice(values).map_err(|_| Error::ZeroVector {
            key: Some(id.to_string()),
        })?;
        self.ids.push(id);
        self.data.extend(unit);
        Ok(())
    }

    /// Collect store entries whose keys are integer ids.
    pub fn from_store(store: &EmbeddingStore<T>) -> Result<Self> {
        let mut out = FlatVectors::with_capacity(store.dim(), store.len());
        for (key, v) in store.iter() {
            let id = key.parse::<usize>().map_err(|_| {
                Error::InvalidParameter(format!("embedding key `{key}` is not a sentence id"))
            })?;
            out.push(id, v)?;
        }
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

#[derive(Debug, Clone, PartialEq)]
struct PostingList<T> {
    ids: Vec<usize>,
    data: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IvfIndex<T> {
    dim: usize,
    centroids: Vec<T>,
    lists: Vec<PostingList<T>>,
}

fn rank<T: Scalar>(a: &SearchHit<T>, b: &SearchHit<T>) -> Ordering {
    b.score
        .partial_cmp(&a.score)
        .unwrap_or(Ordering::Equal)
        .then(a.sentence_id.cmp(&b.sentence_id))
}

fn top_n<T: Scalar>(mut hits: Vec<SearchHit<T>>, n: usize) -> Vec<SearchHit<T>> {
    if n == 0 {
        return Vec::new();
    }
    if hits.len() > n {
        hits.select_nth_unstable_by(n - 1, rank);
        hits.truncate(n);
    }
    hits.sort_by(rank);
    hits
}

fn check_query<T: Scalar>(dim: usize, query: &[T]) -> Result<Vec<T>> {
    if query.len() != dim {
        return Err(Error::DimensionMismatch {
            key: None,
            expected: dim,
            found: query.len(),
        });
    }
    normalize_slice(query)
}

/// Exact top-`n` by inner product over every vector.
pub fn exhaustive_search<T: Scalar>(
    vectors: &FlatVectors<T>,
    query: &[T],
    n: usize,
) -> Result<Vec<SearchHit<T>>> {
    let q = check_query(vectors.dim, query)?;
    let hits = (0..vectors.len())
        .map(|i| SearchHit {
            sentence_id: vectors.ids[i],
            score: dot(vectors.row(i), &q),
        })
        .collect();
    Ok(top_n(hits, n))
}

fn nearest_centroid<T: Scalar>(x: &[T], centroids: &[T], dim: usize) -> (usize, T) {
    let mut best = (0, T::neg_infinity());
    for (c, centroid) in centroids.chunks_exact(dim).enumerate() {
        let s = dot(x, centroid);
        if s > best.1 {
            best = (c, s);
        }
    }
    best
}

fn assign<T: Scalar>(vectors: &FlatVectors<T>, centroids: &[T]) -> Vec<(usize, T)> {
    (0..vectors.len())
        .into_par_iter()
        .map(|i| nearest_centroid(vectors.row(i), centroids, vectors.dim))
        .collect()
}

fn kmeans_plus_plus<T: Scalar>(vectors: &FlatVectors<T>, k: usize, rng: &mut ChaCha8Rng) -> Vec<T> {
    let n = vectors.len();
    let dim = vectors.dim;
    let mut chosen = vec![false; n];
    let mut centroids = Vec::with_capacity(k * dim);
    let mut best = vec![T::neg_infinity(); n];

    let mut pick = rng.gen_range(0..n);
    for _ in 0..k {
        chosen[pick] = true;
        let c = vectors.row(pick).to_vec();
        best.par_iter_mut().enumerate().for_each(|(i, b)| {
            let s = dot(vectors.row(i), &c);
            if s > *b {
                *b = s;
            }
        });
        centroids.extend(c);

        // Squared chord distance between unit vectors is 2(1 - cos).
        let weights: Vec<f64> = (0..n)
            .map(|i| {
                if chosen[i] {
                    0.0
                } else {
                    (1.0 - best[i].as_f64()).max(0.0)
                }
            })
            .collect();
        let total: f64 = weights.iter().sum();
        pick = if total > 0.0 {
            let r = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut sel = None;
            for (i, w) in weights.iter().enumerate() {
                if *w > 0.0 {
                    acc += w;
                    sel = Some(i);
                    if acc > r {
                        break;
                    }
                }
            }
            sel.expect("positive total weight")
        } else {
            let remaining: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            if remaining.is_empty() {
                break;
            }
            remaining[rng.gen_range(0..remaining.len())]
        };
    }
    centroids
}

impl<T: Scalar> IvfIndex<T> {
    /// Cluster `vectors` with seeded spherical k-means and build the
    /// posting lists.
    pub fn build(vectors: &FlatVectors<T>, params: &IvfParams) -> Result<Self> {
        let n = vectors.len();
        let k = params.n_clusters;
        if n == 0 {
            return Err(Error::InvalidParameter(
                "cannot index an empty vector set".into(),
            ));
        }
        if k == 0 || k > n {
            return Err(Error::InvalidParameter(format!(
                "cluster count {k} must be between 1 and the number of vectors ({n})"
            )));
        }
        let dim = vectors.dim;
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let mut centroids = kmeans_plus_plus(vectors, k, &mut rng);
        let mut assignment = assign(vectors, &centroids);

        for iter in 0..params.max_iters {
            update_centroids(vectors, &assignment, &mut centroids, k);
            let next = assign(vectors, &centroids);
            let stable = next.iter().zip(&assignment).all(|(a, b)| a.0 == b.0);
            assignment = next;
            if stable {
                log::debug!("k-means converged after {} iterations", iter + 1);
                break;
            }
        }

        let mut lists: Vec<PostingList<T>> = (0..k)
            .map(|_| PostingList {
                ids: Vec::new(),
                data: Vec::new(),
            })
            .collect();
        for (i, (c, _)) in assignment.iter().enumerate() {
            lists[*c].ids.push(vectors.ids[i]);
            lists[*c].data.extend_from_slice(vectors.row(i));
        }
        Ok(IvfIndex {
            dim,
            centroids,
            lists,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_clusters(&self) -> usize {
        self.lists.len()
    }

    pub fn len(&self) -> usize {
        self.lists.iter().map(|l| l.ids.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn centroid(&self, c: usize) -> &[T] {
        &self.centroids[c * self.dim..(c + 1) * self.dim]
    }

    /// Ids stored in partition `c`, in insertion order.
    pub fn posting_list(&self, c: usize) -> &[usize] {
        &self.lists[c].ids
    }

    /// Stored (normalized) vectors of partition `c`.
    pub fn posting_vectors(&self, c: usize) -> impl Iterator<Item = (usize, &[T])> {
        let list = &self.lists[c];
        list.ids
            .iter()
            .copied()
            .zip(list.data.chunks_exact(self.dim))
    }

    pub fn search(&self, query: &[T], n: usize, nprobe: usize) -> Result<Vec<SearchHit<T>>> {
        let k = self.n_clusters();
        if nprobe == 0 || nprobe > k {
            return Err(Error::InvalidParameter(format!(
                "nprobe {nprobe} must be between 1 and {k}"
            )));
        }
        let q = check_query(self.dim, query)?;
        let centroid_hits: Vec<SearchHit<T>> = self
            .centroids
            .chunks_exact(self.dim)
            .enumerate()
            .map(|(c, centroid)| SearchHit {
                sentence_id: c,
                score: dot(centroid, &q),
            })
            .collect();
        let mut hits = Vec::new();
        for probe in top_n(centroid_hits, nprobe) {
            let list = &self.lists[probe.sentence_id];
            for (id, v) in list.ids.iter().zip(list.data.chunks_exact(self.dim)) {
                hits.push(SearchHit {
                    sentence_id: *id,
                    score: dot(v, &q),
                });
            }
        }
        Ok(top_n(hits, n))
    }

    /// Layout (little-endian): `"DAIV"`, version `u32`, scalar width `u32`,
    /// dimension `u32`, cluster count `u32`, the `k·d` centroid components,
    /// then per partition its length `u64` followed by `(id u64, d scalars)`
    /// records.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        buf.extend_from_slice(INDEX_MAGIC);
        buf.extend_from_slice(&INDEX_VERSION.to_le_bytes());
        buf.extend_from_slice(&(T::BYTES as u32).to_le_bytes());
        buf.extend_from_slice(&(self.dim as u32).to_le_bytes());
        buf.extend_from_slice(&(self.lists.len() as u32).to_le_bytes());
        for x in &self.centroids {
            x.write_le(&mut buf);
        }
        for list in &self.lists {
            buf.extend_from_slice(&(list.ids.len() as u64).to_le_bytes());
            for (id, v) in list.ids.iter().zip(list.data.chunks_exact(self.dim)) {
                buf.extend_from_slice(&(*id as u64).to_le_bytes());
                for x in v {
                    x.write_le(&mut buf);
                }
            }
        }
        buf
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(path, &bytes)
    }

    pub fn from_bytes(path: &Path, bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader {
            path,
            bytes,
            pos: 0,
        };
        if r.take(4)? != INDEX_MAGIC {
            return Err(Error::format(path, "not an index file"));
        }
        let version = r.u32()?;
        if version != INDEX_VERSION {
            return Err(Error::format(
                path,
                format!("index version {version}, expected {INDEX_VERSION}"),
            ));
        }
        let width = r.u32()? as usize;
        if width != T::BYTES {
            return Err(Error::format(
                path,
                format!("index stores {width}-byte scalars, expected {}", T::BYTES),
            ));
        }
        let dim = r.u32()? as usize;
        let k = r.u32()? as usize;
        let mut centroids = Vec::with_capacity(k * dim);
        for _ in 0..k * dim {
            centroids.push(r.scalar()?);
        }
        let mut lists = Vec::with_capacity(k);
        for _ in 0..k {
            let len = r.u64()? as usize;
            let mut ids = Vec::with_capacity(len);
            let mut data = Vec::with_capacity(len * dim);
            for _ in 0..len {
                ids.push(r.u64()? as usize);
                for _ in 0..dim {
                    data.push(r.scalar()?);
                }
            }
            lists.push(PostingList { ids, data });
        }
        if r.pos != bytes.len() {
            return Err(Error::format(path, "trailing bytes in index file"));
        }
        Ok(IvfIndex {
            dim,
            centroids,
            lists,
        })
    }
}

fn update_centroids<T: Scalar>(
    vectors: &FlatVectors<T>,
    assignment: &[(usize, T)],
    centroids: &mut [T],
    k: usize,
) {
    let dim = vectors.dim;
    let mut sums = vec![T::zero(); k * dim];
    let mut counts = vec![0usize; k];
    for (i, (c, _)) in assignment.iter().enumerate() {
        counts[*c] += 1;
        for (s, x) in sums[c * dim..(c + 1) * dim].iter_mut().zip(vectors.row(i)) {
            *s = *s + *x;
        }
    }

    // Points ordered from farthest to nearest their centroid, for reseeding.
    let mut far: Vec<usize> = (0..vectors.len()).collect();
    far.sort_by(|&a, &b| {
        assignment[a]
            .1
            .partial_cmp(&assignment[b].1)
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut far = far.into_iter();

    for c in 0..k {
        let sum = &sums[c * dim..(c + 1) * dim];
        let target = &mut centroids[c * dim..(c + 1) * dim];
        match (counts[c] > 0)
            .then(|| normalize_slice(sum))
            .and_then(Result::ok)
        {
            Some(unit) => target.copy_from_slice(&unit),
            None => {
                if let Some(p) = far.next() {
                    target.copy_from_slice(vectors.row(p));
                }
            }
        }
    }
}
