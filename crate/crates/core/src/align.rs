//! Reparameterized IBM Model 2 word alignment in the style of `fast_align`.
//!
//! Each target token `j` of a sentence pair with `m` source and `n` target
//! tokens is generated either by a null word, with fixed probability
//! `p_null`, or by source token `i` with probability
//! `(1 - p_null) · δ(i | j, m, n)` where
//! `δ ∝ exp(-λ · |i/m - j/n|)` (positions 1-based). Lexical probabilities
//! `t(target | source)` are stored sparsely, one sorted row per source word.
//!
//! Training is EM. The tension `λ` is re-estimated after every E-step by
//! maximizing the expected complete-data log-likelihood in `λ` (a concave
//! one-dimensional problem solved by bisection on its derivative), which keeps
//! the corpus log-likelihood non-decreasing.

use std::collections::{BTreeMap, HashMap};
use std::ops::Range;
use std::path::Path;

use rayon::prelude::*;

use crate::corpusio::{Bitext, LineWriter};
use crate::embedding::ByteReader;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MODEL_MAGIC: &[u8; 4] = b"DAAL";
pub const MODEL_VERSION: u32 = 1;

/// Probability assumed for unseen word pairs.
pub const FLOOR_PROB: f64 = 1e-9;
/// Table entries below this are dropped between iterations.
pub const PRUNE_BELOW: f64 = 1e-9;

const LAMBDA_MIN: f64 = 0.1;
const LAMBDA_MAX: f64 = 14.0;
const NULL_WORD: &str = "<null>";
const CHUNK: usize = 512;
const BATCH_CHUNKS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlignConfig {
    pub iterations: usize,
    pub lambda_init: f64,
    pub p_null: f64,
    pub optimize_lambda: bool,
}

impl Default for AlignConfig {
    fn default() -> Self {
        AlignConfig {
            iterations: 5,
            lambda_init: 4.0,
            p_null: 0.08,
            optimize_lambda: true,
        }
    }
}

impl AlignConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidParameter(
                "alignment iterations must be at least 1".into(),
            ));
        }
        if !(self.lambda_init > 0.0 && self.lambda_init.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lambda {} must be positive",
                self.lambda_init
            )));
        }
        if !(self.p_null > 0.0 && self.p_null < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "p_null {} must lie in (0, 1)",
                self.p_null
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Vocab {
    words: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocab {
    fn intern(&mut self, w: &str) -> u32 {
        if let Some(&id) = self.index.get(w) {
            return id;
        }
        let id = self.words.len() as u32;
        self.words.push(w.to_string());
        self.index.insert(w.to_string(), id);
        id
    }

    pub fn id(&self, w: &str) -> Option<u32> {
        self.index.get(w).copied()
    }

    pub fn word(&self, id: u32) -> &str {
        &self.words[id as usize]
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Sparse `t(target | source)` in compressed-row form.
#[derive(Debug, Clone, PartialEq)]
struct Table<T> {
    offsets: Vec<usize>,
    targets: Vec<u32>,
    probs: Vec<T>,
}

impl<T: Scalar> Table<T> {
    fn row(&self, e: u32) -> Range<usize> {
        self.offsets[e as usize]..self.offsets[e as usize + 1]
    }

    fn find(&self, e: u32, f: u32) -> Option<usize> {
        let row = self.row(e);
        self.targets[row.clone()]
            .binary_search(&f)
            .ok()
            .map(|k| row.start + k)
    }

    fn prob(&self, e: u32, f: u32) -> Option<T> {
        self.find(e, f).map(|p| self.probs[p])
    }

    /// Keep entries at or above `threshold` and renormalize each row.
    fn prune(&mut self, threshold: T) {
        let mut offsets = Vec::with_capacity(self.offsets.len());
        let mut targets = Vec::with_capacity(self.targets.len());
        let mut probs = Vec::with_capacity(self.probs.len());
        offsets.push(0);
        for e in 0..self.offsets.len() - 1 {
            let row = self.row(e as u32);
            let start = probs.len();
            for p in row {
                if self.probs[p] >= threshold {
                    targets.push(self.targets[p]);
                    probs.push(self.probs[p]);
                }
            }
            let total: T = probs[start..].iter().copied().sum();
            if total > T::zero() {
                for p in &mut probs[start..] {
                    *p = *p / total;
                }
            }
            offsets.push(probs.len());
        }
        *self = Table {
            offsets,
            targets,
            probs,
        };
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentModel<T> {
    pub lambda: T,
    pub p_null: T,
    source_vocab: Vocab,
    target_vocab: Vocab,
    table: Table<T>,
    log_likelihood: Vec<f64>,
}

struct Encoded {
    src: Vec<u32>,
    tgt: Vec<u32>,
}

#[derive(Default)]
struct EStats<T> {
    counts: Vec<(u32, T)>,
    log_likelihood: f64,
    emp_feature: f64,
    /// Non-null posterior mass per target position, keyed by `(m, n)`.
    mass: BTreeMap<(u32, u32), Vec<f64>>,
}

impl<T: Scalar> EStats<T> {
    /// Merge a later part; its counts are added into `acc` when given.
    fn absorb(&mut self, other: EStats<T>, acc: Option<&mut [T]>) {
        if let Some(acc) = acc {
            for (slot, c) in other.counts {
                acc[slot as usize] = acc[slot as usize] + c;
            }
        }
        self.log_likelihood += other.log_likelihood;
        self.emp_feature += other.emp_feature;
        for (k, v) in other.mass {
            let slot = self.mass.entry(k).or_insert_with(|| vec![0.0; v.len()]);
            for (a, b) in slot.iter_mut().zip(v) {
                *a += b;
            }
        }
    }
}

fn feature(i: usize, j: usize, m: usize, n: usize) -> f64 {
    -((i + 1) as f64 / m as f64 - (j + 1) as f64 / n as f64).abs()
}

/// Normalized diagonal prior over source positions for target position `j`.
fn diagonal<T: Scalar>(lambda: T, j: usize, m: usize, n: usize, out: &mut Vec<T>) {
    out.clear();
    let mut z = T::zero();
    for i in 0..m {
        let a = (lambda * T::from_f64_lossy(feature(i, j, m, n))).exp();
        z = z + a;
        out.push(a);
    }
    for a in out.iter_mut() {
        *a = *a / z;
    }
}

impl<T: Scalar> AlignmentModel<T> {
    pub fn source_vocab(&self) -> &Vocab {
        &self.source_vocab
    }

    pub fn target_vocab(&self) -> &Vocab {
        &self.target_vocab
    }

    /// Corpus log-likelihood before each EM iteration and after the last.
    pub fn log_likelihood_history(&self) -> &[f64] {
        &self.log_likelihood
    }

    /// `t(target | source)`; `None` if either word is unknown or the entry
    /// was pruned. Use `None` for the source to query the null word.
    pub fn prob(&self, source: Option<&str>, target: &str) -> Option<T> {
        let e = match source {
            None => 0,
            Some(s) => self.source_vocab.id(s)?,
        };
        let f = self.target_vocab.id(target)?;
        self.table.prob(e, f)
    }

    /// Sum of `t(· | source)` over all targets.
    pub fn row_sum(&self, source: Option<&str>) -> Option<T> {
        let e = match source {
            None => 0,
            Some(s) => self.source_vocab.id(s)?,
        };
        Some(self.table.probs[self.table.row(e)].iter().copied().sum())
    }

    /// Build a model from explicit probabilities, mainly for tests and
    /// tooling. Rows are normalized.
    pub fn from_entries<'a>(
        entries: impl IntoIterator<Item = (Option<&'a str>, &'a str, f64)>,
        lambda: f64,
        p_null: f64,
    ) -> Self {
        let mut sv = Vocab::default();
        sv.intern(NULL_WORD);
        let mut tv = Vocab::default();
        let mut cells: Vec<(u32, u32, f64)> = Vec::new();
        for (s, t, p) in entries {
            let e = s.map_or(0, |s| sv.intern(s));
            let f = tv.intern(t);
            cells.push((e, f, p));
        }
        cells.sort_by_key(|c| (c.0, c.1));
        cells.dedup_by_key(|c| (c.0, c.1));
        let mut offsets = vec![0usize; sv.len() + 1];
        for c in &cells {
            offsets[c.0 as usize + 1] += 1;
        }
        for i in 0..sv.len() {
            offsets[i + 1] += offsets[i];
        }
        let mut table = Table {
            offsets,
            targets: cells.iter().map(|c| c.1).collect(),
            probs: cells.iter().map(|c| T::from_f64_lossy(c.2)).collect(),
        };
        table.prune(T::zero());
        AlignmentModel {
            lambda: T::from_f64_lossy(lambda),
            p_null: T::from_f64_lossy(p_null),
            source_vocab: sv,
            target_vocab: tv,
            table,
            log_likelihood: Vec::new(),
        }
    }

    fn e_step_sentence(
        &self,
        s: &Encoded,
        stats: &mut EStats<T>,
        collect: bool,
        scratch: &mut Vec<T>,
    ) {
        let (m, n) = (s.src.len(), s.tgt.len());
        let p_null = self.p_null;
        let not_null = T::one() - p_null;
        let mut slots: Vec<Option<usize>> = Vec::with_capacity(m + 1);
        let mut probs: Vec<T> = Vec::with_capacity(m + 1);
        let mut mass_row = vec![0.0; if collect { n } else { 0 }];
        for (j, &f) in s.tgt.iter().enumerate() {
            diagonal(self.lambda, j, m, n, scratch);
            slots.clear();
            probs.clear();
            let null_slot = self.table.find(0, f);
            slots.push(null_slot);
            probs.push(null_slot.map_or(T::zero(), |p| p_null * self.table.probs[p]));
            for (i, &e) in s.src.iter().enumerate() {
                let slot = self.table.find(e, f);
                slots.push(slot);
                probs.push(slot.map_or(T::zero(), |p| not_null * scratch[i] * self.table.probs[p]));
            }
            let sum: T = probs.iter().copied().sum();
            if sum <= T::zero() {
                continue;
            }
            stats.log_likelihood += sum.as_f64().ln();
            if !collect {
                continue;
            }
            for (k, (slot, p)) in slots.iter().zip(&probs).enumerate() {
                let post = *p / sum;
                if let Some(slot) = slot {
                    stats.counts.push((*slot as u32, post));
                }
                if k > 0 {
                    let post = post.as_f64();
                    stats.emp_feature += post * feature(k - 1, j, m, n);
                    mass_row[j] += post;
                }
            }
        }
        if collect {
            let slot = stats
                .mass
                .entry((m as u32, n as u32))
                .or_insert_with(|| vec![0.0; n]);
            for (a, b) in slot.iter_mut().zip(mass_row) {
                *a += b;
            }
        }
    }

    /// One pass over the corpus. Chunks are processed in parallel and merged
    /// in corpus order, so results do not depend on the thread count.
    fn e_step(&self, corpus: &[Encoded], mut acc: Option<&mut [T]>) -> EStats<T> {
        let collect = acc.is_some();
        let mut total = EStats::default();
        for batch in corpus.chunks(CHUNK * BATCH_CHUNKS) {
            let parts: Vec<EStats<T>> = batch
                .par_chunks(CHUNK)
                .map(|chunk| {
                    let mut stats = EStats::default();
                    let mut scratch = Vec::new();
                    for s in chunk {
                        self.e_step_sentence(s, &mut stats, collect, &mut scratch);
                    }
                    stats
                })
                .collect();
            for part in parts {
                total.absorb(part, acc.as_deref_mut());
            }
        }
        total
    }

    fn m_step(&mut self, acc: &[T]) {
        for e in 0..self.table.offsets.len() - 1 {
            let row = self.table.row(e as u32);
            let total: T = acc[row.clone()].iter().copied().sum();
            if total > T::zero() {
                for p in row {
                    self.table.probs[p] = acc[p] / total;
                }
            }
        }
        self.table.prune(T::from_f64_lossy(PRUNE_BELOW));
    }

    /// Tension maximizing the expected complete-data log-likelihood.
    fn optimize_lambda(&self, emp: f64, mass: &BTreeMap<(u32, u32), Vec<f64>>) -> f64 {
        let current = self.lambda.as_f64();
        let lo = LAMBDA_MIN.min(current);
        let hi = LAMBDA_MAX.max(current);
        let gradient = |lambda: f64| -> f64 {
            let mut model = 0.0;
            for (&(m, n), weights) in mass {
                let (m, n) = (m as usize, n as usize);
                for (j, w) in weights.iter().enumerate() {
                    if *w == 0.0 {
                        continue;
                    }
                    let (mut z, mut zh) = (0.0, 0.0);
                    for i in 0..m {
                        let h = feature(i, j, m, n);
                        let a = (lambda * h).exp();
                        z += a;
                        zh += a * h;
                    }
                    model += w * zh / z;
                }
            }
            emp - model
        };
        if gradient(hi) >= 0.0 {
            return hi;
        }
        if gradient(lo) <= 0.0 {
            return lo;
        }
        let (mut a, mut b) = (lo, hi);
        for _ in 0..60 {
            let mid = 0.5 * (a + b);
            if gradient(mid) > 0.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        0.5 * (a + b)
    }

    /// Most probable link for every target token. Unknown target words are
    /// linked to null; ties prefer null, then the smallest source index.
    pub fn viterbi_align(&self, source: &[String], target: &[String]) -> AlignmentLinks {
        let (m, n) = (source.len(), target.len());
        let src: Vec<Option<u32>> = source.iter().map(|w| self.source_vocab.id(w)).collect();
        let floor = T::from_f64_lossy(FLOOR_PROB);
        let not_null = T::one() - self.p_null;
        let mut prior = Vec::new();
        let mut per_target = Vec::with_capacity(n);
        for (j, word) in target.iter().enumerate() {
            let Some(f) = self.target_vocab.id(word) else {
                per_target.push(None);
                continue;
            };
            diagonal(self.lambda, j, m, n, &mut prior);
            let mut best = (None, self.p_null * self.table.prob(0, f).unwrap_or(floor));
            for (i, e) in src.iter().enumerate() {
                let t = e.and_then(|e| self.table.prob(e, f)).unwrap_or(floor);
                let score = not_null * prior[i] * t;
                if score > best.1 {
                    best = (Some(i), score);
                }
            }
            per_target.push(best.0);
        }
        AlignmentLinks {
            source_len: m,
            per_target,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        buf.extend_from_slice(MODEL_MAGIC);
        buf.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        buf.extend_from_slice(&(T::BYTES as u32).to_le_bytes());
        buf.extend_from_slice(&self.lambda.as_f64().to_le_bytes());
        buf.extend_from_slice(&self.p_null.as_f64().to_le_bytes());
        for vocab in [&self.source_vocab, &self.target_vocab] {
            buf.extend_from_slice(&(vocab.len() as u32).to_le_bytes());
            for w in &vocab.words {
                buf.extend_from_slice(&(w.len() as u32).to_le_bytes());
                buf.extend_from_slice(w.as_bytes());
            }
        }
        buf.extend_from_slice(&(self.table.probs.len() as u64).to_le_bytes());
        for e in 0..self.source_vocab.len() {
            let row = self.table.row(e as u32);
            buf.extend_from_slice(&(row.len() as u32).to_le_bytes());
            for p in row {
                buf.extend_from_slice(&self.table.targets[p].to_le_bytes());
                self.table.probs[p].write_le(&mut buf);
            }
        }
        buf.extend_from_slice(&(self.log_likelihood.len() as u32).to_le_bytes());
        for ll in &self.log_likelihood {
            buf.extend_from_slice(&ll.to_le_bytes());
        }
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let mut r = ByteReader {
            path,
            bytes: &bytes,
            pos: 0,
        };
        if r.take(4)? != MODEL_MAGIC {
            return Err(Error::format(path, "not an alignment model file"));
        }
        let version = r.u32()?;
        if version != MODEL_VERSION {
            return Err(Error::format(
                path,
                format!("model version {version}, expected {MODEL_VERSION}"),
            ));
        }
        let width = r.u32()? as usize;
        if width != T::BYTES {
            return Err(Error::format(
                path,
                format!("model stores {width}-byte scalars, expected {}", T::BYTES),
            ));
        }
        let lambda = T::from_f64_lossy(r.f64()?);
        let p_null = T::from_f64_lossy(r.f64()?);
        let mut vocabs = [Vocab::default(), Vocab::default()];
        for vocab in &mut vocabs {
            let count = r.u32()?;
            for _ in 0..count {
                let w = r.string()?;
                vocab.intern(&w);
            }
        }
        let [source_vocab, target_vocab] = vocabs;
        let nnz = r.u64()? as usize;
        let mut offsets = Vec::with_capacity(source_vocab.len() + 1);
        let mut targets = Vec::with_capacity(nnz);
        let mut probs = Vec::with_capacity(nnz);
        offsets.push(0);
        for _ in 0..source_vocab.len() {
            let len = r.u32()?;
            for _ in 0..len {
                targets.push(r.u32()?);
                probs.push(r.scalar()?);
            }
            offsets.push(probs.len());
        }
        if probs.len() != nnz {
            return Err(Error::format(path, "entry count does not match header"));
        }
        let count = r.u32()?;
        let mut log_likelihood = Vec::with_capacity(count as usize);
        for _ in 0..count {
            log_likelihood.push(r.f64()?);
        }
        if r.pos != bytes.len() {
            return Err(Error::format(path, "trailing bytes in model file"));
        }
        Ok(AlignmentModel {
            lambda,
            p_null,
            source_vocab,
            target_vocab,
            table: Table {
                offsets,
                targets,
                probs,
            },
            log_likelihood,
        })
    }
}

fn merge_sorted(a: Vec<u64>, b: Vec<u64>) -> Vec<u64> {
    if a.is_empty() {
        return b;
    }
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Train on `bitext` in the source → target direction.
pub fn train_alignment<T: Scalar>(
    bitext: &Bitext,
    config: &AlignConfig,
) -> Result<AlignmentModel<T>> {
    config.validate()?;
    if bitext.is_empty() {
        return Err(Error::InvalidParameter(
            "cannot train an aligner on an empty bitext".into(),
        ));
    }
    let mut sv = Vocab::default();
    sv.intern(NULL_WORD);
    let mut tv = Vocab::default();
    let corpus: Vec<Encoded> = bitext
        .pairs
        .iter()
        .map(|p| Encoded {
            src: p.source.iter().map(|w| sv.intern(w)).collect(),
            tgt: p.target.iter().map(|w| tv.intern(w)).collect(),
        })
        .collect();
    if tv.len() > u32::MAX as usize || sv.len() > u32::MAX as usize {
        return Err(Error::InvalidParameter("vocabulary too large".into()));
    }

    let mut keys: Vec<u64> = Vec::new();
    for batch in corpus.chunks(CHUNK * BATCH_CHUNKS) {
        let mut part: Vec<u64> = batch
            .par_iter()
            .flat_map_iter(|s| {
                s.tgt.iter().flat_map(move |&f| {
                    std::iter::once(0u32)
                        .chain(s.src.iter().copied())
                        .map(move |e| ((e as u64) << 32) | f as u64)
                })
            })
            .collect();
        part.par_sort_unstable();
        part.dedup();
        keys = merge_sorted(keys, part);
    }
    if keys.len() > u32::MAX as usize {
        return Err(Error::InvalidParameter(
            "too many co-occurring word pairs".into(),
        ));
    }

    let mut offsets = vec![0usize; sv.len() + 1];
    for k in &keys {
        offsets[(k >> 32) as usize + 1] += 1;
    }
    for i in 0..sv.len() {
        offsets[i + 1] += offsets[i];
    }
    let targets: Vec<u32> = keys.iter().map(|k| *k as u32).collect();
    drop(keys);
    let mut probs = vec![T::zero(); targets.len()];
    for e in 0..sv.len() {
        let row = offsets[e]..offsets[e + 1];
        let uniform = T::one() / T::from_usize(row.len().max(1)).unwrap_or_else(T::one);
        for p in row {
            probs[p] = uniform;
        }
    }

    let mut model = AlignmentModel {
        lambda: T::from_f64_lossy(config.lambda_init),
        p_null: T::from_f64_lossy(config.p_null),
        source_vocab: sv,
        target_vocab: tv,
        table: Table {
            offsets,
            targets,
            probs,
        },
        log_likelihood: Vec::new(),
    };

    for iter in 0..config.iterations {
        let mut acc = vec![T::zero(); model.table.probs.len()];
        let stats = model.e_step(&corpus, Some(&mut acc));
        log::debug!(
            "EM iteration {}: log-likelihood {:.6}, lambda {:.4}",
            iter + 1,
            stats.log_likelihood,
            model.lambda.as_f64()
        );
        model.log_likelihood.push(stats.log_likelihood);
        model.m_step(&acc);
        drop(acc);
        if config.optimize_lambda {
            model.lambda = T::from_f64_lossy(model.optimize_lambda(stats.emp_feature, &stats.mass));
        }
    }
    let last = model.e_step(&corpus, None);
    model.log_likelihood.push(last.log_likelihood);
    Ok(model)
}

/// Viterbi links of one sentence pair: for each target position, the linked
/// source position or `None` for the null word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignmentLinks {
    pub source_len: usize,
    pub per_target: Vec<Option<usize>>,
}

impl AlignmentLinks {
    /// Build from `(source, target)` pairs; later pairs overwrite earlier
    /// ones on the same target position.
    pub fn from_pairs(
        source_len: usize,
        target_len: usize,
        pairs: &[(usize, usize)],
    ) -> Result<Self> {
        let mut per_target = vec![None; target_len];
        for &(i, j) in pairs {
            if i >= source_len || j >= target_len {
                return Err(Error::InvalidParameter(format!(
                    "link {i}-{j} outside a {source_len}x{target_len} sentence pair"
                )));
            }
            per_target[j] = Some(i);
        }
        Ok(AlignmentLinks {
            source_len,
            per_target,
        })
    }

    pub fn target_len(&self) -> usize {
        self.per_target.len()
    }

    /// Non-null links as `(source, target)` pairs, by target position.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.per_target
            .iter()
            .enumerate()
            .filter_map(|(j, i)| i.map(|i| (i, j)))
            .collect()
    }

    /// `i-j` pairs separated by spaces.
    pub fn to_pharaoh(&self) -> String {
        self.pairs()
            .iter()
            .map(|(i, j)| format!("{i}-{j}"))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Target span covering every target token linked into the source span
/// `[start, end)`.
///
/// Returns `None` when nothing links into the span, or when the minimal
/// contiguous cover also contains a token linked to a source position
/// outside the span. Null-linked tokens inside the cover are accepted.
pub fn project_span(
    links: &AlignmentLinks,
    start: usize,
    end: usize,
    target_len: usize,
) -> Option<(usize, usize)> {
    let inside = |i: usize| i >= start && i < end;
    let linked: Vec<usize> = links
        .per_target
        .iter()
        .enumerate()
        .filter_map(|(j, i)| i.filter(|&i| inside(i)).map(|_| j))
        .collect();
    let lo = *linked.first()?;
    let hi = *linked.last()? + 1;
    if hi > target_len {
        return None;
    }
    let consistent = links.per_target[lo..hi]
        .iter()
        .all(|i| i.is_none_or(inside));
    consistent.then_some((lo, hi))
}

/// Write one line of Pharaoh-format links per sentence pair.
pub fn write_pharaoh<'a>(
    path: &Path,
    links: impl IntoIterator<Item = &'a AlignmentLinks>,
) -> Result<()> {
    let mut w = LineWriter::create(path)?;
    for l in links {
        w.line(&l.to_pharaoh())?;
    }
    w.finish()
}
