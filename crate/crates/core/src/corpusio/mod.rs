//! Bitext and dictionary loading, cleaning and writing.

mod normalize;
mod tokenize;

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::substitute::PseudoCorpus;

pub use normalize::normalize;
pub use tokenize::tokenize;

/// One aligned line pair of a bitext.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentencePair {
    /// Position in the owning [`Bitext`].
    pub id: usize,
    /// Zero-based line number in the files the pair was read from.
    pub line: usize,
    pub source: Vec<String>,
    pub target: Vec<String>,
    pub raw_source: String,
    pub raw_target: String,
}

impl SentencePair {
    /// Build a pair from raw text, returning `None` if either side has no
    /// tokens.
    pub fn from_raw(id: usize, line: usize, raw_source: &str, raw_target: &str) -> Option<Self> {
        let source = tokenize(&normalize(raw_source));
        let target = tokenize(&normalize(raw_target));
        if source.is_empty() || target.is_empty() {
            return None;
        }
        Some(SentencePair {
            id,
            line,
            source,
            target,
            raw_source: raw_source.to_string(),
            raw_target: raw_target.to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bitext {
    pub pairs: Vec<SentencePair>,
    pub source_lang: String,
    pub target_lang: String,
    /// Line pairs discarded at load time because a side tokenized to nothing.
    pub dropped: usize,
}

impl Bitext {
    pub fn new(source_lang: impl Into<String>, target_lang: impl Into<String>) -> Self {
        Bitext {
            pairs: Vec::new(),
            source_lang: source_lang.into(),
            target_lang: target_lang.into(),
            dropped: 0,
        }
    }

    /// Append raw lines; returns false when the pair was dropped.
    pub fn push_raw(&mut self, raw_source: &str, raw_target: &str) -> bool {
        let id = self.pairs.len();
        let line = id + self.dropped;
        match SentencePair::from_raw(id, line, raw_source, raw_target) {
            Some(pair) => {
                self.pairs.push(pair);
                true
            }
            None => {
                self.dropped += 1;
                false
            }
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Read-only view over token-level sentence pairs, for writers.
pub trait ParallelText {
    fn pair_count(&self) -> usize;
    fn source_tokens(&self, i: usize) -> &[String];
    fn target_tokens(&self, i: usize) -> &[String];
}

impl ParallelText for Bitext {
    fn pair_count(&self) -> usize {
        self.pairs.len()
    }
    fn source_tokens(&self, i: usize) -> &[String] {
        &self.pairs[i].source
    }
    fn target_tokens(&self, i: usize) -> &[String] {
        &self.pairs[i].target
    }
}

/// Read a UTF-8 text file as lines. A trailing newline does not start an
/// extra line and `\r\n` endings are accepted.
pub fn read_lines(path: &Path) -> Result<Vec<String>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut lines = Vec::new();
    let mut buf = Vec::new();
    loop {
        buf.clear();
        let n = reader
            .read_until(b'\n', &mut buf)
            .map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        if buf.last() == Some(&b'\n') {
            buf.pop();
            if buf.last() == Some(&b'\r') {
                buf.pop();
            }
        }
        let line = String::from_utf8(std::mem::take(&mut buf)).map_err(|_| Error::Encoding {
            path: path.to_path_buf(),
            line: lines.len() + 1,
        })?;
        lines.push(line);
    }
    Ok(lines)
}

/// Language tag guessed from a file extension (`train.en` → `en`).
pub fn lang_from_path(path: &Path, fallback: &str) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .filter(|e| (2..=3).contains(&e.len()) && e.chars().all(|c| c.is_ascii_alphabetic()))
        .map(str::to_ascii_lowercase)
        .unwrap_or_else(|| fallback.to_string())
}

/// Load a line-aligned bitext, inferring language tags from the extensions.
pub fn load_bitext(source_path: &Path, target_path: &Path) -> Result<Bitext> {
    let source_lang = lang_from_path(source_path, "src");
    let target_lang = lang_from_path(target_path, "tgt");
    load_bitext_with_langs(source_path, target_path, &source_lang, &target_lang)
}

pub fn load_bitext_with_langs(
    source_path: &Path,
    target_path: &Path,
    source_lang: &str,
    target_lang: &str,
) -> Result<Bitext> {
    let source = read_lines(source_path)?;
    let target = read_lines(target_path)?;
    if source.len() != target.len() {
        return Err(Error::LineCountMismatch {
            source_path: source_path.to_path_buf(),
            source_lines: source.len(),
            target_path: target_path.to_path_buf(),
            target_lines: target.len(),
        });
    }

    let parsed: Vec<Option<SentencePair>> = source
        .par_iter()
        .zip(target.par_iter())
        .enumerate()
        .map(|(line, (s, t))| SentencePair::from_raw(0, line, s, t))
        .collect();

    let mut bitext = Bitext::new(source_lang, target_lang);
    for pair in parsed {
        match pair {
            Some(mut pair) => {
                pair.id = bitext.pairs.len();
                bitext.pairs.push(pair);
            }
            None => bitext.dropped += 1,
        }
    }
    if bitext.dropped > 0 {
        log::warn!(
            "{}: dropped {} line pairs with an empty side",
            source_path.display(),
            bitext.dropped
        );
    }
    Ok(bitext)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DictionaryEntry {
    pub src: Vec<String>,
    pub tgt: Vec<String>,
}

impl DictionaryEntry {
    /// Normalize and tokenize both sides; `None` if either side is empty.
    pub fn parse(src: &str, tgt: &str) -> Option<Self> {
        let src = tokenize(&normalize(src));
        let tgt = tokenize(&normalize(tgt));
        (!src.is_empty() && !tgt.is_empty()).then_some(DictionaryEntry { src, tgt })
    }

    pub fn src_text(&self) -> String {
        self.src.join(" ")
    }

    pub fn tgt_text(&self) -> String {
        self.tgt.join(" ")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainDictionary {
    pub name: String,
    pub entries: Vec<DictionaryEntry>,
    /// Rows rejected for a wrong column count or an empty side.
    pub skipped_rows: usize,
}

impl DomainDictionary {
    /// Build from entries, dropping repeated `(src, tgt)` pairs.
    pub fn new(
        name: impl Into<String>,
        entries: impl IntoIterator<Item = DictionaryEntry>,
    ) -> Self {
        let mut seen = HashSet::new();
        let entries = entries
            .into_iter()
            .filter(|e| seen.insert(e.clone()))
            .collect();
        DomainDictionary {
            name: name.into(),
            entries,
            skipped_rows: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The first `n` entries, as a new dictionary.
    pub fn truncated(&self, n: usize) -> Self {
        DomainDictionary {
            name: self.name.clone(),
            entries: self.entries.iter().take(n).cloned().collect(),
            skipped_rows: self.skipped_rows,
        }
    }
}

/// Load a two-column `source<TAB>target` dictionary. Both columns go through
/// the same normalization and tokenization as the bitext.
pub fn load_dictionary(path: &Path) -> Result<DomainDictionary> {
    let lines = read_lines(path)?;
    let mut skipped = 0;
    let mut entries = Vec::with_capacity(lines.len());
    for line in &lines {
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let entry = match cols.as_slice() {
            [src, tgt] => DictionaryEntry::parse(src, tgt),
            _ => None,
        };
        match entry {
            Some(e) => entries.push(e),
            None => skipped += 1,
        }
    }
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("dictionary")
        .to_string();
    let mut dict = DomainDictionary::new(name, entries);
    dict.skipped_rows = skipped;
    if skipped > 0 {
        log::warn!("{}: skipped {skipped} malformed rows", path.display());
    }
    if dict.is_empty() {
        return Err(Error::EmptyDictionary {
            path: path.to_path_buf(),
        });
    }
    log::info!("{}: {} dictionary entries", path.display(), dict.len());
    Ok(dict)
}

/// Keep the first occurrence of every exact `(raw_source, raw_target)` pair.
/// Returns the survivors (ids renumbered) and the number removed.
pub fn deduplicate(bitext: &Bitext) -> (Bitext, usize) {
    let mut seen: HashSet<(&str, &str)> = HashSet::with_capacity(bitext.len());
    let mut out = Bitext::new(bitext.source_lang.clone(), bitext.target_lang.clone());
    out.dropped = bitext.dropped;
    for pair in &bitext.pairs {
        if seen.insert((pair.raw_source.as_str(), pair.raw_target.as_str())) {
            let mut kept = pair.clone();
            kept.id = out.pairs.len();
            out.pairs.push(kept);
        }
    }
    let removed = bitext.len() - out.len();
    (out, removed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WriteMode {
    /// Tokens joined by single spaces; reloads to identical tokens.
    #[default]
    Tokenized,
    /// Spaces removed before closing punctuation and after opening brackets
    /// and elisions.
    Detokenized,
}

pub fn detokenize(tokens: &[String]) -> String {
    let mut out = String::new();
    let mut glue_next = true;
    for tok in tokens {
        let closing = matches!(tok.as_str(), "." | "," | ";" | ":" | "!" | "?" | ")" | "%");
        if !glue_next && !closing {
            out.push(' ');
        }
        out.push_str(tok);
        glue_next = tok == "(" || (tok.len() > 1 && tok.ends_with('\''));
    }
    out
}

fn render(tokens: &[String], mode: WriteMode) -> String {
    match mode {
        WriteMode::Tokenized => tokens.join(" "),
        WriteMode::Detokenized => detokenize(tokens),
    }
}

pub(crate) fn create_writer(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Line writer used for every text output of the crate.
pub(crate) struct LineWriter {
    path: std::path::PathBuf,
    inner: BufWriter<File>,
}

impl LineWriter {
    pub(crate) fn create(path: &Path) -> Result<Self> {
        Ok(LineWriter {
            path: path.to_path_buf(),
            inner: create_writer(path)?,
        })
    }

    pub(crate) fn line(&mut self, text: &str) -> Result<()> {
        self.inner
            .write_all(text.as_bytes())
            .and_then(|_| self.inner.write_all(b"\n"))
            .map_err(|e| Error::io(&self.path, e))
    }

    pub(crate) fn finish(mut self) -> Result<()> {
        self.inner.flush().map_err(|e| Error::io(&self.path, e))
    }
}

pub fn write_bitext(
    corpus: &impl ParallelText,
    source_path: &Path,
    target_path: &Path,
    mode: WriteMode,
) -> Result<()> {
    let mut src = LineWriter::create(source_path)?;
    let mut tgt = LineWriter::create(target_path)?;
    for i in 0..corpus.pair_count() {
        src.line(&render(corpus.source_tokens(i), mode))?;
        tgt.line(&render(corpus.target_tokens(i), mode))?;
    }
    src.finish()?;
    tgt.finish()
}

/// Write a generated corpus plus its JSON-lines provenance sidecar.
pub fn write_pseudo_corpus(
    corpus: &PseudoCorpus,
    source_path: &Path,
    target_path: &Path,
    sidecar_path: &Path,
    mode: WriteMode,
) -> Result<()> {
    write_bitext(corpus, source_path, target_path, mode)?;
    let mut side = LineWriter::create(sidecar_path)?;
    for pair in &corpus.pairs {
        side.line(&pair.provenance.to_json_line())?;
    }
    side.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write(dir: &Path, name: &str, content: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        fs::write(&p, content).unwrap();
        p
    }

    #[test]
    fn single_line_bitext() {
        let dir = tempfile::tempdir().unwrap();
        let s = write(dir.path(), "a.en", "Hello world.\n");
        let t = write(dir.path(), "a.fr", "Bonjour le monde .\n");
        let b = load_bitext(&s, &t).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!(b.pairs[0].source, ["Hello", "world", "."]);
        assert_eq!(b.pairs[0].target, ["Bonjour", "le", "monde", "."]);
        assert_eq!(
            (b.source_lang.as_str(), b.target_lang.as_str()),
            ("en", "fr")
        );
    }

    #[test]
    fn mismatched_line_counts() {
        let dir = tempfile::tempdir().unwrap();
        let s = write(dir.path(), "a.en", "a\nb\nc\n");
        let t = write(dir.path(), "a.fr", "a\nb\n");
        let err = load_bitext(&s, &t).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(
            err,
            Error::LineCountMismatch {
                source_lines: 3,
                target_lines: 2,
                ..
            }
        ));
        assert!(msg.contains('3') && msg.contains('2'), "{msg}");
    }

    #[test]
    fn empty_sides_are_dropped_and_counted() {
        let dir = tempfile::tempdir().unwrap();
        let s = write(dir.path(), "a.en", "one\n   \nthree\n");
        let t = write(dir.path(), "a.fr", "un\ndeux\n\n");
        let b = load_bitext(&s, &t).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!(b.dropped, 2);
        assert_eq!(b.pairs[0].id, 0);
        assert_eq!(b.pairs[0].line, 0);
    }

    #[test]
    fn invalid_utf8_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let s = dir.path().join("bad.en");
        fs::write(&s, b"ok\n\xff\xfe\n").unwrap();
        let t = write(dir.path(), "bad.fr", "ok\nok\n");
        assert!(matches!(
            load_bitext(&s, &t),
            Err(Error::Encoding { line: 2, .. })
        ));
    }

    #[test]
    fn missing_file_names_path() {
        let err = load_bitext(
            Path::new("/nonexistent/x.en"),
            Path::new("/nonexistent/x.fr"),
        )
        .unwrap_err();
        assert!(err.to_string().contains("/nonexistent/x.en"));
    }

    #[test]
    fn dictionary_single_row() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "d.tsv",
            "myocardial infarction\tinfarctus du myocarde\n",
        );
        let d = load_dictionary(&p).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.entries[0].src, ["myocardial", "infarction"]);
        assert_eq!(d.name, "d");
    }

    #[test]
    fn dictionary_bad_rows_and_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "d.tsv",
            "a\tb\na\tb\nonly-one-column\nx\ty\tz\n\t\nc\td\n",
        );
        let d = load_dictionary(&p).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.skipped_rows, 3);
    }

    #[test]
    fn dictionary_empty_is_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "d.tsv", "bad row\n");
        assert!(matches!(
            load_dictionary(&p),
            Err(Error::EmptyDictionary { .. })
        ));
    }

    fn bitext_of(pairs: &[(&str, &str)]) -> Bitext {
        let mut b = Bitext::new("en", "fr");
        for (s, t) in pairs {
            b.push_raw(s, t);
        }
        b
    }

    #[test]
    fn dedup_examples() {
        let b = bitext_of(&[("a", "b"), ("a", "b"), ("c", "d")]);
        let (d, removed) = deduplicate(&b);
        assert_eq!(removed, 1);
        let raws: Vec<_> = d
            .pairs
            .iter()
            .map(|p| (p.raw_source.as_str(), p.raw_target.as_str()))
            .collect();
        assert_eq!(raws, [("a", "b"), ("c", "d")]);
        assert_eq!(d.pairs[1].id, 1);

        let unique = bitext_of(&[("a", "b"), ("c", "d")]);
        let (same, removed) = deduplicate(&unique);
        assert_eq!(removed, 0);
        assert_eq!(same, unique);
    }

    #[test]
    fn write_zero_pairs() {
        let dir = tempfile::tempdir().unwrap();
        let (s, t) = (dir.path().join("o.en"), dir.path().join("o.fr"));
        write_bitext(&Bitext::new("en", "fr"), &s, &t, WriteMode::Tokenized).unwrap();
        assert_eq!(fs::read(&s).unwrap(), b"");
        assert_eq!(fs::read(&t).unwrap(), b"");
    }

    #[test]
    fn detokenize_glues_punctuation() {
        let toks: Vec<String> = ["(", "l'", "enzyme", ")", "agit", ",", "60", "%", "."]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert_eq!(detokenize(&toks), "(l'enzyme) agit, 60%.");
    }
}
