//! Enhanced domain coverage: the number of unique dictionary terms of one to
//! five tokens that occur in both a corpus and a test set.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpusio::{create_writer, read_lines, DomainDictionary};
use crate::error::{Error, Result};

pub const MAX_NGRAM: usize = 5;

/// A labelled set of terms. Terms are token sequences joined by single
/// spaces; tokens never contain spaces.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TermSet {
    pub label: String,
    pub terms: BTreeSet<String>,
}

impl TermSet {
    pub fn new(label: impl Into<String>) -> Self {
        TermSet {
            label: label.into(),
            terms: BTreeSet::new(),
        }
    }

    pub fn from_terms(label: impl Into<String>, terms: impl IntoIterator<Item = String>) -> Self {
        TermSet {
            label: label.into(),
            terms: terms.into_iter().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn contains(&self, term: &str) -> bool {
        self.terms.contains(term)
    }

    /// Term counts by token length, with every key from 1 to 5 present.
    pub fn histogram(&self) -> BTreeMap<usize, usize> {
        let mut h: BTreeMap<usize, usize> = (1..=MAX_NGRAM).map(|n| (n, 0)).collect();
        for t in &self.terms {
            *h.entry(term_len(t)).or_default() += 1;
        }
        h
    }

    fn intersection(&self, other: &TermSet, label: String) -> TermSet {
        TermSet::from_terms(label, self.terms.intersection(&other.terms).cloned())
    }

    fn difference(&self, other: &TermSet, label: String) -> TermSet {
        TermSet::from_terms(label, self.terms.difference(&other.terms).cloned())
    }
}

pub fn term_len(term: &str) -> usize {
    term.split(' ').count()
}

fn fold(token: &str, fold_case: bool) -> String {
    if fold_case {
        token.to_lowercase()
    } else {
        token.to_string()
    }
}

fn check_range(n_min: usize, n_max: usize) -> Result<()> {
    if n_min == 0 || n_min > n_max || n_max > MAX_NGRAM {
        return Err(Error::InvalidParameter(format!(
            "n-gram range [{n_min}, {n_max}] must satisfy 1 <= n_min <= n_max <= {MAX_NGRAM}"
        )));
    }
    Ok(())
}

fn sentence_ngrams(
    tokens: &[String],
    n_min: usize,
    n_max: usize,
    fold_case: bool,
    out: &mut HashSet<String>,
) {
    for start in 0..tokens.len() {
        let mut gram = String::new();
        for (k, tok) in tokens[start..].iter().take(n_max).enumerate() {
            if k > 0 {
                gram.push(' ');
            }
            gram.push_str(&fold(tok, fold_case));
            if k + 1 >= n_min {
                out.insert(gram.clone());
            }
        }
    }
}

/// All unique contiguous n-grams with `n_min <= n <= n_max`.
pub fn extract_ngrams<S: AsRef<[String]> + Sync>(
    label: impl Into<String>,
    sentences: &[S],
    n_min: usize,
    n_max: usize,
    fold_case: bool,
) -> Result<TermSet> {
    check_range(n_min, n_max)?;
    let set = sentences
        .par_iter()
        .fold(HashSet::new, |mut acc, s| {
            sentence_ngrams(s.as_ref(), n_min, n_max, fold_case, &mut acc);
            acc
        })
        .reduce(HashSet::new, |mut a, b| {
            if a.len() < b.len() {
                return b.into_iter().chain(a).collect();
            }
            a.extend(b);
            a
        });
    Ok(TermSet::from_terms(label, set))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    #[default]
    Source,
    Target,
}

/// Dictionary terms of at most five tokens on one side. Returns the set and
/// the number of distinct terms excluded for being longer.
pub fn dict_terms(dict: &DomainDictionary, side: Side, fold_case: bool) -> (TermSet, usize) {
    let mut terms = BTreeSet::new();
    let mut long = BTreeSet::new();
    for e in &dict.entries {
        let toks = match side {
            Side::Source => &e.src,
            Side::Target => &e.tgt,
        };
        let term = toks
            .iter()
            .map(|t| fold(t, fold_case))
            .collect::<Vec<_>>()
            .join(" ");
        if toks.len() > MAX_NGRAM {
            long.insert(term);
        } else {
            terms.insert(term);
        }
    }
    (
        TermSet {
            label: dict.name.clone(),
            terms,
        },
        long.len(),
    )
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageReport {
    pub dictionary: String,
    pub corpus: String,
    pub testset: String,
    pub ed_value: usize,
    pub histogram: BTreeMap<usize, usize>,
    pub matched_terms: TermSet,
}

impl CoverageReport {
    fn from_matched(
        dictionary: &str,
        corpus: &str,
        testset: &str,
        matched: BTreeSet<String>,
    ) -> Self {
        let matched_terms = TermSet {
            label: corpus.to_string(),
            terms: matched,
        };
        CoverageReport {
            dictionary: dictionary.to_string(),
            corpus: corpus.to_string(),
            testset: testset.to_string(),
            ed_value: matched_terms.len(),
            histogram: matched_terms.histogram(),
            matched_terms,
        }
    }
}

/// Terms present in all three sets.
pub fn enhanced_domain_coverage(
    corpus_terms: &TermSet,
    dict_terms: &TermSet,
    test_terms: &TermSet,
) -> CoverageReport {
    let (small, others) = smallest_first([corpus_terms, dict_terms, test_terms]);
    let matched = small
        .terms
        .iter()
        .filter(|t| others.iter().all(|o| o.contains(t)))
        .cloned()
        .collect();
    CoverageReport::from_matched(
        &dict_terms.label,
        &corpus_terms.label,
        &test_terms.label,
        matched,
    )
}

fn smallest_first(sets: [&TermSet; 3]) -> (&TermSet, Vec<&TermSet>) {
    let i = (0..3).min_by_key(|&i| sets[i].len()).unwrap();
    let others = (0..3).filter(|&k| k != i).map(|k| sets[k]).collect();
    (sets[i], others)
}

/// Coverage of a tokenized corpus without materializing all its n-grams:
/// only the dictionary terms that also occur in the test set are looked up.
pub fn corpus_coverage<S: AsRef<[String]> + Sync>(
    corpus_label: &str,
    sentences: &[S],
    dict_terms: &TermSet,
    test_terms: &TermSet,
    fold_case: bool,
) -> CoverageReport {
    let candidates: HashSet<&str> = dict_terms
        .terms
        .intersection(&test_terms.terms)
        .map(String::as_str)
        .collect();
    let max_len = candidates.iter().map(|t| term_len(t)).max().unwrap_or(0);
    let matched: HashSet<String> = if candidates.is_empty() {
        HashSet::new()
    } else {
        sentences
            .par_iter()
            .fold(HashSet::new, |mut acc, s| {
                let tokens = s.as_ref();
                for start in 0..tokens.len() {
                    let mut gram = String::new();
                    for (k, tok) in tokens[start..].iter().take(max_len).enumerate() {
                        if k > 0 {
                            gram.push(' ');
                        }
                        gram.push_str(&fold(tok, fold_case));
                        if candidates.contains(gram.as_str()) && !acc.contains(&gram) {
                            acc.insert(gram.clone());
                        }
                    }
                }
                acc
            })
            .reduce(HashSet::new, |mut a, b| {
                a.extend(b);
                a
            })
    };
    CoverageReport::from_matched(
        &dict_terms.label,
        corpus_label,
        &test_terms.label,
        matched.into_iter().collect(),
    )
}

fn check_labels(a: &CoverageReport, b: &CoverageReport) -> Result<()> {
    if a.dictionary != b.dictionary {
        return Err(Error::LabelMismatch {
            left: a.dictionary.clone(),
            right: b.dictionary.clone(),
        });
    }
    if a.testset != b.testset {
        return Err(Error::LabelMismatch {
            left: a.testset.clone(),
            right: b.testset.clone(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageGain {
    pub gain: usize,
    pub new_terms: TermSet,
}

/// Matched terms of `generated` missing from `train`.
pub fn coverage_gain(generated: &CoverageReport, train: &CoverageReport) -> Result<CoverageGain> {
    check_labels(generated, train)?;
    let new_terms = generated.matched_terms.difference(
        &train.matched_terms,
        format!("{} - {}", generated.corpus, train.corpus),
    );
    Ok(CoverageGain {
        gain: new_terms.len(),
        new_terms,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TermDiff {
    pub a: String,
    pub b: String,
    pub dictionary: String,
    pub testset: String,
    pub a_minus_b: TermSet,
    pub b_minus_a: TermSet,
    pub intersection: TermSet,
}

pub fn term_diff(a: &CoverageReport, b: &CoverageReport) -> Result<TermDiff> {
    check_labels(a, b)?;
    let (ma, mb) = (&a.matched_terms, &b.matched_terms);
    Ok(TermDiff {
        a: a.corpus.clone(),
        b: b.corpus.clone(),
        dictionary: a.dictionary.clone(),
        testset: a.testset.clone(),
        a_minus_b: ma.difference(mb, "a_minus_b".into()),
        b_minus_a: mb.difference(ma, "b_minus_a".into()),
        intersection: ma.intersection(mb, "intersection".into()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::Config(format!("unknown report format {other:?}"))),
        }
    }
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReportFormat::Json => "json",
            ReportFormat::Csv => "csv",
        })
    }
}

#[derive(Serialize, Deserialize)]
struct ReportJson {
    dictionary: String,
    corpus: String,
    testset: String,
    ed_value: usize,
    histogram: BTreeMap<usize, usize>,
    terms: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct TermSetJson {
    histogram: BTreeMap<usize, usize>,
    terms: Vec<String>,
}

impl From<&TermSet> for TermSetJson {
    fn from(s: &TermSet) -> Self {
        TermSetJson {
            histogram: s.histogram(),
            terms: s.terms.iter().cloned().collect(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct DiffJson {
    a: String,
    b: String,
    dictionary: String,
    testset: String,
    a_minus_b: TermSetJson,
    b_minus_a: TermSetJson,
    intersection: TermSetJson,
}

/// Path of the term listing written next to a CSV report.
pub fn terms_path(path: &Path) -> PathBuf {
    path.with_extension("terms.txt")
}

fn write_json<V: Serialize>(path: &Path, value: &V) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    write_text(path, &text)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    use std::io::Write;
    let mut w = create_writer(path)?;
    w.write_all(text.as_bytes())
        .map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_csv(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    let w = create_writer(path)?;
    let mut csv = csv::Writer::from_writer(w);
    let err = |e: csv::Error| Error::format(path, e.to_string());
    csv.write_record(header).map_err(err)?;
    for row in rows {
        csv.write_record(&row).map_err(err)?;
    }
    csv.flush().map_err(|e| Error::io(path, e))
}

fn nonzero(h: &BTreeMap<usize, usize>) -> impl Iterator<Item = (usize, usize)> + '_ {
    h.iter().filter(|(_, c)| **c > 0).map(|(n, c)| (*n, *c))
}

pub fn emit_report(report: &CoverageReport, path: &Path, format: ReportFormat) -> Result<()> {
    match format {
        ReportFormat::Json => write_json(
            path,
            &ReportJson {
                dictionary: report.dictionary.clone(),
                corpus: report.corpus.clone(),
                testset: report.testset.clone(),
                ed_value: report.ed_value,
                histogram: report.histogram.clone(),
                terms: report.matched_terms.terms.iter().cloned().collect(),
            },
        ),
        ReportFormat::Csv => {
            write_csv(
                path,
                &["n", "count"],
                nonzero(&report.histogram).map(|(n, c)| vec![n.to_string(), c.to_string()]),
            )?;
            let mut text = String::new();
            for t in &report.matched_terms.terms {
                text.push_str(t);
                text.push('\n');
            }
            write_text(&terms_path(path), &text)
        }
    }
}

pub fn emit_diff(diff: &TermDiff, path: &Path, format: ReportFormat) -> Result<()> {
    let sets = [
        ("a_minus_b", &diff.a_minus_b),
        ("b_minus_a", &diff.b_minus_a),
        ("intersection", &diff.intersection),
    ];
    match format {
        ReportFormat::Json => write_json(
            path,
            &DiffJson {
                a: diff.a.clone(),
                b: diff.b.clone(),
                dictionary: diff.dictionary.clone(),
                testset: diff.testset.clone(),
                a_minus_b: (&diff.a_minus_b).into(),
                b_minus_a: (&diff.b_minus_a).into(),
                intersection: (&diff.intersection).into(),
            },
        ),
        ReportFormat::Csv => {
            let mut rows = Vec::new();
            let mut text = String::new();
            for (name, set) in sets {
                for (n, c) in nonzero(&set.histogram()) {
                    rows.push(vec![name.to_string(), n.to_string(), c.to_string()]);
                }
                for t in &set.terms {
                    text.push_str(&format!("{name}\t{t}\n"));
                }
            }
            write_csv(path, &["set", "n", "count"], rows)?;
            write_text(&terms_path(path), &text)
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn read_report_json(path: &Path) -> Result<CoverageReport> {
    let r: ReportJson =
        serde_json::from_str(&read_text(path)?).map_err(|e| Error::format(path, e.to_string()))?;
    let report = CoverageReport::from_matched(
        &r.dictionary,
        &r.corpus,
        &r.testset,
        r.terms.into_iter().collect(),
    );
    if report.ed_value != r.ed_value || report.histogram != r.histogram {
        return Err(Error::format(
            path,
            "ed_value or histogram disagrees with the term list",
        ));
    }
    Ok(report)
}

/// Histogram and term list of a CSV report.
pub fn read_report_csv(path: &Path) -> Result<(BTreeMap<usize, usize>, BTreeSet<String>)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let mut hist: BTreeMap<usize, usize> = (1..=MAX_NGRAM).map(|n| (n, 0)).collect();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::format(path, e.to_string()))?;
        let parse = |i: usize| -> Result<usize> {
            rec.get(i)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::format(path, "expected an integer n,count row"))
        };
        hist.insert(parse(0)?, parse(1)?);
    }
    let terms = read_lines(&terms_path(path))?
        .into_iter()
        .filter(|l| !l.is_empty())
        .collect();
    Ok((hist, terms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpusio::DictionaryEntry;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn set(label: &str, terms: &[&str]) -> TermSet {
        TermSet::from_terms(label, terms.iter().map(|s| s.to_string()))
    }

    fn report(corpus: &str, terms: &[&str]) -> CoverageReport {
        CoverageReport::from_matched(
            "dict",
            corpus,
            "test",
            terms.iter().map(|s| s.to_string()).collect(),
        )
    }

    fn naive_ngrams(sentences: &[Vec<String>], lo: usize, hi: usize) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for s in sentences {
            for n in lo..=hi {
                if n > s.len() {
                    continue;
                }
                for i in 0..=s.len() - n {
                    out.insert(s[i..i + n].join(" "));
                }
            }
        }
        out
    }

    #[test]
    fn ngram_examples() {
        let got = extract_ngrams("c", &[toks("a b c")], 1, 2, false).unwrap();
        assert_eq!(got, set("c", &["a", "b", "c", "a b", "b c"]));
        let empty: Vec<Vec<String>> = Vec::new();
        assert!(extract_ngrams("c", &empty, 1, 5, false).unwrap().is_empty());
        assert!(extract_ngrams("c", &empty, 2, 1, false).is_err());
        assert!(extract_ngrams("c", &empty, 1, 6, false).is_err());
        assert!(extract_ngrams("c", &empty, 0, 3, false).is_err());
    }

    #[test]
    fn ngrams_match_nested_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let sentences: Vec<Vec<String>> = (0..1000)
            .map(|_| {
                (0..rng.gen_range(1..15))
                    .map(|_| format!("w{}", rng.gen_range(0..40)))
                    .collect()
            })
            .collect();
        let got = extract_ngrams("c", &sentences, 1, 5, false).unwrap();
        assert_eq!(got.terms, naive_ngrams(&sentences, 1, 5));
    }

    #[test]
    fn dry_mouth_example() {
        let dict = DomainDictionary::new(
            "d",
            [DictionaryEntry::parse("Dry mouth", "Bouche sèche").unwrap()],
        );
        let (dt, long) = dict_terms(&dict, Side::Source, false);
        assert_eq!(long, 0);
        let corpus = extract_ngrams("c", &[toks("Dry mouth is common .")], 1, 5, false).unwrap();
        let test = extract_ngrams("t", &[toks("She reported Dry mouth")], 1, 5, false).unwrap();
        let r = enhanced_domain_coverage(&corpus, &dt, &test);
        assert_eq!(r.ed_value, 1);
        assert_eq!(r.histogram[&2], 1);
        assert_eq!(r.histogram.values().sum::<usize>(), 1);

        let disjoint = extract_ngrams("t", &[toks("nothing here")], 1, 5, false).unwrap();
        assert_eq!(
            enhanced_domain_coverage(&corpus, &dt, &disjoint).ed_value,
            0
        );
    }

    #[test]
    fn case_folding_flag() {
        let dict = DomainDictionary::new("d", [DictionaryEntry::parse("dry mouth", "x").unwrap()]);
        let corpus = [toks("Dry Mouth")];
        let test = [toks("DRY MOUTH")];
        for (fold, want) in [(false, 0), (true, 1)] {
            let (dt, _) = dict_terms(&dict, Side::Source, fold);
            let tt = extract_ngrams("t", &test, 1, 5, fold).unwrap();
            assert_eq!(corpus_coverage("c", &corpus, &dt, &tt, fold).ed_value, want);
        }
    }

    #[test]
    fn long_entries_excluded() {
        let dict = DomainDictionary::new(
            "d",
            [
                DictionaryEntry::parse("a b c d e f", "x").unwrap(),
                DictionaryEntry::parse("a b", "y").unwrap(),
            ],
        );
        let (dt, long) = dict_terms(&dict, Side::Source, false);
        assert_eq!(long, 1);
        assert_eq!(dt, set("d", &["a b"]));
        let (dt, long) = dict_terms(&dict, Side::Target, false);
        assert_eq!((long, dt.len()), (0, 2));
    }

    #[test]
    fn gain_and_diff() {
        let g = coverage_gain(&report("gen", &["a", "b"]), &report("train", &["a"])).unwrap();
        assert_eq!(g.gain, 1);
        assert!(g.new_terms.contains("b"));
        assert_eq!(
            coverage_gain(&report("gen", &["a"]), &report("train", &["a", "b"]))
                .unwrap()
                .gain,
            0
        );

        let d = term_diff(
            &report("bt", &["SGPT", "mucositis"]),
            &report("dda", &["mucositis"]),
        )
        .unwrap();
        assert_eq!(d.a_minus_b.terms, BTreeSet::from(["SGPT".to_string()]));
        assert!(d.b_minus_a.is_empty());
        assert_eq!(d.intersection.len(), 1);

        let mut other = report("x", &["a"]);
        other.testset = "other".into();
        assert!(matches!(
            coverage_gain(&report("g", &[]), &other),
            Err(Error::LabelMismatch { .. })
        ));
        other.testset = "test".into();
        other.dictionary = "dict2".into();
        assert!(term_diff(&report("g", &[]), &other).is_err());
    }

    #[test]
    fn report_files() {
        let dir = tempfile::tempdir().unwrap();
        let r = report("gen", &["a", "a b", "c d e", "f"]);
        let json = dir.path().join("r.json");
        emit_report(&r, &json, ReportFormat::Json).unwrap();
        assert_eq!(read_report_json(&json).unwrap(), r);

        let csv = dir.path().join("r.csv");
        emit_report(&r, &csv, ReportFormat::Csv).unwrap();
        let text = std::fs::read_to_string(&csv).unwrap();
        assert_eq!(text.lines().count(), 1 + 3);
        let (h, terms) = read_report_csv(&csv).unwrap();
        assert_eq!(h, r.histogram);
        assert_eq!(terms, r.matched_terms.terms);

        let empty = report("gen", &[]);
        emit_report(&empty, &json, ReportFormat::Json).unwrap();
        let v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
        assert_eq!(v["terms"].as_array().unwrap().len(), 0);
        assert_eq!(v["ed_value"], 0);
        emit_report(&empty, &csv, ReportFormat::Csv).unwrap();
        assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 1);

        let d = term_diff(&r, &report("b", &["a", "z"])).unwrap();
        emit_diff(&d, &dir.path().join("d.json"), ReportFormat::Json).unwrap();
        emit_diff(&d, &dir.path().join("d.csv"), ReportFormat::Csv).unwrap();
        let rows = std::fs::read_to_string(dir.path().join("d.csv")).unwrap();
        assert!(rows.starts_with("set,n,count"));
    }

    fn random_sentences(rng: &mut ChaCha8Rng, count: usize, vocab: usize) -> Vec<Vec<String>> {
        (0..count)
            .map(|_| {
                (0..rng.gen_range(1..10))
                    .map(|_| format!("w{}", rng.gen_range(0..vocab)))
                    .collect()
            })
            .collect()
    }

    #[test]
    fn streaming_matches_set_intersection() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..30 {
            let corpus = random_sentences(&mut rng, 40, 8);
            let test = random_sentences(&mut rng, 20, 8);
            let dict = TermSet::from_terms(
                "d",
                (0..20).map(|_| {
                    (0..rng.gen_range(1..4))
                        .map(|_| format!("w{}", rng.gen_range(0..8)))
                        .collect::<Vec<_>>()
                        .join(" ")
                }),
            );
            let ct = extract_ngrams("c", &corpus, 1, 5, false).unwrap();
            let tt = extract_ngrams("t", &test, 1, 5, false).unwrap();
            assert_eq!(
                corpus_coverage("c", &corpus, &dict, &tt, false),
                enhanced_domain_coverage(&ct, &dict, &tt)
            );
        }
    }

    proptest! {
        #[test]
        fn monotone_and_order_invariant(
            seed in any::<u64>(),
            extra in 1usize..10,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let corpus = random_sentences(&mut rng, 15, 6);
            let more = random_sentences(&mut rng, extra, 6);
            let test = extract_ngrams("t", &random_sentences(&mut rng, 10, 6), 1, 5, false).unwrap();
            let dict = extract_ngrams("d", &random_sentences(&mut rng, 10, 6), 1, 3, false).unwrap();
            let base = corpus_coverage("c", &corpus, &dict, &test, false);

            let mut bigger = corpus.clone();
            bigger.extend(more);
            let grown = corpus_coverage("c", &bigger, &dict, &test, false);
            prop_assert!(base.matched_terms.terms.is_subset(&grown.matched_terms.terms));

            let mut shuffled: Vec<Vec<String>> = corpus.iter().rev().cloned().collect();
            shuffled.extend(corpus.iter().cloned());
            prop_assert_eq!(&corpus_coverage("c", &shuffled, &dict, &test, false), &base);
            prop_assert_eq!(base.ed_value, base.histogram.values().sum::<usize>());

            let empty: Vec<Vec<String>> = Vec::new();
            prop_assert_eq!(corpus_coverage("c", &empty, &dict, &test, false).ed_value, 0);
        }

        #[test]
        fn gain_decomposes_and_diff_partitions(
            a in proptest::collection::btree_set("[a-e]( [a-e]){0,2}", 0..12),
            b in proptest::collection::btree_set("[a-e]( [a-e]){0,2}", 0..12),
        ) {
            let ra = CoverageReport::from_matched("d", "a", "t", a.clone());
            let rb = CoverageReport::from_matched("d", "b", "t", b.clone());
            let g = coverage_gain(&ra, &rb).unwrap();
            prop_assert_eq!(ra.ed_value, g.gain + a.intersection(&b).count());
            let d = term_diff(&ra, &rb).unwrap();
            prop_assert!(d.a_minus_b.terms.is_disjoint(&d.b_minus_a.terms));
            prop_assert!(d.a_minus_b.terms.is_disjoint(&d.intersection.terms));
            prop_assert!(d.b_minus_a.terms.is_disjoint(&d.intersection.terms));
            let union: BTreeSet<String> = d.a_minus_b.terms.iter()
                .chain(&d.b_minus_a.terms).chain(&d.intersection.terms).cloned().collect();
            prop_assert_eq!(union, a.union(&b).cloned().collect::<BTreeSet<_>>());
        }
    }
}
