//! Implanting dictionary entries into template sentence pairs.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpusio::{DictionaryEntry, ParallelText, SentencePair};
use crate::error::{Error, Result};
use crate::phrase::PhraseMatch;
use crate::scalar::Scalar;

/// Where a generated pair came from. Spans refer to the template tokens;
/// the implanted entry starts at the same offsets in the output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// Zero-based line of the template in the input bitext.
    pub template_id: usize,
    pub src_span: (usize, usize),
    pub tgt_span: (usize, usize),
    pub dictionary_src: String,
    pub dictionary_tgt: String,
    pub similarity_score: f64,
    /// The output equals the template.
    pub identity: bool,
    /// Template tokens removed from each side.
    pub replaced_src: Vec<String>,
    pub replaced_tgt: Vec<String>,
}

impl Provenance {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("provenance serializes")
    }

    pub fn from_json_line(line: &str) -> Result<Self> {
        serde_json::from_str(line)
            .map_err(|e| Error::InvalidParameter(format!("bad provenance record: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PseudoPair {
    pub g_source: Vec<String>,
    pub g_target: Vec<String>,
    pub provenance: Provenance,
}

impl PseudoPair {
    /// Put the replaced template tokens back, undoing the substitution.
    pub fn restore(&self) -> (Vec<String>, Vec<String>) {
        let p = &self.provenance;
        let src_len = p.dictionary_src.split(' ').count();
        let tgt_len = p.dictionary_tgt.split(' ').count();
        (
            splice(&self.g_source, p.src_span.0, src_len, &p.replaced_src),
            splice(&self.g_target, p.tgt_span.0, tgt_len, &p.replaced_tgt),
        )
    }

    /// Both sides carry the dictionary entry contiguously at the recorded
    /// offsets. A capitalized first letter is accepted at sentence start.
    pub fn contains_entry(&self) -> bool {
        let p = &self.provenance;
        let src: Vec<&str> = p.dictionary_src.split(' ').collect();
        let tgt: Vec<&str> = p.dictionary_tgt.split(' ').collect();
        contains_at(&self.g_source, p.src_span.0, &src)
            && contains_at(&self.g_target, p.tgt_span.0, &tgt)
    }
}

fn splice(tokens: &[String], at: usize, remove: usize, insert: &[String]) -> Vec<String> {
    let mut out = Vec::with_capacity(tokens.len() + insert.len());
    out.extend_from_slice(&tokens[..at]);
    out.extend_from_slice(insert);
    out.extend_from_slice(&tokens[(at + remove).min(tokens.len())..]);
    out
}

fn contains_at(tokens: &[String], at: usize, entry: &[&str]) -> bool {
    if at + entry.len() > tokens.len() {
        return false;
    }
    tokens[at..at + entry.len()]
        .iter()
        .zip(entry)
        .enumerate()
        .all(|(k, (have, want))| have == want || (at == 0 && k == 0 && *have == capitalize(want)))
}

fn capitalize(token: &str) -> String {
    let mut chars = token.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

fn starts_lowercase(token: &str) -> bool {
    token.chars().next().is_some_and(char::is_lowercase)
}

fn implant(tokens: &[String], start: usize, end: usize, entry: &[String]) -> Result<Vec<String>> {
    if start >= end || end > tokens.len() {
        return Err(Error::SpanOutOfBounds {
            start,
            end,
            len: tokens.len(),
        });
    }
    let mut replacement = entry.to_vec();
    if start == 0 && starts_lowercase(&replacement[0]) {
        replacement[0] = capitalize(&replacement[0]);
    }
    Ok(splice(tokens, start, end - start, &replacement))
}

/// Replace the matched source phrase with `entry.src` and the target span
/// with `entry.tgt`. An entry placed at sentence start gets its first letter
/// capitalized.
pub fn substitute_pair<T: Scalar>(
    template: &SentencePair,
    matched: &PhraseMatch<T>,
    tgt_span: (usize, usize),
    entry: &DictionaryEntry,
) -> Result<PseudoPair> {
    let (ss, se) = (matched.span.start, matched.span.end);
    let (ts, te) = tgt_span;
    let g_source = implant(&template.source, ss, se, &entry.src)?;
    let g_target = implant(&template.target, ts, te, &entry.tgt)?;
    let identity = g_source == template.source && g_target == template.target;
    Ok(PseudoPair {
        provenance: Provenance {
            template_id: template.line,
            src_span: (ss, se),
            tgt_span: (ts, te),
            dictionary_src: entry.src_text(),
            dictionary_tgt: entry.tgt_text(),
            similarity_score: matched.score.as_f64(),
            identity,
            replaced_src: template.source[ss..se].to_vec(),
            replaced_tgt: template.target[ts..te].to_vec(),
        },
        g_source,
        g_target,
    })
}

/// Candidate accounting. Every attempted `(entry, template)` candidate ends
/// up in exactly one of the counters besides `attempted`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub attempted: u64,
    pub generated: u64,
    pub skipped_no_phrase: u64,
    pub skipped_below_floor: u64,
    pub skipped_no_projection: u64,
    pub skipped_identity: u64,
    pub skipped_error: u64,
    pub deduped: u64,
    pub truncated: u64,
}

impl GenerationStats {
    pub fn accounted(&self) -> u64 {
        self.generated
            + self.skipped_no_phrase
            + self.skipped_below_floor
            + self.skipped_no_projection
            + self.skipped_identity
            + self.skipped_error
            + self.deduped
            + self.truncated
    }

    pub fn is_balanced(&self) -> bool {
        self.accounted() == self.attempted
    }

    pub fn merge(&mut self, other: &GenerationStats) {
        self.attempted += other.attempted;
        self.generated += other.generated;
        self.skipped_no_phrase += other.skipped_no_phrase;
        self.skipped_below_floor += other.skipped_below_floor;
        self.skipped_no_projection += other.skipped_no_projection;
        self.skipped_identity += other.skipped_identity;
        self.skipped_error += other.skipped_error;
        self.deduped += other.deduped;
        self.truncated += other.truncated;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PseudoCorpus {
    pub pairs: Vec<PseudoPair>,
    pub source_lang: String,
    pub target_lang: String,
    pub stats: GenerationStats,
}

impl PseudoCorpus {
    pub fn new(source_lang: impl Into<String>, target_lang: impl Into<String>) -> Self {
        PseudoCorpus {
            pairs: Vec::new(),
            source_lang: source_lang.into(),
            target_lang: target_lang.into(),
            stats: GenerationStats::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

impl ParallelText for PseudoCorpus {
    fn pair_count(&self) -> usize {
        self.pairs.len()
    }

    fn source_tokens(&self, i: usize) -> &[String] {
        &self.pairs[i].g_source
    }

    fn target_tokens(&self, i: usize) -> &[String] {
        &self.pairs[i].g_target
    }
}

/// Remembers `(source, target)` token pairs by a 128-bit digest, so memory
/// stays small when output is streamed.
#[derive(Debug, Default)]
pub struct PairDeduper {
    seen: HashSet<u128>,
}

impl PairDeduper {
    pub fn new() -> Self {
        Self::default()
    }

    /// `true` the first time a pair is offered.
    pub fn insert(&mut self, source: &[String], target: &[String]) -> bool {
        let mut h = Sha256::new();
        for t in source {
            h.update(t.as_bytes());
            h.update([0u8]);
        }
        h.update([1u8]);
        for t in target {
            h.update(t.as_bytes());
            h.update([0u8]);
        }
        let digest = h.finalize();
        self.seen
            .insert(u128::from_le_bytes(digest[..16].try_into().unwrap()))
    }

    pub fn len(&self) -> usize {
        self.seen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seen.is_empty()
    }
}

/// Collapse exact duplicate `(g_source, g_target)` pairs to their first
/// occurrence.
pub fn dedup_pseudo(corpus: PseudoCorpus) -> PseudoCorpus {
    let before = corpus.pairs.len();
    let mut seen = PairDeduper::new();
    let pairs: Vec<PseudoPair> = corpus
        .pairs
        .into_iter()
        .filter(|p| seen.insert(&p.g_source, &p.g_target))
        .collect();
    let removed = (before - pairs.len()) as u64;
    let mut stats = corpus.stats;
    stats.deduped += removed;
    stats.generated = stats.generated.saturating_sub(removed);
    PseudoCorpus {
        pairs,
        stats,
        ..corpus
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phrase::PhraseSpan;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn template(src: &str, tgt: &str) -> SentencePair {
        SentencePair::from_raw(0, 7, src, tgt).unwrap()
    }

    fn matched(start: usize, end: usize, score: f64) -> PhraseMatch<f64> {
        PhraseMatch {
            span: PhraseSpan {
                start,
                end,
                surface: String::new(),
            },
            score,
        }
    }

    #[test]
    fn single_token_swap() {
        let t = template("the illness persists", "la maladie persiste");
        let e = DictionaryEntry::parse("mucositis", "mucite").unwrap();
        let p = substitute_pair(&t, &matched(1, 2, 0.7), (1, 2), &e).unwrap();
        assert_eq!(p.g_source, toks("the mucositis persists"));
        assert_eq!(p.g_target, toks("la mucite persiste"));
        assert!(!p.provenance.identity);
        assert_eq!(p.provenance.template_id, 7);
        assert_eq!(p.restore(), (t.source.clone(), t.target.clone()));
        assert!(p.contains_entry());
    }

    #[test]
    fn longer_entry_grows_sentence() {
        let t = template("the illness persists", "la maladie persiste");
        let e = DictionaryEntry::parse(
            "Lower respiratory tract infection",
            "infection des voies respiratoires basses",
        )
        .unwrap();
        let p = substitute_pair(&t, &matched(1, 2, 0.5), (1, 2), &e).unwrap();
        assert_eq!(p.g_source.len(), t.source.len() + 3);
        assert_eq!(p.g_target.len(), t.target.len() + 4);
        assert_eq!(p.restore(), (t.source, t.target));
    }

    #[test]
    fn identity_substitution_flagged() {
        let t = template("the illness persists", "la maladie persiste");
        let e = DictionaryEntry::parse("illness", "maladie").unwrap();
        let p = substitute_pair(&t, &matched(1, 2, 1.0), (1, 2), &e).unwrap();
        assert!(p.provenance.identity);
        assert_eq!(p.g_source, t.source);
    }

    #[test]
    fn sentence_start_is_capitalized() {
        let t = template("Illness persists", "Maladie persiste");
        let e = DictionaryEntry::parse("dry mouth", "bouche sèche").unwrap();
        let p = substitute_pair(&t, &matched(0, 1, 0.4), (0, 1), &e).unwrap();
        assert_eq!(p.g_source, toks("Dry mouth persists"));
        assert_eq!(p.g_target, toks("Bouche sèche persiste"));
        assert!(p.contains_entry());
        assert_eq!(p.restore(), (t.source, t.target));
    }

    #[test]
    fn out_of_bounds_span_is_an_error() {
        let t = template("a b", "c d");
        let e = DictionaryEntry::parse("x", "y").unwrap();
        assert!(matches!(
            substitute_pair(&t, &matched(1, 3, 0.0), (0, 1), &e),
            Err(Error::SpanOutOfBounds { .. })
        ));
        assert!(substitute_pair(&t, &matched(0, 1, 0.0), (2, 2), &e).is_err());
    }

    #[test]
    fn provenance_json_round_trip() {
        let t = template("the illness persists", "la maladie persiste");
        let e = DictionaryEntry::parse("mucositis", "mucite").unwrap();
        let p = substitute_pair(&t, &matched(1, 2, 0.25), (1, 2), &e).unwrap();
        let line = p.provenance.to_json_line();
        let v: serde_json::Value = serde_json::from_str(&line).unwrap();
        for key in [
            "template_id",
            "src_span",
            "tgt_span",
            "dictionary_src",
            "dictionary_tgt",
            "similarity_score",
        ] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(Provenance::from_json_line(&line).unwrap(), p.provenance);
    }

    fn corpus_of(pairs: &[(&str, &str)]) -> PseudoCorpus {
        let mut c = PseudoCorpus::new("en", "fr");
        for (i, (s, t)) in pairs.iter().enumerate() {
            let tpl = SentencePair::from_raw(i, i, s, t).unwrap();
            let e = DictionaryEntry::parse(&tpl.source[0], &tpl.target[0]).unwrap();
            c.pairs
                .push(substitute_pair(&tpl, &matched(0, 1, 0.0), (0, 1), &e).unwrap());
        }
        c.stats.attempted = pairs.len() as u64;
        c.stats.generated = pairs.len() as u64;
        c
    }

    #[test]
    fn dedup_collapses_duplicates() {
        let c = corpus_of(&[("a b", "c d"), ("a b", "c d"), ("e f", "g h")]);
        let d = dedup_pseudo(c);
        assert_eq!(d.len(), 2);
        assert_eq!(d.stats.deduped, 1);
        assert_eq!(d.stats.generated, 2);
        assert!(d.stats.is_balanced());

        let distinct = corpus_of(&[("a b", "c d"), ("e f", "g h")]);
        assert_eq!(dedup_pseudo(distinct.clone()), distinct);
    }

    #[test]
    fn deduper_separates_sides() {
        let mut d = PairDeduper::new();
        assert!(d.insert(&toks("a b"), &toks("c")));
        assert!(d.insert(&toks("a"), &toks("b c")));
        assert!(!d.insert(&toks("a b"), &toks("c")));
        assert_eq!(d.len(), 2);
    }

    proptest! {
        #[test]
        fn restore_inverts_substitution(
            src in proptest::collection::vec("[a-z]{1,4}", 1..8),
            tgt in proptest::collection::vec("[a-z]{1,4}", 1..8),
            esrc in proptest::collection::vec("[a-z]{1,4}", 1..4),
            etgt in proptest::collection::vec("[a-z]{1,4}", 1..4),
            a in 0usize..8, b in 0usize..8, c in 0usize..8, d in 0usize..8,
        ) {
            let tpl = SentencePair::from_raw(0, 0, &src.join(" "), &tgt.join(" ")).unwrap();
            let (ss, se) = { let x = a % src.len(); (x, x + 1 + b % (src.len() - x)) };
            let (ts, te) = { let x = c % tgt.len(); (x, x + 1 + d % (tgt.len() - x)) };
            let e = DictionaryEntry::parse(&esrc.join(" "), &etgt.join(" ")).unwrap();
            let p = substitute_pair(&tpl, &matched(ss, se, 0.0), (ts, te), &e).unwrap();
            prop_assert_eq!(p.restore(), (tpl.source.clone(), tpl.target.clone()));
            prop_assert!(p.contains_entry());
            prop_assert_eq!(p.provenance.identity, p.g_source == tpl.source && p.g_target == tpl.target);
        }
    }
}
