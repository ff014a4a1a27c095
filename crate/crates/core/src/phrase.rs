//! Rule-based POS tagging, noun-phrase candidate extraction and selection of
//! the candidate closest to a dictionary term.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpusio::read_lines;
use crate::embedding::{cosine, Embedding, TextEmbedder};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Longest phrase considered, in tokens.
pub const MAX_PHRASE_LEN: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Tag {
    Noun,
    Adj,
    Det,
    Verb,
    Adp,
    Num,
    Punct,
    Other,
}

impl Tag {
    pub fn as_str(self) -> &'static str {
        match self {
            Tag::Noun => "NOUN",
            Tag::Adj => "ADJ",
            Tag::Det => "DET",
            Tag::Verb => "VERB",
            Tag::Adp => "ADP",
            Tag::Num => "NUM",
            Tag::Punct => "PUNCT",
            Tag::Other => "OTHER",
        }
    }

    fn chunkable(self) -> bool {
        matches!(self, Tag::Noun | Tag::Adj | Tag::Num)
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Tag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.to_ascii_uppercase().as_str() {
            "NOUN" | "PROPN" => Tag::Noun,
            "ADJ" => Tag::Adj,
            "DET" => Tag::Det,
            "VERB" | "AUX" => Tag::Verb,
            "ADP" => Tag::Adp,
            "NUM" => Tag::Num,
            "PUNCT" => Tag::Punct,
            "OTHER" | "X" => Tag::Other,
            other => return Err(format!("unknown tag `{other}`")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedToken {
    pub token: String,
    pub tag: Tag,
}

/// Per-language suffix rules for out-of-lexicon words, checked in order.
fn suffix_rules(lang: &str) -> &'static [(&'static str, Tag)] {
    match lang {
        "fr" => &[
            ("ment", Tag::Other),
            ("tion", Tag::Noun),
            ("sion", Tag::Noun),
            ("pathie", Tag::Noun),
            ("ité", Tag::Noun),
            ("ite", Tag::Noun),
            ("ose", Tag::Noun),
            ("émie", Tag::Noun),
            ("isme", Tag::Noun),
            ("ance", Tag::Noun),
            ("ence", Tag::Noun),
            ("ique", Tag::Adj),
            ("eux", Tag::Adj),
            ("euse", Tag::Adj),
            ("aire", Tag::Adj),
            ("ible", Tag::Adj),
            ("able", Tag::Adj),
        ],
        _ => &[
            ("ly", Tag::Other),
            ("tion", Tag::Noun),
            ("sion", Tag::Noun),
            ("ness", Tag::Noun),
            ("itis", Tag::Noun),
            ("pathy", Tag::Noun),
            ("osis", Tag::Noun),
            ("emia", Tag::Noun),
            ("algia", Tag::Noun),
            ("ectomy", Tag::Noun),
            ("oma", Tag::Noun),
            ("ism", Tag::Noun),
            ("ity", Tag::Noun),
            ("ment", Tag::Noun),
            ("ance", Tag::Noun),
            ("ence", Tag::Noun),
            ("ous", Tag::Adj),
            ("ful", Tag::Adj),
            ("ive", Tag::Adj),
            ("able", Tag::Adj),
            ("ible", Tag::Adj),
            ("ical", Tag::Adj),
            ("ic", Tag::Adj),
            ("ing", Tag::Verb),
            ("ed", Tag::Verb),
        ],
    }
}

/// Token → most frequent tag, looked up case-insensitively.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon {
    pub lang: String,
    entries: BTreeMap<String, (Tag, u64)>,
}

const BUNDLED_EN: &str = include_str!("../lexicons/en.tsv");
const BUNDLED_FR: &str = include_str!("../lexicons/fr.tsv");

impl Lexicon {
    pub fn new(lang: impl Into<String>) -> Self {
        Lexicon {
            lang: lang.into(),
            entries: BTreeMap::new(),
        }
    }

    /// Record an observation; the highest count per token wins, earlier
    /// rows win ties.
    pub fn add(&mut self, token: &str, tag: Tag, count: u64) {
        let key = token.to_lowercase();
        match self.entries.get(&key) {
            Some((_, c)) if *c >= count => {}
            _ => {
                self.entries.insert(key, (tag, count));
            }
        }
    }

    pub fn lookup(&self, token: &str) -> Option<Tag> {
        self.entries.get(&token.to_lowercase()).map(|(t, _)| *t)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Parse `token<TAB>TAG<TAB>count` rows. `source` names the input in
    /// error messages.
    pub fn parse(
        lang: &str,
        source: &Path,
        lines: impl IntoIterator<Item = impl AsRef<str>>,
    ) -> Result<Self> {
        let mut lex = Lexicon::new(lang);
        for (n, line) in lines.into_iter().enumerate() {
            let line = line.as_ref();
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            let [token, tag, count] = cols.as_slice() else {
                return Err(Error::format(
                    source,
                    format!("line {}: expected 3 columns", n + 1),
                ));
            };
            let tag = tag
                .parse::<Tag>()
                .map_err(|e| Error::format(source, format!("line {}: {e}", n + 1)))?;
            let count = count
                .trim()
                .parse::<u64>()
                .map_err(|e| Error::format(source, format!("line {}: {e}", n + 1)))?;
            lex.add(token, tag, count);
        }
        Ok(lex)
    }

    pub fn load(lang: &str, path: &Path) -> Result<Self> {
        Self::parse(lang, path, read_lines(path)?)
    }

    /// Small lexicon shipped with the crate (`en` or `fr`).
    pub fn bundled(lang: &str) -> Option<Self> {
        let text = match lang {
            "en" => BUNDLED_EN,
            "fr" => BUNDLED_FR,
            _ => return None,
        };
        let path = format!("<bundled {lang} lexicon>");
        Some(
            Self::parse(lang, Path::new(&path), text.lines())
                .expect("bundled lexicon is well formed"),
        )
    }

    /// Tag one token at `position` in its sentence.
    pub fn tag(&self, token: &str, position: usize) -> Tag {
        if let Some(tag) = self.lookup(token) {
            return tag;
        }
        if token.chars().all(|c| !c.is_alphanumeric()) {
            return Tag::Punct;
        }
        if is_number(token) {
            return Tag::Num;
        }
        if !token.chars().any(char::is_alphabetic) {
            return Tag::Other;
        }
        if position > 0 && token.chars().next().is_some_and(char::is_uppercase) {
            return Tag::Noun;
        }
        let lower = token.to_lowercase();
        for (suffix, tag) in suffix_rules(&self.lang) {
            if lower.len() > suffix.len() + 1 && lower.ends_with(suffix) {
                return *tag;
            }
        }
        // Open-class default; the lexicon is expected to cover closed classes.
        Tag::Noun
    }
}

fn is_number(token: &str) -> bool {
    token.chars().next().is_some_and(|c| c.is_ascii_digit())
        && token
            .chars()
            .all(|c| c.is_ascii_digit() || matches!(c, '.' | ',' | '-' | '/'))
}

/// Lexicons keyed by language tag.
#[derive(Debug, Clone, Default)]
pub struct TagLexicons {
    by_lang: BTreeMap<String, Lexicon>,
}

impl TagLexicons {
    pub fn new() -> Self {
        Self::default()
    }

    /// Both bundled lexicons.
    pub fn bundled() -> Self {
        let mut set = Self::new();
        for lang in ["en", "fr"] {
            set.insert(Lexicon::bundled(lang).expect("bundled"));
        }
        set
    }

    pub fn insert(&mut self, lexicon: Lexicon) {
        self.by_lang.insert(lexicon.lang.clone(), lexicon);
    }

    pub fn get(&self, lang: &str) -> Result<&Lexicon> {
        self.by_lang.get(lang).ok_or_else(|| Error::MissingLexicon {
            lang: lang.to_string(),
        })
    }
}

pub fn pos_tag(tokens: &[String], lexicons: &TagLexicons, lang: &str) -> Result<Vec<TaggedToken>> {
    let lex = lexicons.get(lang)?;
    Ok(tag_with(lex, tokens))
}

pub fn tag_with(lexicon: &Lexicon, tokens: &[String]) -> Vec<TaggedToken> {
    tokens
        .iter()
        .enumerate()
        .map(|(i, t)| TaggedToken {
            token: t.clone(),
            tag: lexicon.tag(t, i),
        })
        .collect()
}

/// Candidate phrase `[start, end)` ending in a noun.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PhraseSpan {
    pub start: usize,
    pub end: usize,
    pub surface: String,
}

impl PhraseSpan {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

/// All spans matching `(ADJ|NOUN|NUM)* NOUN` of at most `max_len` tokens,
/// ordered by `(start, end)`.
///
/// Every noun inside a maximal chunk closes a candidate for each start
/// position back to the chunk start (bounded by `max_len`), which covers the
/// maximal chunk and all of its noun-final sub-spans.
pub fn extract_noun_phrases(tagged: &[TaggedToken]) -> Vec<PhraseSpan> {
    extract_noun_phrases_max(tagged, MAX_PHRASE_LEN)
}

pub fn extract_noun_phrases_max(tagged: &[TaggedToken], max_len: usize) -> Vec<PhraseSpan> {
    let mut spans = Vec::new();
    let mut chunk_start = 0;
    for (i, t) in tagged.iter().enumerate() {
        if !t.tag.chunkable() {
            chunk_start = i + 1;
            continue;
        }
        if t.tag == Tag::Noun {
            let end = i + 1;
            let lo = chunk_start.max(end.saturating_sub(max_len));
            for start in lo..end {
                spans.push(PhraseSpan {
                    start,
                    end,
                    surface: surface(&tagged[start..end]),
                });
            }
        }
    }
    spans.sort();
    spans
}

fn surface(tokens: &[TaggedToken]) -> String {
    tokens
        .iter()
        .map(|t| t.token.as_str())
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhraseMatch<T> {
    pub span: PhraseSpan,
    pub score: T,
}

/// Best-scoring span; ties go to the earlier start, then the shorter span.
pub fn select_best<T: Scalar>(
    scored: impl IntoIterator<Item = (PhraseSpan, T)>,
) -> Option<PhraseMatch<T>> {
    let mut best: Option<PhraseMatch<T>> = None;
    for (span, score) in scored {
        let better = match &best {
            None => true,
            Some(b) => {
                score > b.score
                    || (score == b.score && (span.start, span.len()) < (b.span.start, b.span.len()))
            }
        };
        if better {
            best = Some(PhraseMatch { span, score });
        }
    }
    best
}

/// The span whose embedding has maximal cosine similarity to `src`.
pub fn top_sim<T: Scalar>(
    src: &Embedding<T>,
    spans: &[PhraseSpan],
    embedder: &dyn TextEmbedder<T>,
) -> Result<Option<PhraseMatch<T>>> {
    let mut scored = Vec::with_capacity(spans.len());
    for span in spans {
        let e = embedder.embed(&span.surface)?;
        scored.push((span.clone(), cosine(src, &e)?));
    }
    Ok(select_best(scored))
}
