use rayon::prelude::*;

use crate::align::project_span;
use crate::annindex::SearchHit;
use crate::corpusio::{Bitext, DictionaryEntry, SentencePair};
use crate::embedding::{Embedding, TextEmbedder};
use crate::error::Result;
use crate::phrase::{extract_noun_phrases_max, tag_with, top_sim, Lexicon};
use crate::substitute::{substitute_pair, GenerationStats, PairDeduper, PseudoCorpus, PseudoPair};
use crate::{AlignmentModel, AnnIndex};

#[derive(Debug, Clone, PartialEq)]
pub struct GenerateParams {
    pub top_n: usize,
    pub nprobe: usize,
    pub max_len: usize,
    pub sim_floor: Option<f64>,
    pub keep_identity: bool,
    pub dedup: bool,
    pub max_pairs: Option<u64>,
    pub batch_size: usize,
}

impl Default for GenerateParams {
    fn default() -> Self {
        GenerateParams {
            top_n: 5,
            nprobe: 8,
            max_len: 5,
            sim_floor: None,
            keep_identity: true,
            dedup: true,
            max_pairs: None,
            batch_size: 256,
        }
    }
}

/// Result of one `(entry, template)` candidate.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Pair(Box<PseudoPair>),
    NoPhrase,
    BelowFloor,
    NoProjection,
    Failed,
    Truncated,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GenerationSummary {
    pub stats: GenerationStats,
    /// Entries whose source term could not be embedded.
    pub entries_failed: u64,
}

/// Everything a generation run reads. All parts are immutable and shared
/// between workers.
pub struct Generator<'a> {
    pub bitext: &'a Bitext,
    pub index: &'a AnnIndex,
    pub model: &'a AlignmentModel,
    pub lexicon: &'a Lexicon,
    pub embedder: &'a dyn TextEmbedder<f32>,
    pub params: GenerateParams,
}

impl Generator<'_> {
    fn nprobe(&self) -> usize {
        self.params.nprobe.clamp(1, self.index.n_clusters())
    }

    /// Query embedding and the top templates for an entry.
    pub fn templates(
        &self,
        entry: &DictionaryEntry,
    ) -> Result<(Embedding<f32>, Vec<SearchHit<f32>>)> {
        let query = self.embedder.embed(&entry.src_text())?;
        let hits = self
            .index
            .search(query.values(), self.params.top_n, self.nprobe())?;
        Ok((query, hits))
    }

    pub fn candidate(
        &self,
        entry: &DictionaryEntry,
        query: &Embedding<f32>,
        template: &SentencePair,
    ) -> Outcome {
        let tagged = tag_with(self.lexicon, &template.source);
        let spans = extract_noun_phrases_max(&tagged, self.params.max_len);
        let matched = match top_sim(query, &spans, self.embedder) {
            Ok(Some(m)) => m,
            Ok(None) => return Outcome::NoPhrase,
            Err(e) => {
                log::debug!("line {}: {e}", template.line);
                return Outcome::Failed;
            }
        };
        if self
            .params
            .sim_floor
            .is_some_and(|f| (matched.score as f64) < f)
        {
            return Outcome::BelowFloor;
        }
        let links = self.model.viterbi_align(&template.source, &template.target);
        let Some(tgt_span) = project_span(
            &links,
            matched.span.start,
            matched.span.end,
            template.target.len(),
        ) else {
            return Outcome::NoProjection;
        };
        match substitute_pair(template, &matched, tgt_span, entry) {
            Ok(p) => Outcome::Pair(Box::new(p)),
            Err(e) => {
                log::debug!("line {}: {e}", template.line);
                Outcome::Failed
            }
        }
    }

    /// Outcomes for every template retrieved for `entry`, in rank order.
    pub fn entry_outcomes(&self, entry: &DictionaryEntry) -> Result<Vec<Outcome>> {
        let (query, hits) = self.templates(entry)?;
        Ok(hits
            .iter()
            .map(|h| self.candidate(entry, &query, &self.bitext.pairs[h.sentence_id]))
            .collect())
    }

    /// Run over `entries` in order, handing each kept pair to `sink`.
    /// Batches are computed in parallel and consumed sequentially, so the
    /// output does not depend on the worker count.
    pub fn run(
        &self,
        entries: &[DictionaryEntry],
        mut sink: impl FnMut(&PseudoPair) -> Result<()>,
    ) -> Result<GenerationSummary> {
        let mut summary = GenerationSummary::default();
        let stats = &mut summary.stats;
        let mut seen = PairDeduper::new();
        let full = |s: &GenerationStats| self.params.max_pairs.is_some_and(|m| s.generated >= m);
        for batch in entries.chunks(self.params.batch_size.max(1)) {
            let saturated = full(stats);
            let results: Vec<Result<Vec<Outcome>>> = batch
                .par_iter()
                .map(|e| {
                    if saturated {
                        self.templates(e)
                            .map(|(_, h)| vec![Outcome::Truncated; h.len()])
                    } else {
                        self.entry_outcomes(e)
                    }
                })
                .collect();
            for (entry, result) in batch.iter().zip(results) {
                let outcomes = match result {
                    Ok(o) => o,
                    Err(e) => {
                        log::warn!("entry {:?}: {e}", entry.src_text());
                        summary.entries_failed += 1;
                        continue;
                    }
                };
                for outcome in outcomes {
                    stats.attempted += 1;
                    match outcome {
                        Outcome::NoPhrase => stats.skipped_no_phrase += 1,
                        Outcome::BelowFloor => stats.skipped_below_floor += 1,
                        Outcome::NoProjection => stats.skipped_no_projection += 1,
                        Outcome::Failed => stats.skipped_error += 1,
                        Outcome::Truncated => stats.truncated += 1,
                        Outcome::Pair(p) => {
                            if p.provenance.identity && !self.params.keep_identity {
                                stats.skipped_identity += 1;
                            } else if self.params.dedup && !seen.insert(&p.g_source, &p.g_target) {
                                stats.deduped += 1;
                            } else if full(stats) {
                                stats.truncated += 1;
                            } else {
                                sink(&p)?;
                                stats.generated += 1;
                            }
                        }
                    }
                }
            }
        }
        Ok(summary)
    }

    /// Collect the output in memory.
    pub fn generate(
        &self,
        entries: &[DictionaryEntry],
    ) -> Result<(PseudoCorpus, GenerationSummary)> {
        let mut corpus = PseudoCorpus::new(
            self.bitext.source_lang.clone(),
            self.bitext.target_lang.clone(),
        );
        let summary = self.run(entries, |p| {
            corpus.pairs.push(p.clone());
            Ok(())
        })?;
        corpus.stats = summary.stats;
        Ok((corpus, summary))
    }
}
