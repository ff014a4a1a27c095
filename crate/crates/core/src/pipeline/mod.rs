//! End-to-end commands: generation, coverage reporting, mixing, and the
//! standalone alignment, index and dedup steps.
//!
//! The expensive artifacts (IVF index, alignment model) are cached under
//! the cache directory, keyed by the SHA-256 of their inputs and parameters.

mod config;
mod generate;
mod manifest;

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::align::{train_alignment, write_pharaoh, AlignmentLinks, MODEL_VERSION};
use crate::annindex::{default_clusters, FlatVectors, IvfParams, INDEX_VERSION};
use crate::corpusio::{
    deduplicate, lang_from_path, load_bitext_with_langs, load_dictionary, normalize, read_lines,
    tokenize, Bitext, DomainDictionary, LineWriter, SentencePair, WriteMode,
};
use crate::coverage::{
    corpus_coverage, coverage_gain, dict_terms, emit_diff, emit_report, extract_ngrams,
    CoverageGain, CoverageReport, Side, TermDiff,
};
use crate::embedding::{
    fallback_embed, load_embeddings, FallbackEmbedder, StoreEmbedder, TextEmbedder,
};
use crate::error::{Error, Result};
use crate::phrase::Lexicon;
use crate::substitute::PseudoCorpus;
use crate::{AlignmentModel, AnnIndex, EmbeddingStore};

pub use config::{
    apply_override, require, AnnConfig, CoverageConfig, EmbeddingConfig, GenerateConfig,
    LanguageConfig, MixConfig, PathsConfig, PhraseConfig, PipelineConfig,
};
pub use generate::{GenerateParams, GenerationSummary, Generator, Outcome};
pub use manifest::{sha256_file, InputRecord, RunManifest};

use manifest::sha256_text;

/// Run `f` on a pool with `workers` threads (0 = one per core).
pub fn with_pool<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(f))
}

/// Source and target language tags, from the config or the file names.
pub fn languages(config: &PipelineConfig) -> (String, String) {
    let guess = |p: &Option<PathBuf>, fallback: &str| {
        p.as_deref()
            .map(|p| lang_from_path(p, fallback))
            .unwrap_or_else(|| fallback.to_string())
    };
    (
        config
            .languages
            .source
            .clone()
            .unwrap_or_else(|| guess(&config.paths.source, "src")),
        config
            .languages
            .target
            .clone()
            .unwrap_or_else(|| guess(&config.paths.target, "tgt")),
    )
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputPair {
    pub source: PathBuf,
    pub target: PathBuf,
}

fn output_pair(dir: &Path, stem: &str, src_lang: &str, tgt_lang: &str) -> OutputPair {
    let (s, t) = if src_lang == tgt_lang {
        ("source".to_string(), "target".to_string())
    } else {
        (src_lang.to_string(), tgt_lang.to_string())
    };
    OutputPair {
        source: dir.join(format!("{stem}.{s}")),
        target: dir.join(format!("{stem}.{t}")),
    }
}

/// Where `generate` writes its corpus.
pub fn generated_files(config: &PipelineConfig) -> (OutputPair, PathBuf) {
    let (s, t) = languages(config);
    let dir = &config.paths.output_dir;
    (
        output_pair(dir, "pseudo", &s, &t),
        dir.join("pseudo.provenance.jsonl"),
    )
}

fn manifest_target(config: &PipelineConfig, command: &str, explicit: Option<&Path>) -> PathBuf {
    explicit.map(Path::to_path_buf).unwrap_or_else(|| {
        config
            .paths
            .output_dir
            .join(format!("{command}.manifest.json"))
    })
}

fn load_ood(config: &PipelineConfig, m: &mut RunManifest) -> Result<Bitext> {
    let src = require(&config.paths.source, "paths.source")?;
    let tgt = require(&config.paths.target, "paths.target")?;
    m.record_input("source", src)?;
    m.record_input("target", tgt)?;
    let (sl, tl) = languages(config);
    let bitext = load_bitext_with_langs(src, tgt, &sl, &tl)?;
    m.count("bitext_pairs", bitext.len() as u64);
    m.count("bitext_dropped", bitext.dropped as u64);
    Ok(bitext)
}

fn require_nonempty(bitext: &Bitext) -> Result<()> {
    if bitext.is_empty() {
        return Err(Error::InvalidParameter(
            "bitext has no usable sentence pairs".into(),
        ));
    }
    Ok(())
}

/// Load the dictionary; an empty file gives an empty dictionary here.
fn load_dict(config: &PipelineConfig, m: &mut RunManifest) -> Result<DomainDictionary> {
    let path = require(&config.paths.dictionary, "paths.dictionary")?;
    m.record_input("dictionary", path)?;
    let dict = match load_dictionary(path) {
        Ok(d) => d,
        Err(Error::EmptyDictionary { path }) => {
            log::warn!("{}: no usable entries, nothing to generate", path.display());
            let name = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("dictionary");
            DomainDictionary::new(name, [])
        }
        Err(e) => return Err(e),
    };
    m.count("dictionary_entries", dict.len() as u64);
    m.count("dictionary_skipped_rows", dict.skipped_rows as u64);
    Ok(dict)
}

fn load_store(config: &PipelineConfig, m: &mut RunManifest) -> Result<Option<EmbeddingStore>> {
    let Some(path) = config.paths.embeddings.as_deref() else {
        if !config.embedding.fallback {
            return Err(Error::Config(
                "paths.embeddings is required when embedding.fallback is false".into(),
            ));
        }
        return Ok(None);
    };
    m.record_input("embeddings", path)?;
    let store = load_embeddings(path)?;
    m.count("embeddings", store.len() as u64);
    Ok(Some(store))
}

fn embedder<'a>(
    config: &PipelineConfig,
    store: Option<&'a EmbeddingStore>,
) -> Box<dyn TextEmbedder<f32> + 'a> {
    let seed = config.embedding.seed;
    match store {
        Some(store) => Box::new(StoreEmbedder {
            store,
            fallback: config.embedding.fallback.then_some(FallbackEmbedder {
                dim: store.dim(),
                seed,
            }),
        }),
        None => Box::new(FallbackEmbedder {
            dim: config.embedding.dim,
            seed,
        }),
    }
}

/// Unit sentence vectors with dense pair ids. Stored vectors are looked up
/// by line number; missing ones are embedded from the source tokens when
/// the fallback is enabled.
pub fn sentence_vectors(
    bitext: &Bitext,
    store: Option<&EmbeddingStore>,
    config: &EmbeddingConfig,
) -> Result<FlatVectors<f32>> {
    let dim = store.map_or(config.dim, |s| s.dim());
    let mut flat = FlatVectors::with_capacity(dim, bitext.len());
    for chunk in bitext.pairs.chunks(4096) {
        let rows: Vec<Vec<f32>> = chunk
            .par_iter()
            .map(|p| {
                if let Some(v) = store.and_then(|s| s.get(&p.line.to_string())) {
                    return Ok(v.to_vec());
                }
                if !config.fallback {
                    return Err(Error::InvalidParameter(format!(
                        "no embedding for sentence line {}",
                        p.line
                    )));
                }
                Ok(fallback_embed::<f32>(&p.source.join(" "), dim, config.seed)?.into_inner())
            })
            .collect::<Result<_>>()?;
        for (p, row) in chunk.iter().zip(rows) {
            flat.push(p.id, &row)?;
        }
    }
    Ok(flat)
}

#[derive(Serialize)]
struct IndexKey<'a> {
    kind: &'static str,
    version: u32,
    source: Option<&'a str>,
    embeddings: Option<&'a str>,
    dim: usize,
    fallback: bool,
    embed_seed: u64,
    k: usize,
    seed: u64,
    max_iters: usize,
}

fn cached<T>(
    path: &Path,
    what: &str,
    m: &mut RunManifest,
    load: impl FnOnce(&Path) -> Result<T>,
    build: impl FnOnce() -> Result<T>,
    save: impl FnOnce(&T, &Path) -> Result<()>,
) -> Result<T> {
    if path.exists() {
        match load(path) {
            Ok(v) => {
                log::info!("{what}: reusing {}", path.display());
                m.cache.insert(what.to_string(), "hit".into());
                return Ok(v);
            }
            Err(e) => log::warn!("{what}: ignoring unreadable cache {}: {e}", path.display()),
        }
    }
    let v = build()?;
    let tmp = path.with_extension("tmp");
    save(&v, &tmp)?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
    m.cache.insert(what.to_string(), "built".into());
    Ok(v)
}

fn resolve_k(config: &PipelineConfig, count: usize) -> Result<usize> {
    let k = if config.ann.k == 0 {
        default_clusters(count)
    } else {
        config.ann.k
    };
    if k > count {
        return Err(Error::Config(format!(
            "ann.k {k} exceeds the {count} indexed sentences"
        )));
    }
    Ok(k)
}

/// Build the sentence index, or load it from the cache.
fn obtain_index(
    config: &PipelineConfig,
    bitext: &Bitext,
    store: Option<&EmbeddingStore>,
    m: &mut RunManifest,
) -> Result<AnnIndex> {
    require_nonempty(bitext)?;
    let k = resolve_k(config, bitext.len())?;
    let key = IndexKey {
        kind: "ivf-f32",
        version: INDEX_VERSION,
        source: m.checksum("source"),
        embeddings: m.checksum("embeddings"),
        dim: store.map_or(config.embedding.dim, |s| s.dim()),
        fallback: config.embedding.fallback,
        embed_seed: config.embedding.seed,
        k,
        seed: config.ann.seed,
        max_iters: config.ann.max_iters,
    };
    let digest = sha256_text(&serde_json::to_string(&key).expect("key serializes"));
    let path = config
        .cache_dir()
        .join(format!("index-{}.ivf", &digest[..16]));
    let params = IvfParams {
        n_clusters: k,
        seed: config.ann.seed,
        max_iters: config.ann.max_iters,
    };
    let index = cached(
        &path,
        "index",
        m,
        AnnIndex::load,
        || {
            AnnIndex::build(
                &sentence_vectors(bitext, store, &config.embedding)?,
                &params,
            )
        },
        |v, p| v.save(p),
    )?;
    if index.len() != bitext.len() {
        return Err(Error::format(
            &path,
            "cached index does not cover the bitext",
        ));
    }
    m.count("index_clusters", index.n_clusters() as u64);
    Ok(index)
}

#[derive(Serialize)]
struct AlignKey<'a> {
    kind: &'static str,
    version: u32,
    source: Option<&'a str>,
    target: Option<&'a str>,
    source_lang: &'a str,
    target_lang: &'a str,
    align: &'a crate::align::AlignConfig,
}

/// Train the source→target alignment model, or load it from the cache.
fn obtain_alignment(
    config: &PipelineConfig,
    bitext: &Bitext,
    m: &mut RunManifest,
) -> Result<AlignmentModel> {
    require_nonempty(bitext)?;
    let key = AlignKey {
        kind: "align-f64",
        version: MODEL_VERSION,
        source: m.checksum("source"),
        target: m.checksum("target"),
        source_lang: &bitext.source_lang,
        target_lang: &bitext.target_lang,
        align: &config.align,
    };
    let digest = sha256_text(&serde_json::to_string(&key).expect("key serializes"));
    let path = config
        .cache_dir()
        .join(format!("align-{}.bin", &digest[..16]));
    let model = cached(
        &path,
        "alignment",
        m,
        AlignmentModel::load,
        || train_alignment(bitext, &config.align),
        |v, p| v.save(p),
    )?;
    m.count("align_source_vocab", model.source_vocab().len() as u64);
    m.count("align_target_vocab", model.target_vocab().len() as u64);
    Ok(model)
}

fn source_lexicon(config: &PipelineConfig, lang: &str, m: &mut RunManifest) -> Result<Lexicon> {
    match config.paths.lexicon.as_deref() {
        Some(path) => {
            m.record_input("lexicon", path)?;
            Lexicon::load(lang, path)
        }
        None => Lexicon::bundled(lang).ok_or_else(|| Error::MissingLexicon {
            lang: lang.to_string(),
        }),
    }
}

fn generate_params(config: &PipelineConfig) -> GenerateParams {
    GenerateParams {
        top_n: config.generate.top_n,
        nprobe: config.ann.nprobe,
        max_len: config.phrase.max_len,
        sim_floor: config.phrase.sim_floor,
        keep_identity: config.generate.keep_identity,
        dedup: config.generate.dedup_output,
        max_pairs: config.generate.max_pairs,
        batch_size: config.generate.batch_size,
    }
}

#[derive(Debug, Clone)]
pub struct GenerateOutcome {
    pub manifest: RunManifest,
    pub manifest_path: PathBuf,
    pub corpus: OutputPair,
    pub provenance: PathBuf,
    pub summary: GenerationSummary,
}

/// Generate the pseudo in-domain corpus, streaming pairs to disk in
/// dictionary order.
pub fn run_generate(
    config: &PipelineConfig,
    manifest_path: Option<&Path>,
) -> Result<GenerateOutcome> {
    let mut m = RunManifest::new("generate", config);
    let (files, provenance) = generated_files(config);
    let summary = with_pool(config.generate.workers, || -> Result<GenerationSummary> {
        let bitext = m.stage("load", |m| load_ood(config, m))?;
        let dict = m.stage("dictionary", |m| load_dict(config, m))?;
        let store = m.stage("embeddings", |m| load_store(config, m))?;
        let lexicon = m.stage("lexicon", |m| {
            source_lexicon(config, &bitext.source_lang, m)
        })?;
        let index = m.stage("index", |m| {
            obtain_index(config, &bitext, store.as_ref(), m)
        })?;
        let model = m.stage("align", |m| obtain_alignment(config, &bitext, m))?;
        let embedder = embedder(config, store.as_ref());
        let generator = Generator {
            bitext: &bitext,
            index: &index,
            model: &model,
            lexicon: &lexicon,
            embedder: embedder.as_ref(),
            params: generate_params(config),
        };
        let mode = config.generate.write_mode;
        let summary = m.stage("generate", |_| {
            let mut src = LineWriter::create(&files.source)?;
            let mut tgt = LineWriter::create(&files.target)?;
            let mut side = LineWriter::create(&provenance)?;
            let summary = generator.run(&dict.entries, |p| {
                src.line(&render(&p.g_source, mode))?;
                tgt.line(&render(&p.g_target, mode))?;
                side.line(&p.provenance.to_json_line())
            })?;
            src.finish()?;
            tgt.finish()?;
            side.finish()?;
            Ok(summary)
        })?;
        if config.generate.mix_with_ood {
            m.stage("mix", |m| {
                let (sl, tl) = languages(config);
                let pseudo = load_bitext_with_langs(&files.source, &files.target, &sl, &tl)?;
                let mixed = mix_bitexts(&bitext, &pseudo, config.generate.shuffle_seed)?;
                let out = output_pair(&config.paths.output_dir, "mixed", &sl, &tl);
                crate::corpusio::write_bitext(
                    &mixed,
                    &out.source,
                    &out.target,
                    WriteMode::Tokenized,
                )?;
                m.output("mixed_source", &out.source);
                m.output("mixed_target", &out.target);
                m.count("mixed_pairs", mixed.len() as u64);
                Ok(())
            })?;
        }
        Ok(summary)
    })??;

    let stats = summary.stats;
    if !stats.is_balanced() {
        return Err(Error::InvalidParameter(format!(
            "generation accounting does not balance: {stats:?}"
        )));
    }
    m.stats = Some(stats);
    m.count("entries_failed", summary.entries_failed);
    m.count("pairs_generated", stats.generated);
    m.output("source", &files.source);
    m.output("target", &files.target);
    m.output("provenance", &provenance);
    let manifest_path = manifest_target(config, "generate", manifest_path);
    m.write(&manifest_path)?;
    log::info!(
        "generated {} pairs from {} candidates ({} without phrase, {} without projection, {} duplicates)",
        stats.generated,
        stats.attempted,
        stats.skipped_no_phrase,
        stats.skipped_no_projection,
        stats.deduped
    );
    Ok(GenerateOutcome {
        manifest: m,
        manifest_path,
        corpus: files,
        provenance,
        summary,
    })
}

fn render(tokens: &[String], mode: WriteMode) -> String {
    match mode {
        WriteMode::Tokenized => tokens.join(" "),
        WriteMode::Detokenized => crate::corpusio::detokenize(tokens),
    }
}

/// Normalized, tokenized lines of a text file.
pub fn read_tokenized(path: &Path) -> Result<Vec<Vec<String>>> {
    let lines = read_lines(path)?;
    Ok(lines.par_iter().map(|l| tokenize(&normalize(l))).collect())
}

#[derive(Debug, Clone)]
pub struct CoverageOutcome {
    pub manifest: RunManifest,
    /// The training corpus report comes first.
    pub reports: Vec<CoverageReport>,
    /// Gain of every other corpus over the training corpus.
    pub gains: Vec<CoverageGain>,
    pub diffs: Vec<TermDiff>,
}

#[derive(Serialize)]
struct GainRecord<'a> {
    corpus: &'a str,
    baseline: &'a str,
    gain: usize,
    new_terms: Vec<&'a str>,
}

fn file_label(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn safe_name(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_alphanumeric() || c == '.' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Coverage of the training corpus, the generated corpus and any extra
/// corpora against the test set, with gains and term differences.
pub fn run_coverage(
    config: &PipelineConfig,
    generated: Option<&Path>,
    extra: &[PathBuf],
    manifest_path: Option<&Path>,
) -> Result<CoverageOutcome> {
    let mut m = RunManifest::new("coverage", config);
    let cov = &config.coverage;
    let (train_key, test_key) = match cov.side {
        Side::Source => ("paths.source", "paths.test_source"),
        Side::Target => ("paths.target", "paths.test_target"),
    };
    let (train, test) = match cov.side {
        Side::Source => (&config.paths.source, &config.paths.test_source),
        Side::Target => (&config.paths.target, &config.paths.test_target),
    };
    let train = require(train, train_key)?.to_path_buf();
    let test = require(test, test_key)?.to_path_buf();

    let mut corpora: Vec<PathBuf> = vec![train.clone()];
    match generated {
        Some(p) => corpora.push(p.to_path_buf()),
        None => {
            let (files, _) = generated_files(config);
            let p = match cov.side {
                Side::Source => files.source,
                Side::Target => files.target,
            };
            if p.exists() {
                corpora.push(p);
            }
        }
    }
    corpora.extend(cov.compare.iter().cloned());
    corpora.extend(extra.iter().cloned());

    let mut labels: Vec<String> = Vec::new();
    for p in &corpora {
        let base = file_label(p);
        let mut label = base.clone();
        let mut n = 2;
        while labels.contains(&label) {
            label = format!("{base}#{n}");
            n += 1;
        }
        labels.push(label);
    }

    let outcome = with_pool(config.generate.workers, || -> Result<CoverageOutcome> {
        let dict = m.stage("dictionary", |m| load_dict(config, m))?;
        let (dterms, long) = dict_terms(&dict, cov.side, cov.fold_case);
        m.count("dictionary_terms", dterms.len() as u64);
        m.count("dictionary_terms_too_long", long as u64);
        let tterms = m.stage("testset", |m| {
            m.record_input("testset", &test)?;
            extract_ngrams(
                file_label(&test),
                &read_tokenized(&test)?,
                1,
                5,
                cov.fold_case,
            )
        })?;
        let mut reports = Vec::new();
        for (i, (path, label)) in corpora.iter().zip(&labels).enumerate() {
            let r = m.stage("coverage", |m| {
                m.record_input(&format!("corpus_{i}"), path)?;
                let sentences = read_tokenized(path)?;
                Ok(corpus_coverage(
                    label,
                    &sentences,
                    &dterms,
                    &tterms,
                    cov.fold_case,
                ))
            })?;
            m.count(&format!("ed_{label}"), r.ed_value as u64);
            reports.push(r);
        }

        let dir = config.paths.output_dir.join("coverage");
        let ext = cov.format.to_string();
        let mut gains = Vec::new();
        let mut diffs = Vec::new();
        m.stage("reports", |m| {
            for r in &reports {
                let p = dir.join(format!("{}.{ext}", safe_name(&r.corpus)));
                emit_report(r, &p, cov.format)?;
                m.output(&format!("report_{}", r.corpus), &p);
            }
            let base = &reports[0];
            for r in &reports[1..] {
                gains.push(coverage_gain(r, base)?);
                diffs.push(crate::coverage::term_diff(r, base)?);
            }
            for i in 1..reports.len() {
                for j in i + 1..reports.len() {
                    diffs.push(crate::coverage::term_diff(&reports[i], &reports[j])?);
                }
            }
            for d in &diffs {
                let p = dir.join(format!(
                    "diff_{}_vs_{}.{ext}",
                    safe_name(&d.a),
                    safe_name(&d.b)
                ));
                emit_diff(d, &p, cov.format)?;
            }
            let records: Vec<GainRecord> = reports[1..]
                .iter()
                .zip(&gains)
                .map(|(r, g)| GainRecord {
                    corpus: &r.corpus,
                    baseline: &base.corpus,
                    gain: g.gain,
                    new_terms: g.new_terms.terms.iter().map(String::as_str).collect(),
                })
                .collect();
            let p = dir.join("gains.json");
            let mut text = serde_json::to_string_pretty(&records).expect("gains serialize");
            text.push('\n');
            let mut w = LineWriter::create(&p)?;
            w.line(text.trim_end())?;
            w.finish()?;
            m.output("gains", &p);
            Ok(())
        })?;
        for (r, g) in reports[1..].iter().zip(&gains) {
            m.count(&format!("gain_{}", r.corpus), g.gain as u64);
        }
        Ok(CoverageOutcome {
            manifest: m.clone(),
            reports,
            gains,
            diffs,
        })
    })??;
    let mut outcome = outcome;
    outcome.manifest = m;
    outcome
        .manifest
        .write(&manifest_target(config, "coverage", manifest_path))?;
    Ok(outcome)
}

/// OOD pairs followed by the extra pairs, optionally shuffled with a seeded
/// RNG. Ids are renumbered; lines keep their position in the concatenation.
pub fn mix_bitexts(ood: &Bitext, extra: &Bitext, shuffle_seed: Option<u64>) -> Result<Bitext> {
    for (a, b) in [
        (&ood.source_lang, &extra.source_lang),
        (&ood.target_lang, &extra.target_lang),
    ] {
        if a != b {
            return Err(Error::LanguageMismatch {
                left: a.clone(),
                right: b.clone(),
            });
        }
    }
    let mut pairs: Vec<SentencePair> = ood.pairs.iter().chain(&extra.pairs).cloned().collect();
    for (i, p) in pairs.iter_mut().enumerate() {
        p.line = i;
    }
    if let Some(seed) = shuffle_seed {
        pairs.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    for (i, p) in pairs.iter_mut().enumerate() {
        p.id = i;
    }
    let mut out = Bitext::new(ood.source_lang.clone(), ood.target_lang.clone());
    out.pairs = pairs;
    Ok(out)
}

/// The training mixture of OOD and generated pairs.
pub fn mix_corpora(
    ood: &Bitext,
    pseudo: &PseudoCorpus,
    shuffle_seed: Option<u64>,
) -> Result<Bitext> {
    let mut extra = Bitext::new(pseudo.source_lang.clone(), pseudo.target_lang.clone());
    for (i, p) in pseudo.pairs.iter().enumerate() {
        extra.pairs.push(SentencePair {
            id: i,
            line: i,
            raw_source: p.g_source.join(" "),
            raw_target: p.g_target.join(" "),
            source: p.g_source.clone(),
            target: p.g_target.clone(),
        });
    }
    mix_bitexts(ood, &extra, shuffle_seed)
}

pub fn run_mix(config: &PipelineConfig, manifest_path: Option<&Path>) -> Result<RunManifest> {
    let mut m = RunManifest::new("mix", config);
    let (generated, _) = generated_files(config);
    let ps = config.mix.pseudo_source.clone().unwrap_or(generated.source);
    let pt = config.mix.pseudo_target.clone().unwrap_or(generated.target);
    let (sl, tl) = languages(config);
    with_pool(config.generate.workers, || -> Result<()> {
        let ood = m.stage("load", |m| load_ood(config, m))?;
        let pseudo = m.stage("load", |m| {
            m.record_input("pseudo_source", &ps)?;
            m.record_input("pseudo_target", &pt)?;
            load_bitext_with_langs(&ps, &pt, &sl, &tl)
        })?;
        let mixed = mix_bitexts(&ood, &pseudo, config.generate.shuffle_seed)?;
        let out = output_pair(&config.paths.output_dir, "mixed", &sl, &tl);
        m.stage("write", |_| {
            crate::corpusio::write_bitext(
                &mixed,
                &out.source,
                &out.target,
                config.generate.write_mode,
            )
        })?;
        m.count("ood_pairs", ood.len() as u64);
        m.count("pseudo_pairs", pseudo.len() as u64);
        m.count("mixed_pairs", mixed.len() as u64);
        m.output("source", &out.source);
        m.output("target", &out.target);
        Ok(())
    })??;
    m.write(&manifest_target(config, "mix", manifest_path))?;
    Ok(m)
}

pub fn run_align_train(
    config: &PipelineConfig,
    output: Option<&Path>,
    pharaoh: Option<&Path>,
    manifest_path: Option<&Path>,
) -> Result<RunManifest> {
    let mut m = RunManifest::new("align-train", config);
    let out = output
        .map(Path::to_path_buf)
        .unwrap_or_else(|| config.paths.output_dir.join("alignment.bin"));
    with_pool(config.generate.workers, || -> Result<()> {
        let bitext = m.stage("load", |m| load_ood(config, m))?;
        let model = m.stage("align", |m| obtain_alignment(config, &bitext, m))?;
        m.stage("write", |m| {
            model.save(&out)?;
            m.output("model", &out);
            if let Some(p) = pharaoh {
                let links: Vec<AlignmentLinks> = bitext
                    .pairs
                    .par_iter()
                    .map(|pair| model.viterbi_align(&pair.source, &pair.target))
                    .collect();
                write_pharaoh(p, &links)?;
                m.output("pharaoh", p);
            }
            Ok(())
        })?;
        m.count("final_lambda_x1e6", (model.lambda * 1e6).round() as u64);
        Ok(())
    })??;
    m.write(&manifest_target(config, "align-train", manifest_path))?;
    Ok(m)
}

pub fn run_index_build(
    config: &PipelineConfig,
    output: Option<&Path>,
    manifest_path: Option<&Path>,
) -> Result<RunManifest> {
    let mut m = RunManifest::new("index-build", config);
    let out = output
        .map(Path::to_path_buf)
        .unwrap_or_else(|| config.paths.output_dir.join("index.ivf"));
    with_pool(config.generate.workers, || -> Result<()> {
        let bitext = m.stage("load", |m| load_ood(config, m))?;
        let store = m.stage("embeddings", |m| load_store(config, m))?;
        let index = m.stage("index", |m| {
            obtain_index(config, &bitext, store.as_ref(), m)
        })?;
        m.stage("write", |m| {
            index.save(&out)?;
            m.output("index", &out);
            Ok(())
        })?;
        m.count("indexed", index.len() as u64);
        Ok(())
    })??;
    m.write(&manifest_target(config, "index-build", manifest_path))?;
    Ok(m)
}

/// Remove exact duplicate raw line pairs, writing the survivors verbatim.
pub fn run_dedup(config: &PipelineConfig, manifest_path: Option<&Path>) -> Result<RunManifest> {
    let mut m = RunManifest::new("dedup", config);
    let (sl, tl) = languages(config);
    with_pool(config.generate.workers, || -> Result<()> {
        let bitext = m.stage("load", |m| load_ood(config, m))?;
        let (kept, removed) = deduplicate(&bitext);
        let out = output_pair(&config.paths.output_dir, "dedup", &sl, &tl);
        m.stage("write", |_| {
            let mut s = LineWriter::create(&out.source)?;
            let mut t = LineWriter::create(&out.target)?;
            for p in &kept.pairs {
                s.line(&p.raw_source)?;
                t.line(&p.raw_target)?;
            }
            s.finish()?;
            t.finish()
        })?;
        m.count("kept", kept.len() as u64);
        m.count("removed", removed as u64);
        m.output("source", &out.source);
        m.output("target", &out.target);
        Ok(())
    })??;
    m.write(&manifest_target(config, "dedup", manifest_path))?;
    Ok(m)
}
