//! Run configuration: TOML, or a plain `key = value` file with `[section]`
//! headers, plus `section.key=value` overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::align::AlignConfig;
use crate::corpusio::WriteMode;
use crate::coverage::{ReportFormat, Side, MAX_NGRAM};
use crate::embedding::BERT_BASE_DIM;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: PathsConfig,
    pub languages: LanguageConfig,
    pub generate: GenerateConfig,
    pub embedding: EmbeddingConfig,
    pub ann: AnnConfig,
    pub align: AlignConfig,
    pub phrase: PhraseConfig,
    pub coverage: CoverageConfig,
    pub mix: MixConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub source: Option<PathBuf>,
    pub target: Option<PathBuf>,
    pub dictionary: Option<PathBuf>,
    /// Precomputed embeddings keyed by sentence line id and term surface.
    pub embeddings: Option<PathBuf>,
    /// Tag lexicon for the source language, replacing the bundled one.
    pub lexicon: Option<PathBuf>,
    pub test_source: Option<PathBuf>,
    pub test_target: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// Defaults to `<output_dir>/cache`.
    pub cache_dir: Option<PathBuf>,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            source: None,
            target: None,
            dictionary: None,
            embeddings: None,
            lexicon: None,
            test_source: None,
            test_target: None,
            output_dir: PathBuf::from("out"),
            cache_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LanguageConfig {
    /// Taken from the bitext file extension when unset.
    pub source: Option<String>,
    pub target: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateConfig {
    pub top_n: usize,
    /// Stop writing after this many pairs, in entry order.
    pub max_pairs: Option<u64>,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
    /// Dictionary entries handled per parallel batch.
    pub batch_size: usize,
    pub keep_identity: bool,
    pub dedup_output: bool,
    pub mix_with_ood: bool,
    pub shuffle_seed: Option<u64>,
    pub write_mode: WriteMode,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        GenerateConfig {
            top_n: 5,
            max_pairs: None,
            workers: 0,
            batch_size: 256,
            keep_identity: true,
            dedup_output: true,
            mix_with_ood: false,
            shuffle_seed: None,
            write_mode: WriteMode::Tokenized,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    /// Fallback embedder dimension; ignored when a store is loaded.
    pub dim: usize,
    pub seed: u64,
    /// Embed keys missing from the store with the 3-gram embedder.
    pub fallback: bool,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            dim: BERT_BASE_DIM,
            seed: 13,
            fallback: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnConfig {
    /// Cluster count; 0 picks `⌊√count⌋`.
    pub k: usize,
    pub nprobe: usize,
    pub seed: u64,
    pub max_iters: usize,
}

impl Default for AnnConfig {
    fn default() -> Self {
        AnnConfig {
            k: 0,
            nprobe: 8,
            seed: 42,
            max_iters: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhraseConfig {
    pub max_len: usize,
    /// Skip templates whose best phrase scores below this; unset disables it.
    pub sim_floor: Option<f64>,
}

impl Default for PhraseConfig {
    fn default() -> Self {
        PhraseConfig {
            max_len: MAX_NGRAM,
            sim_floor: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoverageConfig {
    pub side: Side,
    pub fold_case: bool,
    pub format: ReportFormat,
    /// Extra corpora (same side) to report on.
    pub compare: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixConfig {
    /// Generated corpus to mix; defaults to the `generate` outputs.
    pub pseudo_source: Option<PathBuf>,
    pub pseudo_target: Option<PathBuf>,
}

const PATH_KEYS: &[(&str, &str)] = &[
    ("paths", "source"),
    ("paths", "target"),
    ("paths", "dictionary"),
    ("paths", "embeddings"),
    ("paths", "lexicon"),
    ("paths", "test_source"),
    ("paths", "test_target"),
    ("paths", "output_dir"),
    ("paths", "cache_dir"),
    ("mix", "pseudo_source"),
    ("mix", "pseudo_target"),
];

impl PipelineConfig {
    /// Load a config file (if any), apply overrides and validate. Relative
    /// paths in the file are taken relative to the file's directory;
    /// relative paths in overrides stay relative to the working directory.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut table = match path {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
                let mut table = parse_config_text(&text)
                    .map_err(|m| Error::Config(format!("{}: {m}", path.display())))?;
                let base = path.parent().unwrap_or(Path::new(""));
                resolve_paths(&mut table, base);
                table
            }
            None => Table::new(),
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let config: PipelineConfig = Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.generate.top_n == 0 {
            return fail("generate.top_n must be at least 1".into());
        }
        if self.generate.batch_size == 0 {
            return fail("generate.batch_size must be at least 1".into());
        }
        if self.ann.nprobe == 0 {
            return fail("ann.nprobe must be at least 1".into());
        }
        if self.ann.max_iters == 0 {
            return fail("ann.max_iters must be at least 1".into());
        }
        if self.embedding.dim < 8 {
            return fail(format!(
                "embedding.dim {} must be at least 8",
                self.embedding.dim
            ));
        }
        if !(1..=MAX_NGRAM).contains(&self.phrase.max_len) {
            return fail(format!("phrase.max_len must be between 1 and {MAX_NGRAM}"));
        }
        if let Some(f) = self.phrase.sim_floor {
            if !(-1.0..=1.0).contains(&f) {
                return fail(format!("phrase.sim_floor {f} must lie in [-1, 1]"));
            }
        }
        self.align
            .validate()
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.paths
            .cache_dir
            .clone()
            .unwrap_or_else(|| self.paths.output_dir.join("cache"))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

/// A required path, or a config error naming the key.
pub fn require<'a>(value: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    value
        .as_deref()
        .ok_or_else(|| Error::Config(format!("{key} is required")))
}

fn parse_config_text(text: &str) -> std::result::Result<Table, String> {
    match text.parse::<Table>() {
        Ok(t) => Ok(t),
        Err(toml_err) => parse_key_values(text).map_err(|kv_err| {
            format!(
                "not valid TOML ({}) nor key=value ({kv_err})",
                toml_err.message()
            )
        }),
    }
}

fn parse_key_values(text: &str) -> std::result::Result<Table, String> {
    let mut table = Table::new();
    let mut section: Option<String> = None;
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = Some(name.trim().to_string());
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected key = value", n + 1))?;
        let key = key.trim();
        let path = match &section {
            Some(s) => format!("{s}.{key}"),
            None => key.to_string(),
        };
        insert_path(&mut table, &path, parse_value(value.trim()))?;
    }
    Ok(table)
}

fn parse_value(raw: &str) -> Value {
    if let Ok(mut t) = format!("v = {raw}").parse::<Table>() {
        if let Some(v) = t.remove("v") {
            return v;
        }
    }
    let unquoted = raw
        .strip_prefix('"')
        .and_then(|r| r.strip_suffix('"'))
        .unwrap_or(raw);
    Value::String(unquoted.to_string())
}

fn insert_path(table: &mut Table, path: &str, value: Value) -> std::result::Result<(), String> {
    let parts: Vec<&str> = path.split('.').map(str::trim).collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(format!("malformed key {path:?}"));
    }
    let (last, parents) = parts.split_last().unwrap();
    let mut cur = table;
    for p in parents {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| format!("{p} is not a section"))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Apply one `section.key=value` override.
pub fn apply_override(table: &mut Table, assignment: &str) -> Result<()> {
    let (key, value) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {assignment:?} is not key=value")))?;
    insert_path(table, key.trim(), parse_value(value.trim())).map_err(Error::Config)
}

fn resolve_paths(table: &mut Table, base: &Path) {
    let join = |v: &mut Value| {
        if let Value::String(s) = v {
            let p = Path::new(s.as_str());
            if p.is_relative() {
                *s = base.join(p).to_string_lossy().into_owned();
            }
        }
    };
    for (section, key) in PATH_KEYS {
        if let Some(v) = table
            .get_mut(*section)
            .and_then(Value::as_table_mut)
            .and_then(|t| t.get_mut(*key))
        {
            join(v);
        }
    }
    if let Some(Value::Array(items)) = table
        .get_mut("coverage")
        .and_then(Value::as_table_mut)
        .and_then(|t| t.get_mut("compare"))
    {
        items.iter_mut().for_each(join);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn defaults() {
        let c = PipelineConfig::load(None, &[]).unwrap();
        assert_eq!(c.generate.top_n, 5);
        assert_eq!(c.ann.nprobe, 8);
        assert_eq!(c.align.iterations, 5);
        assert_eq!(c.phrase.max_len, 5);
        assert_eq!(c.phrase.sim_floor, None);
        assert_eq!(c.embedding.dim, 768);
    }

    #[test]
    fn toml_and_key_value_agree() {
        let dir = tempfile::tempdir().unwrap();
        let a = write(
            dir.path(),
            "a.toml",
            "[paths]\nsource = \"train.en\"\n[generate]\ntop_n = 7\nkeep_identity = false\n[align]\np_null = 0.1\n",
        );
        let b = write(
            dir.path(),
            "b.conf",
            "# comment\n[paths]\nsource = train.en\n[generate]\ntop_n = 7\nkeep_identity = false\n[align]\np_null = 0.1\n",
        );
        let ca = PipelineConfig::load(Some(&a), &[]).unwrap();
        let cb = PipelineConfig::load(Some(&b), &[]).unwrap();
        assert_eq!(ca, cb);
        assert_eq!(
            ca.paths.source.as_deref(),
            Some(dir.path().join("train.en").as_path())
        );
        assert_eq!(ca.generate.top_n, 7);
        assert!(!ca.generate.keep_identity);
    }

    #[test]
    fn overrides_and_validation() {
        let c = PipelineConfig::load(None, &["generate.top_n=3".into(), "ann.seed = 9".into()])
            .unwrap();
        assert_eq!((c.generate.top_n, c.ann.seed), (3, 9));
        let c = PipelineConfig::load(None, &["paths.output_dir=x/y".into()]).unwrap();
        assert_eq!(c.paths.output_dir, PathBuf::from("x/y"));
        assert_eq!(c.cache_dir(), PathBuf::from("x/y/cache"));

        for bad in [
            "generate.top_n=0",
            "generate.nope=1",
            "align.p_null=1.5",
            "phrase.max_len=6",
            "top_n",
        ] {
            let err = PipelineConfig::load(None, &[bad.into()]).unwrap_err();
            assert!(err.is_config(), "{bad}: {err}");
        }
    }

    #[test]
    fn snapshot_round_trips() {
        let c = PipelineConfig::load(
            None,
            &[
                "generate.max_pairs=10".into(),
                "coverage.compare=[\"a\",\"b\"]".into(),
            ],
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "c.toml", &c.to_toml());
        let back = PipelineConfig::load(Some(&p), &[]).unwrap();
        assert_eq!(back.generate, c.generate);
        assert_eq!(back.coverage.compare.len(), 2);
    }
}
