//! Toy medical domain shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use dictaug::pipeline::PipelineConfig;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

pub const NOUNS: &[(&str, &str)] = &[
    ("house", "maison"),
    ("car", "voiture"),
    ("book", "livre"),
    ("garden", "jardin"),
    ("city", "ville"),
    ("river", "rivière"),
    ("road", "route"),
    ("school", "école"),
    ("letter", "lettre"),
    ("window", "fenêtre"),
    ("door", "porte"),
    ("chair", "chaise"),
    ("dog", "chien"),
    ("cat", "chat"),
    ("bridge", "pont"),
    ("market", "marché"),
    ("hospital", "hôpital"),
    ("street", "rue"),
    ("tree", "arbre"),
    ("kitchen", "cuisine"),
    ("church", "église"),
    ("lake", "lac"),
    ("farm", "ferme"),
    ("museum", "musée"),
];

pub const ADJECTIVES: &[(&str, &str)] = &[
    ("big", "grand"),
    ("small", "petit"),
    ("old", "vieux"),
    ("new", "nouveau"),
];

pub const DICTIONARY: &[(&str, &str)] = &[
    ("mucositis", "mucite"),
    ("dry mouth", "bouche sèche"),
    ("epistaxis", "épistaxis"),
    ("folliculitis", "folliculite"),
    ("nausea", "nausée"),
    ("headache", "céphalée"),
    ("insomnia", "insomnie"),
    ("anaemia", "anémie"),
    ("alopecia", "alopécie"),
    (
        "lower respiratory tract infection",
        "infection des voies respiratoires inférieures",
    ),
    ("dyspnoea", "dyspnée"),
    ("oedema", "œdème"),
    ("pruritus", "prurit"),
    ("skin rash", "éruption cutanée"),
    ("myocardial infarction", "infarctus du myocarde"),
    ("hypertension", "hypertension"),
    ("dizziness", "vertiges"),
    ("constipation", "constipation"),
    ("neutropenia", "neutropénie"),
    ("fatigue", "fatigue"),
];

/// Dictionary terms planted in the test set; none occurs in the OOD text.
pub const TEST_TERMS: &[&str] = &[
    "mucositis",
    "dry mouth",
    "epistaxis",
    "headache",
    "alopecia",
    "lower respiratory tract infection",
    "oedema",
    "skin rash",
    "myocardial infarction",
    "neutropenia",
];

pub struct Fixture {
    pub dir: TempDir,
    pub source: PathBuf,
    pub target: PathBuf,
    pub dictionary: PathBuf,
    pub test_source: PathBuf,
    pub test_target: PathBuf,
}

impl Fixture {
    pub fn path(&self) -> &Path {
        self.dir.path()
    }
}

/// One OOD sentence pair drawn from a handful of word-for-word patterns.
pub fn ood_pair(rng: &mut impl Rng) -> (String, String) {
    let (n, nf) = *NOUNS.choose(rng).unwrap();
    let (m, mf) = *NOUNS.choose(rng).unwrap();
    let (a, af) = *ADJECTIVES.choose(rng).unwrap();
    match rng.gen_range(0..4) {
        0 => (format!("the {n} is {a} ."), format!("le {nf} est {af} .")),
        1 => (
            format!("this {n} was {a} ."),
            format!("ce {nf} était {af} ."),
        ),
        2 => (
            format!("my {n} and your {m} are {a} ."),
            format!("mon {nf} et ton {mf} sont {af} ."),
        ),
        _ => (
            format!("the {a} {n} is near the {m} ."),
            format!("le {af} {nf} est près de le {mf} ."),
        ),
    }
}

pub fn write_lines(path: &Path, lines: &[String]) {
    let mut text = lines.join("\n");
    if !lines.is_empty() {
        text.push('\n');
    }
    std::fs::write(path, text).unwrap();
}

/// Toy domain with `pairs` OOD sentence pairs and the first `entries`
/// dictionary entries.
pub fn toy_domain(pairs: usize, entries: usize) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (src, tgt): (Vec<String>, Vec<String>) = (0..pairs).map(|_| ood_pair(&mut rng)).unzip();
    let fx = Fixture {
        source: dir.path().join("ood.en"),
        target: dir.path().join("ood.fr"),
        dictionary: dir.path().join("medical.tsv"),
        test_source: dir.path().join("test.en"),
        test_target: dir.path().join("test.fr"),
        dir,
    };
    write_lines(&fx.source, &src);
    write_lines(&fx.target, &tgt);
    let dict: Vec<String> = DICTIONARY[..entries]
        .iter()
        .map(|(s, t)| format!("{s}\t{t}"))
        .collect();
    write_lines(&fx.dictionary, &dict);
    let (ts, tt): (Vec<String>, Vec<String>) = TEST_TERMS
        .iter()
        .map(|term| {
            let fr = DICTIONARY.iter().find(|(s, _)| s == term).unwrap().1;
            (
                format!("the patient developed {term} after the treatment ."),
                format!("le patient a développé {fr} après le traitement ."),
            )
        })
        .unzip();
    write_lines(&fx.test_source, &ts);
    write_lines(&fx.test_target, &tt);
    fx
}

pub fn toy_config(fx: &Fixture, out: &Path) -> PipelineConfig {
    let q = |p: &Path| format!("{:?}", p.to_string_lossy());
    PipelineConfig::load(
        None,
        &[
            format!("paths.source={}", q(&fx.source)),
            format!("paths.target={}", q(&fx.target)),
            format!("paths.dictionary={}", q(&fx.dictionary)),
            format!("paths.test_source={}", q(&fx.test_source)),
            format!("paths.test_target={}", q(&fx.test_target)),
            format!("paths.output_dir={}", q(out)),
            "embedding.dim=64".into(),
        ],
    )
    .unwrap()
}

pub fn tokens(line: &str) -> Vec<String> {
    dictaug::corpusio::tokenize(&dictaug::corpusio::normalize(line))
}

/// Every 1..=5-gram of every line, by nested loops.
pub fn naive_ngrams(lines: &[Vec<String>]) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for s in lines {
        for i in 0..s.len() {
            for j in i + 1..=(i + 5).min(s.len()) {
                out.insert(s[i..j].join(" "));
            }
        }
    }
    out
}

pub fn read_tokens(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(tokens)
        .collect()
}

/// Peak resident set size of this process in bytes, where available.
pub fn peak_rss_bytes() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}
