mod common;

use std::collections::BTreeSet;

use common::*;
use dictaug::corpusio::{load_bitext, load_dictionary};
use dictaug::pipeline::{mix_bitexts, run_coverage, run_dedup, run_generate, run_mix, RunManifest};
use dictaug::substitute::Provenance;

fn lines(path: &std::path::Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(str::to_string)
        .collect()
}

#[test]
fn three_entries_over_ten_pairs() {
    let fx = toy_domain(10, 3);
    let out = fx.path().join("out");
    let config = toy_config(&fx, &out);
    let outcome = run_generate(&config, None).unwrap();
    let stats = outcome.summary.stats;
    assert_eq!(stats.attempted, 15);
    assert!(stats.is_balanced());
    assert!(stats.generated >= 3, "{stats:?}");

    let src = lines(&outcome.corpus.source);
    let tgt = lines(&outcome.corpus.target);
    let prov: Vec<Provenance> = lines(&outcome.provenance)
        .iter()
        .map(|l| Provenance::from_json_line(l).unwrap())
        .collect();
    assert_eq!(src.len() as u64, stats.generated);
    assert_eq!(tgt.len(), src.len());
    assert_eq!(prov.len(), src.len());
    for ((s, t), p) in src.iter().zip(&tgt).zip(&prov) {
        let s = s.to_lowercase();
        assert!(
            s.contains(&p.dictionary_src.to_lowercase()),
            "{s} / {}",
            p.dictionary_src
        );
        assert!(
            t.to_lowercase().contains(&p.dictionary_tgt.to_lowercase()),
            "{t} / {}",
            p.dictionary_tgt
        );
    }
    let read = RunManifest::read(&outcome.manifest_path).unwrap();
    assert_eq!(read.stats, Some(stats));
}

#[test]
fn empty_dictionary_attempts_nothing() {
    let fx = toy_domain(10, 0);
    let out = fx.path().join("out");
    let outcome = run_generate(&toy_config(&fx, &out), None).unwrap();
    assert_eq!(outcome.summary.stats.attempted, 0);
    assert_eq!(outcome.summary.stats.generated, 0);
    assert!(lines(&outcome.corpus.source).is_empty());
}

#[test]
fn mixing_keeps_every_pair() {
    let fx = toy_domain(10, 0);
    let ood = load_bitext(&fx.source, &fx.target).unwrap();
    let mut extra = ood.clone();
    extra.pairs.truncate(5);
    let plain = mix_bitexts(&ood, &extra, None).unwrap();
    assert_eq!(plain.len(), 15);
    let a = mix_bitexts(&ood, &extra, Some(7)).unwrap();
    let b = mix_bitexts(&ood, &extra, Some(7)).unwrap();
    assert_eq!(a.len(), 15);
    assert_eq!(a.pairs, b.pairs);
    let multiset = |b: &dictaug::corpusio::Bitext| {
        let mut v: Vec<_> = b
            .pairs
            .iter()
            .map(|p| (p.raw_source.clone(), p.raw_target.clone()))
            .collect();
        v.sort();
        v
    };
    assert_eq!(multiset(&a), multiset(&plain));
}

#[test]
fn mix_command_writes_both_sides() {
    let fx = toy_domain(20, 4);
    let out = fx.path().join("out");
    let config = toy_config(&fx, &out);
    let gen = run_generate(&config, None).unwrap();
    let m = run_mix(&config, None).unwrap();
    assert_eq!(m.counts["mixed_pairs"], 20 + gen.summary.stats.generated);
    let mixed = lines(&m.outputs["source"]);
    assert_eq!(mixed.len() as u64, m.counts["mixed_pairs"]);
}

#[test]
fn corpus_against_itself_gains_nothing() {
    let fx = toy_domain(30, 20);
    let out = fx.path().join("out");
    let mut config = toy_config(&fx, &out);
    config.coverage.compare = vec![fx.test_source.clone()];
    let outcome = run_coverage(&config, Some(&fx.source), &[], None).unwrap();
    // train, the same file as "generated", then the test set itself
    assert_eq!(outcome.reports.len(), 3);
    assert_eq!(outcome.gains[0].gain, 0);
    assert_eq!(outcome.reports[0].ed_value, 0);
    assert_eq!(outcome.reports[2].ed_value, TEST_TERMS.len());
    assert_eq!(outcome.gains[1].gain, TEST_TERMS.len());
    assert!(out.join("coverage/gains.json").exists());
}

#[test]
fn disjoint_corpora_share_no_terms() {
    let fx = toy_domain(30, 20);
    let a = fx.path().join("a.en");
    let b = fx.path().join("b.en");
    write_lines(&a, &["the patient had mucositis .".to_string()]);
    write_lines(&b, &["the patient had dry mouth .".to_string()]);
    let out = fx.path().join("out");
    let config = toy_config(&fx, &out);
    let outcome = run_coverage(&config, Some(&a), &[b], None).unwrap();
    let diff = outcome
        .diffs
        .iter()
        .find(|d| d.a == "a.en" && d.b == "b.en")
        .expect("pairwise diff");
    assert!(diff.intersection.terms.is_empty());
    assert_eq!(
        diff.a_minus_b.terms,
        BTreeSet::from(["mucositis".to_string()])
    );
    assert_eq!(
        diff.b_minus_a.terms,
        BTreeSet::from(["dry mouth".to_string()])
    );
}

#[test]
fn second_run_uses_the_cache() {
    let fx = toy_domain(40, 5);
    let out = fx.path().join("out");
    let config = toy_config(&fx, &out);
    let first = run_generate(&config, None).unwrap();
    assert!(first.manifest.cache.values().all(|v| v == "built"));
    let bytes = std::fs::read(&first.corpus.target).unwrap();
    let second = run_generate(&config, None).unwrap();
    assert_eq!(second.manifest.cache.len(), 2);
    assert!(
        second.manifest.cache.values().all(|v| v == "hit"),
        "{:?}",
        second.manifest.cache
    );
    assert_eq!(std::fs::read(&second.corpus.target).unwrap(), bytes);
}

#[test]
fn worker_count_does_not_change_output() {
    let fx = toy_domain(60, 8);
    let read_all = |workers: usize| {
        let out = fx.path().join(format!("out{workers}"));
        let mut config = toy_config(&fx, &out);
        config.generate.workers = workers;
        config.generate.batch_size = 3;
        let o = run_generate(&config, None).unwrap();
        (
            std::fs::read(&o.corpus.source).unwrap(),
            std::fs::read(&o.corpus.target).unwrap(),
            std::fs::read(&o.provenance).unwrap(),
            o.summary.stats,
        )
    };
    assert_eq!(read_all(1), read_all(3));
}

#[test]
fn dedup_drops_repeated_pairs() {
    let fx = toy_domain(0, 1);
    write_lines(
        &fx.source,
        &["a b".into(), "a b".into(), "c".into(), "a b".into()],
    );
    write_lines(
        &fx.target,
        &["x".into(), "x".into(), "y".into(), "z".into()],
    );
    let out = fx.path().join("out");
    let m = run_dedup(&toy_config(&fx, &out), None).unwrap();
    assert_eq!(m.counts["kept"], 3);
    assert_eq!(m.counts["removed"], 1);
    assert_eq!(lines(&m.outputs["source"]), vec!["a b", "c", "a b"]);
    assert_eq!(lines(&m.outputs["target"]), vec!["x", "y", "z"]);
}

#[test]
fn fixture_dictionary_loads() {
    let fx = toy_domain(5, 20);
    assert_eq!(load_dictionary(&fx.dictionary).unwrap().len(), 20);
}
