mod common;

use qaner::config::{Config, CorpusConfig, ScoringMode};
use qaner::corpus::{to_bio, ColumnOrder, Tag};
use qaner::decode::DecodeConfig;
use qaner::eval::{evaluate, DevRegime};
use qaner::pipeline::{predict_from_records, run_pipeline, scoring_requests};
use qaner::prompt::{render_prompts, PromptTemplate};
use qaner::scoring::{read_logit_records, write_logit_records, OracleScorer, OracleSpec, Scorer};
use qaner::Error;

fn write_corpus(dir: &std::path::Path, n: usize) -> std::path::PathBuf {
    let path = dir.join("corpus.txt");
    std::fs::write(&path, to_bio(&common::synthetic_corpus(n, 1), ColumnOrder::TokenFirst)).unwrap();
    path
}

fn oracle_cfg(path: &std::path::Path) -> Config {
    let mut cfg = Config {
        train: Some(CorpusConfig::new(path)),
        ..Default::default()
    };
    cfg.scoring.mode = Some(ScoringMode::Oracle);
    cfg
}

#[test]
fn oracle_pipeline_without_test_corpus_scores_each_sample() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = oracle_cfg(&write_corpus(dir.path(), 60));
    let out = run_pipeline(&cfg, 2).unwrap();
    assert_eq!(out.splits.len(), 5);
    for s in &out.splits {
        assert_eq!(s.report.micro_f1, 1.0);
        assert_eq!(s.report.n_sentences, s.train_ids.len());
        assert_eq!(s.scoring_requests, s.train_ids.len() * 4);
        assert!(s.report.per_type.values().all(|t| t.tp <= 10));
        assert!(!s.train_squad.is_empty());
    }
    assert_eq!(out.aggregate.micro_f1.mean, 1.0);
    assert_eq!(out.aggregate.micro_f1.std, 0.0);
}

#[test]
fn dev_regimes_keep_dev_out_of_training() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = oracle_cfg(&write_corpus(dir.path(), 200));
    for regime in [DevRegime::SmallDev, DevRegime::TenPerType, DevRegime::AllDev] {
        cfg.dev_regime = regime;
        let out = run_pipeline(&cfg, 1).unwrap();
        for s in &out.splits {
            assert!(!s.dev_ids.is_empty(), "{regime:?}");
            assert!(s.train_ids.iter().all(|id| !s.dev_ids.contains(id)), "{regime:?}");
        }
    }
}

#[test]
fn file_scoring_reads_one_file_per_split() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = write_corpus(dir.path(), 30);
    let mut cfg = oracle_cfg(&corpus);
    cfg.test = Some(CorpusConfig::new(&corpus));

    let dataset = cfg.load_corpus(cfg.test.as_ref().unwrap()).unwrap();
    let prompts = cfg.build_prompts(&dataset.entity_types).unwrap();
    let (instances, requests) = scoring_requests(&dataset, &prompts).unwrap();
    let records = OracleScorer::new(OracleSpec::from_instances(&instances)).score(&requests).unwrap();
    for split in 0..5 {
        // Split 3 gets an empty file: every sentence is then unpredicted.
        let slice = if split == 3 { &records[..0] } else { &records[..] };
        write_logit_records(slice, dir.path().join(format!("logits.{split}.jsonl"))).unwrap();
    }
    cfg.scoring.mode = Some(ScoringMode::File);
    cfg.scoring.logits = Some(dir.path().join("logits.{split}.jsonl"));
    let err = run_pipeline(&cfg, 1).unwrap_err();
    assert!(matches!(err, Error::Protocol(_)), "{err}");

    write_logit_records(&records, dir.path().join("logits.3.jsonl")).unwrap();
    let out = run_pipeline(&cfg, 1).unwrap();
    assert!(out.splits.iter().all(|s| s.report.micro_f1 == 1.0));
}

#[test]
fn logits_file_round_trip_preserves_decoding() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = common::synthetic_corpus(20, 4);
    let prompts = render_prompts(&PromptTemplate::parse("The <e>?").unwrap(), &dataset.entity_types, None, None).unwrap();
    let (instances, requests) = scoring_requests(&dataset, &prompts).unwrap();
    let records = OracleScorer::new(OracleSpec::from_instances(&instances)).score(&requests).unwrap();
    let path = dir.path().join("l.jsonl");
    write_logit_records(&records, &path).unwrap();
    let back: Vec<_> = read_logit_records(&path).unwrap().collect::<Result<_, _>>().unwrap();
    assert_eq!(back, records);
    let (preds, stats) = predict_from_records(&dataset, &back, &DecodeConfig::default(), 3).unwrap();
    assert_eq!(stats.records, 80);
    assert_eq!(evaluate(&dataset, &preds).unwrap().micro_f1, 1.0);
}

#[test]
fn unattainable_threshold_predicts_nothing() {
    let dataset = common::synthetic_corpus(10, 2);
    let prompts = render_prompts(&PromptTemplate::parse("What is the [E]?").unwrap(), &dataset.entity_types, None, None).unwrap();
    let (instances, requests) = scoring_requests(&dataset, &prompts).unwrap();
    let records = OracleScorer::new(OracleSpec::from_instances(&instances)).score(&requests).unwrap();
    let cfg = DecodeConfig {
        prob_threshold: 2.0,
        ..Default::default()
    };
    let (preds, stats) = predict_from_records(&dataset, &records, &cfg, 1).unwrap();
    assert_eq!(stats.spans, 0);
    assert!(preds.values().flatten().all(|t| *t == Tag::Outside));
    let report = evaluate(&dataset, &preds).unwrap();
    assert_eq!((report.micro_precision, report.micro_recall, report.micro_f1), (0.0, 0.0, 0.0));
}

#[test]
fn foreign_records_are_rejected() {
    let dataset = common::synthetic_corpus(3, 2);
    let other = common::synthetic_corpus(3, 9);
    let prompts = render_prompts(&PromptTemplate::parse("What is the [E]?").unwrap(), &other.entity_types, None, None).unwrap();
    let (instances, requests) = scoring_requests(&other, &prompts).unwrap();
    let records = OracleScorer::new(OracleSpec::from_instances(&instances)).score(&requests).unwrap();
    let err = predict_from_records(&dataset, &records, &DecodeConfig::default(), 1).unwrap_err();
    assert!(matches!(err, Error::Protocol(_)));
}

#[test]
fn missing_scoring_source_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = oracle_cfg(&write_corpus(dir.path(), 5));
    cfg.scoring.mode = None;
    assert_eq!(run_pipeline(&cfg, 1).unwrap_err().category(), "config");
    cfg.scoring.mode = Some(ScoringMode::File);
    assert_eq!(run_pipeline(&cfg, 1).unwrap_err().category(), "config");
}
