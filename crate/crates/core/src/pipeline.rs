//! End-to-end runs: sample, convert, score, decode, evaluate.

use std::collections::HashMap;
use std::path::PathBuf;

use serde::Serialize;

use crate::config::{Config, ScoringMode};
use crate::convert::{convert_dataset, spans_to_ner_prediction, ConversionMode, ConversionReport, QaInstance};
use crate::corpus::NerDataset;
use crate::decode::{decode_record, DecodeConfig, DecodedSpan, LogitRecord};
use crate::error::{Error, Result};
use crate::eval::{aggregate_reports, carve_dev, evaluate, sample_few_shot, AggregateReport, EvalReport, Predictions, SampleSpec, N_SPLITS};
use crate::prompt::PromptSet;
use crate::scoring::{read_logit_records, requests_from_instances, FileScorer, OracleScorer, OracleSpec, Scorer, ScoringRequest};
use crate::squad::emit_squad2;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct DecodeStats {
    pub records: usize,
    pub spans: usize,
    pub dropped: usize,
    pub overlaps_removed: usize,
}

/// Decodes every record, in parallel over up to `jobs` threads when
/// `jobs > 1` (with `jobs <= 1` no thread is spawned).
pub fn decode_all(records: &[LogitRecord], cfg: &DecodeConfig, jobs: usize) -> Result<Vec<Vec<DecodedSpan>>> {
    cfg.validate()?;
    if records.is_empty() {
        return Ok(Vec::new());
    }
    if jobs <= 1 {
        return records.iter().map(|r| decode_record(r, cfg)).collect();
    }
    let chunk = records.len().div_ceil(jobs);
    let parts: Vec<Result<Vec<Vec<DecodedSpan>>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = records
            .chunks(chunk)
            .map(|part| scope.spawn(move || part.iter().map(|r| decode_record(r, cfg)).collect()))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("decode thread panicked"))
            .collect()
    });
    let mut out = Vec::with_capacity(records.len());
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// Decodes records and maps the spans back to per-sentence BIO labels.
/// Only sentences with at least one record get a prediction.
pub fn predict_from_records(
    dataset: &NerDataset,
    records: &[LogitRecord],
    cfg: &DecodeConfig,
    jobs: usize,
) -> Result<(Predictions, DecodeStats)> {
    let decoded = decode_all(records, cfg, jobs)?;
    let index: HashMap<&str, usize> = dataset
        .sentences
        .iter()
        .enumerate()
        .map(|(i, s)| (s.id(), i))
        .collect();
    let mut per_sentence: HashMap<usize, Vec<DecodedSpan>> = HashMap::new();
    let mut stats = DecodeStats {
        records: records.len(),
        ..Default::default()
    };
    for (record, spans) in records.iter().zip(decoded) {
        let &i = index.get(record.sentence_id.as_str()).ok_or_else(|| {
            Error::Protocol(format!(
                "record {} refers to unknown sentence {}",
                record.qa_id, record.sentence_id
            ))
        })?;
        if record.context != dataset.sentences[i].text() {
            return Err(Error::Protocol(format!(
                "record {} context does not match sentence {}",
                record.qa_id, record.sentence_id
            )));
        }
        stats.spans += spans.len();
        per_sentence.entry(i).or_default().extend(spans);
    }
    let mut predictions = Predictions::new();
    for (i, spans) in per_sentence {
        let sentence = &dataset.sentences[i];
        let p = spans_to_ner_prediction(sentence, &spans);
        stats.dropped += p.dropped;
        stats.overlaps_removed += p.overlaps_removed;
        predictions.insert(sentence.id().to_string(), p.labels);
    }
    Ok((predictions, stats))
}

/// Eval-mode instances and the scoring requests derived from them.
pub fn scoring_requests(dataset: &NerDataset, prompts: &PromptSet) -> Result<(Vec<QaInstance>, Vec<ScoringRequest>)> {
    let (instances, _) = convert_dataset(dataset, prompts, ConversionMode::Eval)?;
    let requests = requests_from_instances(&instances);
    Ok((instances, requests))
}

#[derive(Debug, Clone, Serialize)]
pub struct SplitOutcome {
    pub split_index: usize,
    pub train_ids: Vec<String>,
    pub dev_ids: Vec<String>,
    /// SQuAD 2.0 training file for the sampled split.
    #[serde(skip)]
    pub train_squad: Vec<u8>,
    pub train_conversion: ConversionReport,
    pub eval_set: String,
    pub scoring_requests: usize,
    pub decode: DecodeStats,
    pub report: EvalReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineOutcome {
    pub prompts: PromptSet,
    pub splits: Vec<SplitOutcome>,
    pub aggregate: AggregateReport,
}

fn make_scorer(cfg: &Config, split: usize, instances: &[QaInstance]) -> Result<Box<dyn Scorer>> {
    match cfg.validate_scoring()? {
        ScoringMode::Oracle => Ok(Box::new(OracleScorer::new(OracleSpec::from_instances(instances)))),
        ScoringMode::File => {
            let template = cfg.scoring.logits.as_ref().expect("validated");
            let path = PathBuf::from(template.to_string_lossy().replace("{split}", &split.to_string()));
            let records = read_logit_records(&path)?.collect::<Result<Vec<_>>>()?;
            Ok(Box::new(FileScorer::new(records)?))
        }
        #[cfg(feature = "http")]
        ScoringMode::Http => {
            let endpoint = cfg.scoring_endpoint().expect("validated");
            let timeout = std::time::Duration::from_secs_f64(cfg.scoring.timeout_secs);
            Ok(Box::new(
                crate::scoring::http::HttpScorer::new(endpoint, timeout, cfg.scoring.retries)
                    .with_batching(cfg.scoring.batch_size, 1),
            ))
        }
        #[cfg(not(feature = "http"))]
        ScoringMode::Http => Err(Error::Config("http scoring needs the http feature".into())),
    }
}

/// Runs all five splits. The evaluation set is the test corpus when one is
/// configured, otherwise the sampled split itself.
pub fn run_pipeline(cfg: &Config, jobs: usize) -> Result<PipelineOutcome> {
    cfg.validate()?;
    cfg.validate_scoring()?;
    let train_cfg = cfg
        .train
        .as_ref()
        .ok_or_else(|| Error::Config("pipeline needs a train corpus".into()))?;
    let full = cfg.load_corpus(train_cfg)?;
    let test = cfg.test.as_ref().map(|t| cfg.load_corpus(t)).transpose()?;
    let mut types = full.entity_types.clone();
    if let Some(t) = &test {
        for ty in &t.entity_types {
            if !types.contains(ty) {
                types.push(ty.clone());
            }
        }
    }
    let prompts = cfg.build_prompts(&types)?;
    let (pool, dev) = carve_dev(&full, cfg.dev_regime, cfg.sampling.seed)?;

    let mut splits = Vec::with_capacity(N_SPLITS);
    for split_index in 0..N_SPLITS {
        let sample = sample_few_shot(
            &pool,
            &SampleSpec {
                n_per_type: cfg.sampling.n_per_type,
                seed: cfg.sampling.seed,
                split_index,
            },
        );
        let (train_instances, train_conversion) = convert_dataset(&sample, &prompts, ConversionMode::Train)?;
        let train_squad = emit_squad2(&train_instances, &sample.name);

        let eval_set = test.as_ref().unwrap_or(&sample);
        let (instances, requests) = scoring_requests(eval_set, &prompts)?;
        let scorer = make_scorer(cfg, split_index, &instances)?;
        let records = scorer.score(&requests)?;
        let (predictions, decode) = predict_from_records(eval_set, &records, &cfg.decode, jobs)?;
        let report = evaluate(eval_set, &predictions)?;
        log::info!(
            "split {split_index}: {} train sentences, micro F1 {:.4}",
            sample.len(),
            report.micro_f1
        );
        splits.push(SplitOutcome {
            split_index,
            train_ids: crate::eval::manifest(&sample),
            dev_ids: crate::eval::manifest(&dev),
            train_squad,
            train_conversion,
            eval_set: eval_set.name.clone(),
            scoring_requests: requests.len(),
            decode,
            report,
        });
    }
    let reports: Vec<EvalReport> = splits.iter().map(|s| s.report.clone()).collect();
    Ok(PipelineOutcome {
        prompts,
        splits,
        aggregate: aggregate_reports(&reports),
    })
}
