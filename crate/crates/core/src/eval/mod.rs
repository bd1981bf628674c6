//! Exact-match entity evaluation, few-shot sampling and dev-set carving.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::corpus::{spans_from_tags, NerDataset, Tag};
use crate::error::{Error, Result};

mod dev;
mod sample;

pub use dev::{carve_dev, DevRegime};
pub use sample::{make_splits, manifest, sample_few_shot, SampleSpec, N_SPLITS};

/// Predicted labels keyed by sentence id.
pub type Predictions = BTreeMap<String, Vec<Tag>>;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TypeScore {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl TypeScore {
    fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let (precision, recall, f1) = prf(tp, fp, fn_);
        TypeScore {
            tp,
            fp,
            fn_,
            precision,
            recall,
            f1,
        }
    }
}

/// Precision, recall and F1; each is 0 when its denominator is 0.
pub fn prf(tp: usize, fp: usize, fn_: usize) -> (f64, f64, f64) {
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let p = ratio(tp, tp + fp);
    let r = ratio(tp, tp + fn_);
    let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub micro_precision: f64,
    pub micro_recall: f64,
    pub micro_f1: f64,
    pub per_type: IndexMap<String, TypeScore>,
    pub n_sentences: usize,
}

impl EvalReport {
    pub fn totals(&self) -> (usize, usize, usize) {
        self.per_type
            .values()
            .fold((0, 0, 0), |(a, b, c), s| (a + s.tp, b + s.fp, c + s.fn_))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Aligned plain-text table, one row per type plus a micro row.
    pub fn to_table(&self) -> String {
        let width = self
            .per_type
            .keys()
            .map(|k| k.chars().count())
            .chain([5])
            .max()
            .unwrap_or(5);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<width$}  {:>6}  {:>6}  {:>6}  {:>9}  {:>6}  {:>6}",
            "type", "tp", "fp", "fn", "precision", "recall", "f1"
        );
        let mut row = |name: &str, s: &TypeScore| {
            let _ = writeln!(
                out,
                "{:<width$}  {:>6}  {:>6}  {:>6}  {:>9.4}  {:>6.4}  {:>6.4}",
                name, s.tp, s.fp, s.fn_, s.precision, s.recall, s.f1
            );
        };
        for (name, s) in &self.per_type {
            row(name, s);
        }
        let (tp, fp, fn_) = self.totals();
        row("micro", &TypeScore::from_counts(tp, fp, fn_));
        out
    }
}

/// Exact span-and-type matching, micro-averaged. Sentences missing from
/// `predicted` count as all-`O`.
pub fn evaluate(gold: &NerDataset, predicted: &Predictions) -> Result<EvalReport> {
    let known: HashSet<&str> = gold.sentences.iter().map(|s| s.id()).collect();
    if let Some(unknown) = predicted.keys().find(|k| !known.contains(k.as_str())) {
        return Err(Error::Eval(format!("prediction for unknown sentence {unknown}")));
    }
    let mut counts: IndexMap<String, (usize, usize, usize)> =
        gold.entity_types.iter().map(|t| (t.clone(), (0, 0, 0))).collect();
    for sentence in &gold.sentences {
        let gold_spans: HashSet<(String, usize, usize)> =
            spans_from_tags(sentence.labels()).into_iter().collect();
        let pred_spans: HashSet<(String, usize, usize)> = match predicted.get(sentence.id()) {
            Some(labels) => {
                if labels.len() != sentence.len() {
                    return Err(Error::Eval(format!(
                        "sentence {} has {} tokens but {} predicted labels",
                        sentence.id(),
                        sentence.len(),
                        labels.len()
                    )));
                }
                spans_from_tags(labels).into_iter().collect()
            }
            None => HashSet::new(),
        };
        for span in &pred_spans {
            let c = counts.entry(span.0.clone()).or_default();
            if gold_spans.contains(span) {
                c.0 += 1;
            } else {
                c.1 += 1;
            }
        }
        for span in gold_spans.difference(&pred_spans) {
            counts.entry(span.0.clone()).or_default().2 += 1;
        }
    }
    let per_type: IndexMap<String, TypeScore> = counts
        .into_iter()
        .map(|(t, (tp, fp, fn_))| (t, TypeScore::from_counts(tp, fp, fn_)))
        .collect();
    let (tp, fp, fn_) = per_type
        .values()
        .fold((0, 0, 0), |(a, b, c), s| (a + s.tp, b + s.fp, c + s.fn_));
    let (micro_precision, micro_recall, micro_f1) = prf(tp, fp, fn_);
    Ok(EvalReport {
        micro_precision,
        micro_recall,
        micro_f1,
        per_type,
        n_sentences: gold.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Sample standard deviation; 0 for fewer than two values.
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return MeanStd { mean: 0.0, std: 0.0 };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        MeanStd { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub n_reports: usize,
    pub micro_precision: MeanStd,
    pub micro_recall: MeanStd,
    pub micro_f1: MeanStd,
}

pub fn aggregate_reports(reports: &[EvalReport]) -> AggregateReport {
    let col = |f: fn(&EvalReport) -> f64| MeanStd::of(&reports.iter().map(f).collect::<Vec<_>>());
    AggregateReport {
        n_reports: reports.len(),
        micro_precision: col(|r| r.micro_precision),
        micro_recall: col(|r| r.micro_recall),
        micro_f1: col(|r| r.micro_f1),
    }
}

#[derive(Serialize, Deserialize)]
struct PredictionLine {
    sentence_id: String,
    labels: Vec<Tag>,
}

/// Predictions as JSON Lines: `{"sentence_id": ..., "labels": [...]}`.
pub fn write_predictions<W: Write>(mut w: W, predictions: &Predictions) -> Result<()> {
    for (id, labels) in predictions {
        let line = PredictionLine {
            sentence_id: id.clone(),
            labels: labels.clone(),
        };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n").map_err(|e| Error::io("<predictions>", e))?;
    }
    Ok(())
}

pub fn read_predictions<R: BufRead>(r: R) -> Result<Predictions> {
    let mut out = Predictions::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<predictions>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let p: PredictionLine = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if out.insert(p.sentence_id.clone(), p.labels).is_some() {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("duplicate prediction for {}", p.sentence_id),
            });
        }
    }
    Ok(out)
}
