//! n-best span decoding from start/end logits.
//!
//! Candidates are `(i, j)` pairs of context positions with `i <= j` and at
//! most `max_answer_positions` positions long, scored by
//! `start_logits[i] + end_logits[j]`. A candidate is accepted when
//! `p_start + p_end > prob_threshold`; overlapping survivors are resolved
//! greedily in score order.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::{char_len, char_slice};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Position {
    pub index: usize,
    pub char_start: Option<usize>,
    pub char_end: Option<usize>,
    pub is_null: bool,
}

impl Position {
    pub fn null(index: usize) -> Self {
        Position {
            index,
            char_start: None,
            char_end: None,
            is_null: true,
        }
    }

    pub fn span(index: usize, char_start: usize, char_end: usize) -> Self {
        Position {
            index,
            char_start: Some(char_start),
            char_end: Some(char_end),
            is_null: false,
        }
    }

    /// Character range, for positions that map into the context.
    pub fn range(&self) -> Option<(usize, usize)> {
        match (self.is_null, self.char_start, self.char_end) {
            (false, Some(a), Some(b)) => Some((a, b)),
            _ => None,
        }
    }
}

/// Scores for one (question, context) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogitRecord {
    pub qa_id: String,
    pub sentence_id: String,
    pub entity_type: String,
    pub question: String,
    pub context: String,
    pub positions: Vec<Position>,
    pub start_logits: Vec<f64>,
    pub end_logits: Vec<f64>,
}

impl LogitRecord {
    pub fn validate(&self) -> Result<()> {
        let bad = |message: String| Error::InvalidRecord {
            qa_id: self.qa_id.clone(),
            message,
        };
        let n = self.positions.len();
        if self.start_logits.len() != n || self.end_logits.len() != n {
            return Err(bad(format!(
                "{n} positions but {} start and {} end logits",
                self.start_logits.len(),
                self.end_logits.len()
            )));
        }
        if let Some(x) = self
            .start_logits
            .iter()
            .chain(&self.end_logits)
            .find(|x| !x.is_finite())
        {
            return Err(bad(format!("non-finite logit {x}")));
        }
        let nulls = self.positions.iter().filter(|p| p.is_null).count();
        if nulls != 1 {
            return Err(bad(format!("expected exactly one null slot, found {nulls}")));
        }
        let context_len = char_len(&self.context);
        let mut last_start = 0;
        for (k, p) in self.positions.iter().enumerate() {
            if p.index != k {
                return Err(bad(format!("position {k} has index {}", p.index)));
            }
            match (p.is_null, p.char_start, p.char_end) {
                (true, None, None) | (false, None, None) => {}
                (true, _, _) => return Err(bad("null slot must not carry offsets".into())),
                (false, Some(a), Some(b)) => {
                    if !(a < b && b <= context_len) {
                        return Err(bad(format!("position {k} offsets {a}..{b} outside context")));
                    }
                    if a < last_start {
                        return Err(bad(format!("position {k} offsets are not non-decreasing")));
                    }
                    last_start = a;
                }
                (false, _, _) => return Err(bad(format!("position {k} has only one offset"))),
            }
        }
        Ok(())
    }

    pub fn null_index(&self) -> Option<usize> {
        self.positions.iter().position(|p| p.is_null)
    }
}

/// How per-position start/end probabilities are derived from logits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Each position is contrasted with the null slot:
    /// `p(i) = softmax([logit_i, logit_null])[0]`. Several disjoint spans
    /// can clear a 100% threshold at once.
    #[default]
    NullContrast,
    /// Softmax over every position, null included. The probabilities of two
    /// disjoint spans sum to at most 2, so at most one of them can exceed a
    /// threshold of 1.0.
    FullSoftmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecodeConfig {
    pub n_best: usize,
    pub max_answer_positions: usize,
    pub prob_threshold: f64,
    pub normalization: Normalization,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            n_best: 20,
            max_answer_positions: 30,
            prob_threshold: 1.0,
            normalization: Normalization::NullContrast,
        }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_best < 1 {
            return Err(Error::DecodeConfig("n_best must be at least 1".into()));
        }
        if self.max_answer_positions < 1 {
            return Err(Error::DecodeConfig("max_answer_positions must be at least 1".into()));
        }
        if !(0.0..=2.0).contains(&self.prob_threshold) {
            return Err(Error::DecodeConfig(format!(
                "prob_threshold {} outside [0, 2]",
                self.prob_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodedSpan {
    pub entity_type: String,
    pub char_start: usize,
    pub char_end: usize,
    pub surface: String,
    /// `start_logit + end_logit`.
    pub score: f64,
    pub p_start: f64,
    pub p_end: f64,
    /// Record positions the span starts and ends at.
    pub start_index: usize,
    pub end_index: usize,
}

impl DecodedSpan {
    pub fn overlaps(&self, other: &DecodedSpan) -> bool {
        self.char_start < other.char_end && other.char_start < self.char_end
    }
}

/// Numerically stable softmax (max-subtracted).
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::Numeric("softmax of an empty vector".into()));
    }
    if let Some(x) = logits.iter().find(|x| !x.is_finite()) {
        return Err(Error::Numeric(format!("softmax input {x} is not finite")));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn probabilities(logits: &[f64], null: usize, norm: Normalization) -> Result<Vec<f64>> {
    match norm {
        Normalization::FullSoftmax => softmax(logits),
        Normalization::NullContrast => Ok(logits.iter().map(|x| logistic(x - logits[null])).collect()),
    }
}

/// Ranking used for n-best lists: score descending, then earlier
/// `char_start`, then shorter span, then position indices.
pub fn candidate_order(a: &DecodedSpan, b: &DecodedSpan) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.char_start.cmp(&b.char_start))
        .then(a.char_end.cmp(&b.char_end))
        .then(a.start_index.cmp(&b.start_index))
        .then(a.end_index.cmp(&b.end_index))
}

pub fn nbest_spans(record: &LogitRecord, cfg: &DecodeConfig) -> Result<Vec<DecodedSpan>> {
    record.validate()?;
    cfg.validate()?;
    let null = record.null_index().expect("validated record has a null slot");
    let p_start = probabilities(&record.start_logits, null, cfg.normalization)?;
    let p_end = probabilities(&record.end_logits, null, cfg.normalization)?;
    let mapped: Vec<(usize, (usize, usize))> = record
        .positions
        .iter()
        .filter_map(|p| p.range().map(|r| (p.index, r)))
        .collect();

    // Rank plain tuples first; surfaces are only built for the survivors.
    // Tuple order matches `candidate_order`.
    let mut pairs: Vec<(f64, usize, usize, usize, usize)> = Vec::new();
    for (a, &(i, (cs, _))) in mapped.iter().enumerate() {
        for &(j, (_, ce)) in &mapped[a..] {
            if j - i + 1 > cfg.max_answer_positions {
                break;
            }
            pairs.push((record.start_logits[i] + record.end_logits[j], cs, ce, i, j));
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2, a.3, a.4).cmp(&(b.1, b.2, b.3, b.4))));
    pairs.truncate(cfg.n_best);
    Ok(pairs
        .into_iter()
        .map(|(score, cs, ce, i, j)| DecodedSpan {
            entity_type: record.entity_type.clone(),
            char_start: cs,
            char_end: ce,
            surface: char_slice(&record.context, cs, ce)
                .expect("validated offsets lie inside the context")
                .to_string(),
            score,
            p_start: p_start[i],
            p_end: p_end[j],
            start_index: i,
            end_index: j,
        })
        .collect())
}

/// Threshold filter followed by greedy overlap removal. Input must be in
/// [`candidate_order`]; output is sorted by `char_start`.
pub fn accept_answers(candidates: &[DecodedSpan], cfg: &DecodeConfig) -> Vec<DecodedSpan> {
    let mut kept: Vec<DecodedSpan> = Vec::new();
    for c in candidates {
        if c.p_start + c.p_end <= cfg.prob_threshold {
            continue;
        }
        if kept.iter().any(|k| k.overlaps(c)) {
            continue;
        }
        kept.push(c.clone());
    }
    kept.sort_by(|a, b| a.char_start.cmp(&b.char_start).then(a.char_end.cmp(&b.char_end)));
    kept
}

pub fn decode_record(record: &LogitRecord, cfg: &DecodeConfig) -> Result<Vec<DecodedSpan>> {
    Ok(accept_answers(&nbest_spans(record, cfg)?, cfg))
}
