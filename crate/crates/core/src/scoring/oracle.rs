//! Deterministic oracle scorer.
//!
//! Positions are the null slot followed by one position per whitespace word
//! of the context. Gold ranges get `peak_logit` on the start axis at their
//! first word and on the end axis at their last word; with no gold the null
//! slot peaks instead. Under the default [`DecodeConfig`] the resulting
//! records decode back to exactly the gold ranges, provided no entity type
//! mentions more than five times in a sentence (the `k(k+1)/2` peak-to-peak
//! candidates must fit into `n_best = 20`).
//!
//! [`DecodeConfig`]: crate::decode::DecodeConfig

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{Scorer, ScoringRequest};
use crate::convert::QaInstance;
use crate::decode::{LogitRecord, Position};
use crate::error::{Error, Result};
use crate::text::words_with_offsets;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSpec {
    pub gold: HashMap<String, Vec<(usize, usize)>>,
    pub peak_logit: f64,
    pub base_logit: f64,
    pub null_logit_when_empty: f64,
}

impl Default for OracleSpec {
    fn default() -> Self {
        OracleSpec {
            gold: HashMap::new(),
            peak_logit: 10.0,
            base_logit: 0.0,
            null_logit_when_empty: 10.0,
        }
    }
}

impl OracleSpec {
    /// Gold answers keyed by the first qa id of each (sentence, type) pair,
    /// which is the id [`super::requests_from_instances`] uses.
    pub fn from_instances(instances: &[QaInstance]) -> Self {
        let mut first_id: HashMap<(&str, &str), String> = HashMap::new();
        let mut gold: HashMap<String, Vec<(usize, usize)>> = HashMap::new();
        for inst in instances {
            let id = first_id
                .entry((inst.sentence_id.as_str(), inst.entity_type.as_str()))
                .or_insert_with(|| inst.qa_id.clone());
            let ranges = gold.entry(id.clone()).or_default();
            ranges.extend(inst.answer_ranges());
            ranges.sort_unstable();
            ranges.dedup();
        }
        OracleSpec {
            gold,
            ..Default::default()
        }
    }
}

pub fn oracle_score(request: &ScoringRequest, spec: &OracleSpec) -> Result<LogitRecord> {
    if spec.peak_logit.partial_cmp(&spec.base_logit) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::Oracle("peak_logit must exceed base_logit".into()));
    }
    let gold = spec
        .gold
        .get(&request.qa_id)
        .ok_or_else(|| Error::Oracle(format!("no gold entry for {}", request.qa_id)))?;
    let words = words_with_offsets(&request.context);
    let n = words.len() + 1;
    let mut positions = Vec::with_capacity(n);
    positions.push(Position::null(0));
    positions.extend(
        words
            .iter()
            .enumerate()
            .map(|(k, &(a, b))| Position::span(k + 1, a, b)),
    );
    let mut start_logits = vec![spec.base_logit; n];
    let mut end_logits = vec![spec.base_logit; n];
    if gold.is_empty() {
        start_logits[0] = spec.null_logit_when_empty;
        end_logits[0] = spec.null_logit_when_empty;
    }
    for &(cs, ce) in gold {
        let first = words.iter().position(|&(a, _)| a == cs);
        let last = words.iter().position(|&(_, b)| b == ce);
        match (first, last) {
            (Some(f), Some(l)) if f <= l => {
                start_logits[f + 1] = spec.peak_logit;
                end_logits[l + 1] = spec.peak_logit;
            }
            _ => {
                return Err(Error::Oracle(format!(
                    "gold range {cs}..{ce} of {} is not word-aligned",
                    request.qa_id
                )))
            }
        }
    }
    Ok(LogitRecord {
        qa_id: request.qa_id.clone(),
        sentence_id: request.sentence_id.clone(),
        entity_type: request.entity_type.clone(),
        question: request.question.clone(),
        context: request.context.clone(),
        positions,
        start_logits,
        end_logits,
    })
}

#[derive(Debug, Clone, Default)]
pub struct OracleScorer {
    pub spec: OracleSpec,
}

impl OracleScorer {
    pub fn new(spec: OracleSpec) -> Self {
        OracleScorer { spec }
    }
}

impl Scorer for OracleScorer {
    fn score(&self, batch: &[ScoringRequest]) -> Result<Vec<LogitRecord>> {
        batch.iter().map(|r| oracle_score(r, &self.spec)).collect()
    }
}
