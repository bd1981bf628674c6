//! How logits enter the pipeline: a JSON Lines file format, an HTTP scoring
//! client and a deterministic oracle that emits logits for the gold answers.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::convert::QaInstance;
use crate::decode::LogitRecord;
use crate::error::{Error, Result};

#[cfg(feature = "http")]
pub mod http;
pub mod logits_file;
pub mod oracle;

pub use logits_file::{read_logit_records, write_logit_records, LogitReader};
pub use oracle::{oracle_score, OracleScorer, OracleSpec};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoringRequest {
    pub qa_id: String,
    pub sentence_id: String,
    pub entity_type: String,
    pub question: String,
    pub context: String,
}

/// One request per (sentence, entity type), in instance order. Train-mode
/// repeats collapse onto the pair's first qa id.
pub fn requests_from_instances(instances: &[QaInstance]) -> Vec<ScoringRequest> {
    let mut seen = HashSet::new();
    instances
        .iter()
        .filter(|i| seen.insert((i.sentence_id.as_str(), i.entity_type.as_str())))
        .map(|i| ScoringRequest {
            qa_id: i.qa_id.clone(),
            sentence_id: i.sentence_id.clone(),
            entity_type: i.entity_type.clone(),
            question: i.question.clone(),
            context: i.context.clone(),
        })
        .collect()
}

/// Anything that turns scoring requests into logit records, one per request
/// and in request order.
pub trait Scorer {
    fn score(&self, batch: &[ScoringRequest]) -> Result<Vec<LogitRecord>>;
}

/// Serves records loaded from a logits file, looked up by qa id.
#[derive(Debug, Clone, Default)]
pub struct FileScorer {
    records: HashMap<String, LogitRecord>,
}

impl FileScorer {
    pub fn new(records: Vec<LogitRecord>) -> Result<Self> {
        let mut map = HashMap::with_capacity(records.len());
        for r in records {
            if let Some(prev) = map.insert(r.qa_id.clone(), r) {
                return Err(Error::Protocol(format!("duplicate qa_id {} in logits file", prev.qa_id)));
            }
        }
        Ok(FileScorer { records: map })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

impl Scorer for FileScorer {
    fn score(&self, batch: &[ScoringRequest]) -> Result<Vec<LogitRecord>> {
        batch
            .iter()
            .map(|req| {
                self.records
                    .get(&req.qa_id)
                    .cloned()
                    .ok_or_else(|| Error::Protocol(format!("logits file has no record for {}", req.qa_id)))
            })
            .collect()
    }
}

/// Reorders `records` to match `batch` by qa id. Missing, extra or
/// duplicated ids are protocol errors.
pub fn join_by_qa_id(batch: &[ScoringRequest], records: Vec<LogitRecord>) -> Result<Vec<LogitRecord>> {
    if records.len() != batch.len() {
        return Err(Error::Protocol(format!(
            "expected {} records, received {}",
            batch.len(),
            records.len()
        )));
    }
    let mut by_id: HashMap<String, LogitRecord> = HashMap::with_capacity(records.len());
    for r in records {
        let id = r.qa_id.clone();
        if by_id.insert(id.clone(), r).is_some() {
            return Err(Error::Protocol(format!("qa_id {id} returned twice")));
        }
    }
    batch
        .iter()
        .map(|req| {
            by_id
                .remove(&req.qa_id)
                .ok_or_else(|| Error::Protocol(format!("no record returned for qa_id {}", req.qa_id)))
        })
        .collect()
}
