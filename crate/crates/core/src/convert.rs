//! NER sentences to extractive-QA instances and decoded answers back to BIO.

use std::collections::HashSet;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::corpus::{bio_from_spans, EntitySpan, NerDataset, NerSentence, Tag};
use crate::decode::DecodedSpan;
use crate::error::{Error, Result};
use crate::prompt::PromptSet;
use crate::text::{char_len, char_slice};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConversionMode {
    /// One record per gold mention (repeating examples).
    #[default]
    Train,
    /// One record per (sentence, type) carrying every gold answer.
    Eval,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Answer {
    pub text: String,
    /// Character offset into the context.
    pub answer_start: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaInstance {
    pub qa_id: String,
    pub sentence_id: String,
    pub entity_type: String,
    pub question: String,
    pub context: String,
    pub is_impossible: bool,
    pub answers: Vec<Answer>,
}

pub fn make_qa_id(sentence_id: &str, entity_type: &str, answer_index: usize) -> String {
    format!("{sentence_id}::{entity_type}::{answer_index}")
}

/// Splits a qa id into `(sentence_id, entity_type, answer_index)`.
pub fn parse_qa_id(qa_id: &str) -> Option<(&str, &str, usize)> {
    let mut parts = qa_id.rsplitn(3, "::");
    let index = parts.next()?.parse().ok()?;
    let entity_type = parts.next()?;
    let sentence_id = parts.next()?;
    Some((sentence_id, entity_type, index))
}

impl QaInstance {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Error::Squad(format!("{}: {m}", self.qa_id));
        if self.is_impossible != self.answers.is_empty() {
            return Err(bad("is_impossible disagrees with the answer list".into()));
        }
        for a in &self.answers {
            let end = a.answer_start + char_len(&a.text);
            if char_slice(&self.context, a.answer_start, end) != Some(a.text.as_str()) {
                return Err(bad(format!(
                    "answer {:?} not found at offset {}",
                    a.text, a.answer_start
                )));
            }
        }
        Ok(())
    }

    /// Character ranges of the answers.
    pub fn answer_ranges(&self) -> Vec<(usize, usize)> {
        self.answers
            .iter()
            .map(|a| (a.answer_start, a.answer_start + char_len(&a.text)))
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversionReport {
    pub n_sentences: usize,
    /// Distinct (sentence, entity type) question pairs.
    pub n_questions: usize,
    pub n_positive: usize,
    pub n_negative: usize,
    /// Mentions beyond the first for a (sentence, type) pair.
    pub n_repeats: usize,
    /// Gold mentions per entity type.
    pub per_type_counts: IndexMap<String, usize>,
}

fn answer_for(span: &EntitySpan) -> Answer {
    Answer {
        text: span.surface.clone(),
        answer_start: span.start_char,
    }
}

pub fn convert_sentence(
    sentence: &NerSentence,
    prompts: &PromptSet,
    mode: ConversionMode,
) -> Result<Vec<QaInstance>> {
    let spans = sentence.spans();
    if let Some(missing) = spans.iter().find(|s| prompts.question(&s.entity_type).is_none()) {
        return Err(Error::MissingPrompt(missing.entity_type.clone()));
    }
    let mut out = Vec::new();
    for prompt in &prompts.prompts {
        let instance = |index: usize, answers: Vec<Answer>| QaInstance {
            qa_id: make_qa_id(sentence.id(), &prompt.entity_type, index),
            sentence_id: sentence.id().to_string(),
            entity_type: prompt.entity_type.clone(),
            question: prompt.question.clone(),
            context: sentence.text().to_string(),
            is_impossible: answers.is_empty(),
            answers,
        };
        let mentions: Vec<&EntitySpan> = spans
            .iter()
            .filter(|s| s.entity_type == prompt.entity_type)
            .collect();
        if mentions.is_empty() {
            out.push(instance(0, Vec::new()));
            continue;
        }
        match mode {
            ConversionMode::Train => {
                for (i, m) in mentions.iter().enumerate() {
                    out.push(instance(i, vec![answer_for(m)]));
                }
            }
            ConversionMode::Eval => {
                out.push(instance(0, mentions.iter().map(|m| answer_for(m)).collect()));
            }
        }
    }
    Ok(out)
}

pub fn convert_dataset(
    dataset: &NerDataset,
    prompts: &PromptSet,
    mode: ConversionMode,
) -> Result<(Vec<QaInstance>, ConversionReport)> {
    let mut report = ConversionReport {
        n_sentences: dataset.len(),
        per_type_counts: prompts.entity_types().map(|t| (t.to_string(), 0)).collect(),
        ..Default::default()
    };
    let mut instances = Vec::new();
    for sentence in &dataset.sentences {
        let converted = convert_sentence(sentence, prompts, mode)?;
        let mut pairs = HashSet::new();
        for inst in &converted {
            pairs.insert(inst.entity_type.as_str());
            if inst.is_impossible {
                report.n_negative += 1;
            } else {
                report.n_positive += 1;
            }
            // In eval mode one instance carries every mention.
            let mentions = match mode {
                ConversionMode::Train => usize::from(!inst.is_impossible),
                ConversionMode::Eval => inst.answers.len(),
            };
            *report.per_type_counts.entry(inst.entity_type.clone()).or_insert(0) += mentions;
        }
        for (_, n) in sentence.mention_counts() {
            report.n_repeats += n - 1;
        }
        report.n_questions += pairs.len();
        instances.extend(converted);
    }
    Ok((instances, report))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NerPrediction {
    pub labels: Vec<Tag>,
    /// Decoded spans that intersected no token.
    pub dropped: usize,
    /// Spans removed by cross-span overlap resolution.
    pub overlaps_removed: usize,
}

/// Snaps a character range to the tokens it intersects.
pub fn snap_to_tokens(sentence: &NerSentence, char_start: usize, char_end: usize) -> Option<(usize, usize)> {
    let mut hits = sentence
        .token_char_offsets()
        .iter()
        .enumerate()
        .filter(|(_, &(a, b))| a < char_end && char_start < b)
        .map(|(i, _)| i);
    let first = hits.next()?;
    let last = hits.next_back().unwrap_or(first);
    Some((first, last))
}

/// Maps decoded spans (possibly from several entity types) to one legal BIO
/// sequence. Overlaps are resolved by descending score, then earlier start,
/// then entity type name.
pub fn spans_to_ner_prediction(sentence: &NerSentence, decoded: &[DecodedSpan]) -> NerPrediction {
    struct Snapped<'a> {
        span: &'a DecodedSpan,
        start: usize,
        end: usize,
    }
    let mut dropped = 0;
    let mut snapped: Vec<Snapped> = Vec::with_capacity(decoded.len());
    for d in decoded {
        match snap_to_tokens(sentence, d.char_start, d.char_end) {
            Some((start, end)) => snapped.push(Snapped { span: d, start, end }),
            None => dropped += 1,
        }
    }
    snapped.sort_by(|a, b| {
        b.span
            .score
            .total_cmp(&a.span.score)
            .then(a.start.cmp(&b.start))
            .then_with(|| a.span.entity_type.cmp(&b.span.entity_type))
            .then(a.end.cmp(&b.end))
    });
    let mut kept: Vec<EntitySpan> = Vec::new();
    let mut overlaps_removed = 0;
    for s in snapped {
        if kept.iter().any(|k| s.start <= k.end_token && k.start_token <= s.end) {
            overlaps_removed += 1;
            continue;
        }
        kept.extend(sentence.span(&s.span.entity_type, s.start, s.end));
    }
    let labels = bio_from_spans(sentence.len(), &kept).expect("kept spans are disjoint and in range");
    NerPrediction {
        labels,
        dropped,
        overlaps_removed,
    }
}
