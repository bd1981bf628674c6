//! SQuAD 2.0 JSON reader and writer.
//!
//! Output is compact, keys in the canonical order, one paragraph per
//! sentence, LF-terminated. Equal inputs produce equal bytes.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::convert::{parse_qa_id, Answer, QaInstance};
use crate::error::{Error, Result};

pub const SQUAD_VERSION: &str = "v2.0";

#[derive(Debug, Serialize, Deserialize)]
struct SquadFile {
    version: String,
    data: Vec<SquadArticle>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SquadArticle {
    title: String,
    paragraphs: Vec<SquadParagraph>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SquadParagraph {
    context: String,
    qas: Vec<SquadQa>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SquadQa {
    id: String,
    question: String,
    is_impossible: bool,
    answers: Vec<SquadAnswer>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SquadAnswer {
    text: String,
    answer_start: usize,
}

pub fn emit_squad2(instances: &[QaInstance], title: &str) -> Vec<u8> {
    let mut paragraphs: IndexMap<&str, SquadParagraph> = IndexMap::new();
    for inst in instances {
        let para = paragraphs
            .entry(inst.sentence_id.as_str())
            .or_insert_with(|| SquadParagraph {
                context: inst.context.clone(),
                qas: Vec::new(),
            });
        para.qas.push(SquadQa {
            id: inst.qa_id.clone(),
            question: inst.question.clone(),
            is_impossible: inst.is_impossible,
            answers: inst
                .answers
                .iter()
                .map(|a| SquadAnswer {
                    text: a.text.clone(),
                    answer_start: a.answer_start,
                })
                .collect(),
        });
    }
    let file = SquadFile {
        version: SQUAD_VERSION.to_string(),
        data: vec![SquadArticle {
            title: title.to_string(),
            paragraphs: paragraphs.into_values().collect(),
        }],
    };
    let mut bytes = serde_json::to_vec(&file).expect("SQuAD structures serialize");
    bytes.push(b'\n');
    bytes
}

/// Reads SQuAD 2.0 data written by [`emit_squad2`]. Every qa id must follow
/// the `sentence::type::index` scheme and every answer must occur in its
/// context at the stated offset.
pub fn parse_squad2(bytes: &[u8]) -> Result<Vec<QaInstance>> {
    let file: SquadFile = serde_json::from_slice(bytes)?;
    if file.version != SQUAD_VERSION {
        return Err(Error::Squad(format!("unsupported version {:?}", file.version)));
    }
    let mut out = Vec::new();
    for para in file.data.into_iter().flat_map(|a| a.paragraphs) {
        for qa in para.qas {
            let (sentence_id, entity_type, _) = parse_qa_id(&qa.id)
                .ok_or_else(|| Error::Squad(format!("qa id {:?} is not sentence::type::index", qa.id)))?;
            let inst = QaInstance {
                sentence_id: sentence_id.to_string(),
                entity_type: entity_type.to_string(),
                qa_id: qa.id.clone(),
                question: qa.question,
                context: para.context.clone(),
                is_impossible: qa.is_impossible,
                answers: qa
                    .answers
                    .into_iter()
                    .map(|a| Answer {
                        text: a.text,
                        answer_start: a.answer_start,
                    })
                    .collect(),
            };
            inst.validate()?;
            out.push(inst);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file() {
        let bytes = emit_squad2(&[], "conll03");
        assert_eq!(
            String::from_utf8(bytes).unwrap(),
            "{\"version\":\"v2.0\",\"data\":[{\"title\":\"conll03\",\"paragraphs\":[]}]}\n"
        );
        assert!(parse_squad2(&emit_squad2(&[], "t")).unwrap().is_empty());
    }

    #[test]
    fn negative_instance_shape() {
        let inst = QaInstance {
            qa_id: "s0::LOC::0".into(),
            sentence_id: "s0".into(),
            entity_type: "LOC".into(),
            question: "What is the loc?".into(),
            context: "hello world".into(),
            is_impossible: true,
            answers: vec![],
        };
        let json = String::from_utf8(emit_squad2(std::slice::from_ref(&inst), "t")).unwrap();
        assert!(json.contains(
            "{\"id\":\"s0::LOC::0\",\"question\":\"What is the loc?\",\"is_impossible\":true,\"answers\":[]}"
        ));
        assert_eq!(parse_squad2(json.as_bytes()).unwrap(), vec![inst]);
    }

    #[test]
    fn rejects_misplaced_answer() {
        let json = r#"{"version":"v2.0","data":[{"title":"t","paragraphs":[{"context":"a b","qas":[{"id":"s0::X::0","question":"q?","is_impossible":false,"answers":[{"text":"b","answer_start":0}]}]}]}]}"#;
        assert!(matches!(parse_squad2(json.as_bytes()), Err(Error::Squad(_))));
        let json = json.replace("\"answer_start\":0", "\"answer_start\":2");
        assert_eq!(parse_squad2(json.as_bytes()).unwrap().len(), 1);
    }

    #[test]
    fn rejects_bad_ids_and_versions() {
        let json = r#"{"version":"v2.0","data":[{"title":"t","paragraphs":[{"context":"a","qas":[{"id":"plain","question":"q?","is_impossible":true,"answers":[]}]}]}]}"#;
        assert!(parse_squad2(json.as_bytes()).is_err());
        let json = r#"{"version":"1.1","data":[]}"#;
        assert!(parse_squad2(json.as_bytes()).is_err());
    }
}
