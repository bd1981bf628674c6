#![allow(dead_code)]

use std::path::PathBuf;

use qaner::corpus::{NerDataset, NerSentence, Tag};
use qaner::decode::{LogitRecord, Position};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const TYPES: [&str; 4] = ["PER", "ORG", "LOC", "MISC"];

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn read_fixture(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap()
}

/// Sentence `i` carries `(i + t) % 4` mentions of type `t` (so every type
/// appears with 0, 1, 2 and 3 mentions), each 1 to 3 words long, in shuffled
/// order with filler words that are sometimes omitted so mentions can touch.
pub fn synthetic_corpus(n_sentences: usize, seed: u64) -> NerDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sentences = Vec::with_capacity(n_sentences);
    for i in 0..n_sentences {
        let mut mentions: Vec<&str> = Vec::new();
        for (t, ty) in TYPES.iter().enumerate() {
            for _ in 0..(i + t) % 4 {
                mentions.push(ty);
            }
        }
        for k in (1..mentions.len()).rev() {
            mentions.swap(k, rng.random_range(0..=k));
        }
        let mut tokens = Vec::new();
        let mut labels = Vec::new();
        let filler = |tokens: &mut Vec<String>, labels: &mut Vec<Tag>, rng: &mut ChaCha8Rng| {
            for _ in 0..rng.random_range(0..3) {
                tokens.push(format!("w{}", rng.random_range(0..50)));
                labels.push(Tag::Outside);
            }
        };
        filler(&mut tokens, &mut labels, &mut rng);
        for ty in mentions {
            for k in 0..rng.random_range(1..=3) {
                tokens.push(format!("{}{}", ty.to_lowercase(), rng.random_range(0..20)));
                labels.push(if k == 0 {
                    Tag::Begin(ty.to_string())
                } else {
                    Tag::Inside(ty.to_string())
                });
            }
            filler(&mut tokens, &mut labels, &mut rng);
        }
        if tokens.is_empty() {
            tokens.push("empty".into());
            labels.push(Tag::Outside);
        }
        sentences.push(NerSentence::new(format!("s{i}"), tokens, labels).unwrap());
    }
    NerDataset::new("synthetic", sentences)
        .with_entity_types(TYPES.iter().map(|s| s.to_string()).collect())
        .unwrap()
}

/// Random valid record: null slot at a random index, some positions left
/// unmapped, logits drawn from a small integer grid so ties happen.
pub fn random_record(rng: &mut ChaCha8Rng, max_positions: usize) -> LogitRecord {
    let n = rng.random_range(1..=max_positions);
    let null = rng.random_range(0..n);
    let words: Vec<String> = (0..n).map(|k| format!("t{k}")).collect();
    let context = words.join(" ");
    let mut offset = 0;
    let mut positions = Vec::with_capacity(n);
    for (k, w) in words.iter().enumerate() {
        let len = w.chars().count();
        if k == null {
            positions.push(Position::null(k));
        } else if rng.random_bool(0.15) {
            positions.push(Position {
                index: k,
                char_start: None,
                char_end: None,
                is_null: false,
            });
        } else {
            positions.push(Position::span(k, offset, offset + len));
        }
        offset += len + 1;
    }
    let logit = |rng: &mut ChaCha8Rng| f64::from(rng.random_range(-6i32..=6)) * 0.5;
    let start_logits = (0..n).map(|_| logit(rng)).collect();
    let end_logits = (0..n).map(|_| logit(rng)).collect();
    LogitRecord {
        qa_id: "r::X::0".into(),
        sentence_id: "r".into(),
        entity_type: "X".into(),
        question: "What is the x?".into(),
        context,
        positions,
        start_logits,
        end_logits,
    }
}

/// (start_index, end_index, score) of every legal pair, sorted by score
/// descending, then character start, then character end, then indices.
pub fn brute_force_pairs(record: &LogitRecord, max_len: usize) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    for i in 0..record.positions.len() {
        for j in i..record.positions.len() {
            let (pi, pj) = (&record.positions[i], &record.positions[j]);
            if pi.is_null || pj.is_null || pi.char_start.is_none() || pj.char_start.is_none() {
                continue;
            }
            if j - i + 1 > max_len {
                continue;
            }
            out.push((i, j, record.start_logits[i] + record.end_logits[j]));
        }
    }
    let key = |&(i, j, _): &(usize, usize, f64)| {
        (record.positions[i].char_start.unwrap(), record.positions[j].char_end.unwrap(), i, j)
    };
    out.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap().then_with(|| key(a).cmp(&key(b))));
    out
}
