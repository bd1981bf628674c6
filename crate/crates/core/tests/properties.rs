mod common;

use std::collections::HashSet;

use proptest::prelude::*;
use qaner::corpus::{bio_from_spans, parse_bio, repair_tags, to_bio, ColumnOrder, NerDataset, NerSentence, ParseOptions, Tag};
use qaner::decode::{accept_answers, decode_record, nbest_spans, DecodeConfig, DecodedSpan, Normalization};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tag_strategy() -> impl Strategy<Value = Tag> {
    prop_oneof![
        Just(Tag::Outside),
        (0..5u8).prop_map(|t| Tag::Begin(format!("T{t}"))),
        (0..5u8).prop_map(|t| Tag::Inside(format!("T_{t}"))),
    ]
}

fn sentence_strategy() -> impl Strategy<Value = (Vec<String>, Vec<Tag>)> {
    prop::collection::vec(("[a-zA-Z0-9éü.,-]{1,6}", tag_strategy()), 1..30).prop_map(|pairs| {
        let (tokens, mut tags): (Vec<String>, Vec<Tag>) = pairs.into_iter().unzip();
        repair_tags(&mut tags);
        (tokens, tags)
    })
}

fn dataset_strategy() -> impl Strategy<Value = NerDataset> {
    prop::collection::vec(sentence_strategy(), 1..6).prop_map(|sents| {
        let sentences = sents
            .into_iter()
            .enumerate()
            .map(|(i, (tok, tags))| NerSentence::new(format!("s{i}"), tok, tags).unwrap())
            .collect();
        NerDataset::new("p", sentences)
    })
}

fn pairs(spans: &[DecodedSpan]) -> Vec<(usize, usize)> {
    spans.iter().map(|s| (s.start_index, s.end_index)).collect()
}

fn norm_strategy() -> impl Strategy<Value = Normalization> {
    prop_oneof![Just(Normalization::NullContrast), Just(Normalization::FullSoftmax)]
}

proptest! {
    #[test]
    fn spans_and_tags_round_trip((tokens, tags) in sentence_strategy()) {
        let n = tags.len();
        let s = NerSentence::new("x", tokens, tags.clone()).unwrap();
        prop_assert_eq!(bio_from_spans(n, &s.spans()).unwrap(), tags);
    }

    #[test]
    fn bio_text_round_trip(dataset in dataset_strategy(), tag_first in any::<bool>()) {
        let order = if tag_first { ColumnOrder::TagFirst } else { ColumnOrder::TokenFirst };
        let text = to_bio(&dataset, order);
        let opts = ParseOptions { column_order: order, strict: true, name: "p".into() };
        let parsed = parse_bio(&text, &opts).unwrap();
        prop_assert_eq!(&parsed.sentences, &dataset.sentences);
        let again = parse_bio(&to_bio(&parsed, order), &opts).unwrap();
        prop_assert_eq!(again.sentences, parsed.sentences);
    }

    #[test]
    fn nbest_matches_brute_force(seed in any::<u64>(), n_best in 1usize..60, max_len in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let record = common::random_record(&mut rng, 12);
        let cfg = DecodeConfig { n_best, max_answer_positions: max_len, ..Default::default() };
        let got: Vec<_> = nbest_spans(&record, &cfg).unwrap().iter().map(|s| (s.start_index, s.end_index, s.score)).collect();
        let mut want = common::brute_force_pairs(&record, max_len);
        want.truncate(n_best);
        prop_assert_eq!(got, want);
    }

    #[test]
    fn accepted_spans_are_disjoint_and_sorted(seed in any::<u64>(), threshold in 0.0f64..2.0, norm in norm_strategy()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let record = common::random_record(&mut rng, 12);
        let cfg = DecodeConfig { prob_threshold: threshold, normalization: norm, ..Default::default() };
        let spans = decode_record(&record, &cfg).unwrap();
        for w in spans.windows(2) {
            prop_assert!(w[0].char_end <= w[1].char_start);
        }
        for s in &spans {
            prop_assert!(s.p_start + s.p_end > threshold);
            prop_assert_eq!(&record.context.chars().skip(s.char_start).take(s.char_end - s.char_start).collect::<String>(), &s.surface);
        }
    }

    #[test]
    fn raising_threshold_shrinks_the_passing_set(seed in any::<u64>(), lo in 0.0f64..2.0, delta in 0.0f64..1.0, norm in norm_strategy()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let record = common::random_record(&mut rng, 12);
        let hi = (lo + delta).min(2.0);
        let cfg = DecodeConfig { normalization: norm, ..Default::default() };
        let candidates = nbest_spans(&record, &cfg).unwrap();
        let passing = |t: f64| -> HashSet<(usize, usize)> {
            candidates.iter().filter(|c| c.p_start + c.p_end > t).map(|c| (c.start_index, c.end_index)).collect()
        };
        prop_assert!(passing(hi).is_subset(&passing(lo)));
        // Without overlaps among passing candidates the accepted set itself shrinks.
        let accepted_lo: HashSet<_> = pairs(&accept_answers(&candidates, &DecodeConfig { prob_threshold: lo, ..cfg })).into_iter().collect();
        if accepted_lo.len() == passing(lo).len() {
            let accepted_hi: HashSet<_> = pairs(&accept_answers(&candidates, &DecodeConfig { prob_threshold: hi, ..cfg })).into_iter().collect();
            prop_assert!(accepted_hi.is_subset(&accepted_lo));
        }
    }

    #[test]
    fn raising_n_best_keeps_survivors(seed in any::<u64>(), n in 1usize..30, extra in 0usize..30, threshold in 0.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let record = common::random_record(&mut rng, 12);
        let small = DecodeConfig { n_best: n, prob_threshold: threshold, ..Default::default() };
        let large = DecodeConfig { n_best: n + extra, ..small };
        let before: HashSet<_> = pairs(&decode_record(&record, &small).unwrap()).into_iter().collect();
        let after: HashSet<_> = pairs(&decode_record(&record, &large).unwrap()).into_iter().collect();
        prop_assert!(before.is_subset(&after));
    }

    #[test]
    fn shifting_logits_changes_no_decision(seed in any::<u64>(), c in -8i32..8, threshold in 0.0f64..2.0, norm in norm_strategy()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let record = common::random_record(&mut rng, 12);
        let mut shifted = record.clone();
        for x in shifted.start_logits.iter_mut().chain(shifted.end_logits.iter_mut()) {
            *x += f64::from(c);
        }
        let cfg = DecodeConfig { prob_threshold: threshold, normalization: norm, ..Default::default() };
        let a = nbest_spans(&record, &cfg).unwrap();
        let b = nbest_spans(&shifted, &cfg).unwrap();
        prop_assert_eq!(pairs(&a), pairs(&b));
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(y.score, x.score + 2.0 * f64::from(c));
        }
        prop_assert_eq!(pairs(&decode_record(&record, &cfg).unwrap()), pairs(&decode_record(&shifted, &cfg).unwrap()));
    }
}

/// The final accepted set is not monotone in the threshold: a
/// higher-scoring, low-probability span can suppress an overlapping one
/// until a stricter threshold filters it out.
#[test]
fn stricter_threshold_can_reveal_a_suppressed_span() {
    use qaner::decode::{LogitRecord, Position};
    let record = LogitRecord {
        qa_id: "r::X::0".into(),
        sentence_id: "r".into(),
        entity_type: "X".into(),
        question: "q?".into(),
        context: "a b c".into(),
        positions: vec![
            Position::null(0),
            Position::span(1, 0, 1),
            Position::span(2, 2, 3),
            Position::span(3, 4, 5),
        ],
        start_logits: vec![0.0, 10.0, 2.0, -6.0],
        end_logits: vec![0.0, -6.0, -4.0, 2.0],
    };
    let at = |t: f64| {
        let cfg = DecodeConfig {
            prob_threshold: t,
            max_answer_positions: 2,
            ..Default::default()
        };
        pairs(&decode_record(&record, &cfg).unwrap())
    };
    // "a b" scores 6 with p ~ 1.018; "b c" scores 4 with p ~ 1.762.
    assert_eq!(at(1.0), vec![(1, 2)]);
    assert_eq!(at(1.5), vec![(2, 3)]);
}

#[test]
fn five_mentions_of_one_type_decode_exactly() {
    use qaner::scoring::{oracle_score, OracleSpec, ScoringRequest};
    let context = "a1 x a2 x a3 x a4 x a5";
    let gold: Vec<(usize, usize)> = [0usize, 5, 10, 15, 20].iter().map(|&s| (s, s + 2)).collect();
    let request = ScoringRequest {
        qa_id: "s::A::0".into(),
        sentence_id: "s".into(),
        entity_type: "A".into(),
        question: "What is the a?".into(),
        context: context.into(),
    };
    let spec = OracleSpec { gold: [("s::A::0".to_string(), gold.clone())].into(), ..Default::default() };
    let spans = decode_record(&oracle_score(&request, &spec).unwrap(), &DecodeConfig::default()).unwrap();
    let got: Vec<_> = spans.iter().map(|s| (s.char_start, s.char_end)).collect();
    assert_eq!(got, gold);
}
