//! BIO-tagged NER corpora.
//!
//! Sentences are pre-tokenized; the sentence text is the tokens joined by a
//! single space and every token carries its character offsets into that text.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::text::char_slice;

/// One BIO label.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Tag {
    Outside,
    Begin(String),
    Inside(String),
}

impl Tag {
    pub fn entity_type(&self) -> Option<&str> {
        match self {
            Tag::Outside => None,
            Tag::Begin(t) | Tag::Inside(t) => Some(t),
        }
    }

    pub fn is_outside(&self) -> bool {
        matches!(self, Tag::Outside)
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tag::Outside => f.write_str("O"),
            Tag::Begin(t) => write!(f, "B-{t}"),
            Tag::Inside(t) => write!(f, "I-{t}"),
        }
    }
}

impl FromStr for Tag {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s == "O" {
            return Ok(Tag::Outside);
        }
        let (prefix, ty) = match (s.get(..2), s.get(2..)) {
            (Some(p), Some(t)) if !t.is_empty() => (p, t),
            _ => return Err(format!("invalid BIO tag {s:?}")),
        };
        match prefix {
            "B-" => Ok(Tag::Begin(ty.to_string())),
            "I-" => Ok(Tag::Inside(ty.to_string())),
            _ => Err(format!("invalid BIO tag {s:?}")),
        }
    }
}

impl Serialize for Tag {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Tag {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A tokenized sentence with gold labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NerSentence {
    id: String,
    tokens: Vec<String>,
    labels: Vec<Tag>,
    text: String,
    token_char_offsets: Vec<(usize, usize)>,
}

impl NerSentence {
    /// Tokens must be non-empty and free of whitespace.
    pub fn new(id: impl Into<String>, tokens: Vec<String>, labels: Vec<Tag>) -> Result<Self> {
        let id = id.into();
        let invalid = |message: String| Error::InvalidSentence {
            id: id.clone(),
            message,
        };
        if tokens.len() != labels.len() {
            return Err(invalid(format!(
                "{} tokens but {} labels",
                tokens.len(),
                labels.len()
            )));
        }
        if let Some(bad) = tokens
            .iter()
            .find(|t| t.is_empty() || t.chars().any(char::is_whitespace))
        {
            return Err(invalid(format!("token {bad:?} is empty or contains whitespace")));
        }
        let mut offsets = Vec::with_capacity(tokens.len());
        let mut cursor = 0;
        for tok in &tokens {
            let len = tok.chars().count();
            offsets.push((cursor, cursor + len));
            cursor += len + 1;
        }
        Ok(NerSentence {
            text: tokens.join(" "),
            id,
            tokens,
            labels,
            token_char_offsets: offsets,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn labels(&self) -> &[Tag] {
        &self.labels
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn token_char_offsets(&self) -> &[(usize, usize)] {
        &self.token_char_offsets
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Same tokens, different labels.
    pub fn with_labels(&self, labels: Vec<Tag>) -> Result<Self> {
        NerSentence::new(self.id.clone(), self.tokens.clone(), labels)
    }

    /// Builds the span covering tokens `start..=end`. `None` when out of range.
    pub fn span(&self, entity_type: &str, start: usize, end: usize) -> Option<EntitySpan> {
        if start > end || end >= self.len() {
            return None;
        }
        let start_char = self.token_char_offsets[start].0;
        let end_char = self.token_char_offsets[end].1;
        Some(EntitySpan {
            entity_type: entity_type.to_string(),
            start_token: start,
            end_token: end,
            start_char,
            end_char,
            surface: char_slice(&self.text, start_char, end_char)?.to_string(),
        })
    }

    pub fn spans(&self) -> Vec<EntitySpan> {
        spans_from_bio(self)
    }

    /// Number of gold mentions per entity type.
    pub fn mention_counts(&self) -> indexmap::IndexMap<String, usize> {
        let mut counts = indexmap::IndexMap::new();
        for (ty, _, _) in spans_from_tags(&self.labels) {
            *counts.entry(ty).or_insert(0) += 1;
        }
        counts
    }
}

/// A typed token range with its character extent in the sentence text.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EntitySpan {
    pub entity_type: String,
    pub start_token: usize,
    /// Inclusive.
    pub end_token: usize,
    pub start_char: usize,
    /// Half-open.
    pub end_char: usize,
    pub surface: String,
}

impl fmt::Display for EntitySpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}-{}", self.entity_type, self.start_token, self.end_token)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NerDataset {
    pub name: String,
    pub entity_types: Vec<String>,
    pub sentences: Vec<NerSentence>,
}

impl NerDataset {
    /// Entity types are collected in first-occurrence order.
    pub fn new(name: impl Into<String>, sentences: Vec<NerSentence>) -> Self {
        let mut seen = HashSet::new();
        let mut entity_types = Vec::new();
        for ty in sentences
            .iter()
            .flat_map(|s| s.labels.iter().filter_map(Tag::entity_type))
        {
            if seen.insert(ty) {
                entity_types.push(ty.to_string());
            }
        }
        NerDataset {
            name: name.into(),
            entity_types,
            sentences,
        }
    }

    /// Replaces the type order. The new list must contain every type that
    /// occurs in the labels; types that never occur are allowed.
    pub fn with_entity_types(mut self, order: Vec<String>) -> Result<Self> {
        let mut seen = HashSet::new();
        if let Some(dup) = order.iter().find(|t| !seen.insert(t.as_str())) {
            return Err(Error::Config(format!("duplicate entity type {dup:?} in type order")));
        }
        if let Some(missing) = self.entity_types.iter().find(|t| !seen.contains(t.as_str())) {
            return Err(Error::Config(format!(
                "entity type order is missing {missing:?}, which occurs in the corpus"
            )));
        }
        self.entity_types = order;
        Ok(self)
    }

    /// Sentences at `indices` (in the given order), keeping the type list.
    pub fn subset(&self, name: impl Into<String>, indices: &[usize]) -> NerDataset {
        NerDataset {
            name: name.into(),
            entity_types: self.entity_types.clone(),
            sentences: indices.iter().map(|&i| self.sentences[i].clone()).collect(),
        }
    }

    pub fn sentence(&self, id: &str) -> Option<&NerSentence> {
        self.sentences.iter().find(|s| s.id == id)
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn total_mentions(&self) -> indexmap::IndexMap<String, usize> {
        let mut counts: indexmap::IndexMap<String, usize> =
            self.entity_types.iter().map(|t| (t.clone(), 0)).collect();
        for s in &self.sentences {
            for (ty, n) in s.mention_counts() {
                *counts.entry(ty).or_insert(0) += n;
            }
        }
        counts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnOrder {
    /// `token ... tag`, as in CoNLL03.
    #[default]
    TokenFirst,
    /// `tag token`, as in the MIT Movie and Restaurant corpora.
    TagFirst,
}

#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    pub column_order: ColumnOrder,
    /// Reject stray `I-X` tags instead of repairing them to `B-X`.
    pub strict: bool,
    pub name: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseStats {
    pub repaired_tags: usize,
    pub skipped_docstart: usize,
}

pub fn parse_bio(input: &str, options: &ParseOptions) -> Result<NerDataset> {
    parse_bio_with_stats(input, options).map(|(d, _)| d)
}

pub fn parse_bio_with_stats(input: &str, options: &ParseOptions) -> Result<(NerDataset, ParseStats)> {
    if input.trim().is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut stats = ParseStats::default();
    let mut sentences = Vec::new();
    let mut tokens: Vec<String> = Vec::new();
    let mut tags: Vec<Tag> = Vec::new();
    let mut columns: Option<usize> = None;

    let mut flush = |tokens: &mut Vec<String>, tags: &mut Vec<Tag>, stats: &mut ParseStats| -> Result<()> {
        if tokens.is_empty() {
            return Ok(());
        }
        stats.repaired_tags += repair_tags(tags);
        let id = format!("s{}", sentences.len());
        sentences.push(NerSentence::new(id, std::mem::take(tokens), std::mem::take(tags))?);
        Ok(())
    };

    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.is_empty() {
            flush(&mut tokens, &mut tags, &mut stats)?;
            continue;
        }
        let (token, tag) = match options.column_order {
            ColumnOrder::TokenFirst => (cols[0], cols[cols.len() - 1]),
            ColumnOrder::TagFirst => (cols[cols.len() - 1], cols[0]),
        };
        if token == "-DOCSTART-" {
            stats.skipped_docstart += 1;
            flush(&mut tokens, &mut tags, &mut stats)?;
            continue;
        }
        if cols.len() < 2 {
            return Err(Error::Parse {
                line: line_no,
                message: "expected at least 2 columns".into(),
            });
        }
        match columns {
            None => columns = Some(cols.len()),
            Some(n) if n != cols.len() => {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected {n} columns, found {}", cols.len()),
                })
            }
            Some(_) => {}
        }
        let tag: Tag = tag.parse().map_err(|message| Error::Parse {
            line: line_no,
            message,
        })?;
        if options.strict {
            if let Tag::Inside(ty) = &tag {
                let continues = tags.last().and_then(Tag::entity_type) == Some(ty.as_str());
                if !continues {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("I-{ty} does not continue a {ty} span"),
                    });
                }
            }
        }
        tokens.push(token.to_string());
        tags.push(tag);
    }
    flush(&mut tokens, &mut tags, &mut stats)?;
    Ok((NerDataset::new(options.name.clone(), sentences), stats))
}

/// Rewrites every `I-X` that does not continue an `X` span as `B-X`.
/// Returns the number of rewritten tags.
pub fn repair_tags(tags: &mut [Tag]) -> usize {
    let mut repaired = 0;
    let mut prev_type: Option<String> = None;
    for tag in tags.iter_mut() {
        if let Tag::Inside(ty) = tag {
            if prev_type.as_deref() != Some(ty.as_str()) {
                *tag = Tag::Begin(std::mem::take(ty));
                repaired += 1;
            }
        }
        prev_type = tag.entity_type().map(str::to_string);
    }
    repaired
}

/// Serializes back to two-column BIO text, one blank line after each sentence.
pub fn to_bio(dataset: &NerDataset, column_order: ColumnOrder) -> String {
    let mut out = String::new();
    for s in &dataset.sentences {
        for (tok, tag) in s.tokens.iter().zip(&s.labels) {
            match column_order {
                ColumnOrder::TokenFirst => out.push_str(&format!("{tok} {tag}\n")),
                ColumnOrder::TagFirst => out.push_str(&format!("{tag}\t{tok}\n")),
            }
        }
        out.push('\n');
    }
    out
}

/// Token-level segmentation: `(type, start, end_inclusive)` sorted by start.
/// A span ends at `O`, at any `B-`, or at an `I-` of another type; a stray
/// `I-X` opens a new span.
pub fn spans_from_tags(tags: &[Tag]) -> Vec<(String, usize, usize)> {
    let mut out = Vec::new();
    let mut open: Option<(&str, usize)> = None;
    for (i, tag) in tags.iter().enumerate() {
        match tag {
            Tag::Outside => {
                if let Some((ty, st)) = open.take() {
                    out.push((ty.to_string(), st, i - 1));
                }
            }
            Tag::Begin(ty) => {
                if let Some((pty, st)) = open.take() {
                    out.push((pty.to_string(), st, i - 1));
                }
                open = Some((ty, i));
            }
            Tag::Inside(ty) => match open {
                Some((pty, _)) if pty == ty => {}
                _ => {
                    if let Some((pty, st)) = open.take() {
                        out.push((pty.to_string(), st, i - 1));
                    }
                    open = Some((ty, i));
                }
            },
        }
    }
    if let Some((ty, st)) = open {
        out.push((ty.to_string(), st, tags.len() - 1));
    }
    out
}

pub fn spans_from_bio(sentence: &NerSentence) -> Vec<EntitySpan> {
    spans_from_tags(&sentence.labels)
        .into_iter()
        .filter_map(|(ty, st, en)| sentence.span(&ty, st, en))
        .collect()
}

/// Inverse of [`spans_from_bio`].
pub fn bio_from_spans(n_tokens: usize, spans: &[EntitySpan]) -> Result<Vec<Tag>> {
    let mut sorted: Vec<&EntitySpan> = spans.iter().collect();
    sorted.sort_by_key(|s| (s.start_token, s.end_token));
    if let Some(bad) = sorted
        .iter()
        .find(|s| s.start_token > s.end_token || s.end_token >= n_tokens)
    {
        return Err(Error::InvalidSentence {
            id: String::new(),
            message: format!("span {bad} out of range for {n_tokens} tokens"),
        });
    }
    for pair in sorted.windows(2) {
        if pair[1].start_token <= pair[0].end_token {
            return Err(Error::OverlappingSpans {
                first: pair[0].to_string(),
                second: pair[1].to_string(),
            });
        }
    }
    let mut tags = vec![Tag::Outside; n_tokens];
    for s in sorted {
        tags[s.start_token] = Tag::Begin(s.entity_type.clone());
        for tag in &mut tags[s.start_token + 1..=s.end_token] {
            *tag = Tag::Inside(s.entity_type.clone());
        }
    }
    Ok(tags)
}

/// `restaurant_name` → `restaurant name`: underscores become spaces, the
/// result is lowercased and internal whitespace is collapsed.
pub fn normalize_entity_type(raw: &str) -> String {
    raw.replace('_', " ")
        .to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tags(s: &str) -> Vec<Tag> {
        s.split_whitespace().map(|t| t.parse().unwrap()).collect()
    }

    fn sentence(labels: &str) -> NerSentence {
        let labels = tags(labels);
        let tokens = (0..labels.len()).map(|i| format!("w{i}")).collect();
        NerSentence::new("t", tokens, labels).unwrap()
    }

    fn ranges(s: &NerSentence) -> Vec<(String, usize, usize)> {
        s.spans()
            .into_iter()
            .map(|sp| (sp.entity_type, sp.start_token, sp.end_token))
            .collect()
    }

    #[test]
    fn parses_conll_fixture() {
        let d = parse_bio("EU B-ORG\nrejects O\nGerman B-MISC\n", &ParseOptions::default()).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.sentences[0].tokens(), ["EU", "rejects", "German"]);
        assert_eq!(d.entity_types, ["ORG", "MISC"]);
        assert_eq!(d.sentences[0].id(), "s0");
        assert_eq!(d.sentences[0].text(), "EU rejects German");
    }

    #[test]
    fn empty_input_errors() {
        let err = parse_bio("", &ParseOptions::default()).unwrap_err();
        assert_eq!(err.to_string(), "empty corpus");
        assert!(matches!(parse_bio("\n \n", &ParseOptions::default()), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn stray_inside_is_repaired() {
        let (d, stats) =
            parse_bio_with_stats("a O\nb I-PER\nc I-PER\n", &ParseOptions::default()).unwrap();
        assert_eq!(stats.repaired_tags, 1);
        assert_eq!(ranges(&d.sentences[0]), vec![("PER".to_string(), 1, 2)]);
        assert_eq!(d.sentences[0].labels(), tags("O B-PER I-PER").as_slice());
    }

    #[test]
    fn strict_mode_rejects_stray_inside() {
        let opts = ParseOptions {
            strict: true,
            ..Default::default()
        };
        match parse_bio("a O\nb I-PER\n", &opts) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_bio("a B-PER\nb I-PER\n", &opts).is_ok());
    }

    #[test]
    fn column_count_mismatch_reports_line() {
        let err = parse_bio("a x B-PER\nb O\n", &ParseOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse_bio("a O\nlonely\n", &ParseOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn bad_tag_reports_line() {
        let err = parse_bio("a O\nb X-PER\n", &ParseOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn docstart_and_crlf() {
        let input = "-DOCSTART- -X- -X- O\r\n\r\nEU NNP B-NP B-ORG\r\nrejects VBZ B-VP O\r\n\r\n-DOCSTART- -X- -X- O\r\nPeter NNP B-NP I-PER\r\n";
        let (d, stats) = parse_bio_with_stats(input, &ParseOptions::default()).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(stats.skipped_docstart, 2);
        assert_eq!(d.sentences[1].labels(), tags("B-PER").as_slice());
        assert_eq!(d.entity_types, ["ORG", "PER"]);
    }

    #[test]
    fn docstart_only_gives_zero_sentences() {
        let d = parse_bio("-DOCSTART- O\n\n", &ParseOptions::default()).unwrap();
        assert!(d.is_empty());
    }

    #[test]
    fn tag_first_columns() {
        let opts = ParseOptions {
            column_order: ColumnOrder::TagFirst,
            ..Default::default()
        };
        let d = parse_bio("O\tfind\nB-Restaurant_Name\tolive\nI-Restaurant_Name\tgarden\n", &opts).unwrap();
        assert_eq!(d.sentences[0].tokens(), ["find", "olive", "garden"]);
        assert_eq!(d.entity_types, ["Restaurant_Name"]);
        let spans = d.sentences[0].spans();
        assert_eq!(spans[0].surface, "olive garden");
        assert_eq!((spans[0].start_char, spans[0].end_char), (5, 17));
    }

    #[test]
    fn spans_single_and_none() {
        assert_eq!(ranges(&sentence("B-PER I-PER O")), vec![("PER".into(), 0, 1)]);
        assert!(ranges(&sentence("O O O")).is_empty());
        assert_eq!(
            ranges(&sentence("B-LOC B-LOC I-LOC")),
            vec![("LOC".into(), 0, 0), ("LOC".into(), 1, 2)]
        );
        assert_eq!(
            ranges(&sentence("B-LOC I-PER I-PER")),
            vec![("LOC".into(), 0, 0), ("PER".into(), 1, 2)]
        );
    }

    #[test]
    fn inverse_examples() {
        let s = sentence("O O O O");
        let per = s.span("PER", 0, 1).unwrap();
        assert_eq!(bio_from_spans(3, &[per]).unwrap(), tags("B-PER I-PER O"));
        assert_eq!(bio_from_spans(2, &[]).unwrap(), tags("O O"));
        let a = s.span("LOC", 0, 0).unwrap();
        let b = s.span("LOC", 1, 2).unwrap();
        assert_eq!(bio_from_spans(4, &[b, a]).unwrap(), tags("B-LOC B-LOC I-LOC O"));
    }

    #[test]
    fn overlap_is_reported() {
        let s = sentence("O O O O");
        let a = s.span("PER", 0, 1).unwrap();
        let b = s.span("LOC", 1, 2).unwrap();
        let err = bio_from_spans(4, &[a, b]).unwrap_err();
        assert_eq!(err.to_string(), "overlapping spans PER@0-1 and LOC@1-2");
    }

    #[test]
    fn normalizes_types() {
        assert_eq!(normalize_entity_type("restaurant_name"), "restaurant name");
        assert_eq!(normalize_entity_type("person"), "person");
        assert_eq!(normalize_entity_type("Opinion__Rating"), "opinion rating");
        assert_eq!(normalize_entity_type("  RATINGS_AVERAGE "), "ratings average");
    }

    #[test]
    fn offsets_reconstruct_tokens() {
        let s = NerSentence::new(
            "x",
            vec!["São".into(), "Paulo".into(), "é".into()],
            tags("B-LOC I-LOC O"),
        )
        .unwrap();
        for (tok, &(a, b)) in s.tokens().iter().zip(s.token_char_offsets()) {
            assert_eq!(char_slice(s.text(), a, b), Some(tok.as_str()));
        }
        assert_eq!(s.spans()[0].surface, "São Paulo");
    }

    #[test]
    fn rejects_whitespace_tokens() {
        assert!(NerSentence::new("x", vec!["a b".into()], tags("O")).is_err());
        assert!(NerSentence::new("x", vec!["a".into()], tags("O O")).is_err());
    }

    #[test]
    fn type_override() {
        let d = parse_bio("a B-PER\nb B-LOC\n", &ParseOptions::default()).unwrap();
        let d2 = d
            .clone()
            .with_entity_types(vec!["LOC".into(), "PER".into(), "ORG".into()])
            .unwrap();
        assert_eq!(d2.entity_types, ["LOC", "PER", "ORG"]);
        assert!(d.clone().with_entity_types(vec!["LOC".into()]).is_err());
        assert!(d.with_entity_types(vec!["LOC".into(), "PER".into(), "LOC".into()]).is_err());
    }
}
