//! Question templates and the per-entity-type prompt set.

use std::collections::HashSet;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::corpus::normalize_entity_type;
use crate::error::{Error, Result};

pub const ENTITY_SLOT: &str = "[E]";
/// Alternate spelling of [`ENTITY_SLOT`] used in published template tables.
pub const ENTITY_SLOT_ALT: &str = "<e>";
pub const MASK_SLOT: &str = "[MASK]";
/// Template name for a hand-written entity type → question map.
pub const HANDCRAFT: &str = "handcraft";

pub const FIVE_WS: [&str; 5] = ["Who", "What", "When", "Where", "Why"];

/// The template configurations compared in the template ablation.
pub const TEMPLATE_VARIANTS: [&str; 5] = [
    HANDCRAFT,
    "[MASK] is the <e>?",
    "What is the <e>?",
    "The <e>?",
    "Is there a <e>?",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateKind {
    Fixed,
    Masked,
    HandcraftedMap,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PromptTemplate {
    Fixed(String),
    Masked(String),
    Handcrafted(IndexMap<String, String>),
}

impl PromptTemplate {
    /// Parses a pattern with exactly one entity slot and at most one mask slot.
    pub fn parse(pattern: &str) -> Result<Self> {
        let slots = pattern.matches(ENTITY_SLOT).count() + pattern.matches(ENTITY_SLOT_ALT).count();
        if slots != 1 {
            return Err(Error::Template(format!(
                "{pattern:?} must contain exactly one {ENTITY_SLOT} slot, found {slots}"
            )));
        }
        match pattern.matches(MASK_SLOT).count() {
            0 => Ok(PromptTemplate::Fixed(pattern.to_string())),
            1 => Ok(PromptTemplate::Masked(pattern.to_string())),
            n => Err(Error::Template(format!(
                "{pattern:?} must contain at most one {MASK_SLOT} slot, found {n}"
            ))),
        }
    }

    pub fn handcrafted(map: IndexMap<String, String>) -> Self {
        PromptTemplate::Handcrafted(map)
    }

    /// Reads a `{entity_type: question}` JSON object.
    pub fn handcrafted_from_json(json: &str) -> Result<Self> {
        Ok(PromptTemplate::Handcrafted(serde_json::from_str(json)?))
    }

    pub fn kind(&self) -> TemplateKind {
        match self {
            PromptTemplate::Fixed(_) => TemplateKind::Fixed,
            PromptTemplate::Masked(_) => TemplateKind::Masked,
            PromptTemplate::Handcrafted(_) => TemplateKind::HandcraftedMap,
        }
    }

    pub fn pattern(&self) -> &str {
        match self {
            PromptTemplate::Fixed(p) | PromptTemplate::Masked(p) => p,
            PromptTemplate::Handcrafted(_) => HANDCRAFT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FillCandidate {
    pub token: String,
    pub score: f64,
}

impl FillCandidate {
    pub fn new(token: impl Into<String>, score: f64) -> Self {
        FillCandidate {
            token: token.into(),
            score,
        }
    }
}

/// Fill-mask model boundary. Returns candidates ranked by descending score.
pub trait MaskFiller {
    fn fill(&self, text_with_mask: &str) -> Result<Vec<FillCandidate>>;
}

impl<F> MaskFiller for F
where
    F: Fn(&str) -> Result<Vec<FillCandidate>>,
{
    fn fill(&self, text_with_mask: &str) -> Result<Vec<FillCandidate>> {
        self(text_with_mask)
    }
}

/// Fill results recorded ahead of time, keyed by the masked text.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CachedFiller(pub IndexMap<String, Vec<FillCandidate>>);

impl CachedFiller {
    pub fn from_json(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }
}

impl MaskFiller for CachedFiller {
    fn fill(&self, text_with_mask: &str) -> Result<Vec<FillCandidate>> {
        self.0
            .get(text_with_mask)
            .cloned()
            .ok_or_else(|| Error::MaskFill(format!("no cached candidates for {text_with_mask:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub entity_type: String,
    pub question: String,
}

/// One question per entity type, in dataset type order. Serializes to the
/// prompt set file format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSet {
    pub template: String,
    pub kind: TemplateKind,
    pub prompts: Vec<Prompt>,
}

impl PromptSet {
    pub fn question(&self, entity_type: &str) -> Option<&str> {
        self.prompts
            .iter()
            .find(|p| p.entity_type == entity_type)
            .map(|p| p.question.as_str())
    }

    pub fn entity_types(&self) -> impl Iterator<Item = &str> {
        self.prompts.iter().map(|p| p.entity_type.as_str())
    }

    pub fn len(&self) -> usize {
        self.prompts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prompts.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for p in &self.prompts {
            if !seen.insert(p.entity_type.as_str()) {
                return Err(Error::Template(format!(
                    "duplicate entity type {:?} in prompt set",
                    p.entity_type
                )));
            }
            if p.question.trim().is_empty() {
                return Err(Error::Template(format!(
                    "empty question for entity type {:?}",
                    p.entity_type
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("prompt set serializes");
        s.push('\n');
        s
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let set: PromptSet = serde_json::from_str(json)?;
        set.validate()?;
        Ok(set)
    }
}

/// Picks the mask token: the best purely alphabetic candidate, restricted to
/// `whitelist` (case-insensitive) when one is given and any candidate matches.
pub fn mask_fill_select(candidates: &[FillCandidate], whitelist: Option<&[String]>) -> Result<String> {
    let alphabetic = |c: &&FillCandidate| !c.token.is_empty() && c.token.chars().all(char::is_alphabetic);
    if let Some(allowed) = whitelist {
        let hit = candidates
            .iter()
            .filter(alphabetic)
            .find(|c| allowed.iter().any(|w| w.eq_ignore_ascii_case(&c.token)));
        if let Some(c) = hit {
            return Ok(c.token.clone());
        }
    }
    candidates
        .iter()
        .find(alphabetic)
        .map(|c| c.token.clone())
        .ok_or_else(|| Error::MaskFill("no alphabetic candidate".into()))
}

fn check_candidates(candidates: &[FillCandidate]) -> Result<()> {
    if candidates.is_empty() {
        return Err(Error::MaskFill("filler returned no candidates".into()));
    }
    if candidates.iter().any(|c| !c.score.is_finite()) {
        return Err(Error::MaskFill("non-finite candidate score".into()));
    }
    if candidates.windows(2).any(|w| w[1].score > w[0].score) {
        return Err(Error::MaskFill("candidate scores are not ranked".into()));
    }
    Ok(())
}

/// Collapses whitespace, capitalizes the first letter and ends the question
/// with exactly one `?`.
pub fn finish_question(raw: &str) -> String {
    let collapsed = raw.split_whitespace().collect::<Vec<_>>().join(" ");
    let body = collapsed.trim_end_matches(|c: char| c == '?' || c.is_whitespace());
    let mut chars = body.chars();
    let mut out = match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect::<String>(),
        None => String::new(),
    };
    out.push('?');
    out
}

fn fill_entity_slot(pattern: &str, entity: &str) -> String {
    if pattern.contains(ENTITY_SLOT) {
        pattern.replacen(ENTITY_SLOT, entity, 1)
    } else {
        pattern.replacen(ENTITY_SLOT_ALT, entity, 1)
    }
}

/// Renders one question per entity type.
pub fn render_prompts(
    template: &PromptTemplate,
    entity_types: &[String],
    filler: Option<&dyn MaskFiller>,
    whitelist: Option<&[String]>,
) -> Result<PromptSet> {
    let mut prompts = Vec::with_capacity(entity_types.len());
    for ty in entity_types {
        let raw = match template {
            PromptTemplate::Handcrafted(map) => map
                .get(ty)
                .cloned()
                .ok_or_else(|| Error::MissingHandcrafted(ty.clone()))?,
            PromptTemplate::Fixed(pattern) => fill_entity_slot(pattern, &normalize_entity_type(ty)),
            PromptTemplate::Masked(pattern) => {
                let filler = filler.ok_or_else(|| {
                    Error::MaskFill("masked template needs a mask filler".into())
                })?;
                let masked = fill_entity_slot(pattern, &normalize_entity_type(ty));
                let candidates = filler.fill(&masked)?;
                check_candidates(&candidates)?;
                let token = mask_fill_select(&candidates, whitelist)?;
                masked.replacen(MASK_SLOT, &token, 1)
            }
        };
        let question = finish_question(&raw);
        if question == "?" {
            return Err(Error::Template(format!("empty question for entity type {ty:?}")));
        }
        prompts.push(Prompt {
            entity_type: ty.clone(),
            question,
        });
    }
    let set = PromptSet {
        template: template.pattern().to_string(),
        kind: template.kind(),
        prompts,
    };
    set.validate()?;
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn types(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn five_ws() -> Vec<String> {
        FIVE_WS.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn fixed_template() {
        let t = PromptTemplate::parse("What is the [E]?").unwrap();
        let set = render_prompts(&t, &types(&["location"]), None, None).unwrap();
        assert_eq!(set.prompts[0].question, "What is the location?");
        assert_eq!(set.kind, TemplateKind::Fixed);
    }

    #[test]
    fn masked_template_uses_filler() {
        let t = PromptTemplate::parse("[MASK] is the [E]?").unwrap();
        let filler = |text: &str| {
            assert_eq!(text, "[MASK] is the location?");
            Ok(vec![FillCandidate::new("Where", 0.6), FillCandidate::new("What", 0.3)])
        };
        let set = render_prompts(&t, &types(&["location"]), Some(&filler), None).unwrap();
        assert_eq!(set.prompts[0].question, "Where is the location?");
    }

    #[test]
    fn lowercase_fill_is_capitalized() {
        let t = PromptTemplate::parse("[MASK] is the <e>?").unwrap();
        let filler = |_: &str| Ok(vec![FillCandidate::new("who", 0.9)]);
        let set = render_prompts(&t, &types(&["PER"]), Some(&filler), None).unwrap();
        assert_eq!(set.prompts[0].question, "Who is the per?");
    }

    #[test]
    fn handcrafted_passthrough_and_missing() {
        let map: IndexMap<String, String> =
            [("person".to_string(), "Who is the person?".to_string())].into_iter().collect();
        let t = PromptTemplate::handcrafted(map);
        let set = render_prompts(&t, &types(&["person"]), None, None).unwrap();
        assert_eq!(set.prompts[0].question, "Who is the person?");
        assert_eq!(set.template, HANDCRAFT);
        let err = render_prompts(&t, &types(&["person", "location"]), None, None).unwrap_err();
        assert!(err.to_string().contains("location"));
    }

    #[test]
    fn masked_without_filler_fails() {
        let t = PromptTemplate::parse("[MASK] is the [E]?").unwrap();
        let err = render_prompts(&t, &types(&["x"]), None, None).unwrap_err();
        assert!(err.to_string().starts_with("mask fill failed"));
    }

    #[test]
    fn empty_or_unranked_fill_fails() {
        let t = PromptTemplate::parse("[MASK] is the [E]?").unwrap();
        let empty = |_: &str| Ok(vec![]);
        assert!(matches!(
            render_prompts(&t, &types(&["x"]), Some(&empty), None),
            Err(Error::MaskFill(_))
        ));
        let unranked = |_: &str| Ok(vec![FillCandidate::new("a", 0.1), FillCandidate::new("b", 0.2)]);
        assert!(matches!(
            render_prompts(&t, &types(&["x"]), Some(&unranked), None),
            Err(Error::MaskFill(_))
        ));
    }

    #[test]
    fn select_examples() {
        let c = [FillCandidate::new("Where", 0.6), FillCandidate::new(",", 0.3)];
        assert_eq!(mask_fill_select(&c, None).unwrap(), "Where");
        let c = [FillCandidate::new("It", 0.5), FillCandidate::new("What", 0.4)];
        assert_eq!(mask_fill_select(&c, Some(&five_ws())).unwrap(), "What");
        assert_eq!(mask_fill_select(&c, None).unwrap(), "It");
        let c = [FillCandidate::new("?", 0.9)];
        assert!(mask_fill_select(&c, None).is_err());
    }

    #[test]
    fn whitelist_falls_back() {
        let c = [FillCandidate::new("##s", 0.7), FillCandidate::new("It", 0.5)];
        assert_eq!(mask_fill_select(&c, Some(&five_ws())).unwrap(), "It");
        let c = [FillCandidate::new("where", 0.5)];
        assert_eq!(mask_fill_select(&c, Some(&five_ws())).unwrap(), "where");
    }

    #[test]
    fn template_validation() {
        assert!(PromptTemplate::parse("What is it?").is_err());
        assert!(PromptTemplate::parse("[E] or [E]?").is_err());
        assert!(PromptTemplate::parse("[E] <e>?").is_err());
        assert!(PromptTemplate::parse("[MASK] [MASK] [E]?").is_err());
        assert_eq!(PromptTemplate::parse("The <e>?").unwrap().kind(), TemplateKind::Fixed);
    }

    #[test]
    fn question_finishing() {
        assert_eq!(finish_question("the  location ??"), "The location?");
        assert_eq!(finish_question("is there a dish"), "Is there a dish?");
        assert_eq!(finish_question("éclair ?"), "Éclair?");
    }

    #[test]
    fn underscore_types_are_normalized() {
        let t = PromptTemplate::parse("What is the <e>?").unwrap();
        let set = render_prompts(&t, &types(&["Restaurant_Name"]), None, None).unwrap();
        assert_eq!(set.prompts[0].question, "What is the restaurant name?");
    }

    #[test]
    fn prompt_set_file_roundtrip() {
        let t = PromptTemplate::parse("The <e>?").unwrap();
        let set = render_prompts(&t, &types(&["LOC", "PER"]), None, None).unwrap();
        let json = set.to_json();
        assert!(json.contains("\"kind\": \"fixed\""));
        assert_eq!(PromptSet::from_json(&json).unwrap(), set);
        let dup = r#"{"template":"x","kind":"fixed","prompts":[{"entity_type":"A","question":"a?"},{"entity_type":"A","question":"b?"}]}"#;
        assert!(PromptSet::from_json(dup).is_err());
    }

    #[test]
    fn cached_filler_lookup() {
        let f = CachedFiller::from_json(r#"{"[MASK] is the location?": [{"token": "Where", "score": 0.8}]}"#).unwrap();
        assert_eq!(f.fill("[MASK] is the location?").unwrap()[0].token, "Where");
        assert!(f.fill("[MASK] is the date?").is_err());
    }
}
