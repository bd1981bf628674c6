//! Run configuration, loaded from one JSON file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{parse_bio, ColumnOrder, NerDataset, ParseOptions};
use crate::decode::DecodeConfig;
use crate::error::{Error, Result};
use crate::eval::DevRegime;
use crate::prompt::{render_prompts, CachedFiller, MaskFiller, PromptSet, PromptTemplate, FIVE_WS, HANDCRAFT};

pub const DEFAULT_PATTERN: &str = "What is the [E]?";
pub const ENDPOINT_ENV: &str = "QANER_SCORING_ENDPOINT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusConfig {
    pub path: PathBuf,
    #[serde(default)]
    pub column_order: ColumnOrder,
    #[serde(default)]
    pub strict: bool,
}

impl CorpusConfig {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        CorpusConfig {
            path: path.into(),
            column_order: ColumnOrder::default(),
            strict: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplateConfig {
    /// Pattern with `[E]` (or `<e>`) and optionally `[MASK]`, or `handcraft`.
    pub pattern: Option<String>,
    /// `{entity_type: question}` JSON, used with the `handcraft` pattern.
    pub handcrafted: Option<PathBuf>,
    /// A rendered prompt set file; takes precedence over everything else.
    pub prompt_set: Option<PathBuf>,
    /// Recorded fill-mask results keyed by masked text.
    pub fill_cache: Option<PathBuf>,
    pub filler_endpoint: Option<String>,
    /// Prefer Who/What/When/Where/Why when picking the mask token.
    #[serde(default)]
    pub five_ws: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingConfig {
    pub n_per_type: usize,
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            n_per_type: 10,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoringMode {
    Oracle,
    File,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScoringConfig {
    pub mode: Option<ScoringMode>,
    /// Logits file; `{split}` is replaced by the split index in pipelines.
    pub logits: Option<PathBuf>,
    pub endpoint: Option<String>,
    pub timeout_secs: f64,
    pub retries: usize,
    pub batch_size: usize,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        ScoringConfig {
            mode: None,
            logits: None,
            endpoint: None,
            timeout_secs: 30.0,
            retries: 2,
            batch_size: 64,
        }
    }
}

/// Fine-tuning hyperparameters for the no-dev regime. Carried through to
/// the training bridge; nothing in this crate reads them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            learning_rate: 2e-5,
            batch_size: 16,
            epochs: 4,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub train: Option<CorpusConfig>,
    pub test: Option<CorpusConfig>,
    pub entity_types: Option<Vec<String>>,
    pub template: TemplateConfig,
    pub decode: DecodeConfig,
    pub sampling: SamplingConfig,
    pub dev_regime: DevRegime,
    pub scoring: ScoringConfig,
    pub training: TrainingConfig,
}

fn require_file(what: &str, path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} {} does not exist", path.display())))
    }
}

impl Config {
    pub fn from_json(json: &str) -> Result<Self> {
        serde_json::from_str(json).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Config::from_json(&text)?;
        cfg.resolve_relative_to(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    /// Makes relative paths relative to `base` (the config file's directory).
    pub fn resolve_relative_to(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for c in [self.train.as_mut(), self.test.as_mut()].into_iter().flatten() {
            fix(&mut c.path);
        }
        let t = &mut self.template;
        for p in [t.handcrafted.as_mut(), t.prompt_set.as_mut(), t.fill_cache.as_mut()]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
        if let Some(p) = self.scoring.logits.as_mut() {
            fix(p);
        }
    }

    /// The endpoint after applying the environment override.
    pub fn scoring_endpoint(&self) -> Option<String> {
        std::env::var(ENDPOINT_ENV)
            .ok()
            .filter(|s| !s.is_empty())
            .or_else(|| self.scoring.endpoint.clone())
    }

    /// Checks value bounds and that referenced input files exist.
    pub fn validate(&self) -> Result<()> {
        self.decode.validate()?;
        if self.sampling.n_per_type < 1 {
            return Err(Error::Config("sampling.n_per_type must be at least 1".into()));
        }
        for (what, c) in [("train corpus", &self.train), ("test corpus", &self.test)] {
            if let Some(c) = c {
                require_file(what, &c.path)?;
            }
        }
        let t = &self.template;
        for (what, p) in [
            ("handcrafted map", &t.handcrafted),
            ("prompt set", &t.prompt_set),
            ("fill cache", &t.fill_cache),
        ] {
            if let Some(p) = p {
                require_file(what, p)?;
            }
        }
        if let Some(p) = &self.scoring.logits {
            if !p.to_string_lossy().contains("{split}") {
                require_file("logits file", p)?;
            }
        }
        if self.scoring.timeout_secs.is_nan() || self.scoring.timeout_secs <= 0.0 {
            return Err(Error::Config("scoring.timeout_secs must be positive".into()));
        }
        Ok(())
    }

    /// Fails unless the configured scoring mode has its source.
    pub fn validate_scoring(&self) -> Result<ScoringMode> {
        match self.scoring.mode {
            None => Err(Error::Config("no scoring mode configured (oracle, file or http)".into())),
            Some(ScoringMode::File) if self.scoring.logits.is_none() => {
                Err(Error::Config("scoring mode file needs scoring.logits".into()))
            }
            Some(ScoringMode::Http) if self.scoring_endpoint().is_none() => Err(Error::Config(format!(
                "scoring mode http needs scoring.endpoint or {ENDPOINT_ENV}"
            ))),
            Some(mode) => Ok(mode),
        }
    }

    pub fn load_corpus(&self, corpus: &CorpusConfig) -> Result<NerDataset> {
        load_corpus(corpus, self.entity_types.as_deref())
    }

    /// Resolves the configured template into a prompt set for `entity_types`.
    pub fn build_prompts(&self, entity_types: &[String]) -> Result<PromptSet> {
        let t = &self.template;
        if let Some(path) = &t.prompt_set {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let set = PromptSet::from_json(&text)?;
            if let Some(missing) = entity_types.iter().find(|ty| set.question(ty).is_none()) {
                return Err(Error::MissingPrompt(missing.clone()));
            }
            return Ok(set);
        }
        let pattern = t.pattern.as_deref().unwrap_or(DEFAULT_PATTERN);
        let template = if pattern == HANDCRAFT || (t.pattern.is_none() && t.handcrafted.is_some()) {
            let path = t
                .handcrafted
                .as_ref()
                .ok_or_else(|| Error::Config("handcraft template needs template.handcrafted".into()))?;
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            PromptTemplate::handcrafted_from_json(&text)?
        } else {
            PromptTemplate::parse(pattern)?
        };
        let whitelist: Option<Vec<String>> = t.five_ws.then(|| FIVE_WS.iter().map(|s| s.to_string()).collect());
        let filler = self.mask_filler()?;
        render_prompts(&template, entity_types, filler.as_deref(), whitelist.as_deref())
    }

    fn mask_filler(&self) -> Result<Option<Box<dyn MaskFiller>>> {
        let t = &self.template;
        if let Some(path) = &t.fill_cache {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            return Ok(Some(Box::new(CachedFiller::from_json(&text)?)));
        }
        if let Some(endpoint) = &t.filler_endpoint {
            #[cfg(feature = "http")]
            {
                let timeout = std::time::Duration::from_secs_f64(self.scoring.timeout_secs);
                return Ok(Some(Box::new(crate::scoring::http::HttpMaskFiller::new(
                    endpoint.clone(),
                    timeout,
                    self.scoring.retries,
                ))));
            }
            #[cfg(not(feature = "http"))]
            return Err(Error::Config(format!("filler endpoint {endpoint} needs the http feature")));
        }
        Ok(None)
    }
}

/// Parses a corpus file. The dataset is named after the file stem.
pub fn load_corpus(corpus: &CorpusConfig, entity_types: Option<&[String]>) -> Result<NerDataset> {
    let text = std::fs::read_to_string(&corpus.path).map_err(|e| Error::io(&corpus.path, e))?;
    let name = corpus
        .path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let (dataset, stats) = crate::corpus::parse_bio_with_stats(
        &text,
        &ParseOptions {
            column_order: corpus.column_order,
            strict: corpus.strict,
            name,
        },
    )?;
    if stats.repaired_tags > 0 {
        log::warn!(
            "{}: repaired {} stray I- tags",
            corpus.path.display(),
            stats.repaired_tags
        );
    }
    match entity_types {
        Some(order) => dataset.with_entity_types(order.to_vec()),
        None => Ok(dataset),
    }
}

/// Parses BIO text directly, for callers without files.
pub fn parse_corpus_text(text: &str, column_order: ColumnOrder, name: &str) -> Result<NerDataset> {
    parse_bio(
        text,
        &ParseOptions {
            column_order,
            strict: false,
            name: name.to_string(),
        },
    )
}
