use qaner::convert::{convert_dataset, ConversionMode};
use qaner::corpus::{parse_bio, ColumnOrder, NerDataset, ParseOptions};
use qaner::decode::{accept_answers, nbest_spans, DecodeConfig, Normalization};
use qaner::eval::{evaluate, Predictions};
use qaner::pipeline::scoring_requests;
use qaner::prompt::{render_prompts, FillCandidate, PromptSet, PromptTemplate, FIVE_WS};
use qaner::scoring::{oracle_score, OracleSpec};
use qaner::squad::emit_squad2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

type DemoResult<T> = Result<T, String>;

fn err(e: qaner::Error) -> String {
    format!("{}: {e}", e.category())
}

fn split_list(s: &str) -> Vec<String> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// A JSON object is read as a handcrafted `{type: question}` map; anything
/// else is a pattern.
fn parse_template(template: &str) -> DemoResult<PromptTemplate> {
    let t = template.trim();
    if t.starts_with('{') {
        PromptTemplate::handcrafted_from_json(t).map_err(err)
    } else {
        PromptTemplate::parse(t).map_err(err)
    }
}

fn build_prompts(template: &str, types: &[String], fill: &str, five_ws: bool) -> DemoResult<PromptSet> {
    let template = parse_template(template)?;
    // Candidates are listed best first; scores only need to preserve order.
    let tokens = split_list(fill);
    let n = tokens.len() as f64;
    let candidates: Vec<FillCandidate> = tokens
        .iter()
        .enumerate()
        .map(|(i, t)| FillCandidate::new(t.clone(), (n - i as f64) / n))
        .collect();
    let filler = move |_: &str| Ok(candidates.clone());
    let whitelist: Option<Vec<String>> = five_ws.then(|| FIVE_WS.iter().map(|s| s.to_string()).collect());
    let filler_ref: Option<&dyn qaner::prompt::MaskFiller> = if fill.trim().is_empty() { None } else { Some(&filler) };
    render_prompts(&template, types, filler_ref, whitelist.as_deref()).map_err(err)
}

fn column_order(s: &str) -> DemoResult<ColumnOrder> {
    match s {
        "" | "token_first" => Ok(ColumnOrder::TokenFirst),
        "tag_first" => Ok(ColumnOrder::TagFirst),
        other => Err(format!("config: unknown column order {other:?}")),
    }
}

fn parse(bio: &str, order: &str) -> DemoResult<NerDataset> {
    let options = ParseOptions {
        column_order: column_order(order)?,
        strict: false,
        name: "demo".into(),
    };
    parse_bio(bio, &options).map_err(err)
}

/// `types` is a comma or whitespace separated list. `fill` lists mask
/// candidates best first and is only consulted by `[MASK]` templates.
pub fn prompts(template: &str, types: &str, fill: &str, five_ws: bool) -> DemoResult<String> {
    let types = split_list(types);
    if types.is_empty() {
        return Err("config: no entity types given".into());
    }
    Ok(build_prompts(template, &types, fill, five_ws)?.to_json())
}

/// Returns `{"squad": <SQuAD 2.0 text>, "report": {...}}`.
pub fn convert(bio: &str, order: &str, template: &str, mode: &str) -> DemoResult<String> {
    let mode = match mode {
        "" | "train" => ConversionMode::Train,
        "eval" => ConversionMode::Eval,
        other => return Err(format!("config: unknown mode {other:?}")),
    };
    let dataset = parse(bio, order)?;
    let prompts = build_prompts(template, &dataset.entity_types, "", false)?;
    let (instances, report) = convert_dataset(&dataset, &prompts, mode).map_err(err)?;
    let squad = String::from_utf8(emit_squad2(&instances, &dataset.name)).expect("SQuAD output is UTF-8");
    Ok(json!({ "squad": squad, "report": report }).to_string())
}

#[derive(Debug, Clone)]
pub struct ExploreOptions {
    pub threshold: f64,
    pub n_best: usize,
    /// Uniform noise amplitude added to every oracle logit.
    pub noise: f64,
    pub seed: u64,
    pub normalization: String,
}

/// Scores the corpus with the oracle, perturbs the logits, and decodes with
/// the given settings. Every record lists its n-best candidates and which
/// survived; the result also carries micro P/R/F1 against the gold labels.
pub fn explore(bio: &str, order: &str, opts: &ExploreOptions) -> DemoResult<String> {
    if !(opts.noise.is_finite() && opts.noise >= 0.0) {
        return Err("config: noise must be a non-negative number".into());
    }
    let normalization = match opts.normalization.as_str() {
        "" | "null_contrast" => Normalization::NullContrast,
        "full_softmax" => Normalization::FullSoftmax,
        other => return Err(format!("config: unknown normalization {other:?}")),
    };
    let cfg = DecodeConfig {
        n_best: opts.n_best,
        prob_threshold: opts.threshold,
        normalization,
        ..Default::default()
    };
    cfg.validate().map_err(err)?;
    let dataset = parse(bio, order)?;
    let prompts = build_prompts("What is the [E]?", &dataset.entity_types, "", false)?;
    let (instances, requests) = scoring_requests(&dataset, &prompts).map_err(err)?;
    let spec = OracleSpec::from_instances(&instances);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let mut by_sentence: std::collections::BTreeMap<String, Vec<qaner::decode::DecodedSpan>> = Default::default();
    let mut records = Vec::with_capacity(requests.len());
    for request in &requests {
        let mut record = oracle_score(request, &spec).map_err(err)?;
        if opts.noise > 0.0 {
            for x in record.start_logits.iter_mut().chain(record.end_logits.iter_mut()) {
                *x += rng.random_range(-opts.noise..=opts.noise);
            }
        }
        let candidates = nbest_spans(&record, &cfg).map_err(err)?;
        let accepted = accept_answers(&candidates, &cfg);
        let listed: Vec<_> = candidates
            .iter()
            .map(|c| {
                json!({
                    "surface": c.surface,
                    "char_start": c.char_start,
                    "char_end": c.char_end,
                    "score": c.score,
                    "p_sum": c.p_start + c.p_end,
                    "accepted": accepted.iter().any(|a| a.start_index == c.start_index && a.end_index == c.end_index),
                })
            })
            .collect();
        records.push(json!({
            "qa_id": record.qa_id,
            "sentence_id": record.sentence_id,
            "entity_type": record.entity_type,
            "context": record.context,
            "candidates": listed,
        }));
        by_sentence.entry(record.sentence_id.clone()).or_default().extend(accepted);
    }
    let mut predictions = Predictions::new();
    for (id, spans) in by_sentence {
        let sentence = dataset.sentence(&id).expect("records come from this dataset");
        predictions.insert(id, qaner::convert::spans_to_ner_prediction(sentence, &spans).labels);
    }
    let report = evaluate(&dataset, &predictions).map_err(err)?;
    Ok(json!({
        "micro_precision": report.micro_precision,
        "micro_recall": report.micro_recall,
        "micro_f1": report.micro_f1,
        "records": records,
    })
    .to_string())
}
