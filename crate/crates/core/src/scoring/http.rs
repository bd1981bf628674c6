//! Blocking HTTP clients for the `/score` and `/fill` endpoints.

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{join_by_qa_id, Scorer, ScoringRequest};
use crate::decode::LogitRecord;
use crate::error::{Error, Result};
use crate::prompt::{FillCandidate, MaskFiller};

#[derive(Serialize)]
struct ScoreBody<'a> {
    requests: &'a [ScoringRequest],
}

#[derive(Deserialize)]
struct ScoreResponse {
    records: Vec<LogitRecord>,
}

#[derive(Serialize)]
struct FillBody<'a> {
    text: &'a str,
}

#[derive(Deserialize)]
struct FillResponse {
    candidates: Vec<FillCandidate>,
}

#[derive(Debug, Clone)]
struct Client {
    agent: ureq::Agent,
    retries: usize,
}

impl Client {
    fn new(timeout: Duration, retries: usize) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Client { agent, retries }
    }

    /// POSTs `body`, retrying transport failures and 5xx responses.
    fn post<B: Serialize, T: DeserializeOwned>(&self, url: &str, body: &B) -> Result<T> {
        let attempts = self.retries + 1;
        let mut last_error = String::new();
        for attempt in 1..=attempts {
            match self.agent.post(url).send_json(body) {
                Ok(mut resp) => {
                    let status = resp.status().as_u16();
                    if status >= 500 {
                        last_error = format!("{url} returned HTTP {status}");
                    } else if status >= 400 {
                        let text = resp.body_mut().read_to_string().unwrap_or_default();
                        return Err(Error::Protocol(format!("{url} returned HTTP {status}: {text}")));
                    } else {
                        return resp
                            .body_mut()
                            .read_json::<T>()
                            .map_err(|e| Error::Protocol(format!("{url}: malformed response: {e}")));
                    }
                }
                Err(e) => last_error = format!("{url}: {e}"),
            }
            log::warn!("attempt {attempt}/{attempts} failed: {last_error}");
            if attempt < attempts {
                std::thread::sleep(Duration::from_millis(25 * attempt as u64));
            }
        }
        Err(Error::Retriable {
            attempts,
            message: last_error,
        })
    }
}

fn endpoint_url(endpoint: &str, path: &str) -> String {
    format!("{}/{path}", endpoint.trim_end_matches('/'))
}

/// Scores one batch with a single POST to `{endpoint}/score`. The response
/// is joined back to the requests by qa id.
pub fn http_score(
    batch: &[ScoringRequest],
    endpoint: &str,
    timeout: Duration,
    retries: usize,
) -> Result<Vec<LogitRecord>> {
    score_with(&Client::new(timeout, retries), batch, endpoint)
}

fn score_with(client: &Client, batch: &[ScoringRequest], endpoint: &str) -> Result<Vec<LogitRecord>> {
    if batch.is_empty() {
        return Ok(Vec::new());
    }
    let resp: ScoreResponse = client.post(&endpoint_url(endpoint, "score"), &ScoreBody { requests: batch })?;
    for r in &resp.records {
        r.validate()?;
    }
    join_by_qa_id(batch, resp.records)
}

/// Splits work into batches and keeps up to `concurrency` requests in
/// flight. Output order always matches input order.
#[derive(Debug, Clone)]
pub struct HttpScorer {
    endpoint: String,
    client: Client,
    batch_size: usize,
    concurrency: usize,
}

impl HttpScorer {
    pub fn new(endpoint: impl Into<String>, timeout: Duration, retries: usize) -> Self {
        HttpScorer {
            endpoint: endpoint.into(),
            client: Client::new(timeout, retries),
            batch_size: 64,
            concurrency: 1,
        }
    }

    pub fn with_batching(mut self, batch_size: usize, concurrency: usize) -> Self {
        self.batch_size = batch_size.max(1);
        self.concurrency = concurrency.max(1);
        self
    }
}

impl Scorer for HttpScorer {
    fn score(&self, batch: &[ScoringRequest]) -> Result<Vec<LogitRecord>> {
        let chunks: Vec<&[ScoringRequest]> = batch.chunks(self.batch_size).collect();
        let mut out = Vec::with_capacity(batch.len());
        for wave in chunks.chunks(self.concurrency) {
            let results: Vec<Result<Vec<LogitRecord>>> = std::thread::scope(|scope| {
                let handles: Vec<_> = wave
                    .iter()
                    .map(|chunk| scope.spawn(|| score_with(&self.client, chunk, &self.endpoint)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("scoring thread panicked"))
                    .collect()
            });
            for r in results {
                out.extend(r?);
            }
        }
        Ok(out)
    }
}

/// Fill-mask over `POST {endpoint}/fill`.
#[derive(Debug, Clone)]
pub struct HttpMaskFiller {
    endpoint: String,
    client: Client,
}

impl HttpMaskFiller {
    pub fn new(endpoint: impl Into<String>, timeout: Duration, retries: usize) -> Self {
        HttpMaskFiller {
            endpoint: endpoint.into(),
            client: Client::new(timeout, retries),
        }
    }
}

impl MaskFiller for HttpMaskFiller {
    fn fill(&self, text_with_mask: &str) -> Result<Vec<FillCandidate>> {
        let resp: FillResponse = self
            .client
            .post(&endpoint_url(&self.endpoint, "fill"), &FillBody { text: text_with_mask })
            .map_err(|e| Error::MaskFill(e.to_string()))?;
        Ok(resp.candidates)
    }
}
