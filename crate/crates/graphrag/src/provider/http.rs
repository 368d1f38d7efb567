//! HTTP-backed providers for OpenAI-compatible chat and embedding endpoints.
//!
//! 3 attempts with exponential backoff, then a transport error carrying the
//! retry count. Credentials come from an environment variable named in the
//! config, never from the config file itself.

use std::time::{Duration, Instant};

use serde::Deserialize;
use serde_json::json;

use super::cost::{whitespace_tokens, CostReport, CostTracker};
use super::templates::TemplateRegistry;
use super::{Embedder, GenerationRequest, Generator};
use crate::error::{Error, Result};

const MAX_ATTEMPTS: u32 = 3;
const BASE_BACKOFF_MS: u64 = 250;

fn request_with_retry<T>(mut call: impl FnMut() -> std::result::Result<T, String>) -> Result<T> {
    let mut last_err = String::new();
    for attempt in 0..MAX_ATTEMPTS {
        match call() {
            Ok(v) => return Ok(v),
            Err(e) => {
                last_err = e;
                if attempt + 1 < MAX_ATTEMPTS {
                    std::thread::sleep(Duration::from_millis(BASE_BACKOFF_MS << attempt));
                }
            }
        }
    }
    Err(Error::Transport {
        attempts: MAX_ATTEMPTS,
        message: last_err,
    })
}

pub struct HttpGenerator {
    registry: TemplateRegistry,
    client: reqwest::blocking::Client,
    endpoint: String,
    model: String,
    api_key: Option<String>,
    cost: CostTracker,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: String,
}

#[derive(Deserialize)]
struct Usage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

impl HttpGenerator {
    pub fn new(endpoint: &str, model: &str, api_key: Option<String>) -> HttpGenerator {
        HttpGenerator {
            registry: TemplateRegistry::default(),
            client: reqwest::blocking::Client::new(),
            endpoint: endpoint.trim_end_matches('/').to_string(),
            model: model.to_string(),
            api_key,
            cost: CostTracker::default(),
        }
    }
}

impl Generator for HttpGenerator {
    fn generate(&self, request: &GenerationRequest) -> Result<String> {
        let start = Instant::now();
        let prompt = self
            .registry
            .render(&request.template_id, &request.variables)?;
        let body = json!({
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "max_tokens": request.max_output,
            "temperature": 0.0,
        });
        let url = format!("{}/chat/completions", self.endpoint);
        let parsed: ChatResponse = request_with_retry(|| {
            let mut req = self.client.post(&url).json(&body);
            if let Some(key) = &self.api_key {
                req = req.bearer_auth(key);
            }
            let resp = req.send().map_err(|e| e.to_string())?;
            let resp = resp.error_for_status().map_err(|e| e.to_string())?;
            resp.json::<ChatResponse>().map_err(|e| e.to_string())
        })?;
        let text = parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .unwrap_or_default();
        let (pt, ct) = match parsed.usage {
            Some(u) => (u.prompt_tokens, u.completion_tokens),
            None => (whitespace_tokens(&prompt), whitespace_tokens(&text)),
        };
        self.cost.record(pt, ct, start.elapsed().as_secs_f64());
        Ok(text)
    }

    fn cost(&self) -> CostReport {
        self.cost.snapshot()
    }

    fn registry(&self) -> &TemplateRegistry {
        &self.registry
    }
}

pub struct HttpEmbedder {
    client: reqwest::blocking::Client,
    endpoint: String,
    model: String,
    api_key: Option<String>,
    dim: usize,
    cost: CostTracker,
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    embedding: Vec<f64>,
}

impl HttpEmbedder {
    pub fn new(endpoint: &str, model: &str, api_key: Option<String>, dim: usize) -> HttpEmbedder {
        HttpEmbedder {
            client: reqwest::blocking::Client::new(),
            endpoint: endpoint.trim_end_matches('/').to_string(),
            model: model.to_string(),
            api_key,
            dim,
            cost: CostTracker::default(),
        }
    }
}

impl Embedder for HttpEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>> {
        if texts.is_empty() {
            return Err(Error::EmptyInput);
        }
        let start = Instant::now();
        let body = json!({ "model": self.model, "input": texts });
        let url = format!("{}/embeddings", self.endpoint);
        let parsed: EmbeddingResponse = request_with_retry(|| {
            let mut req = self.client.post(&url).json(&body);
            if let Some(key) = &self.api_key {
                req = req.bearer_auth(key);
            }
            let resp = req.send().map_err(|e| e.to_string())?;
            let resp = resp.error_for_status().map_err(|e| e.to_string())?;
            resp.json::<EmbeddingResponse>().map_err(|e| e.to_string())
        })?;
        let vectors: Vec<Vec<f64>> = parsed.data.into_iter().map(|d| d.embedding).collect();
        for v in &vectors {
            if v.len() != self.dim {
                return Err(Error::DimensionMismatch(v.len(), self.dim));
            }
        }
        let tokens: u64 = texts.iter().map(|t| whitespace_tokens(t)).sum();
        self.cost.record(tokens, 0, start.elapsed().as_secs_f64());
        Ok(vectors)
    }

    fn cost(&self) -> CostReport {
        self.cost.snapshot()
    }
}
