//! Uniform contracts for text-generation and embedding backends.
//!
//! Two implementations ship: an HTTP-backed client for OpenAI-compatible
//! endpoints and a deterministic scripted provider for offline runs. Both
//! accumulate token/time costs behind a race-free tracker, so a whole
//! pipeline run with scripted providers is bit-reproducible.

mod cost;
mod http;
mod scripted;
pub mod templates;

use std::collections::BTreeMap;

pub use cost::{whitespace_tokens, CostReport, CostTracker, MergeMode};
pub use http::{HttpEmbedder, HttpGenerator};
pub use scripted::{Fixture, ScriptedEmbedder, ScriptedGenerator};
pub use templates::TemplateRegistry;

use crate::error::Result;

/// One generation call: a registered template id plus its variable bindings.
#[derive(Debug, Clone)]
pub struct GenerationRequest {
    pub template_id: String,
    pub variables: BTreeMap<String, String>,
    pub max_output: usize,
}

impl GenerationRequest {
    pub fn new(template_id: &str, variables: BTreeMap<String, String>) -> GenerationRequest {
        GenerationRequest {
            template_id: template_id.to_string(),
            variables,
            max_output: 1024,
        }
    }
}

/// Text-generation backend. Must be safe for concurrent calls.
pub trait Generator: Send + Sync {
    fn generate(&self, request: &GenerationRequest) -> Result<String>;
    fn cost(&self) -> CostReport;
    fn registry(&self) -> &TemplateRegistry;
}

/// Embedding backend with a fixed output dimension.
pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;
    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>>;
    fn cost(&self) -> CostReport;

    fn embed(&self, text: &str) -> Result<Vec<f64>> {
        Ok(self
            .embed_batch(&[text])?
            .pop()
            .expect("one output per input"))
    }
}
