//! Pipeline configuration: provider wiring, stage parameters, and artifact
//! paths, loaded from a single JSON file and validated before any work runs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::community::DetectionParams;
use crate::error::{Error, Result};
use crate::extract::ExtractionParams;
use crate::provider::{
    Embedder, Generator, HttpEmbedder, HttpGenerator, ScriptedEmbedder, ScriptedGenerator,
};
use crate::retrieval::RetrievalParams;

/// Which provider backend to construct.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    Scripted,
    Http,
}

/// Generation/embedding backend settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    /// Fixture file for the scripted generator (JSON array of fixtures).
    pub fixtures: Option<PathBuf>,
    /// Base URL for OpenAI-compatible endpoints.
    pub endpoint: Option<String>,
    pub model: String,
    pub embedding_model: String,
    /// Environment variable holding the API key for HTTP providers.
    pub api_key_env: String,
    /// Embedding dimension (scripted embedder and HTTP contract check).
    pub embed_dim: usize,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            kind: ProviderKind::Scripted,
            fixtures: None,
            endpoint: None,
            model: "scripted".to_string(),
            embedding_model: "scripted".to_string(),
            api_key_env: "GRAPHRAG_API_KEY".to_string(),
            embed_dim: 16,
        }
    }
}

/// Input and artifact locations.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// Seed schema JSON.
    pub schema: PathBuf,
    /// Corpus JSONL (one document per line).
    pub corpus: PathBuf,
    /// Directory receiving all persisted artifacts.
    pub output: PathBuf,
    /// Optional evaluation dataset JSONL.
    pub dataset: Option<PathBuf>,
}

/// Full pipeline configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub provider: ProviderConfig,
    pub detection: DetectionParams,
    pub retrieval: RetrievalParams,
    pub extraction: ExtractionParams,
    pub paths: PathsConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 42,
            provider: ProviderConfig::default(),
            detection: DetectionParams::default(),
            retrieval: RetrievalParams::default(),
            extraction: ExtractionParams::default(),
            paths: PathsConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<PipelineConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let config: PipelineConfig = serde_json::from_str(&text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    /// Range validation, run before any stage starts.
    pub fn validate(&self) -> Result<()> {
        self.detection.validate()?;
        if !(0.0..=1.0).contains(&self.extraction.mu) {
            return Err(Error::Config("mu must be within [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.extraction.max_failure_rate) {
            return Err(Error::Config(
                "max_failure_rate must be within [0, 1]".into(),
            ));
        }
        if self.extraction.chunk_size == 0 {
            return Err(Error::Config("chunk_size must be positive".into()));
        }
        if self.extraction.workers == 0 {
            return Err(Error::Config("workers must be positive".into()));
        }
        if self.retrieval.max_depth == 0 {
            return Err(Error::Config("max_depth must be positive".into()));
        }
        if self.retrieval.max_i == 0 {
            return Err(Error::Config("max_i must be positive".into()));
        }
        if self.retrieval.max_iters == 0 {
            return Err(Error::Config("max_iters must be positive".into()));
        }
        if self.retrieval.top_k == 0 {
            return Err(Error::Config("top_k must be positive".into()));
        }
        if self.provider.embed_dim == 0 {
            return Err(Error::Config("embed_dim must be positive".into()));
        }
        Ok(())
    }

    /// Constructs the configured generation backend.
    pub fn build_generator(&self) -> Result<Box<dyn Generator>> {
        match self.provider.kind {
            ProviderKind::Scripted => match &self.provider.fixtures {
                Some(path) => Ok(Box::new(ScriptedGenerator::load(path)?)),
                None => Ok(Box::new(ScriptedGenerator::new())),
            },
            ProviderKind::Http => {
                let endpoint =
                    self.provider.endpoint.as_deref().ok_or_else(|| {
                        Error::Config("http provider requires an endpoint".into())
                    })?;
                let api_key = std::env::var(&self.provider.api_key_env).ok();
                Ok(Box::new(HttpGenerator::new(
                    endpoint,
                    &self.provider.model,
                    api_key,
                )))
            }
        }
    }

    /// Constructs the configured embedding backend. Scripted embeddings are
    /// keyed off the pipeline seed.
    pub fn build_embedder(&self) -> Result<Box<dyn Embedder>> {
        match self.provider.kind {
            ProviderKind::Scripted => Ok(Box::new(ScriptedEmbedder::new(
                self.provider.embed_dim,
                self.seed,
            ))),
            ProviderKind::Http => {
                let endpoint =
                    self.provider.endpoint.as_deref().ok_or_else(|| {
                        Error::Config("http provider requires an endpoint".into())
                    })?;
                let api_key = std::env::var(&self.provider.api_key_env).ok();
                Ok(Box::new(HttpEmbedder::new(
                    endpoint,
                    &self.provider.embedding_model,
                    api_key,
                    self.provider.embed_dim,
                )))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        PipelineConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_out_of_range_values() {
        let mut c = PipelineConfig::default();
        c.detection.lambda = -0.1;
        assert!(c.validate().is_err());

        let mut c = PipelineConfig::default();
        c.detection.epsilon = -1.0;
        assert!(c.validate().is_err());

        let mut c = PipelineConfig::default();
        c.extraction.mu = 1.5;
        assert!(c.validate().is_err());

        let mut c = PipelineConfig::default();
        c.retrieval.max_depth = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn file_roundtrip_and_missing_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        let config = PipelineConfig::default();
        config.save(&path).unwrap();
        let loaded = PipelineConfig::load(&path).unwrap();
        assert_eq!(loaded.seed, config.seed);

        let missing = PipelineConfig::load(&dir.path().join("nope.json"));
        match missing {
            Err(Error::Config(message)) => assert!(message.contains("nope.json")),
            other => panic!("expected config error, got {other:?}"),
        }
    }
}
