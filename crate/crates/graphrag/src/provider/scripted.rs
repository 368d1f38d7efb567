//! Deterministic scripted providers for offline runs and tests.
//!
//! Generation is served from registered fixtures keyed by template id plus
//! exact variable matches; an unmatched request is a hard fixture-miss error,
//! never a silent fallback. Embeddings come from a seeded hash-to-vector map
//! (identical text, identical vector, across process runs) with optional
//! per-text override vectors for geometric fixtures.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::cost::{whitespace_tokens, CostReport, CostTracker};
use super::templates::TemplateRegistry;
use super::{Embedder, GenerationRequest, Generator};
use crate::error::{Error, Result};

/// A canned response. `when` entries must all match the request's variables
/// exactly; among matching fixtures, the most specific wins (ties go to the
/// earliest registered).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Fixture {
    pub template_id: String,
    #[serde(default)]
    pub when: BTreeMap<String, String>,
    pub response: String,
}

#[derive(Default)]
pub struct ScriptedGenerator {
    registry: TemplateRegistry,
    fixtures: Vec<Fixture>,
    cost: CostTracker,
}

impl ScriptedGenerator {
    pub fn new() -> ScriptedGenerator {
        ScriptedGenerator::default()
    }

    pub fn with_fixtures(fixtures: Vec<Fixture>) -> ScriptedGenerator {
        ScriptedGenerator {
            registry: TemplateRegistry::default(),
            fixtures,
            cost: CostTracker::default(),
        }
    }

    pub fn add_fixture(&mut self, template_id: &str, when: &[(&str, &str)], response: &str) {
        self.fixtures.push(Fixture {
            template_id: template_id.to_string(),
            when: when
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
            response: response.to_string(),
        });
    }

    /// Loads fixtures from a JSON file holding an array of `Fixture` records.
    pub fn load(path: &std::path::Path) -> Result<ScriptedGenerator> {
        let text = std::fs::read_to_string(path)?;
        let fixtures: Vec<Fixture> = serde_json::from_str(&text)?;
        Ok(ScriptedGenerator::with_fixtures(fixtures))
    }
}

impl Generator for ScriptedGenerator {
    fn generate(&self, request: &GenerationRequest) -> Result<String> {
        let start = Instant::now();
        // Render up front so unbound variables and unknown templates fail the
        // same way they would against a real backend.
        let prompt = self
            .registry
            .render(&request.template_id, &request.variables)?;
        let mut best: Option<&Fixture> = None;
        for fixture in &self.fixtures {
            if fixture.template_id != request.template_id {
                continue;
            }
            let matches = fixture
                .when
                .iter()
                .all(|(k, v)| request.variables.get(k) == Some(v));
            if !matches {
                continue;
            }
            if best.map_or(true, |b| fixture.when.len() > b.when.len()) {
                best = Some(fixture);
            }
        }
        let fixture = best.ok_or_else(|| Error::FixtureMiss {
            template_id: request.template_id.clone(),
        })?;
        self.cost.record(
            whitespace_tokens(&prompt),
            whitespace_tokens(&fixture.response),
            start.elapsed().as_secs_f64(),
        );
        Ok(fixture.response.clone())
    }

    fn cost(&self) -> CostReport {
        self.cost.snapshot()
    }

    fn registry(&self) -> &TemplateRegistry {
        &self.registry
    }
}

pub struct ScriptedEmbedder {
    dim: usize,
    seed: u64,
    overrides: BTreeMap<String, Vec<f64>>,
    cost: CostTracker,
}

impl ScriptedEmbedder {
    pub fn new(dim: usize, seed: u64) -> ScriptedEmbedder {
        ScriptedEmbedder {
            dim,
            seed,
            overrides: BTreeMap::new(),
            cost: CostTracker::default(),
        }
    }

    /// Pins the vector returned for an exact text, e.g. to plant orthogonal
    /// cluster directions. The vector must have the embedder's dimension.
    pub fn set_override(&mut self, text: &str, vector: Vec<f64>) {
        assert_eq!(vector.len(), self.dim, "override dimension mismatch");
        self.overrides.insert(text.to_string(), vector);
    }

    fn hash_vector(&self, text: &str) -> Vec<f64> {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update(text.as_bytes());
        let digest: [u8; 32] = hasher.finalize().into();
        let mut rng = ChaCha8Rng::from_seed(digest);
        let mut v: Vec<f64> = (0..self.dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            for x in &mut v {
                *x /= norm;
            }
        }
        v
    }
}

impl Embedder for ScriptedEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>> {
        if texts.is_empty() {
            return Err(Error::EmptyInput);
        }
        let start = Instant::now();
        let out: Vec<Vec<f64>> = texts
            .iter()
            .map(|t| {
                self.overrides
                    .get(*t)
                    .cloned()
                    .unwrap_or_else(|| self.hash_vector(t))
            })
            .collect();
        let tokens: u64 = texts.iter().map(|t| whitespace_tokens(t)).sum();
        self.cost.record(tokens, 0, start.elapsed().as_secs_f64());
        Ok(out)
    }

    fn cost(&self) -> CostReport {
        self.cost.snapshot()
    }
}
