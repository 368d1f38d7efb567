//! Entity and triple representations plus exact vector indexes.
//!
//! A triple embedding is the concatenation of the unit-normalized head,
//! relation, and tail embeddings (dimension `3d`); an entity representation
//! is the componentwise mean of its one-hop triple embeddings. Retrieval-side
//! indexes embed verbalized text in the base `d` space instead; the `3d`
//! construction is reserved for clustering.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, TripleKind};
use crate::provider::Embedder;

#[derive(Debug, Clone, PartialEq)]
pub struct EntityRepresentation {
    pub entity_id: String,
    pub vector: Vec<f64>,
    pub neighborhood_size: usize,
}

fn unit_normalize(mut v: Vec<f64>) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in &mut v {
            *x /= norm;
        }
    }
    v
}

/// `[head || relation || tail]`, each component unit-normalized before
/// concatenation.
pub fn triple_embedding(
    head_name: &str,
    relation: &str,
    tail_name: &str,
    embedder: &dyn Embedder,
) -> Result<Vec<f64>> {
    let parts = embedder.embed_batch(&[head_name, relation, tail_name])?;
    let mut out = Vec::with_capacity(3 * embedder.dim());
    for part in parts {
        out.extend(unit_normalize(part));
    }
    Ok(out)
}

/// Componentwise mean of the one-hop triple embeddings, accumulated with
/// compensated (Kahan) summation over triples sorted by id, so the result is
/// independent of insertion order. `member_of` edges are not part of the
/// neighborhood. An isolated entity falls back to
/// `[embed(name) || 0 || 0]`.
pub fn entity_representation(
    entity_id: &str,
    graph: &Graph,
    embedder: &dyn Embedder,
) -> Result<EntityRepresentation> {
    let entity = graph
        .entity(entity_id)
        .ok_or_else(|| Error::EntityNotFound(entity_id.to_string()))?;
    let d = embedder.dim();
    let mut triple_ids: Vec<&String> = graph
        .incident_triples(entity_id)
        .iter()
        .filter(|tid| {
            graph
                .triple(tid)
                .map(|t| t.kind != TripleKind::MemberOf)
                .unwrap_or(false)
        })
        .collect();
    triple_ids.sort_by_key(|tid| tid.parse::<u64>().unwrap_or(u64::MAX));
    triple_ids.dedup();

    if triple_ids.is_empty() {
        let mut vector = unit_normalize(embedder.embed(&entity.name)?);
        vector.resize(3 * d, 0.0);
        return Ok(EntityRepresentation {
            entity_id: entity_id.to_string(),
            vector,
            neighborhood_size: 0,
        });
    }

    let mut sum = vec![0.0f64; 3 * d];
    let mut comp = vec![0.0f64; 3 * d];
    for tid in &triple_ids {
        let t = graph.triple(tid).expect("filtered above");
        let head = &graph.entity(&t.head).expect("referential integrity").name;
        let tail = &graph.entity(&t.tail).expect("referential integrity").name;
        let emb = triple_embedding(head, &t.relation, tail, embedder)?;
        for (i, x) in emb.iter().enumerate() {
            // Kahan compensated accumulation.
            let y = x - comp[i];
            let t_sum = sum[i] + y;
            comp[i] = (t_sum - sum[i]) - y;
            sum[i] = t_sum;
        }
    }
    let n = triple_ids.len() as f64;
    let vector: Vec<f64> = sum.into_iter().map(|x| x / n).collect();
    Ok(EntityRepresentation {
        entity_id: entity_id.to_string(),
        vector,
        neighborhood_size: triple_ids.len(),
    })
}

/// Standard cosine similarity; all-zero vectors compare as 0 by convention.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch(u.len(), v.len()));
    }
    let mut dot = 0.0;
    let mut nu = 0.0;
    let mut nv = 0.0;
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Ok(0.0);
    }
    Ok(dot / (nu.sqrt() * nv.sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexKind {
    Entity,
    Triple,
    Community,
    Keyword,
    Attribute,
}

impl IndexKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            IndexKind::Entity => "entity",
            IndexKind::Triple => "triple",
            IndexKind::Community => "community",
            IndexKind::Keyword => "keyword",
            IndexKind::Attribute => "attribute",
        }
    }

    fn parse(s: &str) -> Option<IndexKind> {
        match s {
            "entity" => Some(IndexKind::Entity),
            "triple" => Some(IndexKind::Triple),
            "community" => Some(IndexKind::Community),
            "keyword" => Some(IndexKind::Keyword),
            "attribute" => Some(IndexKind::Attribute),
            _ => None,
        }
    }
}

/// Exact-search vector index. Every vector has the same dimension; lookups
/// rank by cosine, descending, ties broken by ascending id.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorIndex {
    pub kind: IndexKind,
    dim: usize,
    keys: Vec<String>,
    vectors: Vec<Vec<f64>>,
    by_key: BTreeMap<String, usize>,
}

impl VectorIndex {
    pub fn new(kind: IndexKind, dim: usize) -> VectorIndex {
        VectorIndex {
            kind,
            dim,
            keys: Vec::new(),
            vectors: Vec::new(),
            by_key: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn insert(&mut self, key: &str, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch(vector.len(), self.dim));
        }
        if let Some(&idx) = self.by_key.get(key) {
            self.vectors[idx] = vector;
            return Ok(());
        }
        self.by_key.insert(key.to_string(), self.keys.len());
        self.keys.push(key.to_string());
        self.vectors.push(vector);
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&[f64]> {
        self.by_key.get(key).map(|&i| self.vectors[i].as_slice())
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.keys.iter().map(|k| k.as_str())
    }

    pub fn top_k(&self, query: &[f64], k: usize) -> Result<Vec<(String, f64)>> {
        if k == 0 {
            return Ok(Vec::new());
        }
        let mut scored: Vec<(String, f64)> = Vec::with_capacity(self.keys.len());
        for (key, vector) in self.keys.iter().zip(&self.vectors) {
            scored.push((key.clone(), cosine(query, vector)?));
        }
        scored.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.0.cmp(&b.0))
        });
        scored.truncate(k);
        Ok(scored)
    }

    /// Text persistence: a header line, then one `id v1 v2 ...` line per key.
    /// Floats print in shortest round-trip form, so reload is bit-exact.
    pub fn serialize(&self, dest: &mut dyn Write) -> Result<()> {
        writeln!(dest, "index {} {}", self.kind.as_str(), self.dim)?;
        for (key, vector) in self.keys.iter().zip(&self.vectors) {
            write!(dest, "{key}")?;
            for x in vector {
                write!(dest, " {x}")?;
            }
            writeln!(dest)?;
        }
        Ok(())
    }

    pub fn deserialize(source: &mut dyn Read) -> Result<VectorIndex> {
        let reader = BufReader::new(source);
        let mut lines = reader.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "missing index header".into(),
        })?;
        let header = header?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        let (kind, dim) = match parts.as_slice() {
            ["index", kind, dim] => (
                IndexKind::parse(kind).ok_or(Error::Parse {
                    line: 1,
                    message: format!("unknown index kind '{kind}'"),
                })?,
                dim.parse::<usize>().map_err(|e| Error::Parse {
                    line: 1,
                    message: e.to_string(),
                })?,
            ),
            _ => {
                return Err(Error::Parse {
                    line: 1,
                    message: "malformed index header".into(),
                })
            }
        };
        let mut index = VectorIndex::new(kind, dim);
        for (i, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let key = fields.next().ok_or(Error::Parse {
                line: i + 1,
                message: "missing key".into(),
            })?;
            let vector: Vec<f64> = fields
                .map(|f| {
                    f.parse::<f64>().map_err(|e| Error::Parse {
                        line: i + 1,
                        message: e.to_string(),
                    })
                })
                .collect::<Result<_>>()?;
            if vector.len() != dim {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("expected {dim} values, got {}", vector.len()),
                });
            }
            index.insert(key, vector)?;
        }
        Ok(index)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let mut file = std::fs::File::create(path)?;
        self.serialize(&mut file)
    }

    pub fn load(path: &std::path::Path) -> Result<VectorIndex> {
        let mut file = std::fs::File::open(path)?;
        VectorIndex::deserialize(&mut file)
    }
}
