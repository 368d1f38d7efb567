//! Schema-bounded corpus-to-graph extraction.
//!
//! Documents are split into sentence-snapped fixed-budget chunks, each chunk
//! goes through the extraction prompt, and the tab-separated response lines
//! are validated against the schema before entering the graph. Lines that
//! propose labels outside the schema become expansion candidates; after the
//! first pass the pooled candidates are threshold-gated into the schema and
//! the chunks that produced diverted lines get one bounded re-extraction.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::graph::{Graph, HAS_ATTRIBUTE};
use crate::parallel::ordered_map;
use crate::provider::templates::TPL_EXTRACT;
use crate::provider::{CostReport, GenerationRequest, Generator};
use crate::schema::{
    CandidateKind, ExpansionCandidate, Schema, TailConstraint, Validation, Violation,
};

/// One source document to extract from.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
}

/// Loads a JSONL corpus: one `{"id", "text"}` record per line.
pub fn load_corpus(path: &std::path::Path) -> Result<Vec<Document>> {
    let text = std::fs::read_to_string(path)?;
    let mut documents = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        documents.push(doc);
    }
    Ok(documents)
}

/// Writes a JSONL corpus, one record per line.
pub fn save_corpus(documents: &[Document], path: &std::path::Path) -> Result<()> {
    let mut out = String::new();
    for doc in documents {
        out.push_str(&serde_json::to_string(doc)?);
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// One extraction unit with a stable id of the form `{doc}:{n}`.
#[derive(Debug, Clone)]
pub struct Chunk {
    pub id: String,
    pub text: String,
}

/// An accepted entity-relation fact from one response line.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedTriple {
    pub head: String,
    pub head_etype: String,
    pub relation: String,
    pub tail: String,
    pub tail_etype: String,
    pub confidence: f64,
}

/// An accepted attribute fact from one response line.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedAttribute {
    pub entity: String,
    pub entity_etype: String,
    pub attr_key: String,
    pub value: String,
    pub confidence: f64,
}

/// Everything one chunk contributed: validated facts, diverted expansion
/// candidates, and a dropped-line counter for garbage.
#[derive(Debug, Clone, Default)]
pub struct ExtractionOutput {
    pub chunk_id: String,
    pub triples: Vec<ParsedTriple>,
    pub attributes: Vec<ParsedAttribute>,
    pub candidates: Vec<ExpansionCandidate>,
    pub dropped_lines: usize,
}

impl ExtractionOutput {
    /// Whether any line was diverted to an expansion candidate.
    pub fn diverted(&self) -> bool {
        !self.candidates.is_empty()
    }
}

/// Knobs for corpus extraction.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct ExtractionParams {
    /// Character budget per chunk before sentence snapping.
    pub chunk_size: usize,
    /// Worker-pool size for chunk extraction.
    pub workers: usize,
    /// Confidence threshold for schema expansion.
    pub mu: f64,
    /// Distinct-chunk support threshold for schema expansion.
    pub min_support: usize,
    /// Re-extract diverted chunks once after an accepted expansion.
    pub reextract: bool,
    /// Abort when the failed-chunk fraction exceeds this.
    pub max_failure_rate: f64,
}

impl Default for ExtractionParams {
    fn default() -> Self {
        ExtractionParams {
            chunk_size: 1200,
            workers: 1,
            mu: 0.8,
            min_support: 2,
            reextract: true,
            max_failure_rate: 0.5,
        }
    }
}

fn is_sentence_end(c: char) -> bool {
    matches!(c, '.' | '!' | '?' | '\n')
}

/// Splits a document into chunks of at most `chunk_size` characters, snapping
/// each cut back to the latest sentence boundary inside the window when one
/// exists. Chunk ids are `{doc}:{n}` in document order; whitespace-only
/// chunks are skipped.
pub fn chunk_document(doc_id: &str, text: &str, chunk_size: usize) -> Vec<Chunk> {
    let chars: Vec<char> = text.chars().collect();
    let mut chunks = Vec::new();
    let mut start = 0;
    let mut n = 0;
    while start < chars.len() {
        let window_end = (start + chunk_size.max(1)).min(chars.len());
        let mut end = window_end;
        if window_end < chars.len() {
            if let Some(cut) = (start..window_end)
                .rev()
                .find(|&i| is_sentence_end(chars[i]))
            {
                end = cut + 1;
            }
        }
        let piece: String = chars[start..end].iter().collect();
        if !piece.trim().is_empty() {
            chunks.push(Chunk {
                id: format!("{doc_id}:{n}"),
                text: piece,
            });
            n += 1;
        }
        start = end;
    }
    chunks
}

fn parse_confidence(field: &str) -> Option<f64> {
    field.trim().parse::<f64>().ok().filter(|c| c.is_finite())
}

fn divert(candidates: &mut Vec<ExpansionCandidate>, violation: Violation, confidence: f64) {
    let (kind, label) = match violation {
        Violation::UnknownEntityType(label) => (CandidateKind::EntityType, label),
        Violation::UnknownRelation(label) => (CandidateKind::RelationType, label),
        Violation::UnknownAttributeType(label) => (CandidateKind::AttributeType, label),
    };
    candidates.push(ExpansionCandidate {
        kind,
        label,
        confidence,
        support: 1,
    });
}

/// Runs the extraction prompt for one chunk and parses the response.
///
/// Response grammar is one fact per line, tab-separated:
/// `TRIPLE\thead\thead_type\trelation\ttail\ttail_type\tconfidence` or
/// `ATTR\tentity\tentity_type\tattribute_key\tvalue\tconfidence`. Lines that
/// fail schema validation are diverted to expansion candidates carrying the
/// unknown label; malformed lines are counted and dropped. A whitespace-only
/// chunk produces an empty output without calling the provider.
pub fn extract_chunk(
    chunk: &Chunk,
    schema: &Schema,
    generator: &dyn Generator,
) -> Result<ExtractionOutput> {
    let mut out = ExtractionOutput {
        chunk_id: chunk.id.clone(),
        ..ExtractionOutput::default()
    };
    if chunk.text.trim().is_empty() {
        return Ok(out);
    }
    let join = |set: &BTreeSet<String>| set.iter().cloned().collect::<Vec<_>>().join(", ");
    let variables: BTreeMap<String, String> = [
        ("entity_types".to_string(), join(&schema.entity_types)),
        ("relation_types".to_string(), join(&schema.relation_types)),
        ("attribute_types".to_string(), join(&schema.attribute_types)),
        ("chunk".to_string(), chunk.text.clone()),
    ]
    .into();
    let response = generator.generate(&GenerationRequest::new(TPL_EXTRACT, variables))?;
    for line in response.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        match fields.as_slice() {
            ["TRIPLE", head, head_etype, relation, tail, tail_etype, conf] => {
                let Some(confidence) = parse_confidence(conf) else {
                    out.dropped_lines += 1;
                    continue;
                };
                if head.trim().is_empty() || tail.trim().is_empty() {
                    out.dropped_lines += 1;
                    continue;
                }
                match schema.validate_triple(
                    head_etype,
                    relation,
                    TailConstraint::Entity(tail_etype),
                ) {
                    Validation::Accept => out.triples.push(ParsedTriple {
                        head: head.to_string(),
                        head_etype: head_etype.to_string(),
                        relation: relation.to_string(),
                        tail: tail.to_string(),
                        tail_etype: tail_etype.to_string(),
                        confidence,
                    }),
                    Validation::Reject(violation) => {
                        divert(&mut out.candidates, violation, confidence)
                    }
                }
            }
            ["ATTR", entity, entity_etype, attr_key, value, conf] => {
                let Some(confidence) = parse_confidence(conf) else {
                    out.dropped_lines += 1;
                    continue;
                };
                if entity.trim().is_empty() || value.trim().is_empty() {
                    out.dropped_lines += 1;
                    continue;
                }
                match schema.validate_triple(
                    entity_etype,
                    HAS_ATTRIBUTE,
                    TailConstraint::Attribute(attr_key),
                ) {
                    Validation::Accept => out.attributes.push(ParsedAttribute {
                        entity: entity.to_string(),
                        entity_etype: entity_etype.to_string(),
                        attr_key: attr_key.to_string(),
                        value: value.to_string(),
                        confidence,
                    }),
                    Validation::Reject(violation) => {
                        divert(&mut out.candidates, violation, confidence)
                    }
                }
            }
            _ => out.dropped_lines += 1,
        }
    }
    Ok(out)
}

fn merge_output(graph: &mut Graph, chunk: &Chunk, output: &ExtractionOutput) -> Result<()> {
    graph.add_chunk(&chunk.id, &chunk.text);
    for triple in &output.triples {
        let head = graph.upsert_entity(&triple.head, &triple.head_etype);
        let tail = graph.upsert_entity(&triple.tail, &triple.tail_etype);
        graph.add_triple(&head, &triple.relation, &tail, &output.chunk_id)?;
    }
    for attr in &output.attributes {
        let entity = graph.upsert_entity(&attr.entity, &attr.entity_etype);
        graph.add_attribute(&entity, &attr.attr_key, &attr.value, &output.chunk_id)?;
    }
    Ok(())
}

fn run_pass(
    chunks: &[Chunk],
    schema: &Schema,
    generator: &dyn Generator,
    workers: usize,
    max_failure_rate: f64,
    failed: &mut usize,
    total: &mut usize,
) -> Result<Vec<(usize, ExtractionOutput)>> {
    let indexed: Vec<usize> = (0..chunks.len()).collect();
    let results = ordered_map(indexed, workers, |&i| {
        extract_chunk(&chunks[i], schema, generator).map(|out| (i, out))
    });
    *total += chunks.len();
    let mut outputs = Vec::new();
    for result in results {
        match result {
            Ok(pair) => outputs.push(pair),
            Err(_) => *failed += 1,
        }
    }
    if *total > 0 && *failed as f64 / *total as f64 > max_failure_rate {
        return Err(Error::FailureRate {
            failed: *failed,
            total: *total,
        });
    }
    Ok(outputs)
}

/// Pools per-chunk candidates: confidence is the maximum reported for the
/// label, support is the number of distinct chunks proposing it.
fn pool_candidates(outputs: &[(usize, ExtractionOutput)]) -> Vec<ExpansionCandidate> {
    let mut pooled: BTreeMap<(CandidateKind, String), (f64, BTreeSet<String>)> = BTreeMap::new();
    for (_, output) in outputs {
        for cand in &output.candidates {
            let entry = pooled
                .entry((cand.kind, cand.label.clone()))
                .or_insert((cand.confidence, BTreeSet::new()));
            entry.0 = entry.0.max(cand.confidence);
            entry.1.insert(output.chunk_id.clone());
        }
    }
    pooled
        .into_iter()
        .map(|((kind, label), (confidence, chunks))| ExpansionCandidate {
            kind,
            label,
            confidence,
            support: chunks.len(),
        })
        .collect()
}

/// Extracts a whole corpus into a graph: chunking, parallel per-chunk
/// extraction, serial merge in chunk order, threshold-gated schema expansion,
/// and one bounded re-extraction of diverted chunks when the schema grew.
/// Returns the graph, the final schema, and the extraction cost delta.
pub fn extract_corpus(
    documents: &[Document],
    seed_schema: &Schema,
    generator: &dyn Generator,
    params: &ExtractionParams,
) -> Result<(Graph, Schema, CostReport)> {
    if documents.is_empty() {
        return Err(Error::EmptyInput);
    }
    let before = generator.cost();
    let mut chunks = Vec::new();
    for doc in documents {
        chunks.extend(chunk_document(&doc.id, &doc.text, params.chunk_size));
    }
    let mut failed = 0;
    let mut total = 0;
    let outputs = run_pass(
        &chunks,
        seed_schema,
        generator,
        params.workers,
        params.max_failure_rate,
        &mut failed,
        &mut total,
    )?;

    let mut graph = Graph::new();
    for (i, output) in &outputs {
        merge_output(&mut graph, &chunks[*i], output)?;
    }

    let pooled = pool_candidates(&outputs);
    let (final_schema, accepted) =
        seed_schema.apply_expansion(&pooled, params.mu, params.min_support);

    if !accepted.is_empty() && params.reextract {
        let diverted: Vec<Chunk> = outputs
            .iter()
            .filter(|(_, out)| out.diverted())
            .map(|(i, _)| chunks[*i].clone())
            .collect();
        let second = run_pass(
            &diverted,
            &final_schema,
            generator,
            params.workers,
            params.max_failure_rate,
            &mut failed,
            &mut total,
        )?;
        for (i, output) in &second {
            merge_output(&mut graph, &diverted[*i], output)?;
        }
    }

    graph.check_integrity()?;
    let cost = generator.cost().delta_since(before);
    Ok((graph, final_schema, cost))
}
