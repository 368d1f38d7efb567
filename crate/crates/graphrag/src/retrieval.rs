//! Schema-guided query decomposition, four retrieval routes, reciprocal-rank
//! fusion, and the iterative reason/reflect answering agent.
//!
//! A question is decomposed into at most `max_i` routed sub-queries; every
//! sub-query still runs all four routes (entity match, triple match,
//! community filter, DFS path traversal) and fusion arbitrates. The agent
//! loops decompose → retrieve → reflect up to `max_iters` times, carrying a
//! textual history, and finalizes with the mode-specific answer template.
//! When every route of every sub-query comes back empty in reject mode, the
//! agent abstains with [`ABSTENTION`] without calling the answer template.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::embed::cosine;
use crate::error::Result;
use crate::graph::{Graph, TripleKind};
use crate::provider::templates::{
    render_body, ANSWER_OPEN_BODY, ANSWER_REJECT_BODY, TPL_ANSWER_OPEN, TPL_ANSWER_REJECT,
    TPL_DECOMPOSE, TPL_REASON_REFLECT,
};
use crate::provider::{CostReport, Embedder, GenerationRequest, Generator, MergeMode};
use crate::schema::Schema;
use crate::tree::{triple_text, KnowledgeTree};

/// Canonical abstention answer in reject mode.
pub const ABSTENTION: &str = "INSUFFICIENT_EVIDENCE";

/// Reciprocal-rank fusion constant.
pub const RRF_K: f64 = 60.0;

/// Answering mode: open falls back to model knowledge, reject abstains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Open,
    Reject,
}

impl Mode {
    pub fn parse(text: &str) -> Option<Mode> {
        match text.trim().to_ascii_lowercase().as_str() {
            "open" => Some(Mode::Open),
            "reject" => Some(Mode::Reject),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Open => "open",
            Mode::Reject => "reject",
        }
    }
}

/// Primary route tag assigned by the decomposer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Entity,
    Triple,
    Community,
    Path,
}

impl Route {
    pub fn parse(text: &str) -> Option<Route> {
        match text.trim().to_ascii_lowercase().as_str() {
            "entity" => Some(Route::Entity),
            "triple" => Some(Route::Triple),
            "community" => Some(Route::Community),
            "path" => Some(Route::Path),
            _ => None,
        }
    }
}

/// One atomic sub-query with its route and schema label bindings. Bindings
/// naming labels outside the schema are downgraded to `unbound`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubQuery {
    pub text: String,
    pub route: Route,
    pub schema_bindings: Vec<String>,
    pub unbound: Vec<String>,
    pub ordinal: usize,
}

/// One ranked retrieval hit: the item kind, its id, the similarity or fused
/// score, and the supporting text handed to the reasoner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub kind: String,
    pub id: String,
    pub score: f64,
    pub text: String,
}

/// The ranked hits one route produced for one sub-query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteResult {
    pub route: Route,
    pub hits: Vec<Hit>,
    pub cost: CostReport,
}

/// Parsed reflection verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Answer(String),
    Insufficient,
    Refine(String),
}

/// Everything one agent iteration did.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub subqueries: Vec<SubQuery>,
    pub route_results: Vec<RouteResult>,
    pub fused: Vec<Hit>,
    pub reasoning: String,
    pub verdict: Verdict,
}

/// Full record of one answering run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentTrace {
    pub question: String,
    pub mode: Mode,
    pub iterations: Vec<IterationRecord>,
    pub final_answer: String,
    /// The rendered answer prompt when finalization went through the answer
    /// template (or would have, for a soundness abstention).
    pub final_prompt: Option<String>,
    pub total_cost: CostReport,
}

/// Retrieval and agent-loop knobs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrievalParams {
    /// Maximum number of sub-queries per decomposition.
    pub max_i: usize,
    /// Hits kept per route and after fusion.
    pub top_k: usize,
    /// Maximum reason/reflect iterations.
    pub max_iters: usize,
    /// Maximum DFS path length in edges.
    pub max_depth: usize,
    /// Neighbors expanded per node during DFS.
    pub fanout_cap: usize,
}

impl Default for RetrievalParams {
    fn default() -> Self {
        RetrievalParams {
            max_i: 4,
            top_k: 5,
            max_iters: 3,
            max_depth: 5,
            fanout_cap: 8,
        }
    }
}

fn schema_variables(schema: &Schema) -> [(String, String); 3] {
    let join = |set: &std::collections::BTreeSet<String>| {
        set.iter().cloned().collect::<Vec<_>>().join(", ")
    };
    [
        ("entity_types".to_string(), join(&schema.entity_types)),
        ("relation_types".to_string(), join(&schema.relation_types)),
        ("attribute_types".to_string(), join(&schema.attribute_types)),
    ]
}

fn is_schema_label(schema: &Schema, label: &str) -> bool {
    schema.entity_types.contains(label)
        || schema.relation_types.contains(label)
        || schema.attribute_types.contains(label)
}

/// Decomposes a question into at most `max_i` routed sub-queries. Response
/// lines are `route\ttext\tbindings`; unparseable lines are dropped. If
/// nothing parses, a single triple-route sub-query over the full question is
/// returned.
pub fn decompose_query(
    question: &str,
    schema: &Schema,
    generator: &dyn Generator,
    max_i: usize,
    history: &str,
) -> Result<Vec<SubQuery>> {
    let mut variables: BTreeMap<String, String> = schema_variables(schema).into();
    variables.insert("max_subqueries".to_string(), max_i.to_string());
    variables.insert("history".to_string(), history.to_string());
    variables.insert("question".to_string(), question.to_string());
    let response = generator.generate(&GenerationRequest::new(TPL_DECOMPOSE, variables))?;

    let mut subs = Vec::new();
    for line in response.lines() {
        if subs.len() >= max_i {
            break;
        }
        let mut fields = line.split('\t');
        let Some(route) = fields.next().and_then(Route::parse) else {
            continue;
        };
        let Some(text) = fields.next().map(str::trim).filter(|t| !t.is_empty()) else {
            continue;
        };
        let mut schema_bindings = Vec::new();
        let mut unbound = Vec::new();
        for binding in fields.next().unwrap_or("").split(',') {
            let binding = binding.trim();
            if binding.is_empty() {
                continue;
            }
            if is_schema_label(schema, binding) {
                schema_bindings.push(binding.to_string());
            } else {
                unbound.push(binding.to_string());
            }
        }
        subs.push(SubQuery {
            text: text.to_string(),
            route,
            schema_bindings,
            unbound,
            ordinal: subs.len(),
        });
    }
    if subs.is_empty() {
        subs.push(SubQuery {
            text: question.to_string(),
            route: Route::Triple,
            schema_bindings: Vec::new(),
            unbound: Vec::new(),
            ordinal: 0,
        });
    }
    Ok(subs)
}

fn hits_from_index(
    matches: Vec<(String, f64)>,
    kind: &str,
    text_of: impl Fn(&str) -> String,
) -> Vec<Hit> {
    matches
        .into_iter()
        .map(|(id, score)| Hit {
            kind: kind.to_string(),
            text: text_of(&id),
            id,
            score,
        })
        .collect()
}

/// Top-k entities by cosine against the embedded sub-query text. Supporting
/// text is the entity name plus its attribute values.
pub fn entity_match(
    sub: &SubQuery,
    tree: &KnowledgeTree,
    graph: &Graph,
    embedder: &dyn Embedder,
    top_k: usize,
) -> Result<RouteResult> {
    let before = embedder.cost();
    let query = embedder.embed(&sub.text)?;
    let matches = tree.entity_index.top_k(&query, top_k)?;
    let hits = hits_from_index(matches, "entity", |id| match graph.entity(id) {
        Some(e) if e.attributes.is_empty() => e.name.clone(),
        Some(e) => {
            let attrs: Vec<String> = e
                .attributes
                .iter()
                .map(|(k, v)| format!("{k}: {v}"))
                .collect();
            format!("{} ({})", e.name, attrs.join("; "))
        }
        None => id.to_string(),
    });
    Ok(RouteResult {
        route: Route::Entity,
        hits,
        cost: embedder.cost().delta_since(before),
    })
}

/// Top-k entity-relation triples by cosine against the embedded sub-query
/// text. Supporting text is the verbalized triple plus its source chunk.
pub fn triple_match(
    sub: &SubQuery,
    tree: &KnowledgeTree,
    graph: &Graph,
    embedder: &dyn Embedder,
    top_k: usize,
) -> Result<RouteResult> {
    let before = embedder.cost();
    let query = embedder.embed(&sub.text)?;
    let matches = tree.triple_index.top_k(&query, top_k)?;
    let hits = hits_from_index(matches, "triple", |id| {
        let verbal = triple_text(graph, id).unwrap_or_else(|_| id.to_string());
        let chunk = graph
            .triple(id)
            .and_then(|t| graph.chunk(&t.provenance))
            .unwrap_or("");
        if chunk.is_empty() {
            verbal
        } else {
            format!("{verbal} | {}", chunk.trim())
        }
    });
    Ok(RouteResult {
        route: Route::Triple,
        hits,
        cost: embedder.cost().delta_since(before),
    })
}

/// Top-k communities by cosine against their name+description embeddings.
/// Supporting text is the description plus keyword entity names.
pub fn community_filter(
    sub: &SubQuery,
    tree: &KnowledgeTree,
    graph: &Graph,
    embedder: &dyn Embedder,
    top_k: usize,
) -> Result<RouteResult> {
    let before = embedder.cost();
    let query = embedder.embed(&sub.text)?;
    let matches = tree.community_index.top_k(&query, top_k)?;
    let hits = hits_from_index(matches, "community", |id| {
        let Some(c) = tree.communities.iter().find(|c| c.index.to_string() == id) else {
            return id.to_string();
        };
        let keywords: Vec<String> = c
            .keywords
            .iter()
            .filter_map(|k| graph.entity(k).map(|e| e.name.clone()))
            .collect();
        if keywords.is_empty() {
            format!("{}: {}", c.name, c.description)
        } else {
            format!(
                "{}: {} (keywords: {})",
                c.name,
                c.description,
                keywords.join(", ")
            )
        }
    });
    Ok(RouteResult {
        route: Route::Community,
        hits,
        cost: embedder.cost().delta_since(before),
    })
}

/// One simple path found by DFS: visited entities, traversed triple ids, and
/// the mean edge-to-query similarity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraversalPath {
    pub entities: Vec<String>,
    pub triples: Vec<String>,
    pub score: f64,
}

/// Depth-first simple-path enumeration from each seed, following
/// entity-relation and `member_of` edges in both directions. Expansion at
/// each node is capped to the `fanout_cap` incident edges most similar to
/// the query; every path of 1..=max_depth edges is returned.
pub fn dfs_traverse(
    seeds: &[String],
    graph: &Graph,
    query: &[f64],
    embedder: &dyn Embedder,
    max_depth: usize,
    fanout_cap: usize,
) -> Result<Vec<TraversalPath>> {
    // Score every traversable edge against the query once up front.
    let mut edge_ids: Vec<&str> = graph
        .triples()
        .filter(|t| t.kind != TripleKind::Attribute)
        .map(|t| t.id.as_str())
        .collect();
    edge_ids.sort_by_key(|id| id.parse::<u64>().ok());
    let mut edge_scores: BTreeMap<&str, f64> = BTreeMap::new();
    if !edge_ids.is_empty() {
        let texts: Vec<String> = edge_ids
            .iter()
            .map(|id| triple_text(graph, id))
            .collect::<Result<_>>()?;
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        let vectors = embedder.embed_batch(&refs)?;
        for (id, vector) in edge_ids.iter().zip(&vectors) {
            edge_scores.insert(id, cosine(query, vector)?);
        }
    }

    struct Walker<'a> {
        graph: &'a Graph,
        edge_scores: &'a BTreeMap<&'a str, f64>,
        max_depth: usize,
        fanout_cap: usize,
        paths: Vec<TraversalPath>,
    }

    impl Walker<'_> {
        fn expand(
            &mut self,
            entities: &mut Vec<String>,
            triples: &mut Vec<String>,
            score_sum: f64,
        ) {
            if triples.len() >= self.max_depth {
                return;
            }
            let current = entities.last().expect("path has a head").clone();
            let mut next: Vec<(f64, &str, String)> = Vec::new();
            for tid in self.graph.incident_triples(&current) {
                let Some(&score) = self.edge_scores.get(tid.as_str()) else {
                    continue; // attribute edge
                };
                let t = self.graph.triple(tid).expect("incident triple exists");
                let other = if t.head == current { &t.tail } else { &t.head };
                if entities.contains(other) {
                    continue;
                }
                next.push((score, tid, other.clone()));
            }
            next.sort_by(|a, b| {
                b.0.partial_cmp(&a.0)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then_with(|| {
                        let na = a.1.parse::<u64>().unwrap_or(u64::MAX);
                        let nb = b.1.parse::<u64>().unwrap_or(u64::MAX);
                        na.cmp(&nb).then_with(|| a.1.cmp(b.1))
                    })
            });
            next.truncate(self.fanout_cap);
            for (score, tid, other) in next {
                entities.push(other);
                triples.push(tid.to_string());
                let sum = score_sum + score;
                self.paths.push(TraversalPath {
                    entities: entities.clone(),
                    triples: triples.clone(),
                    score: sum / triples.len() as f64,
                });
                self.expand(entities, triples, sum);
                entities.pop();
                triples.pop();
            }
        }
    }

    let mut walker = Walker {
        graph,
        edge_scores: &edge_scores,
        max_depth,
        fanout_cap,
        paths: Vec::new(),
    };
    for seed in seeds {
        if graph.entity(seed).is_none() {
            continue;
        }
        let mut entities = vec![seed.clone()];
        let mut triples = Vec::new();
        walker.expand(&mut entities, &mut triples, 0.0);
    }
    Ok(walker.paths)
}

fn path_label(graph: &Graph, path: &TraversalPath) -> String {
    let edges: Vec<String> = path
        .triples
        .iter()
        .map(|tid| triple_text(graph, tid).unwrap_or_else(|_| tid.clone()))
        .collect();
    edges.join("; ")
}

/// DFS path route: seeds are the top-3 entity matches for the sub-query;
/// returned paths are ranked by mean edge similarity.
pub fn path_route(
    sub: &SubQuery,
    tree: &KnowledgeTree,
    graph: &Graph,
    embedder: &dyn Embedder,
    params: &RetrievalParams,
) -> Result<RouteResult> {
    let before = embedder.cost();
    let query = embedder.embed(&sub.text)?;
    let seeds: Vec<String> = tree
        .entity_index
        .top_k(&query, 3)?
        .into_iter()
        .map(|(id, _)| id)
        .collect();
    let paths = dfs_traverse(
        &seeds,
        graph,
        &query,
        embedder,
        params.max_depth,
        params.fanout_cap,
    )?;
    let mut hits: Vec<Hit> = paths
        .iter()
        .map(|p| Hit {
            kind: "path".to_string(),
            id: p.entities.join("->"),
            score: p.score,
            text: path_label(graph, p),
        })
        .collect();
    hits.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.id.cmp(&b.id))
    });
    hits.dedup_by(|a, b| a.id == b.id);
    hits.truncate(params.top_k);
    Ok(RouteResult {
        route: Route::Path,
        hits,
        cost: embedder.cost().delta_since(before),
    })
}

/// Reciprocal-rank fusion over all route results: each hit contributes
/// `1/(60 + rank)` per route it appears in, duplicates collapse by
/// `(kind, id)`, and the fused list is truncated to `top_k`. The result does
/// not depend on the order the route results are supplied in.
pub fn fuse_results(results: &[RouteResult], top_k: usize) -> Vec<Hit> {
    // Contributions are gathered per key and summed in a canonical order so
    // the result is bitwise independent of the order routes are supplied in.
    let mut fused: BTreeMap<(String, String), Vec<(usize, String)>> = BTreeMap::new();
    for result in results {
        for (rank, hit) in result.hits.iter().enumerate() {
            fused
                .entry((hit.kind.clone(), hit.id.clone()))
                .or_default()
                .push((rank, hit.text.clone()));
        }
    }
    let mut hits: Vec<Hit> = fused
        .into_iter()
        .map(|((kind, id), mut contributions)| {
            contributions.sort();
            let score = contributions
                .iter()
                .map(|(rank, _)| 1.0 / (RRF_K + (rank + 1) as f64))
                .sum();
            let text = contributions.remove(0).1;
            Hit {
                kind,
                id,
                score,
                text,
            }
        })
        .collect();
    hits.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| (&a.kind, &a.id).cmp(&(&b.kind, &b.id)))
    });
    hits.truncate(top_k);
    hits
}

fn run_routes(
    sub: &SubQuery,
    tree: &KnowledgeTree,
    graph: &Graph,
    embedder: &dyn Embedder,
    params: &RetrievalParams,
) -> Result<Vec<RouteResult>> {
    Ok(vec![
        entity_match(sub, tree, graph, embedder, params.top_k)?,
        triple_match(sub, tree, graph, embedder, params.top_k)?,
        community_filter(sub, tree, graph, embedder, params.top_k)?,
        path_route(sub, tree, graph, embedder, params)?,
    ])
}

fn parse_verdict(response: &str) -> Verdict {
    let first = response.lines().next().unwrap_or("").trim();
    if let Some(rest) = first.strip_prefix("answer:") {
        Verdict::Answer(rest.trim().to_string())
    } else if let Some(rest) = first.strip_prefix("refine:") {
        Verdict::Refine(rest.trim().to_string())
    } else {
        // "insufficient" and anything malformed both mean: stop probing.
        Verdict::Insufficient
    }
}

fn context_text(fused: &[Hit]) -> String {
    fused
        .iter()
        .map(|h| h.text.as_str())
        .collect::<Vec<_>>()
        .join("\n")
}

fn answer_template(mode: Mode) -> (&'static str, &'static str) {
    match mode {
        Mode::Open => (TPL_ANSWER_OPEN, ANSWER_OPEN_BODY),
        Mode::Reject => (TPL_ANSWER_REJECT, ANSWER_REJECT_BODY),
    }
}

/// Finalizes through the mode's answer template. In reject mode with no
/// retrieved evidence anywhere, abstains without a provider call; the
/// rendered prompt is still recorded.
fn finalize(
    question: &str,
    context: &str,
    any_hits: bool,
    mode: Mode,
    generator: &dyn Generator,
) -> Result<(String, String)> {
    let (template_id, body) = answer_template(mode);
    let variables: BTreeMap<String, String> = [
        ("query".to_string(), question.to_string()),
        ("context".to_string(), context.to_string()),
    ]
    .into();
    let prompt = render_body(body, &variables);
    if mode == Mode::Reject && !any_hits {
        return Ok((ABSTENTION.to_string(), prompt));
    }
    let response = generator.generate(&GenerationRequest::new(template_id, variables))?;
    Ok((response.trim().to_string(), prompt))
}

struct CostBaseline {
    generator: CostReport,
    embedder: CostReport,
}

fn total_cost(
    baseline: &CostBaseline,
    generator: &dyn Generator,
    embedder: &dyn Embedder,
) -> CostReport {
    generator.cost().delta_since(baseline.generator).merge(
        embedder.cost().delta_since(baseline.embedder),
        MergeMode::Sequential,
    )
}

/// The full agentic loop: decompose, retrieve on all routes, fuse, reflect,
/// and either answer, refine with an updated history, or finalize through
/// the answer template. Returns the answer and the complete trace.
pub fn agent_answer(
    question: &str,
    tree: &KnowledgeTree,
    graph: &Graph,
    schema: &Schema,
    generator: &dyn Generator,
    embedder: &dyn Embedder,
    mode: Mode,
    params: &RetrievalParams,
) -> Result<(String, AgentTrace)> {
    let baseline = CostBaseline {
        generator: generator.cost(),
        embedder: embedder.cost(),
    };
    let mut trace = AgentTrace {
        question: question.to_string(),
        mode,
        iterations: Vec::new(),
        final_answer: String::new(),
        final_prompt: None,
        total_cost: CostReport::default(),
    };
    let mut history = String::new();
    let mut any_hits = false;
    let mut last_context = String::new();

    for _ in 1..=params.max_iters.max(1) {
        let subqueries = decompose_query(question, schema, generator, params.max_i, &history)?;
        let mut route_results = Vec::new();
        for sub in &subqueries {
            route_results.extend(run_routes(sub, tree, graph, embedder, params)?);
        }
        let fused = fuse_results(&route_results, params.top_k);
        any_hits |= !fused.is_empty();
        last_context = context_text(&fused);

        // With nothing retrieved there is no evidence to reflect on.
        let (reasoning, verdict) = if fused.is_empty() {
            (String::new(), Verdict::Insufficient)
        } else {
            let variables: BTreeMap<String, String> = [
                ("question".to_string(), question.to_string()),
                ("history".to_string(), history.clone()),
                ("context".to_string(), last_context.clone()),
            ]
            .into();
            let response =
                generator.generate(&GenerationRequest::new(TPL_REASON_REFLECT, variables))?;
            let verdict = parse_verdict(&response);
            (response, verdict)
        };

        let sub_texts: Vec<&str> = subqueries.iter().map(|s| s.text.as_str()).collect();
        let verdict_note = match &verdict {
            Verdict::Answer(a) => format!("answer: {a}"),
            Verdict::Insufficient => "insufficient".to_string(),
            Verdict::Refine(f) => format!("refine: {f}"),
        };
        if !history.is_empty() {
            history.push('\n');
        }
        history.push_str(&format!(
            "sub-queries: {}; verdict: {verdict_note}",
            sub_texts.join(" | ")
        ));

        trace.iterations.push(IterationRecord {
            subqueries,
            route_results,
            fused,
            reasoning,
            verdict: verdict.clone(),
        });

        match verdict {
            Verdict::Answer(answer) => {
                trace.final_answer = answer.clone();
                trace.total_cost = total_cost(&baseline, generator, embedder);
                return Ok((answer, trace));
            }
            Verdict::Insufficient => break,
            Verdict::Refine(_) => continue,
        }
    }

    let (answer, prompt) = finalize(question, &last_context, any_hits, mode, generator)?;
    trace.final_answer = answer.clone();
    trace.final_prompt = Some(prompt);
    trace.total_cost = total_cost(&baseline, generator, embedder);
    Ok((answer, trace))
}

/// Single-pass variant: one decompose → retrieve → fuse → answer, no
/// reflection loop. The trace always has exactly one iteration.
pub fn answer_no_agent(
    question: &str,
    tree: &KnowledgeTree,
    graph: &Graph,
    schema: &Schema,
    generator: &dyn Generator,
    embedder: &dyn Embedder,
    mode: Mode,
    params: &RetrievalParams,
) -> Result<(String, AgentTrace)> {
    let baseline = CostBaseline {
        generator: generator.cost(),
        embedder: embedder.cost(),
    };
    let subqueries = decompose_query(question, schema, generator, params.max_i, "")?;
    let mut route_results = Vec::new();
    for sub in &subqueries {
        route_results.extend(run_routes(sub, tree, graph, embedder, params)?);
    }
    let fused = fuse_results(&route_results, params.top_k);
    let any_hits = !fused.is_empty();
    let context = context_text(&fused);
    let (answer, prompt) = finalize(question, &context, any_hits, mode, generator)?;
    let trace = AgentTrace {
        question: question.to_string(),
        mode,
        iterations: vec![IterationRecord {
            subqueries,
            route_results,
            fused,
            reasoning: String::new(),
            verdict: Verdict::Answer(answer.clone()),
        }],
        final_answer: answer.clone(),
        final_prompt: Some(prompt),
        total_cost: total_cost(&baseline, generator, embedder),
    };
    Ok((answer, trace))
}
