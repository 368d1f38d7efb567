//! Command orchestration: build, query, eval, and anonymize, each wiring
//! configured providers through the pipeline stages and persisting artifacts
//! under the configured output directory.

use std::path::{Path, PathBuf};

use crate::community::detect_communities;
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::evaluate::{
    anonymize_corpus, load_dataset, run_benchmark, AnonymizationDictionary, EvalReport,
};
use crate::extract::{extract_corpus, load_corpus, save_corpus, ExtractionParams};
use crate::graph::Graph;
use crate::provider::{CostReport, MergeMode};
use crate::retrieval::{agent_answer, answer_no_agent, AgentTrace, Mode};
use crate::schema::Schema;
use crate::tree::KnowledgeTree;

fn require_file(path: &Path, what: &str) -> Result<()> {
    if !path.is_file() {
        return Err(Error::Config(format!(
            "{what} not found at {}",
            path.display()
        )));
    }
    Ok(())
}

fn graph_path(config: &PipelineConfig) -> PathBuf {
    config.paths.output.join("graph.jsonl")
}

fn tree_dir(config: &PipelineConfig) -> PathBuf {
    config.paths.output.join("tree")
}

fn schema_path(config: &PipelineConfig) -> PathBuf {
    config.paths.output.join("schema.json")
}

/// Extracts the corpus, detects communities, builds the knowledge tree, and
/// persists graph, tree, indexes, and final schema. Returns the total
/// provider cost of the build.
pub fn cmd_build(config: &PipelineConfig) -> Result<CostReport> {
    config.validate()?;
    require_file(&config.paths.schema, "seed schema")?;
    require_file(&config.paths.corpus, "corpus")?;
    let generator = config.build_generator()?;
    let embedder = config.build_embedder()?;
    let gen_before = generator.cost();
    let emb_before = embedder.cost();

    let seed_schema = Schema::load(&config.paths.schema)?;
    let documents = load_corpus(&config.paths.corpus)?;
    let (mut graph, final_schema, _) = extract_corpus(
        &documents,
        &seed_schema,
        generator.as_ref(),
        &config.extraction,
    )
    .map_err(|e| Error::stage("extract", e))?;

    let communities = detect_communities(&graph, embedder.as_ref(), &config.detection)
        .map_err(|e| Error::stage("detect", e))?;
    let tree = crate::tree::build_tree(
        &mut graph,
        &communities,
        generator.as_ref(),
        embedder.as_ref(),
        &config.detection,
    )
    .map_err(|e| Error::stage("tree", e))?;

    std::fs::create_dir_all(&config.paths.output)?;
    graph
        .save(&graph_path(config))
        .and_then(|()| tree.save(&tree_dir(config)))
        .and_then(|()| final_schema.save(&schema_path(config)))
        .map_err(|e| Error::stage("persist", e))?;

    Ok(generator.cost().delta_since(gen_before).merge(
        embedder.cost().delta_since(emb_before),
        MergeMode::Sequential,
    ))
}

fn load_artifacts(config: &PipelineConfig) -> Result<(Graph, KnowledgeTree, Schema)> {
    let graph_file = graph_path(config);
    if !graph_file.is_file() {
        return Err(Error::Config(format!(
            "no built graph at {}; run build first",
            graph_file.display()
        )));
    }
    let graph = Graph::load(&graph_file)?;
    let tree = KnowledgeTree::load(&tree_dir(config))?;
    let schema = Schema::load(&schema_path(config))?;
    Ok((graph, tree, schema))
}

/// Answers one question over the built artifacts. With `trace_path` set the
/// full agent trace is written as JSON.
pub fn cmd_query(
    config: &PipelineConfig,
    question: &str,
    mode: Mode,
    agent: bool,
    trace_path: Option<&Path>,
) -> Result<(String, AgentTrace)> {
    config.validate()?;
    let (graph, tree, schema) = load_artifacts(config)?;
    let generator = config.build_generator()?;
    let embedder = config.build_embedder()?;
    let (answer, trace) = if agent {
        agent_answer(
            question,
            &tree,
            &graph,
            &schema,
            generator.as_ref(),
            embedder.as_ref(),
            mode,
            &config.retrieval,
        )?
    } else {
        answer_no_agent(
            question,
            &tree,
            &graph,
            &schema,
            generator.as_ref(),
            embedder.as_ref(),
            mode,
            &config.retrieval,
        )?
    };
    if let Some(path) = trace_path {
        let text = serde_json::to_string_pretty(&trace)?;
        std::fs::write(path, text + "\n")?;
    }
    Ok((answer, trace))
}

/// Runs the benchmark over a dataset and writes the report next to the other
/// artifacts (or to `out`).
pub fn cmd_eval(
    config: &PipelineConfig,
    dataset_path: &Path,
    mode: Mode,
    agent: bool,
    out: Option<&Path>,
) -> Result<EvalReport> {
    config.validate()?;
    require_file(dataset_path, "dataset")?;
    let (graph, tree, schema) = load_artifacts(config)?;
    let generator = config.build_generator()?;
    let embedder = config.build_embedder()?;
    let dataset = load_dataset(dataset_path)?;
    let report = run_benchmark(
        &dataset,
        &tree,
        &graph,
        &schema,
        generator.as_ref(),
        embedder.as_ref(),
        mode,
        agent,
        &config.retrieval,
    )?;
    let default_out = config.paths.output.join("eval_report.json");
    let out = out.unwrap_or(&default_out);
    if let Some(parent) = out.parent() {
        std::fs::create_dir_all(parent)?;
    }
    report.save(out)?;
    Ok(report)
}

/// Builds an anonymization dictionary by running persons/locations-only
/// extraction over the corpus and assigning placeholders in first-occurrence
/// order.
pub fn build_dictionary(
    config: &PipelineConfig,
    documents: &[crate::extract::Document],
) -> Result<AnonymizationDictionary> {
    let generator = config.build_generator()?;
    let schema = Schema::new(
        ["PERSON".to_string(), "LOCATION".to_string()],
        ["related_to".to_string()],
        ["alias".to_string()],
    )?;
    let params = ExtractionParams {
        reextract: false,
        ..config.extraction.clone()
    };
    let (graph, _, _) = extract_corpus(documents, &schema, generator.as_ref(), &params)?;
    let mut dict = AnonymizationDictionary::new();
    let mut counters: std::collections::BTreeMap<String, usize> = Default::default();
    let mut ids: Vec<&str> = graph.entities().map(|e| e.id.as_str()).collect();
    ids.sort_by_key(|id| id.parse::<u64>().ok());
    for id in ids {
        let entity = graph.entity(id).expect("listed above");
        if entity.etype != "PERSON" && entity.etype != "LOCATION" {
            continue;
        }
        let counter = counters.entry(entity.etype.clone()).or_insert(0);
        dict.insert(&entity.name, &format!("{}#{counter}", entity.etype))?;
        *counter += 1;
    }
    Ok(dict)
}

/// Anonymizes a corpus with a supplied or freshly built dictionary; writes
/// the anonymized corpus and the dictionary, returning the replacement count
/// and dictionary size.
pub fn cmd_anonymize(
    config: &PipelineConfig,
    corpus_path: &Path,
    dictionary_path: Option<&Path>,
    out_dir: Option<&Path>,
) -> Result<(usize, usize)> {
    config.validate()?;
    require_file(corpus_path, "corpus")?;
    let documents = load_corpus(corpus_path)?;
    let dict = match dictionary_path {
        Some(path) => {
            require_file(path, "dictionary")?;
            AnonymizationDictionary::load(path)?
        }
        None => build_dictionary(config, &documents)?,
    };
    let (anonymized, replacements) = anonymize_corpus(&documents, &dict)?;
    let out_dir = out_dir.unwrap_or(&config.paths.output);
    std::fs::create_dir_all(out_dir)?;
    save_corpus(&anonymized, &out_dir.join("anonymized.jsonl"))?;
    dict.save(&out_dir.join("dictionary.txt"))?;
    Ok((replacements, dict.len()))
}
