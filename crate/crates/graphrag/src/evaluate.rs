//! Dual-mode benchmark harness: judge-based scoring, abstention accounting,
//! entity anonymization, and anonymity-reversion scoring.
//!
//! Items are answered through the retrieval agent (or its single-pass
//! variant), then scored. The abstention sentinel counts as incorrect
//! without a judge call; multiple-choice items bypass the judge through
//! normalized option matching; anonymity-reversion items compare predicted
//! placeholder mappings against the gold mapping.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extract::Document;
use crate::graph::Graph;
use crate::provider::templates::TPL_JUDGE;
use crate::provider::{CostReport, Embedder, GenerationRequest, Generator, MergeMode};
use crate::retrieval::{agent_answer, answer_no_agent, Mode, RetrievalParams, ABSTENTION};
use crate::schema::Schema;
use crate::tree::KnowledgeTree;

/// Separator between a placeholder and its surface form in mapping text.
pub const MAPPING_SEPARATOR: &str = "——";

/// Question category, which decides how answers are scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QType {
    Freeform,
    MultipleChoice,
    AnonymityReversion,
}

/// One benchmark item.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QAItem {
    pub id: String,
    pub question: String,
    /// Acceptable gold answers; for anonymity reversion, the gold mapping in
    /// `PLACEHOLDER——surface` lines.
    pub gold: Vec<String>,
    pub qtype: QType,
    /// Option labels for multiple choice.
    #[serde(default)]
    pub options: Vec<String>,
    #[serde(default)]
    pub difficulty: Option<String>,
    #[serde(default)]
    pub language: Option<String>,
}

impl QAItem {
    fn check(&self) -> Result<()> {
        if self.gold.is_empty() || self.gold.iter().all(|g| g.trim().is_empty()) {
            return Err(Error::Config(format!(
                "item {} has no gold answer",
                self.id
            )));
        }
        if self.qtype == QType::MultipleChoice {
            if self.options.is_empty() {
                return Err(Error::Config(format!(
                    "multiple-choice item {} has no options",
                    self.id
                )));
            }
            if self.gold.len() != 1 {
                return Err(Error::Config(format!(
                    "multiple-choice item {} must have exactly one gold label",
                    self.id
                )));
            }
        }
        Ok(())
    }
}

/// Loads a JSONL dataset, one item per line.
pub fn load_dataset(path: &Path) -> Result<Vec<QAItem>> {
    let text = std::fs::read_to_string(path)?;
    let mut items = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let item: QAItem = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        item.check()?;
        items.push(item);
    }
    Ok(items)
}

/// Scoring outcome for one item.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JudgeVerdict {
    Correct,
    Incorrect,
    /// The judge produced something other than a verdict; flagged, counts as
    /// incorrect.
    JudgeError,
}

fn normalize_label(text: &str) -> String {
    text.trim().trim_end_matches('.').trim().to_lowercase()
}

/// Parses `PLACEHOLDER——surface` lines into placeholder → surface.
pub fn parse_mapping(text: &str) -> BTreeMap<String, String> {
    let mut mapping = BTreeMap::new();
    for line in text.lines() {
        if let Some((placeholder, surface)) = line.split_once(MAPPING_SEPARATOR) {
            let placeholder = placeholder.trim();
            let surface = surface.trim();
            if !placeholder.is_empty() && !surface.is_empty() {
                mapping.insert(placeholder.to_string(), surface.to_string());
            }
        }
    }
    mapping
}

/// Fraction of gold placeholders whose predicted surface form matches after
/// trim/case-fold normalization; missing predictions count as wrong.
pub fn score_anonymity_reversion(
    predicted: &BTreeMap<String, String>,
    gold: &BTreeMap<String, String>,
) -> Result<f64> {
    if gold.is_empty() {
        return Err(Error::EmptyInput);
    }
    let matched = gold
        .iter()
        .filter(|(placeholder, surface)| {
            predicted
                .get(*placeholder)
                .is_some_and(|p| normalize_label(p) == normalize_label(surface))
        })
        .count();
    Ok(matched as f64 / gold.len() as f64)
}

/// Scores one predicted answer. The abstention sentinel short-circuits to
/// incorrect with no judge call; multiple choice matches normalized option
/// labels; anonymity reversion requires the full gold mapping recovered;
/// freeform answers go to the judge template.
pub fn judge_answer(
    item: &QAItem,
    predicted: &str,
    generator: &dyn Generator,
) -> Result<JudgeVerdict> {
    item.check()?;
    if predicted.trim() == ABSTENTION {
        return Ok(JudgeVerdict::Incorrect);
    }
    match item.qtype {
        QType::MultipleChoice => {
            let gold = normalize_label(&item.gold[0]);
            Ok(if normalize_label(predicted) == gold {
                JudgeVerdict::Correct
            } else {
                JudgeVerdict::Incorrect
            })
        }
        QType::AnonymityReversion => {
            let gold = parse_mapping(&item.gold.join("\n"));
            if gold.is_empty() {
                return Err(Error::Config(format!(
                    "item {} gold is not a placeholder mapping",
                    item.id
                )));
            }
            let accuracy = score_anonymity_reversion(&parse_mapping(predicted), &gold)?;
            Ok(if accuracy == 1.0 {
                JudgeVerdict::Correct
            } else {
                JudgeVerdict::Incorrect
            })
        }
        QType::Freeform => {
            for gold in &item.gold {
                let variables: BTreeMap<String, String> = [
                    ("question".to_string(), item.question.clone()),
                    ("gold".to_string(), gold.clone()),
                    ("predicted".to_string(), predicted.to_string()),
                ]
                .into();
                let response = generator.generate(&GenerationRequest::new(TPL_JUDGE, variables))?;
                match response.trim().to_lowercase().as_str() {
                    "correct" => return Ok(JudgeVerdict::Correct),
                    "incorrect" => {}
                    _ => return Ok(JudgeVerdict::JudgeError),
                }
            }
            Ok(JudgeVerdict::Incorrect)
        }
    }
}

/// Persisted audit record for one evaluated item.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ItemRecord {
    pub id: String,
    pub predicted: String,
    pub verdict: JudgeVerdict,
    pub abstained: bool,
    pub iterations: usize,
    #[serde(default)]
    pub error: Option<String>,
}

/// Aggregated benchmark result plus the per-item records it was computed
/// from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: Mode,
    pub agent: bool,
    pub top_k: usize,
    pub total: usize,
    pub correct: usize,
    pub abstentions: usize,
    pub accuracy: f64,
    pub abstention_rate: f64,
    pub cost: CostReport,
    pub records: Vec<ItemRecord>,
}

impl EvalReport {
    /// Recomputes the aggregate counters from item records; abstentions and
    /// judge errors count as incorrect.
    pub fn from_records(
        records: Vec<ItemRecord>,
        mode: Mode,
        agent: bool,
        top_k: usize,
        cost: CostReport,
    ) -> EvalReport {
        let total = records.len();
        let correct = records
            .iter()
            .filter(|r| r.verdict == JudgeVerdict::Correct)
            .count();
        let abstentions = records.iter().filter(|r| r.abstained).count();
        EvalReport {
            mode,
            agent,
            top_k,
            total,
            correct,
            abstentions,
            accuracy: correct as f64 / total.max(1) as f64,
            abstention_rate: abstentions as f64 / total.max(1) as f64,
            cost,
            records,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<EvalReport> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Human-readable one-screen summary.
    pub fn summary(&self) -> String {
        format!(
            "mode: {}  agent: {}  top_k: {}\nitems: {}  correct: {}  abstained: {}\naccuracy: {:.4}  abstention_rate: {:.4}\nllm_calls: {}  tokens: {}",
            self.mode.as_str(),
            self.agent,
            self.top_k,
            self.total,
            self.correct,
            self.abstentions,
            self.accuracy,
            self.abstention_rate,
            self.cost.llm_calls,
            self.cost.total_tokens(),
        )
    }
}

/// Answers and scores every dataset item. Per-item failures are recorded
/// (counting as incorrect) and the run continues.
#[allow(clippy::too_many_arguments)]
pub fn run_benchmark(
    dataset: &[QAItem],
    tree: &KnowledgeTree,
    graph: &Graph,
    schema: &Schema,
    generator: &dyn Generator,
    embedder: &dyn Embedder,
    mode: Mode,
    agent: bool,
    params: &RetrievalParams,
) -> Result<EvalReport> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let gen_before = generator.cost();
    let emb_before = embedder.cost();
    let mut records = Vec::with_capacity(dataset.len());
    for item in dataset {
        item.check()?;
        let answered = if agent {
            agent_answer(
                &item.question,
                tree,
                graph,
                schema,
                generator,
                embedder,
                mode,
                params,
            )
        } else {
            answer_no_agent(
                &item.question,
                tree,
                graph,
                schema,
                generator,
                embedder,
                mode,
                params,
            )
        };
        let record = match answered {
            Ok((answer, trace)) => {
                let verdict = judge_answer(item, &answer, generator)?;
                ItemRecord {
                    id: item.id.clone(),
                    abstained: answer == ABSTENTION,
                    predicted: answer,
                    verdict,
                    iterations: trace.iterations.len(),
                    error: None,
                }
            }
            Err(e) => ItemRecord {
                id: item.id.clone(),
                predicted: String::new(),
                verdict: JudgeVerdict::Incorrect,
                abstained: false,
                iterations: 0,
                error: Some(e.to_string()),
            },
        };
        records.push(record);
    }
    let cost = generator.cost().delta_since(gen_before).merge(
        embedder.cost().delta_since(emb_before),
        MergeMode::Sequential,
    );
    Ok(EvalReport::from_records(
        records,
        mode,
        agent,
        params.top_k,
        cost,
    ))
}

fn placeholder_is_valid(placeholder: &str) -> bool {
    match placeholder.split_once('#') {
        Some((tag, number)) => {
            !tag.is_empty()
                && tag
                    .chars()
                    .all(|c| c.is_ascii_alphabetic() && c.is_ascii_uppercase())
                && !number.is_empty()
                && number.chars().all(|c| c.is_ascii_digit())
        }
        None => false,
    }
}

/// Bijective surface-form → `TYPE#integer` placeholder mapping.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AnonymizationDictionary {
    forward: BTreeMap<String, String>,
    inverse: BTreeMap<String, String>,
}

impl AnonymizationDictionary {
    pub fn new() -> AnonymizationDictionary {
        AnonymizationDictionary::default()
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    pub fn placeholder_for(&self, surface: &str) -> Option<&str> {
        self.forward.get(surface).map(String::as_str)
    }

    pub fn surface_for(&self, placeholder: &str) -> Option<&str> {
        self.inverse.get(placeholder).map(String::as_str)
    }

    /// Placeholder → surface pairs, for reversion gold construction.
    pub fn inverse_pairs(&self) -> impl Iterator<Item = (&str, &str)> {
        self.inverse.iter().map(|(p, s)| (p.as_str(), s.as_str()))
    }

    pub fn insert(&mut self, surface: &str, placeholder: &str) -> Result<()> {
        let surface = surface.trim();
        let placeholder = placeholder.trim();
        if surface.is_empty() {
            return Err(Error::DictionaryConflict("empty surface form".to_string()));
        }
        if !placeholder_is_valid(placeholder) {
            return Err(Error::DictionaryConflict(format!(
                "placeholder '{placeholder}' does not match TYPE#integer"
            )));
        }
        if let Some(existing) = self.forward.get(surface) {
            if existing != placeholder {
                return Err(Error::DictionaryConflict(format!(
                    "'{surface}' maps to both '{existing}' and '{placeholder}'"
                )));
            }
            return Ok(());
        }
        if let Some(existing) = self.inverse.get(placeholder) {
            return Err(Error::DictionaryConflict(format!(
                "placeholder '{placeholder}' assigned to both '{existing}' and '{surface}'"
            )));
        }
        self.forward
            .insert(surface.to_string(), placeholder.to_string());
        self.inverse
            .insert(placeholder.to_string(), surface.to_string());
        Ok(())
    }

    pub fn from_pairs<'a>(
        pairs: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<AnonymizationDictionary> {
        let mut dict = AnonymizationDictionary::new();
        for (surface, placeholder) in pairs {
            dict.insert(surface, placeholder)?;
        }
        Ok(dict)
    }

    /// Persists as `PLACEHOLDER——surface` lines.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for (placeholder, surface) in &self.inverse {
            out.push_str(placeholder);
            out.push_str(MAPPING_SEPARATOR);
            out.push_str(surface);
            out.push('\n');
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<AnonymizationDictionary> {
        let text = std::fs::read_to_string(path)?;
        let mut dict = AnonymizationDictionary::new();
        for (placeholder, surface) in parse_mapping(&text) {
            dict.insert(&surface, &placeholder)?;
        }
        Ok(dict)
    }
}

/// Replaces every occurrence of each dictionary surface form with its
/// placeholder, longest match first, and returns the documents plus the
/// total replacement count.
pub fn anonymize_corpus(
    documents: &[Document],
    dict: &AnonymizationDictionary,
) -> Result<(Vec<Document>, usize)> {
    let keys: Vec<(&String, &String)> = sorted_by_length(&dict.forward);
    rewrite_documents(documents, &keys)
}

/// Restores placeholders to surface forms via the inverse mapping.
pub fn invert_corpus(
    documents: &[Document],
    dict: &AnonymizationDictionary,
) -> Result<(Vec<Document>, usize)> {
    let keys: Vec<(&String, &String)> = sorted_by_length(&dict.inverse);
    rewrite_documents(documents, &keys)
}

fn sorted_by_length(mapping: &BTreeMap<String, String>) -> Vec<(&String, &String)> {
    let mut keys: Vec<(&String, &String)> = mapping.iter().collect();
    keys.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(b.0)));
    keys
}

fn rewrite_documents(
    documents: &[Document],
    keys: &[(&String, &String)],
) -> Result<(Vec<Document>, usize)> {
    let mut out = Vec::with_capacity(documents.len());
    let mut replacements = 0;
    for doc in documents {
        let (text, n) = rewrite_text(&doc.text, keys)?;
        replacements += n;
        out.push(Document {
            id: doc.id.clone(),
            text,
        });
    }
    Ok((out, replacements))
}

fn rewrite_text(text: &str, keys: &[(&String, &String)]) -> Result<(String, usize)> {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    let mut replacements = 0;
    'outer: while !rest.is_empty() {
        // Keys are length-descending, so the first hit is the longest match.
        let mut matched: Option<(&String, &String)> = None;
        for (key, value) in keys {
            if rest.starts_with(key.as_str()) {
                if let Some((prev, _)) = matched {
                    if prev.len() == key.len() && prev != *key {
                        return Err(Error::DictionaryConflict(format!(
                            "ambiguous longest match between '{prev}' and '{key}'"
                        )));
                    }
                    break;
                }
                matched = Some((key, value));
            }
        }
        if let Some((key, value)) = matched {
            out.push_str(value);
            replacements += 1;
            rest = &rest[key.len()..];
            continue 'outer;
        }
        let mut chars = rest.chars();
        out.push(chars.next().expect("rest is nonempty"));
        rest = chars.as_str();
    }
    Ok((out, replacements))
}
