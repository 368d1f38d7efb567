//! Registered prompt templates rendered by `{name}` variable substitution.
//!
//! Templates are first-class artifacts: every generation call names a
//! registered template id and binds all of its variables. The open/reject
//! answer templates are fixed wording and must not be edited, since the mode
//! contrast depends on the exact phrasing.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};

pub const TPL_EXTRACT: &str = "extract";
pub const TPL_SUMMARIZE_COMMUNITY: &str = "summarize_community";
pub const TPL_DECOMPOSE: &str = "decompose";
pub const TPL_REASON_REFLECT: &str = "reason_reflect";
pub const TPL_ANSWER_OPEN: &str = "answer_open";
pub const TPL_ANSWER_REJECT: &str = "answer_reject";
pub const TPL_JUDGE: &str = "judge";

/// Reject-mode answer template.
pub const ANSWER_REJECT_BODY: &str = "Given the question and the extracted knowledge from different retrieval paths, please answer the question below.\nIf the extracted knowledge is not enough to answer, please reject to answer.\n\nQuestion: {query}\n\nExtracted Knowledge:\n{context}\n\nAnswer:";

/// Open-mode answer template.
pub const ANSWER_OPEN_BODY: &str = "Given the question and the extracted knowledge from different retrieval paths, please answer the question below. If the extracted knowledge is not enough to answer, please answer it based on your own knowledge.\n\nQuestion: {query}\n\nExtracted Knowledge:\n{context}\n\nAnswer:";

const EXTRACT_BODY: &str = "Extract facts from the text below as one fact per line, tab-separated.\nUse only these entity types: {entity_types}\nUse only these relation types: {relation_types}\nUse only these attribute types: {attribute_types}\nIf you are confident a new type is needed, emit the line anyway with the new label.\nLine formats:\nTRIPLE\\thead\\thead_type\\trelation\\ttail\\ttail_type\\tconfidence\nATTR\\tentity\\tentity_type\\tattribute_key\\tvalue\\tconfidence\n\nText:\n{chunk}\n\nFacts:";

const SUMMARIZE_COMMUNITY_BODY: &str = "Generate a brief name and description for a community of entities.\nFirst line: the name. Remaining lines: the description.\n\nMembers: {members}\n\nSummary:";

const DECOMPOSE_BODY: &str = "Decompose the question into at most {max_subqueries} atomic sub-queries that strictly adhere to the graph schema.\nEntity types: {entity_types}\nRelation types: {relation_types}\nAttribute types: {attribute_types}\nEach output line is tab-separated: route\\ttext\\tschema_bindings (comma separated, may be empty).\nRoutes: entity (single-hop node lookup), triple (relational fact matching), community (global/summary verification), path (multi-constraint traversal).\n\nHistory:\n{history}\n\nQuestion: {question}\n\nSub-queries:";

const REASON_REFLECT_BODY: &str = "You are reasoning over retrieved graph evidence. Reflect on whether the evidence answers the question.\nRespond with exactly one verdict line first:\nanswer: <final answer>   -- when the evidence suffices\ninsufficient             -- when it does not and no better focus exists\nrefine: <new focus>      -- when another retrieval round with the stated focus would help\n\nQuestion: {question}\n\nHistory:\n{history}\n\nEvidence:\n{context}\n\nVerdict:";

const JUDGE_BODY: &str = "Assess whether the predicted answer matches the ground truth in meaning.\nRespond with exactly one word: correct or incorrect.\n\nQuestion: {question}\nGround truth: {gold}\nPredicted: {predicted}\n\nVerdict:";

#[derive(Debug, Clone)]
pub struct Template {
    pub id: String,
    pub body: String,
    pub variables: BTreeSet<String>,
}

fn scan_variables(body: &str) -> BTreeSet<String> {
    let mut vars = BTreeSet::new();
    let bytes = body.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'{' {
            if let Some(end) = body[i + 1..].find('}') {
                let name = &body[i + 1..i + 1 + end];
                if !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                    vars.insert(name.to_string());
                }
                i += end + 2;
                continue;
            }
        }
        i += 1;
    }
    vars
}

#[derive(Debug, Clone)]
pub struct TemplateRegistry {
    templates: BTreeMap<String, Template>,
}

impl Default for TemplateRegistry {
    fn default() -> Self {
        let mut reg = TemplateRegistry {
            templates: BTreeMap::new(),
        };
        reg.register(TPL_EXTRACT, EXTRACT_BODY);
        reg.register(TPL_SUMMARIZE_COMMUNITY, SUMMARIZE_COMMUNITY_BODY);
        reg.register(TPL_DECOMPOSE, DECOMPOSE_BODY);
        reg.register(TPL_REASON_REFLECT, REASON_REFLECT_BODY);
        reg.register(TPL_ANSWER_OPEN, ANSWER_OPEN_BODY);
        reg.register(TPL_ANSWER_REJECT, ANSWER_REJECT_BODY);
        reg.register(TPL_JUDGE, JUDGE_BODY);
        reg
    }
}

impl TemplateRegistry {
    pub fn register(&mut self, id: &str, body: &str) {
        self.templates.insert(
            id.to_string(),
            Template {
                id: id.to_string(),
                body: body.to_string(),
                variables: scan_variables(body),
            },
        );
    }

    pub fn get(&self, id: &str) -> Result<&Template> {
        self.templates
            .get(id)
            .ok_or_else(|| Error::UnknownTemplate(id.to_string()))
    }

    /// Renders a template, requiring every declared variable to be bound.
    pub fn render(&self, id: &str, variables: &BTreeMap<String, String>) -> Result<String> {
        let tpl = self.get(id)?;
        let mut out = tpl.body.clone();
        for var in &tpl.variables {
            let value = variables.get(var).ok_or_else(|| Error::UnboundVariable {
                template_id: id.to_string(),
                variable: var.clone(),
            })?;
            out = out.replace(&format!("{{{var}}}"), value);
        }
        Ok(out)
    }
}

/// Renders a template body directly (used for trace verification).
pub fn render_body(body: &str, variables: &BTreeMap<String, String>) -> String {
    let mut out = body.to_string();
    for (var, value) in variables {
        out = out.replace(&format!("{{{var}}}"), value);
    }
    out
}
