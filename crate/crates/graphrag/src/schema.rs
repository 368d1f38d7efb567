//! Seed schema, triple validation, and threshold-gated expansion.
//!
//! A schema is the typed vocabulary `<entity types, relation types,
//! attribute types>` that bounds both extraction and query decomposition.
//! Schema values are immutable; expansion produces a new value.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{HAS_ATTRIBUTE, MEMBER_OF};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schema {
    pub entity_types: BTreeSet<String>,
    pub relation_types: BTreeSet<String>,
    pub attribute_types: BTreeSet<String>,
    #[serde(default)]
    pub version: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateKind {
    EntityType,
    RelationType,
    AttributeType,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionCandidate {
    pub kind: CandidateKind,
    pub label: String,
    /// Self-reported confidence in [0, 1].
    pub confidence: f64,
    /// Number of documents proposing this label.
    pub support: usize,
}

/// Outcome of validating one triple against a schema. Validation never
/// throws; the result carries the first violated constraint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Validation {
    Accept,
    Reject(Violation),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    UnknownEntityType(String),
    UnknownRelation(String),
    UnknownAttributeType(String),
}

impl Validation {
    pub fn is_accept(&self) -> bool {
        matches!(self, Validation::Accept)
    }
}

impl Schema {
    pub fn new(
        entity_types: impl IntoIterator<Item = String>,
        relation_types: impl IntoIterator<Item = String>,
        attribute_types: impl IntoIterator<Item = String>,
    ) -> Result<Schema> {
        let schema = Schema {
            entity_types: entity_types.into_iter().collect(),
            relation_types: relation_types.into_iter().collect(),
            attribute_types: attribute_types.into_iter().collect(),
            version: 0,
        };
        schema.check()?;
        Ok(schema)
    }

    fn check(&self) -> Result<()> {
        for (name, set) in [
            ("entity_types", &self.entity_types),
            ("relation_types", &self.relation_types),
            ("attribute_types", &self.attribute_types),
        ] {
            if set.is_empty() {
                return Err(Error::Config(format!(
                    "schema section {name} must be nonempty after seeding"
                )));
            }
            for reserved in [HAS_ATTRIBUTE, MEMBER_OF] {
                if set.contains(reserved) {
                    return Err(Error::Config(format!(
                        "reserved label '{reserved}' may not appear in {name}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Validates an entity-relation triple by endpoint types and relation
    /// label. For `has_attribute` triples pass the attribute key instead of
    /// a tail type.
    pub fn validate_triple(
        &self,
        head_etype: &str,
        relation: &str,
        tail: TailConstraint<'_>,
    ) -> Validation {
        if !self.entity_types.contains(head_etype) {
            return Validation::Reject(Violation::UnknownEntityType(head_etype.to_string()));
        }
        match tail {
            TailConstraint::Entity(tail_etype) => {
                if !self.relation_types.contains(relation) {
                    return Validation::Reject(Violation::UnknownRelation(relation.to_string()));
                }
                if !self.entity_types.contains(tail_etype) {
                    return Validation::Reject(Violation::UnknownEntityType(
                        tail_etype.to_string(),
                    ));
                }
            }
            TailConstraint::Attribute(key) => {
                if relation != HAS_ATTRIBUTE {
                    return Validation::Reject(Violation::UnknownRelation(relation.to_string()));
                }
                if !self.attribute_types.contains(key) {
                    return Validation::Reject(Violation::UnknownAttributeType(key.to_string()));
                }
            }
        }
        Validation::Accept
    }

    /// Threshold-gated expansion: a candidate is accepted iff
    /// `confidence >= mu`, `support >= min_support`, and the label is not
    /// already present. The original schema is left untouched; the version
    /// increments iff anything was accepted.
    pub fn apply_expansion(
        &self,
        candidates: &[ExpansionCandidate],
        mu: f64,
        min_support: usize,
    ) -> (Schema, Vec<ExpansionCandidate>) {
        let mut next = self.clone();
        let mut accepted = Vec::new();
        for cand in candidates {
            if cand.confidence < mu || cand.support < min_support {
                continue;
            }
            let set = match cand.kind {
                CandidateKind::EntityType => &mut next.entity_types,
                CandidateKind::RelationType => &mut next.relation_types,
                CandidateKind::AttributeType => &mut next.attribute_types,
            };
            if set.contains(&cand.label) || cand.label == HAS_ATTRIBUTE || cand.label == MEMBER_OF {
                continue;
            }
            set.insert(cand.label.clone());
            accepted.push(cand.clone());
        }
        if !accepted.is_empty() {
            next.version = self.version + 1;
        }
        (next, accepted)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Schema> {
        let text = std::fs::read_to_string(path)?;
        let schema: Schema = serde_json::from_str(&text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
        schema.check()?;
        Ok(schema)
    }
}

/// Tail-side constraint for validation: either a tail entity type or an
/// attribute key.
#[derive(Debug, Clone, Copy)]
pub enum TailConstraint<'a> {
    Entity(&'a str),
    Attribute(&'a str),
}
