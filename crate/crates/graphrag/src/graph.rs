//! Typed in-memory property graph with stable ids, provenance, and
//! line-delimited persistence.
//!
//! Entities and triples get content-independent monotonically assigned
//! integer ids rendered as strings, so identical insertion order yields
//! identical ids across runs. Duplicate `(head, relation, tail, provenance)`
//! quadruples are idempotent.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reserved structural relation connecting an entity to an attribute value.
pub const HAS_ATTRIBUTE: &str = "has_attribute";
/// Reserved structural relation connecting a member entity to its community node.
pub const MEMBER_OF: &str = "member_of";
/// Reserved entity type for community nodes inserted by tree construction.
pub const COMMUNITY_ETYPE: &str = "community";

pub type EntityId = String;
pub type TripleId = String;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TripleKind {
    EntityRelation,
    Attribute,
    MemberOf,
}

impl TripleKind {
    /// Classification is fully determined by the reserved relation labels.
    pub fn classify(relation: &str) -> TripleKind {
        match relation {
            HAS_ATTRIBUTE => TripleKind::Attribute,
            MEMBER_OF => TripleKind::MemberOf,
            _ => TripleKind::EntityRelation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityRecord {
    pub id: EntityId,
    pub name: String,
    pub etype: String,
    #[serde(default)]
    pub attributes: BTreeMap<String, String>,
    #[serde(default)]
    pub is_community_node: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Triple {
    pub id: TripleId,
    pub head: EntityId,
    pub relation: String,
    pub tail: EntityId,
    /// Source chunk id; empty for structural triples with no source text.
    pub provenance: String,
    pub kind: TripleKind,
}

/// Normalization used to merge entity mentions: exact match after trim and
/// case-fold. No embedding-based resolution.
pub fn name_key(name: &str) -> String {
    name.trim().to_lowercase()
}

#[derive(Debug, Clone, Default)]
pub struct Graph {
    entities: BTreeMap<EntityId, EntityRecord>,
    triples: BTreeMap<TripleId, Triple>,
    chunks: BTreeMap<String, String>,
    name_index: BTreeMap<String, EntityId>,
    dedup: BTreeMap<(EntityId, String, EntityId, String), TripleId>,
    incident: BTreeMap<EntityId, Vec<TripleId>>,
    next_entity: u64,
    next_triple: u64,
    strict_relations: Option<BTreeSet<String>>,
}

impl PartialEq for Graph {
    fn eq(&self, other: &Self) -> bool {
        self.entities == other.entities
            && self.triples == other.triples
            && self.chunks == other.chunks
    }
}

impl Graph {
    pub fn new() -> Graph {
        Graph::default()
    }

    /// Enables strict-schema mode: non-reserved relations outside this set
    /// are rejected at insertion.
    pub fn set_strict_relations(&mut self, relations: BTreeSet<String>) {
        self.strict_relations = Some(relations);
    }

    pub fn clear_strict_relations(&mut self) {
        self.strict_relations = None;
    }

    pub fn entity(&self, id: &str) -> Option<&EntityRecord> {
        self.entities.get(id)
    }

    pub fn triple(&self, id: &str) -> Option<&Triple> {
        self.triples.get(id)
    }

    pub fn chunk(&self, id: &str) -> Option<&str> {
        self.chunks.get(id).map(|s| s.as_str())
    }

    pub fn entities(&self) -> impl Iterator<Item = &EntityRecord> {
        self.entities.values()
    }

    pub fn triples(&self) -> impl Iterator<Item = &Triple> {
        self.triples.values()
    }

    pub fn chunks(&self) -> impl Iterator<Item = (&str, &str)> {
        self.chunks.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    pub fn triple_count(&self) -> usize {
        self.triples.len()
    }

    pub fn add_chunk(&mut self, id: &str, text: &str) {
        self.chunks.insert(id.to_string(), text.to_string());
    }

    /// Looks up an entity by normalized name.
    pub fn entity_by_name(&self, name: &str) -> Option<&EntityRecord> {
        self.name_index
            .get(&name_key(name))
            .and_then(|id| self.entities.get(id))
    }

    /// Returns the existing entity with the same normalized name, or inserts
    /// a new one with the declared type.
    pub fn upsert_entity(&mut self, name: &str, etype: &str) -> EntityId {
        let key = name_key(name);
        if let Some(id) = self.name_index.get(&key) {
            return id.clone();
        }
        let id = self.next_entity.to_string();
        self.next_entity += 1;
        self.entities.insert(
            id.clone(),
            EntityRecord {
                id: id.clone(),
                name: name.trim().to_string(),
                etype: etype.to_string(),
                attributes: BTreeMap::new(),
                is_community_node: etype == COMMUNITY_ETYPE,
            },
        );
        self.name_index.insert(key, id.clone());
        id
    }

    /// Inserts a triple between existing entities. Idempotent on the
    /// `(head, relation, tail, provenance)` quadruple.
    pub fn add_triple(
        &mut self,
        head: &str,
        relation: &str,
        tail: &str,
        provenance: &str,
    ) -> Result<TripleId> {
        if !self.entities.contains_key(head) {
            return Err(Error::DanglingEndpoint(head.to_string()));
        }
        if !self.entities.contains_key(tail) {
            return Err(Error::DanglingEndpoint(tail.to_string()));
        }
        let kind = TripleKind::classify(relation);
        if kind == TripleKind::EntityRelation {
            if let Some(allowed) = &self.strict_relations {
                if !allowed.contains(relation) {
                    return Err(Error::SchemaViolation(format!(
                        "unknown relation label '{relation}'"
                    )));
                }
            }
        }
        let key = (
            head.to_string(),
            relation.to_string(),
            tail.to_string(),
            provenance.to_string(),
        );
        if let Some(id) = self.dedup.get(&key) {
            return Ok(id.clone());
        }
        let id = self.next_triple.to_string();
        self.next_triple += 1;
        self.triples.insert(
            id.clone(),
            Triple {
                id: id.clone(),
                head: head.to_string(),
                relation: relation.to_string(),
                tail: tail.to_string(),
                provenance: provenance.to_string(),
                kind,
            },
        );
        self.dedup.insert(key, id.clone());
        self.incident
            .entry(head.to_string())
            .or_default()
            .push(id.clone());
        if head != tail {
            self.incident
                .entry(tail.to_string())
                .or_default()
                .push(id.clone());
        }
        Ok(id)
    }

    /// Attaches a typed attribute value: upserts the attribute-value node,
    /// records the value on the owner, and inserts a `has_attribute` triple.
    pub fn add_attribute(
        &mut self,
        entity: &str,
        attr_key: &str,
        value: &str,
        provenance: &str,
    ) -> Result<TripleId> {
        if !self.entities.contains_key(entity) {
            return Err(Error::EntityNotFound(entity.to_string()));
        }
        let attr_node = self.upsert_entity(value, attr_key);
        self.entities
            .get_mut(entity)
            .expect("checked above")
            .attributes
            .insert(attr_key.to_string(), value.trim().to_string());
        self.add_triple(entity, HAS_ATTRIBUTE, &attr_node, provenance)
    }

    /// Triple ids incident to an entity, in insertion order.
    pub fn incident_triples(&self, entity: &str) -> &[TripleId] {
        self.incident
            .get(entity)
            .map(|v| v.as_slice())
            .unwrap_or(&[])
    }

    /// Multiset of incident relation-type labels over both directions.
    /// `member_of` edges are always excluded; attribute edges are included
    /// unless `include_attribute_edges` is false.
    pub fn incident_relations_with(
        &self,
        entity: &str,
        include_attribute_edges: bool,
    ) -> Result<BTreeMap<String, usize>> {
        if !self.entities.contains_key(entity) {
            return Err(Error::EntityNotFound(entity.to_string()));
        }
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for tid in self.incident_triples(entity) {
            let t = &self.triples[tid];
            match t.kind {
                TripleKind::MemberOf => continue,
                TripleKind::Attribute if !include_attribute_edges => continue,
                _ => {}
            }
            // Self-loops contribute one occurrence per incident triple.
            let occurrences = if t.head == t.tail { 2 } else { 1 };
            *counts.entry(t.relation.clone()).or_insert(0) += occurrences;
        }
        Ok(counts)
    }

    pub fn incident_relations(&self, entity: &str) -> Result<BTreeMap<String, usize>> {
        self.incident_relations_with(entity, true)
    }

    /// Drops community nodes and `member_of` triples so tree construction can
    /// rebuild them without duplication. Id counters rewind to the highest
    /// remaining id, keeping rebuilds structurally identical to a fresh build.
    pub fn clear_community_structure(&mut self) {
        let dead_entities: Vec<EntityId> = self
            .entities
            .values()
            .filter(|e| e.is_community_node)
            .map(|e| e.id.clone())
            .collect();
        let dead_triples: Vec<TripleId> = self
            .triples
            .values()
            .filter(|t| t.kind == TripleKind::MemberOf)
            .map(|t| t.id.clone())
            .collect();
        for tid in &dead_triples {
            let t = self.triples.remove(tid).expect("listed above");
            self.dedup.remove(&(
                t.head.clone(),
                t.relation.clone(),
                t.tail.clone(),
                t.provenance,
            ));
            for end in [&t.head, &t.tail] {
                if let Some(list) = self.incident.get_mut(end) {
                    list.retain(|id| id != tid);
                }
            }
        }
        for eid in &dead_entities {
            let e = self.entities.remove(eid).expect("listed above");
            self.name_index.remove(&name_key(&e.name));
            self.incident.remove(eid);
        }
        self.next_entity = self
            .entities
            .keys()
            .filter_map(|id| id.parse::<u64>().ok())
            .max()
            .map(|m| m + 1)
            .unwrap_or(0);
        self.next_triple = self
            .triples
            .keys()
            .filter_map(|id| id.parse::<u64>().ok())
            .max()
            .map(|m| m + 1)
            .unwrap_or(0);
    }

    /// Checks referential integrity: every triple endpoint resolves and every
    /// nonempty provenance names a known chunk.
    pub fn check_integrity(&self) -> Result<()> {
        for t in self.triples.values() {
            if !self.entities.contains_key(&t.head) {
                return Err(Error::DanglingEndpoint(t.head.clone()));
            }
            if !self.entities.contains_key(&t.tail) {
                return Err(Error::DanglingEndpoint(t.tail.clone()));
            }
            if !t.provenance.is_empty() && !self.chunks.contains_key(&t.provenance) {
                return Err(Error::DanglingEndpoint(format!(
                    "chunk {} referenced by triple {}",
                    t.provenance, t.id
                )));
            }
        }
        Ok(())
    }

    pub fn serialize(&self, dest: &mut dyn Write) -> Result<()> {
        for (id, text) in &self.chunks {
            let rec = PersistRecord::Chunk {
                id: id.clone(),
                text: text.clone(),
            };
            writeln!(dest, "{}", serde_json::to_string(&rec)?)?;
        }
        for e in self.entities.values() {
            writeln!(
                dest,
                "{}",
                serde_json::to_string(&PersistRecord::Entity(e.clone()))?
            )?;
        }
        for t in self.triples.values() {
            writeln!(
                dest,
                "{}",
                serde_json::to_string(&PersistRecord::Triple(t.clone()))?
            )?;
        }
        Ok(())
    }

    pub fn deserialize(source: &mut dyn Read) -> Result<Graph> {
        let mut g = Graph::new();
        let reader = BufReader::new(source);
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: PersistRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: idx + 1,
                message: e.to_string(),
            })?;
            match rec {
                PersistRecord::Chunk { id, text } => {
                    g.chunks.insert(id, text);
                }
                PersistRecord::Entity(e) => {
                    g.name_index.insert(name_key(&e.name), e.id.clone());
                    g.entities.insert(e.id.clone(), e);
                }
                PersistRecord::Triple(t) => {
                    g.dedup.insert(
                        (
                            t.head.clone(),
                            t.relation.clone(),
                            t.tail.clone(),
                            t.provenance.clone(),
                        ),
                        t.id.clone(),
                    );
                    g.incident
                        .entry(t.head.clone())
                        .or_default()
                        .push(t.id.clone());
                    if t.head != t.tail {
                        g.incident
                            .entry(t.tail.clone())
                            .or_default()
                            .push(t.id.clone());
                    }
                    g.triples.insert(t.id.clone(), t);
                }
            }
        }
        g.next_entity = g
            .entities
            .keys()
            .filter_map(|id| id.parse::<u64>().ok())
            .max()
            .map(|m| m + 1)
            .unwrap_or(0);
        g.next_triple = g
            .triples
            .keys()
            .filter_map(|id| id.parse::<u64>().ok())
            .max()
            .map(|m| m + 1)
            .unwrap_or(0);
        g.check_integrity()?;
        Ok(g)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let mut file = std::fs::File::create(path)?;
        self.serialize(&mut file)
    }

    pub fn load(path: &std::path::Path) -> Result<Graph> {
        let mut file = std::fs::File::open(path)?;
        Graph::deserialize(&mut file)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum PersistRecord {
    Entity(EntityRecord),
    Triple(Triple),
    Chunk { id: String, text: String },
}
