//! Four-level knowledge tree: communities (L4), keywords (L3),
//! entity-relation triples (L2), attributes (L1), plus the per-level
//! embedding indexes retrieval runs against.
//!
//! Tree construction inserts one community node per community and a
//! `member_of` triple from every member; rebuilding replaces the previous
//! community structure instead of duplicating it.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::community::{dual_score, entity_representations, id_cmp, Community, DetectionParams};
use crate::embed::{IndexKind, VectorIndex};
use crate::error::{Error, Result};
use crate::graph::{Graph, TripleKind, COMMUNITY_ETYPE, MEMBER_OF};
use crate::provider::templates::TPL_SUMMARIZE_COMMUNITY;
use crate::provider::{Embedder, GenerationRequest, Generator};

#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeTree {
    pub communities: Vec<Community>,
    /// community index -> community node entity id
    pub community_nodes: BTreeMap<usize, String>,
    pub entity_index: VectorIndex,
    pub triple_index: VectorIndex,
    pub community_index: VectorIndex,
    pub keyword_index: VectorIndex,
    pub attribute_index: VectorIndex,
}

#[derive(Serialize, Deserialize)]
struct CommunityRecord {
    community: Community,
    node_id: String,
}

/// Calls the summarization template over the member names. The first response
/// line is the name, the remainder the description.
pub fn summarize_community(
    community: &Community,
    graph: &Graph,
    generator: &dyn Generator,
) -> Result<(String, String)> {
    let mut members: Vec<&str> = Vec::new();
    let mut sorted = community.members.clone();
    sorted.sort_by(|a, b| id_cmp(a, b));
    for id in &sorted {
        let e = graph
            .entity(id)
            .ok_or_else(|| Error::EntityNotFound(id.clone()))?;
        members.push(&e.name);
    }
    let vars: BTreeMap<String, String> = [("members".to_string(), members.join(", "))].into();
    let response = generator.generate(&GenerationRequest::new(TPL_SUMMARIZE_COMMUNITY, vars))?;
    let mut lines = response.lines();
    let name = lines.next().unwrap_or("").trim().to_string();
    if name.is_empty() {
        return Err(Error::Summarization(format!(
            "empty summary for community {}",
            community.index
        )));
    }
    let description = lines.collect::<Vec<_>>().join("\n").trim().to_string();
    Ok((name, description))
}

/// Top-m members by dual score, descending, ties to the lower id.
pub fn select_keywords(
    community: &Community,
    graph: &Graph,
    representations: &BTreeMap<String, Vec<f64>>,
    params: &DetectionParams,
    m: usize,
) -> Result<Vec<String>> {
    let mut scored: Vec<(f64, String)> = Vec::new();
    for member in &community.members {
        let score = dual_score(member, &community.members, graph, representations, params)?;
        scored.push((score, member.clone()));
    }
    scored.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| id_cmp(&a.1, &b.1))
    });
    Ok(scored.into_iter().take(m).map(|(_, id)| id).collect())
}

fn verbalize_triple(graph: &Graph, triple_id: &str) -> Result<String> {
    let t = graph
        .triple(triple_id)
        .ok_or_else(|| Error::EntityNotFound(triple_id.to_string()))?;
    let head = &graph
        .entity(&t.head)
        .ok_or_else(|| Error::DanglingEndpoint(t.head.clone()))?
        .name;
    let tail = &graph
        .entity(&t.tail)
        .ok_or_else(|| Error::DanglingEndpoint(t.tail.clone()))?
        .name;
    Ok(format!("{head} {} {tail}", t.relation))
}

/// Verbalizes a triple as "head relation tail" for the d-space retrieval
/// indexes.
pub fn triple_text(graph: &Graph, triple_id: &str) -> Result<String> {
    verbalize_triple(graph, triple_id)
}

fn build_index(
    kind: IndexKind,
    entries: &[(String, String)],
    embedder: &dyn Embedder,
) -> Result<VectorIndex> {
    let mut index = VectorIndex::new(kind, embedder.dim());
    if entries.is_empty() {
        return Ok(index);
    }
    let texts: Vec<&str> = entries.iter().map(|(_, t)| t.as_str()).collect();
    let vectors = embedder.embed_batch(&texts)?;
    for ((key, _), vector) in entries.iter().zip(vectors) {
        index.insert(key, vector)?;
    }
    Ok(index)
}

/// Builds the four-level tree over detected communities, mutating the graph
/// with community nodes and `member_of` edges.
pub fn build_tree(
    graph: &mut Graph,
    communities: &[Community],
    generator: &dyn Generator,
    embedder: &dyn Embedder,
    params: &DetectionParams,
) -> Result<KnowledgeTree> {
    graph.clear_community_structure();
    let representations = entity_representations(graph, embedder)?;

    let mut enriched = Vec::with_capacity(communities.len());
    let mut community_nodes = BTreeMap::new();
    for community in communities {
        let (name, description) = summarize_community(community, graph, generator)?;
        let keywords = select_keywords(
            community,
            graph,
            &representations,
            params,
            params.keywords_per_community,
        )?;
        let mut node_name = name.clone();
        // The node name must not collide with an existing entity, otherwise
        // upsert would merge the community node into it.
        let mut suffix = 1;
        while graph.entity_by_name(&node_name).is_some() {
            node_name = format!("{name} ({suffix})");
            suffix += 1;
        }
        let node_id = graph.upsert_entity(&node_name, COMMUNITY_ETYPE);
        let mut members = community.members.clone();
        members.sort_by(|a, b| id_cmp(a, b));
        for member in &members {
            graph.add_triple(member, MEMBER_OF, &node_id, "")?;
        }
        community_nodes.insert(community.index, node_id);
        enriched.push(Community {
            name,
            description,
            keywords,
            ..community.clone()
        });
    }

    // Level-4: communities over "name: description" text.
    let community_entries: Vec<(String, String)> = enriched
        .iter()
        .map(|c| {
            (
                c.index.to_string(),
                format!("{}: {}", c.name, c.description),
            )
        })
        .collect();
    // Level-3: keywords over entity names.
    let mut keyword_entries: Vec<(String, String)> = Vec::new();
    for c in &enriched {
        for kw in &c.keywords {
            let name = graph
                .entity(kw)
                .ok_or_else(|| Error::EntityNotFound(kw.clone()))?
                .name
                .clone();
            keyword_entries.push((kw.clone(), name));
        }
    }
    keyword_entries.sort();
    keyword_entries.dedup();
    // Level-2: entity-relation triples, verbalized.
    let mut triple_entries: Vec<(String, String)> = Vec::new();
    let mut attribute_entries: Vec<(String, String)> = Vec::new();
    let mut triple_ids: Vec<String> = graph.triples().map(|t| t.id.clone()).collect();
    triple_ids.sort_by(|a, b| id_cmp(a, b));
    for tid in &triple_ids {
        let t = graph.triple(tid).expect("listed above");
        match t.kind {
            TripleKind::EntityRelation => {
                triple_entries.push((tid.clone(), verbalize_triple(graph, tid)?));
            }
            TripleKind::Attribute => {
                let head = &graph.entity(&t.head).expect("integrity").name;
                let value = graph.entity(&t.tail).expect("integrity");
                attribute_entries.push((
                    tid.clone(),
                    format!("{head} {}: {}", value.etype, value.name),
                ));
            }
            TripleKind::MemberOf => {}
        }
    }
    // Entity index over non-community entity names.
    let mut entity_entries: Vec<(String, String)> = graph
        .entities()
        .filter(|e| !e.is_community_node)
        .map(|e| (e.id.clone(), e.name.clone()))
        .collect();
    entity_entries.sort_by(|a, b| id_cmp(&a.0, &b.0));

    Ok(KnowledgeTree {
        communities: enriched,
        community_nodes,
        entity_index: build_index(IndexKind::Entity, &entity_entries, embedder)?,
        triple_index: build_index(IndexKind::Triple, &triple_entries, embedder)?,
        community_index: build_index(IndexKind::Community, &community_entries, embedder)?,
        keyword_index: build_index(IndexKind::Keyword, &keyword_entries, embedder)?,
        attribute_index: build_index(IndexKind::Attribute, &attribute_entries, embedder)?,
    })
}

impl KnowledgeTree {
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut out = String::new();
        for community in &self.communities {
            let record = CommunityRecord {
                community: community.clone(),
                node_id: self.community_nodes[&community.index].clone(),
            };
            out.push_str(&serde_json::to_string(&record)?);
            out.push('\n');
        }
        std::fs::write(dir.join("communities.jsonl"), out)?;
        self.entity_index.save(&dir.join("entity.idx"))?;
        self.triple_index.save(&dir.join("triple.idx"))?;
        self.community_index.save(&dir.join("community.idx"))?;
        self.keyword_index.save(&dir.join("keyword.idx"))?;
        self.attribute_index.save(&dir.join("attribute.idx"))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<KnowledgeTree> {
        let text = std::fs::read_to_string(dir.join("communities.jsonl"))?;
        let mut communities = Vec::new();
        let mut community_nodes = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: CommunityRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            community_nodes.insert(record.community.index, record.node_id);
            communities.push(record.community);
        }
        Ok(KnowledgeTree {
            communities,
            community_nodes,
            entity_index: VectorIndex::load(&dir.join("entity.idx"))?,
            triple_index: VectorIndex::load(&dir.join("triple.idx"))?,
            community_index: VectorIndex::load(&dir.join("community.idx"))?,
            keyword_index: VectorIndex::load(&dir.join("keyword.idx"))?,
            attribute_index: VectorIndex::load(&dir.join("attribute.idx"))?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::community::detect_communities;
    use crate::provider::{ScriptedEmbedder, ScriptedGenerator};

    fn med_graph() -> Graph {
        let mut g = Graph::new();
        g.add_chunk("c", "source text");
        let asp = g.upsert_entity("Aspirin", "Drug");
        let ibu = g.upsert_entity("Ibuprofen", "Drug");
        let pain = g.upsert_entity("Pain", "Symptom");
        g.add_triple(&asp, "relieves", &pain, "c").unwrap();
        g.add_triple(&ibu, "relieves", &pain, "c").unwrap();
        g
    }

    fn summarizer() -> ScriptedGenerator {
        let mut gen = ScriptedGenerator::new();
        gen.add_fixture(
            TPL_SUMMARIZE_COMMUNITY,
            &[("members", "Aspirin, Ibuprofen, Pain")],
            "Pain relievers\nCommon analgesics and the symptom they treat.",
        );
        gen.add_fixture(TPL_SUMMARIZE_COMMUNITY, &[], "Misc\nEverything else.");
        gen
    }

    #[test]
    fn summarize_uses_fixture_by_member_names() {
        let g = med_graph();
        let community = Community {
            index: 0,
            members: vec!["0".into(), "1".into(), "2".into()],
            center: "0".into(),
            name: String::new(),
            description: String::new(),
            keywords: vec![],
        };
        let gen = summarizer();
        let (name, desc) = summarize_community(&community, &g, &gen).unwrap();
        assert_eq!(name, "Pain relievers");
        assert!(desc.contains("analgesics"));
    }

    #[test]
    fn empty_summary_is_an_error() {
        let g = med_graph();
        let community = Community {
            index: 0,
            members: vec!["0".into()],
            center: "0".into(),
            name: String::new(),
            description: String::new(),
            keywords: vec![],
        };
        let mut gen = ScriptedGenerator::new();
        gen.add_fixture(TPL_SUMMARIZE_COMMUNITY, &[], "");
        assert!(matches!(
            summarize_community(&community, &g, &gen),
            Err(Error::Summarization(_))
        ));
    }

    #[test]
    fn keywords_m1_is_the_center() {
        let g = med_graph();
        let emb = ScriptedEmbedder::new(4, 1);
        let params = DetectionParams::default();
        let reps = entity_representations(&g, &emb).unwrap();
        let members: Vec<String> = vec!["0".into(), "1".into(), "2".into()];
        let community = Community {
            index: 0,
            members: members.clone(),
            center: crate::community::community_center(&members, &g, &reps, &params).unwrap(),
            name: String::new(),
            description: String::new(),
            keywords: vec![],
        };
        let kws = select_keywords(&community, &g, &reps, &params, 1).unwrap();
        assert_eq!(kws, vec![community.center.clone()]);
        let all = select_keywords(&community, &g, &reps, &params, 10).unwrap();
        assert_eq!(all.len(), 3);
    }

    #[test]
    fn build_tree_inserts_nodes_and_member_of() {
        let mut g = med_graph();
        let emb = ScriptedEmbedder::new(4, 1);
        let gen = summarizer();
        let params = DetectionParams::default();
        let communities = detect_communities(&g, &emb, &params).unwrap();
        let n_comm = communities.len();
        let entities_before = g.entity_count();
        let triples_before = g.triple_count();
        let tree = build_tree(&mut g, &communities, &gen, &emb, &params).unwrap();
        assert_eq!(g.entity_count(), entities_before + n_comm);
        let member_total: usize = communities.iter().map(|c| c.members.len()).sum();
        assert_eq!(g.triple_count(), triples_before + member_total);
        assert_eq!(tree.communities.len(), n_comm);
        assert!(tree.communities.iter().all(|c| !c.name.is_empty()));
        g.check_integrity().unwrap();
    }

    #[test]
    fn no_attribute_triples_gives_empty_level1() {
        let mut g = med_graph();
        let emb = ScriptedEmbedder::new(4, 1);
        let gen = summarizer();
        let params = DetectionParams::default();
        let communities = detect_communities(&g, &emb, &params).unwrap();
        let tree = build_tree(&mut g, &communities, &gen, &emb, &params).unwrap();
        assert!(tree.attribute_index.is_empty());
        assert!(!tree.triple_index.is_empty());
    }

    #[test]
    fn member_of_never_in_triple_index() {
        let mut g = med_graph();
        let emb = ScriptedEmbedder::new(4, 1);
        let gen = summarizer();
        let params = DetectionParams::default();
        let communities = detect_communities(&g, &emb, &params).unwrap();
        let tree = build_tree(&mut g, &communities, &gen, &emb, &params).unwrap();
        for key in tree.triple_index.keys() {
            assert_ne!(g.triple(key).unwrap().kind, TripleKind::MemberOf);
        }
    }

    #[test]
    fn rebuild_is_idempotent() {
        let mut g1 = med_graph();
        let emb = ScriptedEmbedder::new(4, 1);
        let gen = summarizer();
        let params = DetectionParams::default();
        let communities = detect_communities(&g1, &emb, &params).unwrap();
        let mut g2 = g1.clone();
        let tree_once = build_tree(&mut g1, &communities, &gen, &emb, &params).unwrap();
        build_tree(&mut g2, &communities, &gen, &emb, &params).unwrap();
        let tree_twice = build_tree(&mut g2, &communities, &gen, &emb, &params).unwrap();
        assert_eq!(g1, g2);
        assert_eq!(tree_once, tree_twice);
    }

    #[test]
    fn tree_roundtrip() {
        let mut g = med_graph();
        let emb = ScriptedEmbedder::new(4, 1);
        let gen = summarizer();
        let params = DetectionParams::default();
        let communities = detect_communities(&g, &emb, &params).unwrap();
        let tree = build_tree(&mut g, &communities, &gen, &emb, &params).unwrap();
        let dir = tempfile::tempdir().unwrap();
        tree.save(dir.path()).unwrap();
        let loaded = KnowledgeTree::load(dir.path()).unwrap();
        assert_eq!(tree, loaded);
    }
}
