//! Dual-perception community detection and knowledge-tree construction.
//!
//! Builds two link clusters with disjoint relation vocabularies, steers the
//! deterministic embedder so each cluster shares a semantic direction, then
//! detects communities and assembles the four-level tree (communities →
//! keywords → triples → attributes).
//!
//! Run with: cargo run --example detect_communities

use graphrag::community::{detect_communities, DetectionParams};
use graphrag::graph::Graph;
use graphrag::provider::templates::TPL_SUMMARIZE_COMMUNITY;
use graphrag::provider::{ScriptedEmbedder, ScriptedGenerator};
use graphrag::tree::build_tree;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut graph = Graph::new();
    let mut embedder = ScriptedEmbedder::new(8, 42);

    // Cluster 0: a band. Cluster 1: a mountain range. Orthogonal embeddings
    // keep the semantic term of the affinity score cleanly separated.
    let groups = [
        ("band", "plays_with", ["Lena", "Sol", "Harriet", "Piotr"]),
        (
            "range",
            "adjacent_to",
            ["Eiger", "Monch", "Jungfrau", "Schreckhorn"],
        ),
    ];
    for (g, (tag, relation, names)) in groups.iter().enumerate() {
        let mut direction = vec![0.0; 8];
        direction[g] = 1.0;
        embedder.set_override(relation, direction.clone());
        let hub = graph.upsert_entity(names[0], "Thing");
        for name in names {
            embedder.set_override(name, direction.clone());
            let id = graph.upsert_entity(name, "Thing");
            if id != hub {
                graph.add_triple(&hub, relation, &id, "")?;
            }
        }
        println!("planted {tag}: {names:?}");
    }

    let mut generator = ScriptedGenerator::new();
    generator.add_fixture(
        TPL_SUMMARIZE_COMMUNITY,
        &[("members", "Lena, Sol, Harriet, Piotr")],
        "The Quartet\nFour musicians who play together.",
    );
    generator.add_fixture(
        TPL_SUMMARIZE_COMMUNITY,
        &[("members", "Eiger, Monch, Jungfrau, Schreckhorn")],
        "Bernese Peaks\nNeighboring summits in one massif.",
    );

    let params = DetectionParams::default();
    let communities = detect_communities(&graph, &embedder, &params)?;
    let tree = build_tree(&mut graph, &communities, &generator, &embedder, &params)?;

    println!();
    for community in &tree.communities {
        let members: Vec<&str> = community
            .members
            .iter()
            .map(|id| graph.entity(id).unwrap().name.as_str())
            .collect();
        let center = &graph.entity(&community.center).unwrap().name;
        println!("community {}: {}", community.index, community.name);
        println!("  description: {}", community.description);
        println!("  members: {members:?}  center: {center}");
        let keywords: Vec<&str> = community
            .keywords
            .iter()
            .map(|id| graph.entity(id).unwrap().name.as_str())
            .collect();
        println!("  keywords: {keywords:?}");
    }
    println!();
    println!(
        "tree indexes — entities: {}, triples: {}, communities: {}, keywords: {}, attributes: {}",
        tree.entity_index.keys().count(),
        tree.triple_index.keys().count(),
        tree.community_index.keys().count(),
        tree.keyword_index.keys().count(),
        tree.attribute_index.keys().count(),
    );
    Ok(())
}
