//! Agentic multi-route retrieval with reflection.
//!
//! Builds a tiny graph and tree, then answers one question with the full
//! agent loop: the scripted generator first asks for a refinement, then
//! accepts an answer on the second pass. The trace shows sub-queries, fused
//! hits per iteration, and the verdicts.
//!
//! Run with: cargo run --example query_agent

use graphrag::community::detect_communities;
use graphrag::community::DetectionParams;
use graphrag::graph::Graph;
use graphrag::provider::templates::{TPL_DECOMPOSE, TPL_REASON_REFLECT, TPL_SUMMARIZE_COMMUNITY};
use graphrag::provider::{ScriptedEmbedder, ScriptedGenerator};
use graphrag::retrieval::{agent_answer, Mode, RetrievalParams};
use graphrag::schema::Schema;
use graphrag::tree::build_tree;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let schema = Schema::new(
        ["Person".to_string(), "Ship".to_string(), "Port".to_string()],
        ["captains".to_string(), "sailed_to".to_string()],
        ["flag".to_string()],
    )?;

    let mut graph = Graph::new();
    graph.add_chunk("log:0", "Granuaile captains the Pirate Queen");
    graph.add_chunk("log:1", "the Pirate Queen sailed to Clew Bay");
    let granuaile = graph.upsert_entity("Granuaile", "Person");
    let ship = graph.upsert_entity("Pirate Queen", "Ship");
    let bay = graph.upsert_entity("Clew Bay", "Port");
    graph.add_triple(&granuaile, "captains", &ship, "log:0")?;
    graph.add_triple(&ship, "sailed_to", &bay, "log:1")?;

    let embedder = ScriptedEmbedder::new(8, 42);
    let mut generator = ScriptedGenerator::new();
    generator.add_fixture(TPL_SUMMARIZE_COMMUNITY, &[], "Sailors\nShips and crews.");
    let params = DetectionParams::default();
    let communities = detect_communities(&graph, &embedder, &params)?;
    let tree = build_tree(&mut graph, &communities, &generator, &embedder, &params)?;

    let question = "where did the ship captained by Granuaile sail?";
    // First pass decomposes into an entity probe; the reflection asks to
    // refine. The second pass (history is now non-empty) decomposes into a
    // path probe and the reflection accepts.
    generator.add_fixture(
        TPL_DECOMPOSE,
        &[("question", question), ("history", "")],
        "entity\twho is Granuaile\tPerson",
    );
    generator.add_fixture(
        TPL_DECOMPOSE,
        &[("question", question)],
        "path\tGranuaile ship destination\tcaptains,sailed_to",
    );
    generator.add_fixture(
        TPL_REASON_REFLECT,
        &[("history", "")],
        "refine: follow the captained ship to its destination",
    );
    generator.add_fixture(TPL_REASON_REFLECT, &[], "answer: Clew Bay");

    let (answer, trace) = agent_answer(
        question,
        &tree,
        &graph,
        &schema,
        &generator,
        &embedder,
        Mode::Open,
        &RetrievalParams::default(),
    )?;

    println!("question: {question}");
    for (i, iteration) in trace.iterations.iter().enumerate() {
        println!("\niteration {}:", i + 1);
        for sub in &iteration.subqueries {
            println!("  sub-query [{:?}] {}", sub.route, sub.text);
        }
        for hit in &iteration.fused {
            println!(
                "  fused {:>9} {:<8} rrf={:.4}  {}",
                hit.kind, hit.id, hit.score, hit.text
            );
        }
        println!("  verdict: {:?}", iteration.verdict);
    }
    println!("\nanswer: {answer}");
    println!(
        "cost: {} llm calls, {} tokens",
        trace.total_cost.llm_calls,
        trace.total_cost.total_tokens()
    );
    Ok(())
}
