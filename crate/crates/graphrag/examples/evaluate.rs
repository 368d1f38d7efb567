//! Dual-mode benchmark run over a scripted three-item dataset.
//!
//! Two questions are answerable from the graph; the third is not, and in
//! reject mode the pipeline abstains on it with the sentinel instead of
//! guessing. The report aggregates accuracy, abstention rate, and cost from
//! per-item records.
//!
//! Run with: cargo run --example evaluate

use graphrag::community::{detect_communities, DetectionParams};
use graphrag::evaluate::{run_benchmark, QAItem, QType};
use graphrag::graph::Graph;
use graphrag::provider::templates::{
    TPL_ANSWER_REJECT, TPL_DECOMPOSE, TPL_JUDGE, TPL_REASON_REFLECT, TPL_SUMMARIZE_COMMUNITY,
};
use graphrag::provider::{ScriptedEmbedder, ScriptedGenerator};
use graphrag::retrieval::{Mode, RetrievalParams, ABSTENTION};
use graphrag::schema::Schema;
use graphrag::tree::build_tree;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let schema = Schema::new(
        ["Person".to_string(), "Place".to_string()],
        ["knows".to_string(), "visited".to_string()],
        ["age".to_string()],
    )?;
    let mut graph = Graph::new();
    graph.add_chunk("c:0", "alice knows bob; bob visited paris");
    let alice = graph.upsert_entity("alice", "Person");
    let bob = graph.upsert_entity("bob", "Person");
    let paris = graph.upsert_entity("paris", "Place");
    graph.add_triple(&alice, "knows", &bob, "c:0")?;
    graph.add_triple(&bob, "visited", &paris, "c:0")?;

    let embedder = ScriptedEmbedder::new(8, 42);
    let mut generator = ScriptedGenerator::new();
    generator.add_fixture(TPL_SUMMARIZE_COMMUNITY, &[], "People\nA small circle.");
    let detection = DetectionParams::default();
    let communities = detect_communities(&graph, &embedder, &detection)?;
    let tree = build_tree(&mut graph, &communities, &generator, &embedder, &detection)?;

    let questions = [
        ("q1", "who does alice know", "bob"),
        ("q2", "where did bob go", "paris"),
        ("q3", "who rules the moon", "nobody"),
    ];
    let dataset: Vec<QAItem> = questions
        .iter()
        .map(|(id, question, gold)| QAItem {
            id: id.to_string(),
            question: question.to_string(),
            gold: vec![gold.to_string()],
            qtype: QType::Freeform,
            options: Vec::new(),
            difficulty: None,
            language: None,
        })
        .collect();

    for (_, q, _) in &questions {
        generator.add_fixture(TPL_DECOMPOSE, &[("question", q)], &format!("entity\t{q}\t"));
    }
    generator.add_fixture(
        TPL_REASON_REFLECT,
        &[("question", questions[0].1)],
        "answer: bob",
    );
    generator.add_fixture(
        TPL_REASON_REFLECT,
        &[("question", questions[1].1)],
        "answer: paris",
    );
    generator.add_fixture(
        TPL_REASON_REFLECT,
        &[("question", questions[2].1)],
        "insufficient",
    );
    generator.add_fixture(TPL_ANSWER_REJECT, &[("query", questions[2].1)], ABSTENTION);
    generator.add_fixture(TPL_JUDGE, &[("predicted", "bob")], "correct");
    generator.add_fixture(TPL_JUDGE, &[("predicted", "paris")], "correct");

    let report = run_benchmark(
        &dataset,
        &tree,
        &graph,
        &schema,
        &generator,
        &embedder,
        Mode::Reject,
        true,
        &RetrievalParams::default(),
    )?;

    println!("{}", report.summary());
    println!();
    for record in &report.records {
        println!(
            "  {}: predicted={:?} verdict={:?} abstained={} iterations={}",
            record.id, record.predicted, record.verdict, record.abstained, record.iterations
        );
    }
    Ok(())
}
