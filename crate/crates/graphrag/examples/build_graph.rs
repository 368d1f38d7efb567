//! Schema-bounded triple extraction over a small scripted corpus.
//!
//! A scripted generator stands in for the LLM: each chunk has a canned
//! tab-separated extraction response. One response proposes a relation that
//! is not in the seed schema; it is diverted, pooled across chunks, and
//! accepted into the schema because it clears the confidence threshold with
//! enough distinct supporting chunks.
//!
//! Run with: cargo run --example build_graph

use graphrag::extract::{extract_corpus, Document, ExtractionParams};
use graphrag::provider::templates::TPL_EXTRACT;
use graphrag::provider::ScriptedGenerator;
use graphrag::schema::Schema;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed_schema = Schema::new(
        ["Person".to_string(), "City".to_string()],
        ["lives_in".to_string(), "knows".to_string()],
        ["occupation".to_string()],
    )?;

    let corpus = [
        ("d0", "Ada lives in London and knows Charles."),
        ("d1", "Charles lives in London. Ada mentors Mary."),
        ("d2", "Mary lives in Somerville. Ada mentors Charles."),
    ];
    let documents: Vec<Document> = corpus
        .iter()
        .map(|(id, text)| Document {
            id: id.to_string(),
            text: text.to_string(),
        })
        .collect();

    let mut generator = ScriptedGenerator::new();
    generator.add_fixture(
        TPL_EXTRACT,
        &[("chunk", corpus[0].1)],
        "TRIPLE\tAda\tPerson\tlives_in\tLondon\tCity\t0.95\n\
         TRIPLE\tAda\tPerson\tknows\tCharles\tPerson\t0.9\n\
         ATTR\tAda\tPerson\toccupation\tmathematician\t0.9",
    );
    generator.add_fixture(
        TPL_EXTRACT,
        &[("chunk", corpus[1].1)],
        "TRIPLE\tCharles\tPerson\tlives_in\tLondon\tCity\t0.95\n\
         TRIPLE\tAda\tPerson\tmentors\tMary\tPerson\t0.9",
    );
    generator.add_fixture(
        TPL_EXTRACT,
        &[("chunk", corpus[2].1)],
        "TRIPLE\tMary\tPerson\tlives_in\tSomerville\tCity\t0.95\n\
         TRIPLE\tAda\tPerson\tmentors\tCharles\tPerson\t0.9",
    );

    let params = ExtractionParams::default();
    let (graph, final_schema, cost) =
        extract_corpus(&documents, &seed_schema, &generator, &params)?;

    println!("seed relations:  {:?}", seed_schema.relation_types);
    println!("final relations: {:?}", final_schema.relation_types);
    println!();
    for triple in graph.triples() {
        let head = &graph.entity(&triple.head).unwrap().name;
        let tail = &graph.entity(&triple.tail).unwrap().name;
        println!(
            "  {head} --{}--> {tail}  [{:?}]",
            triple.relation, triple.kind
        );
    }
    println!();
    println!(
        "{} entities, {} triples, {} llm calls, {} tokens",
        graph.entities().count(),
        graph.triples().count(),
        cost.llm_calls,
        cost.total_tokens()
    );
    Ok(())
}
