//! A vertically unified GraphRAG engine: schema-bounded extraction into a
//! typed property graph, dual-perception community detection organized as a
//! four-level knowledge tree, a schema-guided agentic retriever with four
//! parallel routes, and a dual-mode (open/reject) evaluation harness.

pub mod cli;
pub mod community;
pub mod config;
pub mod embed;
pub mod error;
pub mod evaluate;
pub mod extract;
pub mod graph;
pub mod parallel;
pub mod provider;
pub mod retrieval;
pub mod schema;
pub mod tree;

pub use error::{Error, Result};
