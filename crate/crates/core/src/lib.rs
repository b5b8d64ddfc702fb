//! A knowledge-network engine. Concepts live in autonomous nodes (KNNs),
//! connected by directed links that carry up to three signed performance
//! properties. Facts enter through a small line-oriented DSL; knowledge
//! threads (simple directed walks from a seed concept) come back out.
//!
//! ```
//! use informledge::{embed_text, retrieve_threads, Graph, RetrievalOptions};
//!
//! let mut graph = Graph::new();
//! let report = embed_text(
//!     &mut graph,
//!     "domain computing\n\
//!      link computer -> store : additive\n\
//!      link computer -> retrieve : additive\n\
//!      link computer -> process : additive\n",
//! )?;
//! assert_eq!((report.knns_created, report.links_created), (4, 3));
//!
//! let computer = graph.find("computing", "computer").unwrap();
//! let threads = retrieve_threads(&graph, computer, &RetrievalOptions::default())?;
//! assert_eq!(threads.len(), 3);
//! assert!(threads.iter().all(|t| t.strength() == 1));
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```
//!
//! The guide under `book/` walks through each piece; its code listings are
//! compiled and run as doctests of this crate.

pub mod cli;
pub mod encoder;
pub mod linkdb;
pub mod model;
pub mod store;
pub mod threader;

pub use encoder::{
    embed, embed_text, parse_statements, property_tokens, render, EmbedReport, EmbedStatement,
    ParseErrors,
};
pub use linkdb::{Direction, Graph, InferenceRule, LinkDbError, LinkProposal, Validation};
pub use model::{
    encode_signature, thread_strength, Axis, Knn, KnnId, KnowledgeThread, Link, LinkId, LinkKind,
    LinkProperties, LinkSignature, Performance, PerformancePolarity, Sign,
};
pub use store::{export_dot, load, save, DotOptions, StoreError};
pub use threader::{
    cone_level, retrieve_threads, stats_table, thread_stats, RetrievalOptions, Retriever,
    ThreadStats,
};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/links.md")]
    pub struct Links;
    #[doc = include_str!("../../../book/src/threads.md")]
    pub struct Threads;
    #[doc = include_str!("../../../book/src/embedding.md")]
    pub struct Embedding;
    #[doc = include_str!("../../../book/src/unnatural.md")]
    pub struct Unnatural;
    #[doc = include_str!("../../../book/src/snapshots.md")]
    pub struct Snapshots;
    #[doc = include_str!("../../../book/src/cli.md")]
    pub struct Cli;
}
