//! Multilingual knowledge graph: words, pairwise links, document
//! hyper-edges, click statistics and JSON persistence.

mod error;
mod model;
mod store;
mod workspace;

pub use error::GraphError;
pub use model::{
    is_contained_ref, DocType, EdgeId, HyperEdgeDoc, HyperEdgeId, KnowledgeGraph, LanguageCode,
    NodeId, WordEdge, WordNode, FORMAT_VERSION,
};
pub use store::{Clock, EdgeEdit, EdgeSpec, GraphStore, NodeEdit, RemovalReport, Subgraph};
pub use workspace::{
    atomic_write, load_graph, load_store, persist_graph, to_pretty_json, RestoreReport,
    SnapshotRecord, Workspace, GRAPH_FILE, PROMPTS_DIR, QUIZZES_DIR, SNAPSHOTS_DIR,
};
