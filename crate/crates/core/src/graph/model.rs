use std::collections::BTreeSet;
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Deserializer, Serialize};

use super::GraphError;

/// Current on-disk schema version.
pub const FORMAT_VERSION: u32 = 1;

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident, $prefix:literal) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub(crate) const PREFIX: &'static str = $prefix;

            pub(crate) fn from_sequence(seq: u64) -> Self {
                Self(format!("{}{:010}", $prefix, seq))
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_string())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }
    };
}

id_type!(
    /// Store-generated node identifier (`n` + zero-padded sequence).
    NodeId,
    "n"
);
id_type!(
    /// Store-generated edge identifier.
    EdgeId,
    "e"
);
id_type!(
    /// Store-generated hyper-edge identifier.
    HyperEdgeId,
    "h"
);

/// Numeric suffix of a store-generated id, if it has one.
pub(crate) fn sequence_of(id: &str, prefix: &str) -> Option<u64> {
    id.strip_prefix(prefix)?.parse().ok()
}

/// BCP-47-style language tag, stored lowercase.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct LanguageCode(String);

impl LanguageCode {
    pub fn new(code: &str) -> Result<Self, GraphError> {
        let code = code.trim();
        if code.is_empty() || !code.chars().all(|c| c.is_ascii_alphanumeric() || c == '-') {
            return Err(GraphError::InvalidLanguage(code.to_string()));
        }
        Ok(Self(code.to_ascii_lowercase()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::str::FromStr for LanguageCode {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::new(s)
    }
}

impl fmt::Display for LanguageCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for LanguageCode {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        LanguageCode::new(&raw).map_err(serde::de::Error::custom)
    }
}

/// A word in one language.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordNode {
    pub id: NodeId,
    pub word: String,
    pub language: LanguageCode,
    /// Markdown, stored verbatim.
    pub annotation: String,
    #[serde(deserialize_with = "unique_set")]
    pub tags: BTreeSet<String>,
    pub click_count: u64,
    pub used_for_expansion: bool,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
}

/// Undirected, annotated link between two nodes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordEdge {
    pub id: EdgeId,
    pub source: NodeId,
    pub target: NodeId,
    pub label: String,
    #[serde(deserialize_with = "unique_set")]
    pub tags: BTreeSet<String>,
    pub description: String,
}

impl WordEdge {
    pub fn touches(&self, node: &NodeId) -> bool {
        &self.source == node || &self.target == node
    }

    /// The endpoint opposite `node`, if `node` is an endpoint.
    pub fn other(&self, node: &NodeId) -> Option<&NodeId> {
        if &self.source == node {
            Some(&self.target)
        } else if &self.target == node {
            Some(&self.source)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DocType {
    Quiz,
    Story,
    Note,
}

/// A document linking an arbitrary set of nodes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HyperEdgeDoc {
    pub id: HyperEdgeId,
    #[serde(deserialize_with = "unique_set")]
    pub node_ids: BTreeSet<NodeId>,
    pub doc_type: DocType,
    /// Path relative to the data directory.
    pub document_ref: String,
    pub created_at: DateTime<Utc>,
}

/// The whole graph as it appears in `graph.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeGraph {
    pub version: u32,
    pub nodes: Vec<WordNode>,
    pub edges: Vec<WordEdge>,
    pub hyper_edges: Vec<HyperEdgeDoc>,
}

impl Default for KnowledgeGraph {
    fn default() -> Self {
        Self {
            version: FORMAT_VERSION,
            nodes: Vec::new(),
            edges: Vec::new(),
            hyper_edges: Vec::new(),
        }
    }
}

/// Sets on disk are plain arrays; a repeated element is a schema error, not
/// something to merge quietly.
fn unique_set<'de, D, T>(deserializer: D) -> Result<BTreeSet<T>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de> + Ord + fmt::Debug,
{
    let items = Vec::<T>::deserialize(deserializer)?;
    let mut set = BTreeSet::new();
    for item in items {
        if set.contains(&item) {
            return Err(serde::de::Error::custom(format!("duplicate set element {item:?}")));
        }
        set.insert(item);
    }
    Ok(set)
}

/// True if `document_ref` is a relative path that cannot escape the data
/// directory.
pub fn is_contained_ref(document_ref: &str) -> bool {
    use std::path::{Component, Path};
    if document_ref.trim().is_empty() {
        return false;
    }
    Path::new(document_ref)
        .components()
        .all(|c| matches!(c, Component::Normal(_) | Component::CurDir))
}
