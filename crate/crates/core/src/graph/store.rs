use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::Serialize;

use super::model::{
    is_contained_ref, sequence_of, DocType, EdgeId, HyperEdgeDoc, HyperEdgeId, KnowledgeGraph,
    LanguageCode, NodeId, WordEdge, WordNode, FORMAT_VERSION,
};
use super::GraphError;
use crate::text::normalize_word;

/// Source of timestamps for created_at / updated_at.
pub type Clock = Arc<dyn Fn() -> DateTime<Utc> + Send + Sync>;

/// Partial update for a node. `None` fields are left alone.
#[derive(Debug, Clone, Default)]
pub struct NodeEdit {
    pub word: Option<String>,
    pub annotation: Option<String>,
    pub tags: Option<BTreeSet<String>>,
}

/// Annotation carried by a new edge.
#[derive(Debug, Clone, Default)]
pub struct EdgeSpec {
    pub label: String,
    pub tags: BTreeSet<String>,
    pub description: String,
}

#[derive(Debug, Clone, Default)]
pub struct EdgeEdit {
    pub label: Option<String>,
    pub tags: Option<BTreeSet<String>>,
    pub description: Option<String>,
}

/// Everything a `remove_element` call deleted or touched.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RemovalReport {
    pub nodes: Vec<NodeId>,
    pub edges: Vec<EdgeId>,
    pub hyper_edges: Vec<HyperEdgeId>,
    /// Hyper-edges that lost a member but kept at least two.
    pub hyper_edges_shrunk: Vec<HyperEdgeId>,
}

/// Nodes within some hops of a center node, with the edges among them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Subgraph {
    pub center: NodeId,
    pub radius: u32,
    pub nodes: Vec<WordNode>,
    pub edges: Vec<WordEdge>,
    pub hyper_edges: Vec<HyperEdgeDoc>,
}

/// In-memory multilingual knowledge graph with lookup indices.
///
/// All mutation goes through `&mut self`; callers that share a store across
/// threads wrap it in a lock.
#[derive(Clone)]
pub struct GraphStore {
    nodes: BTreeMap<NodeId, WordNode>,
    edges: BTreeMap<EdgeId, WordEdge>,
    hyper_edges: BTreeMap<HyperEdgeId, HyperEdgeDoc>,
    word_index: HashMap<(String, LanguageCode), NodeId>,
    pair_index: HashMap<(NodeId, NodeId), EdgeId>,
    next_seq: u64,
    clock: Clock,
}

impl fmt::Debug for GraphStore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GraphStore")
            .field("nodes", &self.nodes.len())
            .field("edges", &self.edges.len())
            .field("hyper_edges", &self.hyper_edges.len())
            .field("next_seq", &self.next_seq)
            .finish()
    }
}

impl Default for GraphStore {
    fn default() -> Self {
        Self::new()
    }
}

fn pair_key(a: &NodeId, b: &NodeId) -> (NodeId, NodeId) {
    if a <= b {
        (a.clone(), b.clone())
    } else {
        (b.clone(), a.clone())
    }
}

/// Surface form kept on the node: composed and whitespace-tidied, case kept.
fn surface_form(word: &str) -> String {
    use unicode_normalization::UnicodeNormalization;
    let composed: String = word.nfc().collect();
    composed.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn clean_tags(tags: BTreeSet<String>) -> Result<BTreeSet<String>, GraphError> {
    tags.into_iter()
        .map(|t| {
            let trimmed = t.trim();
            if trimmed.is_empty() {
                Err(GraphError::InvalidTag(t))
            } else {
                Ok(trimmed.to_string())
            }
        })
        .collect()
}

impl GraphStore {
    pub fn new() -> Self {
        Self::with_clock(Arc::new(Utc::now))
    }

    pub fn with_clock(clock: Clock) -> Self {
        Self {
            nodes: BTreeMap::new(),
            edges: BTreeMap::new(),
            hyper_edges: BTreeMap::new(),
            word_index: HashMap::new(),
            pair_index: HashMap::new(),
            next_seq: 1,
            clock,
        }
    }

    pub fn set_clock(&mut self, clock: Clock) {
        self.clock = clock;
    }

    fn now(&self) -> DateTime<Utc> {
        (self.clock)()
    }

    fn next_sequence(&mut self) -> u64 {
        let seq = self.next_seq;
        self.next_seq += 1;
        seq
    }

    // ---- queries ------------------------------------------------------

    pub fn node(&self, id: &NodeId) -> Option<&WordNode> {
        self.nodes.get(id)
    }

    pub fn edge(&self, id: &EdgeId) -> Option<&WordEdge> {
        self.edges.get(id)
    }

    pub fn hyper_edge(&self, id: &HyperEdgeId) -> Option<&HyperEdgeDoc> {
        self.hyper_edges.get(id)
    }

    /// Nodes in id (creation) order.
    pub fn nodes(&self) -> impl Iterator<Item = &WordNode> {
        self.nodes.values()
    }

    pub fn edges(&self) -> impl Iterator<Item = &WordEdge> {
        self.edges.values()
    }

    pub fn hyper_edges(&self) -> impl Iterator<Item = &HyperEdgeDoc> {
        self.hyper_edges.values()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn hyper_edge_count(&self) -> usize {
        self.hyper_edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Lookup by normalized word within one language.
    pub fn find_node(&self, word: &str, language: &LanguageCode) -> Option<NodeId> {
        self.word_index
            .get(&(normalize_word(word), language.clone()))
            .cloned()
    }

    /// Edge linking `a` and `b` in either direction.
    pub fn edge_between(&self, a: &NodeId, b: &NodeId) -> Option<&WordEdge> {
        self.pair_index
            .get(&pair_key(a, b))
            .and_then(|id| self.edges.get(id))
    }

    /// Up to `k` nodes with the fewest clicks, oldest first among ties, then
    /// by id.
    pub fn lowest_click_nodes(
        &self,
        k: usize,
        language_filter: Option<&BTreeSet<LanguageCode>>,
    ) -> Vec<WordNode> {
        let mut pool: Vec<&WordNode> = self
            .nodes
            .values()
            .filter(|n| language_filter.is_none_or(|langs| langs.contains(&n.language)))
            .collect();
        pool.sort_by(|a, b| {
            (a.click_count, a.created_at, &a.id).cmp(&(b.click_count, b.created_at, &b.id))
        });
        pool.into_iter().take(k).cloned().collect()
    }

    /// Exact-match tag search.
    pub fn nodes_with_tag(&self, tag: &str) -> BTreeSet<NodeId> {
        self.nodes
            .values()
            .filter(|n| n.tags.contains(tag))
            .map(|n| n.id.clone())
            .collect()
    }

    /// Nodes never used as an expansion seed, in id order.
    pub fn unused_for_expansion(&self) -> Vec<NodeId> {
        self.nodes
            .values()
            .filter(|n| !n.used_for_expansion)
            .map(|n| n.id.clone())
            .collect()
    }

    pub fn subgraph_of(&self, center: &NodeId, radius: u32) -> Result<Subgraph, GraphError> {
        if radius == 0 {
            return Err(GraphError::InvalidRadius);
        }
        if !self.nodes.contains_key(center) {
            return Err(GraphError::NotFound(center.to_string()));
        }

        let mut adjacency: HashMap<&NodeId, Vec<&NodeId>> = HashMap::new();
        for edge in self.edges.values() {
            adjacency.entry(&edge.source).or_default().push(&edge.target);
            adjacency.entry(&edge.target).or_default().push(&edge.source);
        }

        let mut depth: HashMap<&NodeId, u32> = HashMap::from([(center, 0)]);
        let mut queue = VecDeque::from([center]);
        while let Some(current) = queue.pop_front() {
            let d = depth[current];
            if d == radius {
                continue;
            }
            for &next in adjacency.get(current).into_iter().flatten() {
                if !depth.contains_key(next) {
                    depth.insert(next, d + 1);
                    queue.push_back(next);
                }
            }
        }

        let members: BTreeSet<&NodeId> = depth.keys().copied().collect();
        Ok(Subgraph {
            center: center.clone(),
            radius,
            nodes: members.iter().map(|id| self.nodes[*id].clone()).collect(),
            edges: self
                .edges
                .values()
                .filter(|e| members.contains(&e.source) && members.contains(&e.target))
                .cloned()
                .collect(),
            hyper_edges: self
                .hyper_edges
                .values()
                .filter(|h| h.node_ids.iter().all(|id| members.contains(id)))
                .cloned()
                .collect(),
        })
    }

    // ---- mutations ----------------------------------------------------

    pub fn add_node(
        &mut self,
        word: &str,
        language: LanguageCode,
        annotation: &str,
        tags: BTreeSet<String>,
    ) -> Result<NodeId, GraphError> {
        let key = normalize_word(word);
        if key.is_empty() {
            return Err(GraphError::EmptyWord);
        }
        let tags = clean_tags(tags)?;
        let index_key = (key, language.clone());
        if self.word_index.contains_key(&index_key) {
            return Err(GraphError::DuplicateWord {
                word: word.to_string(),
                language: language.to_string(),
            });
        }
        let id = NodeId::from_sequence(self.next_sequence());
        let now = self.now();
        self.nodes.insert(
            id.clone(),
            WordNode {
                id: id.clone(),
                word: surface_form(word),
                language,
                annotation: annotation.to_string(),
                tags,
                click_count: 0,
                used_for_expansion: false,
                created_at: now,
                updated_at: now,
            },
        );
        self.word_index.insert(index_key, id.clone());
        Ok(id)
    }

    pub fn edit_node(&mut self, id: &NodeId, edit: NodeEdit) -> Result<WordNode, GraphError> {
        let current = self
            .nodes
            .get(id)
            .ok_or_else(|| GraphError::NotFound(id.to_string()))?;
        let tags = edit.tags.map(clean_tags).transpose()?;

        let mut reindex = None;
        if let Some(word) = &edit.word {
            let key = normalize_word(word);
            if key.is_empty() {
                return Err(GraphError::EmptyWord);
            }
            let new_key = (key, current.language.clone());
            match self.word_index.get(&new_key) {
                Some(owner) if owner != id => {
                    return Err(GraphError::DuplicateWord {
                        word: word.clone(),
                        language: current.language.to_string(),
                    })
                }
                _ => {}
            }
            let old_key = (normalize_word(&current.word), current.language.clone());
            reindex = Some((old_key, new_key));
        }

        let now = self.now();
        let node = self.nodes.get_mut(id).expect("checked above");
        if let Some(word) = edit.word {
            node.word = surface_form(&word);
        }
        if let Some(annotation) = edit.annotation {
            node.annotation = annotation;
        }
        if let Some(tags) = tags {
            node.tags = tags;
        }
        node.updated_at = now;
        let updated = node.clone();

        if let Some((old_key, new_key)) = reindex {
            self.word_index.remove(&old_key);
            self.word_index.insert(new_key, id.clone());
        }
        Ok(updated)
    }

    pub fn increment_click(&mut self, id: &NodeId) -> Result<u64, GraphError> {
        let node = self
            .nodes
            .get_mut(id)
            .ok_or_else(|| GraphError::NotFound(id.to_string()))?;
        node.click_count += 1;
        Ok(node.click_count)
    }

    /// Idempotent.
    pub fn mark_used_for_expansion(&mut self, id: &NodeId) -> Result<(), GraphError> {
        let node = self
            .nodes
            .get_mut(id)
            .ok_or_else(|| GraphError::NotFound(id.to_string()))?;
        node.used_for_expansion = true;
        Ok(())
    }

    pub fn add_edge(
        &mut self,
        source: &NodeId,
        target: &NodeId,
        spec: EdgeSpec,
    ) -> Result<EdgeId, GraphError> {
        for end in [source, target] {
            if !self.nodes.contains_key(end) {
                return Err(GraphError::NotFound(end.to_string()));
            }
        }
        if source == target {
            return Err(GraphError::SelfLoop(source.to_string()));
        }
        let key = pair_key(source, target);
        if self.pair_index.contains_key(&key) {
            return Err(GraphError::DuplicateEdge(source.to_string(), target.to_string()));
        }
        let tags = clean_tags(spec.tags)?;
        let id = EdgeId::from_sequence(self.next_sequence());
        self.edges.insert(
            id.clone(),
            WordEdge {
                id: id.clone(),
                source: source.clone(),
                target: target.clone(),
                label: spec.label,
                tags,
                description: spec.description,
            },
        );
        self.pair_index.insert(key, id.clone());
        Ok(id)
    }

    pub fn edit_edge(&mut self, id: &EdgeId, edit: EdgeEdit) -> Result<WordEdge, GraphError> {
        let tags = edit.tags.map(clean_tags).transpose()?;
        let edge = self
            .edges
            .get_mut(id)
            .ok_or_else(|| GraphError::NotFound(id.to_string()))?;
        if let Some(label) = edit.label {
            edge.label = label;
        }
        if let Some(tags) = tags {
            edge.tags = tags;
        }
        if let Some(description) = edit.description {
            edge.description = description;
        }
        Ok(edge.clone())
    }

    pub fn add_hyper_edge(
        &mut self,
        node_ids: BTreeSet<NodeId>,
        doc_type: DocType,
        document_ref: &str,
    ) -> Result<HyperEdgeId, GraphError> {
        if let Some(missing) = node_ids.iter().find(|id| !self.nodes.contains_key(*id)) {
            return Err(GraphError::NotFound(missing.to_string()));
        }
        if node_ids.len() < 2 {
            return Err(GraphError::TooFewNodes(node_ids.len()));
        }
        if !is_contained_ref(document_ref) {
            return Err(GraphError::InvalidDocumentRef(document_ref.to_string()));
        }
        let id = HyperEdgeId::from_sequence(self.next_sequence());
        let created_at = self.now();
        self.hyper_edges.insert(
            id.clone(),
            HyperEdgeDoc {
                id: id.clone(),
                node_ids,
                doc_type,
                document_ref: document_ref.to_string(),
                created_at,
            },
        );
        Ok(id)
    }

    /// Removes a node, edge, or hyper-edge by id. Node removal cascades to
    /// incident edges and shrinks (or drops) hyper-edges that contained it.
    pub fn remove_element(&mut self, id: &str) -> Result<RemovalReport, GraphError> {
        let mut report = RemovalReport::default();

        let node_id = NodeId::from(id);
        if let Some(node) = self.nodes.remove(&node_id) {
            self.word_index
                .remove(&(normalize_word(&node.word), node.language.clone()));

            let incident: Vec<EdgeId> = self
                .edges
                .values()
                .filter(|e| e.touches(&node_id))
                .map(|e| e.id.clone())
                .collect();
            for edge_id in incident {
                let edge = self.edges.remove(&edge_id).expect("listed above");
                self.pair_index.remove(&pair_key(&edge.source, &edge.target));
                report.edges.push(edge_id);
            }

            let mut dropped = Vec::new();
            for hyper in self.hyper_edges.values_mut() {
                if hyper.node_ids.remove(&node_id) {
                    if hyper.node_ids.len() < 2 {
                        dropped.push(hyper.id.clone());
                    } else {
                        report.hyper_edges_shrunk.push(hyper.id.clone());
                    }
                }
            }
            for hyper_id in dropped {
                self.hyper_edges.remove(&hyper_id);
                report.hyper_edges.push(hyper_id);
            }
            report.nodes.push(node_id);
            return Ok(report);
        }

        let edge_id = EdgeId::from(id);
        if let Some(edge) = self.edges.remove(&edge_id) {
            self.pair_index.remove(&pair_key(&edge.source, &edge.target));
            report.edges.push(edge_id);
            return Ok(report);
        }

        let hyper_id = HyperEdgeId::from(id);
        if self.hyper_edges.remove(&hyper_id).is_some() {
            report.hyper_edges.push(hyper_id);
            return Ok(report);
        }

        Err(GraphError::NotFound(id.to_string()))
    }

    // ---- conversion ---------------------------------------------------

    /// Serializable view, collections in id order.
    pub fn to_graph(&self) -> KnowledgeGraph {
        KnowledgeGraph {
            version: FORMAT_VERSION,
            nodes: self.nodes.values().cloned().collect(),
            edges: self.edges.values().cloned().collect(),
            hyper_edges: self.hyper_edges.values().cloned().collect(),
        }
    }

    /// Builds a store from a parsed graph, rejecting anything that breaks an
    /// invariant. Errors name the first offending id.
    pub fn from_graph(graph: KnowledgeGraph) -> Result<Self, GraphError> {
        if graph.version != FORMAT_VERSION {
            return Err(GraphError::SchemaVersionMismatch {
                found: graph.version.into(),
                expected: FORMAT_VERSION,
            });
        }
        let integrity = |id: &dyn fmt::Display, reason: &str| GraphError::Integrity {
            id: id.to_string(),
            reason: reason.to_string(),
        };

        let mut store = GraphStore::new();
        let mut all_ids: BTreeSet<String> = BTreeSet::new();
        let mut max_seq = 0u64;
        let mut claim = |id: &str, prefix: &str| -> bool {
            if let Some(seq) = sequence_of(id, prefix) {
                max_seq = max_seq.max(seq);
            }
            !id.is_empty() && all_ids.insert(id.to_string())
        };

        for node in graph.nodes {
            if !claim(node.id.as_str(), NodeId::PREFIX) {
                return Err(integrity(&node.id, "empty or duplicate id"));
            }
            let key = normalize_word(&node.word);
            if key.is_empty() {
                return Err(integrity(&node.id, "word is empty"));
            }
            if node.tags.iter().any(|t| t.trim().is_empty() || t.trim() != t) {
                return Err(integrity(&node.id, "tag is empty or padded"));
            }
            let index_key = (key, node.language.clone());
            if let Some(other) = store.word_index.get(&index_key) {
                return Err(integrity(
                    &node.id,
                    &format!("duplicates word of node {other}"),
                ));
            }
            store.word_index.insert(index_key, node.id.clone());
            store.nodes.insert(node.id.clone(), node);
        }

        for edge in graph.edges {
            if !claim(edge.id.as_str(), EdgeId::PREFIX) {
                return Err(integrity(&edge.id, "empty or duplicate id"));
            }
            for end in [&edge.source, &edge.target] {
                if !store.nodes.contains_key(end) {
                    return Err(integrity(
                        &edge.id,
                        &format!("endpoint {end} does not exist"),
                    ));
                }
            }
            if edge.source == edge.target {
                return Err(integrity(&edge.id, "self loop"));
            }
            if edge.tags.iter().any(|t| t.trim().is_empty() || t.trim() != t) {
                return Err(integrity(&edge.id, "tag is empty or padded"));
            }
            let key = pair_key(&edge.source, &edge.target);
            if let Some(other) = store.pair_index.get(&key) {
                return Err(integrity(
                    &edge.id,
                    &format!("links the same pair as edge {other}"),
                ));
            }
            store.pair_index.insert(key, edge.id.clone());
            store.edges.insert(edge.id.clone(), edge);
        }

        for hyper in graph.hyper_edges {
            if !claim(hyper.id.as_str(), HyperEdgeId::PREFIX) {
                return Err(integrity(&hyper.id, "empty or duplicate id"));
            }
            if let Some(missing) = hyper.node_ids.iter().find(|n| !store.nodes.contains_key(*n)) {
                return Err(integrity(
                    &hyper.id,
                    &format!("member {missing} does not exist"),
                ));
            }
            if hyper.node_ids.len() < 2 {
                return Err(integrity(&hyper.id, "fewer than 2 member nodes"));
            }
            if !is_contained_ref(&hyper.document_ref) {
                return Err(integrity(
                    &hyper.id,
                    "document_ref escapes the data directory",
                ));
            }
            store.hyper_edges.insert(hyper.id.clone(), hyper);
        }

        store.next_seq = max_seq + 1;
        Ok(store)
    }
}
