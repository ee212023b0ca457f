use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};

use diymkg_core::graph::{
    load_store, persist_graph, DocType, EdgeSpec, GraphStore, LanguageCode, NodeEdit, NodeId,
};
use diymkg_core::normalize_word;
use proptest::prelude::*;

const WORDS: &[&str] = &["gato", "Gato", "perro", "casa", "CASA ", "árbol", "Straße", "strasse", "sol", "luna"];
const LANGS: &[&str] = &["es", "de", "fr"];

#[derive(Debug, Clone)]
enum Op {
    AddNode(usize, usize),
    EditWord(usize, usize),
    Remove(usize),
    AddEdge(usize, usize),
    Click(usize),
    AddHyper(Vec<usize>),
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        4 => (0..WORDS.len(), 0..LANGS.len()).prop_map(|(w, l)| Op::AddNode(w, l)),
        1 => (any::<usize>(), 0..WORDS.len()).prop_map(|(n, w)| Op::EditWord(n, w)),
        1 => any::<usize>().prop_map(Op::Remove),
        3 => (any::<usize>(), any::<usize>()).prop_map(|(a, b)| Op::AddEdge(a, b)),
        2 => any::<usize>().prop_map(Op::Click),
        1 => prop::collection::vec(any::<usize>(), 0..4).prop_map(Op::AddHyper),
    ]
}

fn pick(store: &GraphStore, i: usize) -> Option<NodeId> {
    let ids: Vec<NodeId> = store.nodes().map(|n| n.id.clone()).collect();
    (!ids.is_empty()).then(|| ids[i % ids.len()].clone())
}

fn pick_any(store: &GraphStore, i: usize) -> Option<String> {
    let ids: Vec<String> = store
        .nodes()
        .map(|n| n.id.to_string())
        .chain(store.edges().map(|e| e.id.to_string()))
        .chain(store.hyper_edges().map(|h| h.id.to_string()))
        .collect();
    (!ids.is_empty()).then(|| ids[i % ids.len()].clone())
}

fn apply(store: &mut GraphStore, op: &Op) {
    // Rejected operations are fine; the invariants must hold regardless.
    match op {
        Op::AddNode(w, l) => {
            let _ = store.add_node(WORDS[*w], LanguageCode::new(LANGS[*l]).unwrap(), "", BTreeSet::new());
        }
        Op::EditWord(n, w) => {
            if let Some(id) = pick(store, *n) {
                let edit = NodeEdit { word: Some(WORDS[*w].to_string()), ..Default::default() };
                let _ = store.edit_node(&id, edit);
            }
        }
        Op::Remove(i) => {
            if let Some(id) = pick_any(store, *i) {
                store.remove_element(&id).unwrap();
            }
        }
        Op::AddEdge(a, b) => {
            if let (Some(a), Some(b)) = (pick(store, *a), pick(store, *b)) {
                let _ = store.add_edge(&a, &b, EdgeSpec::default());
            }
        }
        Op::Click(i) => {
            if let Some(id) = pick(store, *i) {
                store.increment_click(&id).unwrap();
            }
        }
        Op::AddHyper(members) => {
            let ids: BTreeSet<NodeId> = members.iter().filter_map(|i| pick(store, *i)).collect();
            let _ = store.add_hyper_edge(ids, DocType::Note, "notes/n.md");
        }
    }
}

/// Checks every structural invariant from scratch, without using the
/// store's own indices.
fn check_integrity(store: &GraphStore) -> Result<(), String> {
    let nodes: HashSet<&NodeId> = store.nodes().map(|n| &n.id).collect();
    let mut all_ids = HashSet::new();
    for id in store
        .nodes()
        .map(|n| n.id.to_string())
        .chain(store.edges().map(|e| e.id.to_string()))
        .chain(store.hyper_edges().map(|h| h.id.to_string()))
    {
        if !all_ids.insert(id.clone()) {
            return Err(format!("id {id} reused"));
        }
    }
    let mut words = HashSet::new();
    for n in store.nodes() {
        if !words.insert((normalize_word(&n.word), n.language.clone())) {
            return Err(format!("duplicate word {:?}/{}", n.word, n.language));
        }
    }
    let mut pairs = HashSet::new();
    for e in store.edges() {
        if !nodes.contains(&e.source) || !nodes.contains(&e.target) {
            return Err(format!("edge {} dangles", e.id));
        }
        if e.source == e.target {
            return Err(format!("edge {} is a self-loop", e.id));
        }
        let pair = if e.source < e.target { (&e.source, &e.target) } else { (&e.target, &e.source) };
        if !pairs.insert(pair) {
            return Err(format!("edge {} duplicates a pair", e.id));
        }
    }
    for h in store.hyper_edges() {
        if h.node_ids.len() < 2 {
            return Err(format!("hyper-edge {} has {} members", h.id, h.node_ids.len()));
        }
        if let Some(m) = h.node_ids.iter().find(|m| !nodes.contains(m)) {
            return Err(format!("hyper-edge {} references missing {m}", h.id));
        }
    }
    Ok(())
}

fn bfs_oracle(store: &GraphStore, center: &NodeId, radius: u32) -> BTreeSet<NodeId> {
    let mut seen = BTreeSet::from([center.clone()]);
    let mut frontier = VecDeque::from([(center.clone(), 0u32)]);
    while let Some((n, d)) = frontier.pop_front() {
        if d == radius {
            continue;
        }
        for e in store.edges() {
            let next = if e.source == n {
                &e.target
            } else if e.target == n {
                &e.source
            } else {
                continue;
            };
            if seen.insert(next.clone()) {
                frontier.push_back((next.clone(), d + 1));
            }
        }
    }
    seen
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_operations_keep_invariants(ops in prop::collection::vec(op(), 1..120)) {
        let mut store = GraphStore::new();
        let mut clicks: BTreeMap<NodeId, u64> = BTreeMap::new();
        for op in &ops {
            apply(&mut store, op);
            if let Err(e) = check_integrity(&store) {
                prop_assert!(false, "after {:?}: {}", op, e);
            }
            for n in store.nodes() {
                let before = clicks.insert(n.id.clone(), n.click_count).unwrap_or(0);
                prop_assert!(n.click_count >= before, "click count of {} went down", n.id);
            }
        }

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("graph.json");
        let graph = store.to_graph();
        persist_graph(&graph, &path).unwrap();
        let loaded = load_store(&path).unwrap();
        prop_assert_eq!(&loaded.to_graph(), &graph);
        persist_graph(&loaded.to_graph(), &path).unwrap();
        prop_assert_eq!(load_store(&path).unwrap().to_graph(), graph);
    }

    #[test]
    fn subgraph_matches_bfs(
        n in 1usize..50,
        raw_edges in prop::collection::vec((0usize..50, 0usize..50), 0..120),
        center in 0usize..50,
        radius in 1u32..5,
    ) {
        let mut store = GraphStore::new();
        let es = LanguageCode::new("es").unwrap();
        let ids: Vec<NodeId> = (0..n)
            .map(|i| store.add_node(&format!("w{i}"), es.clone(), "", BTreeSet::new()).unwrap())
            .collect();
        for (a, b) in raw_edges {
            let _ = store.add_edge(&ids[a % n], &ids[b % n], EdgeSpec::default());
        }
        let center = &ids[center % n];
        let sub = store.subgraph_of(center, radius).unwrap();
        let got: BTreeSet<NodeId> = sub.nodes.iter().map(|x| x.id.clone()).collect();
        let expected = bfs_oracle(&store, center, radius);
        prop_assert_eq!(&got, &expected);
        let expected_edges: BTreeSet<_> = store
            .edges()
            .filter(|e| expected.contains(&e.source) && expected.contains(&e.target))
            .map(|e| e.id.clone())
            .collect();
        let got_edges: BTreeSet<_> = sub.edges.iter().map(|e| e.id.clone()).collect();
        prop_assert_eq!(got_edges, expected_edges);
    }

    #[test]
    fn lowest_click_is_prefix_of_full_order(
        clicks in prop::collection::vec(0u64..5, 1..30),
        k in 0usize..35,
    ) {
        let mut store = GraphStore::new();
        let es = LanguageCode::new("es").unwrap();
        let mut expected = Vec::new();
        for (i, c) in clicks.iter().enumerate() {
            let id = store.add_node(&format!("w{i}"), es.clone(), "", BTreeSet::new()).unwrap();
            for _ in 0..*c {
                store.increment_click(&id).unwrap();
            }
            expected.push((*c, i, id));
        }
        expected.sort();
        let want: Vec<NodeId> = expected.into_iter().take(k).map(|(_, _, id)| id).collect();
        let got: Vec<NodeId> = store.lowest_click_nodes(k, None).into_iter().map(|n| n.id).collect();
        prop_assert_eq!(got, want);
    }
}
