//! Oracles shared by the acceptance checks. Each one recomputes its answer
//! from plain data instead of trusting the store's own indices.

use std::collections::HashSet;

use diymkg_core::graph::KnowledgeGraph;
use diymkg_core::normalize_word;
use diymkg_core::quiz::{QuestionKind, QuizQuestion};
use diymkg_core::normalize_answer;

/// Referential integrity and uniqueness of a graph document.
pub fn integrity_violation(graph: &KnowledgeGraph) -> Option<String> {
    let mut ids = HashSet::new();
    for id in graph
        .nodes
        .iter()
        .map(|n| n.id.as_str())
        .chain(graph.edges.iter().map(|e| e.id.as_str()))
        .chain(graph.hyper_edges.iter().map(|h| h.id.as_str()))
    {
        if !ids.insert(id) {
            return Some(format!("id {id} appears twice"));
        }
    }
    let nodes: HashSet<&str> = graph.nodes.iter().map(|n| n.id.as_str()).collect();
    let mut words = HashSet::new();
    for n in &graph.nodes {
        if !words.insert((normalize_word(&n.word), n.language.to_string())) {
            return Some(format!("word {:?} ({}) appears twice", n.word, n.language));
        }
    }
    let mut pairs = HashSet::new();
    for e in &graph.edges {
        let (s, t) = (e.source.as_str(), e.target.as_str());
        if !nodes.contains(s) || !nodes.contains(t) {
            return Some(format!("edge {} has a missing endpoint", e.id));
        }
        if s == t {
            return Some(format!("edge {} is a self-loop", e.id));
        }
        if !pairs.insert(if s < t { (s, t) } else { (t, s) }) {
            return Some(format!("edge {} repeats a node pair", e.id));
        }
    }
    for h in &graph.hyper_edges {
        if h.node_ids.len() < 2 {
            return Some(format!("hyper-edge {} has fewer than two members", h.id));
        }
        if let Some(m) = h.node_ids.iter().find(|m| !nodes.contains(m.as_str())) {
            return Some(format!("hyper-edge {} references missing node {m}", h.id));
        }
    }
    None
}

/// Lengths of the maximal runs of three or more underscores.
pub fn underscore_runs(text: &str) -> Vec<usize> {
    let mut runs = Vec::new();
    let mut current = 0;
    for c in text.chars().chain(std::iter::once(' ')) {
        if c == '_' {
            current += 1;
        } else {
            if current >= 3 {
                runs.push(current);
            }
            current = 0;
        }
    }
    runs
}

/// What is wrong with a generated question, if anything.
pub fn question_violation(q: &QuizQuestion) -> Option<String> {
    if q.prompt_text.trim().is_empty() {
        return Some("empty prompt".into());
    }
    if q.correct_answer.trim().is_empty() {
        return Some("empty answer".into());
    }
    match q.kind {
        QuestionKind::Mcq => {
            if q.options.len() != 4 {
                return Some(format!("{} options", q.options.len()));
            }
            let distinct: HashSet<String> = q.options.iter().map(|o| normalize_answer(o)).collect();
            if distinct.len() != 4 {
                return Some("options not distinct".into());
            }
            if !q.options.contains(&q.correct_answer) {
                return Some("answer not among options".into());
            }
        }
        QuestionKind::Fib => {
            if !q.options.is_empty() {
                return Some("fill-in-the-blank with options".into());
            }
            if underscore_runs(&q.prompt_text) != [4] {
                return Some(format!("blanks {:?}", underscore_runs(&q.prompt_text)));
            }
        }
    }
    None
}
