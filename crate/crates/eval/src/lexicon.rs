//! A synthetic, language-tagged word universe that stands in for a real
//! model in offline runs. Every reply is a pure function of the request,
//! so runs are reproducible even when executed in parallel.

use std::sync::Arc;

use diymkg_core::llm::{
    ChatRequest, MockBackend, MockReply, DESCRIBE_WORD, FILTER_SAFE, GEN_FIB, GEN_MCQ, JUDGE_QA,
    SUGGEST_RELATED,
};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

/// Stable 64-bit FNV-1a, used to seed per-word generators.
pub fn stable_hash(parts: &[&str]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for part in parts {
        for b in part.bytes().chain([0xff]) {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntheticLexicon {
    /// Words per language.
    pub size: usize,
    /// Related words suggested for each word.
    pub fanout: usize,
    /// Out of 100: how many generated FIB questions the mock judge accepts.
    pub fib_accept_percent: u64,
}

impl Default for SyntheticLexicon {
    fn default() -> Self {
        Self {
            size: 4000,
            fanout: 10,
            fib_accept_percent: 80,
        }
    }
}

impl SyntheticLexicon {
    pub fn word(&self, language: &str, index: usize) -> String {
        format!("{language}{index:05}")
    }

    pub fn words(&self, language: &str) -> Vec<String> {
        (0..self.size).map(|i| self.word(language, i)).collect()
    }

    /// The fixed related-word list of `word`.
    pub fn related(&self, language: &str, word: &str) -> Vec<String> {
        let mut rng = ChaCha8Rng::seed_from_u64(stable_hash(&[language, word]));
        sample(&mut rng, self.size, self.fanout.min(self.size))
            .into_iter()
            .map(|i| self.word(language, i))
            .collect()
    }

    fn suggest(&self, req: &ChatRequest) -> MockReply {
        let language = req.variables.get("language").cloned().unwrap_or_default();
        let word = req.variables.get("word").cloned().unwrap_or_default();
        let items: Vec<Value> = self
            .related(&language, &word)
            .into_iter()
            .map(|w| json!({"word": w, "language": language, "relation": "related", "gloss": ""}))
            .collect();
        MockReply::text(Value::Array(items).to_string())
    }

    fn judge(&self, req: &ChatRequest) -> MockReply {
        let kind = req.variables.get("kind").map(String::as_str).unwrap_or("");
        let question = req.variables.get("question").map(String::as_str).unwrap_or("");
        let accept = kind != "fib" || stable_hash(&[question]) % 100 < self.fib_accept_percent;
        let (verdict, rationale) = if accept {
            ("correct", "The stated answer is the only fitting choice.")
        } else {
            ("incorrect", "Several words could fill the blank.")
        };
        MockReply::text(json!({"verdict": verdict, "rationale": rationale}).to_string())
    }

    /// A mock backend answering every built-in template from this lexicon.
    pub fn mock_backend(self) -> MockBackend {
        let me = Arc::new(self);
        let (s, j) = (me.clone(), me);
        MockBackend::new()
            .generator(SUGGEST_RELATED, move |r| s.suggest(r))
            .generator(DESCRIBE_WORD, |r| {
                let word = r.variables.get("word").cloned().unwrap_or_default();
                MockReply::text(format!("Synthetic dictionary entry for *{word}*."))
            })
            .generator(FILTER_SAFE, |r| {
                MockReply::text(r.variables.get("candidates").cloned().unwrap_or_else(|| "[]".into()))
            })
            .generator(GEN_MCQ, |r| questions(r, "mcq"))
            .generator(GEN_FIB, |r| questions(r, "fib"))
            .generator(JUDGE_QA, move |r| j.judge(r))
    }
}

fn questions(req: &ChatRequest, kind: &str) -> MockReply {
    let words: Vec<String> = req
        .variables
        .get("words")
        .and_then(|w| serde_json::from_str::<Vec<Value>>(w).ok())
        .unwrap_or_default()
        .iter()
        .filter_map(|w| w["word"].as_str().map(str::to_string))
        .collect();
    let items: Vec<Value> = words
        .iter()
        .map(|w| match kind {
            "mcq" => json!({
                "type": "mcq",
                "question": format!("Which word matches the entry for {w}?"),
                "options": [w, format!("{w}a"), format!("{w}b"), format!("{w}c")],
                "answer": w,
                "target_word": w,
            }),
            _ => json!({
                "type": "fib",
                "question": format!("A sentence that needs ____ ({w})."),
                "options": [],
                "answer": w,
                "target_word": w,
            }),
        })
        .collect();
    MockReply::text(Value::Array(items).to_string())
}
