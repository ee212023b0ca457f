use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use diymkg_core::graph::{load_store, Workspace, GRAPH_FILE};
use diymkg_core::llm::{
    LlmBackendConfig, LlmGateway, MockBackend, MockReply, PromptLibrary, FILTER_SAFE, GEN_FIB,
    GEN_MCQ, SUGGEST_RELATED,
};
use diymkg_server::{router, AppState, ERROR_CODES};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn words_of(req: &diymkg_core::llm::ChatRequest) -> Vec<String> {
    let words: Value = serde_json::from_str(&req.variables["words"]).unwrap();
    words
        .as_array()
        .unwrap()
        .iter()
        .map(|w| w["word"].as_str().unwrap().to_string())
        .collect()
}

fn scripted_mock() -> MockBackend {
    MockBackend::new()
        .generator(SUGGEST_RELATED, |r| {
            let base = r.variables["word"].clone();
            let words: Vec<Value> = (0..10)
                .map(|i| json!({"word": format!("{base}{i}"), "language": r.variables["language"], "relation": "related", "gloss": format!("gloss {i}")}))
                .collect();
            MockReply::text(Value::Array(words).to_string())
        })
        .generator(FILTER_SAFE, |r| MockReply::text(r.variables["candidates"].clone()))
        .generator(GEN_MCQ, |r| {
            let qs: Vec<Value> = words_of(r)
                .iter()
                .map(|w| json!({"type": "mcq", "question": format!("Pick {w}"), "options": [w, "b", "c", "d"], "answer": w, "target_word": w}))
                .collect();
            MockReply::text(Value::Array(qs).to_string())
        })
        .generator(GEN_FIB, |r| {
            let qs: Vec<Value> = words_of(r)
                .iter()
                .map(|w| json!({"type": "fib", "question": "Fill ____ here", "answer": w, "target_word": w}))
                .collect();
            MockReply::text(Value::Array(qs).to_string())
        })
}

fn app_with(dir: &Path, mock: MockBackend) -> Router {
    let ws = Workspace::open(dir).unwrap();
    let gw = LlmGateway::with_backend(LlmBackendConfig::mock(), PromptLibrary::builtin(), Arc::new(mock));
    router(AppState::new(ws, gw, false))
}

fn app(dir: &Path) -> Router {
    app_with(dir, scripted_mock())
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let response = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, value)
}

fn assert_error(status: StatusCode, body: &Value, want_status: u16, want_code: &str) {
    assert_eq!(status.as_u16(), want_status, "{body}");
    assert_eq!(body["status"], json!(want_status));
    assert_eq!(body["code"], json!(want_code));
    assert!(body["message"].is_string());
    assert!(ERROR_CODES.contains(&(body["code"].as_str().unwrap(), want_status)));
}

async fn add(app: &Router, word: &str, lang: &str) -> String {
    let (s, v) = call(app, "POST", "/api/nodes", Some(json!({"word": word, "language": lang}))).await;
    assert_eq!(s, StatusCode::CREATED, "{v}");
    v["id"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn empty_graph_shape() {
    let dir = tempfile::tempdir().unwrap();
    let (s, v) = call(&app(dir.path()), "GET", "/api/graph", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v, json!({"version": 1, "nodes": [], "edges": [], "hyper_edges": []}));
}

#[tokio::test]
async fn node_and_edge_crud() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let gato = add(&app, "gato", "es").await;
    let (s, v) = call(&app, "POST", "/api/nodes", Some(json!({"word": " Gato ", "language": "es"}))).await;
    assert_error(s, &v, 409, "DuplicateWord");
    let (s, v) = call(&app, "POST", "/api/nodes", Some(json!({"word": "  ", "language": "es"}))).await;
    assert_error(s, &v, 422, "EmptyWord");

    let perro = add(&app, "perro", "es").await;
    let (s, edge) = call(
        &app,
        "POST",
        "/api/edges",
        Some(json!({"source": gato, "target": perro, "label": "animal", "tags": ["pets"]})),
    )
    .await;
    assert_eq!(s, StatusCode::CREATED);
    let (s, v) = call(&app, "POST", "/api/edges", Some(json!({"source": perro, "target": gato}))).await;
    assert_error(s, &v, 409, "DuplicateEdge");
    let (s, v) = call(&app, "POST", "/api/edges", Some(json!({"source": gato, "target": gato}))).await;
    assert_error(s, &v, 422, "SelfLoop");

    let (s, v) = call(
        &app,
        "PATCH",
        &format!("/api/nodes/{gato}"),
        Some(json!({"annotation": "**cat**", "tags": ["animals"]})),
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["annotation"], "**cat**");
    let edge_id = edge["id"].as_str().unwrap();
    let (s, v) = call(&app, "PATCH", &format!("/api/edges/{edge_id}"), Some(json!({"description": "both pets"}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["label"], "animal");
    assert_eq!(v["description"], "both pets");

    for expected in 1..=2 {
        let (_, v) = call(&app, "POST", &format!("/api/nodes/{gato}/click"), None).await;
        assert_eq!(v["click_count"], json!(expected));
    }

    let (_, v) = call(&app, "GET", "/api/tags/animals", None).await;
    assert_eq!(v["nodes"], json!([gato]));
    let (_, v) = call(&app, "GET", "/api/tags/pets", None).await;
    assert_eq!(v["edges"], json!([edge_id]));

    let (_, v) = call(&app, "GET", "/api/nodes/lookup?word=GATO&language=es", None).await;
    assert_eq!(v["id"], json!(gato));
    let (s, v) = call(&app, "GET", "/api/nodes/lookup?word=pez&language=es", None).await;
    assert_error(s, &v, 404, "NotFound");

    let (s, v) = call(&app, "GET", &format!("/api/nodes/{gato}/subgraph"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["radius"], json!(1));
    assert_eq!(v["nodes"].as_array().unwrap().len(), 2);
    let (s, v) = call(&app, "GET", &format!("/api/nodes/{gato}/subgraph?radius=0"), None).await;
    assert_error(s, &v, 422, "InvalidRadius");
    let (s, v) = call(&app, "GET", &format!("/api/nodes/{gato}/subgraph?radius=x"), None).await;
    assert_error(s, &v, 400, "BadRequest");

    let (s, v) = call(&app, "DELETE", &format!("/api/elements/{perro}"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["edges"], json!([edge_id]));
    let (s, v) = call(&app, "DELETE", &format!("/api/elements/{perro}"), None).await;
    assert_error(s, &v, 404, "NotFound");

    let (_, graph) = call(&app, "GET", "/api/graph", None).await;
    assert_eq!(graph["nodes"].as_array().unwrap().len(), 1);
    assert_eq!(graph["nodes"][0]["click_count"], json!(2));
}

#[tokio::test]
async fn malformed_requests_carry_error_codes() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (s, v) = call(&app, "POST", "/api/nodes", Some(json!({"language": "es"}))).await;
    assert_error(s, &v, 400, "BadRequest");
    let (s, v) = call(&app, "POST", "/api/nodes", Some(json!({"word": "x", "language": "e s"}))).await;
    assert_error(s, &v, 422, "InvalidLanguage");
    let (s, v) = call(&app, "GET", "/api/nope", None).await;
    assert_error(s, &v, 404, "NotFound");
    let (s, v) = call(&app, "DELETE", "/api/graph", None).await;
    assert_error(s, &v, 405, "MethodNotAllowed");
}

#[tokio::test]
async fn expansion_with_model_down_is_502() {
    let dir = tempfile::tempdir().unwrap();
    let app = app_with(dir.path(), MockBackend::new());
    let gato = add(&app, "gato", "es").await;
    let (s, v) = call(&app, "POST", "/api/expand", Some(json!({"chosen_node": gato}))).await;
    assert_error(s, &v, 502, "TransportError");
    let (_, graph) = call(&app, "GET", "/api/graph", None).await;
    assert_eq!(graph["nodes"].as_array().unwrap().len(), 1);
}

#[tokio::test]
async fn selective_expansion() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let gato = add(&app, "gato", "es").await;
    let (s, v) = call(&app, "POST", "/api/expand", Some(json!({"chosen_node": gato, "safe_mode": true}))).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    let candidates = v["candidates"].as_array().unwrap().clone();
    assert_eq!(candidates.len(), 10);
    let batch_id = v["batch_id"].as_str().unwrap().to_string();

    let (_, before) = call(&app, "GET", "/api/graph", None).await;
    let (s, _) = call(
        &app,
        "POST",
        "/api/expand/commit",
        Some(json!({"chosen_node": gato, "batch_id": batch_id, "selected": []})),
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    let (_, after) = call(&app, "GET", "/api/graph", None).await;
    assert_eq!(before, after);

    let (s, report) = call(
        &app,
        "POST",
        "/api/expand/commit",
        Some(json!({"chosen_node": gato, "batch_id": batch_id, "selected": [candidates[2], candidates[7]]})),
    )
    .await;
    assert_eq!(s, StatusCode::OK, "{report}");
    assert_eq!(report["created_nodes"].as_array().unwrap().len(), 2);
    let (_, graph) = call(&app, "GET", "/api/graph", None).await;
    assert_eq!(graph["nodes"].as_array().unwrap().len(), 3);
    assert_eq!(graph["edges"].as_array().unwrap().len(), 2);
    assert_eq!(graph["nodes"][1]["annotation"], "gloss 2");

    let stranger = json!({"word": "pez", "language": "es", "relation": "x", "gloss": ""});
    let (s, v) = call(
        &app,
        "POST",
        "/api/expand/commit",
        Some(json!({"chosen_node": gato, "batch_id": batch_id, "selected": [stranger]})),
    )
    .await;
    assert_error(s, &v, 422, "InvalidSelection");

    // The same picks again link nothing new.
    let (_, again) = call(&app, "POST", "/api/expand", Some(json!({"chosen_node": gato}))).await;
    let known: Vec<bool> = again["candidates"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["already_known"].as_bool().unwrap())
        .collect();
    assert_eq!(known.iter().filter(|k| **k).count(), 2);
}

#[tokio::test]
async fn quiz_flow_persists_flags_and_hyper_edge() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    for w in ["uno", "dos", "tres", "cuatro", "cinco", "seis"] {
        add(&app, w, "es").await;
    }
    let (s, quiz) = call(&app, "POST", "/api/quiz", Some(json!({"n_mcq": 2, "n_fib": 3}))).await;
    assert_eq!(s, StatusCode::OK, "{quiz}");
    let questions = quiz["questions"].as_array().unwrap();
    assert_eq!(questions.len(), 5);
    assert!(questions.iter().all(|q| q.get("correct_answer").is_none()));
    let id = quiz["quiz_id"].as_str().unwrap().to_string();

    let (s, v) = call(&app, "POST", &format!("/api/quiz/{id}/flags"), Some(json!({"flags": [{"index": 0, "flagged": true}]}))).await;
    assert_error(s, &v, 409, "NotGraded");
    let (s, v) = call(&app, "POST", &format!("/api/quiz/{id}/confirm"), None).await;
    assert_error(s, &v, 409, "NotGraded");
    let (s, v) = call(&app, "POST", &format!("/api/quiz/{id}/grade"), Some(json!({"answers": ["x"]}))).await;
    assert_error(s, &v, 422, "LengthMismatch");

    // The mock always answers with the target word; get it from the graph.
    let (_, graph) = call(&app, "GET", "/api/graph", None).await;
    let first_word = graph["nodes"][0]["word"].as_str().unwrap().to_uppercase();
    let answers = json!([first_word, "no", "no", "no", "no"]);
    let (s, graded) = call(&app, "POST", &format!("/api/quiz/{id}/grade"), Some(json!({"answers": answers}))).await;
    assert_eq!(s, StatusCode::OK, "{graded}");
    assert_eq!(graded["correct_count"], json!(1));
    assert_eq!(graded["questions"][0]["is_correct"], json!(true));

    let (s, v) = call(&app, "POST", &format!("/api/quiz/{id}/flags"), Some(json!({"flags": [{"index": 9, "flagged": true}]}))).await;
    assert_error(s, &v, 422, "IndexOutOfRange");
    let (s, flagged) = call(
        &app,
        "POST",
        &format!("/api/quiz/{id}/flags"),
        Some(json!({"flags": [{"index": 1, "flagged": true}, {"index": 4, "flagged": true}]})),
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(flagged["questions"][1]["flagged"], json!(true));

    let (s, report) = call(&app, "POST", &format!("/api/quiz/{id}/confirm"), None).await;
    assert_eq!(s, StatusCode::OK, "{report}");
    let doc_ref = report["document_ref"].as_str().unwrap();
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join(doc_ref)).unwrap()).unwrap();
    let flags: Vec<bool> = doc["questions"].as_array().unwrap().iter().map(|q| q["flagged"].as_bool().unwrap()).collect();
    assert_eq!(flags, [false, true, false, false, true]);

    let hyper = report["hyper_edge"].as_str().unwrap();
    let (s, view) = call(&app, "GET", &format!("/api/hyper_edges/{hyper}/document"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(view["members"].as_array().unwrap().len(), 5);
    assert!(view["content"].as_str().unwrap().contains(&id));

    let (s, v) = call(&app, "POST", "/api/quiz/missing/grade", Some(json!({"answers": []}))).await;
    assert_error(s, &v, 404, "NotFound");
}

#[tokio::test]
async fn quiz_on_empty_graph() {
    let dir = tempfile::tempdir().unwrap();
    let (s, v) = call(&app(dir.path()), "POST", "/api/quiz", Some(json!({}))).await;
    assert_error(s, &v, 409, "EmptyGraph");
}

#[tokio::test]
async fn snapshots_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    add(&app, "gato", "es").await;
    let (s, _) = call(&app, "POST", "/api/snapshots", Some(json!({"name": "week1"}))).await;
    assert_eq!(s, StatusCode::CREATED);
    let (s, v) = call(&app, "POST", "/api/snapshots", Some(json!({"name": "week1"}))).await;
    assert_error(s, &v, 409, "DuplicateSnapshotName");
    let (s, v) = call(&app, "POST", "/api/snapshots", Some(json!({"name": "../x"}))).await;
    assert_error(s, &v, 422, "InvalidSnapshotName");
    let (_, week1) = call(&app, "GET", "/api/graph", None).await;

    add(&app, "perro", "es").await;
    let (s, restored) = call(&app, "POST", "/api/snapshots/week1/restore", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(restored["graph"], week1);
    let (_, now) = call(&app, "GET", "/api/graph", None).await;
    assert_eq!(now, week1);

    let (_, list) = call(&app, "GET", "/api/snapshots", None).await;
    let names: Vec<&str> = list.as_array().unwrap().iter().map(|r| r["name"].as_str().unwrap()).collect();
    assert_eq!(names.len(), 2);
    assert!(names.contains(&"week1"));
    assert!(names.iter().any(|n| n.starts_with("pre-restore-")));

    let (s, v) = call(&app, "POST", "/api/snapshots/nope/restore", None).await;
    assert_error(s, &v, 404, "NotFound");
}

#[tokio::test]
async fn state_survives_restart() {
    let dir = tempfile::tempdir().unwrap();
    let first = app(dir.path());
    let gato = add(&first, "gato", "es").await;
    let perro = add(&first, "perro", "es").await;
    call(&first, "POST", "/api/edges", Some(json!({"source": gato, "target": perro}))).await;
    call(&first, "POST", &format!("/api/nodes/{gato}/click"), None).await;
    let (_, before) = call(&first, "GET", "/api/graph", None).await;
    drop(first);

    let second = app(dir.path());
    let (_, after) = call(&second, "GET", "/api/graph", None).await;
    assert_eq!(before, after);
    // New ids keep counting from where the old process stopped.
    let third = add(&second, "pez", "es").await;
    assert!(third.as_str() > perro.as_str());
}

#[tokio::test]
async fn failed_write_rolls_back() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    add(&app, "gato", "es").await;
    let (_, before) = call(&app, "GET", "/api/graph", None).await;

    // A directory where the temp file should go makes every save fail.
    let blocker = dir.path().join(format!("{GRAPH_FILE}.tmp"));
    std::fs::create_dir(&blocker).unwrap();
    let (s, v) = call(&app, "POST", "/api/nodes", Some(json!({"word": "perro", "language": "es"}))).await;
    assert_error(s, &v, 500, "IoError");
    let (_, now) = call(&app, "GET", "/api/graph", None).await;
    assert_eq!(now, before);
    std::fs::remove_dir(&blocker).unwrap();

    let reopened = Workspace::open(dir.path()).unwrap();
    assert!(reopened
        .store()
        .find_node("perro", &"es".parse().unwrap())
        .is_none());
}

#[tokio::test]
async fn every_mutation_is_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let graph_path = dir.path().join(GRAPH_FILE);
    let mut ids = Vec::new();
    for i in 0..100 {
        match i % 4 {
            0 | 1 => ids.push(add(&app, &format!("w{i}"), "es").await),
            2 => {
                let (a, b) = (&ids[ids.len() - 1], &ids[ids.len() - 2]);
                let (s, _) = call(&app, "POST", "/api/edges", Some(json!({"source": a, "target": b}))).await;
                assert_eq!(s, StatusCode::CREATED);
            }
            _ => {
                let (s, _) = call(&app, "POST", &format!("/api/nodes/{}/click", ids[i % ids.len()]), None).await;
                assert_eq!(s, StatusCode::OK);
            }
        }
        let on_disk = load_store(&graph_path).unwrap().to_graph();
        let (_, live) = call(&app, "GET", "/api/graph", None).await;
        assert_eq!(serde_json::to_value(&on_disk).unwrap(), live, "after mutation {i}");
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 8)]
async fn concurrent_mutations_keep_integrity() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let hub = add(&app, "hub", "es").await;
    let mut tasks = Vec::new();
    for t in 0..8 {
        let app = app.clone();
        let hub = hub.clone();
        tasks.push(tokio::spawn(async move {
            for i in 0..20 {
                // Tasks share words so duplicate races are exercised too.
                let word = format!("w{}", (t * 7 + i) % 40);
                let (s, v) = call(&app, "POST", "/api/nodes", Some(json!({"word": word, "language": "es"}))).await;
                if s == StatusCode::CREATED {
                    let id = v["id"].as_str().unwrap().to_string();
                    call(&app, "POST", "/api/edges", Some(json!({"source": hub, "target": id}))).await;
                    if i % 5 == 0 {
                        call(&app, "DELETE", &format!("/api/elements/{id}"), None).await;
                    }
                } else {
                    assert_eq!(v["code"], "DuplicateWord");
                }
                call(&app, "POST", &format!("/api/nodes/{hub}/click"), None).await;
            }
        }));
    }
    for t in tasks {
        t.await.unwrap();
    }
    let (_, live) = call(&app, "GET", "/api/graph", None).await;
    let store = load_store(&dir.path().join(GRAPH_FILE)).unwrap();
    assert_eq!(serde_json::to_value(store.to_graph()).unwrap(), live);
    let hub_node = store.node(&hub.as_str().into()).unwrap();
    assert_eq!(hub_node.click_count, 160);
    assert!(store.edges().all(|e| e.source.as_str() == hub || e.target.as_str() == hub));
}
