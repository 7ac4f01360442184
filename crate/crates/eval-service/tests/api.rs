use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use majinlink_core::evaluation::{
    pr_curve, read_labels, resolve_labels, CandidateKey, Label, PlanTask, Resampler,
};
use majinlink_eval_service::{router, Clock, NextTask, ServiceConfig, ServiceState};

fn plan(n: usize) -> Vec<PlanTask> {
    (0..n)
        .map(|i| PlanTask {
            candidate: CandidateKey::new(format!("c{i:03}"), format!("w{i:03}")),
            bin: i % 8,
            title_score: (i * 7 % 101) as f64,
            work_title: format!("Work {i}"),
            author_names: vec![format!("Author {i}")],
            item_ids: vec![format!("item{i}")],
        })
        .collect()
}

fn config(dir: &Path) -> ServiceConfig {
    let mut cfg = ServiceConfig::new(dir.join("labels.jsonl"));
    cfg.resamples = 200;
    cfg.seed = 3;
    cfg
}

fn state(dir: &Path, tasks: Option<Vec<PlanTask>>) -> Arc<ServiceState> {
    Arc::new(ServiceState::new(config(dir), tasks, Clock::manual()).unwrap())
}

async fn call(app: &axum::Router, req: Request<Body>) -> (StatusCode, axum::http::HeaderMap, Value) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let body = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, headers, body)
}

fn next(evaluator: &str) -> Request<Body> {
    Request::get(format!("/api/tasks/next?evaluator_id={evaluator}"))
        .body(Body::empty())
        .unwrap()
}

fn post(body: String) -> Request<Body> {
    Request::post("/api/labels")
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from(body))
        .unwrap()
}

fn label_body(key: &Value, label: &str, evaluator: &str) -> String {
    json!({ "candidate": key, "label": label, "evaluator_id": evaluator }).to_string()
}

fn stats_req() -> Request<Body> {
    Request::get("/api/stats").body(Body::empty()).unwrap()
}

#[tokio::test]
async fn no_plan_is_conflict() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(state(dir.path(), None));
    let (status, _, _) = call(&app, next("a")).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let body = label_body(&json!({"cluster_id": "c", "work_id": "w"}), "yes", "a");
    assert_eq!(call(&app, post(body)).await.0, StatusCode::CONFLICT);
}

#[tokio::test]
async fn serves_each_task_once_then_no_content() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(state(dir.path(), Some(plan(200))));
    let mut seen = BTreeSet::new();
    for _ in 0..200 {
        let (status, _, task) = call(&app, next("solo")).await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(task["status"], "unlabeled");
        assert!(seen.insert(task["candidate"].to_string()), "task served twice");
        let (status, _, _) = call(&app, post(label_body(&task["candidate"], "yes", "solo"))).await;
        assert_eq!(status, StatusCode::CREATED);
    }
    assert_eq!(seen.len(), 200);
    let (status, _, body) = call(&app, next("solo")).await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    assert_eq!(body, Value::Null);
}

#[tokio::test]
async fn round_robin_over_bins() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(state(dir.path(), Some(plan(32))));
    let mut bins = Vec::new();
    for _ in 0..8 {
        let (_, _, task) = call(&app, next("rr")).await;
        bins.push(task["bin"].as_u64().unwrap());
        call(&app, post(label_body(&task["candidate"], "no", "rr"))).await;
    }
    assert_eq!(bins, (0..8).collect::<Vec<_>>());
}

#[tokio::test]
async fn concurrent_clients_never_share_a_live_lease() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(state(dir.path(), Some(plan(60))));
    let mut handles = Vec::new();
    for who in ["alice", "bob"] {
        let app = app.clone();
        handles.push(tokio::spawn(async move {
            let mut mine = Vec::new();
            loop {
                let (status, _, task) = call(&app, next(who)).await;
                if status == StatusCode::NO_CONTENT {
                    break;
                }
                assert_eq!(status, StatusCode::OK);
                mine.push(task["candidate"].to_string());
                let (s, _, _) = call(&app, post(label_body(&task["candidate"], "yes", who))).await;
                assert_eq!(s, StatusCode::CREATED);
            }
            mine
        }));
    }
    let mut all = Vec::new();
    for h in handles {
        all.extend(h.await.unwrap());
    }
    let distinct: BTreeSet<_> = all.iter().collect();
    assert_eq!(all.len(), 60);
    assert_eq!(distinct.len(), 60);
}

#[test]
fn parallel_threads_get_disjoint_leases() {
    let dir = tempfile::tempdir().unwrap();
    let st = state(dir.path(), Some(plan(64)));
    let handles: Vec<_> = (0..8)
        .map(|i| {
            let st = Arc::clone(&st);
            std::thread::spawn(move || {
                (0..8)
                    .map(|j| match st.next_task(&format!("e{i}-{j}")) {
                        NextTask::Task(t) => t.candidate,
                        other => panic!("unexpected {other:?}"),
                    })
                    .collect::<Vec<_>>()
            })
        })
        .collect();
    let keys: Vec<_> = handles.into_iter().flat_map(|h| h.join().unwrap()).collect();
    let distinct: BTreeSet<_> = keys.iter().collect();
    assert_eq!(distinct.len(), 64);
    assert!(matches!(st.next_task("late"), NextTask::AllLeased { .. }));
}

#[tokio::test]
async fn same_evaluator_gets_its_lease_back_and_expiry_releases_it() {
    let dir = tempfile::tempdir().unwrap();
    let st = state(dir.path(), Some(plan(1)));
    let app = router(Arc::clone(&st));
    let (_, _, first) = call(&app, next("a")).await;
    let (_, _, again) = call(&app, next("a")).await;
    assert_eq!(first["candidate"], again["candidate"]);

    let (status, headers, _) = call(&app, next("b")).await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
    let retry: u64 = headers[header::RETRY_AFTER].to_str().unwrap().parse().unwrap();
    assert!(retry > 0 && retry <= 600);

    st.clock().advance(Duration::from_secs(601));
    let (status, _, task) = call(&app, next("b")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(task["candidate"], first["candidate"]);
}

#[tokio::test]
async fn label_validation_statuses() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(state(dir.path(), Some(plan(3))));
    let key = json!({"cluster_id": "c000", "work_id": "w000"});

    assert_eq!(call(&app, post(label_body(&key, "maybe", "a"))).await.0, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(call(&app, post(label_body(&key, "YES", "a"))).await.0, StatusCode::UNPROCESSABLE_ENTITY);
    let unknown = json!({"cluster_id": "c999", "work_id": "w000"});
    assert_eq!(call(&app, post(label_body(&unknown, "yes", "a"))).await.0, StatusCode::NOT_FOUND);
    assert_eq!(call(&app, post("{not json".into())).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(call(&app, post(json!({"label": "yes"}).to_string())).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(call(&app, post(label_body(&key, "yes", " "))).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(call(&app, post(label_body(&json!({"cluster_id": 1}), "yes", "a"))).await.0, StatusCode::BAD_REQUEST);

    let (status, _, body) = call(&app, post(label_body(&key, "yes", "a"))).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(body["stored_labels"], 1);
    let (_, _, body) = call(&app, post(label_body(&key, "no", "a"))).await;
    assert_eq!(body["stored_labels"], 1);
    let (_, _, body) = call(&app, post(label_body(&key, "no", "b"))).await;
    assert_eq!(body["stored_labels"], 2);
}

#[tokio::test]
async fn cors_preflight_allows_any_origin() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(state(dir.path(), Some(plan(1))));
    let req = Request::options("/api/labels")
        .header(header::ORIGIN, "http://localhost:5173")
        .header(header::ACCESS_CONTROL_REQUEST_METHOD, "POST")
        .header(header::ACCESS_CONTROL_REQUEST_HEADERS, "content-type")
        .body(Body::empty())
        .unwrap();
    let (status, headers, _) = call(&app, req).await;
    assert!(status.is_success());
    assert_eq!(headers[header::ACCESS_CONTROL_ALLOW_ORIGIN], "*");
}

fn recompute(dir: &Path, tasks: &[PlanTask], threshold: f64) -> Option<(Option<f64>, Option<f64>, f64)> {
    let stored = read_labels(dir.join("labels.jsonl")).unwrap();
    let resolved = resolve_labels(&stored);
    let scores: Vec<_> = tasks.iter().map(|t| (t.candidate.clone(), t.title_score)).collect();
    let curve = pr_curve(&resolved, &scores, &[threshold], Resampler::Bootstrap { resamples: 200, seed: 3 }).ok()?;
    let p = curve.at(threshold)?;
    Some((p.precision, p.recall, p.retention))
}

#[tokio::test]
async fn scripted_session_matches_recomputation() {
    let dir = tempfile::tempdir().unwrap();
    let tasks = plan(10);
    let app = router(state(dir.path(), Some(tasks.clone())));

    let (_, _, stats) = call(&app, stats_req()).await;
    assert_eq!(stats["labeled"], 0);
    assert_eq!(stats["total"], 10);
    assert_eq!(stats["complete"], false);
    assert_eq!(stats["curve"], Value::Null);

    let verdicts = ["yes", "no", "yes", "unknown", "yes", "yes", "no", "yes", "yes", "no"];
    let mut first_key = Value::Null;
    for (i, v) in verdicts.iter().enumerate() {
        let (status, _, task) = call(&app, next("ev")).await;
        assert_eq!(status, StatusCode::OK);
        if i == 0 {
            first_key = task["candidate"].clone();
        }
        call(&app, post(label_body(&task["candidate"], v, "ev"))).await;
        if i == 4 {
            // Second thoughts on the first task; only the latest label counts.
            let (_, _, body) = call(&app, post(label_body(&first_key, "no", "ev"))).await;
            assert_eq!(body["stored_labels"], 5);
        }
    }
    assert_eq!(call(&app, next("ev")).await.0, StatusCode::NO_CONTENT);

    let (_, _, stats) = call(&app, stats_req()).await;
    assert_eq!(stats["labeled"], 10);
    assert_eq!(stats["stored_labels"], 10);
    assert_eq!(stats["complete"], true);
    let bins_total: u64 = stats["bins"].as_array().unwrap().iter().map(|b| b["total"].as_u64().unwrap()).sum();
    assert_eq!(bins_total, 10);

    let (precision, recall, retention) = recompute(dir.path(), &tasks, 80.0).unwrap();
    let curve = &stats["curve"];
    assert_eq!(curve["precision"].as_f64(), precision);
    assert_eq!(curve["recall"].as_f64(), recall);
    assert_eq!(curve["retention"].as_f64(), Some(retention));
    assert_eq!(curve["conclusive"], 9);
    assert_eq!(curve["unknown"], 1);

    let lines = std::fs::read_to_string(dir.path().join("labels.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 11);
}

#[tokio::test]
async fn restart_replays_the_store() {
    let dir = tempfile::tempdir().unwrap();
    let tasks = plan(4);
    {
        let app = router(state(dir.path(), Some(tasks.clone())));
        for _ in 0..3 {
            let (_, _, task) = call(&app, next("ev")).await;
            call(&app, post(label_body(&task["candidate"], "yes", "ev"))).await;
        }
    }
    let st = state(dir.path(), Some(tasks.clone()));
    let stats = st.stats();
    assert_eq!(stats.labeled, 3);
    assert_eq!(stats.stored_labels, 3);
    let remaining = match st.next_task("ev") {
        NextTask::Task(t) => t.candidate,
        other => panic!("unexpected {other:?}"),
    };
    let labeled: BTreeSet<_> = st.labels().into_iter().map(|l| l.candidate).collect();
    assert!(!labeled.contains(&remaining));
    st.submit(remaining, Label::No, "ev".into()).unwrap();
    assert!(matches!(st.next_task("ev"), NextTask::Done));
    assert!(st.stats().complete);
}

#[tokio::test]
async fn excerpt_reads_first_paragraphs() {
    let dir = tempfile::tempdir().unwrap();
    let texts = dir.path().join("texts");
    std::fs::create_dir(&texts).unwrap();
    let body: String = (0..150).map(|i| format!("para {i}\n\n")).collect();
    std::fs::write(texts.join("item0.txt"), body).unwrap();
    let mut cfg = config(dir.path());
    cfg.texts_dir = Some(texts);
    let st = ServiceState::new(cfg, Some(plan(1)), Clock::manual()).unwrap();
    let NextTask::Task(task) = st.next_task("a") else { panic!("no task") };
    assert_eq!(task.excerpt_item_id.as_deref(), Some("item0"));
    assert_eq!(task.excerpt.len(), 100);
    assert_eq!(task.excerpt[0], "para 0");
    assert_eq!(task.excerpt[99], "para 99");
}

#[test]
fn stats_bins_track_progress() {
    let dir = tempfile::tempdir().unwrap();
    let st = state(dir.path(), Some(plan(16)));
    st.submit(CandidateKey::new("c000", "w000"), Label::Yes, "a".into()).unwrap();
    st.submit(CandidateKey::new("c008", "w008"), Label::Yes, "b".into()).unwrap();
    let by_bin: BTreeMap<usize, (usize, usize)> =
        st.stats().bins.iter().map(|b| (b.bin, (b.labeled, b.total))).collect();
    assert_eq!(by_bin[&0], (2, 2));
    assert_eq!(by_bin[&1], (0, 2));
}
