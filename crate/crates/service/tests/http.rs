mod common;

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use graphguide::KernelKind;
use graphguide_service::api::router;
use graphguide_service::SessionManager;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn app(kernel: KernelKind) -> Router {
    router(Arc::new(SessionManager::new(common::sampler(kernel))))
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = req.body(body.map_or(Body::empty(), |b| Body::from(b.to_string()))).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

fn edges(v: &Value) -> Vec<[usize; 2]> {
    serde_json::from_value(v["graph"]["edge_list"].clone()).unwrap()
}

#[tokio::test]
async fn full_session_over_http() {
    let app = app(KernelKind::BitFlip);
    let (status, created) = call(&app, Method::POST, "/sessions", Some(json!({"seed": 5, "n_nodes": 10}))).await;
    assert_eq!(status, StatusCode::CREATED);
    let id = created["id"].as_str().unwrap().to_string();
    assert_eq!(created["t"], common::STEPS);
    assert_eq!(created["status"], "active");
    assert_eq!(created["graph"]["n"], 10);
    assert_eq!(created["graph"]["node_features"].as_array().unwrap().len(), 10);

    let (status, stepped) = call(&app, Method::POST, &format!("/sessions/{id}/step"), Some(json!({"k": 3}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(stepped["t"], common::STEPS - 3);
    let probs = stepped["probs"].as_array().unwrap();
    assert_eq!(probs.len(), 45);
    assert!(probs.iter().all(|p| (0.0..=1.0).contains(&p.as_f64().unwrap())));

    let edit = json!({"add_require": [[0, 1]], "add_forbid": [[2, 3]]});
    let (status, updated) = call(&app, Method::PATCH, &format!("/sessions/{id}/constraints"), Some(edit)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(updated["constraints"]["require"], json!([[0, 1]]));
    assert!(edges(&updated).contains(&[0, 1]));

    let (status, fin) = call(&app, Method::POST, &format!("/sessions/{id}/step"), Some(json!({"k": 1000}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(fin["status"], "finished");
    assert_eq!(fin["t"], 0);
    assert!(edges(&fin).contains(&[0, 1]) && !edges(&fin).contains(&[2, 3]));

    let (status, state) = call(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(state["graph"], fin["graph"]);
    assert_eq!(state["kernel"], "bit-flip");

    let (status, traj) = call(&app, Method::GET, &format!("/sessions/{id}/trajectory"), None).await;
    assert_eq!(status, StatusCode::OK);
    let entries = traj["entries"].as_array().unwrap();
    assert_eq!(entries.len(), common::STEPS + 1);
    assert_eq!(entries.last().unwrap()["t"], 0);

    let (status, err) = call(&app, Method::POST, &format!("/sessions/{id}/step"), Some(json!({"k": 1}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert!(err["error"].as_str().unwrap().contains("finished"));
}

#[tokio::test]
async fn http_errors() {
    let app = app(KernelKind::BitOne);
    let bad = json!({"seed": 1, "constraints": {"n": 10, "require": [[0, 1]], "forbid": [[1, 0]]}});
    let (status, _) = call(&app, Method::POST, "/sessions", Some(bad)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, _) = call(&app, Method::GET, "/sessions/nope", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let (_, created) = call(&app, Method::POST, "/sessions", Some(json!({"seed": 1}))).await;
    let id = created["id"].as_str().unwrap();
    let (status, _) = call(&app, Method::POST, &format!("/sessions/{id}/step"), Some(json!({"k": 0}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let out_of_range = json!({"add_require": [[0, 99]]});
    let (status, _) = call(&app, Method::PATCH, &format!("/sessions/{id}/constraints"), Some(out_of_range)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (_, state) = call(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(state["t"], common::STEPS);
    assert_eq!(state["events"], 1);
}

#[tokio::test]
async fn bit_one_creation_over_http() {
    let app = app(KernelKind::BitOne);
    let req = json!({"seed": 2, "constraints": {"n": 6, "forbid": [[0, 5]]}});
    let (status, created) = call(&app, Method::POST, "/sessions", Some(req)).await;
    assert_eq!(status, StatusCode::CREATED);
    let e = edges(&created);
    assert_eq!(e.len(), 14);
    assert!(!e.contains(&[0, 5]));
}
