#![allow(dead_code)]

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

use musicscaffold::{App, Settings};

pub fn app(settings: Settings, seeded: bool) -> Arc<App> {
    let app = App::open(settings).unwrap();
    if seeded {
        app.seed_corpus().unwrap();
    }
    Arc::new(app)
}

pub fn local(dir: &tempfile::TempDir, seeded: bool) -> (Arc<App>, Router) {
    let app = app(Settings::local(dir.path()), seeded);
    let router = musicscaffold::api::router(app.clone());
    (app, router)
}

pub async fn call_raw(router: &Router, method: &str, uri: &str, body: Option<String>) -> (StatusCode, Vec<u8>) {
    let builder = Request::builder().method(method).uri(uri);
    let request = match body {
        Some(b) => builder.header("content-type", "application/json").body(Body::from(b)),
        None => builder.body(Body::empty()),
    }
    .unwrap();
    let response = router.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes)
}

pub async fn call(router: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, bytes) = call_raw(router, method, uri, body.map(|b| b.to_string())).await;
    let value = serde_json::from_slice(&bytes).unwrap_or_else(|e| {
        panic!("{method} {uri} answered non-JSON ({e}): {}", String::from_utf8_lossy(&bytes))
    });
    (status, value)
}

/// Validates `instance` against one definition of the published schema.
pub fn conforms(def: &str, instance: &Value) {
    let mut schema: Value = serde_json::from_str(musicscaffold::SCHEMA).unwrap();
    assert!(schema["$defs"].get(def).is_some(), "schema has no definition {def}");
    schema["$ref"] = Value::String(format!("#/$defs/{def}"));
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator
        .iter_errors(instance)
        .map(|e| format!("{} at {}", e, e.instance_path))
        .collect();
    assert!(errors.is_empty(), "{def} violations: {errors:#?}\ninstance: {instance:#}");
}

/// A throwaway HTTP endpoint answering POSTs with canned replies in turn;
/// the last reply repeats.
pub async fn stub(replies: Vec<(u16, &'static str, Vec<u8>)>) -> (String, Arc<AtomicUsize>) {
    use axum::extract::State;
    use axum::http::header;
    use axum::routing::post;

    type Shared = (Arc<Vec<(u16, &'static str, Vec<u8>)>>, Arc<AtomicUsize>);
    async fn handle(State((replies, count)): State<Shared>) -> axum::response::Response {
        use axum::response::IntoResponse;
        let i = count.fetch_add(1, Ordering::SeqCst).min(replies.len() - 1);
        let (status, content_type, body) = &replies[i];
        (
            StatusCode::from_u16(*status).unwrap(),
            [(header::CONTENT_TYPE, *content_type)],
            body.clone(),
        )
            .into_response()
    }
    let count = Arc::new(AtomicUsize::new(0));
    let router = Router::new()
        .route("/", post(handle))
        .with_state((Arc::new(replies), count.clone()));
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, router).await.unwrap() });
    (format!("http://{addr}/"), count)
}

/// An address nothing listens on.
pub fn dead_endpoint() -> String {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    format!("http://{addr}/")
}
