use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use axum::Router;
use forgespark_service::http::router;
use forgespark_service::{ForgeConfig, SessionManager};
use serde_json::{json, Value};
use tower::ServiceExt;

const CALC: &str = "fn abs(x: int) -> int {
    if (x < 0) {
        return -x;
    }
    return x;
}
";

fn app() -> (tempfile::TempDir, std::sync::Arc<SessionManager>, Router) {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("calc.ml"), CALC).unwrap();
    let mut config = ForgeConfig::default();
    config.sbst.seed = Some(3);
    config.sbst.population = 20;
    config.sbst.max_evaluations = 1_000;
    let manager = SessionManager::new(dir.path(), config);
    let app = router(manager.clone());
    (dir, manager, app)
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let body = body.map_or_else(Body::empty, |b| Body::from(b.to_string()));
    let request = Request::builder()
        .method(method)
        .uri(uri)
        .body(body)
        .unwrap();
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = to_bytes(response.into_body(), usize::MAX).await.unwrap();
    (
        status,
        serde_json::from_slice(&bytes).unwrap_or(Value::Null),
    )
}

fn create_body() -> Value {
    json!({"uut": {"kind": "function", "file": "calc.ml", "function": "abs"}, "technique": "sbst"})
}

#[tokio::test(flavor = "multi_thread")]
async fn index_page_is_served() {
    let (_dir, _m, app) = app();
    let request = Request::builder().uri("/").body(Body::empty()).unwrap();
    let response = app.oneshot(request).await.unwrap();
    assert_eq!(response.status(), StatusCode::OK);
    let bytes = to_bytes(response.into_body(), usize::MAX).await.unwrap();
    assert!(String::from_utf8_lossy(&bytes).contains("<html"));
}

#[tokio::test(flavor = "multi_thread")]
async fn session_lifecycle_over_http() {
    let (_dir, manager, app) = app();
    let (status, created) = call(&app, "POST", "/api/sessions", Some(create_body())).await;
    assert_eq!(status, StatusCode::CREATED);
    let id = created["id"].as_str().unwrap().to_string();
    let m = manager.clone();
    let wid = id.clone();
    tokio::task::spawn_blocking(move || m.wait(&wid, std::time::Duration::from_secs(30)))
        .await
        .unwrap()
        .unwrap();

    let (status, view) = call(&app, "GET", &format!("/api/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(view["phase"], "ready");

    let (_, list) = call(&app, "GET", "/api/sessions", None).await;
    assert_eq!(list.as_array().unwrap().len(), 1);

    let (status, tests) = call(&app, "GET", &format!("/api/sessions/{id}/tests"), None).await;
    assert_eq!(status, StatusCode::OK);
    let first = tests["tests"][0]["id"].as_str().unwrap().to_string();
    let total = tests["tests"].as_array().unwrap().len();
    assert_eq!(tests["selected"], total);

    let (status, flagged) = call(
        &app,
        "POST",
        &format!("/api/sessions/{id}/tests/{first}/flags"),
        Some(json!({"selected": false})),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(flagged["selection"].as_array().unwrap().len(), total - 1);

    let (status, cov) = call(
        &app,
        "GET",
        &format!("/api/sessions/{id}/coverage?selected={first}"),
        None,
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(cov["selection"], json!([first]));
    assert!(cov["totals"]["lines_covered"].as_u64().unwrap() > 0);

    let (status, lines) = call(&app, "GET", &format!("/api/sessions/{id}/lines"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(lines["mutation_ran"], true);

    let (status, run) = call(
        &app,
        "POST",
        &format!("/api/sessions/{id}/tests/{first}/run"),
        None,
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(run["test"]["status"]["state"], "passing");

    let (status, report) = call(&app, "GET", &format!("/api/sessions/{id}/report"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(report["tests"].as_array().unwrap().len(), total);

    let dest = json!({"destination": {"kind": "new_file", "directory": "tests", "class_name": "AbsTests"}});
    let (status, applied) = call(
        &app,
        "POST",
        &format!("/api/sessions/{id}/apply"),
        Some(dest.clone()),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{applied}");
    assert_eq!(applied["tests"].as_array().unwrap().len(), total - 1);
    let (status, again) = call(
        &app,
        "POST",
        &format!("/api/sessions/{id}/apply"),
        Some(dest),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(again["error"]["code"], "apply_failed");

    let (status, _) = call(
        &app,
        "DELETE",
        &format!("/api/sessions/{id}/tests/{first}"),
        None,
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    let (status, err) = call(
        &app,
        "POST",
        &format!("/api/sessions/{id}/tests/{first}/run"),
        None,
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(err["error"]["code"], "not_found");
}

#[tokio::test(flavor = "multi_thread")]
async fn errors_are_structured() {
    let (_dir, _m, app) = app();
    let (status, err) = call(&app, "GET", "/api/sessions/s99", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(err["error"]["code"], "not_found");

    let (status, err) = call(&app, "POST", "/api/sessions", Some(json!({"uut": 3}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["error"]["code"], "bad_request");

    let mut outside = create_body();
    outside["uut"]["file"] = json!("../calc.ml");
    let (status, _) = call(&app, "POST", "/api/sessions", Some(outside)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, _) = call(&app, "GET", "/api/nowhere", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test(flavor = "multi_thread")]
async fn failed_session_rejects_test_operations() {
    let (_dir, manager, app) = app();
    let mut body = create_body();
    body["uut"]["function"] = json!("missing");
    let (_, created) = call(&app, "POST", "/api/sessions", Some(body)).await;
    let id = created["id"].as_str().unwrap().to_string();
    let wid = id.clone();
    tokio::task::spawn_blocking(move || manager.wait(&wid, std::time::Duration::from_secs(10)))
        .await
        .unwrap()
        .unwrap();
    let (_, view) = call(&app, "GET", &format!("/api/sessions/{id}"), None).await;
    assert_eq!(view["phase"], "error");
    assert_eq!(view["failure"], "unit");
    for uri in [
        format!("/api/sessions/{id}/tests"),
        format!("/api/sessions/{id}/report"),
    ] {
        let (status, err) = call(&app, "GET", &uri, None).await;
        assert_eq!(status, StatusCode::CONFLICT, "{uri}");
        assert_eq!(err["error"]["code"], "wrong_phase");
    }
}
