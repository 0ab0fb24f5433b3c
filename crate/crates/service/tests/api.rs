use std::collections::BTreeSet;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use hazop_core::project::Project;
use hazop_core::store::RowStatus;
use hazop_core::testkit::MIRAS_MODEL;
use hazop_service::{router, AppState};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

struct Fixture {
    _dir: tempfile::TempDir,
    project: Project,
    app: Router,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let project = Project::init(dir.path(), "MIRAS").unwrap();
    std::fs::write(project.model_dir().join("model.hzm"), MIRAS_MODEL).unwrap();
    let app = router(Arc::new(AppState::load(project.clone()).unwrap()));
    Fixture { _dir: dir, project, app }
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, _, text) = raw(app, method, uri, body).await;
    let value = if text.is_empty() { Value::Null } else { serde_json::from_str(&text).unwrap_or(Value::String(text)) };
    (status, value)
}

async fn raw(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, String, String) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header(header::CONTENT_TYPE, "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let ctype = resp.headers().get(header::CONTENT_TYPE).map(|v| v.to_str().unwrap().to_string()).unwrap_or_default();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, ctype, String::from_utf8(bytes.to_vec()).unwrap())
}

async fn generated() -> Fixture {
    let f = fixture();
    let (status, report) = call(&f.app, Method::POST, "/generate", None).await;
    assert_eq!(status, StatusCode::OK, "{report}");
    assert_eq!(report["tables"]["UC02"]["added"], 54);
    f
}

/// Line of the row for `element` x `guide_word` in `table`.
async fn line_of(app: &Router, table: &str, element: &str, guide_word: &str) -> u64 {
    let (_, t) = call(app, Method::GET, &format!("/tables/{table}"), None).await;
    t["rows"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["attribute_ref"]["element"] == element && r["guide_word"] == guide_word)
        .map(|r| r["line"].as_u64().unwrap())
        .unwrap()
}

#[tokio::test]
async fn filling_the_no_precondition_row_is_persisted() {
    let f = generated().await;
    let line = line_of(&f.app, "UC02", "UC02.C1", "No").await;
    let (status, body) = call(
        &f.app,
        Method::PATCH,
        &format!("/tables/UC02/rows/{line}"),
        Some(json!({
            "deviation": "The robot starts the standing-up while not in front of the patient",
            "real_world_effect": "The patient may fall",
            "severity": "Severe",
            "new_hazards": [{"text": "Fall of the patient"}]
        })),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["row"]["status"], "interpreted");
    assert_eq!(body["row"]["hazards"], json!(["HN1"]));

    // acknowledged means on disk
    let store = f.project.load_store().unwrap();
    let row = store.row("UC02", line as u32).unwrap();
    assert_eq!(row.status, RowStatus::Interpreted);
    assert_eq!(store.hazards.len(), 1);
}

#[tokio::test]
async fn dangling_hazard_is_rejected() {
    let f = generated().await;
    let (status, body) = call(&f.app, Method::PATCH, "/tables/UC02/rows/1", Some(json!({"hazards": ["HN99"]}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "DANGLING_HAZARD");
    assert_eq!(body["diagnostics"][0]["code"], "DANGLING_HAZARD");
    assert!(f.project.load_store().unwrap().row("UC02", 1).unwrap().hazards.is_empty());
}

#[tokio::test]
async fn severity_outside_the_scale_is_422() {
    let f = generated().await;
    let (status, body) = call(&f.app, Method::PATCH, "/tables/UC02/rows/1", Some(json!({"severity": "Apocalyptic"}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["code"], "SEVERITY_NOT_IN_SCALE");
}

#[tokio::test]
async fn regenerating_an_unchanged_model_adds_nothing() {
    let f = generated().await;
    let (status, report) = call(&f.app, Method::POST, "/generate", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(report["added"], 0);
    assert_eq!(report["orphaned"], 0);
}

#[tokio::test]
async fn generate_refuses_a_broken_model() {
    let f = generated().await;
    std::fs::write(f.project.model_dir().join("model.hzm"), "usecase UC01 {").unwrap();
    let (status, body) = call(&f.app, Method::POST, "/generate", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "SYNTAX");
    assert!(body["diagnostics"][0]["span"]["line"].is_number());
}

#[tokio::test]
async fn unknown_ids_and_bad_bodies() {
    let f = generated().await;
    let cases = [
        (Method::GET, "/tables/UC77", None, StatusCode::NOT_FOUND),
        (Method::PATCH, "/tables/UC02/rows/999", Some(json!({"remarks": "x"})), StatusCode::NOT_FOUND),
        (Method::PATCH, "/hazards/HN5", Some(json!({"text": "x"})), StatusCode::NOT_FOUND),
        (Method::DELETE, "/hazards/Rec1", None, StatusCode::NOT_FOUND),
        (Method::PATCH, "/tables/UC02/rows/1", Some(json!({"colour": "red"})), StatusCode::BAD_REQUEST),
        (Method::POST, "/hazards", Some(json!({"note": "no text"})), StatusCode::BAD_REQUEST),
        (Method::PATCH, "/tables/UC02/rows/1", Some(json!({"status": "orphaned"})), StatusCode::BAD_REQUEST),
    ];
    for (method, uri, body, expected) in cases {
        let (status, resp) = call(&f.app, method.clone(), uri, body).await;
        assert_eq!(status, expected, "{method} {uri}: {resp}");
    }
}

#[tokio::test]
async fn registry_items_lifecycle() {
    let f = generated().await;
    let (status, created) = call(&f.app, Method::POST, "/hazards", Some(json!({"text": "Fall"}))).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(created["id"], "HN1");

    let (status, _) = call(&f.app, Method::PATCH, "/tables/UC02/rows/3", Some(json!({"hazards": ["HN1"], "deviation": "d"}))).await;
    assert_eq!(status, StatusCode::OK);

    let (status, rec) = call(
        &f.app,
        Method::POST,
        "/recommendations",
        Some(json!({"text": "Check position", "covers": ["HN1"], "sources": ["UC02.3"]})),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(rec["id"], "Rec1");

    let (status, hyp) = call(&f.app, Method::POST, "/hypotheses", Some(json!({"text": "Patient is alone"}))).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(hyp["id"], "Hyp1");
    let (status, hyp) = call(&f.app, Method::PATCH, "/hypotheses/Hyp1", Some(json!({"status": "confirmed"}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(hyp["status"], "confirmed");

    let (status, body) = call(&f.app, Method::DELETE, "/hazards/HN1", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "ITEM_IN_USE");

    let (_, outputs) = call(&f.app, Method::GET, "/outputs", None).await;
    assert_eq!(outputs["hazards"][0]["rows"], json!(["UC02.3"]));
    assert_eq!(outputs["recommendations"][0]["id"], "Rec1");

    let (status, _) = call(&f.app, Method::DELETE, "/hypotheses/Hyp1", None).await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    let (_, created) = call(&f.app, Method::POST, "/hypotheses", Some(json!({"text": "again"}))).await;
    assert_eq!(created["id"], "Hyp2", "deleted ids are not reused");
}

#[tokio::test]
async fn duplicate_row_appends() {
    let f = generated().await;
    let (status, body) = call(&f.app, Method::POST, "/tables/UC02/rows/1/duplicate", None).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(body["row"]["line"], 55);
}

#[tokio::test]
async fn read_endpoints() {
    let f = generated().await;
    let (status, model) = call(&f.app, Method::GET, "/model", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(model["use_cases"][1]["id"], "UC02");

    let (_, registry) = call(&f.app, Method::GET, "/registry", None).await;
    assert_eq!(registry["entries"].as_array().unwrap().len(), 55);
    assert_eq!(registry["severity_scale"][0], "Catastrophic");

    let (_, tables) = call(&f.app, Method::GET, "/tables", None).await;
    let uc02 = tables.as_array().unwrap().iter().find(|t| t["id"] == "UC02").unwrap();
    assert_eq!(uc02["rows"], 54);
    assert_eq!(uc02["diagram_type"], "use_case");

    let (_, stats) = call(&f.app, Method::GET, "/stats", None).await;
    assert_eq!(stats["stats"]["state_count"], 9);
    assert_eq!(stats["stats"]["state_machine"]["sub_element_count"], 19);

    let (status, diags) = call(&f.app, Method::GET, "/diagnostics", None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(diags.as_array().unwrap().iter().all(|d| d["level"] != "error"), "{diags}");

    let (status, ctype, html) = raw(&f.app, Method::GET, "/report", None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(ctype.starts_with("text/html"));
    assert!(html.contains("id=\"UC02.1\""));
    let (_, _, again) = raw(&f.app, Method::GET, "/report", None).await;
    assert_eq!(html, again);
}

#[tokio::test]
async fn report_is_blocked_by_errors_unless_forced() {
    let f = generated().await;
    let mut store = f.project.load_store().unwrap();
    store.rows[0].hazards.push("HN42".into());
    f.project.save_store(&store).unwrap();
    let app = router(Arc::new(AppState::load(f.project.clone()).unwrap()));
    let (status, body) = call(&app, Method::GET, "/report", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "DANGLING_HAZARD");
    let (status, _, html) = raw(&app, Method::GET, "/report?force=true", None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(html.contains("class=\"banner\""));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_writes_are_serialized_and_survive_restart() {
    let f = generated().await;
    let mut tasks = Vec::new();
    for i in 0..24 {
        let app = f.app.clone();
        tasks.push(tokio::spawn(async move {
            call(&app, Method::POST, "/hazards", Some(json!({"text": format!("hazard {i}")}))).await
        }));
    }
    let mut acked = BTreeSet::new();
    for t in tasks {
        let (status, body) = t.await.unwrap();
        match status {
            StatusCode::CREATED => assert!(acked.insert(body["id"].as_str().unwrap().to_string())),
            StatusCode::CONFLICT => assert_eq!(body["code"], "BUSY"),
            other => panic!("unexpected {other}: {body}"),
        }
    }
    assert!(!acked.is_empty());

    // a fresh process sees exactly the acknowledged writes
    let restarted = router(Arc::new(AppState::load(f.project.clone()).unwrap()));
    let (_, outputs) = call(&restarted, Method::GET, "/outputs", None).await;
    let stored: BTreeSet<String> =
        outputs["hazards"].as_array().unwrap().iter().map(|h| h["hazard"]["id"].as_str().unwrap().to_string()).collect();
    assert_eq!(stored, acked);
}
