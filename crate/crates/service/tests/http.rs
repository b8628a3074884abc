use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use datamate_core::datamation::SCHEMA_JSON;
use datamate_core::session::SessionStore;
use datamate_service::{router, AppState};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

const STUDENTS: &str =
    "id,name,birth_year,dept\n1,Alice,2000,CS\n2,Bob,1999,EE\n3,Cara,2000,CS\n4,Dan,2001,ME\n";
const RUNNING: &str = "SELECT['students']; PROJECT['birth_year', #1]; FILTER[#2, 'birth_year' = 2000]; AGGREGATE[count, #3]";
const BOUNDARY: &str = "XdatamateX";

fn app() -> Router {
    router(Arc::new(AppState::new(SessionStore::default())))
}

fn multipart(files: &[(&str, &str)], types: Option<&str>) -> Request<Body> {
    let mut body = String::new();
    for (name, contents) in files {
        body.push_str(&format!(
            "--{BOUNDARY}\r\ncontent-disposition: form-data; name=\"file\"; filename=\"{name}\"\r\ncontent-type: text/csv\r\n\r\n{contents}\r\n"
        ));
    }
    if let Some(t) = types {
        body.push_str(&format!(
            "--{BOUNDARY}\r\ncontent-disposition: form-data; name=\"types\"\r\n\r\n{t}\r\n"
        ));
    }
    body.push_str(&format!("--{BOUNDARY}--\r\n"));
    Request::post("/sessions")
        .header(
            "content-type",
            format!("multipart/form-data; boundary={BOUNDARY}"),
        )
        .body(Body::from(body))
        .unwrap()
}

async fn send(app: &Router, req: Request<Body>) -> (StatusCode, String) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let (status, text) = send(app, req).await;
    (
        status,
        serde_json::from_str(&text).unwrap_or(Value::String(text)),
    )
}

async fn students_session(app: &Router) -> String {
    let (status, text) = send(app, multipart(&[("students.csv", STUDENTS)], None)).await;
    assert_eq!(status, StatusCode::CREATED, "{text}");
    let v: Value = serde_json::from_str(&text).unwrap();
    v["session_id"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn upload_infers_schema_and_suggests() {
    let app = app();
    let (status, text) = send(&app, multipart(&[("students.csv", STUDENTS)], None)).await;
    assert_eq!(status, StatusCode::CREATED);
    let v: Value = serde_json::from_str(&text).unwrap();
    assert!(v["suggestions"]
        .as_array()
        .unwrap()
        .contains(&json!("how many students?")));
    let sid = v["session_id"].as_str().unwrap();

    let (status, schema) = call(&app, Method::GET, &format!("/sessions/{sid}/schema"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(schema, v["schema"]);
    let text = schema.to_string();
    assert!(
        text.contains("birth_year") && text.contains("temporal"),
        "{text}"
    );

    let (status, s) = call(
        &app,
        Method::GET,
        &format!("/sessions/{sid}/suggestions"),
        None,
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert!(!s.as_array().unwrap().is_empty());
}

#[tokio::test]
async fn upload_errors_are_structured() {
    let app = app();
    let (status, text) = send(&app, multipart(&[("t.csv", "a,b\n1,2\n3\n")], None)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(
        (v["code"].as_str(), v["line"].as_u64()),
        (Some("RaggedRows"), Some(3))
    );

    let (status, text) = send(
        &app,
        multipart(
            &[("students.csv", STUDENTS)],
            Some(r#"{"dept":"numerical"}"#),
        ),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(text.contains("TypeConflict"), "{text}");

    let (status, text) = send(&app, multipart(&[], None)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST, "{text}");

    let (status, text) = send(&app, multipart(&[("empty.csv", "")], None)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(text.contains("EmptyFile"), "{text}");
}

#[tokio::test]
async fn ask_serves_a_schema_valid_datamation() {
    let app = app();
    let sid = students_session(&app).await;
    let (status, out) = call(
        &app,
        Method::POST,
        &format!("/sessions/{sid}/ask"),
        Some(json!({"question": "how many students were born in 2000?"})),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{out}");
    assert_eq!(out["pipeline"]["text"], RUNNING);
    assert_eq!(
        out["pipeline"]["answer"],
        json!({"kind": "scalar", "value": 2.0})
    );
    assert_eq!(out["doc"]["stages"].as_array().unwrap().len(), 5);
    assert!(out["ranked"].as_array().unwrap().len() == 5);

    let pid = out["pipeline"]["id"].as_str().unwrap();
    let (status, doc) = call(
        &app,
        Method::GET,
        &format!("/pipelines/{pid}/datamation"),
        None,
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(doc, out["doc"]);

    let (_, served_schema) = call(&app, Method::GET, "/schemas/datamation-v1", None).await;
    assert_eq!(
        served_schema,
        serde_json::from_str::<Value>(SCHEMA_JSON).unwrap()
    );
    let compiled = jsonschema::JSONSchema::compile(&served_schema).unwrap();
    let errors: Vec<String> = match compiled.validate(&doc) {
        Ok(()) => Vec::new(),
        Err(errors) => errors.map(|e| e.to_string()).collect(),
    };
    assert!(errors.is_empty(), "{errors:?}");
}

#[tokio::test]
async fn ask_failures_carry_codes() {
    let app = app();
    let sid = students_session(&app).await;
    let (status, v) = call(
        &app,
        Method::POST,
        &format!("/sessions/{sid}/ask"),
        Some(json!({"question": "tell me a joke"})),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["code"], "NoPatternMatch");
    assert!(v["suggestions"]
        .as_array()
        .unwrap()
        .contains(&json!("how many students?")));

    let (status, v) = call(
        &app,
        Method::POST,
        "/sessions/nope/ask",
        Some(json!({"question": "how many students?"})),
    )
    .await;
    assert_eq!(
        (status, v["code"].as_str()),
        (StatusCode::NOT_FOUND, Some("SessionNotFound"))
    );

    let (status, v) = call(
        &app,
        Method::POST,
        &format!("/sessions/{sid}/ask"),
        Some(json!({"q": 1})),
    )
    .await;
    assert_eq!(
        (status, v["code"].as_str()),
        (StatusCode::BAD_REQUEST, Some("BadRequest"))
    );

    let (status, _) = call(&app, Method::DELETE, &format!("/sessions/{sid}"), None).await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    let (status, v) = call(&app, Method::GET, &format!("/sessions/{sid}/schema"), None).await;
    assert_eq!(
        (status, v["code"].as_str()),
        (StatusCode::NOT_FOUND, Some("SessionNotFound"))
    );
}

#[tokio::test]
async fn step_edits_and_atomic_failures() {
    let app = app();
    let sid = students_session(&app).await;
    let (status, out) = call(
        &app,
        Method::POST,
        &format!("/sessions/{sid}/pipelines"),
        Some(json!({"text": RUNNING})),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED, "{out}");
    let pid = out["pipeline"]["id"].as_str().unwrap().to_string();
    let base = format!("/sessions/{sid}/pipelines/{pid}");
    let doc_uri = format!("/pipelines/{pid}/datamation");

    let (status, out) = call(
        &app,
        Method::PATCH,
        &format!("{base}/steps/3"),
        Some(json!({"step": "FILTER[#2, 'birth_year' = 1999]"})),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{out}");
    assert_eq!(out["pipeline"]["answer"]["value"], 1.0);
    assert!(out["doc"]["pipeline"].as_str().unwrap().contains("1999"));

    let (_, before) = send(&app, Request::get(&base).body(Body::empty()).unwrap()).await;
    let (_, doc_before) = send(&app, Request::get(&doc_uri).body(Body::empty()).unwrap()).await;

    let failing: Vec<(Method, String, Option<Value>, StatusCode, &str)> = vec![
        (
            Method::PATCH,
            format!("{base}/steps/2"),
            Some(json!({"step": "PROJECT['students', #1]"})),
            StatusCode::UNPROCESSABLE_ENTITY,
            "InvalidEdit",
        ),
        (
            Method::PATCH,
            format!("{base}/steps/9"),
            Some(json!({"step": "SELECT['students']"})),
            StatusCode::NOT_FOUND,
            "NotFound",
        ),
        (
            Method::PATCH,
            format!("{base}/steps/2"),
            Some(json!({"step": "PROJECT['id' #1]"})),
            StatusCode::UNPROCESSABLE_ENTITY,
            "ParseError",
        ),
        (
            Method::DELETE,
            format!("{base}/steps/1"),
            None,
            StatusCode::UNPROCESSABLE_ENTITY,
            "InvalidEdit",
        ),
        (
            Method::DELETE,
            format!("{base}/steps/2"),
            None,
            StatusCode::UNPROCESSABLE_ENTITY,
            "InvalidEdit",
        ),
        (
            Method::POST,
            format!("{base}/steps"),
            Some(json!({"step": "SORT[#1, 'gpa', asc]"})),
            StatusCode::UNPROCESSABLE_ENTITY,
            "InvalidEdit",
        ),
        (
            Method::PATCH,
            base.clone(),
            Some(json!({"text": "SELECT["})),
            StatusCode::UNPROCESSABLE_ENTITY,
            "ParseError",
        ),
        (
            Method::PATCH,
            base.clone(),
            Some(json!({"txt": RUNNING})),
            StatusCode::BAD_REQUEST,
            "BadRequest",
        ),
    ];
    for (method, uri, body, want_status, want_code) in failing {
        let (status, v) = call(&app, method.clone(), &uri, body).await;
        assert_eq!(
            (status, v["code"].as_str()),
            (want_status, Some(want_code)),
            "{method} {uri}: {v}"
        );
        let (_, now) = send(&app, Request::get(&base).body(Body::empty()).unwrap()).await;
        let (_, doc_now) = send(&app, Request::get(&doc_uri).body(Body::empty()).unwrap()).await;
        assert_eq!(now, before, "{method} {uri} changed the pipeline");
        assert_eq!(doc_now, doc_before, "{method} {uri} changed the document");
    }

    let (status, v) = call(
        &app,
        Method::PATCH,
        &format!("{base}/steps/2"),
        Some(json!({"step": "PROJECT['students', #1]"})),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let rules: Vec<&str> = v["report"]["violations"]
        .as_array()
        .unwrap()
        .iter()
        .filter_map(|x| x["rule_id"].as_str())
        .collect();
    assert!(rules.contains(&"V2"), "{v}");

    let (status, out) = call(&app, Method::DELETE, &format!("{base}/steps/3"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(out["pipeline"]["answer"]["value"], 4.0);
    assert_eq!(
        out["pipeline"]["text"],
        "SELECT['students']; PROJECT['birth_year', #1]; AGGREGATE[count, #2]"
    );

    let (status, out) = call(&app, Method::PATCH, &base, Some(json!({"text": RUNNING}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(out["pipeline"]["answer"]["value"], 2.0);

    let (status, _) = call(&app, Method::DELETE, &base, None).await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    let (status, v) = call(&app, Method::GET, &doc_uri, None).await;
    assert_eq!(
        (status, v["code"].as_str()),
        (StatusCode::NOT_FOUND, Some("PipelineNotFound"))
    );
}

#[tokio::test]
async fn building_from_scratch() {
    let app = app();
    let sid = students_session(&app).await;
    let (status, out) = call(
        &app,
        Method::POST,
        &format!("/sessions/{sid}/pipelines"),
        Some(json!({"steps": ["SELECT['students']"]})),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED, "{out}");
    let pid = out["pipeline"]["id"].as_str().unwrap().to_string();
    let steps = format!("/sessions/{sid}/pipelines/{pid}/steps");

    let (status, out) = call(
        &app,
        Method::POST,
        &steps,
        Some(json!({"step": "SORT[#1, 'name', desc]"})),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{out}");
    let kinds = out["doc"]["stages"].to_string();
    assert!(kinds.contains("\"sort\""), "{kinds}");

    // the JSON form of a step is accepted too
    let json_step = out["pipeline"]["steps"][1].clone();
    let (status, out) = call(
        &app,
        Method::PATCH,
        &format!("{steps}/2"),
        Some(json!({"step": json_step})),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{out}");

    let (status, out) = call(
        &app,
        Method::POST,
        &steps,
        Some(json!({"step": "AGGREGATE[count, #2]"})),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(out["pipeline"]["answer"]["value"], 4.0);

    let (status, v) = call(
        &app,
        Method::POST,
        &steps,
        Some(json!({"step": "AGGREGATE[count, #7]"})),
    )
    .await;
    assert_eq!(
        (status, v["code"].as_str()),
        (StatusCode::UNPROCESSABLE_ENTITY, Some("ParseError"))
    );

    let (status, list) = call(
        &app,
        Method::GET,
        &format!("/sessions/{sid}/pipelines"),
        None,
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(list.as_array().unwrap().len(), 1);

    let (status, v) = call(
        &app,
        Method::POST,
        &format!("/sessions/{sid}/pipelines"),
        Some(json!({})),
    )
    .await;
    assert_eq!(
        (status, v["code"].as_str()),
        (StatusCode::BAD_REQUEST, Some("BadRequest"))
    );
}

#[tokio::test]
async fn concurrent_sessions() {
    let app = app();
    let mut sids = Vec::new();
    for _ in 0..8 {
        sids.push(students_session(&app).await);
    }
    let tasks: Vec<_> = sids
        .iter()
        .map(|sid| {
            let app = app.clone();
            let uri = format!("/sessions/{sid}/ask");
            tokio::spawn(async move {
                call(
                    &app,
                    Method::POST,
                    &uri,
                    Some(json!({"question": "how many students were born in 2000?"})),
                )
                .await
            })
        })
        .collect();
    let mut docs = Vec::new();
    for t in tasks {
        let (status, out) = t.await.unwrap();
        assert_eq!(status, StatusCode::OK);
        docs.push(out["doc"].clone());
    }
    assert!(docs.windows(2).all(|w| w[0] == w[1]));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn live_server_with_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let state = AppState {
        store: SessionStore::default(),
        snapshot_dir: Some(dir.path().to_path_buf()),
    };
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(datamate_service::serve(listener, Arc::new(state)));

    let client = reqwest::Client::new();
    let form = reqwest::multipart::Form::new().part(
        "file",
        reqwest::multipart::Part::bytes(STUDENTS.as_bytes().to_vec()).file_name("students.csv"),
    );
    let created: Value = client
        .post(format!("http://{addr}/sessions"))
        .multipart(form)
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    let sid = created["session_id"].as_str().unwrap();
    let out: Value = client
        .post(format!("http://{addr}/sessions/{sid}/ask"))
        .json(&json!({"question": "how many students were born in 2000?"}))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    let pid = out["pipeline"]["id"].as_str().unwrap();
    assert!(dir.path().join(format!("{sid}.json")).exists());

    // a fresh process restores the session from disk
    let restored = AppState {
        store: SessionStore::default(),
        snapshot_dir: Some(dir.path().to_path_buf()),
    };
    assert_eq!(restored.restore_snapshots().unwrap(), 1);
    let app = router(Arc::new(restored));
    let (status, doc) = call(
        &app,
        Method::GET,
        &format!("/pipelines/{pid}/datamation"),
        None,
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(doc, out["doc"]);
}
