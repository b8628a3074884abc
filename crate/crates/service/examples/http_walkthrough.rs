//! Start the service on a free port and drive it like the web client would:
//! upload a CSV, ask a question, edit a step, fetch the datamation.
//!
//!     cargo run -p datamate-service --example http_walkthrough

use std::sync::Arc;

use datamate_core::session::SessionStore;
use datamate_service::{serve, AppState};
use serde_json::{json, Value};

const STUDENTS: &str =
    "id,name,birth_year,dept\n1,Amy,2000,CS\n2,Bob,1999,EE\n3,Cal,2000,CS\n4,Dee,2001,ME\n";

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
    let base = format!("http://{}", listener.local_addr()?);
    tokio::spawn(serve(
        listener,
        Arc::new(AppState::new(SessionStore::default())),
    ));
    let http = reqwest::Client::new();

    let form = reqwest::multipart::Form::new().part(
        "file",
        reqwest::multipart::Part::bytes(STUDENTS.as_bytes().to_vec()).file_name("students.csv"),
    );
    let session: Value = http
        .post(format!("{base}/sessions"))
        .multipart(form)
        .send()
        .await?
        .json()
        .await?;
    let sid = session["session_id"].as_str().unwrap();
    println!("session {sid}\nsuggestions {}", session["suggestions"]);

    let asked: Value = http
        .post(format!("{base}/sessions/{sid}/ask"))
        .json(&json!({"question": "how many students were born in 2000?"}))
        .send()
        .await?
        .json()
        .await?;
    let pid = asked["pipeline"]["id"].as_str().unwrap();
    println!(
        "pipeline {}\nanswer {}",
        asked["pipeline"]["text"], asked["pipeline"]["answer"]
    );

    let edit = http
        .patch(format!("{base}/sessions/{sid}/pipelines/{pid}/steps/3"))
        .json(&json!({"step": "FILTER[#2, 'birth_year' = 1999]"}))
        .send()
        .await?;
    let edited: Value = edit.json().await?;
    println!("after edit: answer {}", edited["pipeline"]["answer"]);

    let bad = http
        .patch(format!("{base}/sessions/{sid}/pipelines/{pid}/steps/2"))
        .json(&json!({"step": "PROJECT['students', #1]"}))
        .send()
        .await?;
    println!("bad edit: {} {}", bad.status(), bad.text().await?);

    let doc: Value = http
        .get(format!("{base}/pipelines/{pid}/datamation"))
        .send()
        .await?
        .json()
        .await?;
    for stage in doc["stages"].as_array().unwrap() {
        println!("  {}", stage["caption"].as_str().unwrap());
    }
    Ok(())
}
