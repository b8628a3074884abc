use datamate_core::corpus::desk_students;
use datamate_core::ingest::{CsvFile, TypeHints};
use datamate_core::session::{SessionError, SessionStore};
use datamate_core::text::parse_step;
use datamate_core::{AggMethod, Answer, Arg, Op, QdmrStep, Value};

const RUNNING: &str = "SELECT['students']; PROJECT['birth_year', #1]; FILTER[#2, 'birth_year' = 2000]; AGGREGATE[count, #3]";

fn store_with_students() -> (SessionStore, String) {
    let store = SessionStore::default();
    let sid = store.create(desk_students());
    (store, sid)
}

fn scalar(a: &Answer) -> f64 {
    match a.as_scalar() {
        Some(Value::Number(n)) => *n,
        other => panic!("expected a number, got {other:?}"),
    }
}

fn code<T: std::fmt::Debug>(r: Result<T, SessionError>) -> &'static str {
    r.expect_err("expected an error").code()
}

#[test]
fn asking_the_running_example() {
    let (store, sid) = store_with_students();
    let out = store
        .ask(&sid, "how many students were born in 2000?")
        .unwrap();
    assert_eq!(scalar(&out.pipeline.answer), 2.0);
    assert_eq!(out.pipeline.text, RUNNING);
    assert_eq!(out.doc.stages.len(), 5);
    assert_eq!(store.datamation(&out.pipeline.id).unwrap(), out.doc);

    // same question again: new id, same payload
    let again = store
        .ask(&sid, "how many students were born in 2000?")
        .unwrap();
    assert_ne!(again.pipeline.id, out.pipeline.id);
    assert_eq!(again.pipeline.steps, out.pipeline.steps);
    assert_eq!(again.doc, out.doc);
}

#[test]
fn unanswerable_question_comes_with_suggestions() {
    let (store, sid) = store_with_students();
    match store.ask(&sid, "tell me a joke") {
        Err(e @ SessionError::Decompose { .. }) => {
            assert_eq!(e.code(), "NoPatternMatch");
            let SessionError::Decompose { suggestions, .. } = e else {
                unreachable!()
            };
            assert!(suggestions.contains(&"how many students?".to_string()));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn closed_sessions_are_gone() {
    let (store, sid) = store_with_students();
    store.close(&sid).unwrap();
    assert_eq!(
        code(store.ask(&sid, "how many students?")),
        "SessionNotFound"
    );
    assert_eq!(code(store.schema(&sid)), "SessionNotFound");
}

#[test]
fn editing_a_step() {
    let (store, sid) = store_with_students();
    let pid = store
        .create_pipeline_text(&sid, RUNNING)
        .unwrap()
        .pipeline
        .id;

    let step = parse_step("FILTER[#2, 'birth_year' = 1999]", 3).unwrap();
    let out = store.edit_step(&sid, &pid, 3, step).unwrap();
    assert_eq!(scalar(&out.pipeline.answer), 1.0);

    let bad = parse_step("PROJECT['students', #1]", 2).unwrap();
    match store.edit_step(&sid, &pid, 2, bad) {
        Err(SessionError::InvalidEdit(report)) => {
            assert!(
                report.violations.iter().any(|v| v.rule_id == "V2"),
                "{report:?}"
            );
        }
        other => panic!("{other:?}"),
    }

    let any = parse_step("SORT[#1, 'name', asc]", 5).unwrap();
    assert_eq!(
        code(store.edit_step(&sid, &pid, 9, any.clone())),
        "NotFound"
    );
    assert_eq!(code(store.edit_step(&sid, &pid, 0, any)), "NotFound");
}

#[test]
fn appending_steps() {
    let (store, sid) = store_with_students();
    let select = parse_step("SELECT['students']", 1).unwrap();
    let pid = store
        .create_pipeline(&sid, vec![select])
        .unwrap()
        .pipeline
        .id;

    let out = store
        .append_step(&sid, &pid, parse_step("SORT[#1, 'name', desc]", 2).unwrap())
        .unwrap();
    assert_eq!(out.pipeline.steps.len(), 2);
    assert!(out
        .doc
        .stages
        .iter()
        .any(|s| s.kinds().iter().any(|k| k.name() == "sort")));

    let out = store
        .append_step(&sid, &pid, parse_step("AGGREGATE[count, #2]", 3).unwrap())
        .unwrap();
    assert_eq!(scalar(&out.pipeline.answer), 4.0);

    let forward = QdmrStep::new(
        Op::Aggregate,
        vec![Arg::Method(AggMethod::Count), Arg::Ref(7)],
    );
    assert_eq!(code(store.append_step(&sid, &pid, forward)), "InvalidEdit");
}

#[test]
fn deleting_steps() {
    let (store, sid) = store_with_students();
    let pid = store
        .create_pipeline_text(&sid, RUNNING)
        .unwrap()
        .pipeline
        .id;

    // the count now runs over every projected birth year
    let out = store.delete_step(&sid, &pid, 3).unwrap();
    assert_eq!(scalar(&out.pipeline.answer), 4.0);
    assert_eq!(
        out.pipeline.text,
        "SELECT['students']; PROJECT['birth_year', #1]; AGGREGATE[count, #2]"
    );

    match store.delete_step(&sid, &pid, 1) {
        Err(SessionError::InvalidEdit(report)) => {
            assert!(
                report.violations.iter().any(|v| v.rule_id == "V4"),
                "{report:?}"
            );
        }
        other => panic!("{other:?}"),
    }

    let out = store.delete_step(&sid, &pid, 3).unwrap();
    assert_eq!(out.pipeline.steps.len(), 2);
    assert!(matches!(out.pipeline.answer, Answer::Values(ref v) if v.len() == 4));

    // PROJECT is not a pass-through, so FILTER would lose its input
    let pid = store
        .create_pipeline_text(&sid, RUNNING)
        .unwrap()
        .pipeline
        .id;
    assert_eq!(code(store.delete_step(&sid, &pid, 2)), "InvalidEdit");
    assert_eq!(code(store.delete_step(&sid, &pid, 5)), "NotFound");
}

#[test]
fn failed_edits_leave_the_pipeline_untouched() {
    let (store, sid) = store_with_students();
    let pid = store
        .create_pipeline_text(&sid, RUNNING)
        .unwrap()
        .pipeline
        .id;
    let before = serde_json::to_string(&store.get(&sid, &pid).unwrap()).unwrap();
    let doc_before = store.datamation(&pid).unwrap().to_json();

    let _ = store.edit_step(&sid, &pid, 2, parse_step("PROJECT['nope', #1]", 2).unwrap());
    let _ = store.append_step(&sid, &pid, parse_step("SELECT['students']", 5).unwrap());
    let _ = store.delete_step(&sid, &pid, 1);
    let _ = store.delete_step(&sid, &pid, 2);
    let _ = store.replace(&sid, &pid, "SELECT[");

    assert_eq!(
        serde_json::to_string(&store.get(&sid, &pid).unwrap()).unwrap(),
        before
    );
    assert_eq!(store.datamation(&pid).unwrap().to_json(), doc_before);
}

#[test]
fn suggestions_work_without_rows() {
    let (store, sid) = store_with_students();
    let s = store.suggestions(&sid).unwrap();
    assert!(s.contains(&"how many students?".to_string()), "{s:?}");
    assert!(s.len() <= 5);

    let empty = store
        .ingest(
            &[CsvFile {
                name: "students.csv",
                contents: b"id,name,birth_year,dept\n",
            }],
            &TypeHints::new(),
        )
        .unwrap();
    assert!(!store.suggestions(&empty).unwrap().is_empty());
}

#[test]
fn snapshots_round_trip() {
    let (store, sid) = store_with_students();
    let asked = store
        .ask(&sid, "how many students were born in 2000?")
        .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = store.save_snapshot(&sid, dir.path()).unwrap();

    let other = SessionStore::default();
    let restored = other.load_snapshot(&path).unwrap();
    assert_eq!(restored, sid);
    let view = other.get(&sid, &asked.pipeline.id).unwrap();
    assert_eq!(view, asked.pipeline);
    assert_eq!(other.datamation(&asked.pipeline.id).unwrap(), asked.doc);
}

#[test]
fn pipelines_are_scoped_to_their_session() {
    let (store, sid) = store_with_students();
    let other = store.create(desk_students());
    let pid = store
        .create_pipeline_text(&sid, RUNNING)
        .unwrap()
        .pipeline
        .id;
    assert_eq!(code(store.get(&other, &pid)), "PipelineNotFound");
    store.delete_pipeline(&sid, &pid).unwrap();
    assert_eq!(code(store.datamation(&pid)), "PipelineNotFound");
    assert!(store.list(&sid).unwrap().is_empty());
}
