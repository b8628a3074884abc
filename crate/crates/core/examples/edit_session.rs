//! The interactive editing loop: ask, change a step, add a step, delete one,
//! and watch a rejected edit leave the stored pipeline alone.
//!
//!     cargo run -p datamate-core --example edit_session

use datamate_core::corpus::desk_students;
use datamate_core::session::{EditOutcome, SessionStore};
use datamate_core::text::parse_step;

fn show(label: &str, out: &EditOutcome) {
    println!(
        "{label}\n  {}\n  answer {}",
        out.pipeline.text,
        serde_json::to_string(&out.pipeline.answer).unwrap()
    );
    println!(
        "  last caption: {}",
        out.doc
            .stages
            .last()
            .map(|s| s.caption.as_str())
            .unwrap_or("")
    );
}

fn main() {
    let store = SessionStore::default();
    let sid = store.create(desk_students());
    println!("suggestions: {:?}", store.suggestions(&sid).unwrap());

    let asked = store
        .ask(&sid, "how many students were born in 2000?")
        .unwrap();
    let pid = asked.pipeline.id.clone();
    println!("asked\n  {}", asked.pipeline.text);

    let out = store
        .edit_step(
            &sid,
            &pid,
            3,
            parse_step("FILTER[#2, 'birth_year' = 1999]", 3).unwrap(),
        )
        .unwrap();
    show("edited the filter", &out);

    match store.edit_step(
        &sid,
        &pid,
        2,
        parse_step("PROJECT['students', #1]", 2).unwrap(),
    ) {
        Err(e) => println!("rejected ({}): {e}", e.code()),
        Ok(_) => unreachable!(),
    }
    println!("  still: {}", store.get(&sid, &pid).unwrap().text);

    let out = store.delete_step(&sid, &pid, 3).unwrap();
    show("deleted the filter", &out);

    let scratch = store
        .create_pipeline(&sid, vec![parse_step("SELECT['students']", 1).unwrap()])
        .unwrap();
    let out = store
        .append_step(
            &sid,
            &scratch.pipeline.id,
            parse_step("SORT[#1, 'birth_year', desc]", 2).unwrap(),
        )
        .unwrap();
    show("built from scratch", &out);
}
