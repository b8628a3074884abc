//! Compile the running students example into a datamation document and
//! print its stages and captions. Pass a path to also write the JSON.
//!
//!     cargo run -p datamate-core --example compile_datamation -- doc.json

use datamate_core::corpus::desk_students;
use datamate_core::{generate, parse};

fn main() {
    let students = desk_students();
    let p = parse("SELECT['students']; PROJECT['birth_year', #1]; FILTER[#2, 'birth_year' = 2000]; AGGREGATE[count, #3]")
        .unwrap();
    let doc = generate(&p, &students).expect("compiles");
    println!(
        "{} stages, {} key frames",
        doc.stages.len(),
        doc.keyframes.len()
    );
    for (i, stage) in doc.stages.iter().enumerate() {
        let kinds: Vec<&str> = stage.actions.iter().map(|a| a.kind.name()).collect();
        println!(
            "stage {} (step {}, {} ms) [{}]\n    {}",
            i + 1,
            stage.source_step,
            stage.duration_ms,
            kinds.join(", "),
            stage.caption
        );
    }
    let last = doc.keyframes.last().unwrap();
    println!("final frame: {} visible units", last.visible().count());
    if let Some(path) = std::env::args().nth(1) {
        std::fs::write(&path, doc.to_json_pretty()).unwrap();
        println!("wrote {path}");
    }
}
