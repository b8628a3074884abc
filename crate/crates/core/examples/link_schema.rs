//! Rank schema attributes by relevance to a question.
//!
//!     cargo run -p datamate-core --example link_schema -- "average mpg by origin"

use datamate_core::corpus::bundled;
use datamate_core::linker::{link, LexicalScorer};

fn main() {
    let question = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "what is the average mpg of vehicles by origin?".into());
    let vehicles = bundled("vehicles").expect("bundled vehicles");
    let ranked = link(&question, vehicles.schema(), &LexicalScorer::default());
    println!("question: {question}");
    println!("schema:   {}\n", ranked.serialized.text);
    for s in &ranked.scores {
        let mark = if s.relevant { "*" } else { " " };
        println!("{mark} {:<22} {:.3}", s.attribute.to_string(), s.p_rel);
    }
}
