//! Seeded random pipelines for property tests, and the mutations that must
//! make them fail.
//!
//!     cargo run -p datamate-core --example generate_pipelines -- 42

use datamate_core::corpus::{bundled, mutate, Mutation, PipelineGenerator};
use datamate_core::text::validate;
use datamate_core::{execute, parse, serialize};

fn main() {
    let seed: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(7);
    let graduates = bundled("graduates").unwrap();
    let mut gen = PipelineGenerator::new(&graduates, seed, 5);
    for _ in 0..6 {
        let p = gen.next_pipeline();
        let outcome = match execute(&p, &graduates) {
            Ok(t) => serde_json::to_string(&t.answer)
                .unwrap()
                .chars()
                .take(80)
                .collect(),
            Err(e) => format!("error: {e}"),
        };
        println!("{}\n  -> {outcome}", serialize(&p));
        for m in Mutation::ALL {
            if let Some(bad) = mutate(&p, m, seed) {
                let verdict = match parse(&bad) {
                    Err(e) => format!("{:?}", e.kind),
                    Ok(q) => validate(&q, graduates.schema()).rule_ids().join(","),
                };
                println!("  {m:?}: {verdict}");
            }
        }
    }
}
