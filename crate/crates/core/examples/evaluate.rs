//! Score the rule decomposer on the bundled evaluation corpus, next to the
//! identity baseline that returns gold pipelines.
//!
//!     cargo run -p datamate-core --example evaluate

use datamate_core::corpus::eval_corpus;
use datamate_core::decomposer::{resolve, ResolveConfig};
use datamate_core::eval::{run_eval, EvalOptions, EvalRecord, IdentitySystem};
use datamate_core::{serialize, Dataset};

fn main() {
    let corpus = eval_corpus();
    println!("{} records\n", corpus.cases.len());

    let identity = run_eval(
        &corpus.cases,
        &IdentitySystem,
        EvalOptions { sql_check: true },
    );
    println!(
        "identity (with SQL cross-check)\n{}",
        identity.summary.to_table()
    );

    let config = ResolveConfig::default();
    let rules = |r: &EvalRecord, d: &Dataset| {
        resolve(&r.question, d, &config)
            .map(|res| serialize(&res.pipeline))
            .map_err(|e| e.to_string())
    };
    let report = run_eval(&corpus.cases, &rules, EvalOptions::default());
    println!("rule decomposer\n{}", report.summary.to_table());
    for o in report.outcomes.iter().filter(|o| !o.correct).take(5) {
        println!(
            "miss (line {}): {} {}",
            o.line,
            o.question,
            o.error.as_deref().unwrap_or("")
        );
    }
}
