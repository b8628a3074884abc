//! Execute a pipeline over a bundled dataset and show every intermediate
//! step result, then the final answer.
//!
//!     cargo run -p datamate-core --example execute_trace

use datamate_core::corpus::bundled;
use datamate_core::{execute, parse, StepResult};

fn main() {
    let flights = bundled("flights").expect("bundled flights");
    let text =
        "SELECT['flights']; PROJECT['dep_delay', #1]; PROJECT['airline', #1]; GROUP[avg, #2, #3]";
    let p = parse(text).expect("pipeline parses");
    let trace = execute(&p, &flights).expect("pipeline executes");
    for (i, (step, result)) in p.steps().iter().zip(&trace.per_step).enumerate() {
        let summary = match result {
            StepResult::Records(r) => format!("{} rows of {}", r.rows.len(), r.table),
            StepResult::Projection(p) => format!("{} values of {}", p.items.len(), p.column),
            StepResult::Groups { key_column, groups } => {
                format!("{} groups keyed by {key_column}", groups.len())
            }
            StepResult::Scalar { value } => format!("scalar {value:?}"),
        };
        println!("#{} {:<11} {summary}", i + 1, step.op.to_string());
    }
    println!(
        "\nanswer:\n{}",
        serde_json::to_string_pretty(&trace.answer).unwrap()
    );
}
