//! Translate pipelines to SQL and check them against an in-memory SQLite
//! copy of the data.
//!
//!     cargo run -p datamate-core --example transpile_sql

use datamate_core::corpus::bundled;
use datamate_core::eval::answers_match;
use datamate_core::sql::{transpile_to_sql, SqliteEngine};
use datamate_core::{execute, parse};

fn main() {
    let flights = bundled("flights").unwrap();
    let engine = SqliteEngine::load(&flights).expect("loads into SQLite");
    let pipelines = [
        "SELECT['flights']; FILTER[#1, 'origin' = 'JFK']; AGGREGATE[count, #2]",
        "SELECT['flights']; PROJECT['distance', #1]; PROJECT['origin', #1]; GROUP[max, #2, #3]",
        "SELECT['flights']; SUPERLATIVE[#1, 'arr_delay', min]",
        "SELECT['flights']; FILTER[#1, 'distance' > 1000]; SORT[#2, 'distance', desc]",
    ];
    for text in pipelines {
        let p = parse(text).unwrap();
        println!(
            "{text}\n  {}",
            transpile_to_sql(&p, flights.schema()).unwrap()
        );
        let ours = execute(&p, &flights).unwrap().answer;
        let (q, theirs) = engine.answer(&p).unwrap();
        println!(
            "  executor and SQLite agree: {}\n",
            answers_match(&ours, &theirs, q.ordered)
        );
    }
}
