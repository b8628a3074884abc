//! Parse pipeline text, print it back in canonical form and validate it
//! against a schema.
//!
//!     cargo run -p datamate-core --example parse_and_validate

use datamate_core::corpus::desk_students;
use datamate_core::text::validate;
use datamate_core::{parse, serialize};

fn main() {
    let students = desk_students();
    let inputs = [
        "SELECT [ 'students' ];PROJECT['birth_year',#1];FILTER[#2,'birth_year'=2000];AGGREGATE[COUNT,#3]",
        "SELECT['students']; PROJECT['students', #1]",
        "SELECT['students']; PROJECT['name', #1]; AGGREGATE[avg, #2]",
        "SELECT['students']; FILTER[#3, 'dept' = 'CS']",
        "SELECT['students']; EXPLODE[#1]",
    ];
    for text in inputs {
        println!("input:     {text}");
        match parse(text) {
            Ok(p) => {
                println!("canonical: {}", serialize(&p));
                let report = validate(&p, students.schema());
                if report.valid {
                    println!("valid");
                } else {
                    println!("{report}");
                }
            }
            Err(e) => println!("parse error ({:?}): {e}", e.kind),
        }
        println!();
    }
}
