//! Column type inference on uploaded CSV text, with and without hints.
//!
//!     cargo run -p datamate-core --example ingest_csv

use datamate_core::ingest::{ingest_csv, CsvFile, TypeHints};
use datamate_core::ColumnType;

const SALES: &str = "region,month,units,opened\nNorth,2021-01-01,12,1998\nSouth,2021-02-01,7,2004\nNorth,2021-03-01,,1998\n";

fn main() {
    let files = [CsvFile {
        name: "sales.csv",
        contents: SALES.as_bytes(),
    }];
    let ds = ingest_csv(&files, &TypeHints::new()).expect("clean CSV");
    let table = &ds.schema().tables()[0];
    println!("table {} with {} rows", table.name, ds.row_count(0));
    for c in &table.columns {
        println!("  {:<8} {:?}", c.name, c.kind);
    }

    // a year column can be forced to numerical
    let hinted = ingest_csv(
        &files,
        &TypeHints::new().with("opened", ColumnType::Numerical),
    )
    .unwrap();
    println!(
        "with hint: opened is {:?}",
        hinted.schema().tables()[0].columns[3].kind
    );

    // a hint the data contradicts is an error that names the line
    match ingest_csv(
        &files,
        &TypeHints::new().with("region", ColumnType::Numerical),
    ) {
        Err(e) => println!("rejected: {e}"),
        Ok(_) => unreachable!(),
    }
    match ingest_csv(
        &[CsvFile {
            name: "bad.csv",
            contents: b"a,b\n1,2\n3\n",
        }],
        &TypeHints::new(),
    ) {
        Err(e) => println!("rejected: {e}"),
        Ok(_) => unreachable!(),
    }
}
