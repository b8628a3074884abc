use datamate_core::ingest::{
    infer_type, ingest_csv, load_dataset_dir, CsvFile, IngestError, TypeHints,
};
use datamate_core::{ColumnType, Value};

fn one(name: &str, text: &str) -> Result<datamate_core::Dataset, IngestError> {
    ingest_csv(
        &[CsvFile {
            name,
            contents: text.as_bytes(),
        }],
        &TypeHints::new(),
    )
}

#[test]
fn students_types_are_inferred() {
    let d = one(
        "students.csv",
        "id,name,birth_year,dept\n1,Amy,2000,CS\n2,Bob,1999,EE\n3,Cal,2000,CS\n4,Dee,2001,ME\n",
    )
    .unwrap();
    let kinds: Vec<ColumnType> = d.schema().table(0).columns.iter().map(|c| c.kind).collect();
    assert_eq!(
        kinds,
        [
            ColumnType::Numerical,
            ColumnType::Categorical,
            ColumnType::Temporal,
            ColumnType::Categorical
        ]
    );
    assert_eq!(d.schema().table(0).name, "students");
    assert_eq!(d.row_count(0), 4);
}

#[test]
fn ragged_row_reports_its_line() {
    let e = one("t.csv", "a,b\n1,2\n3\n5,6\n").unwrap_err();
    assert!(
        matches!(
            e,
            IngestError::RaggedRows {
                line: 3,
                expected: 2,
                got: 1,
                ..
            }
        ),
        "{e:?}"
    );
    assert_eq!(e.line(), Some(3));
}

#[test]
fn hint_against_data_is_a_conflict() {
    let hints = TypeHints::new().with("dept", ColumnType::Numerical);
    let e = ingest_csv(
        &[CsvFile {
            name: "students.csv",
            contents: b"id,dept\n1,CS\n",
        }],
        &hints,
    )
    .unwrap_err();
    match e {
        IngestError::TypeConflict {
            column,
            hint,
            value,
            line,
        } => {
            assert_eq!(
                (column.as_str(), hint, value.as_str(), line),
                ("students.dept", ColumnType::Numerical, "CS", 2)
            );
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn hints_override_inference() {
    let hints = TypeHints::new().with("t.code", ColumnType::Categorical);
    let d = ingest_csv(
        &[CsvFile {
            name: "t.csv",
            contents: b"code,n\n007,1\n1999,2\n",
        }],
        &hints,
    )
    .unwrap();
    assert_eq!(d.schema().table(0).columns[0].kind, ColumnType::Categorical);
}

#[test]
fn empty_inputs() {
    assert!(matches!(
        one("t.csv", ""),
        Err(IngestError::EmptyFile { .. })
    ));
    let header_only = one("t.csv", "a,b\n").unwrap();
    assert_eq!(header_only.row_count(0), 0);
    assert!(matches!(
        ingest_csv(&[], &TypeHints::new()),
        Err(IngestError::NoFiles)
    ));
}

#[test]
fn empty_cells_become_null() {
    let d = one("t.csv", "x,y\n1,a\n,b\n3,\n").unwrap();
    assert_eq!(d.schema().table(0).columns[0].kind, ColumnType::Numerical);
    assert_eq!(d.rows(0)[1][0], Value::Null);
    assert_eq!(d.rows(0)[2][1], Value::Null);
}

#[test]
fn inference_rules() {
    assert_eq!(infer_type(["2001", "1999"]), ColumnType::Temporal);
    assert_eq!(infer_type(["2022-01-05", "2021"]), ColumnType::Temporal);
    assert_eq!(infer_type(["1.5", "-2", "1e3"]), ColumnType::Numerical);
    assert_eq!(infer_type(["12", "x"]), ColumnType::Categorical);
    assert_eq!(infer_type(["", " "]), ColumnType::Categorical);
}

#[test]
fn directory_with_hint_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("b.csv"), "k,v\nx,1\n").unwrap();
    std::fs::write(dir.path().join("a.csv"), "year\n2001\n").unwrap();
    std::fs::write(dir.path().join("types.json"), r#"{"a.year": "numerical"}"#).unwrap();
    let d = load_dataset_dir(dir.path()).unwrap();
    let names: Vec<&str> = d
        .schema()
        .tables()
        .iter()
        .map(|t| t.name.as_str())
        .collect();
    assert_eq!(names, ["a", "b"]);
    assert_eq!(d.schema().table(0).columns[0].kind, ColumnType::Numerical);
}
