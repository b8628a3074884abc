//! CSV ingestion with per-column type inference.
//!
//! A column is temporal when every non-empty cell is a 4-digit year or an ISO
//! date, numerical when every non-empty cell parses as a finite number, and
//! categorical otherwise. Hints override inference but must agree with the
//! data. Empty cells become nulls.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::model::{parse_cell, Column, ColumnType, Dataset, ModelError, Schema, Table, Temporal};

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("no CSV files given")]
    NoFiles,
    #[error("{file}: file is empty or has no header")]
    EmptyFile { file: String },
    #[error("{file}: line {line} has {got} fields, header has {expected}")]
    RaggedRows {
        file: String,
        line: u64,
        expected: usize,
        got: usize,
    },
    #[error("column '{column}' is hinted {hint} but value '{value}' on line {line} does not fit")]
    TypeConflict {
        column: String,
        hint: ColumnType,
        value: String,
        line: u64,
    },
    #[error("{file}: {source}")]
    Csv {
        file: String,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad type hints: {0}")]
    Hints(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl IngestError {
    /// Physical line number for row-level errors.
    pub fn line(&self) -> Option<u64> {
        match self {
            IngestError::RaggedRows { line, .. } | IngestError::TypeConflict { line, .. } => {
                Some(*line)
            }
            _ => None,
        }
    }
}

/// Column type hints keyed by `column` or `table.column`.
#[derive(Debug, Clone, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct TypeHints(pub BTreeMap<String, ColumnType>);

impl TypeHints {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: &str, kind: ColumnType) -> Self {
        self.0.insert(key.to_string(), kind);
        self
    }

    fn lookup(&self, table: &str, column: &str) -> Option<ColumnType> {
        self.0
            .get(&format!("{table}.{column}"))
            .or_else(|| self.0.get(column))
            .copied()
    }
}

/// A named CSV source; the name (minus any `.csv` suffix) becomes the table name.
#[derive(Debug, Clone)]
pub struct CsvFile<'a> {
    pub name: &'a str,
    pub contents: &'a [u8],
}

fn is_year(s: &str) -> bool {
    s.len() == 4 && s.bytes().all(|b| b.is_ascii_digit()) && !s.starts_with('0')
}

fn is_temporal(s: &str) -> bool {
    is_year(s) || (s.len() == 10 && s.parse::<Temporal>().is_ok())
}

fn is_number(s: &str) -> bool {
    s.parse::<f64>().map(f64::is_finite).unwrap_or(false)
}

/// Infers a column type from its raw cells.
pub fn infer_type<'a>(cells: impl IntoIterator<Item = &'a str> + Clone) -> ColumnType {
    let present = || {
        cells
            .clone()
            .into_iter()
            .map(str::trim)
            .filter(|c| !c.is_empty())
    };
    if present().next().is_none() {
        ColumnType::Categorical
    } else if present().all(is_temporal) {
        ColumnType::Temporal
    } else if present().all(is_number) {
        ColumnType::Numerical
    } else {
        ColumnType::Categorical
    }
}

fn table_name(name: &str) -> &str {
    let base = name.rsplit(['/', '\\']).next().unwrap_or(name);
    base.strip_suffix(".csv").unwrap_or(base)
}

struct RawTable {
    name: String,
    header: Vec<String>,
    rows: Vec<(u64, Vec<String>)>,
}

fn read_raw(file: &CsvFile<'_>) -> Result<RawTable, IngestError> {
    let fname = file.name.to_string();
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .has_headers(false)
        .from_reader(file.contents);
    let mut records = rdr.records();
    let header: Vec<String> = match records.next() {
        None => return Err(IngestError::EmptyFile { file: fname }),
        Some(r) => r
            .map_err(|source| IngestError::Csv {
                file: fname.clone(),
                source,
            })?
            .iter()
            .map(|s| s.trim().to_string())
            .collect(),
    };
    if header.iter().all(String::is_empty) {
        return Err(IngestError::EmptyFile { file: fname });
    }
    let mut rows = Vec::new();
    for rec in records {
        let rec = rec.map_err(|source| IngestError::Csv {
            file: fname.clone(),
            source,
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() == 1 && rec[0].trim().is_empty() {
            continue;
        }
        if rec.len() != header.len() {
            return Err(IngestError::RaggedRows {
                file: fname,
                line,
                expected: header.len(),
                got: rec.len(),
            });
        }
        rows.push((line, rec.iter().map(str::to_string).collect()));
    }
    Ok(RawTable {
        name: table_name(file.name).to_string(),
        header,
        rows,
    })
}

/// Parses CSV sources into a dataset, one table per file in the given order.
pub fn ingest_csv(files: &[CsvFile<'_>], hints: &TypeHints) -> Result<Dataset, IngestError> {
    if files.is_empty() {
        return Err(IngestError::NoFiles);
    }
    let raws = files.iter().map(read_raw).collect::<Result<Vec<_>, _>>()?;
    let mut tables = Vec::with_capacity(raws.len());
    let mut all_rows = Vec::with_capacity(raws.len());
    for raw in raws {
        let mut columns = Vec::with_capacity(raw.header.len());
        for (c, name) in raw.header.iter().enumerate() {
            let kind = match hints.lookup(&raw.name, name) {
                Some(h) => h,
                None => infer_type(raw.rows.iter().map(|(_, r)| r[c].as_str())),
            };
            columns.push(Column::new(name.clone(), kind));
        }
        let mut rows = Vec::with_capacity(raw.rows.len());
        for (line, cells) in &raw.rows {
            let mut row = Vec::with_capacity(cells.len());
            for (cell, col) in cells.iter().zip(&columns) {
                let v =
                    parse_cell(cell.trim(), col.kind).ok_or_else(|| IngestError::TypeConflict {
                        column: format!("{}.{}", raw.name, col.name),
                        hint: col.kind,
                        value: cell.clone(),
                        line: *line,
                    })?;
                row.push(v);
            }
            rows.push(row);
        }
        tables.push(Table::new(raw.name, columns));
        all_rows.push(rows);
    }
    Ok(Dataset::new(Schema::new(tables)?, all_rows)?)
}

/// Loads every `*.csv` in a directory (sorted by file name), honouring an
/// optional `types.json` hint file next to them.
pub fn load_dataset_dir(dir: impl AsRef<Path>) -> Result<Dataset, IngestError> {
    let dir = dir.as_ref();
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| IngestError::Io { path, source }
    };
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv")))
        .collect();
    paths.sort();
    let hints_path = dir.join("types.json");
    let hints = if hints_path.exists() {
        let text = std::fs::read_to_string(&hints_path).map_err(io(&hints_path))?;
        serde_json::from_str(&text).map_err(|e| IngestError::Hints(e.to_string()))?
    } else {
        TypeHints::default()
    };
    let contents = paths
        .iter()
        .map(|p| std::fs::read(p).map_err(io(p)))
        .collect::<Result<Vec<_>, _>>()?;
    let names: Vec<String> = paths
        .iter()
        .map(|p| {
            p.file_name()
                .unwrap_or_default()
                .to_string_lossy()
                .into_owned()
        })
        .collect();
    let files: Vec<CsvFile<'_>> = names
        .iter()
        .zip(&contents)
        .map(|(name, c)| CsvFile { name, contents: c })
        .collect();
    ingest_csv(&files, &hints)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inference_order() {
        assert_eq!(infer_type(["2000", "1999", ""]), ColumnType::Temporal);
        assert_eq!(infer_type(["2000", "2021-03-04"]), ColumnType::Temporal);
        assert_eq!(infer_type(["1", "2.5", "-3"]), ColumnType::Numerical);
        assert_eq!(infer_type(["2000", "12"]), ColumnType::Numerical);
        assert_eq!(infer_type(["CS", "3"]), ColumnType::Categorical);
        assert_eq!(infer_type(["", ""]), ColumnType::Categorical);
    }

    #[test]
    fn table_names_drop_suffix_and_dirs() {
        assert_eq!(table_name("dir/students.csv"), "students");
        assert_eq!(table_name("plain"), "plain");
    }
}
