use serde::{Deserialize, Serialize};

use super::schema::Schema;
use super::value::Value;
use super::ModelError;

/// Index of a row within its table, stable for the lifetime of a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RowId(pub u32);

impl RowId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A schema plus row data for each of its tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDataset")]
pub struct Dataset {
    schema: Schema,
    rows: Vec<Vec<Vec<Value>>>,
}

#[derive(Deserialize)]
struct RawDataset {
    schema: Schema,
    rows: Vec<Vec<Vec<Value>>>,
}

impl TryFrom<RawDataset> for Dataset {
    type Error = ModelError;

    fn try_from(raw: RawDataset) -> Result<Self, ModelError> {
        Dataset::new(raw.schema, raw.rows)
    }
}

impl Dataset {
    /// Builds a dataset, checking row arity and per-column value types.
    pub fn new(schema: Schema, rows: Vec<Vec<Vec<Value>>>) -> Result<Self, ModelError> {
        if rows.len() != schema.tables().len() {
            return Err(ModelError::TableCount {
                expected: schema.tables().len(),
                got: rows.len(),
            });
        }
        for (table, table_rows) in schema.tables().iter().zip(&rows) {
            for (i, row) in table_rows.iter().enumerate() {
                if row.len() != table.columns.len() {
                    return Err(ModelError::Arity {
                        table: table.name.clone(),
                        row: i,
                        expected: table.columns.len(),
                        got: row.len(),
                    });
                }
                for (col, v) in table.columns.iter().zip(row) {
                    if !col.kind.admits(v) {
                        return Err(ModelError::CellType {
                            table: table.name.clone(),
                            column: col.name.clone(),
                            row: i,
                            expected: col.kind,
                        });
                    }
                }
            }
        }
        Ok(Dataset { schema, rows })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn rows(&self, table: usize) -> &[Vec<Value>] {
        &self.rows[table]
    }

    pub fn row_count(&self, table: usize) -> usize {
        self.rows[table].len()
    }

    pub fn row_ids(&self, table: usize) -> impl Iterator<Item = RowId> {
        (0..self.rows[table].len() as u32).map(RowId)
    }

    pub fn cell(&self, table: usize, row: RowId, column: usize) -> &Value {
        &self.rows[table][row.index()][column]
    }
}

/// Returns the schema embedded in a dataset.
pub fn schema_of(dataset: &Dataset) -> &Schema {
    dataset.schema()
}
