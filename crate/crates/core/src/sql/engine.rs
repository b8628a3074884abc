use rusqlite::types::ValueRef;
use rusqlite::Connection;

use super::{ident, transpile_with, AggShape, Dialect, SqlError, SqlQuery, SqlShape};
use crate::model::{Answer, ColumnType, Dataset, QdmrPipeline, Schema, Value};

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    Sqlite(#[from] rusqlite::Error),
    #[error(transparent)]
    Transpile(#[from] SqlError),
    #[error("unexpected value in result column {column}: {detail}")]
    Decode { column: usize, detail: String },
}

/// An in-memory SQLite copy of a dataset, used as the reference engine.
pub struct SqliteEngine {
    conn: Connection,
    schema: Schema,
}

fn sql_type(kind: ColumnType) -> &'static str {
    match kind {
        ColumnType::Numerical => "REAL",
        ColumnType::Categorical | ColumnType::Temporal => "TEXT",
    }
}

fn to_sql(v: &Value) -> rusqlite::types::Value {
    use rusqlite::types::Value as V;
    match v {
        Value::Null => V::Null,
        Value::Number(n) => V::Real(*n),
        Value::Text(s) => V::Text(s.clone()),
        Value::Date(d) => V::Text(d.to_string()),
    }
}

fn decode(v: ValueRef<'_>, kind: ColumnType, column: usize) -> Result<Value, EngineError> {
    let bad = |detail: String| EngineError::Decode { column, detail };
    Ok(match (v, kind) {
        (ValueRef::Null, _) => Value::Null,
        (ValueRef::Integer(i), ColumnType::Numerical) => Value::Number(i as f64),
        (ValueRef::Real(r), ColumnType::Numerical) => Value::Number(r),
        (ValueRef::Text(t), ColumnType::Categorical) => {
            Value::Text(String::from_utf8_lossy(t).into_owned())
        }
        (ValueRef::Text(t), ColumnType::Temporal) => {
            let s = String::from_utf8_lossy(t);
            Value::Date(
                s.parse()
                    .map_err(|_| bad(format!("'{s}' is not temporal")))?,
            )
        }
        (other, kind) => return Err(bad(format!("{other:?} for a {kind} column"))),
    })
}

fn decode_agg(v: ValueRef<'_>, shape: AggShape, column: usize) -> Result<Value, EngineError> {
    match shape {
        AggShape::Number => decode(v, ColumnType::Numerical, column),
        AggShape::Column(kind) => decode(v, kind, column),
    }
}

impl SqliteEngine {
    /// Copies every table into a fresh in-memory database. Rows are inserted
    /// in order, so `rowid` is the 1-based row position.
    pub fn load(dataset: &Dataset) -> Result<Self, EngineError> {
        let mut conn = Connection::open_in_memory()?;
        let schema = dataset.schema().clone();
        let tx = conn.transaction()?;
        for (t, table) in schema.tables().iter().enumerate() {
            let cols: Vec<String> = table
                .columns
                .iter()
                .map(|c| format!("{} {}", ident(&c.name), sql_type(c.kind)))
                .collect();
            tx.execute(
                &format!("CREATE TABLE {} ({})", ident(&table.name), cols.join(", ")),
                [],
            )?;
            let marks = vec!["?"; table.columns.len()].join(", ");
            let mut stmt = tx.prepare(&format!(
                "INSERT INTO {} VALUES ({marks})",
                ident(&table.name)
            ))?;
            for row in dataset.rows(t) {
                stmt.execute(rusqlite::params_from_iter(row.iter().map(to_sql)))?;
            }
        }
        tx.commit()?;
        Ok(SqliteEngine { conn, schema })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    /// Runs a transpiled query and reads the rows back into an answer.
    pub fn run(&self, query: &SqlQuery) -> Result<Answer, EngineError> {
        let mut stmt = self.conn.prepare(&query.sql)?;
        let mut rows = stmt.query([])?;
        let mut out: Vec<Vec<Value>> = Vec::new();
        while let Some(row) = rows.next()? {
            let vals = match &query.shape {
                SqlShape::Rows { columns } => columns
                    .iter()
                    .enumerate()
                    .map(|(i, k)| decode(row.get_ref(i)?, *k, i))
                    .collect::<Result<Vec<_>, _>>()?,
                SqlShape::Values { column } => vec![decode(row.get_ref(0)?, *column, 0)?],
                SqlShape::Scalar { value } => vec![decode_agg(row.get_ref(0)?, *value, 0)?],
                SqlShape::Groups { key, value } => vec![
                    decode(row.get_ref(0)?, *key, 0)?,
                    decode_agg(row.get_ref(1)?, *value, 1)?,
                ],
            };
            out.push(vals);
        }
        Ok(match &query.shape {
            SqlShape::Rows { .. } => Answer::Rows(out),
            SqlShape::Values { .. } => {
                Answer::Values(out.into_iter().map(|mut r| r.remove(0)).collect())
            }
            SqlShape::Scalar { .. } => Answer::Scalar(
                out.into_iter()
                    .next()
                    .and_then(|mut r| r.pop())
                    .unwrap_or(Value::Null),
            ),
            SqlShape::Groups { .. } => Answer::Groups(
                out.into_iter()
                    .map(|mut r| {
                        let v = r.pop().expect("two columns");
                        (r.pop().expect("two columns"), v)
                    })
                    .collect(),
            ),
        })
    }

    /// Transpiles (SQLite dialect) and runs a pipeline.
    pub fn answer(&self, pipeline: &QdmrPipeline) -> Result<(SqlQuery, Answer), EngineError> {
        let q = transpile_with(pipeline, &self.schema, Dialect::Sqlite)?;
        let a = self.run(&q)?;
        Ok((q, a))
    }
}
