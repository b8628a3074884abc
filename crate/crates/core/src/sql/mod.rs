//! Pipeline to SQL transpilation.
//!
//! Every valid pipeline maps to one `SELECT` over its table. FILTER and
//! SUPERLATIVE steps become `WHERE` conjuncts (a SUPERLATIVE compares against
//! a scalar subquery so ties survive), PROJECT narrows the select list,
//! AGGREGATE and GROUP become aggregate expressions, and SORT steps become
//! `ORDER BY` keys with the most recent sort first.

#[cfg(feature = "sqlite")]
mod engine;

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

#[cfg(feature = "sqlite")]
pub use engine::{EngineError, SqliteEngine};

use crate::model::{
    AggMethod, ColumnType, Comparator, Extremum, QdmrPipeline, Schema, SortDir, Value,
};
use crate::plan::{bind, BoundOperand, BoundPipeline, BoundStep, OutKind, ValidationReport};

/// Output flavour of the generated SQL.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dialect {
    /// Plain ANSI-style SQL.
    #[default]
    Portable,
    /// Adds `NULLS LAST` to sort keys and a final `rowid` key so the row
    /// order is fully determined, matching the executor's stable sorts.
    Sqlite,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SqlError {
    #[error("pipeline is not valid: {0}")]
    Invalid(ValidationReport),
    #[error("{0} has no portable SQL form")]
    Unsupported(String),
}

/// How to read the result rows of a query back into an answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SqlShape {
    /// Whole rows of the table, all columns.
    Rows { columns: Vec<ColumnType> },
    /// One column of values.
    Values { column: ColumnType },
    /// A single aggregate value.
    Scalar { value: AggShape },
    /// (key, aggregate) rows.
    Groups { key: ColumnType, value: AggShape },
}

/// Result type of an aggregate expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggShape {
    Number,
    Column(ColumnType),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SqlQuery {
    pub sql: String,
    pub shape: SqlShape,
    /// Whether the row order of the result is meaningful.
    pub ordered: bool,
}

const RESERVED: &[&str] = &[
    "all", "and", "as", "asc", "by", "case", "count", "desc", "distinct", "from", "group",
    "having", "in", "index", "is", "join", "like", "limit", "not", "null", "on", "or", "order",
    "rowid", "select", "table", "to", "union", "where",
];

/// Quotes an identifier only when it is not a plain lowercase-safe name.
pub fn ident(name: &str) -> String {
    let plain = name
        .chars()
        .next()
        .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !RESERVED.contains(&name.to_ascii_lowercase().as_str());
    if plain {
        name.to_string()
    } else {
        format!("\"{}\"", name.replace('"', "\"\""))
    }
}

/// Literal as written in the pipeline; column affinity does the coercion.
pub fn literal(v: &Value) -> String {
    match v {
        Value::Null => "NULL".into(),
        Value::Number(n) => format!("{n}"),
        Value::Text(s) => format!("'{}'", s.replace('\'', "''")),
        Value::Date(d) => format!("'{d}'"),
    }
}

fn cmp_sql(c: Comparator) -> &'static str {
    match c {
        Comparator::Neq => "<>",
        other => other.symbol(),
    }
}

fn agg_sql(method: AggMethod, arg: Option<&str>) -> Result<String, SqlError> {
    Ok(match (method, arg) {
        (AggMethod::Count, None) => "COUNT(*)".into(),
        (AggMethod::Count, Some(c)) => format!("COUNT({c})"),
        (AggMethod::Sum, Some(c)) => format!("COALESCE(SUM({c}), 0)"),
        (AggMethod::Avg, Some(c)) => format!("AVG({c})"),
        (AggMethod::Max, Some(c)) => format!("MAX({c})"),
        (AggMethod::Min, Some(c)) => format!("MIN({c})"),
        (AggMethod::Median, _) => return Err(SqlError::Unsupported("median".into())),
        (m, None) => {
            return Err(SqlError::Unsupported(format!(
                "{} over whole records",
                m.name()
            )))
        }
    })
}

fn agg_shape(method: AggMethod, column: Option<ColumnType>) -> AggShape {
    match (method, column) {
        (AggMethod::Max | AggMethod::Min, Some(kind)) => AggShape::Column(kind),
        _ => AggShape::Number,
    }
}

struct Emitter<'a> {
    bound: &'a BoundPipeline,
    schema: &'a Schema,
}

impl Emitter<'_> {
    fn table(&self) -> String {
        ident(&self.schema.table(self.bound.table).name)
    }

    fn column(&self, c: usize) -> String {
        ident(&self.schema.table(self.bound.table).columns[c].name)
    }

    fn kind(&self, c: usize) -> ColumnType {
        self.schema.table(self.bound.table).columns[c].kind
    }

    fn operand(&self, op: BoundOperand) -> String {
        self.column(self.bound.operand_column(op))
    }

    /// Conjunct enforced by a FILTER or SUPERLATIVE step.
    fn conjunct(&self, step: usize) -> String {
        match &self.bound.steps[step] {
            BoundStep::Filter {
                operand, cmp, raw, ..
            } => format!(
                "{} {} {}",
                self.operand(*operand),
                cmp_sql(*cmp),
                literal(raw)
            ),
            BoundStep::Superlative { operand, ext, .. } => {
                let col = self.operand(*operand);
                let f = match ext {
                    Extremum::Max => "MAX",
                    Extremum::Min => "MIN",
                };
                let mut prior = self.bound.info[step].lineage.clone();
                prior.remove(&step);
                format!(
                    "{col} = (SELECT {f}({col}) FROM {}{})",
                    self.table(),
                    self.where_clause(&prior)
                )
            }
            _ => unreachable!("lineage only holds FILTER/SUPERLATIVE steps"),
        }
    }

    fn where_clause(&self, lineage: &BTreeSet<usize>) -> String {
        if lineage.is_empty() {
            return String::new();
        }
        let parts: Vec<String> = lineage.iter().map(|&s| self.conjunct(s)).collect();
        format!(" WHERE {}", parts.join(" AND "))
    }

    fn order_clause(&self, ordering: &[(usize, SortDir)], dialect: Dialect) -> String {
        if ordering.is_empty() {
            return String::new();
        }
        let mut out = String::from(" ORDER BY ");
        for (i, (col, dir)) in ordering.iter().rev().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            let d = match dir {
                SortDir::Asc => "ASC",
                SortDir::Desc => "DESC",
            };
            write!(out, "{} {d}", self.column(*col)).expect("string write");
            if dialect == Dialect::Sqlite {
                out.push_str(" NULLS LAST");
            }
        }
        if dialect == Dialect::Sqlite {
            out.push_str(", rowid");
        }
        out
    }

    fn emit(&self, dialect: Dialect) -> Result<SqlQuery, SqlError> {
        let last = self.bound.steps.len() - 1;
        let info = &self.bound.info[last];
        let from = self.table();
        let (select, shape, tail) = match &self.bound.steps[last] {
            BoundStep::Aggregate { method, .. } => {
                let arg = info.column.map(|c| self.column(c));
                (
                    agg_sql(*method, arg.as_deref())?,
                    SqlShape::Scalar {
                        value: agg_shape(*method, info.column.map(|c| self.kind(c))),
                    },
                    String::new(),
                )
            }
            BoundStep::Group { method, values, .. } => {
                let key = info.column.expect("group key");
                let val_col = self.bound.info[*values].column;
                let arg = val_col.map(|c| self.column(c));
                (
                    format!(
                        "{}, {}",
                        self.column(key),
                        agg_sql(*method, arg.as_deref())?
                    ),
                    SqlShape::Groups {
                        key: self.kind(key),
                        value: agg_shape(*method, val_col.map(|c| self.kind(c))),
                    },
                    format!(" GROUP BY {}", self.column(key)),
                )
            }
            _ => {
                debug_assert!(matches!(info.kind, OutKind::Records | OutKind::Projection));
                let order = self.order_clause(&info.ordering, dialect);
                match info.column {
                    Some(c) => (
                        self.column(c),
                        SqlShape::Values {
                            column: self.kind(c),
                        },
                        order,
                    ),
                    None => (
                        "*".to_string(),
                        SqlShape::Rows {
                            columns: self
                                .schema
                                .table(self.bound.table)
                                .columns
                                .iter()
                                .map(|c| c.kind)
                                .collect(),
                        },
                        order,
                    ),
                }
            }
        };
        let ordered = matches!(shape, SqlShape::Rows { .. } | SqlShape::Values { .. })
            && !info.ordering.is_empty();
        Ok(SqlQuery {
            sql: format!(
                "SELECT {select} FROM {from}{}{tail}",
                self.where_clause(&info.lineage)
            ),
            shape,
            ordered,
        })
    }
}

/// Transpiles a valid pipeline to a portable SQL string.
pub fn transpile_to_sql(pipeline: &QdmrPipeline, schema: &Schema) -> Result<String, SqlError> {
    transpile_with(pipeline, schema, Dialect::Portable).map(|q| q.sql)
}

pub fn transpile_with(
    pipeline: &QdmrPipeline,
    schema: &Schema,
    dialect: Dialect,
) -> Result<SqlQuery, SqlError> {
    let bound = bind(pipeline, schema).map_err(SqlError::Invalid)?;
    transpile_bound(&bound, schema, dialect)
}

pub fn transpile_bound(
    bound: &BoundPipeline,
    schema: &Schema,
    dialect: Dialect,
) -> Result<SqlQuery, SqlError> {
    Emitter { bound, schema }.emit(dialect)
}

/// Whether a pipeline uses median anywhere (and so has no SQL form).
pub fn uses_median(pipeline: &QdmrPipeline) -> bool {
    use crate::model::Arg;
    pipeline
        .steps()
        .iter()
        .flat_map(|s| &s.args)
        .any(|a| matches!(a, Arg::Method(AggMethod::Median)))
}
