//! Core domain types: schemas, datasets, pipelines and step results.

mod dataset;
mod pipeline;
mod result;
mod schema;
mod value;

pub use dataset::{schema_of, Dataset, RowId};
pub(crate) use pipeline::check_structure;
pub use pipeline::{
    AggMethod, Arg, ArgSlot, Comparator, Condition, Extremum, Op, Operand, PipelineError,
    QdmrPipeline, QdmrStep, SortDir,
};
pub use result::{Answer, Group, Projection, RecordSet, StepResult};
pub use schema::{
    normalize_ident, parse_cell, resolve_attribute, AttrKind, AttributeRef, Column, ColumnType,
    ResolveError, Schema, Table,
};
pub use value::{Temporal, Value};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("schema has no tables")]
    EmptySchema,
    #[error("table '{0}' has no columns")]
    EmptyTable(String),
    #[error("duplicate table '{0}'")]
    DuplicateTable(String),
    #[error("duplicate column '{column}' in table '{table}'")]
    DuplicateColumn { table: String, column: String },
    #[error("expected rows for {expected} tables, got {got}")]
    TableCount { expected: usize, got: usize },
    #[error("row {row} of '{table}' has {got} values, expected {expected}")]
    Arity {
        table: String,
        row: usize,
        expected: usize,
        got: usize,
    },
    #[error("row {row} of '{table}': value in column '{column}' is not {expected}")]
    CellType {
        table: String,
        column: String,
        row: usize,
        expected: ColumnType,
    },
}
