use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::value::{Temporal, Value};
use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnType {
    Categorical,
    Numerical,
    Temporal,
}

impl ColumnType {
    /// Short tag used in serialized schemas.
    pub fn tag(self) -> &'static str {
        match self {
            ColumnType::Categorical => "cat",
            ColumnType::Numerical => "num",
            ColumnType::Temporal => "tmp",
        }
    }

    pub fn is_ordered(self) -> bool {
        matches!(self, ColumnType::Numerical | ColumnType::Temporal)
    }

    /// Whether a non-null value is admissible in a column of this type.
    pub fn admits(self, v: &Value) -> bool {
        match (self, v) {
            (_, Value::Null) => true,
            (ColumnType::Categorical, Value::Text(_)) => true,
            (ColumnType::Numerical, Value::Number(n)) => n.is_finite(),
            (ColumnType::Temporal, Value::Date(_)) => true,
            _ => false,
        }
    }
}

impl fmt::Display for ColumnType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ColumnType::Categorical => "categorical",
            ColumnType::Numerical => "numerical",
            ColumnType::Temporal => "temporal",
        })
    }
}

impl std::str::FromStr for ColumnType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "categorical" | "cat" => Ok(ColumnType::Categorical),
            "numerical" | "num" => Ok(ColumnType::Numerical),
            "temporal" | "tmp" => Ok(ColumnType::Temporal),
            other => Err(format!("unknown column type '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    #[serde(rename = "type")]
    pub kind: ColumnType,
}

impl Column {
    pub fn new(name: impl Into<String>, kind: ColumnType) -> Self {
        Column {
            name: name.into(),
            kind,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<Column>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: Vec<Column>) -> Self {
        Table {
            name: name.into(),
            columns,
        }
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        let key = normalize_ident(name);
        self.columns
            .iter()
            .position(|c| normalize_ident(&c.name) == key)
    }
}

/// Named typed tables. Table names are unique, column names are unique per
/// table, and there is at least one table with at least one column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Table>", into = "Vec<Table>")]
pub struct Schema {
    tables: Vec<Table>,
}

impl Schema {
    pub fn new(tables: Vec<Table>) -> Result<Self, ModelError> {
        if tables.is_empty() {
            return Err(ModelError::EmptySchema);
        }
        let mut seen = HashSet::new();
        for t in &tables {
            if t.columns.is_empty() {
                return Err(ModelError::EmptyTable(t.name.clone()));
            }
            if !seen.insert(normalize_ident(&t.name)) {
                return Err(ModelError::DuplicateTable(t.name.clone()));
            }
            let mut cols = HashSet::new();
            for c in &t.columns {
                if !cols.insert(normalize_ident(&c.name)) {
                    return Err(ModelError::DuplicateColumn {
                        table: t.name.clone(),
                        column: c.name.clone(),
                    });
                }
            }
        }
        Ok(Schema { tables })
    }

    pub fn tables(&self) -> &[Table] {
        &self.tables
    }

    pub fn table(&self, idx: usize) -> &Table {
        &self.tables[idx]
    }

    pub fn table_index(&self, name: &str) -> Option<usize> {
        let key = normalize_ident(name);
        self.tables
            .iter()
            .position(|t| normalize_ident(&t.name) == key)
    }

    /// All attributes (each table followed by its columns) in declaration order.
    pub fn attributes(&self) -> Vec<AttributeRef> {
        let mut out = Vec::new();
        for t in &self.tables {
            out.push(AttributeRef::table(&t.name));
            for c in &t.columns {
                out.push(AttributeRef::column(&t.name, &c.name));
            }
        }
        out
    }

    pub fn column_type(&self, attr: &AttributeRef) -> Option<ColumnType> {
        let t = self.table_index(&attr.table)?;
        let c = self.tables[t].column_index(attr.column.as_deref()?)?;
        Some(self.tables[t].columns[c].kind)
    }
}

impl TryFrom<Vec<Table>> for Schema {
    type Error = ModelError;

    fn try_from(tables: Vec<Table>) -> Result<Self, ModelError> {
        Schema::new(tables)
    }
}

impl From<Schema> for Vec<Table> {
    fn from(s: Schema) -> Self {
        s.tables
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttrKind {
    Table,
    Column,
}

/// A resolved reference to a table or a column, using canonical names.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AttributeRef {
    pub kind: AttrKind,
    pub table: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub column: Option<String>,
}

impl AttributeRef {
    pub fn table(table: &str) -> Self {
        AttributeRef {
            kind: AttrKind::Table,
            table: table.to_string(),
            column: None,
        }
    }

    pub fn column(table: &str, column: &str) -> Self {
        AttributeRef {
            kind: AttrKind::Column,
            table: table.to_string(),
            column: Some(column.to_string()),
        }
    }

    pub fn is_table(&self) -> bool {
        self.kind == AttrKind::Table
    }

    /// The bare name: the column name for columns, the table name otherwise.
    pub fn name(&self) -> &str {
        self.column.as_deref().unwrap_or(&self.table)
    }
}

impl fmt::Display for AttributeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.column {
            Some(c) => write!(f, "{}.{}", self.table, c),
            None => f.write_str(&self.table),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ResolveError {
    #[error("no table or column named '{0}'")]
    NotFound(String),
    #[error("'{name}' is ambiguous: {}", candidates.join(", "))]
    Ambiguous {
        name: String,
        candidates: Vec<String>,
    },
}

/// Lowercases and collapses runs of spaces and underscores into a single
/// underscore, so "Birth Year" and "birth_year" compare equal.
pub fn normalize_ident(name: &str) -> String {
    let mut out = String::with_capacity(name.len());
    let mut pending_sep = false;
    for ch in name.trim().chars() {
        if ch == ' ' || ch == '_' || ch.is_whitespace() {
            pending_sep = true;
            continue;
        }
        if pending_sep && !out.is_empty() {
            out.push('_');
        }
        pending_sep = false;
        out.extend(ch.to_lowercase());
    }
    out
}

/// Resolves a display name against the schema. Table names win over column
/// names; columns may be qualified as `table.column`.
pub fn resolve_attribute(name: &str, schema: &Schema) -> Result<AttributeRef, ResolveError> {
    if let Some(t) = schema.table_index(name) {
        return Ok(AttributeRef::table(&schema.table(t).name));
    }
    if let Some((tname, cname)) = name.split_once('.') {
        let found = schema.table_index(tname).and_then(|t| {
            let table = schema.table(t);
            table
                .column_index(cname)
                .map(|c| AttributeRef::column(&table.name, &table.columns[c].name))
        });
        return found.ok_or_else(|| ResolveError::NotFound(name.to_string()));
    }
    let mut hits: Vec<AttributeRef> = schema
        .tables()
        .iter()
        .filter_map(|t| {
            t.column_index(name)
                .map(|c| AttributeRef::column(&t.name, &t.columns[c].name))
        })
        .collect();
    match hits.len() {
        0 => Err(ResolveError::NotFound(name.to_string())),
        1 => Ok(hits.remove(0)),
        _ => Err(ResolveError::Ambiguous {
            name: name.to_string(),
            candidates: hits.iter().map(ToString::to_string).collect(),
        }),
    }
}

/// Parses a raw cell according to a column type. Empty text is null.
pub fn parse_cell(raw: &str, kind: ColumnType) -> Option<Value> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Some(Value::Null);
    }
    match kind {
        ColumnType::Categorical => Some(Value::Text(raw.to_string())),
        ColumnType::Numerical => raw
            .parse::<f64>()
            .ok()
            .filter(|n| n.is_finite())
            .map(Value::Number),
        ColumnType::Temporal => raw.parse::<Temporal>().ok().map(Value::Date),
    }
}
