use serde::{Deserialize, Serialize};

use super::dataset::RowId;
use super::value::Value;

/// Rows of one table, in current order. `focus` marks a column singled out by
/// a column-level SELECT.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordSet {
    pub table: String,
    pub rows: Vec<RowId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub focus: Option<String>,
}

/// Values of one column aligned with the records they were read from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub table: String,
    pub column: String,
    pub items: Vec<(RowId, Value)>,
}

impl Projection {
    pub fn row_ids(&self) -> impl Iterator<Item = RowId> + '_ {
        self.items.iter().map(|(r, _)| *r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Group {
    pub key: Value,
    pub members: Vec<RowId>,
    pub aggregate: Value,
}

/// The value produced by one pipeline step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepResult {
    Records(RecordSet),
    Projection(Projection),
    Groups {
        key_column: String,
        groups: Vec<Group>,
    },
    Scalar {
        value: Value,
    },
}

impl StepResult {
    /// Row ids carried by the result, in order. Scalars carry none.
    pub fn row_ids(&self) -> Vec<RowId> {
        match self {
            StepResult::Records(r) => r.rows.clone(),
            StepResult::Projection(p) => p.row_ids().collect(),
            StepResult::Groups { groups, .. } => groups
                .iter()
                .flat_map(|g| g.members.iter().copied())
                .collect(),
            StepResult::Scalar { .. } => Vec::new(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            StepResult::Records(_) => "records",
            StepResult::Projection(_) => "projection",
            StepResult::Groups { .. } => "groups",
            StepResult::Scalar { .. } => "scalar",
        }
    }
}

/// User-facing presentation of a step result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Answer {
    Scalar(Value),
    /// Values of a projected or focused column.
    Values(Vec<Value>),
    /// Full rows in column declaration order.
    Rows(Vec<Vec<Value>>),
    /// (key, aggregate) pairs.
    Groups(Vec<(Value, Value)>),
}

impl Answer {
    pub fn as_scalar(&self) -> Option<&Value> {
        match self {
            Answer::Scalar(v) => Some(v),
            _ => None,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Answer::Scalar(_) => 1,
            Answer::Values(v) => v.len(),
            Answer::Rows(r) => r.len(),
            Answer::Groups(g) => g.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
