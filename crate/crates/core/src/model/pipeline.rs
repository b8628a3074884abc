use std::fmt;

use serde::{Deserialize, Serialize};

use super::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Op {
    Select,
    Project,
    Filter,
    Superlative,
    Aggregate,
    Group,
    Sort,
}

/// Expected argument kind at one position of an operation signature.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArgSlot {
    Attr,
    Ref,
    Cond,
    Method,
    Dir,
    Super,
    /// Either a named column or a reference to a projection step.
    Column,
}

impl ArgSlot {
    pub fn accepts(self, arg: &Arg) -> bool {
        matches!(
            (self, arg),
            (ArgSlot::Attr, Arg::Attr(_))
                | (ArgSlot::Ref, Arg::Ref(_))
                | (ArgSlot::Cond, Arg::Cond(_))
                | (ArgSlot::Method, Arg::Method(_))
                | (ArgSlot::Dir, Arg::Dir(_))
                | (ArgSlot::Super, Arg::Super(_))
                | (ArgSlot::Column, Arg::Attr(_) | Arg::Ref(_))
        )
    }

    pub fn describe(self) -> &'static str {
        match self {
            ArgSlot::Attr => "a quoted attribute name",
            ArgSlot::Ref => "a step reference #k",
            ArgSlot::Cond => "a condition",
            ArgSlot::Method => "an aggregation method",
            ArgSlot::Dir => "asc or desc",
            ArgSlot::Super => "max or min",
            ArgSlot::Column => "a quoted column name or a step reference",
        }
    }
}

impl Op {
    pub const ALL: [Op; 7] = [
        Op::Select,
        Op::Project,
        Op::Filter,
        Op::Superlative,
        Op::Aggregate,
        Op::Group,
        Op::Sort,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Op::Select => "SELECT",
            Op::Project => "PROJECT",
            Op::Filter => "FILTER",
            Op::Superlative => "SUPERLATIVE",
            Op::Aggregate => "AGGREGATE",
            Op::Group => "GROUP",
            Op::Sort => "SORT",
        }
    }

    pub fn from_name(s: &str) -> Option<Op> {
        Op::ALL
            .into_iter()
            .find(|op| op.name().eq_ignore_ascii_case(s))
    }

    /// Positional argument signature.
    pub fn signature(self) -> &'static [ArgSlot] {
        use ArgSlot::*;
        match self {
            Op::Select => &[Attr],
            Op::Project => &[Attr, Ref],
            Op::Filter => &[Ref, Cond],
            Op::Superlative => &[Ref, Column, Super],
            Op::Aggregate => &[Method, Ref],
            Op::Group => &[Method, Ref, Ref],
            Op::Sort => &[Ref, Column, Dir],
        }
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparator {
    Eq,
    Neq,
    Gt,
    Lt,
    Ge,
    Le,
}

impl Comparator {
    pub const ALL: [Comparator; 6] = [
        Comparator::Eq,
        Comparator::Neq,
        Comparator::Gt,
        Comparator::Lt,
        Comparator::Ge,
        Comparator::Le,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Eq => "=",
            Comparator::Neq => "!=",
            Comparator::Gt => ">",
            Comparator::Lt => "<",
            Comparator::Ge => ">=",
            Comparator::Le => "<=",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Self> {
        Comparator::ALL.into_iter().find(|c| c.symbol() == s)
    }

    /// Ordering comparators need numerical or temporal operands.
    pub fn is_ordering(self) -> bool {
        !matches!(self, Comparator::Eq | Comparator::Neq)
    }

    pub fn holds(self, ord: std::cmp::Ordering) -> bool {
        use std::cmp::Ordering::*;
        match self {
            Comparator::Eq => ord == Equal,
            Comparator::Neq => ord != Equal,
            Comparator::Gt => ord == Greater,
            Comparator::Lt => ord == Less,
            Comparator::Ge => ord != Less,
            Comparator::Le => ord != Greater,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggMethod {
    Count,
    Max,
    Min,
    Sum,
    Avg,
    Median,
}

impl AggMethod {
    pub const ALL: [AggMethod; 6] = [
        AggMethod::Count,
        AggMethod::Max,
        AggMethod::Min,
        AggMethod::Sum,
        AggMethod::Avg,
        AggMethod::Median,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AggMethod::Count => "count",
            AggMethod::Max => "max",
            AggMethod::Min => "min",
            AggMethod::Sum => "sum",
            AggMethod::Avg => "avg",
            AggMethod::Median => "median",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        AggMethod::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SortDir {
    Asc,
    Desc,
}

impl SortDir {
    pub fn name(self) -> &'static str {
        match self {
            SortDir::Asc => "asc",
            SortDir::Desc => "desc",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extremum {
    Max,
    Min,
}

impl Extremum {
    pub fn name(self) -> &'static str {
        match self {
            Extremum::Max => "max",
            Extremum::Min => "min",
        }
    }
}

/// Left-hand side of a condition: a named column or a projection step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operand {
    Attr(String),
    Ref(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub operand: Operand,
    pub cmp: Comparator,
    pub literal: Value,
}

/// One argument of a step. Attribute names keep the display text they were
/// written with; resolution against a schema happens at validation time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arg {
    Attr(String),
    /// 1-based index of an earlier step.
    Ref(usize),
    Cond(Condition),
    Method(AggMethod),
    Dir(SortDir),
    Super(Extremum),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QdmrStep {
    pub op: Op,
    pub args: Vec<Arg>,
}

impl QdmrStep {
    pub fn new(op: Op, args: Vec<Arg>) -> Self {
        QdmrStep { op, args }
    }

    /// All step references in argument order, including condition operands.
    pub fn refs(&self) -> impl Iterator<Item = usize> + '_ {
        self.args.iter().filter_map(|a| match a {
            Arg::Ref(k) => Some(*k),
            Arg::Cond(Condition {
                operand: Operand::Ref(k),
                ..
            }) => Some(*k),
            _ => None,
        })
    }

    pub(crate) fn refs_mut(&mut self) -> impl Iterator<Item = &mut usize> + '_ {
        self.args.iter_mut().filter_map(|a| match a {
            Arg::Ref(k) => Some(k),
            Arg::Cond(Condition {
                operand: Operand::Ref(k),
                ..
            }) => Some(k),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PipelineError {
    #[error("a pipeline needs at least one step")]
    Empty,
    #[error("step 1 must be SELECT, found {0}")]
    NotSelectFirst(Op),
    #[error("step {step} references #{target}, which is not an earlier step")]
    ForwardRef { step: usize, target: usize },
    #[error("step {step} references #0; references are 1-based")]
    DanglingRef { step: usize },
}

/// A non-empty sequence of steps that starts with SELECT and only refers
/// backwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<QdmrStep>", into = "Vec<QdmrStep>")]
pub struct QdmrPipeline {
    steps: Vec<QdmrStep>,
}

impl QdmrPipeline {
    pub fn new(steps: Vec<QdmrStep>) -> Result<Self, PipelineError> {
        check_structure(&steps)?;
        Ok(QdmrPipeline { steps })
    }

    pub fn steps(&self) -> &[QdmrStep] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn last(&self) -> &QdmrStep {
        self.steps.last().expect("pipelines are non-empty")
    }

    pub fn into_steps(self) -> Vec<QdmrStep> {
        self.steps
    }
}

pub(crate) fn check_structure(steps: &[QdmrStep]) -> Result<(), PipelineError> {
    let first = steps.first().ok_or(PipelineError::Empty)?;
    if first.op != Op::Select {
        return Err(PipelineError::NotSelectFirst(first.op));
    }
    for (i, step) in steps.iter().enumerate() {
        let number = i + 1;
        for k in step.refs() {
            if k == 0 {
                return Err(PipelineError::DanglingRef { step: number });
            }
            if k >= number {
                return Err(PipelineError::ForwardRef {
                    step: number,
                    target: k,
                });
            }
        }
    }
    Ok(())
}

impl TryFrom<Vec<QdmrStep>> for QdmrPipeline {
    type Error = PipelineError;

    fn try_from(steps: Vec<QdmrStep>) -> Result<Self, PipelineError> {
        QdmrPipeline::new(steps)
    }
}

impl From<QdmrPipeline> for Vec<QdmrStep> {
    fn from(p: QdmrPipeline) -> Self {
        p.steps
    }
}
