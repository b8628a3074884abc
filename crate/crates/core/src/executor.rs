//! Interprets bound pipelines over in-memory datasets.

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::model::{
    AggMethod, Answer, Dataset, Extremum, Group, Projection, QdmrPipeline, RecordSet, RowId,
    SortDir, StepResult, Value,
};
use crate::plan::{bind, BoundOperand, BoundPipeline, BoundStep, ValidationReport};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TiePolicy {
    /// Every record tied for the extremum is kept.
    #[default]
    KeepAll,
    FirstByRowOrder,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecOptions {
    pub tie_policy: TiePolicy,
}

/// Per-step results plus the presented answer of the last step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub per_step: Vec<StepResult>,
    pub answer: Answer,
}

impl Trace {
    pub fn last(&self) -> &StepResult {
        self.per_step.last().expect("traces are non-empty")
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExecError {
    #[error("pipeline is not valid: {0}")]
    Invalid(ValidationReport),
    #[error("step {step}: type error: {message}")]
    TypeError { step: usize, message: String },
    #[error("step {step}: {message} over an empty input")]
    EmptyInput { step: usize, message: String },
}

pub fn execute(pipeline: &QdmrPipeline, dataset: &Dataset) -> Result<Trace, ExecError> {
    execute_with(pipeline, dataset, ExecOptions::default())
}

pub fn execute_with(
    pipeline: &QdmrPipeline,
    dataset: &Dataset,
    opts: ExecOptions,
) -> Result<Trace, ExecError> {
    let bound = bind(pipeline, dataset.schema()).map_err(ExecError::Invalid)?;
    execute_bound(&bound, dataset, opts)
}

struct Ctx<'a> {
    ds: &'a Dataset,
    table: usize,
    results: Vec<StepResult>,
    // row -> value maps for projection steps, built on demand
    lookups: HashMap<usize, HashMap<RowId, Value>>,
}

impl<'a> Ctx<'a> {
    fn operand_values(&mut self, operand: BoundOperand, rows: &[RowId]) -> Vec<Value> {
        match operand {
            BoundOperand::Column(c) => rows
                .iter()
                .map(|&r| self.ds.cell(self.table, r, c).clone())
                .collect(),
            BoundOperand::Step(s) => {
                let results = &self.results;
                let map = self.lookups.entry(s).or_insert_with(|| match &results[s] {
                    StepResult::Projection(p) => p.items.iter().cloned().collect(),
                    _ => HashMap::new(),
                });
                rows.iter()
                    .map(|r| map.get(r).cloned().unwrap_or(Value::Null))
                    .collect()
            }
        }
    }

    /// Values carried by a record-like result: the projected or focused
    /// column, or `None` for whole records.
    fn carried_values(&self, result: &StepResult) -> Option<Vec<Value>> {
        match result {
            StepResult::Projection(p) => Some(p.items.iter().map(|(_, v)| v.clone()).collect()),
            StepResult::Records(RecordSet {
                focus: Some(f),
                rows,
                ..
            }) => {
                let c = self.ds.schema().table(self.table).column_index(f)?;
                Some(
                    rows.iter()
                        .map(|&r| self.ds.cell(self.table, r, c).clone())
                        .collect(),
                )
            }
            _ => None,
        }
    }
}

/// Keeps the same result shape (records or projection) over a new row list.
fn reshape(input: &StepResult, rows: Vec<RowId>) -> StepResult {
    match input {
        StepResult::Records(r) => StepResult::Records(RecordSet {
            table: r.table.clone(),
            rows,
            focus: r.focus.clone(),
        }),
        StepResult::Projection(p) => {
            let map: HashMap<RowId, &Value> = p.items.iter().map(|(r, v)| (*r, v)).collect();
            StepResult::Projection(Projection {
                table: p.table.clone(),
                column: p.column.clone(),
                items: rows.into_iter().map(|r| (r, map[&r].clone())).collect(),
            })
        }
        _ => unreachable!("record-like input checked by binder"),
    }
}

fn type_error(step: usize, a: &Value, b: &Value) -> ExecError {
    ExecError::TypeError {
        step: step + 1,
        message: format!("cannot compare {a} with {b}"),
    }
}

/// Orders non-null values, nulls last regardless of direction.
fn sort_cmp(a: &Value, b: &Value, dir: SortDir) -> Ordering {
    match (a.is_null(), b.is_null()) {
        (true, true) => Ordering::Equal,
        (true, false) => Ordering::Greater,
        (false, true) => Ordering::Less,
        (false, false) => {
            let o = a.compare(b).unwrap_or(Ordering::Equal);
            match dir {
                SortDir::Asc => o,
                SortDir::Desc => o.reverse(),
            }
        }
    }
}

/// Median of numbers; even counts average the two middle values.
pub fn median(mut xs: Vec<f64>) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    Some(if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    })
}

/// Applies an aggregation to the non-null values of an operand. `rows` is the
/// record count used by `count` over whole records. Returns `Ok(None)` when the
/// method is undefined on an empty input.
fn aggregate_values(
    method: AggMethod,
    values: Option<&[Value]>,
    rows: usize,
) -> Result<Option<Value>, String> {
    let present: Vec<&Value> = values
        .map(|vs| vs.iter().filter(|v| !v.is_null()).collect())
        .unwrap_or_default();
    let numbers = || -> Result<Vec<f64>, String> {
        present
            .iter()
            .map(|v| {
                v.as_f64()
                    .ok_or_else(|| format!("{} needs numbers, got {v}", method.name()))
            })
            .collect()
    };
    Ok(match method {
        AggMethod::Count => Some(Value::Number(match values {
            Some(_) => present.len(),
            None => rows,
        } as f64)),
        AggMethod::Sum => Some(Value::Number(numbers()?.iter().sum())),
        AggMethod::Avg => {
            let xs = numbers()?;
            (!xs.is_empty()).then(|| Value::Number(xs.iter().sum::<f64>() / xs.len() as f64))
        }
        AggMethod::Median => median(numbers()?).map(Value::Number),
        AggMethod::Max | AggMethod::Min => {
            let mut best: Option<&Value> = None;
            for v in &present {
                let ord = match best {
                    None => None,
                    Some(b) => Some(
                        v.compare(b)
                            .ok_or_else(|| format!("cannot compare {v} with {b}"))?,
                    ),
                };
                let better = match (ord, method) {
                    (None, _) => true,
                    (Some(o), AggMethod::Max) => o == Ordering::Greater,
                    (Some(o), _) => o == Ordering::Less,
                };
                if better {
                    best = Some(v);
                }
            }
            best.cloned()
        }
    })
}

pub fn execute_bound(
    bound: &BoundPipeline,
    dataset: &Dataset,
    opts: ExecOptions,
) -> Result<Trace, ExecError> {
    let table_name = dataset.schema().table(bound.table).name.clone();
    let columns = &dataset.schema().table(bound.table).columns;
    let mut ctx = Ctx {
        ds: dataset,
        table: bound.table,
        results: Vec::with_capacity(bound.steps.len()),
        lookups: HashMap::new(),
    };
    for (i, step) in bound.steps.iter().enumerate() {
        let result = match *step {
            BoundStep::Select { focus } => StepResult::Records(RecordSet {
                table: table_name.clone(),
                rows: dataset.row_ids(bound.table).collect(),
                focus: focus.map(|c| columns[c].name.clone()),
            }),
            BoundStep::Project { column, input } => {
                let rows = ctx.results[input].row_ids();
                let items = rows
                    .into_iter()
                    .map(|r| (r, dataset.cell(bound.table, r, column).clone()))
                    .collect();
                StepResult::Projection(Projection {
                    table: table_name.clone(),
                    column: columns[column].name.clone(),
                    items,
                })
            }
            BoundStep::Filter {
                input,
                operand,
                cmp,
                ref literal,
                ..
            } => {
                let rows = ctx.results[input].row_ids();
                let values = ctx.operand_values(operand, &rows);
                let mut keep = Vec::new();
                for (r, v) in rows.into_iter().zip(&values) {
                    if v.is_null() {
                        continue;
                    }
                    let ord = v
                        .compare(literal)
                        .ok_or_else(|| type_error(i, v, literal))?;
                    if cmp.holds(ord) {
                        keep.push(r);
                    }
                }
                reshape(&ctx.results[input], keep)
            }
            BoundStep::Superlative {
                input,
                operand,
                ext,
            } => {
                let rows = ctx.results[input].row_ids();
                let values = ctx.operand_values(operand, &rows);
                let mut best: Option<&Value> = None;
                for v in values.iter().filter(|v| !v.is_null()) {
                    let better = match best {
                        None => true,
                        Some(b) => {
                            let o = v.compare(b).ok_or_else(|| type_error(i, v, b))?;
                            match ext {
                                Extremum::Max => o == Ordering::Greater,
                                Extremum::Min => o == Ordering::Less,
                            }
                        }
                    };
                    if better {
                        best = Some(v);
                    }
                }
                let Some(best) = best.cloned() else {
                    return Err(ExecError::EmptyInput {
                        step: i + 1,
                        message: format!("SUPERLATIVE {}", ext.name()),
                    });
                };
                let mut keep: Vec<RowId> = rows
                    .into_iter()
                    .zip(&values)
                    .filter(|(_, v)| v.compare(&best) == Some(Ordering::Equal))
                    .map(|(r, _)| r)
                    .collect();
                if opts.tie_policy == TiePolicy::FirstByRowOrder {
                    keep.truncate(1);
                }
                reshape(&ctx.results[input], keep)
            }
            BoundStep::Sort {
                input,
                operand,
                dir,
            } => {
                let rows = ctx.results[input].row_ids();
                let values = ctx.operand_values(operand, &rows);
                let mut order: Vec<usize> = (0..rows.len()).collect();
                // stable
                order.sort_by(|&a, &b| sort_cmp(&values[a], &values[b], dir));
                let sorted = order.into_iter().map(|k| rows[k]).collect();
                reshape(&ctx.results[input], sorted)
            }
            BoundStep::Aggregate { method, input } => {
                let src = &ctx.results[input];
                let n = src.row_ids().len();
                let values = ctx.carried_values(src);
                let value = aggregate_values(method, values.as_deref(), n)
                    .map_err(|message| ExecError::TypeError {
                        step: i + 1,
                        message,
                    })?
                    .ok_or_else(|| ExecError::EmptyInput {
                        step: i + 1,
                        message: format!("AGGREGATE {}", method.name()),
                    })?;
                StepResult::Scalar { value }
            }
            BoundStep::Group {
                method,
                values,
                keys,
            } => {
                let key_src = &ctx.results[keys];
                let key_rows = key_src.row_ids();
                let key_vals = ctx.carried_values(key_src).expect("keys carry a column");
                let val_src = &ctx.results[values];
                let val_map: Option<HashMap<RowId, Value>> = ctx
                    .carried_values(val_src)
                    .map(|vs| val_src.row_ids().into_iter().zip(vs).collect());
                let mut groups: Vec<(Value, Vec<RowId>)> = Vec::new();
                for (r, k) in key_rows.into_iter().zip(key_vals) {
                    match groups.iter_mut().find(|(g, _)| *g == k) {
                        Some((_, members)) => members.push(r),
                        None => groups.push((k, vec![r])),
                    }
                }
                let mut out = Vec::with_capacity(groups.len());
                for (key, members) in groups {
                    let vals: Option<Vec<Value>> = val_map.as_ref().map(|m| {
                        members
                            .iter()
                            .map(|r| m.get(r).cloned().unwrap_or(Value::Null))
                            .collect()
                    });
                    let aggregate = aggregate_values(method, vals.as_deref(), members.len())
                        .map_err(|message| ExecError::TypeError {
                            step: i + 1,
                            message,
                        })?
                        .unwrap_or(Value::Null);
                    out.push(Group {
                        key,
                        members,
                        aggregate,
                    });
                }
                let key_column = columns[bound.info[i].column.expect("group key")]
                    .name
                    .clone();
                StepResult::Groups {
                    key_column,
                    groups: out,
                }
            }
        };
        ctx.results.push(result);
    }
    let answer = present(ctx.results.last().expect("non-empty"), dataset, bound.table);
    Ok(Trace {
        per_step: ctx.results,
        answer,
    })
}

/// Presents a step result as an answer.
pub fn present(result: &StepResult, dataset: &Dataset, table: usize) -> Answer {
    match result {
        StepResult::Scalar { value } => Answer::Scalar(value.clone()),
        StepResult::Projection(p) => {
            Answer::Values(p.items.iter().map(|(_, v)| v.clone()).collect())
        }
        StepResult::Records(r) => match r
            .focus
            .as_deref()
            .and_then(|f| dataset.schema().table(table).column_index(f))
        {
            Some(c) => Answer::Values(
                r.rows
                    .iter()
                    .map(|&row| dataset.cell(table, row, c).clone())
                    .collect(),
            ),
            None => Answer::Rows(
                r.rows
                    .iter()
                    .map(|&row| dataset.rows(table)[row.index()].clone())
                    .collect(),
            ),
        },
        StepResult::Groups { groups, .. } => Answer::Groups(
            groups
                .iter()
                .map(|g| (g.key.clone(), g.aggregate.clone()))
                .collect(),
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(vec![4.0, 1.0, 3.0, 2.0]), Some(2.5));
        assert_eq!(median(vec![]), None);
    }

    #[test]
    fn count_and_sum_defined_on_empty() {
        assert_eq!(
            aggregate_values(AggMethod::Count, Some(&[]), 0).unwrap(),
            Some(Value::Number(0.0))
        );
        assert_eq!(
            aggregate_values(AggMethod::Sum, Some(&[]), 0).unwrap(),
            Some(Value::Number(0.0))
        );
        assert_eq!(
            aggregate_values(AggMethod::Avg, Some(&[]), 0).unwrap(),
            None
        );
        assert_eq!(
            aggregate_values(AggMethod::Max, Some(&[Value::Null]), 1).unwrap(),
            None
        );
    }

    #[test]
    fn count_skips_nulls_only_with_a_column() {
        let vals = [Value::Number(1.0), Value::Null];
        assert_eq!(
            aggregate_values(AggMethod::Count, Some(&vals), 2).unwrap(),
            Some(Value::Number(1.0))
        );
        assert_eq!(
            aggregate_values(AggMethod::Count, None, 2).unwrap(),
            Some(Value::Number(2.0))
        );
    }

    #[test]
    fn nulls_sort_last_both_directions() {
        let a = Value::Number(1.0);
        let n = Value::Null;
        assert_eq!(sort_cmp(&n, &a, SortDir::Asc), Ordering::Greater);
        assert_eq!(sort_cmp(&n, &a, SortDir::Desc), Ordering::Greater);
    }
}
