//! Static analysis of pipelines against a schema.
//!
//! [`analyze`] checks every rule and, when none is violated, produces a
//! [`BoundPipeline`] in which names are resolved to column indices and each
//! step's output kind, row lineage and ordering are known. The executor, the
//! SQL transpiler and the datamation compiler all work from the bound form.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::model::{
    check_structure, resolve_attribute, AggMethod, Arg, AttrKind, ColumnType, Comparator,
    Condition, Extremum, Op, Operand, QdmrPipeline, QdmrStep, ResolveError, Schema, SortDir,
    Temporal, Value,
};

/// One broken rule. `step_index` is 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub rule_id: String,
    pub step_index: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub violations: Vec<Violation>,
    /// Advisory notes that do not affect validity.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<Violation>,
}

impl ValidationReport {
    pub fn has_rule(&self, rule_id: &str) -> bool {
        self.violations.iter().any(|v| v.rule_id == rule_id)
    }

    pub fn rule_ids(&self) -> Vec<&str> {
        self.violations.iter().map(|v| v.rule_id.as_str()).collect()
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.valid {
            return f.write_str("valid");
        }
        let parts: Vec<String> = self
            .violations
            .iter()
            .map(|v| format!("{} at step {}: {}", v.rule_id, v.step_index, v.message))
            .collect();
        f.write_str(&parts.join("; "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValidatorOptions {
    /// Enables V7 (every step but the last must be referenced).
    pub strict: bool,
}

impl Default for ValidatorOptions {
    fn default() -> Self {
        ValidatorOptions { strict: true }
    }
}

/// Column operand of a bound step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundOperand {
    Column(usize),
    /// 0-based index of a projection step.
    Step(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum BoundStep {
    Select {
        focus: Option<usize>,
    },
    Project {
        column: usize,
        input: usize,
    },
    Filter {
        input: usize,
        operand: BoundOperand,
        cmp: Comparator,
        /// Literal coerced to the operand column's type.
        literal: Value,
        /// Literal as written.
        raw: Value,
    },
    Superlative {
        input: usize,
        operand: BoundOperand,
        ext: Extremum,
    },
    Aggregate {
        method: AggMethod,
        input: usize,
    },
    Group {
        method: AggMethod,
        values: usize,
        keys: usize,
    },
    Sort {
        input: usize,
        operand: BoundOperand,
        dir: SortDir,
    },
}

impl BoundStep {
    /// Index of the record-like step this step reads rows from.
    pub fn input(&self) -> Option<usize> {
        match *self {
            BoundStep::Select { .. } => None,
            BoundStep::Project { input, .. }
            | BoundStep::Filter { input, .. }
            | BoundStep::Superlative { input, .. }
            | BoundStep::Aggregate { input, .. }
            | BoundStep::Sort { input, .. } => Some(input),
            BoundStep::Group { keys, .. } => Some(keys),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutKind {
    Records,
    Projection,
    Scalar,
    Groups,
}

impl OutKind {
    pub fn is_record_like(self) -> bool {
        matches!(self, OutKind::Records | OutKind::Projection)
    }
}

/// What is statically known about a step's output.
#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    pub kind: OutKind,
    /// Projected column, focus column of a column SELECT, or GROUP key.
    pub column: Option<usize>,
    /// Indices of the FILTER/SUPERLATIVE steps whose conditions every row
    /// satisfies.
    pub lineage: BTreeSet<usize>,
    /// Stable sorts applied so far, oldest first.
    pub ordering: Vec<(usize, SortDir)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundPipeline {
    pub table: usize,
    pub steps: Vec<BoundStep>,
    pub info: Vec<StepInfo>,
}

impl BoundPipeline {
    pub fn operand_column(&self, operand: BoundOperand) -> usize {
        match operand {
            BoundOperand::Column(c) => c,
            BoundOperand::Step(s) => self.info[s].column.expect("step operands are projections"),
        }
    }

    /// Lineage of an operand: empty for plain columns.
    pub fn operand_lineage(&self, operand: BoundOperand) -> BTreeSet<usize> {
        match operand {
            BoundOperand::Column(_) => BTreeSet::new(),
            BoundOperand::Step(s) => self.info[s].lineage.clone(),
        }
    }
}

pub fn validate(pipeline: &QdmrPipeline, schema: &Schema) -> ValidationReport {
    analyze(pipeline.steps(), schema, ValidatorOptions::default()).0
}

pub fn validate_with(
    pipeline: &QdmrPipeline,
    schema: &Schema,
    opts: ValidatorOptions,
) -> ValidationReport {
    analyze(pipeline.steps(), schema, opts).0
}

/// Validates a raw step list, which may violate the structural invariants a
/// [`QdmrPipeline`] enforces (used when checking edits).
pub fn validate_steps(
    steps: &[QdmrStep],
    schema: &Schema,
    opts: ValidatorOptions,
) -> ValidationReport {
    analyze(steps, schema, opts).0
}

/// Binds a pipeline for execution. Dead steps are tolerated.
pub fn bind(pipeline: &QdmrPipeline, schema: &Schema) -> Result<BoundPipeline, ValidationReport> {
    match analyze(pipeline.steps(), schema, ValidatorOptions { strict: false }) {
        (_, Some(bound)) => Ok(bound),
        (report, None) => Err(report),
    }
}

enum ColumnIssue {
    IsTable,
    NotFound,
    OtherTable(String),
}

fn resolve_column(name: &str, schema: &Schema, table: usize) -> Result<usize, ColumnIssue> {
    let t = schema.table(table);
    if let Some(c) = t.column_index(name) {
        return Ok(c);
    }
    if let Some((tn, cn)) = name.split_once('.') {
        if schema.table_index(tn) == Some(table) {
            return t.column_index(cn).ok_or(ColumnIssue::NotFound);
        }
    }
    match resolve_attribute(name, schema) {
        Ok(a) if a.kind == AttrKind::Table => Err(ColumnIssue::IsTable),
        Ok(a) => Err(ColumnIssue::OtherTable(a.to_string())),
        Err(ResolveError::Ambiguous { candidates, .. }) => {
            Err(ColumnIssue::OtherTable(candidates.join(", ")))
        }
        Err(ResolveError::NotFound(_)) => Err(ColumnIssue::NotFound),
    }
}

/// Converts a condition literal to the value domain of a column type.
pub fn coerce_literal(literal: &Value, kind: ColumnType) -> Option<Value> {
    match (kind, literal) {
        (_, Value::Null) => None,
        (ColumnType::Categorical, v) => Some(Value::Text(v.to_string())),
        (ColumnType::Numerical, Value::Number(n)) => Some(Value::Number(*n)),
        (ColumnType::Numerical, Value::Text(t)) => t
            .trim()
            .parse::<f64>()
            .ok()
            .filter(|n| n.is_finite())
            .map(Value::Number),
        (ColumnType::Numerical, Value::Date(_)) => None,
        (ColumnType::Temporal, Value::Date(d)) => Some(Value::Date(*d)),
        (ColumnType::Temporal, Value::Number(n)) => {
            if n.fract() == 0.0 && (0.0..=9999.0).contains(n) {
                Temporal::year(*n as u16).map(Value::Date)
            } else {
                None
            }
        }
        (ColumnType::Temporal, Value::Text(t)) => t.trim().parse().ok().map(Value::Date),
    }
}

/// Whether an aggregation method accepts an operand of the given type
/// (`None` means the operand is whole records).
pub fn method_accepts(method: AggMethod, operand: Option<ColumnType>) -> bool {
    match method {
        AggMethod::Count => true,
        AggMethod::Sum | AggMethod::Avg | AggMethod::Median => {
            operand == Some(ColumnType::Numerical)
        }
        AggMethod::Max | AggMethod::Min => operand.is_some_and(ColumnType::is_ordered),
    }
}

struct Analyzer<'a> {
    schema: &'a Schema,
    table: Option<usize>,
    violations: Vec<Violation>,
    warnings: Vec<Violation>,
    info: Vec<Option<StepInfo>>,
    bound: Vec<Option<BoundStep>>,
}

impl<'a> Analyzer<'a> {
    fn violation(&mut self, rule: &str, step: usize, message: impl Into<String>) {
        self.violations.push(Violation {
            rule_id: rule.to_string(),
            step_index: step + 1,
            message: message.into(),
        });
    }

    fn column_type(&self, col: usize) -> ColumnType {
        self.schema.table(self.table.expect("table bound")).columns[col].kind
    }

    fn column_name(&self, col: usize) -> &str {
        &self.schema.table(self.table.expect("table bound")).columns[col].name
    }

    /// Info of a referenced step, or None when it failed (no cascade).
    fn referenced(&self, k: usize) -> Option<&StepInfo> {
        self.info.get(k - 1).and_then(Option::as_ref)
    }

    fn record_input(&mut self, step: usize, k: usize, role: &str) -> Option<StepInfo> {
        let info = self.referenced(k)?.clone();
        if !info.kind.is_record_like() {
            self.violation(
                "V1",
                step,
                format!(
                    "{role} #{k} must be records or a projection, not {:?}",
                    info.kind
                )
                .to_lowercase(),
            );
            return None;
        }
        Some(info)
    }

    fn column_arg(&mut self, step: usize, name: &str, rule: &str) -> Option<usize> {
        let table = self.table?;
        match resolve_column(name, self.schema, table) {
            Ok(c) => Some(c),
            Err(ColumnIssue::IsTable) => {
                self.violation(
                    rule,
                    step,
                    format!("'{name}' refers to a table; a column is required"),
                );
                None
            }
            Err(ColumnIssue::NotFound) => {
                self.violation(
                    rule,
                    step,
                    format!("'{name}' is not a column of the dataset"),
                );
                None
            }
            Err(ColumnIssue::OtherTable(other)) => {
                let here = self.schema.table(table).name.clone();
                self.violation(
                    "V8",
                    step,
                    format!("'{name}' resolves to {other}, outside table '{here}'"),
                );
                None
            }
        }
    }

    /// Resolves a column-or-projection operand.
    fn operand(&mut self, step: usize, arg: &Operand) -> Option<(BoundOperand, usize)> {
        match arg {
            Operand::Attr(name) => {
                let c = self.column_arg(step, name, "V6")?;
                Some((BoundOperand::Column(c), c))
            }
            Operand::Ref(k) => {
                let info = self.referenced(*k)?.clone();
                match (info.kind, info.column) {
                    (OutKind::Projection, Some(c)) => Some((BoundOperand::Step(k - 1), c)),
                    _ => {
                        self.violation(
                            "V6",
                            step,
                            format!("column operand #{k} must be a projection step"),
                        );
                        None
                    }
                }
            }
        }
    }

    fn check_step(&mut self, i: usize, step: &QdmrStep) -> Option<(BoundStep, StepInfo)> {
        let sig = step.op.signature();
        if step.args.len() != sig.len() {
            self.violation(
                "V1",
                i,
                format!(
                    "{} takes {} arguments, got {}",
                    step.op,
                    sig.len(),
                    step.args.len()
                ),
            );
            return None;
        }
        for (pos, (slot, arg)) in sig.iter().zip(&step.args).enumerate() {
            if !slot.accepts(arg) {
                self.violation(
                    "V1",
                    i,
                    format!(
                        "argument {} of {} must be {}",
                        pos + 1,
                        step.op,
                        slot.describe()
                    ),
                );
                return None;
            }
        }
        if (i == 0) != (step.op == Op::Select) {
            let msg = if i == 0 {
                format!("step 1 must be SELECT, found {}", step.op)
            } else {
                "SELECT may only appear as step 1".to_string()
            };
            self.violation("V4", i, msg);
            return None;
        }
        let mut refs_ok = true;
        for k in step.refs() {
            if k == 0 || k > i {
                self.violation("V3", i, format!("#{k} does not point to an earlier step"));
                refs_ok = false;
            }
        }
        if !refs_ok {
            return None;
        }

        let a = &step.args;
        match step.op {
            Op::Select => {
                let Arg::Attr(name) = &a[0] else {
                    unreachable!()
                };
                match resolve_attribute(name, self.schema) {
                    Ok(attr) => {
                        let t = self.schema.table_index(&attr.table).expect("resolved");
                        self.table = Some(t);
                        let focus = attr
                            .column
                            .as_deref()
                            .and_then(|c| self.schema.table(t).column_index(c));
                        Some((
                            BoundStep::Select { focus },
                            StepInfo {
                                kind: OutKind::Records,
                                column: focus,
                                lineage: BTreeSet::new(),
                                ordering: Vec::new(),
                            },
                        ))
                    }
                    Err(e) => {
                        self.violation("V4", i, format!("SELECT argument: {e}"));
                        None
                    }
                }
            }
            Op::Project => {
                let (Arg::Attr(name), Arg::Ref(k)) = (&a[0], &a[1]) else {
                    unreachable!()
                };
                let column = self.column_arg(i, name, "V2");
                let input = self.record_input(i, *k, "input")?;
                let column = column?;
                Some((
                    BoundStep::Project {
                        column,
                        input: k - 1,
                    },
                    StepInfo {
                        kind: OutKind::Projection,
                        column: Some(column),
                        lineage: input.lineage,
                        ordering: input.ordering,
                    },
                ))
            }
            Op::Filter => {
                let (
                    Arg::Ref(k),
                    Arg::Cond(Condition {
                        operand,
                        cmp,
                        literal,
                    }),
                ) = (&a[0], &a[1])
                else {
                    unreachable!()
                };
                let input = self.record_input(i, *k, "input");
                let (bop, col) = self.operand(i, operand)?;
                let input = input?;
                let kind = self.column_type(col);
                let name = self.column_name(col).to_string();
                if cmp.is_ordering() && !kind.is_ordered() {
                    self.violation(
                        "V6",
                        i,
                        format!("comparator {} needs a numerical or temporal column; '{name}' is {kind}", cmp.symbol()),
                    );
                    return None;
                }
                let Some(coerced) = coerce_literal(literal, kind) else {
                    self.violation(
                        "V6",
                        i,
                        format!("literal {literal} is not a valid {kind} value for '{name}'"),
                    );
                    return None;
                };
                let mut lineage = input.lineage;
                if let BoundOperand::Step(s) = bop {
                    lineage.extend(self.info[s].as_ref().expect("checked").lineage.iter());
                }
                lineage.insert(i);
                Some((
                    BoundStep::Filter {
                        input: k - 1,
                        operand: bop,
                        cmp: *cmp,
                        literal: coerced,
                        raw: literal.clone(),
                    },
                    StepInfo {
                        kind: input.kind,
                        column: input.column,
                        lineage,
                        ordering: input.ordering,
                    },
                ))
            }
            Op::Superlative => {
                let (Arg::Ref(k), col_arg, Arg::Super(ext)) = (&a[0], &a[1], &a[2]) else {
                    unreachable!()
                };
                let input = self.record_input(i, *k, "input");
                let (bop, col) = self.operand(i, &arg_operand(col_arg))?;
                let input = input?;
                let kind = self.column_type(col);
                if !kind.is_ordered() {
                    let name = self.column_name(col).to_string();
                    self.violation(
                        "V6",
                        i,
                        format!(
                            "SUPERLATIVE needs a numerical or temporal column; '{name}' is {kind}"
                        ),
                    );
                    return None;
                }
                self.warnings.push(Violation {
                    rule_id: "W1".into(),
                    step_index: i + 1,
                    message: "SUPERLATIVE keeps every record tied for the extremum".into(),
                });
                let mut lineage = input.lineage;
                if let BoundOperand::Step(s) = bop {
                    lineage.extend(self.info[s].as_ref().expect("checked").lineage.iter());
                }
                lineage.insert(i);
                Some((
                    BoundStep::Superlative {
                        input: k - 1,
                        operand: bop,
                        ext: *ext,
                    },
                    StepInfo {
                        kind: input.kind,
                        column: input.column,
                        lineage,
                        ordering: input.ordering,
                    },
                ))
            }
            Op::Sort => {
                let (Arg::Ref(k), col_arg, Arg::Dir(dir)) = (&a[0], &a[1], &a[2]) else {
                    unreachable!()
                };
                let input = self.record_input(i, *k, "input");
                let (bop, col) = self.operand(i, &arg_operand(col_arg))?;
                let input = input?;
                if let BoundOperand::Step(s) = bop {
                    let sub = &self.info[s].as_ref().expect("checked").lineage;
                    if !sub.is_subset(&input.lineage) {
                        self.violation(
                            "V6",
                            i,
                            format!("sort key #{} does not cover every input record", s + 1),
                        );
                        return None;
                    }
                }
                let mut ordering = input.ordering;
                ordering.push((col, *dir));
                Some((
                    BoundStep::Sort {
                        input: k - 1,
                        operand: bop,
                        dir: *dir,
                    },
                    StepInfo {
                        kind: input.kind,
                        column: input.column,
                        lineage: input.lineage,
                        ordering,
                    },
                ))
            }
            Op::Aggregate => {
                let (Arg::Method(method), Arg::Ref(k)) = (&a[0], &a[1]) else {
                    unreachable!()
                };
                let input = self.record_input(i, *k, "input")?;
                let operand = input.column.map(|c| self.column_type(c));
                if !method_accepts(*method, operand) {
                    let what = match input.column {
                        Some(c) => format!("'{}' ({})", self.column_name(c), self.column_type(c)),
                        None => "whole records".to_string(),
                    };
                    self.violation(
                        "V5",
                        i,
                        format!("{} cannot be applied to {what}", method.name()),
                    );
                    return None;
                }
                Some((
                    BoundStep::Aggregate {
                        method: *method,
                        input: k - 1,
                    },
                    StepInfo {
                        kind: OutKind::Scalar,
                        column: input.column,
                        lineage: input.lineage,
                        ordering: Vec::new(),
                    },
                ))
            }
            Op::Group => {
                let (Arg::Method(method), Arg::Ref(v), Arg::Ref(kref)) = (&a[0], &a[1], &a[2])
                else {
                    unreachable!()
                };
                let values = self.record_input(i, *v, "values");
                let keys = self.record_input(i, *kref, "keys");
                let (values, keys) = (values?, keys?);
                let Some(key_col) = keys.column else {
                    self.violation("V1", i, format!("keys #{kref} must be a projection"));
                    return None;
                };
                if values.lineage != keys.lineage {
                    self.violation(
                        "V1",
                        i,
                        format!("values #{v} and keys #{kref} must cover the same records"),
                    );
                    return None;
                }
                let operand = values.column.map(|c| self.column_type(c));
                if !method_accepts(*method, operand) {
                    let what = match values.column {
                        Some(c) => format!("'{}' ({})", self.column_name(c), self.column_type(c)),
                        None => "whole records".to_string(),
                    };
                    self.violation(
                        "V5",
                        i,
                        format!("{} cannot be applied to {what}", method.name()),
                    );
                    return None;
                }
                Some((
                    BoundStep::Group {
                        method: *method,
                        values: v - 1,
                        keys: kref - 1,
                    },
                    StepInfo {
                        kind: OutKind::Groups,
                        column: Some(key_col),
                        lineage: keys.lineage,
                        ordering: Vec::new(),
                    },
                ))
            }
        }
    }
}

fn arg_operand(arg: &Arg) -> Operand {
    match arg {
        Arg::Attr(n) => Operand::Attr(n.clone()),
        Arg::Ref(k) => Operand::Ref(*k),
        _ => unreachable!("signature checked"),
    }
}

/// Runs every rule over a step list. Returns the report and, when valid, the
/// bound pipeline.
pub fn analyze(
    steps: &[QdmrStep],
    schema: &Schema,
    opts: ValidatorOptions,
) -> (ValidationReport, Option<BoundPipeline>) {
    let mut an = Analyzer {
        schema,
        table: None,
        violations: Vec::new(),
        warnings: Vec::new(),
        info: Vec::with_capacity(steps.len()),
        bound: Vec::with_capacity(steps.len()),
    };
    if steps.is_empty() {
        an.violations.push(Violation {
            rule_id: "V4".into(),
            step_index: 1,
            message: "pipeline has no steps; step 1 must be SELECT".into(),
        });
    }
    for (i, step) in steps.iter().enumerate() {
        match an.check_step(i, step) {
            Some((b, info)) => {
                an.bound.push(Some(b));
                an.info.push(Some(info));
            }
            None => {
                an.bound.push(None);
                an.info.push(None);
            }
        }
    }
    if opts.strict && steps.len() > 1 {
        let mut used = vec![false; steps.len()];
        for step in steps {
            for k in step.refs() {
                if (1..=steps.len()).contains(&k) {
                    used[k - 1] = true;
                }
            }
        }
        for (i, u) in used.iter().enumerate().take(steps.len() - 1) {
            if !u {
                an.violation(
                    "V7",
                    i,
                    format!("step {} is never used by a later step", i + 1),
                );
            }
        }
    }
    an.violations.sort_by_key(|v| v.step_index);
    let valid = an.violations.is_empty();
    let bound = if valid && check_structure(steps).is_ok() {
        Some(BoundPipeline {
            table: an.table.expect("SELECT bound"),
            steps: an.bound.into_iter().map(|b| b.expect("valid")).collect(),
            info: an.info.into_iter().map(|i| i.expect("valid")).collect(),
        })
    } else {
        None
    };
    (
        ValidationReport {
            valid,
            violations: an.violations,
            warnings: an.warnings,
        },
        bound,
    )
}
