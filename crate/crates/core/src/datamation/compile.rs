use std::collections::HashSet;

use super::caption::{caption_for, format_value, hide_caption, CaptionContext};
use super::{
    Action, ActionFamily, ActionKind, ActionParams, DatamationError, DatamationOptions, Easing,
    GroupLabel, LayoutKind, Stage,
};
use crate::executor::Trace;
use crate::model::{ColumnType, QdmrPipeline, Schema, StepResult, Value};
use crate::plan::{bind, BoundPipeline, BoundStep};

/// Most distinct values a column may have to be encoded by color.
pub(crate) const MAX_COLOR_VALUES: usize = 8;

pub(crate) const CHANNELS: [ActionKind; 4] = [
    ActionKind::XAxis,
    ActionKind::YAxis,
    ActionKind::Color,
    ActionKind::Size,
];

pub(crate) fn channel_slot(kind: ActionKind) -> usize {
    CHANNELS
        .iter()
        .position(|&c| c == kind)
        .expect("visual channel")
}

pub(crate) enum AnnotationPlan {
    Scalar {
        text: String,
        units: Vec<u32>,
    },
    Groups {
        axis: ActionKind,
        items: Vec<GroupLabel>,
    },
}

/// What the layout simulation needs to know about one stage.
pub(crate) struct StagePlan {
    /// Units shown once the stage ends, in layout order.
    pub visible: Vec<u32>,
    pub relayout: bool,
    pub highlight: Vec<u32>,
    pub bind: Option<(ActionKind, usize)>,
    pub annotation: Option<AnnotationPlan>,
}

pub(crate) struct Compiled {
    pub table: usize,
    pub stages: Vec<Stage>,
    pub plans: Vec<StagePlan>,
}

fn ids(result: &StepResult) -> Vec<u32> {
    result.row_ids().into_iter().map(|r| r.0).collect()
}

fn units(ids: Vec<u32>) -> ActionParams {
    ActionParams {
        units: Some(ids),
        ..Default::default()
    }
}

/// Expands an executed pipeline into its animation stages with default
/// durations.
pub fn compile_actions(
    pipeline: &QdmrPipeline,
    trace: &Trace,
    schema: &Schema,
) -> Result<Vec<Stage>, DatamationError> {
    Ok(compile(pipeline, trace, schema, &DatamationOptions::default())?.stages)
}

struct Compiler<'a> {
    schema: &'a Schema,
    bound: &'a BoundPipeline,
    trace: &'a Trace,
    opts: &'a DatamationOptions,
    channels: [Option<usize>; 4],
    visible: Vec<u32>,
    stages: Vec<Stage>,
    plans: Vec<StagePlan>,
}

impl Compiler<'_> {
    fn column_name(&self, c: usize) -> String {
        self.schema.table(self.bound.table).columns[c].name.clone()
    }

    fn column_kind(&self, c: usize) -> ColumnType {
        self.schema.table(self.bound.table).columns[c].kind
    }

    fn push(&mut self, k: usize, actions: Vec<Action>, caption: String, plan: StagePlan) {
        let annotation_only = actions.iter().all(|a| a.family == ActionFamily::Annotation);
        self.visible = plan.visible.clone();
        self.stages.push(Stage {
            actions,
            duration_ms: if annotation_only {
                self.opts.annotation_ms
            } else {
                self.opts.stage_ms
            },
            easing: Easing::SlowInSlowOut,
            caption,
            source_step: k + 1,
        });
        self.plans.push(plan);
    }

    fn caption(&self, k: usize, channel: Option<ActionKind>) -> String {
        let ctx = CaptionContext {
            schema: self.schema,
            bound: self.bound,
            trace: self.trace,
        };
        caption_for(&ctx, k, channel)
    }

    /// PROJECT channel: reuse an existing binding of the same column, else
    /// the first free eligible channel.
    fn project_channel(&self, k: usize, column: usize) -> Result<ActionKind, DatamationError> {
        if let Some(i) = self.channels.iter().position(|&c| c == Some(column)) {
            return Ok(CHANNELS[i]);
        }
        let eligible: &[ActionKind] = match self.column_kind(column) {
            ColumnType::Temporal => &[ActionKind::XAxis, ActionKind::YAxis],
            ColumnType::Numerical => &[ActionKind::Size],
            ColumnType::Categorical => {
                let mut distinct: Vec<&Value> = Vec::new();
                if let StepResult::Projection(p) = &self.trace.per_step[k] {
                    for (_, v) in &p.items {
                        if !distinct.contains(&v) {
                            distinct.push(v);
                        }
                    }
                }
                if distinct.len() <= MAX_COLOR_VALUES {
                    &[ActionKind::XAxis, ActionKind::Color, ActionKind::YAxis]
                } else {
                    &[ActionKind::XAxis, ActionKind::YAxis]
                }
            }
        };
        eligible
            .iter()
            .copied()
            .find(|&ch| self.channels[channel_slot(ch)].is_none())
            .ok_or_else(|| DatamationError::ChannelConflict {
                step: k + 1,
                column: self.column_name(column),
            })
    }

    fn group_axis(&self, key: usize) -> ActionKind {
        for axis in [ActionKind::XAxis, ActionKind::YAxis] {
            if self.channels[channel_slot(axis)] == Some(key) {
                return axis;
            }
        }
        match self.column_kind(key) {
            ColumnType::Temporal => ActionKind::XAxis,
            _ => ActionKind::YAxis,
        }
    }

    fn bind(&mut self, ch: ActionKind, column: usize) {
        for slot in self.channels.iter_mut() {
            if *slot == Some(column) {
                *slot = None;
            }
        }
        self.channels[channel_slot(ch)] = Some(column);
    }

    fn step(&mut self, k: usize) -> Result<(), DatamationError> {
        let (trace, bound) = (self.trace, self.bound);
        let result = &trace.per_step[k];
        let out = ids(result);
        let input_ids = |i: usize| ids(&trace.per_step[i]);
        match &bound.steps[k] {
            BoundStep::Select { focus } => {
                let attribute = match focus {
                    Some(c) => self.column_name(*c),
                    None => self.schema.table(self.bound.table).name.clone(),
                };
                let actions = vec![
                    Action::new(
                        ActionKind::Select,
                        ActionParams {
                            attribute: Some(attribute),
                            units: Some(out.clone()),
                            ..Default::default()
                        },
                    ),
                    Action::new(
                        ActionKind::Layout,
                        ActionParams {
                            layout: Some(LayoutKind::Grid),
                            ..Default::default()
                        },
                    ),
                ];
                let caption = self.caption(k, None);
                self.push(k, actions, caption, relayout(out));
            }
            BoundStep::Project { column, .. } => {
                let ch = self.project_channel(k, *column)?;
                self.bind(ch, *column);
                let mut params = ActionParams {
                    attribute: Some(self.column_name(*column)),
                    ..Default::default()
                };
                if ch == ActionKind::Size {
                    params.layout = Some(LayoutKind::Pack);
                } else if matches!(ch, ActionKind::XAxis | ActionKind::YAxis) {
                    params.layout = Some(LayoutKind::Bands);
                }
                let caption = self.caption(k, Some(ch));
                let mut plan = relayout(out);
                plan.bind = Some((ch, *column));
                self.push(k, vec![Action::new(ch, params)], caption, plan);
            }
            BoundStep::Filter { input, .. } | BoundStep::Superlative { input, .. } => {
                let before = input_ids(*input);
                let kept: HashSet<u32> = out.iter().copied().collect();
                let changed = before.iter().copied().collect::<HashSet<_>>()
                    != self.visible.iter().copied().collect::<HashSet<_>>();
                let condition = match &bound.steps[k] {
                    BoundStep::Filter {
                        operand, cmp, raw, ..
                    } => format!(
                        "{} {} {}",
                        self.column_name(self.bound.operand_column(*operand)),
                        cmp.symbol(),
                        format_value(raw)
                    ),
                    BoundStep::Superlative { operand, ext, .. } => format!(
                        "{} {}",
                        ext.name(),
                        self.column_name(self.bound.operand_column(*operand))
                    ),
                    _ => unreachable!(),
                };
                let actions = vec![
                    Action::new(
                        ActionKind::Filter,
                        ActionParams {
                            condition: Some(condition),
                            units: Some(out.clone()),
                            ..Default::default()
                        },
                    ),
                    Action::new(ActionKind::Highlight, units(out.clone())),
                ];
                let caption = self.caption(k, None);
                self.push(
                    k,
                    actions,
                    caption,
                    StagePlan {
                        visible: before.clone(),
                        relayout: changed,
                        highlight: out.clone(),
                        bind: None,
                        annotation: None,
                    },
                );
                let hidden: Vec<u32> = before.into_iter().filter(|u| !kept.contains(u)).collect();
                let ctx = CaptionContext {
                    schema: self.schema,
                    bound: self.bound,
                    trace: self.trace,
                };
                let caption = hide_caption(&ctx);
                self.push(
                    k,
                    vec![Action::new(ActionKind::Hide, units(hidden))],
                    caption,
                    StagePlan {
                        visible: out,
                        relayout: false,
                        highlight: Vec::new(),
                        bind: None,
                        annotation: None,
                    },
                );
            }
            BoundStep::Aggregate { method, input } => {
                let value = match result {
                    StepResult::Scalar { value } => value.clone(),
                    _ => Value::Null,
                };
                let text = format_value(&value);
                let over = input_ids(*input);
                let actions = vec![
                    Action::new(
                        ActionKind::Aggregate,
                        ActionParams {
                            attribute: self.bound.info[*input].column.map(|c| self.column_name(c)),
                            method: Some(*method),
                            value: Some(value),
                            ..Default::default()
                        },
                    ),
                    Action::new(
                        ActionKind::Annotate,
                        ActionParams {
                            label: Some(text.clone()),
                            units: Some(over.clone()),
                            ..Default::default()
                        },
                    ),
                ];
                let caption = self.caption(k, None);
                let mut plan = relayout(over.clone());
                plan.annotation = Some(AnnotationPlan::Scalar { text, units: over });
                self.push(k, actions, caption, plan);
            }
            BoundStep::Group { keys, .. } => {
                let key = self.bound.info[*keys]
                    .column
                    .expect("group keys are projections");
                let axis = self.group_axis(key);
                self.bind(axis, key);
                let StepResult::Groups { groups, .. } = result else {
                    unreachable!("GROUP yields groups")
                };
                let items: Vec<GroupLabel> = groups
                    .iter()
                    .map(|g| GroupLabel {
                        key: format_value(&g.key),
                        text: format_value(&g.aggregate),
                    })
                    .collect();
                let actions = vec![
                    Action::new(
                        axis,
                        ActionParams {
                            attribute: Some(self.column_name(key)),
                            layout: Some(LayoutKind::Bands),
                            ..Default::default()
                        },
                    ),
                    Action::new(
                        ActionKind::Annotate,
                        ActionParams {
                            groups: Some(items.clone()),
                            ..Default::default()
                        },
                    ),
                ];
                let caption = self.caption(k, None);
                let mut plan = relayout(input_ids(*keys));
                plan.bind = Some((axis, key));
                plan.annotation = Some(AnnotationPlan::Groups { axis, items });
                self.push(k, actions, caption, plan);
            }
            BoundStep::Sort { operand, dir, .. } => {
                let actions = vec![Action::new(
                    ActionKind::Sort,
                    ActionParams {
                        attribute: Some(self.column_name(self.bound.operand_column(*operand))),
                        direction: Some(*dir),
                        units: Some(out.clone()),
                        ..Default::default()
                    },
                )];
                let caption = self.caption(k, None);
                self.push(k, actions, caption, relayout(out));
            }
        }
        Ok(())
    }
}

fn relayout(visible: Vec<u32>) -> StagePlan {
    StagePlan {
        visible,
        relayout: true,
        highlight: Vec::new(),
        bind: None,
        annotation: None,
    }
}

pub(crate) fn compile(
    pipeline: &QdmrPipeline,
    trace: &Trace,
    schema: &Schema,
    opts: &DatamationOptions,
) -> Result<Compiled, DatamationError> {
    let bound = bind(pipeline, schema).map_err(DatamationError::Invalid)?;
    if trace.per_step.len() != bound.steps.len() {
        return Err(DatamationError::TraceMismatch {
            expected: bound.steps.len(),
            got: trace.per_step.len(),
        });
    }
    let mut c = Compiler {
        schema,
        bound: &bound,
        trace,
        opts,
        channels: [None; 4],
        visible: Vec::new(),
        stages: Vec::new(),
        plans: Vec::new(),
    };
    for k in 0..bound.steps.len() {
        c.step(k)?;
    }
    Ok(Compiled {
        table: bound.table,
        stages: c.stages,
        plans: c.plans,
    })
}
