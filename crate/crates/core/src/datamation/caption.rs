//! Stage captions filled from the bundled template resource.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::Deserialize;

use super::ActionKind;
use crate::executor::Trace;
use crate::model::{AggMethod, Schema, StepResult, Value};
use crate::plan::{BoundPipeline, BoundStep};

const TEMPLATES_TOML: &str = include_str!("../../resources/captions_v1.toml");

#[derive(Debug, Deserialize)]
pub struct CaptionTemplates {
    pub version: u32,
    templates: BTreeMap<String, String>,
    comparators: BTreeMap<String, String>,
    methods: BTreeMap<String, String>,
    extrema: BTreeMap<String, String>,
    directions: BTreeMap<String, String>,
}

impl CaptionTemplates {
    pub fn bundled() -> &'static CaptionTemplates {
        static T: OnceLock<CaptionTemplates> = OnceLock::new();
        T.get_or_init(|| toml::from_str(TEMPLATES_TOML).expect("bundled caption templates parse"))
    }

    fn fill(&self, name: &str, slots: &[(&str, &str)]) -> String {
        let mut out = self.templates.get(name).cloned().unwrap_or_default();
        for (k, v) in slots {
            out = out.replace(&format!("{{{k}}}"), v);
        }
        out
    }

    fn word<'a>(map: &'a BTreeMap<String, String>, key: &'a str) -> &'a str {
        map.get(key).map(String::as_str).unwrap_or(key)
    }
}

/// At most two decimals, trailing zeros dropped, thousands separated by commas.
pub fn format_number(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let fixed = format!("{:.2}", x.abs());
    let (int, frac) = fixed.split_once('.').unwrap_or((&fixed, ""));
    let frac = frac.trim_end_matches('0');
    let mut grouped = String::new();
    for (i, c) in int.chars().enumerate() {
        if i > 0 && (int.len() - i) % 3 == 0 {
            grouped.push(',');
        }
        grouped.push(c);
    }
    let neg = x < 0.0 && (int != "0" || !frac.is_empty());
    format!(
        "{}{}{}{}",
        if neg { "-" } else { "" },
        grouped,
        if frac.is_empty() { "" } else { "." },
        frac
    )
}

/// Display form of a value in captions and labels. Dates keep their ISO form.
pub fn format_value(v: &Value) -> String {
    match v {
        Value::Number(n) => format_number(*n),
        other => other.to_string(),
    }
}

/// What captioning a step needs beyond the step itself.
pub struct CaptionContext<'a> {
    pub schema: &'a Schema,
    pub bound: &'a BoundPipeline,
    pub trace: &'a Trace,
}

impl CaptionContext<'_> {
    fn table(&self) -> &str {
        &self.schema.table(self.bound.table).name
    }

    fn column(&self, c: usize) -> &str {
        &self.schema.table(self.bound.table).columns[c].name
    }
}

fn method_word(t: &CaptionTemplates, m: AggMethod) -> &str {
    CaptionTemplates::word(&t.methods, m.name())
}

/// Main caption of step `k` (0-based). `channel` is the visual channel a
/// PROJECT step was bound to.
pub fn caption_for(ctx: &CaptionContext, k: usize, channel: Option<ActionKind>) -> String {
    let t = CaptionTemplates::bundled();
    let table = ctx.table();
    match &ctx.bound.steps[k] {
        BoundStep::Select { focus } => {
            let count = ctx.trace.per_step[k].row_ids().len().to_string();
            match focus {
                None => t.fill("select", &[("count", &count), ("table", table)]),
                Some(c) => t.fill(
                    "select_column",
                    &[
                        ("count", &count),
                        ("table", table),
                        ("column", ctx.column(*c)),
                    ],
                ),
            }
        }
        BoundStep::Project { column, .. } => {
            let name = match channel.unwrap_or(ActionKind::XAxis) {
                ActionKind::YAxis => "project_y_axis",
                ActionKind::Color => "project_color",
                ActionKind::Size => "project_size",
                _ => "project_x_axis",
            };
            t.fill(name, &[("table", table), ("column", ctx.column(*column))])
        }
        BoundStep::Filter {
            operand,
            cmp,
            literal,
            ..
        } => {
            let cond = format!(
                "{} {}",
                CaptionTemplates::word(&t.comparators, cmp.symbol()),
                format_value(literal)
            );
            let column = ctx.column(ctx.bound.operand_column(*operand));
            t.fill(
                "filter",
                &[("table", table), ("column", column), ("condition", &cond)],
            )
        }
        BoundStep::Superlative { operand, ext, .. } => t.fill(
            "superlative",
            &[
                ("table", table),
                ("column", ctx.column(ctx.bound.operand_column(*operand))),
                ("extremum", CaptionTemplates::word(&t.extrema, ext.name())),
            ],
        ),
        BoundStep::Aggregate { method, input } => {
            let value = match &ctx.trace.per_step[k] {
                StepResult::Scalar { value } => format_value(value),
                _ => String::new(),
            };
            if *method == AggMethod::Count {
                t.fill("aggregate_count", &[("table", table), ("value", &value)])
            } else {
                let column = ctx.bound.info[*input]
                    .column
                    .map(|c| ctx.column(c))
                    .unwrap_or("");
                t.fill(
                    "aggregate",
                    &[
                        ("method", method_word(t, *method)),
                        ("column", column),
                        ("table", table),
                        ("value", &value),
                    ],
                )
            }
        }
        BoundStep::Group {
            method,
            values,
            keys,
        } => {
            let key = ctx.bound.info[*keys]
                .column
                .map(|c| ctx.column(c))
                .unwrap_or("");
            if *method == AggMethod::Count {
                t.fill("group_count", &[("table", table), ("key", key)])
            } else {
                let column = ctx.bound.info[*values]
                    .column
                    .map(|c| ctx.column(c))
                    .unwrap_or("");
                t.fill(
                    "group",
                    &[
                        ("table", table),
                        ("key", key),
                        ("method", method_word(t, *method)),
                        ("column", column),
                    ],
                )
            }
        }
        BoundStep::Sort { operand, dir, .. } => t.fill(
            "sort",
            &[
                ("table", table),
                ("column", ctx.column(ctx.bound.operand_column(*operand))),
                (
                    "direction",
                    CaptionTemplates::word(&t.directions, dir.name()),
                ),
            ],
        ),
    }
}

/// Caption of the hide stage that follows a FILTER or SUPERLATIVE.
pub fn hide_caption(ctx: &CaptionContext) -> String {
    CaptionTemplates::bundled().fill("hide", &[("table", ctx.table())])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers() {
        assert_eq!(format_number(2.0), "2");
        assert_eq!(format_number(2000.5), "2,000.5");
        assert_eq!(format_number(1234567.891), "1,234,567.89");
        assert_eq!(format_number(-0.004), "0");
        assert_eq!(format_number(-1234.0), "-1,234");
        assert_eq!(format_number(999.999), "1,000");
    }

    #[test]
    fn templates_load() {
        let t = CaptionTemplates::bundled();
        assert_eq!(t.version, 1);
        assert!(t.templates.contains_key("aggregate_count"));
    }
}
