//! Datamations: staged unit-visualization documents showing how an answer
//! was derived, one group of low-level actions per stage.
//!
//! [`generate`] executes a pipeline, expands every step into stages of
//! data/visual/annotation actions, simulates the unit layout through those
//! stages and records one key frame per stage boundary. The result serializes
//! to the `datamation/v1` JSON format described by [`SCHEMA_JSON`].

mod caption;
mod compile;
mod frames;
pub mod layout;
mod svg;

use serde::{Deserialize, Serialize};

pub use caption::{
    caption_for, format_number, format_value, hide_caption, CaptionContext, CaptionTemplates,
};
pub use compile::compile_actions;
pub use layout::{layout_grid, layout_grouped, layout_pack, Axis, Band, Canvas, Point};
pub use svg::render_svg;

use crate::executor::{execute_with, ExecError, ExecOptions};
use crate::model::{AggMethod, Answer, Dataset, QdmrPipeline, SortDir, Value};
use crate::plan::ValidationReport;

/// Format tag written into every document.
pub const FORMAT: &str = "datamation/v1";

/// JSON Schema of the `datamation/v1` document.
pub const SCHEMA_JSON: &str = include_str!("../../resources/datamation_v1.schema.json");

/// Eight categorical colors followed by the highlight accent.
pub const PALETTE: [&str; 9] = [
    "#4e79a7", "#f28e2b", "#59a14f", "#b07aa1", "#76b7b2", "#edc948", "#ff9da7", "#9c755f",
    "#e15759",
];

/// Palette index of the highlight accent.
pub const ACCENT: u8 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionFamily {
    Data,
    Visual,
    Annotation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Select,
    Filter,
    Aggregate,
    Sort,
    Layout,
    XAxis,
    YAxis,
    Size,
    Color,
    Highlight,
    Hide,
    Annotate,
}

impl ActionKind {
    pub fn family(self) -> ActionFamily {
        use ActionKind::*;
        match self {
            Select | Filter | Aggregate | Sort => ActionFamily::Data,
            Layout | XAxis | YAxis | Size | Color => ActionFamily::Visual,
            Highlight | Hide | Annotate => ActionFamily::Annotation,
        }
    }

    pub fn name(self) -> &'static str {
        use ActionKind::*;
        match self {
            Select => "select",
            Filter => "filter",
            Aggregate => "aggregate",
            Sort => "sort",
            Layout => "layout",
            XAxis => "x-axis",
            YAxis => "y-axis",
            Size => "size",
            Color => "color",
            Highlight => "highlight",
            Hide => "hide",
            Annotate => "annotate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayoutKind {
    Grid,
    Pack,
    Bands,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupLabel {
    pub key: String,
    pub text: String,
}

/// Kind-specific parameters. Only the fields relevant to the kind are set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ActionParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attribute: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<AggMethod>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<SortDir>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<LayoutKind>,
    /// Target unit ids (source row ids).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub units: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groups: Option<Vec<GroupLabel>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub family: ActionFamily,
    pub kind: ActionKind,
    #[serde(default)]
    pub params: ActionParams,
}

impl Action {
    pub fn new(kind: ActionKind, params: ActionParams) -> Self {
        Action {
            family: kind.family(),
            kind,
            params,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Easing {
    #[default]
    #[serde(rename = "slow-in-slow-out")]
    SlowInSlowOut,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub actions: Vec<Action>,
    pub duration_ms: u32,
    pub easing: Easing,
    pub caption: String,
    /// 1-based index of the pipeline step this stage animates.
    pub source_step: usize,
}

impl Stage {
    pub fn kinds(&self) -> Vec<ActionKind> {
        self.actions.iter().map(|a| a.kind).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Unit {
    /// Source row id.
    pub id: u32,
    pub x: f64,
    pub y: f64,
    pub radius: f64,
    /// Index into the document palette; [`ACCENT`] marks highlighted units.
    pub color: u8,
    pub opacity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisBands {
    pub column: String,
    pub bands: Vec<Band>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Axes {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<AxisBands>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<AxisBands>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Anchor {
    Units(Vec<u32>),
    Group(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub anchor: Anchor,
    pub text: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyFrame {
    pub units: Vec<Unit>,
    #[serde(default)]
    pub axes: Axes,
    #[serde(default)]
    pub annotations: Vec<Annotation>,
    pub caption: String,
}

impl KeyFrame {
    pub fn visible(&self) -> impl Iterator<Item = &Unit> {
        self.units.iter().filter(|u| u.opacity > 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatamationDoc {
    pub version: String,
    pub canvas: Canvas,
    pub palette: Vec<String>,
    pub accent: u8,
    /// Pipeline text the document was compiled from.
    pub pipeline: String,
    pub answer: Answer,
    pub stages: Vec<Stage>,
    pub keyframes: Vec<KeyFrame>,
}

impl DatamationDoc {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("datamation docs serialize")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("datamation docs serialize")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatamationOptions {
    pub canvas: Canvas,
    /// Largest unit radius in px; layouts shrink it to fit.
    pub unit_radius: f64,
    pub stage_ms: u32,
    /// Duration of stages made only of annotation actions.
    pub annotation_ms: u32,
    pub exec: ExecOptions,
}

impl Default for DatamationOptions {
    fn default() -> Self {
        DatamationOptions {
            canvas: Canvas::default(),
            unit_radius: 10.0,
            stage_ms: 1000,
            annotation_ms: 400,
            exec: ExecOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DatamationError {
    #[error("pipeline is not valid: {0}")]
    Invalid(ValidationReport),
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error("step {step}: no free visual channel for '{column}'")]
    ChannelConflict { step: usize, column: String },
    #[error("trace has {got} step results, pipeline has {expected} steps")]
    TraceMismatch { expected: usize, got: usize },
}

/// Executes, compiles and lays out a pipeline with default options.
pub fn generate(
    pipeline: &QdmrPipeline,
    dataset: &Dataset,
) -> Result<DatamationDoc, DatamationError> {
    generate_with(pipeline, dataset, &DatamationOptions::default())
}

pub fn generate_with(
    pipeline: &QdmrPipeline,
    dataset: &Dataset,
    opts: &DatamationOptions,
) -> Result<DatamationDoc, DatamationError> {
    let trace = execute_with(pipeline, dataset, opts.exec).map_err(|e| match e {
        ExecError::Invalid(r) => DatamationError::Invalid(r),
        e => DatamationError::Exec(e),
    })?;
    let compiled = compile::compile(pipeline, &trace, dataset.schema(), opts)?;
    let keyframes = frames::simulate(&compiled, dataset, opts);
    Ok(DatamationDoc {
        version: FORMAT.to_string(),
        canvas: opts.canvas,
        palette: PALETTE.iter().map(|s| s.to_string()).collect(),
        accent: ACCENT,
        pipeline: crate::text::serialize(pipeline),
        answer: trace.answer.clone(),
        stages: compiled.stages,
        keyframes,
    })
}
