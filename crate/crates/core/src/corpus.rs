//! Bundled desk datasets, a seeded pipeline generator, and corpus loading.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::eval::{EvalCase, EvalRecord};
use crate::executor::{execute, Trace};
use crate::ingest::{ingest_csv, load_dataset_dir, CsvFile, TypeHints};
use crate::model::{
    AggMethod, Arg, ColumnType, Comparator, Condition, Dataset, Extremum, Op, Operand,
    QdmrPipeline, QdmrStep, RowId, SortDir, StepResult, Value,
};
use crate::text::{parse, validate};

/// Names of the datasets compiled into the crate.
pub const BUNDLED: [&str; 4] = ["students", "flights", "graduates", "vehicles"];

/// Loads a bundled dataset by name.
pub fn bundled(name: &str) -> Option<Dataset> {
    let (csv, hints): (&[u8], TypeHints) = match name {
        "students" => (
            include_bytes!("../data/students/students.csv"),
            TypeHints::new(),
        ),
        "flights" => (
            include_bytes!("../data/flights/flights.csv"),
            TypeHints::new(),
        ),
        "graduates" => (
            include_bytes!("../data/graduates/graduates.csv"),
            TypeHints::new(),
        ),
        "vehicles" => (
            include_bytes!("../data/vehicles/vehicles.csv"),
            serde_json::from_str(include_str!("../data/vehicles/types.json"))
                .expect("bundled hints parse"),
        ),
        _ => return None,
    };
    let file = CsvFile {
        name,
        contents: csv,
    };
    Some(ingest_csv(&[file], &hints).expect("bundled dataset is well formed"))
}

/// The four-row students table used throughout the docs and tests.
pub fn desk_students() -> Dataset {
    bundled("students").expect("bundled")
}

/// Seeded generator of valid, linear pipelines over one dataset.
///
/// Conditions draw their literal from a row that reaches the step, so most
/// generated pipelines execute without hitting an empty input.
pub struct PipelineGenerator<'a> {
    pub seed: u64,
    pub max_steps: usize,
    dataset: &'a Dataset,
    rng: ChaCha8Rng,
}

struct Cursor {
    /// 1-based index of the step whose output the next step reads.
    at: usize,
    rows: Vec<RowId>,
    /// Column carried by the current output (projection or focus).
    column: Option<usize>,
    is_projection: bool,
}

impl<'a> PipelineGenerator<'a> {
    pub fn new(dataset: &'a Dataset, seed: u64, max_steps: usize) -> Self {
        PipelineGenerator {
            seed,
            max_steps: max_steps.max(1),
            dataset,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn columns(&self, table: usize) -> &[crate::model::Column] {
        &self.dataset.schema().table(table).columns
    }

    fn non_null(&self, table: usize, rows: &[RowId], col: usize) -> Vec<Value> {
        rows.iter()
            .map(|&r| self.dataset.cell(table, r, col))
            .filter(|v| !v.is_null())
            .cloned()
            .collect()
    }

    /// Literal as a user would write it for a value of the given column type.
    fn written(v: &Value) -> Value {
        match v {
            Value::Date(d) if d.is_bare_year() => Value::Number(f64::from(d.year_part())),
            other => other.clone(),
        }
    }

    fn pick_method(&mut self, kind: Option<ColumnType>) -> AggMethod {
        let choices: &[AggMethod] = match kind {
            None | Some(ColumnType::Categorical) => &[AggMethod::Count],
            Some(ColumnType::Temporal) => &[AggMethod::Count, AggMethod::Max, AggMethod::Min],
            Some(ColumnType::Numerical) => &[
                AggMethod::Count,
                AggMethod::Sum,
                AggMethod::Avg,
                AggMethod::Max,
                AggMethod::Min,
                AggMethod::Median,
            ],
        };
        *choices.choose(&mut self.rng).expect("non-empty")
    }

    fn condition_step(&mut self, table: usize, cur: &Cursor) -> Option<QdmrStep> {
        let cols = self.columns(table).to_vec();
        // Filter on the carried projection through a reference now and then.
        let use_ref = cur.is_projection && self.rng.gen_bool(0.3);
        let col = if use_ref {
            cur.column?
        } else {
            self.rng.gen_range(0..cols.len())
        };
        let values = self.non_null(table, &cur.rows, col);
        let v = values.choose(&mut self.rng)?.clone();
        let cmps: &[Comparator] = if cols[col].kind.is_ordered() {
            &[
                Comparator::Eq,
                Comparator::Neq,
                Comparator::Gt,
                Comparator::Lt,
                Comparator::Ge,
                Comparator::Le,
            ]
        } else {
            &[Comparator::Eq, Comparator::Neq]
        };
        let cmp = *cmps.choose(&mut self.rng).expect("non-empty");
        let operand = if use_ref {
            Operand::Ref(cur.at)
        } else {
            Operand::Attr(cols[col].name.clone())
        };
        Some(QdmrStep::new(
            Op::Filter,
            vec![
                Arg::Ref(cur.at),
                Arg::Cond(Condition {
                    operand,
                    cmp,
                    literal: Self::written(&v),
                }),
            ],
        ))
    }

    fn ordered_column(&mut self, table: usize, rows: &[RowId]) -> Option<usize> {
        let candidates: Vec<usize> = (0..self.columns(table).len())
            .filter(|&c| self.columns(table)[c].kind.is_ordered())
            .filter(|&c| !self.non_null(table, rows, c).is_empty())
            .collect();
        candidates.choose(&mut self.rng).copied()
    }

    fn run(&self, steps: &[QdmrStep]) -> Option<Trace> {
        let p = QdmrPipeline::new(steps.to_vec()).ok()?;
        execute(&p, self.dataset).ok()
    }

    /// Generates the next pipeline. Every output validates strictly.
    pub fn next_pipeline(&mut self) -> QdmrPipeline {
        let schema = self.dataset.schema();
        let table = self.rng.gen_range(0..schema.tables().len());
        let tname = schema.table(table).name.clone();
        let ncols = self.columns(table).len();
        // a lone SELECT only when nothing longer is allowed
        let target = self.rng.gen_range(self.max_steps.min(2)..=self.max_steps);

        let focus = (self.rng.gen_bool(0.15)).then(|| self.rng.gen_range(0..ncols));
        let select_arg = match focus {
            Some(c) => self.columns(table)[c].name.clone(),
            None => tname,
        };
        let mut steps = vec![QdmrStep::new(Op::Select, vec![Arg::Attr(select_arg)])];
        let mut cur = Cursor {
            at: 1,
            rows: self.dataset.row_ids(table).collect(),
            column: focus,
            is_projection: false,
        };

        while steps.len() < target {
            let left = target - steps.len();
            let roll = self.rng.gen_range(0..100);
            let step = if left == 1 && roll < 35 {
                let kind = cur.column.map(|c| self.columns(table)[c].kind);
                let m = self.pick_method(kind);
                QdmrStep::new(Op::Aggregate, vec![Arg::Method(m), Arg::Ref(cur.at)])
            } else if left >= 2 && roll < 15 {
                // GROUP needs its own PROJECT of the keys (and maybe values).
                let key = self.rng.gen_range(0..ncols);
                let keys_at = steps.len() + 1;
                steps.push(QdmrStep::new(
                    Op::Project,
                    vec![
                        Arg::Attr(self.columns(table)[key].name.clone()),
                        Arg::Ref(cur.at),
                    ],
                ));
                let values_at = if left >= 3 && self.rng.gen_bool(0.6) {
                    let vcol = self.rng.gen_range(0..ncols);
                    steps.push(QdmrStep::new(
                        Op::Project,
                        vec![
                            Arg::Attr(self.columns(table)[vcol].name.clone()),
                            Arg::Ref(cur.at),
                        ],
                    ));
                    // The value projection must be referenced: GROUP uses it.
                    let kind = Some(self.columns(table)[vcol].kind);
                    (steps.len(), self.pick_method(kind))
                } else {
                    let kind = cur.column.map(|c| self.columns(table)[c].kind);
                    (cur.at, self.pick_method(kind))
                };
                // Keys step must be used too; values may reuse the cursor.
                let (vals, method) = values_at;
                steps.push(QdmrStep::new(
                    Op::Group,
                    vec![Arg::Method(method), Arg::Ref(vals), Arg::Ref(keys_at)],
                ));
                // Dead-step guard: when values reused the cursor, the key
                // projection is still referenced by GROUP; nothing else dangles.
                break;
            } else if roll < 45 {
                match self.condition_step(table, &cur) {
                    Some(s) => s,
                    None => continue,
                }
            } else if roll < 60 {
                let Some(col) = self.ordered_column(table, &cur.rows) else {
                    continue;
                };
                let ext = *[Extremum::Max, Extremum::Min]
                    .choose(&mut self.rng)
                    .expect("non-empty");
                let operand = if cur.is_projection && cur.column == Some(col) {
                    Arg::Ref(cur.at)
                } else {
                    Arg::Attr(self.columns(table)[col].name.clone())
                };
                QdmrStep::new(
                    Op::Superlative,
                    vec![Arg::Ref(cur.at), operand, Arg::Super(ext)],
                )
            } else if roll < 75 {
                let col = self.rng.gen_range(0..ncols);
                let dir = *[SortDir::Asc, SortDir::Desc]
                    .choose(&mut self.rng)
                    .expect("non-empty");
                let operand = if cur.is_projection && cur.column == Some(col) {
                    Arg::Ref(cur.at)
                } else {
                    Arg::Attr(self.columns(table)[col].name.clone())
                };
                QdmrStep::new(Op::Sort, vec![Arg::Ref(cur.at), operand, Arg::Dir(dir)])
            } else {
                let col = self.rng.gen_range(0..ncols);
                QdmrStep::new(
                    Op::Project,
                    vec![
                        Arg::Attr(self.columns(table)[col].name.clone()),
                        Arg::Ref(cur.at),
                    ],
                )
            };
            let op = step.op;
            steps.push(step);
            if matches!(op, Op::Aggregate) {
                break;
            }
            // Track rows reaching the new step for later literal draws.
            let trace = self.run(&steps);
            let at = steps.len();
            let (rows, column, is_projection) = match trace.as_ref().map(|t| &t.per_step[at - 1]) {
                Some(StepResult::Projection(p)) => {
                    let col = self.columns(table).iter().position(|c| c.name == p.column);
                    (p.row_ids().collect(), col, true)
                }
                Some(StepResult::Records(r)) => (r.rows.clone(), cur.column, false),
                _ => (Vec::new(), cur.column, cur.is_projection),
            };
            let column = if op == Op::Project {
                column
            } else {
                cur.column
            };
            cur = Cursor {
                at,
                rows,
                column,
                is_projection: is_projection || (cur.is_projection && op != Op::Project),
            };
        }
        QdmrPipeline::new(steps).expect("generator emits back-references only")
    }
}

/// Free-function form of [`PipelineGenerator::next_pipeline`].
pub fn gen_pipeline(gen: &mut PipelineGenerator<'_>) -> QdmrPipeline {
    gen.next_pipeline()
}

/// A corpus line that could not be used.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct LoadedCorpus {
    pub cases: Vec<EvalCase>,
    pub errors: Vec<CorpusError>,
}

fn resolve_dataset(reference: &str, base: &Path) -> Result<Dataset, String> {
    if let Some(name) = reference.strip_prefix("bundled:") {
        return bundled(name).ok_or_else(|| format!("no bundled dataset named '{name}'"));
    }
    let path: PathBuf = base.join(reference);
    load_dataset_dir(&path).map_err(|e| e.to_string())
}

/// Parses JSON-lines text. `base` resolves relative dataset references.
/// Every gold pipeline is parsed and validated up front; bad lines are
/// reported with their 1-based line number and skipped.
pub fn load_corpus_str(text: &str, base: &Path) -> LoadedCorpus {
    let mut out = LoadedCorpus::default();
    let mut datasets: HashMap<String, Result<Arc<Dataset>, String>> = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let mut fail = |message: String| out.errors.push(CorpusError { line, message });
        let record: EvalRecord = match serde_json::from_str(raw) {
            Ok(r) => r,
            Err(e) => {
                fail(format!("malformed record: {e}"));
                continue;
            }
        };
        let ds = datasets
            .entry(record.dataset_ref.clone())
            .or_insert_with(|| resolve_dataset(&record.dataset_ref, base).map(Arc::new))
            .clone();
        let dataset = match ds {
            Ok(d) => d,
            Err(e) => {
                fail(format!("dataset '{}': {e}", record.dataset_ref));
                continue;
            }
        };
        match parse(&record.gold_pipeline) {
            Err(e) => fail(format!("gold pipeline: {e}")),
            Ok(p) => {
                let report = validate(&p, dataset.schema());
                if report.valid {
                    out.cases.push(EvalCase {
                        line,
                        record,
                        dataset,
                    });
                } else {
                    fail(format!("gold pipeline: {report}"));
                }
            }
        }
    }
    out
}

/// The bundled 50-record synthetic corpus over the desk datasets.
pub fn eval_corpus() -> LoadedCorpus {
    load_corpus_str(include_str!("../resources/eval_desk.jsonl"), Path::new("."))
}

/// Reads a JSON-lines corpus file.
pub fn load_corpus(path: impl AsRef<Path>) -> std::io::Result<LoadedCorpus> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    Ok(load_corpus_str(&text, base))
}

/// Ways to break a valid pipeline text, used by rejection tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mutation {
    /// `#k` becomes `#(k + len)`; the parser reports ForwardRef.
    ForwardRef,
    /// One argument is removed; the parser reports BadArity.
    DropArg,
    /// A table or column name is replaced by one not in the schema; the
    /// text parses but fails validation.
    UnknownAttr,
}

impl Mutation {
    pub const ALL: [Mutation; 3] = [
        Mutation::ForwardRef,
        Mutation::DropArg,
        Mutation::UnknownAttr,
    ];
}

/// Applies `m` to a step picked with `seed` and returns the broken text, or
/// `None` when the pipeline has nothing of the required kind.
pub fn mutate(p: &QdmrPipeline, m: Mutation, seed: u64) -> Option<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut steps = p.steps().to_vec();
    let len = steps.len();
    let names = |s: &QdmrStep| {
        s.args
            .iter()
            .filter(|a| {
                matches!(
                    a,
                    Arg::Attr(_)
                        | Arg::Cond(Condition {
                            operand: Operand::Attr(_),
                            ..
                        })
                )
            })
            .count()
    };
    let eligible: Vec<usize> = (0..len)
        .filter(|&i| match m {
            Mutation::ForwardRef => steps[i].refs().next().is_some(),
            Mutation::DropArg => true,
            Mutation::UnknownAttr => names(&steps[i]) > 0,
        })
        .collect();
    let &i = eligible.choose(&mut rng)?;
    let step = &mut steps[i];
    match m {
        Mutation::ForwardRef => {
            let r = step
                .refs_mut()
                .next()
                .expect("eligible step has a reference");
            *r += len;
        }
        Mutation::DropArg => {
            let k = rng.gen_range(0..step.args.len());
            step.args.remove(k);
        }
        Mutation::UnknownAttr => {
            let k = rng.gen_range(0..names(step));
            let target = step
                .args
                .iter_mut()
                .filter_map(|a| match a {
                    Arg::Attr(n)
                    | Arg::Cond(Condition {
                        operand: Operand::Attr(n),
                        ..
                    }) => Some(n),
                    _ => None,
                })
                .nth(k)
                .expect("index within name count");
            *target = format!("{target}_zz_missing");
        }
    }
    Some(
        steps
            .iter()
            .map(crate::text::serialize_step)
            .collect::<Vec<_>>()
            .join("; "),
    )
}

/// One hand-labeled linking question over a bundled dataset. Attributes are
/// written `table` or `table.column`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkCase {
    pub dataset: String,
    pub question: String,
    /// Attribute named verbatim in the question, if any.
    #[serde(default)]
    pub exact: Option<String>,
    pub relevant: Vec<String>,
}

/// The bundled 30-question linking corpus.
pub fn linker_corpus() -> Vec<LinkCase> {
    include_str!("../resources/linker_desk.jsonl")
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).expect("bundled linker corpus parses"))
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LinkAgreement {
    /// Questions that name an attribute verbatim.
    pub exact_cases: usize,
    /// Of those, how many score the named attribute at the top (ties allowed).
    pub exact_top: usize,
    /// (question, attribute) pairs judged.
    pub pairs: usize,
    /// Pairs where `p_rel >= theta` agrees with the label.
    pub pairs_agree: usize,
    /// Questions whose whole relevant set matches the labels.
    pub questions_exact_set: usize,
    pub questions: usize,
}

impl LinkAgreement {
    pub fn exact_rate(&self) -> f64 {
        self.exact_top as f64 / self.exact_cases.max(1) as f64
    }

    pub fn pair_rate(&self) -> f64 {
        self.pairs_agree as f64 / self.pairs.max(1) as f64
    }
}

/// Scores `cases` with `scorer` and compares against the labels.
pub fn link_agreement(
    cases: &[LinkCase],
    scorer: &dyn crate::linker::Scorer,
    theta: f64,
) -> LinkAgreement {
    let mut datasets: HashMap<&str, Dataset> = HashMap::new();
    let mut out = LinkAgreement::default();
    for case in cases {
        let data = datasets.entry(case.dataset.as_str()).or_insert_with(|| {
            bundled(&case.dataset).expect("linker corpus names a bundled dataset")
        });
        let ranked =
            crate::linker::link_with_threshold(&case.question, data.schema(), scorer, theta);
        if let Some(exact) = &case.exact {
            out.exact_cases += 1;
            let top = ranked.scores.first().map_or(0.0, |s| s.p_rel);
            let named = ranked
                .scores
                .iter()
                .find(|s| s.attribute.to_string() == *exact);
            if named.is_some_and(|s| s.p_rel >= top) {
                out.exact_top += 1;
            }
        }
        let mut all_agree = true;
        for s in &ranked.scores {
            let labeled = case.relevant.contains(&s.attribute.to_string());
            out.pairs += 1;
            if labeled == s.relevant {
                out.pairs_agree += 1;
            } else {
                all_agree = false;
            }
        }
        out.questions += 1;
        out.questions_exact_set += usize::from(all_agree);
    }
    out
}
