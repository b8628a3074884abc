//! Execution-accuracy evaluation.

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::executor::execute;
use crate::model::{Answer, Dataset, Op, QdmrPipeline, Value};
use crate::text::{parse, validate};

/// Relative tolerance for numeric answer comparison.
pub const REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hardness {
    Easy,
    Medium,
    Hard,
    ExtraHard,
}

impl Hardness {
    pub const ALL: [Hardness; 4] = [
        Hardness::Easy,
        Hardness::Medium,
        Hardness::Hard,
        Hardness::ExtraHard,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Hardness::Easy => "Easy",
            Hardness::Medium => "Medium",
            Hardness::Hard => "Hard",
            Hardness::ExtraHard => "Extra-Hard",
        }
    }
}

impl fmt::Display for Hardness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Component-count approximation of question hardness.
///
/// `k` counts steps after SELECT and `c` counts GROUP, SORT and SUPERLATIVE
/// steps. Easy: `k <= 2` with no GROUP or SUPERLATIVE. Medium: one component
/// within three steps, or exactly three plain steps. Hard: two components
/// within four steps, or at most one component with exactly four steps.
/// Everything else is extra hard.
pub fn hardness_of(pipeline: &QdmrPipeline) -> Hardness {
    let steps = pipeline.steps();
    let k = steps.len().saturating_sub(1);
    let c = steps
        .iter()
        .filter(|s| matches!(s.op, Op::Group | Op::Sort | Op::Superlative))
        .count();
    let heavy = steps
        .iter()
        .any(|s| matches!(s.op, Op::Group | Op::Superlative));
    if k <= 2 && !heavy {
        Hardness::Easy
    } else if (c == 1 && k <= 3) || (c == 0 && k == 3) {
        Hardness::Medium
    } else if (c == 2 && k <= 4) || (c <= 1 && k == 4) {
        Hardness::Hard
    } else {
        Hardness::ExtraHard
    }
}

/// One corpus line: a question, the dataset it is about and the gold pipeline.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub question: String,
    /// Dataset directory, relative to the corpus file, or `bundled:<name>`.
    pub dataset_ref: String,
    pub gold_pipeline: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hardness: Option<Hardness>,
}

/// A loaded record ready for evaluation.
#[derive(Debug, Clone)]
pub struct EvalCase {
    pub line: usize,
    pub record: EvalRecord,
    pub dataset: Arc<Dataset>,
}

fn cmp_rows(a: &[Value], b: &[Value]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(a.len().cmp(&b.len()))
}

fn rows_eq(a: &[Value], b: &[Value]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.approx_eq(y, REL_TOL))
}

/// Canonical answer comparison. Record lists compare as multisets unless
/// `ordered`; groups always compare as sets of (key, aggregate) pairs.
pub fn answers_match(gold: &Answer, got: &Answer, ordered: bool) -> bool {
    fn lists<T: Clone>(
        a: &[T],
        b: &[T],
        ordered: bool,
        cmp: impl Fn(&T, &T) -> Ordering,
        eq: impl Fn(&T, &T) -> bool,
    ) -> bool {
        if a.len() != b.len() {
            return false;
        }
        if ordered {
            return a.iter().zip(b).all(|(x, y)| eq(x, y));
        }
        let (mut a, mut b) = (a.to_vec(), b.to_vec());
        a.sort_by(&cmp);
        b.sort_by(&cmp);
        a.iter().zip(&b).all(|(x, y)| eq(x, y))
    }
    match (gold, got) {
        (Answer::Scalar(a), Answer::Scalar(b)) => a.approx_eq(b, REL_TOL),
        (Answer::Values(a), Answer::Values(b)) => lists(
            a,
            b,
            ordered,
            |x, y| x.total_cmp(y),
            |x, y| x.approx_eq(y, REL_TOL),
        ),
        (Answer::Rows(a), Answer::Rows(b)) => {
            lists(a, b, ordered, |x, y| cmp_rows(x, y), |x, y| rows_eq(x, y))
        }
        (Answer::Groups(a), Answer::Groups(b)) => lists(
            a,
            b,
            false,
            |x, y| x.0.total_cmp(&y.0).then_with(|| x.1.total_cmp(&y.1)),
            |x, y| x.0 == y.0 && x.1.approx_eq(&y.1, REL_TOL),
        ),
        _ => false,
    }
}

/// Produces a pipeline text for a corpus record.
pub trait SystemUnderTest: Sync {
    fn generate(&self, record: &EvalRecord, dataset: &Dataset) -> Result<String, String>;
}

impl<F> SystemUnderTest for F
where
    F: Fn(&EvalRecord, &Dataset) -> Result<String, String> + Sync,
{
    fn generate(&self, record: &EvalRecord, dataset: &Dataset) -> Result<String, String> {
        self(record, dataset)
    }
}

/// Returns the gold pipeline unchanged.
pub struct IdentitySystem;

impl SystemUnderTest for IdentitySystem {
    fn generate(&self, record: &EvalRecord, _: &Dataset) -> Result<String, String> {
        Ok(record.gold_pipeline.clone())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalOptions {
    /// Additionally require the SQL answers (reference engine) to agree.
    pub sql_check: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub line: usize,
    pub question: String,
    pub hardness: Hardness,
    pub correct: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BucketStats {
    pub n: usize,
    pub n_correct: usize,
    pub accuracy: f64,
}

impl BucketStats {
    fn add(&mut self, correct: bool) {
        self.n += 1;
        self.n_correct += usize::from(correct);
        self.accuracy = self.n_correct as f64 / self.n as f64;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub easy: BucketStats,
    pub medium: BucketStats,
    pub hard: BucketStats,
    pub extra_hard: BucketStats,
    pub overall: BucketStats,
    /// How hardness buckets were assigned.
    pub hardness_method: String,
}

impl EvalSummary {
    pub fn bucket(&self, h: Hardness) -> &BucketStats {
        match h {
            Hardness::Easy => &self.easy,
            Hardness::Medium => &self.medium,
            Hardness::Hard => &self.hard,
            Hardness::ExtraHard => &self.extra_hard,
        }
    }

    fn bucket_mut(&mut self, h: Hardness) -> &mut BucketStats {
        match h {
            Hardness::Easy => &mut self.easy,
            Hardness::Medium => &mut self.medium,
            Hardness::Hard => &mut self.hard,
            Hardness::ExtraHard => &mut self.extra_hard,
        }
    }

    pub fn from_outcomes(outcomes: &[Outcome]) -> Self {
        let mut s = EvalSummary {
            easy: BucketStats::default(),
            medium: BucketStats::default(),
            hard: BucketStats::default(),
            extra_hard: BucketStats::default(),
            overall: BucketStats::default(),
            hardness_method: "approximate-hardness".into(),
        };
        for o in outcomes {
            s.bucket_mut(o.hardness).add(o.correct);
            s.overall.add(o.correct);
        }
        s
    }

    /// Aligned text table with one column per bucket.
    pub fn to_table(&self) -> String {
        let cols: Vec<(&str, &BucketStats)> = Hardness::ALL
            .iter()
            .map(|h| (h.label(), self.bucket(*h)))
            .chain(std::iter::once(("Overall", &self.overall)))
            .collect();
        let mut out = format!("{:<10}", "");
        for (name, _) in &cols {
            out.push_str(&format!("{name:>12}"));
        }
        out.push('\n');
        out.push_str(&format!("{:<10}", "count"));
        for (_, b) in &cols {
            out.push_str(&format!("{:>12}", b.n));
        }
        out.push('\n');
        out.push_str(&format!("{:<10}", "correct"));
        for (_, b) in &cols {
            out.push_str(&format!("{:>12}", b.n_correct));
        }
        out.push('\n');
        out.push_str(&format!("{:<10}", "accuracy"));
        for (_, b) in &cols {
            let acc = if b.n == 0 {
                "-".to_string()
            } else {
                format!("{:.3}", b.accuracy)
            };
            out.push_str(&format!("{acc:>12}"));
        }
        out.push('\n');
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub summary: EvalSummary,
    pub outcomes: Vec<Outcome>,
}

fn ends_in_sort(p: &QdmrPipeline) -> bool {
    p.last().op == Op::Sort
}

fn answer_of(text: &str, dataset: &Dataset, who: &str) -> Result<(QdmrPipeline, Answer), String> {
    let p = parse(text).map_err(|e| format!("{who} pipeline does not parse: {e}"))?;
    let report = validate(&p, dataset.schema());
    if !report.valid {
        return Err(format!("{who} pipeline is invalid: {report}"));
    }
    let trace = execute(&p, dataset).map_err(|e| format!("{who} pipeline failed: {e}"))?;
    Ok((p, trace.answer))
}

#[cfg(feature = "sqlite")]
fn sql_agrees(gold: &QdmrPipeline, got: &QdmrPipeline, dataset: &Dataset) -> Result<bool, String> {
    use crate::sql::{uses_median, SqliteEngine};
    if uses_median(gold) || uses_median(got) {
        return Ok(true);
    }
    let engine = SqliteEngine::load(dataset).map_err(|e| e.to_string())?;
    let (_, a) = engine.answer(gold).map_err(|e| format!("gold SQL: {e}"))?;
    let (_, b) = engine
        .answer(got)
        .map_err(|e| format!("generated SQL: {e}"))?;
    Ok(answers_match(&a, &b, ends_in_sort(gold)))
}

#[cfg(not(feature = "sqlite"))]
fn sql_agrees(_: &QdmrPipeline, _: &QdmrPipeline, _: &Dataset) -> Result<bool, String> {
    Err("SQL check requested but the sqlite feature is disabled".into())
}

fn evaluate_case(case: &EvalCase, sut: &dyn SystemUnderTest, opts: EvalOptions) -> Outcome {
    let gold = answer_of(&case.record.gold_pipeline, &case.dataset, "gold");
    let hardness = case
        .record
        .hardness
        .or_else(|| gold.as_ref().ok().map(|(p, _)| hardness_of(p)))
        .unwrap_or(Hardness::ExtraHard);
    let result = gold.and_then(|(gp, ga)| {
        let text = sut.generate(&case.record, &case.dataset)?;
        let (p, a) = answer_of(&text, &case.dataset, "generated")?;
        let mut ok = answers_match(&ga, &a, ends_in_sort(&gp));
        if ok && opts.sql_check {
            ok = sql_agrees(&gp, &p, &case.dataset)?;
        }
        Ok(ok)
    });
    let (correct, error) = match result {
        Ok(c) => (c, None),
        Err(e) => {
            tracing::warn!(line = case.line, error = %e, "record counted as incorrect");
            (false, Some(e))
        }
    };
    Outcome {
        line: case.line,
        question: case.record.question.clone(),
        hardness,
        correct,
        error,
    }
}

/// Scores a system on a corpus. Records are evaluated in parallel; failures
/// count as incorrect and never abort the run.
pub fn run_eval(corpus: &[EvalCase], sut: &dyn SystemUnderTest, opts: EvalOptions) -> EvalReport {
    let outcomes: Vec<Outcome> = corpus
        .par_iter()
        .map(|c| evaluate_case(c, sut, opts))
        .collect();
    EvalReport {
        summary: EvalSummary::from_outcomes(&outcomes),
        outcomes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unordered_values_ignore_order_but_not_multiplicity() {
        let a = Answer::Values(vec![1.0.into(), 2.0.into(), 2.0.into()]);
        let b = Answer::Values(vec![2.0.into(), 1.0.into(), 2.0.into()]);
        let c = Answer::Values(vec![1.0.into(), 1.0.into(), 2.0.into()]);
        assert!(answers_match(&a, &b, false));
        assert!(!answers_match(&a, &b, true));
        assert!(!answers_match(&a, &c, false));
    }

    #[test]
    fn scalars_use_relative_tolerance() {
        let a = Answer::Scalar(Value::Number(1.0));
        assert!(answers_match(
            &a,
            &Answer::Scalar(Value::Number(1.0 + 1e-12)),
            false
        ));
        assert!(!answers_match(
            &a,
            &Answer::Scalar(Value::Number(1.001)),
            false
        ));
        assert!(!answers_match(&a, &Answer::Values(vec![1.0.into()]), false));
    }

    #[test]
    fn summary_table_has_all_columns() {
        let s = EvalSummary::from_outcomes(&[Outcome {
            line: 1,
            question: "q".into(),
            hardness: Hardness::Medium,
            correct: true,
            error: None,
        }]);
        let t = s.to_table();
        for h in ["Easy", "Medium", "Hard", "Extra-Hard", "Overall"] {
            assert!(t.contains(h));
        }
        assert_eq!(s.overall.accuracy, 1.0);
    }
}
