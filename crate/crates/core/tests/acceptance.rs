//! Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use datamate_core::corpus::{
    bundled, desk_students, eval_corpus, link_agreement, linker_corpus, mutate, Mutation,
    PipelineGenerator, BUNDLED,
};
use datamate_core::datamation::{
    compile_actions, generate, layout_grid, layout_grouped, layout_pack, ActionFamily, Axis,
    Canvas, DatamationDoc,
};
use datamate_core::eval::{
    answers_match, run_eval, EvalCase, EvalOptions, EvalRecord, IdentitySystem,
};
use datamate_core::linker::{LexicalScorer, THETA};
use datamate_core::session::SessionStore;
use datamate_core::sql::{uses_median, SqliteEngine};
use datamate_core::text::{parse_step, validate, ParseErrorKind};
use datamate_core::{
    execute, parse, serialize, AggMethod, Arg, Dataset, ExecError, Op, QdmrPipeline, StepResult,
    Value,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const RUNNING: &str = "SELECT['students']; PROJECT['birth_year', #1]; FILTER[#2, 'birth_year' = 2000]; AGGREGATE[count, #3]";

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn running_example_golden() -> Outcome {
    let start = Instant::now();
    let data = desk_students();
    let p = match parse(RUNNING) {
        Ok(p) => p,
        Err(e) => return check(false, format!("parse: {e}")),
    };
    let report = validate(&p, data.schema());
    let answer = execute(&p, &data)
        .ok()
        .and_then(|t| t.answer.as_scalar().and_then(Value::as_f64));
    let kinds: Vec<Vec<&str>> = match generate(&p, &data) {
        Ok(d) => d
            .stages
            .iter()
            .map(|s| s.actions.iter().map(|a| a.kind.name()).collect())
            .collect(),
        Err(e) => return check(false, format!("generate: {e}")),
    };
    let elapsed = start.elapsed();
    let expected: Vec<Vec<&str>> = vec![
        vec!["select", "layout"],
        vec!["x-axis"],
        vec!["filter", "highlight"],
        vec!["hide"],
        vec!["aggregate", "annotate"],
    ];
    check(
        report.valid
            && answer == Some(2.0)
            && kinds == expected
            && elapsed < Duration::from_secs(1),
        format!("answer {answer:?}, stages {kinds:?}, {elapsed:.2?} (limit 1s)"),
    )
}

/// Order statistic by counting: the value with rank `r` (0-based) in
/// ascending order.
fn rank_select(xs: &[f64], r: usize) -> f64 {
    for &x in xs {
        let below = xs.iter().filter(|&&y| y < x).count();
        let at_most = xs.iter().filter(|&&y| y <= x).count();
        if below <= r && r < at_most {
            return x;
        }
    }
    unreachable!("some element has every rank")
}

fn median_by_rank(xs: &[f64]) -> Option<f64> {
    let n = xs.len();
    match n {
        0 => None,
        _ if n % 2 == 1 => Some(rank_select(xs, n / 2)),
        _ => Some((rank_select(xs, n / 2 - 1) + rank_select(xs, n / 2)) / 2.0),
    }
}

fn numbers(values: impl Iterator<Item = Value>) -> Vec<f64> {
    values
        .filter(|v| !v.is_null())
        .filter_map(|v| v.as_f64())
        .collect()
}

/// Values carried by a step result: projection items, or the focus column of
/// a column-level record set.
fn values_by_row(data: &Dataset, r: &StepResult) -> Option<HashMap<u32, Value>> {
    match r {
        StepResult::Projection(p) => {
            Some(p.items.iter().map(|(id, v)| (id.0, v.clone())).collect())
        }
        StepResult::Records(rs) => {
            let t = data.schema().table_index(&rs.table)?;
            let c = data.schema().table(t).column_index(rs.focus.as_deref()?)?;
            Some(
                rs.rows
                    .iter()
                    .map(|id| (id.0, data.cell(t, *id, c).clone()))
                    .collect(),
            )
        }
        _ => None,
    }
}

/// Checks every median step of `p` against the rank oracle. Returns
/// (checked, mismatches).
fn median_oracle(p: &QdmrPipeline, data: &Dataset) -> Option<(usize, Vec<String>)> {
    let trace = execute(p, data).ok()?;
    let mut checked = 0;
    let mut bad = Vec::new();
    for (i, step) in p.steps().iter().enumerate() {
        if !step.args.contains(&Arg::Method(AggMethod::Median)) {
            continue;
        }
        let refs: Vec<usize> = step.refs().collect();
        match (&trace.per_step[i], step.op) {
            (StepResult::Scalar { value }, Op::Aggregate) => {
                let input = &trace.per_step[refs[0] - 1];
                let Some(vals) = values_by_row(data, input) else {
                    continue;
                };
                let ordered = input
                    .row_ids()
                    .into_iter()
                    .filter_map(|id| vals.get(&id.0).cloned());
                let expected = median_by_rank(&numbers(ordered));
                checked += 1;
                if value.as_f64() != expected {
                    bad.push(format!("{}: {value:?} vs {expected:?}", serialize(p)));
                }
            }
            (StepResult::Groups { groups, .. }, Op::Group) => {
                let Some(vals) = values_by_row(data, &trace.per_step[refs[0] - 1]) else {
                    continue;
                };
                for g in groups {
                    let expected = median_by_rank(&numbers(
                        g.members.iter().filter_map(|id| vals.get(&id.0).cloned()),
                    ));
                    checked += 1;
                    if g.aggregate.as_f64() != expected {
                        bad.push(format!(
                            "{} group {}: {:?} vs {expected:?}",
                            serialize(p),
                            g.key,
                            g.aggregate
                        ));
                    }
                }
            }
            _ => {}
        }
    }
    Some((checked, bad))
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let (mut compared, mut empty, mut median_pipes, mut median_checks) = (0, 0, 0, 0);
    let mut mismatches: Vec<String> = Vec::new();
    for (i, name) in BUNDLED.iter().enumerate() {
        let data = bundled(name).expect("bundled dataset");
        let engine = match SqliteEngine::load(&data) {
            Ok(e) => e,
            Err(e) => {
                return check(
                    false,
                    format!("loading {name} into the reference engine: {e}"),
                )
            }
        };
        let mut gen = PipelineGenerator::new(&data, 1000 + i as u64, 6);
        for _ in 0..320 {
            let p = gen.next_pipeline();
            if uses_median(&p) {
                median_pipes += 1;
                if let Some((n, bad)) = median_oracle(&p, &data) {
                    median_checks += n;
                    mismatches.extend(bad);
                }
                continue;
            }
            let mine = match execute(&p, &data) {
                Ok(t) => t.answer,
                Err(ExecError::EmptyInput { .. }) => {
                    empty += 1;
                    continue;
                }
                Err(e) => {
                    mismatches.push(format!("{}: executor error {e}", serialize(&p)));
                    continue;
                }
            };
            match engine.answer(&p) {
                Ok((q, theirs)) if answers_match(&mine, &theirs, q.ordered) => compared += 1,
                Ok((q, theirs)) => mismatches.push(format!(
                    "{}\n  {}\n  {mine:?} vs {theirs:?}",
                    serialize(&p),
                    q.sql
                )),
                Err(e) => mismatches.push(format!("{}: SQL error {e}", serialize(&p))),
            }
        }
    }
    let elapsed = start.elapsed();
    let first = mismatches.first().cloned().unwrap_or_default();
    check(
        compared >= 1000 && mismatches.is_empty() && median_checks > 0 && elapsed < Duration::from_secs(60),
        format!(
            "{compared} compared with SQL, {} mismatches, {empty} skipped for empty input, {median_pipes} median pipelines ({median_checks} rank-oracle checks), {elapsed:.2?} (limit 60s){}",
            mismatches.len(),
            if first.is_empty() { String::new() } else { format!("; first: {first}") }
        ),
    )
}

fn round_trip() -> Outcome {
    let start = Instant::now();
    let datasets: Vec<Dataset> = BUNDLED
        .iter()
        .map(|n| bundled(n).expect("bundled"))
        .collect();
    let mut failures = Vec::new();
    let mut n = 0;
    let mut mutated: HashMap<&str, (usize, usize)> = HashMap::new();
    for (i, data) in datasets.iter().enumerate() {
        let mut gen = PipelineGenerator::new(data, 77 + i as u64, 7);
        for k in 0..2500u64 {
            let p = gen.next_pipeline();
            n += 1;
            let text = serialize(&p);
            match parse(&text) {
                Ok(back) if back == p => {}
                other => failures.push(format!("{text}: {other:?}")),
            }
            for m in Mutation::ALL {
                let Some(bad) = mutate(&p, m, k) else {
                    continue;
                };
                let outcome = parse(&bad);
                let rejected = match m {
                    Mutation::ForwardRef => {
                        matches!(&outcome, Err(e) if e.kind == ParseErrorKind::ForwardRef)
                    }
                    Mutation::DropArg => {
                        matches!(&outcome, Err(e) if e.kind == ParseErrorKind::BadArity)
                    }
                    Mutation::UnknownAttr => {
                        outcome.is_ok_and(|q| !validate(&q, data.schema()).valid)
                    }
                };
                let key = match m {
                    Mutation::ForwardRef => "forward-ref",
                    Mutation::DropArg => "drop-arg",
                    Mutation::UnknownAttr => "unknown-attr",
                };
                let e = mutated.entry(key).or_default();
                e.0 += 1;
                e.1 += usize::from(rejected);
                if !rejected {
                    failures.push(format!("{key} accepted: {bad}"));
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let mut classes: Vec<String> = mutated
        .iter()
        .map(|(k, (t, r))| format!("{k} {r}/{t}"))
        .collect();
    classes.sort();
    check(
        n >= 10_000
            && failures.is_empty()
            && mutated.len() == 3
            && elapsed < Duration::from_secs(30),
        format!(
            "{n} round-trips, mutations rejected: {}, {} failures, {elapsed:.2?} (limit 30s)",
            classes.join(", "),
            failures.len()
        ),
    )
}

fn mapping_fidelity() -> Outcome {
    use ActionFamily::*;
    let table: [(Op, &str, &[ActionFamily]); 7] = [
        (Op::Select, "SELECT['students']", &[Data, Visual]),
        (
            Op::Project,
            "SELECT['students']; PROJECT['dept', #1]",
            &[Visual],
        ),
        (
            Op::Filter,
            "SELECT['students']; FILTER[#1, 'dept' = 'CS']",
            &[Data, Annotation],
        ),
        (
            Op::Superlative,
            "SELECT['students']; SUPERLATIVE[#1, 'id', max]",
            &[Data, Annotation],
        ),
        (
            Op::Aggregate,
            "SELECT['students']; AGGREGATE[count, #1]",
            &[Data, Annotation],
        ),
        (
            Op::Group,
            "SELECT['students']; PROJECT['dept', #1]; GROUP[count, #1, #2]",
            &[Visual, Annotation],
        ),
        (
            Op::Sort,
            "SELECT['students']; SORT[#1, 'id', desc]",
            &[Data],
        ),
    ];
    let data = desk_students();
    let mut wrong = Vec::new();
    for (op, text, expected) in table {
        let p = parse(text).expect("table pipeline parses");
        let t = execute(&p, &data).expect("table pipeline executes");
        let stages = match compile_actions(&p, &t, data.schema()) {
            Ok(s) => s,
            Err(e) => {
                wrong.push(format!("{op}: {e}"));
                continue;
            }
        };
        let mut got: Vec<ActionFamily> = stages
            .iter()
            .filter(|s| s.source_step == p.len())
            .flat_map(|s| s.actions.iter().map(|a| a.family))
            .collect();
        got.sort_by_key(|f| *f as u8);
        got.dedup();
        if got != expected {
            wrong.push(format!("{op}: {got:?} vs {expected:?}"));
        }
    }
    check(
        wrong.is_empty(),
        format!("7 ops, {} cells differ {}", wrong.len(), wrong.join("; ")),
    )
}

fn geometry() -> Outcome {
    let start = Instant::now();
    let canvas = Canvas::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut overlaps = 0;
    let mut outside = 0;
    let mut largest = 0;
    for _ in 0..500 {
        let n = rng.gen_range(1..=200);
        largest = largest.max(n);
        let radii: Vec<f64> = (0..n).map(|_| rng.gen_range(1.0..20.0)).collect();
        let ids: Vec<u32> = (0..n as u32).collect();
        let (pos, r) = layout_pack(&radii, &ids, &canvas);
        for i in 0..n {
            for j in i + 1..n {
                if (pos[i].x - pos[j].x).hypot(pos[i].y - pos[j].y) < r[i] + r[j] - 0.5 {
                    overlaps += 1;
                }
            }
            if pos[i].x - r[i] < -1e-6
                || pos[i].x + r[i] > canvas.width + 1e-6
                || pos[i].y - r[i] < -1e-6
                || pos[i].y + r[i] > canvas.height + 1e-6
            {
                outside += 1;
            }
        }
    }
    let mut grid_outside = 0;
    for n in (1..=400).chain([1000, 5000]) {
        let g = layout_grid(n, &canvas, 10.0);
        for p in &g.positions {
            let inside = p.x - g.radius >= -1e-9
                && p.x + g.radius <= canvas.width + 1e-9
                && p.y - g.radius >= -1e-9
                && p.y + g.radius <= canvas.height + 1e-9;
            grid_outside += usize::from(!inside);
        }
    }
    let mut band_errors = 0;
    for trial in 0..200 {
        let k = rng.gen_range(1..=12);
        let mut next = 0u32;
        let groups: Vec<(String, Vec<u32>)> = (0..k)
            .map(|g| {
                let m = rng.gen_range(1..=30);
                let ids = (next..next + m).collect();
                next += m;
                (format!("g{g}"), ids)
            })
            .collect();
        let axis = if trial % 2 == 0 { Axis::X } else { Axis::Y };
        let g = layout_grouped(&groups, axis, &canvas, 10.0);
        let (bands, lo, hi) = match axis {
            Axis::X => (&g.x_bands, canvas.padding, canvas.width - canvas.padding),
            Axis::Y => (&g.y_bands, canvas.padding, canvas.height - canvas.padding),
        };
        let total: f64 = bands.iter().map(|b| b.end - b.start).sum();
        let contiguous = bands
            .windows(2)
            .all(|w| (w[0].end - w[1].start).abs() <= 1.0);
        let ends =
            (bands[0].start - lo).abs() <= 1.0 && (bands[bands.len() - 1].end - hi).abs() <= 1.0;
        if bands.len() != k || !contiguous || !ends || (total - (hi - lo)).abs() > 1.0 {
            band_errors += 1;
        }
        let band_of: HashMap<u32, usize> = groups
            .iter()
            .enumerate()
            .flat_map(|(i, (_, ids))| ids.iter().map(move |&id| (id, i)))
            .collect();
        for (id, p) in &g.positions {
            let b = &bands[band_of[id]];
            let c = match axis {
                Axis::X => p.x,
                Axis::Y => p.y,
            };
            if c - g.radius < b.start - 1e-6 || c + g.radius > b.end + 1e-6 {
                band_errors += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    check(
        overlaps == 0 && outside == 0 && grid_outside == 0 && band_errors == 0,
        format!(
            "500 packings (n up to {largest}): {overlaps} overlapping pairs, {outside} outside canvas; grids: {grid_outside} units outside; bands: {band_errors} errors; {elapsed:.2?}"
        ),
    )
}

fn eval_sanity() -> Outcome {
    let corpus = eval_corpus();
    if !corpus.errors.is_empty() || corpus.cases.len() != 50 {
        return check(
            false,
            format!(
                "corpus: {} cases, errors {:?}",
                corpus.cases.len(),
                corpus.errors
            ),
        );
    }
    let identity = run_eval(&corpus.cases, &IdentitySystem, EvalOptions::default()).summary;
    let buckets_ok = [
        &identity.easy,
        &identity.medium,
        &identity.hard,
        &identity.extra_hard,
    ]
    .iter()
    .all(|b| b.n > 0 && b.accuracy == 1.0);

    let count_all = |c: &EvalCase| {
        format!(
            "SELECT['{}']; AGGREGATE[count, #1]",
            c.dataset.schema().table(0).name
        )
    };
    let mut corrupt = Vec::new();
    for c in &corpus.cases {
        let gold = execute(
            &parse(&c.record.gold_pipeline).expect("gold parses"),
            &c.dataset,
        )
        .map(|t| t.answer);
        let other = execute(&parse(&count_all(c)).expect("parses"), &c.dataset).map(|t| t.answer);
        if let (Ok(a), Ok(b)) = (gold, other) {
            if !answers_match(&a, &b, false) && corrupt.len() < 10 {
                corrupt.push(c.line);
            }
        }
    }
    let lines: HashMap<String, usize> = corpus
        .cases
        .iter()
        .map(|c| (c.record.question.clone() + &c.record.gold_pipeline, c.line))
        .collect();
    let sut = |r: &EvalRecord, d: &Dataset| {
        let line = lines[&(r.question.clone() + &r.gold_pipeline)];
        Ok::<_, String>(if corrupt.contains(&line) {
            format!(
                "SELECT['{}']; AGGREGATE[count, #1]",
                d.schema().table(0).name
            )
        } else {
            r.gold_pipeline.clone()
        })
    };
    let corrupted = run_eval(&corpus.cases, &sut, EvalOptions::default()).summary;
    check(
        identity.overall.accuracy == 1.0 && buckets_ok && corrupt.len() == 10 && corrupted.overall.accuracy == 0.8,
        format!(
            "identity {:.3} (easy {}/{}, medium {}/{}, hard {}/{}, extra {}/{}); 10 corrupted -> {:.3}",
            identity.overall.accuracy,
            identity.easy.n_correct,
            identity.easy.n,
            identity.medium.n_correct,
            identity.medium.n,
            identity.hard.n_correct,
            identity.hard.n,
            identity.extra_hard.n_correct,
            identity.extra_hard.n,
            corrupted.overall.accuracy
        ),
    )
}

fn linker_contract() -> Outcome {
    let cases = linker_corpus();
    let a = link_agreement(&cases, &LexicalScorer::default(), THETA);
    check(
        cases.len() == 30 && a.exact_top == a.exact_cases && a.pair_rate() >= 0.8,
        format!(
            "exact-name top {}/{}; theta agreement {}/{} pairs ({:.1}%); whole-question sets {}/{}",
            a.exact_top,
            a.exact_cases,
            a.pairs_agree,
            a.pairs,
            100.0 * a.pair_rate(),
            a.questions_exact_set,
            a.questions
        ),
    )
}

fn service_atomicity() -> Outcome {
    let store = SessionStore::default();
    let sid = store.create(desk_students());
    let pid = match store.create_pipeline_text(&sid, RUNNING) {
        Ok(o) => o.pipeline.id,
        Err(e) => return check(false, e.to_string()),
    };
    let snapshot = |store: &SessionStore| {
        let view = serde_json::to_string(&store.get(&sid, &pid).expect("pipeline exists"))
            .expect("serializes");
        let doc: DatamationDoc = store.datamation(&pid).expect("doc exists");
        (view, doc.to_json())
    };
    let step = |t: &str, k: usize| parse_step(t, k).expect("step parses");
    let mut failures_checked = 0;
    let mut broken = Vec::new();

    type Action<'a> = Box<dyn Fn(&SessionStore) -> bool + 'a>;
    // (name, expected to succeed, action returning whether it succeeded)
    let script: Vec<(&str, bool, Action)> = vec![
        (
            "edit literal",
            true,
            Box::new(|s| {
                s.edit_step(&sid, &pid, 3, step("FILTER[#2, 'birth_year' = 1999]", 3))
                    .is_ok()
            }),
        ),
        (
            "edit to table name",
            false,
            Box::new(|s| {
                s.edit_step(&sid, &pid, 2, step("PROJECT['students', #1]", 2))
                    .is_ok()
            }),
        ),
        (
            "edit out of range",
            false,
            Box::new(|s| {
                s.edit_step(&sid, &pid, 9, step("SELECT['students']", 1))
                    .is_ok()
            }),
        ),
        (
            "delete select",
            false,
            Box::new(|s| s.delete_step(&sid, &pid, 1).is_ok()),
        ),
        (
            "delete project",
            false,
            Box::new(|s| s.delete_step(&sid, &pid, 2).is_ok()),
        ),
        (
            "project names",
            true,
            Box::new(|s| {
                s.edit_step(&sid, &pid, 2, step("PROJECT['name', #1]", 2))
                    .is_ok()
            }),
        ),
        (
            "average of names",
            false,
            Box::new(|s| {
                s.edit_step(&sid, &pid, 4, step("AGGREGATE[avg, #3]", 4))
                    .is_ok()
            }),
        ),
        (
            "append unknown column",
            false,
            Box::new(|s| {
                s.append_step(&sid, &pid, step("SORT[#1, 'gpa', asc]", 5))
                    .is_ok()
            }),
        ),
        (
            "replace with garbage",
            false,
            Box::new(|s| s.replace(&sid, &pid, "SELECT[").is_ok()),
        ),
        (
            "replace",
            true,
            Box::new(|s| s.replace(&sid, &pid, RUNNING).is_ok()),
        ),
        (
            "delete filter",
            true,
            Box::new(|s| s.delete_step(&sid, &pid, 3).is_ok()),
        ),
        (
            "delete first step again",
            false,
            Box::new(|s| s.delete_step(&sid, &pid, 1).is_ok()),
        ),
    ];
    for (name, should_succeed, action) in &script {
        let before = snapshot(&store);
        let ok = action(&store);
        if ok != *should_succeed {
            broken.push(format!(
                "{name}: expected success {should_succeed}, got {ok}"
            ));
        }
        if !should_succeed {
            failures_checked += 1;
            if snapshot(&store) != before {
                broken.push(format!("{name}: stored pipeline changed"));
            }
        }
    }
    check(
        broken.is_empty() && failures_checked >= 7,
        format!(
            "{failures_checked} failed edits, {} left a change behind {}",
            broken.len(),
            broken.join("; ")
        ),
    )
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 8] = [
        ("running example golden", running_example_golden),
        ("executor/SQL oracle equivalence", oracle_equivalence),
        ("parser round-trip and mutation rejection", round_trip),
        ("op to action family mapping", mapping_fidelity),
        ("layout geometry", geometry),
        ("evaluation harness sanity", eval_sanity),
        ("linker contract", linker_contract),
        ("session edit atomicity", service_atomicity),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
