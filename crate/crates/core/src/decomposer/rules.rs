//! Pattern rules that turn common question shapes into pipeline texts.
//!
//! | id | question shape                              | pipeline                              |
//! |----|---------------------------------------------|---------------------------------------|
//! | P1 | how many X [where C]                        | SELECT; [PROJECT; FILTER;] AGGREGATE  |
//! | P2 | what is the AGG Y of X [where C]            | SELECT; [FILTER;] PROJECT; AGGREGATE  |
//! | P3 | AGG Y for each / per / by K                 | SELECT; PROJECT...; GROUP             |
//! | P4 | which X has the most / least Y              | SELECT; SUPERLATIVE                   |
//! | P5 | list X sorted / ordered by Y [asc / desc]   | SELECT; SORT                          |
//!
//! A condition C reads `<column words> <comparison word> <literal>`.

use std::sync::OnceLock;

use regex::Regex;

use super::{Candidate, CandidateSet, CandidateSource, DecomposeError};
use crate::linker::{LexicalScorer, RankedSchema};
use crate::model::{AttrKind, ColumnType, Comparator, Schema, Value};
use crate::text::{parse, validate};

/// Comparison words, longest first so multi-word forms win.
const CMP_WORDS: &[(&str, Comparator)] = &[
    ("greater than or equal to", Comparator::Ge),
    ("less than or equal to", Comparator::Le),
    ("no more than", Comparator::Le),
    ("no less than", Comparator::Ge),
    ("greater than", Comparator::Gt),
    ("larger than", Comparator::Gt),
    ("higher than", Comparator::Gt),
    ("more than", Comparator::Gt),
    ("less than", Comparator::Lt),
    ("lower than", Comparator::Lt),
    ("fewer than", Comparator::Lt),
    ("smaller than", Comparator::Lt),
    ("other than", Comparator::Neq),
    ("equal to", Comparator::Eq),
    ("at least", Comparator::Ge),
    ("at most", Comparator::Le),
    ("is not", Comparator::Neq),
    ("not", Comparator::Neq),
    ("equals", Comparator::Eq),
    ("over", Comparator::Gt),
    ("above", Comparator::Gt),
    ("after", Comparator::Gt),
    ("exceeds", Comparator::Gt),
    ("under", Comparator::Lt),
    ("below", Comparator::Lt),
    ("before", Comparator::Lt),
    ("is", Comparator::Eq),
    ("was", Comparator::Eq),
    ("in", Comparator::Eq),
    ("of", Comparator::Eq),
    ("from", Comparator::Eq),
    (">=", Comparator::Ge),
    ("<=", Comparator::Le),
    ("!=", Comparator::Neq),
    ("=", Comparator::Eq),
    (">", Comparator::Gt),
    ("<", Comparator::Lt),
];

const AGG_WORDS: &str = r"average|avg|mean|total|sum|maximum|max|minimum|min|median|highest|lowest|largest|smallest|number of|count of|count";

fn agg_method(word: &str) -> &'static str {
    match word {
        "average" | "avg" | "mean" => "avg",
        "total" | "sum" => "sum",
        "maximum" | "max" | "highest" | "largest" => "max",
        "minimum" | "min" | "lowest" | "smallest" => "min",
        "median" => "median",
        _ => "count",
    }
}

fn superlative_dir(word: &str) -> &'static str {
    match word {
        "least" | "lowest" | "smallest" | "minimum" | "min" | "fewest" | "youngest"
        | "lightest" | "shortest" | "earliest" | "slowest" | "cheapest" => "min",
        _ => "max",
    }
}

struct Patterns {
    p1: Regex,
    p2: Regex,
    p3_count: Regex,
    p3: Regex,
    p4: Regex,
    p4_est: Regex,
    p5: Regex,
    literal: Regex,
}

fn patterns() -> &'static Patterns {
    static P: OnceLock<Patterns> = OnceLock::new();
    P.get_or_init(|| {
        let cond = r"(?:\s+(?P<cond>(?:where|whose|with|that|who|which|were|was|are|is|having|have|had)\s.+))?";
        let re = |s: String| Regex::new(&s).expect("static pattern");
        Patterns {
            p1: re(format!(r"(?i)^how\s+many\s+(?P<x>[\w ]+?){cond}$")),
            p2: re(format!(
                r"(?i)^(?:what\s+(?:is|was|are)\s+)?the\s+(?P<agg>{AGG_WORDS})\s+(?P<y>[\w ]+?)(?:\s+(?:of|for|across|among)\s+(?:all\s+|the\s+)?(?P<x>[\w ]+?))?{cond}$"
            )),
            p3_count: re(
                r"(?i)^how\s+many\s+(?P<x>[\w ]+?)\s+(?:are\s+there\s+)?(?:for\s+each|in\s+each|per|by|grouped\s+by)\s+(?P<k>[\w ]+)$".into(),
            ),
            p3: re(format!(
                r"(?i)^(?:what\s+(?:is|was|are)\s+|show\s+)?(?:the\s+)?(?P<agg>{AGG_WORDS})\s+(?:of\s+)?(?P<y>[\w ]+?)\s+(?:for\s+each|in\s+each|per|by|grouped\s+by)\s+(?P<k>[\w ]+)$"
            )),
            p4: re(
                r"(?i)^(?:which|what)\s+(?P<x>\w+)\s+(?:has|have|had|is|was|with)\s+the\s+(?P<dir>most|least|highest|lowest|largest|smallest|greatest|biggest|maximum|minimum|max|min|fewest|longest|shortest)\s+(?P<y>[\w ]+)$".into(),
            ),
            p4_est: re(
                r"(?i)^(?:which|what)\s+(?P<x>\w+)\s+(?:is|was|are)\s+the\s+(?P<y>\w+est)$".into(),
            ),
            p5: re(
                r"(?i)^(?:list|show|sort|order|rank|display)\s+(?:all\s+|the\s+)*(?P<x>[\w ]+?)\s+(?:(?:sorted|ordered|ranked)\s+)?by\s+(?:the\s+)?(?P<y>[\w ]+?)(?:\s+(?:in\s+)?(?P<dir>asc|ascending|desc|descending|increasing|decreasing)(?:\s+order)?)?$".into(),
            ),
            literal: Regex::new(
                r#"(?i)(?P<lit>'(?:[^']|'')*'|"[^"]*"|\d{4}-\d{2}-\d{2}|-?\d+(?:\.\d+)?|[\w-]+)$"#,
            )
            .expect("static pattern"),
        }
    })
}

/// Trailing filler that never changes the meaning of a count or list.
const FILLER: [&str; 5] = [
    " are there in total",
    " are there",
    " is there",
    " in total",
    " in all",
];

fn clean(question: &str) -> String {
    let q = question.trim().trim_end_matches(['?', '.', '!']).trim();
    let mut q = q.split_whitespace().collect::<Vec<_>>().join(" ");
    if let Some(f) = FILLER.iter().find(|f| q.to_lowercase().ends_with(*f)) {
        q.truncate(q.len() - f.len());
    }
    q
}

fn quote(name: &str) -> String {
    format!("'{}'", name.replace('\'', "''"))
}

fn lit_text(v: &Value) -> String {
    match v {
        Value::Text(s) => quote(s),
        other => other.to_string(),
    }
}

/// Parsed `<column words> <cmp> <literal>`.
struct Cond {
    phrase: String,
    cmp: Comparator,
    literal: Value,
}

fn parse_condition(text: &str) -> Option<Cond> {
    let p = patterns();
    let caps = p.literal.captures(text)?;
    let lit_m = caps.name("lit")?;
    let raw = lit_m.as_str();
    let literal = if (raw.starts_with('\'') && raw.ends_with('\'') && raw.len() >= 2)
        || (raw.starts_with('"') && raw.ends_with('"') && raw.len() >= 2)
    {
        Value::Text(raw[1..raw.len() - 1].replace("''", "'"))
    } else if let Ok(d) = raw.parse() {
        if raw.len() == 10 {
            Value::Date(d)
        } else {
            Value::Number(raw.parse().ok()?)
        }
    } else if let Ok(n) = raw.parse::<f64>() {
        Value::Number(n)
    } else {
        Value::Text(raw.to_string())
    };
    let head = text[..lit_m.start()].trim_end();
    let lower = head.to_lowercase();
    for (word, cmp) in CMP_WORDS {
        let matches_end = lower.ends_with(word)
            && (lower.len() == word.len()
                || !word.chars().next().is_some_and(char::is_alphanumeric)
                || lower[..lower.len() - word.len()].ends_with(' '));
        if matches_end {
            let mut phrase = head[..head.len() - word.len()].trim();
            // "is at least": the copula belongs to neither side
            for copula in [" is", " are", " was", " were"] {
                if phrase.to_lowercase().ends_with(copula) {
                    phrase = phrase[..phrase.len() - copula.len()].trim_end();
                    break;
                }
            }
            let phrase = phrase.to_string();
            return Some(Cond {
                phrase,
                cmp: *cmp,
                literal,
            });
        }
    }
    None
}

/// Fills pattern slots with schema attributes.
struct Filler<'a> {
    ranked: &'a RankedSchema,
    schema: &'a Schema,
    scorer: LexicalScorer,
}

impl Filler<'_> {
    /// Table for the subject phrase: best phrase score, ties by rank order.
    fn table(&self, phrase: Option<&str>) -> Option<(String, f64)> {
        let mut best: Option<(String, f64)> = None;
        for s in self.ranked.tables() {
            let score = phrase
                .map(|p| self.scorer.phrase_score(s.attribute.table.as_str(), p))
                .unwrap_or(0.0);
            if best.as_ref().is_none_or(|(_, b)| score > *b) {
                best = Some((s.attribute.table.as_str().to_string(), score));
            }
        }
        best
    }

    /// Up to `n` columns of `table` for a phrase, filtered by type. Ranked by
    /// phrase score; ties (and the zero-score fallback) follow rank order.
    fn columns(
        &self,
        table: &str,
        phrase: &str,
        accept: impl Fn(ColumnType) -> bool,
        n: usize,
    ) -> Vec<(String, f64)> {
        let t = self.schema.table_index(table).expect("ranked tables exist");
        let mut found: Vec<(String, f64)> = self
            .ranked
            .columns()
            .filter(|s| s.attribute.table.as_str() == self.schema.table(t).name)
            .filter_map(|s| {
                let name = s.attribute.column.as_deref()?;
                let kind = self.schema.column_type(&s.attribute)?;
                accept(kind).then(|| (name.to_string(), self.scorer.phrase_score(name, phrase)))
            })
            .collect();
        found.sort_by(|a, b| b.1.total_cmp(&a.1));
        if found.first().is_some_and(|(_, s)| *s > 0.0) {
            found.retain(|(_, s)| *s > 0.0);
        } else {
            // Nothing matched the words: fall back to ranking, low confidence.
            for f in &mut found {
                f.1 = 0.05;
            }
        }
        found.truncate(n);
        found
    }

    /// Candidate conditions as (column, condition text, score).
    fn condition(&self, table: &str, text: &str) -> Vec<(String, String, f64)> {
        let Some(c) = parse_condition(text) else {
            return Vec::new();
        };
        let literal_fits = |kind: ColumnType| {
            (!c.cmp.is_ordering() || kind.is_ordered())
                && crate::plan::coerce_literal(&c.literal, kind).is_some()
                && !matches!(
                    (&c.literal, kind),
                    (Value::Number(_), ColumnType::Categorical)
                        | (Value::Text(_), ColumnType::Numerical)
                )
        };
        self.columns(table, &c.phrase, literal_fits, 2)
            .into_iter()
            .map(|(col, s)| {
                let text = format!(
                    "{} {} {}",
                    quote(&col),
                    c.cmp.symbol(),
                    lit_text(&c.literal)
                );
                (col, text, s)
            })
            .collect()
    }
}

fn numeric_only(method: &str) -> bool {
    matches!(method, "avg" | "sum" | "median")
}

fn agg_accepts(method: &str) -> impl Fn(ColumnType) -> bool + '_ {
    move |k| match method {
        "count" => true,
        m if numeric_only(m) => k == ColumnType::Numerical,
        _ => k.is_ordered(),
    }
}

/// Matches the question against P1..P5 and instantiates valid candidates.
pub fn decompose_rules(
    question: &str,
    ranked: &RankedSchema,
    schema: &Schema,
) -> Result<CandidateSet, DecomposeError> {
    if !ranked
        .scores
        .iter()
        .any(|s| s.attribute.kind == AttrKind::Table)
    {
        return Err(DecomposeError::NoPatternMatch(question.to_string()));
    }
    let q = clean(question);
    let p = patterns();
    let f = Filler {
        ranked,
        schema,
        scorer: LexicalScorer::default(),
    };
    let mut raw: Vec<(String, f64)> = Vec::new();
    let mut matched = false;

    if let Some(c) = p.p3_count.captures(&q) {
        matched = true;
        let (table, ts) = f.table(Some(&c["x"])).expect("has table");
        for (k, ks) in f.columns(&table, &c["k"], |_| true, 2) {
            raw.push((
                format!(
                    "SELECT[{}]; PROJECT[{}, #1]; GROUP[count, #1, #2]",
                    quote(&table),
                    quote(&k)
                ),
                0.9 * (0.5 + 0.5 * ts.max(ks)) * ks.max(0.05),
            ));
        }
    }
    if let Some(c) = p.p3.captures(&q) {
        matched = true;
        let method = agg_method(&c["agg"].to_lowercase());
        let (table, _) = f.table(c.name("y").map(|m| m.as_str())).expect("has table");
        for (k, ks) in f.columns(&table, &c["k"], |_| true, 2) {
            if method == "count" {
                raw.push((
                    format!(
                        "SELECT[{}]; PROJECT[{}, #1]; GROUP[count, #1, #2]",
                        quote(&table),
                        quote(&k)
                    ),
                    0.85 * ks,
                ));
                continue;
            }
            for (y, ys) in f.columns(&table, &c["y"], agg_accepts(method), 2) {
                raw.push((
                    format!(
                        "SELECT[{}]; PROJECT[{}, #1]; PROJECT[{}, #1]; GROUP[{method}, #2, #3]",
                        quote(&table),
                        quote(&y),
                        quote(&k)
                    ),
                    0.9 * ys * ks,
                ));
            }
        }
    }
    if raw.is_empty() {
        if let Some(c) = p.p1.captures(&q) {
            matched = true;
            let (table, ts) = f.table(Some(&c["x"])).expect("has table");
            let base = 0.8 * (0.5 + 0.5 * ts);
            match c.name("cond") {
                None => raw.push((
                    format!("SELECT[{}]; AGGREGATE[count, #1]", quote(&table)),
                    base,
                )),
                Some(cond) => {
                    for (col, text, s) in f.condition(&table, cond.as_str()) {
                        raw.push((
                            format!(
                                "SELECT[{}]; PROJECT[{}, #1]; FILTER[#2, {text}]; AGGREGATE[count, #3]",
                                quote(&table),
                                quote(&col)
                            ),
                            base * s,
                        ));
                    }
                }
            }
        }
    }
    if let Some(c) = p.p2.captures(&q) {
        matched = true;
        let method = agg_method(&c["agg"].to_lowercase());
        let (table, _) = f
            .table(c.name("x").map(|m| m.as_str()).or(Some(&c["y"])))
            .expect("has table");
        let filters: Vec<(Option<String>, f64)> = match c.name("cond") {
            None => vec![(None, 1.0)],
            Some(cond) => f
                .condition(&table, cond.as_str())
                .into_iter()
                .map(|(_, t, s)| (Some(t), s))
                .collect(),
        };
        for (y, ys) in f.columns(&table, &c["y"], agg_accepts(method), 2) {
            for (filter, fs) in &filters {
                let text = match filter {
                    None => format!(
                        "SELECT[{}]; PROJECT[{}, #1]; AGGREGATE[{method}, #2]",
                        quote(&table),
                        quote(&y)
                    ),
                    Some(cond) => format!(
                        "SELECT[{}]; FILTER[#1, {cond}]; PROJECT[{}, #2]; AGGREGATE[{method}, #3]",
                        quote(&table),
                        quote(&y)
                    ),
                };
                raw.push((text, 0.8 * ys * fs));
            }
        }
    }
    let superlative =
        p.p4.captures(&q)
            .map(|c| {
                (
                    c["x"].to_string(),
                    c["y"].to_string(),
                    c["dir"].to_lowercase(),
                )
            })
            .or_else(|| {
                p.p4_est.captures(&q).map(|c| {
                    let w = c["y"].to_lowercase();
                    (c["x"].to_string(), w.clone(), w)
                })
            });
    if let Some((x, y, dir)) = superlative {
        matched = true;
        let (table, _) = f.table(Some(&x)).expect("has table");
        let ext = superlative_dir(&dir);
        for (col, s) in f.columns(&table, &y, ColumnType::is_ordered, 2) {
            raw.push((
                format!(
                    "SELECT[{}]; SUPERLATIVE[#1, {}, {ext}]",
                    quote(&table),
                    quote(&col)
                ),
                0.8 * s,
            ));
        }
    }
    if let Some(c) = p.p5.captures(&q) {
        matched = true;
        let (table, _) = f.table(Some(&c["x"])).expect("has table");
        let dir = match c.name("dir").map(|m| m.as_str().to_lowercase()).as_deref() {
            Some("desc" | "descending" | "decreasing") => "desc",
            _ => "asc",
        };
        for (col, s) in f.columns(&table, &c["y"], |_| true, 2) {
            raw.push((
                format!(
                    "SELECT[{}]; SORT[#1, {}, {dir}]",
                    quote(&table),
                    quote(&col)
                ),
                0.8 * s,
            ));
        }
    }
    if !matched {
        return Err(DecomposeError::NoPatternMatch(question.to_string()));
    }

    let mut candidates: Vec<Candidate> = Vec::new();
    for (text, score) in raw {
        if candidates.iter().any(|c| c.text == text) {
            continue;
        }
        let ok = parse(&text)
            .map(|p| validate(&p, schema).valid)
            .unwrap_or(false);
        if ok {
            candidates.push(Candidate { text, score });
        }
    }
    if candidates.is_empty() {
        return Err(DecomposeError::NoPatternMatch(question.to_string()));
    }
    candidates.sort_by(|a, b| b.score.total_cmp(&a.score));
    candidates.truncate(super::DEFAULT_BEAM);
    Ok(CandidateSet {
        candidates,
        source: CandidateSource::Rules,
    })
}

/// Question templates instantiated over the schema's top-ranked attributes.
pub fn suggest_questions(ranked: &RankedSchema, schema: &Schema) -> Vec<String> {
    let Some(table) = ranked
        .tables()
        .next()
        .map(|s| s.attribute.table.as_str().to_string())
    else {
        return Vec::new();
    };
    let cols = |pred: &dyn Fn(ColumnType) -> bool| -> Vec<String> {
        ranked
            .columns()
            .filter(|s| s.attribute.table.as_str() == table)
            .filter(|s| schema.column_type(&s.attribute).is_some_and(pred))
            .filter_map(|s| s.attribute.column.as_deref().map(str::to_string))
            .collect()
    };
    let numerical = cols(&|k| k == ColumnType::Numerical);
    let ordered = cols(&ColumnType::is_ordered);
    let categorical = cols(&|k| k == ColumnType::Categorical);
    let human = |c: &str| c.replace('_', " ");
    let singular = crate::linker::stem(&table.to_lowercase());

    let mut out = vec![format!("how many {table}?")];
    if let Some(n) = numerical.first() {
        out.push(format!("what is the average {} of {table}?", human(n)));
    }
    if let Some(k) = categorical
        .iter()
        .find(|c| !c.ends_with("id") && !c.ends_with("name"))
    {
        out.push(format!("how many {table} per {}?", human(k)));
    }
    if let Some(o) = ordered.first() {
        out.push(format!("which {singular} has the highest {}?", human(o)));
    }
    if let Some(o) = ordered.get(1).or(ordered.first()) {
        out.push(format!("list {table} sorted by {} descending", human(o)));
    }
    out.retain(|q| decompose_rules(q, ranked, schema).is_ok());
    out.truncate(5);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conditions_split_into_parts() {
        let c = parse_condition("were born in 2000").unwrap();
        assert_eq!(c.phrase, "were born");
        assert_eq!(c.cmp, Comparator::Eq);
        assert_eq!(c.literal, Value::Number(2000.0));

        let c = parse_condition("whose gpa is at least 3.5").unwrap();
        assert_eq!(c.cmp, Comparator::Ge);
        assert_eq!(c.phrase, "whose gpa");

        let c = parse_condition("whose dept is not 'CS'").unwrap();
        assert_eq!(c.cmp, Comparator::Neq);
        assert_eq!(c.literal, Value::Text("CS".into()));

        let c = parse_condition("with flight_date after 2022-06-01").unwrap();
        assert_eq!(c.cmp, Comparator::Gt);
        assert!(matches!(c.literal, Value::Date(_)));
    }

    #[test]
    fn comparison_words_need_a_word_boundary() {
        // "origin" ends in "in" but is not the comparison word
        let c = parse_condition("whose origin is usa").unwrap();
        assert_eq!(c.phrase, "whose origin");
    }
}
