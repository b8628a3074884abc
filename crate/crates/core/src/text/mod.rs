//! Textual pipeline grammar.
//!
//! ```text
//! pipeline := step (";" step)*
//! step     := OPNAME "[" arg ("," arg)* "]"
//! arg      := "'" name "'" | "#" int | operand CMP literal
//!           | method | "asc" | "desc" | "max" | "min"
//! operand  := "'" name "'" | "#" int
//! literal  := "'" text "'" | number | YYYY-MM-DD
//! CMP      := "=" | "!=" | ">" | "<" | ">=" | "<="
//! ```
//!
//! Quotes inside names are doubled (`'O''Hare'`). References are 1-based.

mod parse;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use crate::plan::{
    validate, validate_steps, validate_with, ValidationReport, ValidatorOptions, Violation,
};
pub use parse::{parse, parse_step, ParseError, ParseErrorKind};

use crate::model::{Arg, Operand, QdmrPipeline, QdmrStep, Schema, Value};

fn quote(s: &str, out: &mut String) {
    out.push('\'');
    out.push_str(&s.replace('\'', "''"));
    out.push('\'');
}

fn literal(v: &Value, out: &mut String) {
    match v {
        Value::Text(s) => quote(s, out),
        Value::Number(n) => write!(out, "{n}").expect("string write"),
        Value::Date(d) => write!(out, "{d}").expect("string write"),
        Value::Null => out.push_str("null"),
    }
}

pub fn serialize_step(step: &QdmrStep) -> String {
    let mut out = String::new();
    out.push_str(step.op.name());
    out.push('[');
    for (i, a) in step.args.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        match a {
            Arg::Attr(n) => quote(n, &mut out),
            Arg::Ref(k) => write!(out, "#{k}").expect("string write"),
            Arg::Cond(c) => {
                match &c.operand {
                    Operand::Attr(n) => quote(n, &mut out),
                    Operand::Ref(k) => write!(out, "#{k}").expect("string write"),
                }
                write!(out, " {} ", c.cmp.symbol()).expect("string write");
                literal(&c.literal, &mut out);
            }
            Arg::Method(m) => out.push_str(m.name()),
            Arg::Dir(d) => out.push_str(d.name()),
            Arg::Super(e) => out.push_str(e.name()),
        }
    }
    out.push(']');
    out
}

/// Canonical text: `"; "` between steps, `", "` between arguments.
pub fn serialize(pipeline: &QdmrPipeline) -> String {
    pipeline
        .steps()
        .iter()
        .map(serialize_step)
        .collect::<Vec<_>>()
        .join("; ")
}

/// Why one beam candidate was rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateFailure {
    pub index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error, Serialize, Deserialize)]
#[error("no valid candidate among {} ({})", failures.len(), failures.iter().map(|f| format!("#{}: {}", f.index, f.reason)).collect::<Vec<_>>().join("; "))]
pub struct NoValidCandidate {
    pub failures: Vec<CandidateFailure>,
}

/// Returns the first candidate (0-based index) that parses and validates.
pub fn first_valid<S: AsRef<str>>(
    candidates: &[S],
    schema: &Schema,
) -> Result<(usize, QdmrPipeline), NoValidCandidate> {
    let mut failures = Vec::new();
    for (index, text) in candidates.iter().enumerate() {
        match parse(text.as_ref()) {
            Err(e) => failures.push(CandidateFailure {
                index,
                reason: format!("parse error {e}"),
            }),
            Ok(p) => {
                let report = validate(&p, schema);
                if report.valid {
                    return Ok((index, p));
                }
                failures.push(CandidateFailure {
                    index,
                    reason: report.to_string(),
                });
            }
        }
    }
    Err(NoValidCandidate { failures })
}
