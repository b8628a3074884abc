//! Schema serialization and question-to-schema linking.
//!
//! [`link`] scores every attribute of a schema against a question with a
//! pluggable [`Scorer`], classifies it against a threshold and returns the
//! attributes ranked by score. The default [`LexicalScorer`] is deterministic
//! and works offline; a learned scorer can implement the same trait.

use std::collections::HashMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::model::{normalize_ident, AttrKind, AttributeRef, ColumnType, Schema};

/// Relevance threshold: an attribute is relevant when `p_rel >= THETA`.
pub const THETA: f64 = 0.5;

const BUNDLED_SYNONYMS: &str = include_str!("../resources/synonyms.tsv");

/// The schema as a token sequence with the position of every attribute name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SerializedSchema {
    pub text: String,
    /// Character (not byte) ranges into `text`, one per attribute.
    pub spans: Vec<(AttributeRef, Range<usize>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkScore {
    pub attribute: AttributeRef,
    pub p_rel: f64,
    pub relevant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedSchema {
    pub scores: Vec<LinkScore>,
    pub serialized: SerializedSchema,
}

impl RankedSchema {
    pub fn relevant(&self) -> impl Iterator<Item = &LinkScore> {
        self.scores.iter().filter(|s| s.relevant)
    }

    /// Columns in rank order, optionally restricted to a type.
    pub fn columns(&self) -> impl Iterator<Item = &LinkScore> {
        self.scores
            .iter()
            .filter(|s| s.attribute.kind == AttrKind::Column)
    }

    pub fn tables(&self) -> impl Iterator<Item = &LinkScore> {
        self.scores
            .iter()
            .filter(|s| s.attribute.kind == AttrKind::Table)
    }

    pub fn score_of(&self, attr: &AttributeRef) -> Option<f64> {
        self.scores
            .iter()
            .find(|s| &s.attribute == attr)
            .map(|s| s.p_rel)
    }
}

struct Emitter {
    text: String,
    chars: usize,
    spans: Vec<(AttributeRef, Range<usize>)>,
}

impl Emitter {
    fn push(&mut self, s: &str) {
        self.text.push_str(s);
        self.chars += s.chars().count();
    }

    fn sep(&mut self) {
        if !self.text.is_empty() {
            self.push(" | ");
        }
    }

    fn attr(&mut self, schema: &Schema, attr: &AttributeRef, qualify: bool) {
        self.sep();
        match attr.kind {
            AttrKind::Table => {
                self.push("<T> ");
                let start = self.chars;
                self.push(attr.table.as_str());
                self.spans.push((attr.clone(), start..self.chars));
            }
            AttrKind::Column => {
                self.push("<C> ");
                if qualify {
                    self.push(attr.table.as_str());
                    self.push(".");
                }
                let start = self.chars;
                self.push(attr.column.as_deref().unwrap_or_default());
                self.spans.push((attr.clone(), start..self.chars));
                let kind = schema.column_type(attr).map(ColumnType::tag).unwrap_or("?");
                self.push(":");
                self.push(kind);
            }
        }
    }
}

fn serialize_attrs<'a>(
    schema: &Schema,
    attrs: impl IntoIterator<Item = &'a AttributeRef>,
    qualify: bool,
) -> SerializedSchema {
    let mut e = Emitter {
        text: String::new(),
        chars: 0,
        spans: Vec::new(),
    };
    for a in attrs {
        e.attr(schema, a, qualify);
    }
    SerializedSchema {
        text: e.text,
        spans: e.spans,
    }
}

/// Declaration-order serialization: `<T> students | <C> id:num | ...`.
pub fn serialize_schema(schema: &Schema) -> SerializedSchema {
    serialize_attrs(schema, &schema.attributes(), false)
}

/// Produces one relevance score in `[0, 1]` per attribute, aligned with
/// [`Schema::attributes`].
pub trait Scorer: Send + Sync {
    fn score(&self, question: &str, schema: &Schema) -> Vec<f64>;
}

/// Word to canonical stem table.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Synonyms(HashMap<String, String>);

impl Synonyms {
    /// Parses `term<TAB>stem` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut map = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim_end();
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split('\t');
            match (parts.next(), parts.next(), parts.next()) {
                (Some(t), Some(s), None) if !t.trim().is_empty() && !s.trim().is_empty() => {
                    map.insert(t.trim().to_lowercase(), s.trim().to_lowercase());
                }
                _ => return Err(format!("line {}: expected 'term<TAB>stem'", i + 1)),
            }
        }
        Ok(Synonyms(map))
    }

    pub fn bundled() -> Self {
        Self::parse(BUNDLED_SYNONYMS).expect("bundled synonym table parses")
    }

    pub fn canonical<'a>(&'a self, word: &'a str) -> &'a str {
        self.0.get(word).map(String::as_str).unwrap_or(word)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Crude suffix stripper; good enough for plural/tense variation of names.
pub fn stem(word: &str) -> String {
    let w = word;
    let n = w.len();
    if n > 4 && w.ends_with("ies") {
        format!("{}y", &w[..n - 3])
    } else if n > 5 && w.ends_with("ing") {
        w[..n - 3].to_string()
    } else if n > 4 && (w.ends_with("ed") || w.ends_with("sses") || w.ends_with("xes")) {
        w[..n - 2].to_string()
    } else if n > 3 && w.ends_with('s') && !w.ends_with("ss") {
        w[..n - 1].to_string()
    } else {
        w.to_string()
    }
}

/// Lowercased alphanumeric words of a question.
pub fn question_tokens(question: &str) -> Vec<String> {
    question
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn name_tokens(name: &str) -> Vec<String> {
    normalize_ident(name)
        .split(|c: char| c == '_' || c == '.' || !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Lexical relevance scorer.
///
/// Each name token scores the best match among question tokens: exact 1.0,
/// synonym hit 0.9, stem or prefix match 0.8, otherwise the normalized edit
/// similarity when it reaches 0.75. An attribute's score is the mean over its
/// name tokens; a table also inherits half of its best column score.
#[derive(Debug, Clone)]
pub struct LexicalScorer {
    pub synonyms: Synonyms,
}

impl Default for LexicalScorer {
    fn default() -> Self {
        LexicalScorer {
            synonyms: Synonyms::bundled(),
        }
    }
}

impl LexicalScorer {
    pub fn new(synonyms: Synonyms) -> Self {
        LexicalScorer { synonyms }
    }

    fn token_score(&self, name_tok: &str, q: &str) -> f64 {
        if q == name_tok {
            return 1.0;
        }
        let (cq, ct) = (
            self.synonyms.canonical(q),
            self.synonyms.canonical(name_tok),
        );
        if cq == name_tok || cq == ct || q == ct {
            return 0.9;
        }
        let (sq, st) = (stem(q), stem(name_tok));
        let prefix = |a: &str, b: &str| a.len() >= 3 && b.starts_with(a);
        if sq == st || prefix(q, name_tok) || prefix(name_tok, q) {
            return 0.8;
        }
        let sim = strsim::normalized_levenshtein(q, name_tok);
        if sim >= 0.75 {
            sim
        } else {
            0.0
        }
    }

    /// Score of one attribute name against free text.
    pub fn phrase_score(&self, name: &str, phrase: &str) -> f64 {
        self.name_score(name, &question_tokens(phrase))
    }

    fn name_score(&self, name: &str, question: &[String]) -> f64 {
        let toks = name_tokens(name);
        if toks.is_empty() {
            return 0.0;
        }
        let total: f64 = toks
            .iter()
            .map(|t| {
                question
                    .iter()
                    .map(|q| self.token_score(t, q))
                    .fold(0.0, f64::max)
            })
            .sum();
        total / toks.len() as f64
    }
}

impl Scorer for LexicalScorer {
    fn score(&self, question: &str, schema: &Schema) -> Vec<f64> {
        let q = question_tokens(question);
        let attrs = schema.attributes();
        let mut scores: Vec<f64> = attrs
            .iter()
            .map(|a| self.name_score(a.name(), &q))
            .collect();
        for (i, a) in attrs.iter().enumerate() {
            if a.kind == AttrKind::Table {
                let best_col = attrs
                    .iter()
                    .zip(&scores)
                    .filter(|(c, _)| c.kind == AttrKind::Column && c.table == a.table)
                    .map(|(_, s)| *s)
                    .fold(0.0, f64::max);
                scores[i] = scores[i].max(0.5 * best_col);
            }
        }
        scores
    }
}

/// Scores, classifies and ranks the schema's attributes for a question.
pub fn link(question: &str, schema: &Schema, scorer: &dyn Scorer) -> RankedSchema {
    link_with_threshold(question, schema, scorer, THETA)
}

pub fn link_with_threshold(
    question: &str,
    schema: &Schema,
    scorer: &dyn Scorer,
    theta: f64,
) -> RankedSchema {
    let attrs = schema.attributes();
    let raw = scorer.score(question, schema);
    let mut scores: Vec<LinkScore> = attrs
        .into_iter()
        .enumerate()
        .map(|(i, attribute)| {
            let p = raw.get(i).copied().unwrap_or(0.0);
            let p_rel = if p.is_nan() { 0.0 } else { p.clamp(0.0, 1.0) };
            LinkScore {
                attribute,
                p_rel,
                relevant: p_rel >= theta,
            }
        })
        .collect();
    // stable: ties keep declaration order
    scores.sort_by(|a, b| b.p_rel.total_cmp(&a.p_rel));
    let qualify = schema.tables().len() > 1;
    let serialized = serialize_attrs(schema, scores.iter().map(|s| &s.attribute), qualify);
    RankedSchema { scores, serialized }
}
