use serde::{Deserialize, Serialize};

use crate::model::{
    AggMethod, Arg, ArgSlot, Comparator, Condition, Extremum, Op, Operand, QdmrPipeline, QdmrStep,
    SortDir, Temporal, Value,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParseErrorKind {
    Lexical,
    UnknownOp,
    BadArity,
    BadArgKind,
    ForwardRef,
    DanglingRef,
    /// The first step is not SELECT.
    SelectFirst,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("{line}:{col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub kind: ParseErrorKind,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Quoted(String),
    Ref(usize),
    Number(f64),
    Date(Temporal),
    Cmp(Comparator),
    LBracket,
    RBracket,
    Comma,
    Semi,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    src: &'a str,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            chars: src.char_indices().peekable(),
            src,
            line: 1,
            col: 1,
        }
    }

    fn bump(&mut self) -> Option<(usize, char)> {
        let next = self.chars.next()?;
        if next.1 == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(next)
    }

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().map(|&(_, c)| c)
    }

    fn err(line: usize, col: usize, message: impl Into<String>) -> ParseError {
        ParseError {
            line,
            col,
            kind: ParseErrorKind::Lexical,
            message: message.into(),
        }
    }

    fn tokens(mut self) -> Result<Vec<Spanned>, ParseError> {
        let mut out = Vec::new();
        while let Some(c) = self.peek() {
            let (line, col) = (self.line, self.col);
            if c.is_whitespace() {
                self.bump();
                continue;
            }
            let tok = match c {
                '[' => {
                    self.bump();
                    Tok::LBracket
                }
                ']' => {
                    self.bump();
                    Tok::RBracket
                }
                ',' => {
                    self.bump();
                    Tok::Comma
                }
                ';' => {
                    self.bump();
                    Tok::Semi
                }
                '\'' => {
                    self.bump();
                    let mut s = String::new();
                    loop {
                        match self.bump() {
                            Some((_, '\'')) => {
                                if self.peek() == Some('\'') {
                                    self.bump();
                                    s.push('\'');
                                } else {
                                    break;
                                }
                            }
                            Some((_, ch)) => s.push(ch),
                            None => return Err(Self::err(line, col, "unterminated quoted name")),
                        }
                    }
                    Tok::Quoted(s)
                }
                '#' => {
                    self.bump();
                    let start = self.chars.peek().map(|&(i, _)| i).unwrap_or(self.src.len());
                    while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                        self.bump();
                    }
                    let end = self.chars.peek().map(|&(i, _)| i).unwrap_or(self.src.len());
                    let digits = &self.src[start..end];
                    let k = digits
                        .parse()
                        .map_err(|_| Self::err(line, col, "expected a step number after '#'"))?;
                    Tok::Ref(k)
                }
                '=' | '!' | '<' | '>' => {
                    self.bump();
                    let mut sym = c.to_string();
                    if self.peek() == Some('=') {
                        self.bump();
                        sym.push('=');
                    }
                    Tok::Cmp(Comparator::from_symbol(&sym).ok_or_else(|| {
                        Self::err(line, col, format!("unknown comparator '{sym}'"))
                    })?)
                }
                c if c.is_ascii_digit() || c == '-' || c == '.' => {
                    let start = self.chars.peek().map(|&(i, _)| i).expect("peeked");
                    self.bump();
                    while self.peek().is_some_and(|c| {
                        c.is_ascii_digit() || matches!(c, '.' | '-' | 'e' | 'E' | '+')
                    }) {
                        self.bump();
                    }
                    let end = self.chars.peek().map(|&(i, _)| i).unwrap_or(self.src.len());
                    let text = &self.src[start..end];
                    if text.len() == 10 && text.as_bytes()[4] == b'-' {
                        Tok::Date(text.parse().map_err(|_| {
                            Self::err(line, col, format!("invalid date literal '{text}'"))
                        })?)
                    } else {
                        let n: f64 = text.parse().map_err(|_| {
                            Self::err(line, col, format!("invalid number literal '{text}'"))
                        })?;
                        if !n.is_finite() {
                            return Err(Self::err(line, col, "number literal must be finite"));
                        }
                        Tok::Number(n)
                    }
                }
                c if c.is_alphabetic() || c == '_' => {
                    let mut w = String::new();
                    while let Some(ch) = self.peek().filter(|c| c.is_alphanumeric() || *c == '_') {
                        w.push(ch);
                        self.bump();
                    }
                    Tok::Word(w)
                }
                other => {
                    return Err(Self::err(
                        line,
                        col,
                        format!("unexpected character '{other}'"),
                    ))
                }
            };
            out.push(Spanned { tok, line, col });
        }
        Ok(out)
    }
}

enum RawArg {
    Quoted(String),
    Ref(usize),
    Word(String),
    Cond(Condition),
    Literal,
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    end: (usize, usize),
}

impl Parser {
    fn peek(&self) -> Option<&Spanned> {
        self.toks.get(self.pos)
    }

    fn here(&self) -> (usize, usize) {
        self.peek().map(|s| (s.line, s.col)).unwrap_or(self.end)
    }

    fn error(
        &self,
        at: (usize, usize),
        kind: ParseErrorKind,
        message: impl Into<String>,
    ) -> ParseError {
        ParseError {
            line: at.0,
            col: at.1,
            kind,
            message: message.into(),
        }
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ParseError> {
        match self.peek() {
            Some(s) if s.tok == want => {
                self.pos += 1;
                Ok(())
            }
            Some(s) => Err(self.error(
                (s.line, s.col),
                ParseErrorKind::Lexical,
                format!("expected {what}, found {:?}", s.tok),
            )),
            None => Err(self.error(
                self.end,
                ParseErrorKind::Lexical,
                format!("expected {what}"),
            )),
        }
    }

    fn literal(&mut self) -> Result<Value, ParseError> {
        let at = self.here();
        let v = match self.peek().map(|s| &s.tok) {
            Some(Tok::Quoted(s)) => Value::Text(s.clone()),
            Some(Tok::Number(n)) => Value::Number(*n),
            Some(Tok::Date(d)) => Value::Date(*d),
            _ => {
                return Err(self.error(
                    at,
                    ParseErrorKind::Lexical,
                    "expected a literal after the comparator",
                ))
            }
        };
        self.pos += 1;
        Ok(v)
    }

    fn arg(&mut self, step_no: usize) -> Result<((usize, usize), RawArg), ParseError> {
        let at = self.here();
        let Some(s) = self.peek().cloned() else {
            return Err(self.error(self.end, ParseErrorKind::Lexical, "expected an argument"));
        };
        self.pos += 1;
        let operand = match s.tok {
            Tok::Quoted(name) => Operand::Attr(name),
            Tok::Ref(k) => {
                if k == 0 {
                    return Err(self.error(
                        at,
                        ParseErrorKind::DanglingRef,
                        "#0 is not a step; references are 1-based",
                    ));
                }
                if k >= step_no {
                    return Err(self.error(
                        at,
                        ParseErrorKind::ForwardRef,
                        format!("step {step_no} refers to #{k}, which is not an earlier step"),
                    ));
                }
                Operand::Ref(k)
            }
            Tok::Word(w) => return Ok((at, RawArg::Word(w))),
            Tok::Number(_) | Tok::Date(_) => return Ok((at, RawArg::Literal)),
            other => {
                return Err(self.error(
                    at,
                    ParseErrorKind::Lexical,
                    format!("unexpected {other:?}"),
                ))
            }
        };
        if let Some(Tok::Cmp(cmp)) = self.peek().map(|s| &s.tok) {
            let cmp = *cmp;
            self.pos += 1;
            let literal = self.literal()?;
            return Ok((
                at,
                RawArg::Cond(Condition {
                    operand,
                    cmp,
                    literal,
                }),
            ));
        }
        Ok((
            at,
            match operand {
                Operand::Attr(n) => RawArg::Quoted(n),
                Operand::Ref(k) => RawArg::Ref(k),
            },
        ))
    }

    fn step(&mut self, step_no: usize) -> Result<QdmrStep, ParseError> {
        let at = self.here();
        let op = match self.peek().map(|s| &s.tok) {
            Some(Tok::Word(w)) => Op::from_name(w).ok_or_else(|| {
                self.error(
                    at,
                    ParseErrorKind::UnknownOp,
                    format!("unknown operation '{w}'"),
                )
            })?,
            Some(other) => {
                return Err(self.error(
                    at,
                    ParseErrorKind::Lexical,
                    format!("expected an operation name, found {other:?}"),
                ))
            }
            None => return Err(self.error(self.end, ParseErrorKind::Lexical, "expected a step")),
        };
        self.pos += 1;
        self.expect(Tok::LBracket, "'['")?;
        let mut raw = Vec::new();
        if self.peek().map(|s| &s.tok) != Some(&Tok::RBracket) {
            loop {
                raw.push(self.arg(step_no)?);
                match self.peek().map(|s| &s.tok) {
                    Some(Tok::Comma) => self.pos += 1,
                    _ => break,
                }
            }
        }
        self.expect(Tok::RBracket, "',' or ']'")?;

        let sig = op.signature();
        if raw.len() != sig.len() {
            return Err(self.error(
                at,
                ParseErrorKind::BadArity,
                format!("{op} takes {} arguments, got {}", sig.len(), raw.len()),
            ));
        }
        let mut args = Vec::with_capacity(raw.len());
        for (slot, (pos, r)) in sig.iter().zip(raw) {
            let arg = match (slot, r) {
                (ArgSlot::Attr | ArgSlot::Column, RawArg::Quoted(n)) => Some(Arg::Attr(n)),
                (ArgSlot::Ref | ArgSlot::Column, RawArg::Ref(k)) => Some(Arg::Ref(k)),
                (ArgSlot::Cond, RawArg::Cond(c)) => Some(Arg::Cond(c)),
                (ArgSlot::Method, RawArg::Word(w)) => AggMethod::from_name(&w).map(Arg::Method),
                (ArgSlot::Dir, RawArg::Word(w)) => match w.to_ascii_lowercase().as_str() {
                    "asc" => Some(Arg::Dir(SortDir::Asc)),
                    "desc" => Some(Arg::Dir(SortDir::Desc)),
                    _ => None,
                },
                (ArgSlot::Super, RawArg::Word(w)) => match w.to_ascii_lowercase().as_str() {
                    "max" => Some(Arg::Super(Extremum::Max)),
                    "min" => Some(Arg::Super(Extremum::Min)),
                    _ => None,
                },
                _ => None,
            };
            match arg {
                Some(a) => args.push(a),
                None => {
                    return Err(self.error(
                        pos,
                        ParseErrorKind::BadArgKind,
                        format!("{op} expects {} here", slot.describe()),
                    ))
                }
            }
        }
        Ok(QdmrStep::new(op, args))
    }
}

fn end_position(text: &str) -> (usize, usize) {
    // last character of the source, so positions stay inside the text
    let mut line = 1;
    let mut col = 0;
    for ch in text.chars() {
        if ch == '\n' {
            line += 1;
            col = 0;
        } else {
            col += 1;
        }
    }
    (line, col.max(1))
}

fn parser_for(text: &str) -> Result<Parser, ParseError> {
    let toks = Lexer::new(text).tokens()?;
    Ok(Parser {
        toks,
        pos: 0,
        end: end_position(text),
    })
}

/// Parses pipeline text such as
/// `SELECT['Students']; PROJECT['Birth Year', #1]; AGGREGATE[count, #2]`.
pub fn parse(text: &str) -> Result<QdmrPipeline, ParseError> {
    let mut p = parser_for(text)?;
    let mut steps = Vec::new();
    loop {
        steps.push(p.step(steps.len() + 1)?);
        match p.peek().map(|s| &s.tok) {
            Some(Tok::Semi) => {
                p.pos += 1;
                if p.peek().is_none() {
                    break;
                }
            }
            None => break,
            Some(_) => {
                return Err(p.error(
                    p.here(),
                    ParseErrorKind::Lexical,
                    "expected ';' between steps",
                ))
            }
        }
    }
    if steps[0].op != Op::Select {
        return Err(ParseError {
            line: 1,
            col: 1,
            kind: ParseErrorKind::SelectFirst,
            message: format!("step 1 must be SELECT, found {}", steps[0].op),
        });
    }
    Ok(QdmrPipeline::new(steps).expect("structure checked while parsing"))
}

/// Parses a single step written as it would appear at position `step_no`
/// (1-based) of a pipeline.
pub fn parse_step(text: &str, step_no: usize) -> Result<QdmrStep, ParseError> {
    let mut p = parser_for(text)?;
    let step = p.step(step_no)?;
    if let Some(s) = p.peek() {
        return Err(p.error(
            (s.line, s.col),
            ParseErrorKind::Lexical,
            "trailing input after step",
        ));
    }
    Ok(step)
}
