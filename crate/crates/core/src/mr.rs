//! The meaning-representation language: programs are sequences of typed
//! operator applications over table rows, with statement `i` bound to
//! variable `v{i}`.
//!
//! Surface syntax follows the printed form used for table programs:
//!
//! ```text
//! (filter_eq all_rows `2007' `Year') (count v0)
//! ```
//!
//! String arguments are written between a back-quote and a straight quote;
//! double-quoted strings and bare numeric literals are accepted on input and
//! canonicalized on output.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Longest program the generator and the search will produce.
pub const MAX_PROGRAM_LEN: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FuncName {
    FilterEq,
    FilterGreater,
    FilterLess,
    Hop,
    Count,
    Argmax,
    Argmin,
    Maximum,
    Minimum,
}

impl FuncName {
    pub const ALL: [FuncName; 9] = [
        FuncName::FilterEq,
        FuncName::FilterGreater,
        FuncName::FilterLess,
        FuncName::Hop,
        FuncName::Count,
        FuncName::Argmax,
        FuncName::Argmin,
        FuncName::Maximum,
        FuncName::Minimum,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FuncName::FilterEq => "filter_eq",
            FuncName::FilterGreater => "filter_greater",
            FuncName::FilterLess => "filter_less",
            FuncName::Hop => "hop",
            FuncName::Count => "count",
            FuncName::Argmax => "argmax",
            FuncName::Argmin => "argmin",
            FuncName::Maximum => "maximum",
            FuncName::Minimum => "minimum",
        }
    }

    /// Dense index in `0..9`, matching the order of [`FuncName::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn result_type(self) -> ValueType {
        signature_of(self).result
    }

    pub fn produces_rows(self) -> bool {
        self.result_type() == ValueType::Rows
    }

    pub fn takes_literal(self) -> bool {
        matches!(
            self,
            FuncName::FilterEq | FuncName::FilterGreater | FuncName::FilterLess
        )
    }

    pub fn needs_numeric_column(self) -> bool {
        matches!(
            self,
            FuncName::FilterGreater
                | FuncName::FilterLess
                | FuncName::Argmax
                | FuncName::Argmin
                | FuncName::Maximum
                | FuncName::Minimum
        )
    }
}

impl fmt::Display for FuncName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FuncName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FuncName::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| s.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ArgKind {
    Rows,
    Literal,
    Column,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueType {
    Rows,
    Number,
    ValueList,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Signature {
    pub args: &'static [ArgKind],
    pub result: ValueType,
}

pub fn signature_of(f: FuncName) -> Signature {
    use ArgKind::*;
    match f {
        FuncName::FilterEq | FuncName::FilterGreater | FuncName::FilterLess => Signature {
            args: &[Rows, Literal, Column],
            result: ValueType::Rows,
        },
        FuncName::Hop => Signature {
            args: &[Rows, Column],
            result: ValueType::ValueList,
        },
        FuncName::Count => Signature {
            args: &[Rows],
            result: ValueType::Number,
        },
        FuncName::Argmax | FuncName::Argmin => Signature {
            args: &[Rows, Column],
            result: ValueType::Rows,
        },
        FuncName::Maximum | FuncName::Minimum => Signature {
            args: &[Rows, Column],
            result: ValueType::Number,
        },
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Arg {
    AllRows,
    Var(usize),
    Column(String),
    Literal(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Expr {
    pub func: FuncName,
    pub args: Vec<Arg>,
}

impl Expr {
    pub fn new(func: FuncName, args: Vec<Arg>) -> Self {
        Expr { func, args }
    }

    /// The row-set argument (every operator takes exactly one).
    pub fn rows_arg(&self) -> &Arg {
        &self.args[0]
    }

    pub fn column(&self) -> Option<&str> {
        self.args.iter().find_map(|a| match a {
            Arg::Column(c) => Some(c.as_str()),
            _ => None,
        })
    }

    pub fn literal(&self) -> Option<&str> {
        self.args.iter().find_map(|a| match a {
            Arg::Literal(l) => Some(l.as_str()),
            _ => None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Program {
    stmts: Vec<Expr>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum MrError {
    #[error("statement {stmt}: unknown function `{name}`")]
    UnknownFunction { stmt: usize, name: String },
    #[error("statement {stmt}: `{func}` takes {expected} arguments, found {found}")]
    ArityMismatch {
        stmt: usize,
        func: FuncName,
        expected: usize,
        found: usize,
    },
    #[error("statement {stmt}: v{var} is not defined before this statement")]
    ForwardVarRef { stmt: usize, var: usize },
    #[error("statement {stmt}: argument {position} of `{func}` must be {expected}")]
    ArgTypeMismatch {
        stmt: usize,
        func: FuncName,
        position: usize,
        expected: &'static str,
    },
    #[error("statement {stmt}: {message}")]
    MalformedSyntax { stmt: usize, message: String },
}

impl MrError {
    pub fn stmt(&self) -> usize {
        match self {
            MrError::UnknownFunction { stmt, .. }
            | MrError::ArityMismatch { stmt, .. }
            | MrError::ForwardVarRef { stmt, .. }
            | MrError::ArgTypeMismatch { stmt, .. }
            | MrError::MalformedSyntax { stmt, .. } => *stmt,
        }
    }
}

impl Program {
    /// Builds a program, checking arity, argument kinds and variable scoping.
    pub fn new(stmts: Vec<Expr>) -> Result<Self, MrError> {
        if stmts.is_empty() {
            return Err(MrError::MalformedSyntax {
                stmt: 0,
                message: "a program needs at least one statement".into(),
            });
        }
        let mut types: Vec<ValueType> = Vec::with_capacity(stmts.len());
        for (i, e) in stmts.iter().enumerate() {
            let sig = signature_of(e.func);
            if e.args.len() != sig.args.len() {
                return Err(MrError::ArityMismatch {
                    stmt: i,
                    func: e.func,
                    expected: sig.args.len(),
                    found: e.args.len(),
                });
            }
            for (pos, (arg, kind)) in e.args.iter().zip(sig.args).enumerate() {
                let mismatch = |expected| MrError::ArgTypeMismatch {
                    stmt: i,
                    func: e.func,
                    position: pos,
                    expected,
                };
                match (kind, arg) {
                    (ArgKind::Rows, Arg::AllRows) => {}
                    (ArgKind::Rows, Arg::Var(v)) => {
                        if *v >= i {
                            return Err(MrError::ForwardVarRef { stmt: i, var: *v });
                        }
                        if types[*v] != ValueType::Rows {
                            return Err(mismatch("a row set"));
                        }
                    }
                    (ArgKind::Rows, _) => return Err(mismatch("a row set")),
                    (ArgKind::Literal, Arg::Literal(_)) => {}
                    (ArgKind::Literal, _) => return Err(mismatch("a literal")),
                    (ArgKind::Column, Arg::Column(_)) => {}
                    (ArgKind::Column, _) => return Err(mismatch("a column name")),
                }
            }
            types.push(sig.result);
        }
        Ok(Program { stmts })
    }

    pub fn stmts(&self) -> &[Expr] {
        &self.stmts
    }

    pub fn len(&self) -> usize {
        self.stmts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stmts.is_empty()
    }

    pub fn result_type(&self) -> ValueType {
        self.stmts.last().expect("nonempty").func.result_type()
    }

    pub fn sketch(&self) -> Sketch {
        sketch_of(self)
    }
}

pub fn sketch_of(p: &Program) -> Sketch {
    Sketch {
        funcs: p.stmts.iter().map(|e| e.func).collect(),
    }
}

/// Operator-only abstraction of a program, e.g. `(argmax ...) (hop ...)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Sketch {
    pub funcs: Vec<FuncName>,
}

impl Sketch {
    pub fn new(funcs: Vec<FuncName>) -> Self {
        Sketch { funcs }
    }

    pub fn len(&self) -> usize {
        self.funcs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.funcs.is_empty()
    }

    pub fn matches(&self, p: &Program) -> bool {
        self.funcs.len() == p.len() && self.funcs.iter().zip(p.stmts()).all(|(f, e)| *f == e.func)
    }
}

impl fmt::Display for Sketch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, func) in self.funcs.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "({func} ...)")?;
        }
        Ok(())
    }
}

/// Quotes a string argument in canonical form: `` `text' `` with `'` and `\`
/// escaped.
pub fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('`');
    for c in s.chars() {
        if c == '\'' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('\'');
    out
}

impl fmt::Display for Arg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arg::AllRows => f.write_str("all_rows"),
            Arg::Var(v) => write!(f, "v{v}"),
            Arg::Column(c) | Arg::Literal(c) => f.write_str(&quote(c)),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.func)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.stmts.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

pub fn print_program(p: &Program) -> String {
    p.to_string()
}

// ---------------------------------------------------------------------------
// Lexing

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Open,
    Close,
    Atom(String),
    Quoted(String),
}

fn lex(text: &str) -> Result<Vec<(Token, usize)>, MrError> {
    // Each token carries the index of the statement it belongs to, so errors
    // can name it.
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    let mut depth = 0usize;
    let mut stmt = 0usize;
    let malformed = |stmt, message: &str| MrError::MalformedSyntax {
        stmt,
        message: message.to_string(),
    };
    while let Some(&c) = chars.peek() {
        match c {
            c if c.is_whitespace() => {
                chars.next();
            }
            '(' => {
                chars.next();
                if depth > 0 {
                    return Err(malformed(stmt, "nested parentheses are not allowed"));
                }
                depth += 1;
                out.push((Token::Open, stmt));
            }
            ')' => {
                chars.next();
                if depth == 0 {
                    return Err(malformed(stmt, "unbalanced `)`"));
                }
                depth -= 1;
                out.push((Token::Close, stmt));
                stmt += 1;
            }
            '`' | '"' => {
                chars.next();
                let close = if c == '`' { '\'' } else { '"' };
                let mut s = String::new();
                let mut closed = false;
                while let Some(ch) = chars.next() {
                    if ch == '\\' {
                        match chars.next() {
                            Some(esc) => s.push(esc),
                            None => break,
                        }
                    } else if ch == close {
                        closed = true;
                        break;
                    } else {
                        s.push(ch);
                    }
                }
                if !closed {
                    return Err(malformed(stmt, "unterminated string"));
                }
                out.push((Token::Quoted(s), stmt));
            }
            _ => {
                let mut s = String::new();
                while let Some(&ch) = chars.peek() {
                    if ch.is_whitespace() || ch == '(' || ch == ')' || ch == '`' || ch == '"' {
                        break;
                    }
                    s.push(ch);
                    chars.next();
                }
                out.push((Token::Atom(s), stmt));
            }
        }
    }
    if depth != 0 {
        return Err(malformed(stmt, "missing `)`"));
    }
    Ok(out)
}

/// Splits the token stream into parenthesized groups.
fn groups(text: &str) -> Result<Vec<Vec<Token>>, MrError> {
    let mut out: Vec<Vec<Token>> = Vec::new();
    let mut current: Option<Vec<Token>> = None;
    for (tok, stmt) in lex(text)? {
        match tok {
            Token::Open => current = Some(Vec::new()),
            Token::Close => out.push(current.take().expect("balanced")),
            t => match current.as_mut() {
                Some(g) => g.push(t),
                None => {
                    return Err(MrError::MalformedSyntax {
                        stmt,
                        message: "argument outside parentheses".into(),
                    })
                }
            },
        }
    }
    Ok(out)
}

fn is_number_atom(s: &str) -> bool {
    s.parse::<crate::decimal::Decimal>().is_ok()
}

pub fn parse_program(text: &str) -> Result<Program, MrError> {
    let groups = groups(text)?;
    if groups.is_empty() {
        return Err(MrError::MalformedSyntax {
            stmt: 0,
            message: "empty program".into(),
        });
    }
    let mut stmts = Vec::with_capacity(groups.len());
    for (i, g) in groups.into_iter().enumerate() {
        let mut it = g.into_iter();
        let head = match it.next() {
            Some(Token::Atom(h)) => h,
            _ => {
                return Err(MrError::MalformedSyntax {
                    stmt: i,
                    message: "expected a function name".into(),
                })
            }
        };
        let func: FuncName = head
            .parse()
            .map_err(|name| MrError::UnknownFunction { stmt: i, name })?;
        let sig = signature_of(func);
        let raw: Vec<Token> = it.collect();
        if raw.len() != sig.args.len() {
            return Err(MrError::ArityMismatch {
                stmt: i,
                func,
                expected: sig.args.len(),
                found: raw.len(),
            });
        }
        let mut args = Vec::with_capacity(raw.len());
        for (pos, (tok, kind)) in raw.into_iter().zip(sig.args).enumerate() {
            let mismatch = |expected| MrError::ArgTypeMismatch {
                stmt: i,
                func,
                position: pos,
                expected,
            };
            let arg = match (kind, tok) {
                (ArgKind::Rows, Token::Atom(a)) if a == "all_rows" => Arg::AllRows,
                (ArgKind::Rows, Token::Atom(a)) => {
                    let idx = a
                        .strip_prefix('v')
                        .and_then(|n| n.parse::<usize>().ok())
                        .ok_or_else(|| mismatch("a row set"))?;
                    Arg::Var(idx)
                }
                (ArgKind::Rows, _) => return Err(mismatch("a row set")),
                (ArgKind::Literal, Token::Quoted(s)) => Arg::Literal(s),
                (ArgKind::Literal, Token::Atom(a)) if is_number_atom(&a) => Arg::Literal(a),
                (ArgKind::Literal, _) => return Err(mismatch("a literal")),
                (ArgKind::Column, Token::Quoted(s)) => Arg::Column(s),
                (ArgKind::Column, _) => return Err(mismatch("a quoted column name")),
            };
            args.push(arg);
        }
        stmts.push(Expr::new(func, args));
    }
    Program::new(stmts)
}

/// Parses a sketch such as `(argmax ...) (hop ...)`. Groups may also carry
/// full arguments, in which case only the operator names are kept.
pub fn parse_sketch(text: &str) -> Result<Sketch, MrError> {
    let groups = groups(text)?;
    if groups.is_empty() {
        return Err(MrError::MalformedSyntax {
            stmt: 0,
            message: "empty sketch".into(),
        });
    }
    let mut funcs = Vec::with_capacity(groups.len());
    for (i, g) in groups.into_iter().enumerate() {
        match g.first() {
            Some(Token::Atom(h)) => {
                let f = h
                    .parse()
                    .map_err(|name| MrError::UnknownFunction { stmt: i, name })?;
                funcs.push(f);
            }
            _ => {
                return Err(MrError::MalformedSyntax {
                    stmt: i,
                    message: "expected a function name".into(),
                })
            }
        }
    }
    Ok(Sketch { funcs })
}

impl FromStr for Program {
    type Err = MrError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_program(s)
    }
}

impl FromStr for Sketch {
    type Err = MrError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_sketch(s)
    }
}

impl Serialize for Program {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Program {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        parse_program(&s).map_err(serde::de::Error::custom)
    }
}

impl Serialize for Sketch {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Sketch {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        parse_sketch(&s).map_err(serde::de::Error::custom)
    }
}
