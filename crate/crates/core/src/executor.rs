//! Program execution against a table with a variable memory, and answer
//! comparison.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::decimal::Decimal;
use crate::mr::{Arg, FuncName, Program};
use crate::table::{Cell, ColumnKind, TableEnv};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Value {
    Number(Decimal),
    Text(String),
    List(Vec<Cell>),
    /// Row indices in table order.
    Rows(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ExecError {
    #[error("statement {stmt}: unknown column `{column}`")]
    UnknownColumn { stmt: usize, column: String },
    #[error("statement {stmt}: {message}")]
    TypeMismatch { stmt: usize, message: String },
    #[error("statement {stmt}: `{func}` applied to an empty row set")]
    EmptyRowsForAggregate { stmt: usize, func: FuncName },
}

/// Gold answer: a scalar or an order-free multiset of at least two atoms.
/// Singleton lists normalize to their element.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Answer {
    Atom(Cell),
    Multiset(Vec<Cell>),
}

impl Answer {
    pub fn from_cells(mut cells: Vec<Cell>) -> Answer {
        if cells.len() == 1 {
            return Answer::Atom(cells.pop().expect("len 1"));
        }
        cells.sort();
        Answer::Multiset(cells)
    }

    pub fn normalize(self) -> Answer {
        match self {
            Answer::Atom(c) => Answer::Atom(c),
            Answer::Multiset(cells) => Answer::from_cells(cells),
        }
    }

    /// The answer a successful execution denotes, if it denotes one.
    pub fn from_value(v: &Value) -> Option<Answer> {
        match v {
            Value::Number(n) => Some(Answer::Atom(Cell::Number(*n))),
            Value::Text(t) => Some(Answer::Atom(Cell::Text(t.clone()))),
            Value::List(cells) if !cells.is_empty() => Some(Answer::from_cells(cells.clone())),
            _ => None,
        }
    }
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Answer::Atom(c) => write!(f, "{c}"),
            Answer::Multiset(cs) => {
                f.write_str("[")?;
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{c}")?;
                }
                f.write_str("]")
            }
        }
    }
}

impl Serialize for Answer {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Answer::Atom(c) => c.serialize(s),
            Answer::Multiset(cs) => cs.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for Answer {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            List(Vec<Cell>),
            One(Cell),
        }
        match Raw::deserialize(d)? {
            Raw::One(c) => Ok(Answer::Atom(c)),
            Raw::List(cs) if cs.is_empty() => Err(serde::de::Error::custom("empty answer list")),
            Raw::List(cs) => Ok(Answer::from_cells(cs)),
        }
    }
}

/// Evaluates one operator on an input row set. `col` is the resolved column
/// index when the operator takes one.
pub(crate) fn eval_statement(
    env: &TableEnv,
    stmt: usize,
    func: FuncName,
    rows: &[usize],
    col: Option<usize>,
    literal: Option<&str>,
) -> Result<Value, ExecError> {
    let numeric = |c: usize| -> Result<usize, ExecError> {
        if env.columns()[c].kind != ColumnKind::Number {
            return Err(ExecError::TypeMismatch {
                stmt,
                message: format!(
                    "`{func}` needs a numeric column, `{}` is text",
                    env.columns()[c].name
                ),
            });
        }
        Ok(c)
    };
    let value = match func {
        FuncName::FilterEq => {
            let c = col.expect("filter has a column");
            let lit = literal.expect("filter has a literal");
            match env.columns()[c].kind {
                ColumnKind::Number => match lit.parse::<Decimal>() {
                    Ok(n) => Value::Rows(
                        rows.iter()
                            .copied()
                            .filter(|&r| env.cell(r, c).as_number() == Some(n))
                            .collect(),
                    ),
                    Err(_) => Value::Rows(Vec::new()),
                },
                ColumnKind::Text => Value::Rows(
                    rows.iter()
                        .copied()
                        .filter(|&r| matches!(env.cell(r, c), Cell::Text(t) if t == lit))
                        .collect(),
                ),
            }
        }
        FuncName::FilterGreater | FuncName::FilterLess => {
            let c = numeric(col.expect("filter has a column"))?;
            let lit = literal.expect("filter has a literal");
            let n: Decimal = lit.parse().map_err(|_| ExecError::TypeMismatch {
                stmt,
                message: format!("literal `{lit}` is not a number"),
            })?;
            let greater = func == FuncName::FilterGreater;
            Value::Rows(
                rows.iter()
                    .copied()
                    .filter(|&r| {
                        let v = env.cell(r, c).as_number().expect("numeric column");
                        if greater {
                            v > n
                        } else {
                            v < n
                        }
                    })
                    .collect(),
            )
        }
        FuncName::Count => Value::Number(Decimal::from_int(rows.len() as i64)),
        FuncName::Hop => {
            let c = col.expect("hop has a column");
            if rows.is_empty() {
                return Err(ExecError::EmptyRowsForAggregate { stmt, func });
            }
            Value::List(rows.iter().map(|&r| env.cell(r, c).clone()).collect())
        }
        FuncName::Argmax | FuncName::Argmin | FuncName::Maximum | FuncName::Minimum => {
            let c = numeric(col.expect("superlative has a column"))?;
            if rows.is_empty() {
                return Err(ExecError::EmptyRowsForAggregate { stmt, func });
            }
            let values = rows.iter().map(|&r| env.cell(r, c).as_number().expect("numeric"));
            let best = if matches!(func, FuncName::Argmax | FuncName::Maximum) {
                values.max()
            } else {
                values.min()
            }
            .expect("nonempty");
            match func {
                FuncName::Maximum | FuncName::Minimum => Value::Number(best),
                _ => Value::Rows(
                    rows.iter()
                        .copied()
                        .filter(|&r| env.cell(r, c).as_number() == Some(best))
                        .collect(),
                ),
            }
        }
    };
    Ok(value)
}

/// Runs a program. Statement `i`'s result is bound to `v{i}`; the final
/// statement's value is returned. Errors are values: a failed execution never
/// panics.
pub fn execute(p: &Program, env: &TableEnv) -> Result<Value, ExecError> {
    let all_rows: Vec<usize> = (0..env.n_rows()).collect();
    let mut memory: Vec<Value> = Vec::with_capacity(p.len());
    for (i, e) in p.stmts().iter().enumerate() {
        let rows: &[usize] = match e.rows_arg() {
            Arg::AllRows => &all_rows,
            Arg::Var(v) => match memory.get(*v) {
                Some(Value::Rows(r)) => r,
                _ => {
                    return Err(ExecError::TypeMismatch {
                        stmt: i,
                        message: format!("v{v} is not a row set"),
                    })
                }
            },
            _ => unreachable!("validated program"),
        };
        let col = match e.column() {
            Some(name) => Some(env.column_index(name).ok_or_else(|| ExecError::UnknownColumn {
                stmt: i,
                column: name.to_string(),
            })?),
            None => None,
        };
        let value = eval_statement(env, i, e.func, rows, col, e.literal())?;
        memory.push(value);
    }
    Ok(memory.pop().expect("nonempty program"))
}

/// Whether an execution outcome denotes the gold answer. Errors and row sets
/// match nothing; a one-element list matches the equal scalar.
pub fn answers_match(result: &Result<Value, ExecError>, gold: &Answer) -> bool {
    match result {
        Ok(v) => value_matches(v, gold),
        Err(_) => false,
    }
}

pub fn value_matches(v: &Value, gold: &Answer) -> bool {
    match (v, gold) {
        (Value::Number(n), Answer::Atom(Cell::Number(m))) => n == m,
        (Value::Text(t), Answer::Atom(Cell::Text(s))) => t == s,
        (Value::List(cells), Answer::Atom(a)) => cells.len() == 1 && &cells[0] == a,
        (Value::List(cells), Answer::Multiset(gold)) => {
            if cells.len() != gold.len() {
                return false;
            }
            let mut sorted = cells.clone();
            sorted.sort();
            &sorted == gold
        }
        _ => false,
    }
}
