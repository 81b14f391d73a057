//! The constrained action space shared by exhaustive enumeration and beam
//! search.
//!
//! Programs are linear chains: statement 0 reads `all_rows`, statement `i`
//! reads `v{i-1}`. Every statement but the last yields rows; the last yields
//! an answer (`count`, `hop`, `maximum`, `minimum`), and choosing one ends the
//! program. Row operators are idempotent and filters commute, so a row action
//! may not repeat one already in the chain. Literals are copied from cells
//! that the utterance mentions; when it mentions none, every distinct cell of
//! the column is a candidate.

use std::cmp::Ordering;
use std::ops::ControlFlow;

use crate::executor::{answers_match, eval_statement, Answer, ExecError, Value};
use crate::mr::{quote, Arg, Expr, FuncName, Program};
use crate::table::{Cell, ColumnKind, TableEnv};
use crate::text::token_number;

pub const NO_COL: u8 = u8::MAX;
pub const NO_LIT: u16 = u16::MAX;

/// One decoding step: an operator with its column and literal slots filled.
/// The row argument is implied by the position in the chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Action {
    pub func: FuncName,
    pub col: u8,
    pub lit: u16,
    /// Position in the canonical order of this space's actions.
    pub rank: u16,
}

impl Action {
    pub fn column(&self) -> Option<usize> {
        (self.col != NO_COL).then_some(self.col as usize)
    }

    pub fn literal(&self) -> Option<usize> {
        (self.lit != NO_LIT).then_some(self.lit as usize)
    }
}

#[derive(Clone, Debug)]
pub struct LiteralCandidate {
    pub col: usize,
    pub text: String,
    /// Token position of the first mention, `None` for fallback candidates.
    pub mention: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct ActionSpace {
    pub max_len: usize,
    pub literals: Vec<LiteralCandidate>,
    pub fallback: bool,
    col_names: Vec<String>,
    all: Vec<Action>,
    last: Vec<Action>,
}

/// Positions where `needle` occurs as a contiguous token run in `hay`.
fn find_run(hay: &[String], needle: &[String]) -> Option<usize> {
    if needle.is_empty() || needle.len() > hay.len() {
        return None;
    }
    (0..=hay.len() - needle.len()).find(|&i| hay[i..i + needle.len()] == *needle)
}

fn mention_of(cell: &Cell, utterance: &[String]) -> Option<usize> {
    match cell {
        Cell::Number(n) => utterance.iter().position(|t| token_number(t) == Some(*n)),
        Cell::Text(t) => find_run(utterance, &crate::text::tokenize(t)),
    }
}

impl ActionSpace {
    pub fn new(env: &TableEnv, utterance: &[String], max_len: usize) -> Self {
        assert!(env.columns().len() < NO_COL as usize, "too many columns");
        let mut literals = Vec::new();
        for c in 0..env.columns().len() {
            for cell in env.distinct_values(c) {
                if let Some(pos) = mention_of(cell, utterance) {
                    literals.push(LiteralCandidate { col: c, text: cell.to_string(), mention: Some(pos) });
                }
            }
        }
        let fallback = literals.is_empty();
        if fallback {
            for c in 0..env.columns().len() {
                for cell in env.distinct_values(c) {
                    literals.push(LiteralCandidate { col: c, text: cell.to_string(), mention: None });
                }
            }
        }
        assert!(literals.len() < NO_LIT as usize, "too many literal candidates");

        let numeric: Vec<bool> = env.columns().iter().map(|c| c.kind == ColumnKind::Number).collect();
        let mut all = Vec::new();
        for f in FuncName::ALL {
            let mk = |col: usize, lit: u16| Action { func: f, col: col as u8, lit, rank: 0 };
            match f {
                FuncName::FilterEq | FuncName::FilterGreater | FuncName::FilterLess => {
                    for (i, l) in literals.iter().enumerate() {
                        if f != FuncName::FilterEq && !numeric[l.col] {
                            continue;
                        }
                        if f != FuncName::FilterEq && l.text.parse::<crate::decimal::Decimal>().is_err() {
                            continue;
                        }
                        all.push(mk(l.col, i as u16));
                    }
                }
                FuncName::Count => all.push(Action { func: f, col: NO_COL, lit: NO_LIT, rank: 0 }),
                FuncName::Hop => (0..numeric.len()).for_each(|c| all.push(mk(c, NO_LIT))),
                _ => (0..numeric.len())
                    .filter(|&c| numeric[c])
                    .for_each(|c| all.push(mk(c, NO_LIT))),
            }
        }
        let col_names: Vec<String> = env.columns().iter().map(|c| c.name.clone()).collect();
        let mut space = ActionSpace { max_len, literals, fallback, col_names, all: Vec::new(), last: Vec::new() };
        all.sort_by(|a, b| space.cmp_action(a, b));
        for (i, a) in all.iter_mut().enumerate() {
            a.rank = i as u16;
        }
        space.last = all.iter().copied().filter(|a| !a.func.produces_rows()).collect();
        space.all = all;
        space
    }

    /// Text order of the statements the two actions print as, at equal
    /// position in the chain.
    fn cmp_action(&self, a: &Action, b: &Action) -> Ordering {
        let key = |x: &Action| {
            (
                x.func.as_str(),
                x.literal().map(|l| quote(&self.literals[l].text)),
                x.column().map(|c| quote(&self.col_names[c])),
            )
        };
        key(a).cmp(&key(b))
    }

    /// Valid actions at `step`, in canonical order. Empty past `max_len`.
    pub fn actions(&self, step: usize) -> &[Action] {
        if step + 1 < self.max_len {
            &self.all
        } else if step + 1 == self.max_len {
            &self.last
        } else {
            &[]
        }
    }

    /// Index of `a` within `actions(step)`.
    pub fn position(&self, step: usize, a: &Action) -> Option<usize> {
        if step + 1 < self.max_len {
            (self.all.get(a.rank as usize) == Some(a)).then_some(a.rank as usize)
        } else if step + 1 == self.max_len {
            self.last.binary_search_by_key(&a.rank, |x| x.rank).ok()
        } else {
            None
        }
    }

    /// Every action this space knows, regardless of step.
    pub fn all_actions(&self) -> &[Action] {
        &self.all
    }

    pub fn column_name(&self, c: usize) -> &str {
        &self.col_names[c]
    }

    pub fn n_columns(&self) -> usize {
        self.col_names.len()
    }

    pub fn expr(&self, step: usize, a: &Action) -> Expr {
        let mut args = vec![if step == 0 { Arg::AllRows } else { Arg::Var(step - 1) }];
        if let Some(l) = a.literal() {
            args.push(Arg::Literal(self.literals[l].text.clone()));
        }
        if let Some(c) = a.column() {
            args.push(Arg::Column(self.col_names[c].clone()));
        }
        Expr::new(a.func, args)
    }

    pub fn program(&self, actions: &[Action]) -> Program {
        let stmts = actions.iter().enumerate().map(|(i, a)| self.expr(i, a)).collect();
        Program::new(stmts).expect("grammar actions form a valid program")
    }

    /// The action sequence spelling `p`, if `p` lies inside this space.
    pub fn actions_of(&self, p: &Program) -> Option<Vec<Action>> {
        let mut out = Vec::with_capacity(p.len());
        for (i, e) in p.stmts().iter().enumerate() {
            let expected_src = if i == 0 { Arg::AllRows } else { Arg::Var(i - 1) };
            if *e.rows_arg() != expected_src {
                return None;
            }
            let found = self.actions(i).iter().find(|a| {
                a.func == e.func
                    && a.column().map(|c| self.col_names[c].as_str()) == e.column()
                    && a.literal().map(|l| self.literals[l].text.as_str()) == e.literal()
            })?;
            if !allowed(&out, found) {
                return None;
            }
            out.push(*found);
        }
        let complete = out.last().is_some_and(|a| !a.func.produces_rows());
        complete.then_some(out)
    }

    /// Executes one more step on the rows produced so far.
    pub fn step(&self, env: &TableEnv, step: usize, rows: &[usize], a: &Action) -> Result<Value, ExecError> {
        eval_statement(env, step, a.func, rows, a.column(), a.literal().map(|l| self.literals[l].text.as_str()))
    }

    pub fn execute(&self, env: &TableEnv, actions: &[Action]) -> Result<Value, ExecError> {
        let mut rows: Vec<usize> = (0..env.n_rows()).collect();
        let mut last = None;
        for (i, a) in actions.iter().enumerate() {
            match self.step(env, i, &rows, a)? {
                Value::Rows(r) => rows = r,
                v => last = Some(v),
            }
        }
        Ok(last.unwrap_or(Value::Rows(rows)))
    }

    /// Depth-first walk over every complete program, in canonical order,
    /// sharing intermediate results between programs with a common prefix.
    pub fn for_each_executed<F>(&self, env: &TableEnv, mut f: F)
    where
        F: FnMut(&[Action], &Result<Value, ExecError>),
    {
        let _ = self.try_for_each_executed(env, |acts, out| {
            f(acts, out);
            ControlFlow::Continue(())
        });
    }

    /// Like [`ActionSpace::for_each_executed`], stopping when `f` breaks.
    pub fn try_for_each_executed<F>(&self, env: &TableEnv, mut f: F) -> ControlFlow<()>
    where
        F: FnMut(&[Action], &Result<Value, ExecError>) -> ControlFlow<()>,
    {
        let all: Vec<usize> = (0..env.n_rows()).collect();
        let mut prefix = Vec::with_capacity(self.max_len);
        self.walk(env, 0, Ok(&all), &mut prefix, &mut f)
    }

    fn walk<F>(
        &self,
        env: &TableEnv,
        step: usize,
        rows: Result<&[usize], &ExecError>,
        prefix: &mut Vec<Action>,
        f: &mut F,
    ) -> ControlFlow<()>
    where
        F: FnMut(&[Action], &Result<Value, ExecError>) -> ControlFlow<()>,
    {
        for a in self.actions(step) {
            if !allowed(prefix, a) {
                continue;
            }
            let out = match rows {
                Ok(r) => self.step(env, step, r, a),
                Err(e) => Err(e.clone()),
            };
            prefix.push(*a);
            let flow = if a.func.produces_rows() {
                match &out {
                    Ok(Value::Rows(r)) => self.walk(env, step + 1, Ok(r), prefix, f),
                    Err(e) => self.walk(env, step + 1, Err(e), prefix, f),
                    Ok(_) => unreachable!("row operator"),
                }
            } else {
                f(prefix, &out)
            };
            prefix.pop();
            flow?;
        }
        ControlFlow::Continue(())
    }
}

/// Whether `a` may follow `prefix`: row actions are never repeated.
pub fn allowed(prefix: &[Action], a: &Action) -> bool {
    !(a.func.produces_rows() && prefix.contains(a))
}

/// Canonical order of action sequences: statement by statement, shorter
/// prefix first. Equals the text order of the printed programs.
pub fn cmp_actions(a: &[Action], b: &[Action]) -> Ordering {
    a.iter().map(|x| x.rank).cmp(b.iter().map(|x| x.rank))
}

/// Lazily yields every program of the constrained space, in canonical order.
pub struct ProgramStream {
    space: ActionSpace,
    stack: Vec<usize>,
}

impl Iterator for ProgramStream {
    type Item = Program;

    fn next(&mut self) -> Option<Program> {
        while let Some(&top) = self.stack.last() {
            let depth = self.stack.len() - 1;
            let list = self.space.actions(depth);
            if top >= list.len() {
                self.stack.pop();
                if let Some(t) = self.stack.last_mut() {
                    *t += 1;
                }
                continue;
            }
            let prefix: Vec<Action> =
                self.stack[..depth].iter().enumerate().map(|(d, &i)| self.space.actions(d)[i]).collect();
            if !allowed(&prefix, &list[top]) {
                *self.stack.last_mut().expect("nonempty") += 1;
                continue;
            }
            if list[top].func.produces_rows() {
                self.stack.push(0);
                continue;
            }
            let actions: Vec<Action> = self
                .stack
                .iter()
                .enumerate()
                .map(|(d, &i)| self.space.actions(d)[i])
                .collect();
            *self.stack.last_mut().expect("nonempty") += 1;
            return Some(self.space.program(&actions));
        }
        None
    }
}

pub fn enumerate_programs(env: &TableEnv, utterance: &[String], max_len: usize) -> ProgramStream {
    let space = ActionSpace::new(env, utterance, max_len);
    let stack = if max_len == 0 { Vec::new() } else { vec![0] };
    ProgramStream { space, stack }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct SpuriousCount {
    pub hits: usize,
    pub spurious: usize,
}

pub fn count_spurious(
    env: &TableEnv,
    utterance: &[String],
    gold: &Answer,
    gold_mr: Option<&Program>,
    max_len: usize,
) -> SpuriousCount {
    let space = ActionSpace::new(env, utterance, max_len);
    let gold_actions = gold_mr.and_then(|p| space.actions_of(p));
    let mut hits = 0;
    let mut gold_hit = false;
    space.for_each_executed(env, |acts, out| {
        if answers_match(out, gold) {
            hits += 1;
            if gold_actions.as_deref() == Some(acts) {
                gold_hit = true;
            }
        }
    });
    SpuriousCount { hits, spurious: hits - usize::from(gold_hit) }
}

/// Whether some program other than `gold_mr` reaches `gold`; stops at the
/// first one.
pub fn has_spurious(env: &TableEnv, utterance: &[String], gold: &Answer, gold_mr: &Program, max_len: usize) -> bool {
    let space = ActionSpace::new(env, utterance, max_len);
    let gold_actions = space.actions_of(gold_mr);
    space
        .try_for_each_executed(env, |acts, out| {
            if answers_match(out, gold) && gold_actions.as_deref() != Some(acts) {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        })
        .is_break()
}
