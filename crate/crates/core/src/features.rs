//! Feature templates and per-example encodings.
//!
//! A feature conjoins one observation about the utterance, column or literal
//! with the operator being chosen. Scores factor into a handful of tables per
//! example (operator, operator x column, operator x literal, transition,
//! position, length), which keeps beam search and gradients cheap.

use std::fmt;

use rustc_hash::FxHashMap;

use crate::grammar::ActionSpace;
use crate::table::{ColumnKind, TableEnv};
use crate::text::tokenize;

pub type Sym = u32;

/// String interner for words and column names.
#[derive(Clone, Debug, Default)]
pub struct Interner {
    strings: Vec<String>,
    ids: FxHashMap<String, Sym>,
}

impl Interner {
    pub fn intern(&mut self, s: &str) -> Sym {
        if let Some(&id) = self.ids.get(s) {
            return id;
        }
        let id = self.strings.len() as Sym;
        self.strings.push(s.to_string());
        self.ids.insert(s.to_string(), id);
        id
    }

    pub fn get(&self, s: &str) -> Option<Sym> {
        self.ids.get(s).copied()
    }

    pub fn resolve(&self, id: Sym) -> &str {
        &self.strings[id as usize]
    }
}

/// Marks the start of the utterance in context features.
pub const BOS: &str = "<s>";
/// Previous-operator slot at the first statement.
pub const START: u8 = 9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Feature {
    Unigram(Sym, u8),
    Bigram(Sym, Sym, u8),
    ColumnOverlap(u8),
    ColumnName(Sym, u8),
    ColumnKind(u8, u8),
    WordColumn(Sym, Sym, u8),
    ColumnContext(Sym, u8),
    LiteralMatch(bool, u8),
    LiteralContext(Sym, u8),
    LiteralContext2(Sym, u8),
    Transition(u8, u8),
    Position(u8, u8),
    Length(u8),
    /// The column repeats the previous statement's column.
    SameColumn(u8),
}

fn func_str(f: u8) -> &'static str {
    crate::mr::FuncName::ALL[f as usize].as_str()
}

fn func_of(s: &str) -> Option<u8> {
    s.parse::<crate::mr::FuncName>().ok().map(|f| f.index() as u8)
}

fn esc(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '|' => out.push_str("\\p"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out
}

fn unesc(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut it = s.chars();
    while let Some(c) = it.next() {
        if c == '\\' {
            match it.next() {
                Some('p') => out.push('|'),
                Some('t') => out.push('\t'),
                Some('n') => out.push('\n'),
                Some(o) => out.push(o),
                None => {}
            }
        } else {
            out.push(c);
        }
    }
    out
}

/// Feature with its symbols resolved, for display and checkpoints.
pub struct FeatureText<'a>(pub &'a Feature, pub &'a Interner);

impl fmt::Display for FeatureText<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = |id: &Sym| esc(self.1.resolve(*id));
        let prev = |p: &u8| if *p == START { "START" } else { func_str(*p) };
        match self.0 {
            Feature::Unigram(w, g) => write!(f, "uni|{}|{}", s(w), func_str(*g)),
            Feature::Bigram(a, b, g) => write!(f, "bi|{}|{}|{}", s(a), s(b), func_str(*g)),
            Feature::ColumnOverlap(g) => write!(f, "col_overlap|{}", func_str(*g)),
            Feature::ColumnName(c, g) => write!(f, "col_name|{}|{}", s(c), func_str(*g)),
            Feature::ColumnKind(k, g) => {
                let k = if *k == 0 { "number" } else { "text" };
                write!(f, "col_kind|{k}|{}", func_str(*g))
            }
            Feature::WordColumn(w, c, g) => write!(f, "word_col|{}|{}|{}", s(w), s(c), func_str(*g)),
            Feature::ColumnContext(w, g) => write!(f, "col_ctx|{}|{}", s(w), func_str(*g)),
            Feature::LiteralMatch(m, g) => write!(f, "lit_match|{m}|{}", func_str(*g)),
            Feature::LiteralContext(w, g) => write!(f, "lit_ctx|{}|{}", s(w), func_str(*g)),
            Feature::LiteralContext2(w, g) => write!(f, "lit_ctx2|{}|{}", s(w), func_str(*g)),
            Feature::Transition(p, g) => write!(f, "trans|{}|{}", prev(p), func_str(*g)),
            Feature::Position(i, g) => write!(f, "pos|{i}|{}", func_str(*g)),
            Feature::Length(l) => write!(f, "len|{l}"),
            Feature::SameColumn(g) => write!(f, "same_col|{}", func_str(*g)),
        }
    }
}

impl Feature {
    pub fn parse(text: &str, syms: &mut Interner) -> Option<Feature> {
        let parts: Vec<String> = text.split('|').map(unesc).collect();
        let p: Vec<&str> = parts.iter().map(String::as_str).collect();
        let f = |s: &str| func_of(s);
        Some(match p.as_slice() {
            ["uni", w, g] => Feature::Unigram(syms.intern(w), f(g)?),
            ["bi", a, b, g] => Feature::Bigram(syms.intern(a), syms.intern(b), f(g)?),
            ["col_overlap", g] => Feature::ColumnOverlap(f(g)?),
            ["col_name", c, g] => Feature::ColumnName(syms.intern(c), f(g)?),
            ["col_kind", k, g] => Feature::ColumnKind(
                match *k {
                    "number" => 0,
                    "text" => 1,
                    _ => return None,
                },
                f(g)?,
            ),
            ["word_col", w, c, g] => Feature::WordColumn(syms.intern(w), syms.intern(c), f(g)?),
            ["col_ctx", w, g] => Feature::ColumnContext(syms.intern(w), f(g)?),
            ["lit_match", m, g] => Feature::LiteralMatch(m.parse().ok()?, f(g)?),
            ["lit_ctx", w, g] => Feature::LiteralContext(syms.intern(w), f(g)?),
            ["lit_ctx2", w, g] => Feature::LiteralContext2(syms.intern(w), f(g)?),
            ["trans", prev, g] => Feature::Transition(if *prev == "START" { START } else { f(prev)? }, f(g)?),
            ["pos", i, g] => Feature::Position(i.parse().ok()?, f(g)?),
            ["len", l] => Feature::Length(l.parse().ok()?),
            ["same_col", g] => Feature::SameColumn(f(g)?),
            _ => return None,
        })
    }
}

#[derive(Clone, Debug)]
pub struct ColumnEnc {
    pub name: Sym,
    pub kind: u8,
    pub overlap: bool,
    /// Token before the first mention of the column name.
    pub context: Option<Sym>,
}

#[derive(Clone, Debug)]
pub struct LiteralEnc {
    pub matched: bool,
    pub context: Option<Sym>,
    pub context2: Option<Sym>,
}

/// Everything the model needs from one (utterance, table) pair.
#[derive(Clone, Debug)]
pub struct Encoded {
    pub space: ActionSpace,
    pub words: Vec<Sym>,
    pub bigrams: Vec<(Sym, Sym)>,
    pub columns: Vec<ColumnEnc>,
    pub literals: Vec<LiteralEnc>,
}

fn find_run(hay: &[String], needle: &[String]) -> Option<usize> {
    if needle.is_empty() || needle.len() > hay.len() {
        return None;
    }
    (0..=hay.len() - needle.len()).find(|&i| hay[i..i + needle.len()] == *needle)
}

impl Encoded {
    pub fn new(utterance: &[String], env: &TableEnv, max_len: usize, syms: &mut Interner) -> Self {
        let space = ActionSpace::new(env, utterance, max_len);
        let mut words: Vec<Sym> = utterance.iter().map(|w| syms.intern(w)).collect();
        let mut bigrams: Vec<(Sym, Sym)> = words.windows(2).map(|w| (w[0], w[1])).collect();
        words.sort_unstable();
        words.dedup();
        bigrams.sort_unstable();
        bigrams.dedup();
        let prev_token = |pos: usize, back: usize, syms: &mut Interner| -> Sym {
            if pos >= back {
                syms.intern(&utterance[pos - back])
            } else {
                syms.intern(BOS)
            }
        };
        let columns = env
            .columns()
            .iter()
            .map(|c| {
                let toks = tokenize(&c.name);
                let mention = find_run(utterance, &toks);
                ColumnEnc {
                    name: syms.intern(&c.name.to_lowercase()),
                    kind: match c.kind {
                        ColumnKind::Number => 0,
                        ColumnKind::Text => 1,
                    },
                    overlap: toks.iter().any(|t| utterance.contains(t)),
                    context: mention.map(|p| prev_token(p, 1, syms)),
                }
            })
            .collect();
        let literals = space
            .literals
            .iter()
            .map(|l| LiteralEnc {
                matched: l.mention.is_some(),
                context: l.mention.map(|p| prev_token(p, 1, syms)),
                context2: l.mention.map(|p| prev_token(p, 2, syms)),
            })
            .collect();
        Encoded { space, words, bigrams, columns, literals }
    }
}
