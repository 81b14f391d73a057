#![allow(dead_code)]

use std::collections::BTreeSet;
use std::sync::{Arc, OnceLock};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use tablesp_core::active::{ExampleView, SelectionContext};
use tablesp_core::dataset::{Corpus, Example};
use tablesp_core::experiment::{ExperimentConfig, ExperimentReport};
use tablesp_core::features::{Encoded, Feature};
use tablesp_core::model::{featurize, Prev};
use tablesp_core::mr::{Arg, FuncName};
use tablesp_core::scalar::Scalar;
use tablesp_core::text::tokenize;
use tablesp_core::train::{gold_entry, Instance};
use tablesp_core::{
    enumerate_programs, execute, parse_program, Action, Answer, BufferEntry, Cell, Column, ColumnKind, ExecError, Model,
    ParserModel, Program, TableEnv, Value,
};

/// Result of the reference interpreter.
#[derive(Clone, Debug, PartialEq)]
pub enum Outcome {
    Rows(Vec<usize>),
    Num(f64),
    List(Vec<String>),
    Fail,
}

fn number(s: &str) -> Option<f64> {
    match s.split_once('/') {
        Some((n, d)) => Some(n.trim().parse::<f64>().ok()? / d.trim().parse::<f64>().ok()?),
        None => s.trim().parse().ok(),
    }
}

/// Straight row scan over the table for every statement. Knows nothing of
/// the executor beyond the table accessors.
pub fn reference_execute(p: &Program, t: &TableEnv) -> Outcome {
    let n = t.n_rows();
    let mut memory: Vec<Outcome> = Vec::new();
    for e in p.stmts() {
        let input: Vec<bool> = match &e.args[0] {
            Arg::AllRows => vec![true; n],
            Arg::Var(v) => match memory.get(*v) {
                Some(Outcome::Rows(r)) => (0..n).map(|i| r.contains(&i)).collect(),
                _ => return Outcome::Fail,
            },
            _ => return Outcome::Fail,
        };
        let col = match e.column() {
            Some(name) => match t.columns().iter().position(|c| c.name == name) {
                Some(c) => Some(c),
                None => return Outcome::Fail,
            },
            None => None,
        };
        let is_num = |c: usize| t.columns()[c].kind == ColumnKind::Number;
        let text = |r: usize, c: usize| t.cell(r, c).to_string();
        let val = |r: usize, c: usize| number(&text(r, c)).expect("numeric cell");
        let out = match e.func {
            FuncName::FilterEq => {
                let c = col.unwrap();
                let lit = e.literal().unwrap();
                let mut rows = Vec::new();
                for r in 0..n {
                    let keep = if is_num(c) { number(lit).is_some_and(|x| val(r, c) == x) } else { text(r, c) == lit };
                    if input[r] && keep {
                        rows.push(r);
                    }
                }
                Outcome::Rows(rows)
            }
            FuncName::FilterGreater | FuncName::FilterLess => {
                let c = col.unwrap();
                let Some(x) = number(e.literal().unwrap()) else { return Outcome::Fail };
                if !is_num(c) {
                    return Outcome::Fail;
                }
                let mut rows = Vec::new();
                for r in 0..n {
                    let v = val(r, c);
                    let keep = if e.func == FuncName::FilterGreater { v > x } else { v < x };
                    if input[r] && keep {
                        rows.push(r);
                    }
                }
                Outcome::Rows(rows)
            }
            FuncName::Count => Outcome::Num(input.iter().filter(|&&b| b).count() as f64),
            FuncName::Hop => {
                let c = col.unwrap();
                let cells: Vec<String> = (0..n).filter(|&r| input[r]).map(|r| text(r, c)).collect();
                if cells.is_empty() {
                    return Outcome::Fail;
                }
                Outcome::List(cells)
            }
            FuncName::Argmax | FuncName::Argmin | FuncName::Maximum | FuncName::Minimum => {
                let c = col.unwrap();
                if !is_num(c) || !input.contains(&true) {
                    return Outcome::Fail;
                }
                let high = matches!(e.func, FuncName::Argmax | FuncName::Maximum);
                let mut best: Option<f64> = None;
                for r in 0..n {
                    if input[r] {
                        let v = val(r, c);
                        best = Some(match best {
                            None => v,
                            Some(b) if high => b.max(v),
                            Some(b) => b.min(v),
                        });
                    }
                }
                let b = best.unwrap();
                if matches!(e.func, FuncName::Maximum | FuncName::Minimum) {
                    Outcome::Num(b)
                } else {
                    Outcome::Rows((0..n).filter(|&r| input[r] && val(r, c) == b).collect())
                }
            }
        };
        memory.push(out);
    }
    memory.pop().unwrap_or(Outcome::Fail)
}

/// Whether an executor result and a reference outcome denote the same thing.
pub fn agrees(got: &Result<Value, ExecError>, want: &Outcome) -> bool {
    match (got, want) {
        (Err(_), Outcome::Fail) => true,
        (Ok(Value::Rows(a)), Outcome::Rows(b)) => a == b,
        (Ok(Value::Number(a)), Outcome::Num(b)) => number(&a.to_string()) == Some(*b),
        (Ok(Value::List(a)), Outcome::List(b)) => a.iter().map(Cell::to_string).collect::<Vec<_>>() == *b,
        _ => false,
    }
}

pub fn medals() -> TableEnv {
    let rows = [
        ("Norway", 1, 14, 14, 11),
        ("Germany", 2, 14, 10, 7),
        ("Canada", 3, 11, 8, 10),
        ("United States", 4, 9, 8, 6),
        ("Netherlands", 5, 8, 6, 6),
        ("Sweden", 6, 7, 6, 1),
    ];
    TableEnv::new(
        "medals",
        vec![
            Column { name: "Nation".into(), kind: ColumnKind::Text },
            Column { name: "Rank".into(), kind: ColumnKind::Number },
            Column { name: "Gold".into(), kind: ColumnKind::Number },
            Column { name: "Silver".into(), kind: ColumnKind::Number },
            Column { name: "Bronze".into(), kind: ColumnKind::Number },
        ],
        rows.iter()
            .map(|&(n, r, g, s, b)| vec![Cell::text(n), Cell::int(r), Cell::int(g), Cell::int(s), Cell::int(b)])
            .collect(),
    )
    .unwrap()
}

/// The default generated corpus, built once per test binary.
pub fn corpus() -> Arc<Corpus> {
    static C: OnceLock<Arc<Corpus>> = OnceLock::new();
    C.get_or_init(|| Arc::new(ExperimentConfig::default().load_corpus().expect("default corpus"))).clone()
}

/// One Number column, two rows.
pub fn tiny() -> TableEnv {
    TableEnv::new(
        "tiny",
        vec![Column { name: "Score".into(), kind: ColumnKind::Number }],
        vec![vec![Cell::int(3)], vec![Cell::int(5)]],
    )
    .unwrap()
}

/// Every complete program of the encoding's space, as action sequences.
pub fn programs(enc: &Encoded, env: &TableEnv, utt: &[String]) -> Vec<Vec<Action>> {
    enumerate_programs(env, utt, enc.space.max_len)
        .map(|p| enc.space.actions_of(&p).expect("enumerated program is spellable"))
        .collect()
}

/// Gives every feature reachable from some prefix of `progs` a weight in
/// [-scale, scale].
pub fn randomize<F: Scalar>(m: &mut ParserModel<F>, enc: &Encoded, progs: &[Vec<Action>], rng: &mut ChaCha8Rng, scale: f64) {
    let mut feats: Vec<Feature> = Vec::new();
    for acts in progs {
        for i in 0..acts.len() {
            let prev = Prev::of(&acts[..i]);
            for a in enc.space.actions(i) {
                feats.extend(featurize(enc, i, prev, a));
            }
        }
    }
    feats.sort();
    feats.dedup();
    for f in feats {
        m.set_weight(f, F::of(rng.random_range(-scale..scale)));
    }
}

pub fn total_prob<F: Scalar>(m: &ParserModel<F>, enc: &Encoded, progs: &[Vec<Action>]) -> f64 {
    let sc = m.scores(enc);
    progs.iter().map(|z| m.log_prob(enc, &sc, z).as_f64().exp()).sum()
}

/// Norway leads on both rank and gold, so three different programs name it.
pub fn standings() -> TableEnv {
    let rows = [("Norway", 1, 16), ("Germany", 2, 14), ("Canada", 3, 11), ("Sweden", 4, 7)];
    TableEnv::new(
        "standings",
        vec![
            Column { name: "Nation".into(), kind: ColumnKind::Text },
            Column { name: "Rank".into(), kind: ColumnKind::Number },
            Column { name: "Gold".into(), kind: ColumnKind::Number },
        ],
        rows.iter().map(|&(n, r, g)| vec![Cell::text(n), Cell::int(r), Cell::int(g)]).collect(),
    )
    .unwrap()
}

pub const Z0: &str = "(argmax all_rows `Gold') (hop v0 `Nation')";
pub const Z1: &str = "(filter_eq all_rows `1' `Rank') (hop v0 `Nation')";
pub const Z2: &str = "(argmin all_rows `Rank') (hop v0 `Nation')";

pub fn standings_instance(m: &mut Model) -> Instance {
    let env = Arc::new(standings());
    let gold = parse_program(Z0).unwrap();
    let answer = Answer::from_value(&execute(&gold, &env).unwrap()).unwrap();
    let ex = Example::new("q1", "which nation ranked 1 won the most gold", "standings", answer, Some(gold));
    let enc = m.encode(&ex.utterance, &env);
    Instance { example: ex, env, enc }
}

pub fn entry(inst: &Instance, text: &str) -> BufferEntry {
    gold_entry(inst, &parse_program(text).unwrap()).expect("spellable")
}

pub fn view(id: &str, text: &str, buffer_empty: bool, top1: bool, any: bool, confidence: f64) -> ExampleView {
    ExampleView { id: id.into(), tokens: tokenize(text), buffer_empty, top1_correct: top1, any_beam_correct: any, confidence }
}

pub fn ctx(examples: Vec<ExampleView>, seed: u64) -> SelectionContext {
    SelectionContext { examples, annotated: BTreeSet::new(), seed }
}

pub fn mixed() -> SelectionContext {
    ctx(
        vec![
            view("a", "how many nations", true, false, false, 0.95),
            view("b", "which nation won most", false, true, true, 0.2),
            view("c", "what venue after 2004", true, false, true, 0.4),
            view("d", "name the film", true, false, false, 0.1),
            view("e", "count the drivers", true, true, true, 0.6),
            view("f", "top gold figure", true, false, false, 0.92),
        ],
        7,
    )
}

/// Five utterances; `gold` appears in four of them, three of which fail.
pub fn micro() -> SelectionContext {
    ctx(
        vec![
            view("m1", "most gold nation", true, false, false, 0.1),
            view("m2", "gold count", true, false, true, 0.2),
            view("m3", "least gold", true, false, false, 0.3),
            view("m4", "gold silver", false, true, true, 0.8),
            view("m5", "silver venue", false, true, true, 0.9),
        ],
        5,
    )
}

/// Two question families of three paraphrases each.
pub fn families() -> SelectionContext {
    ctx(
        vec![
            view("f1", "how many nations won gold medals", false, true, true, 0.5),
            view("f2", "how many nations won silver medals", false, true, true, 0.5),
            view("f3", "how many nations won bronze medals", false, true, true, 0.5),
            view("g1", "which film premiered at the venue after 2004", false, true, true, 0.5),
            view("g2", "which film premiered at the venue after 1998", false, true, true, 0.5),
            view("g3", "which film premiered at the venue after 2011", false, true, true, 0.5),
        ],
        17,
    )
}

pub fn d_minus(c: &SelectionContext) -> BTreeSet<String> {
    c.examples.iter().filter(|e| e.failed()).map(|e| e.id.clone()).collect()
}

/// Zeroes every wall-clock field.
pub fn untimed(mut r: ExperimentReport) -> ExperimentReport {
    r.wall_secs = 0.0;
    r.initial.wall_secs = 0.0;
    for it in &mut r.iterations {
        it.wall_secs = 0.0;
        if let Some(t) = &mut it.retrain {
            t.wall_secs = 0.0;
        }
    }
    r
}
