//! Locally normalized log-linear parser over the constrained action space.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::path::Path;

use indexmap::IndexMap;
use rustc_hash::{FxBuildHasher, FxHashMap};
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::features::{Encoded, Feature, FeatureText, Interner, START};
use crate::grammar::{allowed, Action, NO_COL};
use crate::mr::{Program, Sketch, MAX_PROGRAM_LEN};
use crate::scalar::{log_sum_exp, Scalar};
use crate::table::TableEnv;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyper {
    pub beam_size: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub buffer_capacity: usize,
    pub max_len: usize,
}

impl Default for Hyper {
    fn default() -> Self {
        Hyper {
            beam_size: 32,
            learning_rate: 0.1,
            l2: 1e-4,
            buffer_capacity: 10,
            max_len: MAX_PROGRAM_LEN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("empty buffer")]
    EmptyBuffer,
    #[error("program is outside the action space: {0}")]
    OutsideSpace(String),
    #[error("checkpoint line {line}: {message}")]
    Checkpoint { line: usize, message: String },
    #[error("{0}")]
    Io(String),
}

pub type ActionSeq = SmallVec<[Action; 4]>;

#[derive(Clone, Debug, PartialEq)]
pub struct Derivation<F> {
    pub actions: ActionSeq,
    pub log_prob: F,
    pub step_log_probs: SmallVec<[F; 4]>,
}

impl<F: Scalar> Derivation<F> {
    pub fn program(&self, enc: &Encoded) -> Program {
        enc.space.program(&self.actions)
    }

    pub fn prob(&self) -> F {
        self.log_prob.exp()
    }

    fn finished(&self) -> bool {
        self.actions.last().is_some_and(|a| !a.func.produces_rows())
    }
}

/// Per-example score tables for one weight vector.
#[derive(Clone, Debug)]
pub struct Scores<F> {
    /// Operator, column and literal part of each action's score, by rank.
    base: Vec<F>,
    trans: [[F; 9]; 10],
    pos: Vec<[F; 9]>,
    len: Vec<F>,
    same: [F; 9],
}

/// What a decoding step conditions on: the previous operator and its column.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Prev {
    pub func: u8,
    pub col: u8,
}

impl Prev {
    pub const START: Prev = Prev { func: START, col: NO_COL };

    pub fn of(actions: &[Action]) -> Prev {
        actions.last().map_or(Prev::START, |a| Prev { func: a.func.index() as u8, col: a.col })
    }

    fn same_column(self, a: &Action) -> bool {
        a.col != NO_COL && a.col == self.col
    }
}

/// Log-softmax tables keyed by (step, previous operator, previous column).
struct StepTables<F> {
    ncol: usize,
    slots: Vec<Option<Vec<F>>>,
}

impl<F: Scalar> StepTables<F> {
    fn new(enc: &Encoded) -> Self {
        let ncol = enc.columns.len();
        StepTables { ncol, slots: vec![None; enc.space.max_len * 10 * (ncol + 1)] }
    }

    fn get(&mut self, enc: &Encoded, sc: &Scores<F>, step: usize, prev: Prev) -> &[F] {
        let col = if prev.col == NO_COL { self.ncol } else { prev.col as usize };
        let slot = &mut self.slots[(step * 10 + prev.func as usize) * (self.ncol + 1) + col];
        slot.get_or_insert_with(|| {
            let logits: Vec<F> = enc
                .space
                .actions(step)
                .iter()
                .map(|a| sc.logit(step, prev, a))
                .collect();
            let z = log_sum_exp(&logits);
            logits.into_iter().map(|l| l - z).collect()
        })
    }
}

impl<F: Scalar> Scores<F> {
    fn logit(&self, step: usize, prev: Prev, a: &Action) -> F {
        let f = a.func.index();
        let mut s = self.base[a.rank as usize] + self.trans[prev.func as usize][f] + self.pos[step][f];
        if prev.same_column(a) {
            s += self.same[f];
        }
        if !a.func.produces_rows() {
            s += self.len[step + 1];
        }
        s
    }
}

/// Log of the probability mass left at `step` once the row actions already
/// in `prefix` are excluded.
fn remaining<F: Scalar>(enc: &Encoded, t: &[F], step: usize, prefix: &[Action]) -> F {
    let mut used = F::zero();
    for u in prefix {
        if let Some(j) = enc.space.position(step, u).filter(|_| u.func.produces_rows()) {
            used += t[j].exp();
        }
    }
    if used == F::zero() {
        F::zero()
    } else {
        (-used).ln_1p()
    }
}

/// Every feature that fires when `a` is chosen at `step` after `prev`.
pub fn featurize(enc: &Encoded, step: usize, prev: Prev, a: &Action) -> Vec<Feature> {
    let f = a.func.index() as u8;
    let mut out = Vec::new();
    out.extend(enc.words.iter().map(|&w| Feature::Unigram(w, f)));
    out.extend(enc.bigrams.iter().map(|&(x, y)| Feature::Bigram(x, y, f)));
    if let Some(c) = a.column() {
        out.extend(column_features(enc, c, f));
    }
    if let Some(l) = a.literal() {
        out.extend(literal_features(enc, l, f));
    }
    out.push(Feature::Transition(prev.func, f));
    out.push(Feature::Position(step as u8, f));
    if !a.func.produces_rows() {
        out.push(Feature::Length(step as u8 + 1));
    }
    if prev.same_column(a) {
        out.push(Feature::SameColumn(f));
    }
    out
}

fn column_features(enc: &Encoded, c: usize, f: u8) -> impl Iterator<Item = Feature> + '_ {
    let col = &enc.columns[c];
    let fixed = [
        col.overlap.then_some(Feature::ColumnOverlap(f)),
        Some(Feature::ColumnName(col.name, f)),
        Some(Feature::ColumnKind(col.kind, f)),
        col.context.map(|w| Feature::ColumnContext(w, f)),
    ];
    fixed
        .into_iter()
        .flatten()
        .chain(enc.words.iter().map(move |&w| Feature::WordColumn(w, col.name, f)))
}

fn literal_features(enc: &Encoded, l: usize, f: u8) -> impl Iterator<Item = Feature> {
    let lit = &enc.literals[l];
    [
        Some(Feature::LiteralMatch(lit.matched, f)),
        lit.context.map(|w| Feature::LiteralContext(w, f)),
        lit.context2.map(|w| Feature::LiteralContext2(w, f)),
    ]
    .into_iter()
    .flatten()
}

/// Sparse gradient in first-touch order.
pub type Gradient<F> = IndexMap<Feature, F, FxBuildHasher>;

/// Gradient mass per score factor, expanded into features afterwards.
struct FactorGrad<F> {
    ncol: usize,
    nlit: usize,
    func: [F; 9],
    funccol: Vec<F>,
    funclit: Vec<F>,
    trans: [[F; 9]; 10],
    pos: Vec<[F; 9]>,
    len: Vec<F>,
    same: [F; 9],
}

impl<F: Scalar> FactorGrad<F> {
    fn new(enc: &Encoded) -> Self {
        let ncol = enc.columns.len();
        let nlit = enc.literals.len();
        let max_len = enc.space.max_len;
        FactorGrad {
            ncol,
            nlit,
            func: [F::zero(); 9],
            funccol: vec![F::zero(); 9 * ncol],
            funclit: vec![F::zero(); 3 * nlit],
            trans: [[F::zero(); 9]; 10],
            pos: vec![[F::zero(); 9]; max_len],
            len: vec![F::zero(); max_len + 1],
            same: [F::zero(); 9],
        }
    }

    fn add(&mut self, step: usize, prev: Prev, a: &Action, v: F) {
        let f = a.func.index();
        self.func[f] += v;
        if let Some(c) = a.column() {
            self.funccol[f * self.ncol + c] += v;
        }
        if let Some(l) = a.literal() {
            self.funclit[f * self.nlit + l] += v;
        }
        self.trans[prev.func as usize][f] += v;
        self.pos[step][f] += v;
        if !a.func.produces_rows() {
            self.len[step + 1] += v;
        }
        if prev.same_column(a) {
            self.same[f] += v;
        }
    }

    fn expand(&self, enc: &Encoded, out: &mut Gradient<F>) {
        let mut put = |feat: Feature, v: F| {
            *out.entry(feat).or_insert_with(F::zero) += v;
        };
        for (f, &v) in self.func.iter().enumerate() {
            if v != F::zero() {
                for &w in &enc.words {
                    put(Feature::Unigram(w, f as u8), v);
                }
                for &(x, y) in &enc.bigrams {
                    put(Feature::Bigram(x, y, f as u8), v);
                }
            }
        }
        for f in 0..9 {
            for c in 0..self.ncol {
                let v = self.funccol[f * self.ncol + c];
                if v != F::zero() {
                    for feat in column_features(enc, c, f as u8) {
                        put(feat, v);
                    }
                }
            }
        }
        for f in 0..3 {
            for l in 0..self.nlit {
                let v = self.funclit[f * self.nlit + l];
                if v != F::zero() {
                    for feat in literal_features(enc, l, f as u8) {
                        put(feat, v);
                    }
                }
            }
        }
        for (p, row) in self.trans.iter().enumerate() {
            for (f, &v) in row.iter().enumerate() {
                if v != F::zero() {
                    put(Feature::Transition(p as u8, f as u8), v);
                }
            }
        }
        for (i, row) in self.pos.iter().enumerate() {
            for (f, &v) in row.iter().enumerate() {
                if v != F::zero() {
                    put(Feature::Position(i as u8, f as u8), v);
                }
            }
        }
        for (l, &v) in self.len.iter().enumerate() {
            if v != F::zero() {
                put(Feature::Length(l as u8), v);
            }
        }
        for (f, &v) in self.same.iter().enumerate() {
            if v != F::zero() {
                put(Feature::SameColumn(f as u8), v);
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct ParserModel<F> {
    pub hyper: Hyper,
    syms: Interner,
    index: FxHashMap<Feature, u32>,
    features: Vec<Feature>,
    weights: Vec<F>,
    sq_grad: Vec<F>,
}

impl<F: Scalar> ParserModel<F> {
    pub fn new(hyper: Hyper) -> Self {
        ParserModel {
            hyper,
            syms: Interner::default(),
            index: FxHashMap::default(),
            features: Vec::new(),
            weights: Vec::new(),
            sq_grad: Vec::new(),
        }
    }

    pub fn syms(&self) -> &Interner {
        &self.syms
    }

    pub fn encode(&mut self, utterance: &[String], env: &TableEnv) -> Encoded {
        Encoded::new(utterance, env, self.hyper.max_len, &mut self.syms)
    }

    pub fn weight(&self, f: &Feature) -> F {
        self.index.get(f).map_or(F::zero(), |&i| self.weights[i as usize])
    }

    fn slot(&mut self, f: Feature) -> usize {
        if let Some(&i) = self.index.get(&f) {
            return i as usize;
        }
        let i = self.weights.len();
        self.index.insert(f, i as u32);
        self.features.push(f);
        self.weights.push(F::zero());
        self.sq_grad.push(F::zero());
        i
    }

    pub fn set_weight(&mut self, f: Feature, w: F) {
        let i = self.slot(f);
        self.weights[i] = w;
    }

    /// Features with a stored weight, in first-touch order.
    pub fn weights(&self) -> impl Iterator<Item = (Feature, F)> + '_ {
        self.features.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn feature_text(&self, f: &Feature) -> String {
        FeatureText(f, &self.syms).to_string()
    }

    pub fn scores(&self, enc: &Encoded) -> Scores<F> {
        let w = |f: Feature| self.weight(&f);
        let ncol = enc.columns.len();
        let mut func = [F::zero(); 9];
        for (f, slot) in func.iter_mut().enumerate() {
            let f = f as u8;
            let mut s = F::zero();
            for &x in &enc.words {
                s += w(Feature::Unigram(x, f));
            }
            for &(x, y) in &enc.bigrams {
                s += w(Feature::Bigram(x, y, f));
            }
            *slot = s;
        }
        let mut funccol = vec![F::zero(); 9 * ncol];
        for f in 0..9 {
            for c in 0..ncol {
                funccol[f * ncol + c] = column_features(enc, c, f as u8).map(w).sum();
            }
        }
        let nlit = enc.literals.len();
        let mut funclit = vec![F::zero(); 3 * nlit];
        for f in 0..3 {
            for l in 0..nlit {
                funclit[f * nlit + l] = literal_features(enc, l, f as u8).map(w).sum();
            }
        }
        let base = enc
            .space
            .all_actions()
            .iter()
            .map(|a| {
                let f = a.func.index();
                let mut s = func[f];
                if let Some(c) = a.column() {
                    s += funccol[f * ncol + c];
                }
                if let Some(l) = a.literal() {
                    s += funclit[f * nlit + l];
                }
                s
            })
            .collect();
        let mut trans = [[F::zero(); 9]; 10];
        for (p, row) in trans.iter_mut().enumerate() {
            for (f, v) in row.iter_mut().enumerate() {
                *v = w(Feature::Transition(p as u8, f as u8));
            }
        }
        let max_len = enc.space.max_len;
        let pos = (0..max_len)
            .map(|i| {
                let mut row = [F::zero(); 9];
                for (f, v) in row.iter_mut().enumerate() {
                    *v = w(Feature::Position(i as u8, f as u8));
                }
                row
            })
            .collect();
        let len = (0..=max_len).map(|l| w(Feature::Length(l as u8))).collect();
        let mut same = [F::zero(); 9];
        for (f, v) in same.iter_mut().enumerate() {
            *v = w(Feature::SameColumn(f as u8));
        }
        Scores { base, trans, pos, len, same }
    }

    /// Unnormalized score of one decoding choice, summed feature by feature.
    pub fn action_score(&self, enc: &Encoded, step: usize, prev: Prev, a: &Action) -> F {
        featurize(enc, step, prev, a).iter().map(|f| self.weight(f)).sum()
    }

    /// Log-probability of each valid action at `step` after `prev`, aligned
    /// with `enc.space.actions(step)`.
    pub fn step_distribution(&self, enc: &Encoded, step: usize, prev: Prev) -> Vec<F> {
        let sc = self.scores(enc);
        let mut t = StepTables::new(enc);
        t.get(enc, &sc, step, prev).to_vec()
    }

    pub fn log_prob(&self, enc: &Encoded, sc: &Scores<F>, actions: &[Action]) -> F {
        let mut tables = StepTables::new(enc);
        self.log_prob_with(enc, sc, &mut tables, actions)
    }

    fn log_prob_with(&self, enc: &Encoded, sc: &Scores<F>, tables: &mut StepTables<F>, actions: &[Action]) -> F {
        let mut lp = F::zero();
        for (i, a) in actions.iter().enumerate() {
            let t = tables.get(enc, sc, i, Prev::of(&actions[..i]));
            let j = enc.space.position(i, a).expect("action valid at its step");
            lp += t[j] - remaining(enc, t, i, &actions[..i]);
        }
        lp
    }

    /// Beam search over the action space. Finished and unfinished candidates
    /// compete for the same `k` slots; ties go to the smaller program text.
    pub fn beam_search(&self, enc: &Encoded, sc: &Scores<F>, k: usize, sketch: Option<&Sketch>) -> Vec<Derivation<F>> {
        let space = &enc.space;
        let len = match sketch {
            Some(s) if s.is_empty() || s.len() > space.max_len => return Vec::new(),
            Some(s) => s.len(),
            None => space.max_len,
        };
        if k == 0 || len == 0 {
            return Vec::new();
        }
        let mut tables = StepTables::new(enc);
        let mut pool: Vec<Derivation<F>> =
            vec![Derivation { actions: SmallVec::new(), log_prob: F::zero(), step_log_probs: SmallVec::new() }];
        struct Cand<F> {
            logp: F,
            parent: usize,
            action: Option<(Action, F)>,
        }
        for step in 0..len {
            if pool.iter().all(|d| d.finished()) {
                break;
            }
            let mut cands: Vec<Cand<F>> = Vec::new();
            for (pi, d) in pool.iter().enumerate() {
                if d.finished() {
                    cands.push(Cand { logp: d.log_prob, parent: pi, action: None });
                    continue;
                }
                let t = tables.get(enc, sc, step, Prev::of(&d.actions));
                let norm = remaining(enc, t, step, &d.actions);
                for (j, a) in space.actions(step).iter().enumerate() {
                    if !allowed(&d.actions, a) {
                        continue;
                    }
                    if let Some(s) = sketch {
                        if a.func != s.funcs[step] || (step + 1 == len && a.func.produces_rows()) {
                            continue;
                        }
                    }
                    let lp = t[j] - norm;
                    cands.push(Cand { logp: d.log_prob + lp, parent: pi, action: Some((*a, lp)) });
                }
            }
            let cmp = |x: &Cand<F>, y: &Cand<F>| {
                y.logp.partial_cmp(&x.logp).unwrap_or(Ordering::Equal).then_with(|| {
                    let xr = pool[x.parent].actions.iter().map(|a| a.rank).chain(x.action.map(|(a, _)| a.rank));
                    let yr = pool[y.parent].actions.iter().map(|a| a.rank).chain(y.action.map(|(a, _)| a.rank));
                    xr.cmp(yr)
                })
            };
            if cands.len() > k {
                cands.select_nth_unstable_by(k - 1, cmp);
                cands.truncate(k);
            }
            cands.sort_by(cmp);
            pool = cands
                .into_iter()
                .map(|c| {
                    let parent = &pool[c.parent];
                    match c.action {
                        None => parent.clone(),
                        Some((a, lp)) => {
                            let mut d = parent.clone();
                            d.actions.push(a);
                            d.step_log_probs.push(lp);
                            d.log_prob = c.logp;
                            d
                        }
                    }
                })
                .collect();
        }
        pool.retain(|d| d.finished());
        pool
    }

    /// Negative log marginal likelihood of the buffer without regularization,
    /// and its gradient.
    pub fn mml_data_grad(&self, enc: &Encoded, buffer: &[&[Action]]) -> Result<(F, Gradient<F>), ModelError> {
        if buffer.is_empty() {
            return Err(ModelError::EmptyBuffer);
        }
        let sc = self.scores(enc);
        let mut tables = StepTables::new(enc);
        let logps: Vec<F> = buffer.iter().map(|z| self.log_prob_with(enc, &sc, &mut tables, z)).collect();
        let z = log_sum_exp(&logps);
        let mut fg = FactorGrad::new(enc);
        let mut mass: FxHashMap<(usize, Prev), F> = FxHashMap::default();
        let mut order: Vec<(usize, Prev)> = Vec::new();
        for (acts, &lp) in buffer.iter().zip(&logps) {
            let q = (lp - z).exp();
            for (i, a) in acts.iter().enumerate() {
                let prev = Prev::of(&acts[..i]);
                fg.add(i, prev, a, -q);
                // Expectation under the step softmax restricted to unused
                // actions: (E[f] - sum_used p(u) f(u)) / (1 - sum_used p(u)).
                let t = tables.get(enc, &sc, i, prev);
                let scale = q / remaining(enc, t, i, &acts[..i]).exp();
                for u in &acts[..i] {
                    if let Some(j) = enc.space.position(i, u).filter(|_| u.func.produces_rows()) {
                        let pu = t[j].exp();
                        fg.add(i, prev, u, -scale * pu);
                    }
                }
                let m = mass.entry((i, prev)).or_insert_with(|| {
                    order.push((i, prev));
                    F::zero()
                });
                *m += scale;
            }
        }
        for key in order {
            let w = mass[&key];
            let (step, prev) = key;
            let t = tables.get(enc, &sc, step, prev).to_vec();
            for (a, lp) in enc.space.actions(step).iter().zip(t) {
                fg.add(step, prev, a, w * lp.exp());
            }
        }
        let mut grad = Gradient::default();
        fg.expand(enc, &mut grad);
        Ok((-z, grad))
    }

    /// MML objective with L2 over every stored weight:
    /// `-log sum_z P(z|x) + l2/2 * |theta|^2`.
    pub fn mml_loss_and_grad(&self, enc: &Encoded, buffer: &[&[Action]]) -> Result<(F, Gradient<F>), ModelError> {
        let (mut loss, mut grad) = self.mml_data_grad(enc, buffer)?;
        let l2 = F::of(self.hyper.l2);
        for (f, w) in self.weights() {
            if w != F::zero() {
                loss += l2 * w * w / F::of(2.0);
                *grad.entry(f).or_insert_with(F::zero) += l2 * w;
            }
        }
        Ok((loss, grad))
    }

    /// One adaptive-rate step. L2 is applied to the features the gradient
    /// touches.
    pub fn adagrad_step(&mut self, grad: &Gradient<F>) {
        let lr = F::of(self.hyper.learning_rate);
        let l2 = F::of(self.hyper.l2);
        let eps = F::of(1e-10);
        for (f, &g) in grad {
            let i = self.slot(*f);
            let g = g + l2 * self.weights[i];
            if g == F::zero() {
                continue;
            }
            self.sq_grad[i] += g * g;
            self.weights[i] -= lr * g / (self.sq_grad[i].sqrt() + eps);
        }
    }

    pub fn to_checkpoint(&self) -> String {
        let mut out = String::from("tablesp-checkpoint 1\n");
        let hyper = serde_json::to_value(&self.hyper).expect("hyper serializes");
        for (k, v) in hyper.as_object().expect("object") {
            writeln!(out, "hyper\t{k}\t{v}").expect("string write");
        }
        let mut lines: Vec<(String, f64)> = self
            .weights()
            .filter(|(_, w)| *w != F::zero())
            .map(|(f, w)| (self.feature_text(&f), w.as_f64()))
            .collect();
        lines.sort_by(|a, b| a.0.cmp(&b.0));
        for (f, w) in lines {
            writeln!(out, "w\t{f}\t{w:?}").expect("string write");
        }
        out
    }

    pub fn from_checkpoint(text: &str) -> Result<Self, ModelError> {
        let bad = |line: usize, message: &str| ModelError::Checkpoint { line, message: message.to_string() };
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, "tablesp-checkpoint 1")) => {}
            _ => return Err(bad(1, "missing or unsupported version header")),
        }
        let mut hyper = serde_json::Map::new();
        let mut weights = Vec::new();
        let mut syms = Interner::default();
        for (i, line) in lines {
            let n = i + 1;
            let parts: Vec<&str> = line.split('\t').collect();
            match parts.as_slice() {
                ["hyper", k, v] => {
                    let v: serde_json::Value = serde_json::from_str(v).map_err(|e| bad(n, &e.to_string()))?;
                    hyper.insert(k.to_string(), v);
                }
                ["w", f, w] => {
                    let feat = Feature::parse(f, &mut syms).ok_or_else(|| bad(n, "unknown feature"))?;
                    let w: f64 = w.parse().map_err(|_| bad(n, "bad weight"))?;
                    weights.push((feat, w));
                }
                [""] => {}
                _ => return Err(bad(n, "unrecognized line")),
            }
        }
        let hyper: Hyper =
            serde_json::from_value(serde_json::Value::Object(hyper)).map_err(|e| bad(0, &e.to_string()))?;
        let mut m = ParserModel::new(hyper);
        m.syms = syms;
        for (f, w) in weights {
            m.set_weight(f, F::of(w));
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        std::fs::write(path, self.to_checkpoint()).map_err(|e| ModelError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path).map_err(|e| ModelError::Io(format!("{}: {e}", path.display())))?;
        Self::from_checkpoint(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mr::FuncName;
    use crate::table::{Cell, Column, ColumnKind};
    use crate::text::tokenize;
    use rand::{Rng, SeedableRng};

    fn env() -> TableEnv {
        TableEnv::new(
            "m",
            vec![
                Column { name: "Nation".into(), kind: ColumnKind::Text },
                Column { name: "Gold".into(), kind: ColumnKind::Number },
            ],
            vec![
                vec![Cell::text("Norway"), Cell::int(3)],
                vec![Cell::text("Chile"), Cell::int(1)],
                vec![Cell::text("Peru"), Cell::int(1)],
            ],
        )
        .unwrap()
    }

    fn randomize(m: &mut ParserModel<f64>, enc: &Encoded, seed: u64) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        for step in 0..enc.space.max_len {
            for a in enc.space.actions(step) {
                for f in featurize(enc, step, Prev::START, a) {
                    m.set_weight(f, rng.random_range(-1.0..1.0));
                }
            }
        }
    }

    #[test]
    fn factored_scores_match_feature_sums() {
        let mut m = ParserModel::<f64>::new(Hyper::default());
        let e = env();
        let enc = m.encode(&tokenize("which nation has 1 gold"), &e);
        randomize(&mut m, &enc, 3);
        m.set_weight(Feature::Transition(FuncName::Argmax.index() as u8, FuncName::Hop.index() as u8), 0.7);
        m.set_weight(Feature::SameColumn(FuncName::Hop.index() as u8), -0.4);
        let sc = m.scores(&enc);
        for step in 0..enc.space.max_len {
            for prev in [Prev::START, Prev { func: FuncName::Argmax.index() as u8, col: 1 }] {
                for a in enc.space.actions(step) {
                    let direct = m.action_score(&enc, step, prev, a);
                    assert!((direct - sc.logit(step, prev, a)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn zero_weights_rank_by_text() {
        let mut m = ParserModel::<f64>::new(Hyper { max_len: 2, ..Hyper::default() });
        let e = env();
        let enc = m.encode(&tokenize("which nation"), &e);
        let sc = m.scores(&enc);
        let beam = m.beam_search(&enc, &sc, 1000, None);
        for w in beam.windows(2) {
            assert!(w[0].log_prob >= w[1].log_prob);
            if w[0].log_prob == w[1].log_prob {
                assert!(w[0].program(&enc).to_string() < w[1].program(&enc).to_string());
            }
        }
    }

    #[test]
    fn sketch_constrains_beam() {
        let mut m = ParserModel::<f64>::new(Hyper::default());
        let e = env();
        let enc = m.encode(&tokenize("which nation has the most gold"), &e);
        randomize(&mut m, &enc, 5);
        let sc = m.scores(&enc);
        let sk: Sketch = "(argmax ...) (hop ...)".parse().unwrap();
        let beam = m.beam_search(&enc, &sc, 8, Some(&sk));
        assert!(!beam.is_empty());
        for d in &beam {
            assert_eq!(d.program(&enc).sketch(), sk);
            let lp = m.log_prob(&enc, &sc, &d.actions);
            assert!((lp - d.log_prob).abs() < 1e-12);
            let s: f64 = d.step_log_probs.iter().sum();
            assert!((s - d.log_prob).abs() < 1e-12);
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut m = ParserModel::<f64>::new(Hyper::default());
        let e = env();
        let enc = m.encode(&tokenize("which nation has 1 gold"), &e);
        randomize(&mut m, &enc, 9);
        let text = m.to_checkpoint();
        let back = ParserModel::<f64>::from_checkpoint(&text).unwrap();
        assert_eq!(back.to_checkpoint(), text);
        assert_eq!(back.hyper, m.hyper);
        assert!(ParserModel::<f64>::from_checkpoint("junk").is_err());
    }
}
