//! Training to a stall: explore into the buffers, fit the buffers, evaluate.

use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::buffer::{BufferEntry, BufferSet};
use crate::dataset::{Corpus, Dataset, Example};
use crate::executor::answers_match;
use crate::features::Encoded;
use crate::model::{Derivation, ParserModel};
use crate::mr::Program;
use crate::scalar::Scalar;
use crate::table::TableEnv;

/// An example bound to its table and encoding.
#[derive(Clone, Debug)]
pub struct Instance {
    pub example: Example,
    pub env: Arc<TableEnv>,
    pub enc: Encoded,
}

#[derive(Clone, Debug)]
pub struct Prepared {
    pub train: Vec<Instance>,
    pub dev: Vec<Instance>,
    pub test: Vec<Instance>,
}

pub fn prepare_split<F: Scalar>(model: &mut ParserModel<F>, d: &Dataset) -> Vec<Instance> {
    d.examples
        .iter()
        .map(|ex| {
            let env = d.tables[&ex.table_id].clone();
            let enc = model.encode(&ex.utterance, &env);
            Instance { example: ex.clone(), env, enc }
        })
        .collect()
}

pub fn prepare<F: Scalar>(model: &mut ParserModel<F>, c: &Corpus) -> Prepared {
    Prepared {
        train: prepare_split(model, &c.train),
        dev: prepare_split(model, &c.dev),
        test: prepare_split(model, &c.test),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Weak,
    Full,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "weak" => Ok(Mode::Weak),
            "full" => Ok(Mode::Full),
            _ => Err(format!("unknown training mode `{s}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainOptions {
    pub max_epochs: usize,
    pub seed: u64,
    /// Smallest dev gain, as a fraction, that still counts as progress.
    pub min_dev_gain: f64,
    /// Epochs over which the dev gain is measured.
    pub window: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions { max_epochs: 50, seed: 0, min_dev_gain: 0.001, window: 2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub hits_added: usize,
    pub buffer_hit_rate: f64,
    pub mean_buffer_size: f64,
    pub mean_loss: f64,
    pub dev_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub mode: Mode,
    pub initial_dev_accuracy: f64,
    pub epochs: Vec<EpochStats>,
    /// False when the epoch cap ended training.
    pub stalled: bool,
    pub dev_accuracy: f64,
    #[serde(default)]
    pub wall_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TrainError {
    #[error("full supervision needs a gold program for example {0}")]
    MissingGold(String),
    #[error("gold program of example {0} lies outside the search space")]
    GoldOutsideSpace(String),
}

/// The gold program of `inst` as a buffer entry.
pub fn gold_entry(inst: &Instance, p: &Program) -> Option<BufferEntry> {
    let acts = inst.enc.space.actions_of(p)?;
    Some(BufferEntry::new(&acts, inst.enc.space.program(&acts).to_string()))
}

pub fn beam<F: Scalar>(model: &ParserModel<F>, inst: &Instance, sketch: Option<&crate::mr::Sketch>) -> Vec<Derivation<F>> {
    let sc = model.scores(&inst.enc);
    model.beam_search(&inst.enc, &sc, model.hyper.beam_size, sketch)
}

pub fn derivation_correct<F: Scalar>(inst: &Instance, d: &Derivation<F>) -> bool {
    answers_match(&inst.enc.space.execute(&inst.env, &d.actions), &inst.example.answer)
}

pub fn top1<F: Scalar>(model: &ParserModel<F>, inst: &Instance) -> Option<Program> {
    beam(model, inst, None).first().map(|d| d.program(&inst.enc))
}

/// Fraction of instances whose top beam program executes to the answer.
pub fn accuracy<F: Scalar>(model: &ParserModel<F>, data: &[Instance]) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    let correct = data
        .iter()
        .filter(|inst| beam(model, inst, None).first().is_some_and(|d| derivation_correct(inst, d)))
        .count();
    correct as f64 / data.len() as f64
}

/// Runs beam search for one example and stores every correct derivation.
/// Returns how many programs never offered to the buffer before were found.
pub fn explore_and_update_buffer<F: Scalar>(model: &ParserModel<F>, inst: &Instance, buffers: &mut BufferSet, i: usize) -> usize {
    let cap = buffers.capacity;
    let buf = buffers.get_mut(i);
    if buf.is_locked() {
        return 0;
    }
    let sc = model.scores(&inst.enc);
    let derivs = model.beam_search(&inst.enc, &sc, model.hyper.beam_size, buf.sketch());
    let mut added = 0;
    for d in derivs {
        if !derivation_correct(inst, &d) {
            continue;
        }
        let entry = BufferEntry::new(&d.actions, d.program(&inst.enc).to_string());
        if buf.contains(&entry.text) {
            continue;
        }
        if !buf.seen(&entry.text) {
            added += 1;
        }
        buf.insert(entry, cap, |acts| model.log_prob(&inst.enc, &sc, acts));
    }
    added
}

/// Locks every training buffer to its gold program.
pub fn install_gold(data: &[Instance], buffers: &mut BufferSet) -> Result<(), TrainError> {
    for (i, inst) in data.iter().enumerate() {
        let gold = inst
            .example
            .gold_mr
            .as_ref()
            .ok_or_else(|| TrainError::MissingGold(inst.example.id.clone()))?;
        let entry = gold_entry(inst, gold).ok_or_else(|| TrainError::GoldOutsideSpace(inst.example.id.clone()))?;
        buffers.get_mut(i).lock_to(entry);
    }
    Ok(())
}

/// Epochs of exploration (weak mode) and buffer fitting until no new program
/// is found and dev accuracy stops improving, or the epoch cap.
pub fn train<F: Scalar>(
    model: &mut ParserModel<F>,
    data: &Prepared,
    buffers: &mut BufferSet,
    mode: Mode,
    opts: &TrainOptions,
) -> Result<TrainReport, TrainError> {
    let start = Instant::now();
    if mode == Mode::Full {
        install_gold(&data.train, buffers)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    let initial = accuracy(model, &data.dev);
    let mut history = vec![initial];
    let mut epochs = Vec::new();
    let mut stalled = false;
    for epoch in 1..=opts.max_epochs {
        let mut hits = 0;
        if mode == Mode::Weak {
            for (i, inst) in data.train.iter().enumerate() {
                hits += explore_and_update_buffer(model, inst, buffers, i);
            }
        }
        order.shuffle(&mut rng);
        let mut loss = 0.0;
        let mut fitted = 0usize;
        for &i in &order {
            let buf = buffers.get(i);
            if buf.is_empty() {
                continue;
            }
            let seqs = buf.action_seqs();
            let (l, g) = model.mml_data_grad(&data.train[i].enc, &seqs).expect("nonempty buffer");
            model.adagrad_step(&g);
            loss += l.as_f64();
            fitted += 1;
        }
        let dev = accuracy(model, &data.dev);
        history.push(dev);
        epochs.push(EpochStats {
            epoch,
            hits_added: hits,
            buffer_hit_rate: buffers.hit_rate(),
            mean_buffer_size: buffers.mean_size(),
            mean_loss: if fitted == 0 { 0.0 } else { loss / fitted as f64 },
            dev_accuracy: dev,
        });
        if hits == 0 && history.len() > opts.window {
            let gain = dev - history[history.len() - 1 - opts.window];
            if gain < opts.min_dev_gain {
                stalled = true;
                break;
            }
        }
    }
    Ok(TrainReport {
        mode,
        initial_dev_accuracy: initial,
        dev_accuracy: *history.last().expect("initial entry"),
        epochs,
        stalled,
        wall_secs: start.elapsed().as_secs_f64(),
    })
}
