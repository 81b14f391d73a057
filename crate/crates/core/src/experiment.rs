//! The annotate-and-retrain loop, its configuration, and reports.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::active::{Heuristic, SelectionContext, SelectionDiagnostics};
use crate::buffer::{BufferEntry, BufferSet};
use crate::dataset::{Corpus, DatasetError};
use crate::executor::answers_match;
use crate::generator::{generate_corpus, GenConfig};
use crate::model::{Hyper, ParserModel};
use crate::scalar::Scalar;
use crate::supervision::{
    apply, validate, AnnotationKind, AnnotationLedger, Annotator, Candidate, OracleAnnotator, Query, SupervisionError,
};
use crate::train::{accuracy, beam, prepare, train, Instance, Mode, Prepared, TrainError, TrainOptions, TrainReport};

/// A query budget: an absolute count or a percentage of the training set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Budget {
    Count(usize),
    Percent(f64),
}

impl Budget {
    pub fn resolve(self, n_train: usize) -> usize {
        match self {
            Budget::Count(n) => n,
            Budget::Percent(p) => (p / 100.0 * n_train as f64).round() as usize,
        }
    }
}

impl Default for Budget {
    fn default() -> Self {
        Budget::Count(0)
    }
}

impl fmt::Display for Budget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Budget::Count(n) => write!(f, "{n}"),
            Budget::Percent(p) => write!(f, "{p}%"),
        }
    }
}

impl FromStr for Budget {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if let Some(p) = s.strip_suffix('%') {
            let p: f64 = p.trim().parse().map_err(|_| format!("bad budget `{s}`"))?;
            if !(0.0..=100.0).contains(&p) {
                return Err(format!("budget percentage out of range: `{s}`"));
            }
            Ok(Budget::Percent(p))
        } else {
            s.parse().map(Budget::Count).map_err(|_| format!("bad budget `{s}`"))
        }
    }
}

impl Serialize for Budget {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Budget::Count(n) => s.serialize_u64(*n as u64),
            Budget::Percent(_) => s.serialize_str(&self.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for Budget {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            N(u64),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::N(n) => Ok(Budget::Count(n as usize)),
            Raw::S(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Start {
    #[default]
    Cold,
    Warm,
}

impl FromStr for Start {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "cold" => Ok(Start::Cold),
            "warm" => Ok(Start::Warm),
            _ => Err(format!("unknown start `{s}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotatorChoice {
    #[default]
    Oracle,
    Http,
}

impl FromStr for AnnotatorChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "oracle" => Ok(AnnotatorChoice::Oracle),
            "http" | "human" => Ok(AnnotatorChoice::Http),
            _ => Err(format!("unknown annotator `{s}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Shown in comparison tables; derived from the settings when empty.
    pub label: String,
    /// Saved corpus directory; the generator settings are used when unset.
    pub corpus_dir: Option<PathBuf>,
    pub generator: GenConfig,
    pub heuristic: Heuristic,
    pub supervision: AnnotationKind,
    /// Train with every gold program instead of running the loop.
    pub full_supervision: bool,
    pub budget: Budget,
    pub iterations: usize,
    pub annotator: AnnotatorChoice,
    pub annotator_timeout_secs: u64,
    pub start: Start,
    pub hyper: Hyper,
    /// Epoch cap of the first training run.
    pub max_epochs: usize,
    /// Epoch cap of each retraining run after annotation.
    pub iteration_epochs: usize,
    pub min_dev_gain: f64,
    pub seeds: Vec<u64>,
    pub out_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            label: String::new(),
            corpus_dir: None,
            generator: GenConfig::default(),
            heuristic: Heuristic::Correctness,
            supervision: AnnotationKind::FullMr,
            full_supervision: false,
            budget: Budget::Count(0),
            iterations: 3,
            annotator: AnnotatorChoice::Oracle,
            annotator_timeout_secs: 3600,
            start: Start::Cold,
            hyper: Hyper::default(),
            max_epochs: 30,
            iteration_epochs: 15,
            min_dev_gain: 0.001,
            seeds: vec![1, 2, 3, 4, 5],
            out_dir: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Supervision(#[from] SupervisionError),
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.iterations == 0 {
            return Err(ExperimentError::InvalidConfig("iterations must be at least 1".into()));
        }
        if self.hyper.beam_size == 0 {
            return Err(ExperimentError::InvalidConfig("beam_size must be at least 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(ExperimentError::InvalidConfig("at least one seed is required".into()));
        }
        Ok(())
    }

    pub fn display_label(&self) -> String {
        if !self.label.is_empty() {
            return self.label.clone();
        }
        if self.full_supervision {
            return "full_supervision".into();
        }
        let kind = match self.supervision {
            AnnotationKind::FullMr => "full_mr",
            AnnotationKind::Sketch => "sketch",
        };
        let start = match self.start {
            Start::Cold => "cold",
            Start::Warm => "warm",
        };
        format!("{}/{kind}/{}/{start}", self.heuristic, self.budget)
    }

    pub fn load_corpus(&self) -> Result<Corpus, ExperimentError> {
        Ok(match &self.corpus_dir {
            Some(dir) => Corpus::load(dir)?,
            None => generate_corpus(&self.generator)?,
        })
    }

    fn train_options(&self, seed: u64, max_epochs: usize) -> TrainOptions {
        TrainOptions { max_epochs, seed, min_dev_gain: self.min_dev_gain, ..TrainOptions::default() }
    }

    /// Options of the first training run; a zero-budget run trains exactly
    /// once with these.
    pub fn initial_options(&self, seed: u64) -> TrainOptions {
        self.train_options(seed, self.max_epochs)
    }
}

/// `total` split over `iterations`, earlier iterations taking the remainder.
pub fn split_budget(total: usize, iterations: usize) -> Vec<usize> {
    if iterations == 0 {
        return Vec::new();
    }
    let (base, extra) = (total / iterations, total % iterations);
    (0..iterations).map(|i| base + usize::from(i < extra)).collect()
}

/// Seeds buffers with every one-statement program that reaches the answer.
pub fn warm_start<F: Scalar>(model: &ParserModel<F>, data: &[Instance], buffers: &mut BufferSet) -> usize {
    let cap = buffers.capacity;
    let mut hits = 0;
    for (i, inst) in data.iter().enumerate() {
        let buf = buffers.get_mut(i);
        let sc = model.scores(&inst.enc);
        for a in inst.enc.space.actions(0).iter().filter(|a| !a.func.produces_rows()) {
            let acts = [*a];
            if !answers_match(&inst.enc.space.execute(&inst.env, &acts), &inst.example.answer) {
                continue;
            }
            let entry = BufferEntry::new(&acts, inst.enc.space.program(&acts).to_string());
            if buf.insert(entry, cap, |x| model.log_prob(&inst.enc, &sc, x)) {
                hits += 1;
            }
        }
    }
    hits
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    pub iteration: usize,
    pub budget: usize,
    pub queries: usize,
    pub applied: usize,
    pub rejected: Vec<String>,
    /// True when selection came back empty with budget left.
    pub exhausted_early: bool,
    pub fallback: Option<String>,
    pub diagnostics: SelectionDiagnostics,
    /// `None` when nothing was applied and retraining was skipped.
    pub retrain: Option<TrainReport>,
    pub train_accuracy: f64,
    pub dev_accuracy: f64,
    pub test_accuracy: f64,
    pub buffer_hit_rate: f64,
    pub wall_secs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub label: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub warm_start_hits: usize,
    pub initial: TrainReport,
    pub initial_dev_accuracy: f64,
    pub initial_test_accuracy: f64,
    pub iterations: Vec<IterationReport>,
    pub queries_spent: usize,
    pub final_dev_accuracy: f64,
    pub final_test_accuracy: f64,
    pub wall_secs: f64,
}

/// Progress notifications for whoever drives or watches the loop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Progress {
    Training { iteration: usize },
    AwaitingAnnotations { iteration: usize, pending: usize },
    IterationDone { iteration: usize, dev_accuracy: f64, test_accuracy: f64 },
    Done { dev_accuracy: f64, test_accuracy: f64 },
}

/// State of a run that can be inspected after it returns, for the
/// degeneracy checks.
pub struct RunState<F> {
    pub model: ParserModel<F>,
    pub data: Prepared,
    pub buffers: BufferSet,
    pub ledger: AnnotationLedger,
}

fn candidates<F: Scalar>(model: &ParserModel<F>, inst: &Instance, sketch: Option<&crate::mr::Sketch>) -> Vec<Candidate> {
    beam(model, inst, sketch)
        .iter()
        .map(|d| Candidate { program: d.program(&inst.enc).to_string(), prob: d.prob().as_f64() })
        .collect()
}

/// Runs the loop for one seed.
pub fn run_wassp<F: Scalar>(
    cfg: &ExperimentConfig,
    corpus: &Corpus,
    seed: u64,
    annotator: &mut dyn Annotator,
    progress: &mut dyn FnMut(&Progress),
) -> Result<(ExperimentReport, RunState<F>), ExperimentError> {
    cfg.validate()?;
    let start = Instant::now();
    let mut model = ParserModel::<F>::new(cfg.hyper.clone());
    let data = prepare(&mut model, corpus);
    let mut buffers = BufferSet::new(data.train.len(), cfg.hyper.buffer_capacity);
    let mut ledger = AnnotationLedger::in_memory();
    let warm_start_hits = if cfg.start == Start::Warm { warm_start(&model, &data.train, &mut buffers) } else { 0 };

    progress(&Progress::Training { iteration: 0 });
    let initial = train(&mut model, &data, &mut buffers, Mode::Weak, &cfg.initial_options(seed))?;
    let initial_test_accuracy = accuracy(&model, &data.test);
    let budgets = split_budget(cfg.budget.resolve(data.train.len()), cfg.iterations);
    let index: std::collections::HashMap<&str, usize> =
        data.train.iter().enumerate().map(|(i, x)| (x.example.id.as_str(), i)).collect();
    let mut iterations = Vec::new();
    let (mut dev, mut test) = (initial.dev_accuracy, initial_test_accuracy);
    if budgets.iter().any(|&b| b > 0) {
        for (it, &budget) in budgets.iter().enumerate() {
            let t0 = Instant::now();
            let iteration = it + 1;
            let cx = SelectionContext::snapshot(&model, &data.train, &buffers, &ledger.ids(), seed ^ (iteration as u64) << 32);
            let diagnostics = cx.diagnostics();
            let batch = cx.select(cfg.heuristic, budget);
            let queries: Vec<Query> = batch
                .ids
                .iter()
                .map(|id| {
                    let i = index[id.as_str()];
                    let inst = &data.train[i];
                    Query::new(inst, iteration, candidates(&model, inst, buffers.get(i).sketch()), vec![cfg.supervision])
                })
                .collect();
            progress(&Progress::AwaitingAnnotations { iteration, pending: queries.len() });
            let answers = if queries.is_empty() { Vec::new() } else { annotator.annotate(&queries, cfg.supervision)? };
            let asked: std::collections::HashSet<&str> = batch.ids.iter().map(String::as_str).collect();
            let mut applied = 0;
            let mut rejected = Vec::new();
            for ann in answers {
                let Some(&i) = index.get(ann.example_id.as_str()).filter(|_| asked.contains(ann.example_id.as_str()))
                else {
                    rejected.push(format!("{}: not queried in this iteration", ann.example_id));
                    continue;
                };
                let inst = &data.train[i];
                match validate(&ann, inst).and_then(|c| {
                    ledger.record(ann.clone())?;
                    apply(&c, inst, buffers.get_mut(i))
                }) {
                    Ok(()) => applied += 1,
                    Err(e) => rejected.push(format!("{}: {e}", ann.example_id)),
                }
            }
            let retrain = if applied > 0 {
                progress(&Progress::Training { iteration });
                let opts = cfg.train_options(seed.wrapping_add(iteration as u64 * 7919), cfg.iteration_epochs);
                let r = train(&mut model, &data, &mut buffers, Mode::Weak, &opts)?;
                dev = r.dev_accuracy;
                test = accuracy(&model, &data.test);
                Some(r)
            } else {
                None
            };
            progress(&Progress::IterationDone { iteration, dev_accuracy: dev, test_accuracy: test });
            iterations.push(IterationReport {
                iteration,
                budget,
                queries: queries.len(),
                applied,
                rejected,
                exhausted_early: budget > 0 && batch.ids.is_empty(),
                fallback: batch.fallback,
                diagnostics,
                retrain,
                train_accuracy: accuracy(&model, &data.train),
                dev_accuracy: dev,
                test_accuracy: test,
                buffer_hit_rate: buffers.hit_rate(),
                wall_secs: t0.elapsed().as_secs_f64(),
            });
        }
    }
    progress(&Progress::Done { dev_accuracy: dev, test_accuracy: test });
    let report = ExperimentReport {
        label: cfg.display_label(),
        seed,
        config: cfg.clone(),
        warm_start_hits,
        initial_dev_accuracy: initial.dev_accuracy,
        initial_test_accuracy,
        initial,
        queries_spent: iterations.iter().map(|i| i.queries).sum(),
        iterations,
        final_dev_accuracy: dev,
        final_test_accuracy: test,
        wall_secs: start.elapsed().as_secs_f64(),
    };
    Ok((report, RunState { model, data, buffers, ledger }))
}

/// Trains on every gold program; reported in the same shape as a loop run.
pub fn run_full_supervision<F: Scalar>(
    cfg: &ExperimentConfig,
    corpus: &Corpus,
    seed: u64,
) -> Result<(ExperimentReport, RunState<F>), ExperimentError> {
    cfg.validate()?;
    let start = Instant::now();
    let mut model = ParserModel::<F>::new(cfg.hyper.clone());
    let data = prepare(&mut model, corpus);
    let mut buffers = BufferSet::new(data.train.len(), cfg.hyper.buffer_capacity);
    let initial = train(&mut model, &data, &mut buffers, Mode::Full, &cfg.initial_options(seed))?;
    let test = accuracy(&model, &data.test);
    let report = ExperimentReport {
        label: cfg.display_label(),
        seed,
        config: cfg.clone(),
        warm_start_hits: 0,
        initial_dev_accuracy: initial.dev_accuracy,
        initial_test_accuracy: test,
        final_dev_accuracy: initial.dev_accuracy,
        initial,
        iterations: Vec::new(),
        queries_spent: 0,
        final_test_accuracy: test,
        wall_secs: start.elapsed().as_secs_f64(),
    };
    Ok((report, RunState { model, data, buffers, ledger: AnnotationLedger::in_memory() }))
}

/// One seed of `cfg` with the oracle annotator.
pub fn run_oracle<F: Scalar>(cfg: &ExperimentConfig, corpus: &Corpus, seed: u64) -> Result<ExperimentReport, ExperimentError> {
    if cfg.full_supervision {
        return Ok(run_full_supervision::<F>(cfg, corpus, seed)?.0);
    }
    let mut oracle = OracleAnnotator::new(&corpus.train);
    Ok(run_wassp::<F>(cfg, corpus, seed, &mut oracle, &mut |_| {})?.0)
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 { xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (m, var.sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub label: String,
    pub heuristic: Heuristic,
    pub supervision: AnnotationKind,
    pub full_supervision: bool,
    pub start: Start,
    pub budget: String,
    pub seeds: Vec<u64>,
    pub test_accuracies: Vec<f64>,
    pub test_mean: f64,
    pub test_std: f64,
    pub dev_mean: f64,
    pub dev_std: f64,
    pub queries_mean: f64,
}

/// `higher` is expected to score a strictly larger mean test accuracy than
/// `lower`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trend {
    pub higher: String,
    pub lower: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendCheck {
    pub trend: Trend,
    pub holds: bool,
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    pub trends: Vec<TrendCheck>,
}

impl Comparison {
    pub fn row(&self, label: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn violations(&self) -> usize {
        self.trends.iter().filter(|t| !t.holds).count()
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "label", "heuristic", "supervision", "full_supervision", "start", "budget", "n_seeds", "test_mean", "test_std",
            "dev_mean", "dev_std", "queries_mean",
        ])
        .expect("in-memory csv");
        for r in &self.rows {
            let kind = match r.supervision {
                AnnotationKind::FullMr => "full_mr",
                AnnotationKind::Sketch => "sketch",
            };
            w.write_record([
                r.label.clone(),
                r.heuristic.to_string(),
                kind.to_string(),
                r.full_supervision.to_string(),
                format!("{:?}", r.start).to_lowercase(),
                r.budget.clone(),
                r.seeds.len().to_string(),
                format!("{:.4}", r.test_mean),
                format!("{:.4}", r.test_std),
                format!("{:.4}", r.dev_mean),
                format!("{:.4}", r.dev_std),
                format!("{:.1}", r.queries_mean),
            ])
            .expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }

    /// Plain-text table: one row per configuration, accuracy in points.
    pub fn to_table(&self) -> String {
        let width = self.rows.iter().map(|r| r.label.len()).max().unwrap_or(5).max(5);
        let mut out = format!("{:width$}  {:>8}  {:>14}  {:>14}\n", "setup", "budget", "test", "dev");
        for r in &self.rows {
            out += &format!(
                "{:width$}  {:>8}  {:>6.1} ± {:<5.1}  {:>6.1} ± {:<5.1}\n",
                r.label,
                if r.full_supervision { "all".to_string() } else { r.budget.clone() },
                100.0 * r.test_mean,
                100.0 * r.test_std,
                100.0 * r.dev_mean,
                100.0 * r.dev_std,
            );
        }
        for t in &self.trends {
            out += &format!(
                "{} {} > {} (gap {:+.1})\n",
                if t.holds { "ok  " } else { "FAIL" },
                t.trend.higher,
                t.trend.lower,
                100.0 * t.gap
            );
        }
        out
    }
}

pub fn summarize(cfg: &ExperimentConfig, reports: &[ExperimentReport]) -> ComparisonRow {
    let test: Vec<f64> = reports.iter().map(|r| r.final_test_accuracy).collect();
    let dev: Vec<f64> = reports.iter().map(|r| r.final_dev_accuracy).collect();
    let q: Vec<f64> = reports.iter().map(|r| r.queries_spent as f64).collect();
    let (test_mean, test_std) = mean_std(&test);
    let (dev_mean, dev_std) = mean_std(&dev);
    ComparisonRow {
        label: cfg.display_label(),
        heuristic: cfg.heuristic,
        supervision: cfg.supervision,
        full_supervision: cfg.full_supervision,
        start: cfg.start,
        budget: cfg.budget.to_string(),
        seeds: reports.iter().map(|r| r.seed).collect(),
        test_accuracies: test,
        test_mean,
        test_std,
        dev_mean,
        dev_std,
        queries_mean: mean_std(&q).0,
    }
}

pub fn check_trends(rows: &[ComparisonRow], trends: &[Trend]) -> Vec<TrendCheck> {
    trends
        .iter()
        .map(|t| {
            let mean = |l: &str| rows.iter().find(|r| r.label == l).map(|r| r.test_mean);
            match (mean(&t.higher), mean(&t.lower)) {
                (Some(h), Some(l)) => TrendCheck { trend: t.clone(), holds: h > l, gap: h - l },
                _ => TrendCheck { trend: t.clone(), holds: false, gap: f64::NAN },
            }
        })
        .collect()
}

/// Runs every configuration over its seeds with the oracle annotator, using
/// up to `workers` threads.
pub fn compare_experiments<F: Scalar>(
    cfgs: &[ExperimentConfig],
    trends: &[Trend],
    workers: usize,
) -> Result<Comparison, ExperimentError> {
    if cfgs.len() < 2 {
        return Err(ExperimentError::InvalidConfig("a comparison needs at least two configurations".into()));
    }
    for c in cfgs {
        c.validate()?;
        if c.annotator != AnnotatorChoice::Oracle {
            return Err(ExperimentError::InvalidConfig("comparisons use the oracle annotator".into()));
        }
    }
    let first = &cfgs[0];
    if cfgs.iter().any(|c| c.seeds != first.seeds || c.corpus_dir != first.corpus_dir || c.generator != first.generator) {
        return Err(ExperimentError::InvalidConfig("configurations must share the corpus and seeds".into()));
    }
    let corpus = first.load_corpus()?;
    let jobs: Vec<(usize, u64)> = cfgs.iter().enumerate().flat_map(|(i, c)| c.seeds.iter().map(move |&s| (i, s))).collect();
    let results = run_jobs::<F>(cfgs, &corpus, &jobs, workers.max(1))?;
    let rows: Vec<ComparisonRow> = cfgs
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let reps: Vec<ExperimentReport> =
                jobs.iter().zip(&results).filter(|((ci, _), _)| *ci == i).map(|(_, r)| r.clone()).collect();
            summarize(c, &reps)
        })
        .collect();
    let trends = check_trends(&rows, trends);
    Ok(Comparison { rows, trends })
}

fn run_jobs<F: Scalar>(
    cfgs: &[ExperimentConfig],
    corpus: &Corpus,
    jobs: &[(usize, u64)],
    workers: usize,
) -> Result<Vec<ExperimentReport>, ExperimentError> {
    let next = std::sync::atomic::AtomicUsize::new(0);
    let slots: Vec<std::sync::Mutex<Option<Result<ExperimentReport, ExperimentError>>>> =
        jobs.iter().map(|_| std::sync::Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..workers.min(jobs.len()) {
            s.spawn(|| loop {
                let j = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                let Some(&(ci, seed)) = jobs.get(j) else { break };
                let r = run_oracle::<F>(&cfgs[ci], corpus, seed);
                *slots[j].lock().expect("slot") = Some(r);
            });
        }
    });
    slots.into_iter().map(|m| m.into_inner().expect("slot").expect("every job ran")).collect()
}
