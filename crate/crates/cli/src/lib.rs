//! `tablesp`: corpus generation, training, annotation loops, comparisons and
//! the annotation service behind one binary.
//!
//! Settings come from defaults, then `--config FILE`, then `TABLESP_*`
//! variables, then flags. Each command prints the merged settings as a TOML
//! banner on stderr; feeding that banner back through `--config` repeats the
//! run.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or invalid settings,
//! 3 annotation service unreachable.

pub mod commands;
pub mod settings;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use tablesp_core::active::Heuristic;
use tablesp_core::dataset::{DatasetError, Split};
use tablesp_core::experiment::{AnnotatorChoice, Budget, ExperimentError, Start};
use tablesp_core::supervision::{AnnotationKind, SupervisionError};
use tablesp_core::Mode;

pub use settings::Settings;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
    #[error("annotation service unreachable: {0}")]
    Unreachable(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Runtime(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Unreachable(_) => 3,
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::InvalidConfig(_) | ExperimentError::Dataset(DatasetError::InvalidConfig(_)) => {
                CliError::Usage(e.to_string())
            }
            ExperimentError::Supervision(SupervisionError::Unavailable(m)) => CliError::Unreachable(m),
            e => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        ExperimentError::from(e).into()
    }
}

#[derive(Parser, Debug)]
#[command(name = "tablesp", version, about = "Weakly-supervised table parsing with active query selection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Settings file (TOML).
    #[arg(long, env = "TABLESP_CONFIG")]
    pub config: Option<PathBuf>,
    /// Print one JSON document on stdout instead of text.
    #[arg(long, env = "TABLESP_JSON")]
    pub json: bool,
}

/// Generator knobs shared by every command that can build a corpus.
#[derive(Args, Debug, Clone, Default)]
pub struct GenArgs {
    #[arg(long, env = "TABLESP_N_TRAIN")]
    pub n_train: Option<usize>,
    #[arg(long, env = "TABLESP_N_DEV")]
    pub n_dev: Option<usize>,
    #[arg(long, env = "TABLESP_N_TEST")]
    pub n_test: Option<usize>,
    /// Share of questions that need more than one statement.
    #[arg(long, env = "TABLESP_HARD_FRACTION")]
    pub hard_fraction: Option<f64>,
    /// `cold-start-stress` sets the hard fraction to 0.8.
    #[arg(long, env = "TABLESP_PRESET")]
    pub preset: Option<String>,
}

/// Where the corpus comes from for commands that consume one.
#[derive(Args, Debug, Clone, Default)]
pub struct CorpusArgs {
    /// Saved corpus directory; generated from the settings when absent.
    #[arg(long, env = "TABLESP_CORPUS")]
    pub corpus: Option<PathBuf>,
    /// Generator seed when no corpus directory is given.
    #[arg(long, env = "TABLESP_CORPUS_SEED")]
    pub corpus_seed: Option<u64>,
    #[command(flatten)]
    pub gen: GenArgs,
}

#[derive(Args, Debug, Clone, Default)]
pub struct ModelArgs {
    #[arg(long, env = "TABLESP_BEAM_SIZE")]
    pub beam_size: Option<usize>,
    #[arg(long, env = "TABLESP_LEARNING_RATE")]
    pub learning_rate: Option<f64>,
    #[arg(long, env = "TABLESP_L2")]
    pub l2: Option<f64>,
    #[arg(long, env = "TABLESP_BUFFER_CAPACITY")]
    pub buffer_capacity: Option<usize>,
    /// Longest program, in statements.
    #[arg(long, env = "TABLESP_MAX_LEN")]
    pub max_len: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic corpus and print its statistics.
    Gen {
        #[command(flatten)]
        common: Common,
        #[arg(long, env = "TABLESP_SEED")]
        seed: Option<u64>,
        #[command(flatten)]
        gen: GenArgs,
        /// Output directory.
        #[arg(long, env = "TABLESP_OUT")]
        out: Option<PathBuf>,
    },
    /// Train one parser, weakly or with every gold program.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        model: ModelArgs,
        /// `weak` or `full`.
        #[arg(long, env = "TABLESP_MODE")]
        mode: Option<Mode>,
        #[arg(long, env = "TABLESP_START")]
        start: Option<Start>,
        #[arg(long, env = "TABLESP_SEED")]
        seed: Option<u64>,
        #[arg(long, env = "TABLESP_MAX_EPOCHS")]
        max_epochs: Option<usize>,
        #[arg(long, env = "TABLESP_MIN_DEV_GAIN")]
        min_dev_gain: Option<f64>,
        /// Directory for the checkpoint and report.
        #[arg(long, env = "TABLESP_OUT")]
        out: Option<PathBuf>,
    },
    /// Execution accuracy of a checkpoint, or of an untrained model.
    Eval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        model_args: ModelArgs,
        #[arg(long, env = "TABLESP_MODEL")]
        model: Option<PathBuf>,
        #[arg(long, env = "TABLESP_SPLIT")]
        split: Option<Split>,
    },
    /// Run the annotate-and-retrain loop over one or more seeds.
    Wassp(Box<WasspArgs>),
    /// Run a grid of loop configurations and check expected orderings.
    Compare(Box<CompareArgs>),
    /// Serve the annotation queue and status board over HTTP.
    Serve {
        #[command(flatten)]
        common: Common,
        #[arg(long, env = "TABLESP_HOST")]
        host: Option<String>,
        #[arg(long, env = "TABLESP_PORT")]
        port: Option<u16>,
        #[arg(long, env = "TABLESP_DATA_DIR")]
        data_dir: Option<PathBuf>,
        /// Static annotator UI served at `/`.
        #[arg(long, env = "TABLESP_UI_DIR")]
        ui_dir: Option<PathBuf>,
    },
    /// Per-example count of programs reaching the gold answer, as CSV.
    Spuriousness {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long, env = "TABLESP_SPLIT")]
        split: Option<Split>,
        /// Statements searched past the gold length.
        #[arg(long, env = "TABLESP_SLACK")]
        slack: Option<usize>,
        /// CSV destination; stdout when absent.
        #[arg(long, env = "TABLESP_OUT")]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
pub struct WasspArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, env = "TABLESP_LABEL")]
    pub label: Option<String>,
    /// random, correctness, uncertainty, uncertainty_correctness, failed_words or clustering.
    #[arg(long, env = "TABLESP_HEURISTIC")]
    pub heuristic: Option<Heuristic>,
    /// `full` or `sketch`.
    #[arg(long, env = "TABLESP_SUPERVISION")]
    pub supervision: Option<AnnotationKind>,
    /// Query count, or a percentage of the training set such as `5%`.
    #[arg(long, env = "TABLESP_BUDGET")]
    pub budget: Option<Budget>,
    #[arg(long, env = "TABLESP_ITERATIONS")]
    pub iterations: Option<usize>,
    /// `oracle` or `http`.
    #[arg(long, env = "TABLESP_ANNOTATOR")]
    pub annotator: Option<AnnotatorChoice>,
    #[arg(long, env = "TABLESP_ANNOTATOR_TIMEOUT")]
    pub annotator_timeout: Option<u64>,
    #[arg(long, env = "TABLESP_SERVICE_URL")]
    pub service_url: Option<String>,
    #[arg(long, env = "TABLESP_START")]
    pub start: Option<Start>,
    #[arg(long, env = "TABLESP_SEEDS", value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long, env = "TABLESP_MAX_EPOCHS")]
    pub max_epochs: Option<usize>,
    #[arg(long, env = "TABLESP_ITERATION_EPOCHS")]
    pub iteration_epochs: Option<usize>,
    #[arg(long, env = "TABLESP_MIN_DEV_GAIN")]
    pub min_dev_gain: Option<f64>,
    /// Directory for per-seed reports, annotations and the summary.
    #[arg(long, env = "TABLESP_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, env = "TABLESP_HEURISTICS", value_delimiter = ',')]
    pub heuristics: Option<Vec<Heuristic>>,
    #[arg(long, env = "TABLESP_SUPERVISIONS", value_delimiter = ',')]
    pub supervisions: Option<Vec<AnnotationKind>>,
    #[arg(long, env = "TABLESP_BUDGETS", value_delimiter = ',')]
    pub budgets: Option<Vec<Budget>>,
    /// Add a full-supervision row.
    #[arg(long, env = "TABLESP_INCLUDE_FULL")]
    pub include_full: bool,
    #[arg(long, env = "TABLESP_START")]
    pub start: Option<Start>,
    #[arg(long, env = "TABLESP_SEEDS", value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long, env = "TABLESP_ITERATIONS")]
    pub iterations: Option<usize>,
    #[arg(long, env = "TABLESP_MAX_EPOCHS")]
    pub max_epochs: Option<usize>,
    #[arg(long, env = "TABLESP_ITERATION_EPOCHS")]
    pub iteration_epochs: Option<usize>,
    #[arg(long, env = "TABLESP_MIN_DEV_GAIN")]
    pub min_dev_gain: Option<f64>,
    /// Expected ordering `higher > lower` by row label; repeatable.
    #[arg(long, env = "TABLESP_EXPECT")]
    pub expect: Vec<String>,
    #[arg(long, env = "TABLESP_WORKERS")]
    pub workers: Option<usize>,
    /// Exit 1 when an expected ordering is violated.
    #[arg(long, env = "TABLESP_STRICT")]
    pub strict: bool,
    #[arg(long, env = "TABLESP_OUT")]
    pub out: Option<PathBuf>,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

impl GenArgs {
    fn apply(&self, s: &mut Settings) -> Result<(), CliError> {
        if let Some(p) = &self.preset {
            s.corpus.preset = Some(p.clone());
        }
        s.resolve_preset()?;
        let g = &mut s.generator;
        set(&mut g.n_train, self.n_train);
        set(&mut g.n_dev, self.n_dev);
        set(&mut g.n_test, self.n_test);
        set(&mut g.hard_fraction, self.hard_fraction);
        Ok(())
    }
}

impl CorpusArgs {
    fn apply(&self, s: &mut Settings) -> Result<(), CliError> {
        if let Some(d) = &self.corpus {
            s.corpus.dir = Some(d.clone());
        }
        set(&mut s.generator.seed, self.corpus_seed);
        self.gen.apply(s)
    }
}

impl ModelArgs {
    fn apply(&self, s: &mut Settings) {
        let h = &mut s.model;
        set(&mut h.beam_size, self.beam_size);
        set(&mut h.learning_rate, self.learning_rate);
        set(&mut h.l2, self.l2);
        set(&mut h.buffer_capacity, self.buffer_capacity);
        set(&mut h.max_len, self.max_len);
    }
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Gen { .. } => "gen",
            Command::Train { .. } => "train",
            Command::Eval { .. } => "eval",
            Command::Wassp(_) => "wassp",
            Command::Compare(_) => "compare",
            Command::Serve { .. } => "serve",
            Command::Spuriousness { .. } => "spuriousness",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Gen { common, .. }
            | Command::Train { common, .. }
            | Command::Eval { common, .. }
            | Command::Serve { common, .. }
            | Command::Spuriousness { common, .. } => common,
            Command::Wassp(a) => &a.common,
            Command::Compare(a) => &a.common,
        }
    }

    /// Settings file overlaid with this command's flags.
    pub fn settings(&self) -> Result<Settings, CliError> {
        let mut s = Settings::load(self.common().config.as_deref())?;
        match self {
            Command::Gen { seed, gen, out, .. } => {
                set(&mut s.generator.seed, *seed);
                gen.apply(&mut s)?;
                if out.is_some() {
                    s.gen.out = out.clone();
                }
            }
            Command::Train { corpus, model, mode, start, seed, max_epochs, min_dev_gain, out, .. } => {
                corpus.apply(&mut s)?;
                model.apply(&mut s);
                let t = &mut s.train;
                set(&mut t.mode, *mode);
                set(&mut t.start, *start);
                set(&mut t.seed, *seed);
                set(&mut t.max_epochs, *max_epochs);
                set(&mut t.min_dev_gain, *min_dev_gain);
                if out.is_some() {
                    t.out = out.clone();
                }
            }
            Command::Eval { corpus, model_args, model, split, .. } => {
                corpus.apply(&mut s)?;
                model_args.apply(&mut s);
                if model.is_some() {
                    s.eval.model = model.clone();
                }
                set(&mut s.eval.split, *split);
            }
            Command::Wassp(a) => {
                a.corpus.apply(&mut s)?;
                a.model.apply(&mut s);
                let w = &mut s.wassp;
                set(&mut w.label, a.label.clone());
                set(&mut w.heuristic, a.heuristic);
                set(&mut w.supervision, a.supervision);
                set(&mut w.budget, a.budget);
                set(&mut w.iterations, a.iterations);
                set(&mut w.annotator, a.annotator);
                set(&mut w.annotator_timeout_secs, a.annotator_timeout);
                set(&mut w.start, a.start);
                set(&mut w.seeds, a.seeds.clone());
                set(&mut w.max_epochs, a.max_epochs);
                set(&mut w.iteration_epochs, a.iteration_epochs);
                set(&mut w.min_dev_gain, a.min_dev_gain);
                if a.out.is_some() {
                    w.out = a.out.clone();
                }
                set(&mut s.service.url, a.service_url.clone());
            }
            Command::Compare(a) => {
                a.corpus.apply(&mut s)?;
                a.model.apply(&mut s);
                let c = &mut s.compare;
                set(&mut c.heuristics, a.heuristics.clone());
                set(&mut c.supervisions, a.supervisions.clone());
                set(&mut c.budgets, a.budgets.clone());
                c.include_full |= a.include_full;
                set(&mut c.start, a.start);
                set(&mut c.seeds, a.seeds.clone());
                set(&mut c.iterations, a.iterations);
                set(&mut c.max_epochs, a.max_epochs);
                set(&mut c.iteration_epochs, a.iteration_epochs);
                set(&mut c.min_dev_gain, a.min_dev_gain);
                if !a.expect.is_empty() {
                    c.expect = a.expect.clone();
                }
                set(&mut c.workers, a.workers);
                c.strict |= a.strict;
                if a.out.is_some() {
                    c.out = a.out.clone();
                }
            }
            Command::Serve { host, port, data_dir, ui_dir, .. } => {
                let v = &mut s.service;
                set(&mut v.host, host.clone());
                set(&mut v.port, *port);
                set(&mut v.data_dir, data_dir.clone());
                if ui_dir.is_some() {
                    v.ui_dir = ui_dir.clone();
                }
            }
            Command::Spuriousness { corpus, split, slack, out, .. } => {
                corpus.apply(&mut s)?;
                set(&mut s.spuriousness.split, *split);
                set(&mut s.spuriousness.slack, *slack);
                if out.is_some() {
                    s.spuriousness.out = out.clone();
                }
            }
        }
        Ok(s)
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let json = cli.command.common().json;
    let result = cli.command.settings().and_then(|s| {
        eprintln!("# tablesp {} effective settings\n{}", cli.command.name(), s.to_toml());
        commands::dispatch(&cli.command, &s, json)
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
