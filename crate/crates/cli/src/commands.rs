//! One function per subcommand. Each prints either text or a single JSON
//! document on stdout; progress goes to stderr.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use tablesp_core::buffer::BufferSet;
use tablesp_core::dataset::{Corpus, Dataset, Split};
use tablesp_core::experiment::{
    compare_experiments, run_wassp, summarize, warm_start, AnnotatorChoice, Comparison, ComparisonRow, ExperimentReport,
    Progress, Start,
};
use tablesp_core::generator::{generate_corpus, template_mix};
use tablesp_core::supervision::OracleAnnotator;
use tablesp_core::train::{accuracy, prepare, prepare_split, train, Mode, TrainOptions};
use tablesp_core::{count_spurious, Model, MAX_PROGRAM_LEN};
use tablesp_service::{serve_blocking, HttpAnnotator, ServiceConfig, StatusReporter};

use crate::settings::Settings;
use crate::{CliError, Command};

pub fn dispatch(cmd: &Command, s: &Settings, json: bool) -> Result<(), CliError> {
    match cmd {
        Command::Gen { .. } => gen(s, json),
        Command::Train { .. } => train_cmd(s, json),
        Command::Eval { .. } => eval(s, json),
        Command::Wassp(_) => wassp(s, json),
        Command::Compare(_) => compare(s, json),
        Command::Serve { .. } => serve(s, json),
        Command::Spuriousness { .. } => spuriousness(s, json),
    }
}

fn emit<T: Serialize>(json: bool, value: &T, text: impl FnOnce() -> String) {
    if json {
        println!("{}", serde_json::to_string_pretty(value).expect("serializable output"));
    } else {
        print!("{}", text());
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    write_file(path, &(serde_json::to_string_pretty(value).expect("serializable output") + "\n"))
}

fn make_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(|e| io_err(path, e))
}

fn load_corpus(s: &Settings) -> Result<Corpus, CliError> {
    Ok(match &s.corpus.dir {
        Some(dir) => Corpus::load(dir)?,
        None => generate_corpus(&s.generator)?,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitStats {
    pub examples: usize,
    pub tables: usize,
    /// Examples whose gold program has a single statement.
    pub easy: usize,
    pub template_mix: BTreeMap<String, usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpuriousSummary {
    pub split: Split,
    pub slack: usize,
    pub examples: usize,
    pub with_spurious: usize,
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub seed: u64,
    pub hard_fraction: f64,
    pub splits: BTreeMap<Split, SplitStats>,
    pub spurious: SpuriousSummary,
}

fn split_stats(d: &Dataset) -> SplitStats {
    SplitStats {
        examples: d.len(),
        tables: d.examples.iter().map(|e| e.table_id.as_str()).collect::<BTreeSet<_>>().len(),
        easy: d.examples.iter().filter(|e| e.is_easy() == Some(true)).count(),
        template_mix: template_mix(d),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpuriousRow {
    pub id: String,
    pub template: String,
    pub gold_len: Option<usize>,
    pub max_len: usize,
    /// Programs reaching the gold answer.
    pub hits: usize,
    /// Of those, the ones other than the gold program.
    pub spurious: usize,
}

pub fn spurious_rows(d: &Dataset, slack: usize) -> Vec<SpuriousRow> {
    d.examples
        .iter()
        .map(|ex| {
            let gold_len = ex.gold_mr.as_ref().map(|p| p.len());
            let max_len = gold_len.map_or(MAX_PROGRAM_LEN, |n| (n + slack).min(MAX_PROGRAM_LEN));
            let c = count_spurious(d.table(ex), &ex.utterance, &ex.answer, ex.gold_mr.as_ref(), max_len);
            SpuriousRow {
                id: ex.id.clone(),
                template: ex.template.clone().unwrap_or_default(),
                gold_len,
                max_len,
                hits: c.hits,
                spurious: c.spurious,
            }
        })
        .collect()
}

fn spurious_summary(split: Split, slack: usize, rows: &[SpuriousRow]) -> SpuriousSummary {
    let with_spurious = rows.iter().filter(|r| r.spurious > 0).count();
    SpuriousSummary {
        split,
        slack,
        examples: rows.len(),
        with_spurious,
        rate: if rows.is_empty() { 0.0 } else { with_spurious as f64 / rows.len() as f64 },
    }
}

fn gen(s: &Settings, json: bool) -> Result<(), CliError> {
    let out = s.gen.out.as_ref().ok_or_else(|| CliError::Usage("gen needs an output directory (--out)".into()))?;
    let corpus = generate_corpus(&s.generator)?;
    corpus.save(out)?;
    let rows = spurious_rows(&corpus.train, 1);
    let stats = CorpusStats {
        seed: s.generator.seed,
        hard_fraction: s.generator.hard_fraction,
        splits: Split::ALL.into_iter().map(|sp| (sp, split_stats(corpus.split(sp)))).collect(),
        spurious: spurious_summary(Split::Train, 1, &rows),
    };
    emit(json, &stats, || {
        let mut t = format!("wrote {}\n", out.display());
        for (sp, st) in &stats.splits {
            t += &format!("{sp:5}  {:5} examples  {:4} tables  {:5} easy\n", st.examples, st.tables, st.easy);
        }
        t += "templates (train):\n";
        for (name, n) in &stats.splits[&Split::Train].template_mix {
            t += &format!("  {name:24} {n}\n");
        }
        let sp = &stats.spurious;
        t += &format!(
            "spurious: {}/{} train examples ({:.1}%) admit another program reaching the answer\n",
            sp.with_spurious,
            sp.examples,
            100.0 * sp.rate
        );
        t
    });
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub mode: Mode,
    pub start: Start,
    pub seed: u64,
    pub warm_start_hits: usize,
    pub epochs: usize,
    pub stalled: bool,
    pub initial_dev_accuracy: f64,
    pub dev_accuracy: f64,
    pub test_accuracy: f64,
    pub buffer_hit_rate: f64,
    pub wall_secs: f64,
}

fn train_cmd(s: &Settings, json: bool) -> Result<(), CliError> {
    let t = &s.train;
    let corpus = load_corpus(s)?;
    let mut model = Model::new(s.model.clone());
    let data = prepare(&mut model, &corpus);
    let mut buffers = BufferSet::new(data.train.len(), s.model.buffer_capacity);
    let warm_start_hits =
        if t.mode == Mode::Weak && t.start == Start::Warm { warm_start(&model, &data.train, &mut buffers) } else { 0 };
    let opts = TrainOptions { max_epochs: t.max_epochs, seed: t.seed, min_dev_gain: t.min_dev_gain, ..TrainOptions::default() };
    let report = train(&mut model, &data, &mut buffers, t.mode, &opts).map_err(|e| CliError::Runtime(e.to_string()))?;
    let summary = TrainSummary {
        mode: t.mode,
        start: t.start,
        seed: t.seed,
        warm_start_hits,
        epochs: report.epochs.len(),
        stalled: report.stalled,
        initial_dev_accuracy: report.initial_dev_accuracy,
        dev_accuracy: report.dev_accuracy,
        test_accuracy: accuracy(&model, &data.test),
        buffer_hit_rate: buffers.hit_rate(),
        wall_secs: report.wall_secs,
    };
    if let Some(out) = &t.out {
        make_dir(out)?;
        let ckpt = out.join("model.ckpt");
        model.save(&ckpt).map_err(|e| io_err(&ckpt, e))?;
        write_json(&out.join("train_report.json"), &report)?;
    }
    emit(json, &summary, || {
        format!(
            "{:?} training, {} epochs{}: dev {:.2}%  test {:.2}%  buffer hit rate {:.3}\n",
            summary.mode,
            summary.epochs,
            if summary.stalled { " (stalled)" } else { "" },
            100.0 * summary.dev_accuracy,
            100.0 * summary.test_accuracy,
            summary.buffer_hit_rate
        )
    });
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub split: Split,
    pub trained: bool,
    pub examples: usize,
    pub correct: usize,
    pub accuracy: f64,
}

fn eval(s: &Settings, json: bool) -> Result<(), CliError> {
    let mut model = match &s.eval.model {
        Some(p) => Model::load(p).map_err(|e| CliError::Runtime(e.to_string()))?,
        None => Model::new(s.model.clone()),
    };
    let corpus = load_corpus(s)?;
    let data = prepare_split(&mut model, corpus.split(s.eval.split));
    let acc = accuracy(&model, &data);
    let summary = EvalSummary {
        split: s.eval.split,
        trained: s.eval.model.is_some(),
        examples: data.len(),
        correct: (acc * data.len() as f64).round() as usize,
        accuracy: acc,
    };
    emit(json, &summary, || {
        format!(
            "{}: {}/{} correct ({:.2}%)\n",
            summary.split,
            summary.correct,
            summary.examples,
            100.0 * summary.accuracy
        )
    });
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationSummary {
    pub iteration: usize,
    pub budget: usize,
    pub queries: usize,
    pub applied: usize,
    pub rejected: usize,
    pub exhausted_early: bool,
    pub dev_accuracy: f64,
    pub test_accuracy: f64,
    pub buffer_hit_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub warm_start_hits: usize,
    pub queries_spent: usize,
    pub initial_dev_accuracy: f64,
    pub initial_test_accuracy: f64,
    pub final_dev_accuracy: f64,
    pub final_test_accuracy: f64,
    pub iterations: Vec<IterationSummary>,
    pub wall_secs: f64,
}

impl From<&ExperimentReport> for RunSummary {
    fn from(r: &ExperimentReport) -> Self {
        RunSummary {
            seed: r.seed,
            warm_start_hits: r.warm_start_hits,
            queries_spent: r.queries_spent,
            initial_dev_accuracy: r.initial_dev_accuracy,
            initial_test_accuracy: r.initial_test_accuracy,
            final_dev_accuracy: r.final_dev_accuracy,
            final_test_accuracy: r.final_test_accuracy,
            iterations: r
                .iterations
                .iter()
                .map(|i| IterationSummary {
                    iteration: i.iteration,
                    budget: i.budget,
                    queries: i.queries,
                    applied: i.applied,
                    rejected: i.rejected.len(),
                    exhausted_early: i.exhausted_early,
                    dev_accuracy: i.dev_accuracy,
                    test_accuracy: i.test_accuracy,
                    buffer_hit_rate: i.buffer_hit_rate,
                })
                .collect(),
            wall_secs: r.wall_secs,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WasspSummary {
    pub label: String,
    pub summary: ComparisonRow,
    pub runs: Vec<RunSummary>,
}

fn log_progress(seed: u64, p: &Progress) {
    match p {
        Progress::Training { iteration } => eprintln!("seed {seed}: training (iteration {iteration})"),
        Progress::AwaitingAnnotations { iteration, pending } => {
            eprintln!("seed {seed}: waiting for {pending} annotations (iteration {iteration})")
        }
        Progress::IterationDone { iteration, dev_accuracy, test_accuracy } => eprintln!(
            "seed {seed}: iteration {iteration} dev {:.2}% test {:.2}%",
            100.0 * dev_accuracy,
            100.0 * test_accuracy
        ),
        Progress::Done { test_accuracy, .. } => eprintln!("seed {seed}: done, test {:.2}%", 100.0 * test_accuracy),
    }
}

fn wassp(s: &Settings, json: bool) -> Result<(), CliError> {
    let cfg = s.wassp_experiment();
    cfg.validate()?;
    let corpus = load_corpus(s)?;
    if let Some(out) = &cfg.out_dir {
        make_dir(out)?;
    }
    let mut reports = Vec::new();
    for &seed in &cfg.seeds {
        let (report, state) = match cfg.annotator {
            AnnotatorChoice::Oracle => {
                let mut oracle = OracleAnnotator::new(&corpus.train);
                run_wassp::<f64>(&cfg, &corpus, seed, &mut oracle, &mut |p| log_progress(seed, p))?
            }
            AnnotatorChoice::Http => {
                let mut human = HttpAnnotator::new(&s.service.url, Duration::from_secs(cfg.annotator_timeout_secs));
                human.check_health().map_err(|e| CliError::Unreachable(format!("{}: {e}", s.service.url)))?;
                let mut status = StatusReporter::new(&s.service.url, cfg.display_label());
                run_wassp::<f64>(&cfg, &corpus, seed, &mut human, &mut |p| {
                    log_progress(seed, p);
                    if let Err(e) = status.report(p) {
                        eprintln!("seed {seed}: status update failed: {e}");
                    }
                })?
            }
        };
        if let Some(out) = &cfg.out_dir {
            write_json(&out.join(format!("seed{seed}.json")), &report)?;
            let lines: String = state.ledger.iter().map(|a| serde_json::to_string(a).expect("annotation") + "\n").collect();
            write_file(&out.join(format!("seed{seed}.annotations.jsonl")), &lines)?;
        }
        reports.push(report);
    }
    let row = summarize(&cfg, &reports);
    let table = Comparison { rows: vec![row.clone()], trends: Vec::new() };
    if let Some(out) = &cfg.out_dir {
        write_json(&out.join("summary.json"), &row)?;
        write_file(&out.join("summary.csv"), &table.to_csv())?;
        write_file(&out.join("summary.txt"), &table.to_table())?;
    }
    let summary = WasspSummary { label: cfg.display_label(), summary: row, runs: reports.iter().map(RunSummary::from).collect() };
    emit(json, &summary, || {
        let mut t = table.to_table();
        for r in &summary.runs {
            t += &format!(
                "seed {}: {} queries, test {:.2}% -> {:.2}%\n",
                r.seed,
                r.queries_spent,
                100.0 * r.initial_test_accuracy,
                100.0 * r.final_test_accuracy
            );
        }
        t
    });
    Ok(())
}

fn compare(s: &Settings, json: bool) -> Result<(), CliError> {
    let cfgs = s.compare_grid();
    let trends = s.compare_trends()?;
    let labels: BTreeSet<String> = cfgs.iter().map(|c| c.display_label()).collect();
    if labels.len() != cfgs.len() {
        return Err(CliError::Usage("the grid repeats a row label".into()));
    }
    for t in &trends {
        for l in [&t.higher, &t.lower] {
            if !labels.contains(l) {
                let known: Vec<&str> = labels.iter().map(String::as_str).collect();
                return Err(CliError::Usage(format!("expected ordering names unknown row `{l}`; rows: {}", known.join(", "))));
            }
        }
    }
    let cmp = compare_experiments::<f64>(&cfgs, &trends, s.compare.workers)?;
    if let Some(out) = &s.compare.out {
        make_dir(out)?;
        write_json(&out.join("comparison.json"), &cmp)?;
        write_file(&out.join("comparison.csv"), &cmp.to_csv())?;
        write_file(&out.join("comparison.txt"), &cmp.to_table())?;
    }
    emit(json, &cmp, || cmp.to_table());
    if s.compare.strict && cmp.violations() > 0 {
        return Err(CliError::Runtime(format!("{} expected orderings do not hold", cmp.violations())));
    }
    Ok(())
}

fn serve(s: &Settings, json: bool) -> Result<(), CliError> {
    let v = &s.service;
    let addr = format!("{}:{}", v.host, v.port)
        .parse()
        .map_err(|e| CliError::Usage(format!("bad service address {}:{}: {e}", v.host, v.port)))?;
    let cfg = ServiceConfig { addr, data_dir: v.data_dir.clone(), ui_dir: v.ui_dir.clone() };
    serve_blocking(&cfg, |addr| {
        let url = format!("http://{addr}");
        emit(json, &serde_json::json!({ "url": url }), || format!("listening on {url}\n"));
        use std::io::Write;
        let _ = std::io::stdout().flush();
    })
    .map_err(|e| CliError::Runtime(format!("service: {e}")))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpuriousReport {
    pub summary: SpuriousSummary,
    /// Per-example rows, present when no CSV file was requested.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rows: Vec<SpuriousRow>,
}

fn spuriousness(s: &Settings, json: bool) -> Result<(), CliError> {
    let sp = &s.spuriousness;
    let corpus = load_corpus(s)?;
    let rows = spurious_rows(corpus.split(sp.split), sp.slack);
    let summary = spurious_summary(sp.split, sp.slack, &rows);
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &rows {
        w.serialize(r).map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    let text = String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf8");
    let line = format!(
        "{}: {}/{} examples ({:.2}%) admit a program other than the gold one reaching the answer\n",
        summary.split,
        summary.with_spurious,
        summary.examples,
        100.0 * summary.rate
    );
    match &sp.out {
        Some(out) => {
            write_file(out, &text)?;
            emit(json, &SpuriousReport { summary, rows: Vec::new() }, || line);
        }
        None if json => emit(json, &SpuriousReport { summary, rows }, String::new),
        None => {
            print!("{text}");
            eprint!("{line}");
        }
    }
    Ok(())
}
