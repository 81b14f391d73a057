//! The settings document: one TOML section per module, every flag mirrored
//! by a key. Flags and `TABLESP_*` variables override the file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tablesp_core::active::Heuristic;
use tablesp_core::dataset::Split;
use tablesp_core::experiment::{AnnotatorChoice, Budget, ExperimentConfig, Start, Trend};
use tablesp_core::generator::GenConfig;
use tablesp_core::supervision::AnnotationKind;
use tablesp_core::{Hyper, Mode};

use crate::CliError;

pub const COLD_START_STRESS: &str = "cold-start-stress";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub corpus: CorpusSettings,
    pub generator: GenConfig,
    pub model: Hyper,
    pub gen: GenSettings,
    pub train: TrainSettings,
    pub eval: EvalSettings,
    pub wassp: WasspSettings,
    pub compare: CompareSettings,
    pub spuriousness: SpuriousSettings,
    pub service: ServiceSettings,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSettings {
    /// Saved corpus; the `[generator]` section is used when unset.
    pub dir: Option<PathBuf>,
    /// `cold-start-stress` replaces `generator.hard_fraction` with 0.8.
    pub preset: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenSettings {
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub mode: Mode,
    pub start: Start,
    pub seed: u64,
    pub max_epochs: usize,
    pub min_dev_gain: f64,
    pub out: Option<PathBuf>,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let e = ExperimentConfig::default();
        TrainSettings { mode: Mode::Weak, start: e.start, seed: 1, max_epochs: e.max_epochs, min_dev_gain: e.min_dev_gain, out: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    /// Checkpoint to evaluate; an untrained model when unset.
    pub model: Option<PathBuf>,
    pub split: Split,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings { model: None, split: Split::Test }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WasspSettings {
    pub label: String,
    pub heuristic: Heuristic,
    pub supervision: AnnotationKind,
    pub budget: Budget,
    pub iterations: usize,
    pub annotator: AnnotatorChoice,
    pub annotator_timeout_secs: u64,
    pub start: Start,
    pub seeds: Vec<u64>,
    pub max_epochs: usize,
    pub iteration_epochs: usize,
    pub min_dev_gain: f64,
    pub out: Option<PathBuf>,
}

impl Default for WasspSettings {
    fn default() -> Self {
        let e = ExperimentConfig::default();
        WasspSettings {
            label: e.label,
            heuristic: e.heuristic,
            supervision: e.supervision,
            budget: e.budget,
            iterations: e.iterations,
            annotator: e.annotator,
            annotator_timeout_secs: e.annotator_timeout_secs,
            start: e.start,
            seeds: e.seeds,
            max_epochs: e.max_epochs,
            iteration_epochs: e.iteration_epochs,
            min_dev_gain: e.min_dev_gain,
            out: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareSettings {
    pub heuristics: Vec<Heuristic>,
    pub supervisions: Vec<AnnotationKind>,
    pub budgets: Vec<Budget>,
    /// Adds a full-supervision row.
    pub include_full: bool,
    pub start: Start,
    pub seeds: Vec<u64>,
    pub iterations: usize,
    pub max_epochs: usize,
    pub iteration_epochs: usize,
    pub min_dev_gain: f64,
    /// Expected orderings, `higher > lower` by row label.
    pub expect: Vec<String>,
    pub workers: usize,
    /// Exit nonzero when an expected ordering is violated.
    pub strict: bool,
    pub out: Option<PathBuf>,
}

impl Default for CompareSettings {
    fn default() -> Self {
        let e = ExperimentConfig::default();
        CompareSettings {
            heuristics: vec![e.heuristic],
            supervisions: vec![e.supervision],
            budgets: vec![Budget::Count(0), Budget::Percent(5.0)],
            include_full: false,
            start: e.start,
            seeds: e.seeds,
            iterations: e.iterations,
            max_epochs: e.max_epochs,
            iteration_epochs: e.iteration_epochs,
            min_dev_gain: e.min_dev_gain,
            expect: Vec::new(),
            workers: 1,
            strict: false,
            out: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpuriousSettings {
    pub split: Split,
    /// Programs up to this many statements past the gold length are searched.
    pub slack: usize,
    pub out: Option<PathBuf>,
}

impl Default for SpuriousSettings {
    fn default() -> Self {
        SpuriousSettings { split: Split::Train, slack: 1, out: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceSettings {
    pub host: String,
    pub port: u16,
    pub data_dir: PathBuf,
    pub ui_dir: Option<PathBuf>,
    /// Where `wassp --annotator http` finds the service.
    pub url: String,
}

impl Default for ServiceSettings {
    fn default() -> Self {
        ServiceSettings {
            host: "127.0.0.1".into(),
            port: 8750,
            data_dir: PathBuf::from("tablesp-data"),
            ui_dir: None,
            url: "http://127.0.0.1:8750".into(),
        }
    }
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Settings, CliError> {
        let Some(path) = path else { return Ok(Settings::default()) };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("settings serialize")
    }

    /// Applies `corpus.preset` to the generator section.
    pub fn resolve_preset(&mut self) -> Result<(), CliError> {
        match self.corpus.preset.as_deref() {
            None => Ok(()),
            Some(COLD_START_STRESS) => {
                self.generator.hard_fraction = GenConfig::cold_start_stress().hard_fraction;
                Ok(())
            }
            Some(p) => Err(CliError::Usage(format!("unknown preset `{p}`"))),
        }
    }

    fn base_experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            corpus_dir: self.corpus.dir.clone(),
            generator: self.generator.clone(),
            hyper: self.model.clone(),
            ..ExperimentConfig::default()
        }
    }

    pub fn wassp_experiment(&self) -> ExperimentConfig {
        let w = &self.wassp;
        ExperimentConfig {
            label: w.label.clone(),
            heuristic: w.heuristic,
            supervision: w.supervision,
            budget: w.budget,
            iterations: w.iterations,
            annotator: w.annotator,
            annotator_timeout_secs: w.annotator_timeout_secs,
            start: w.start,
            seeds: w.seeds.clone(),
            max_epochs: w.max_epochs,
            iteration_epochs: w.iteration_epochs,
            min_dev_gain: w.min_dev_gain,
            out_dir: w.out.clone(),
            ..self.base_experiment()
        }
    }

    /// The grid: one weak-only row per distinct zero budget, one row per
    /// heuristic, supervision and positive budget, and optionally full
    /// supervision.
    pub fn compare_grid(&self) -> Vec<ExperimentConfig> {
        let c = &self.compare;
        let base = ExperimentConfig {
            start: c.start,
            seeds: c.seeds.clone(),
            iterations: c.iterations,
            max_epochs: c.max_epochs,
            iteration_epochs: c.iteration_epochs,
            min_dev_gain: c.min_dev_gain,
            ..self.base_experiment()
        };
        let zero = |b: &Budget| matches!(*b, Budget::Count(0)) || matches!(*b, Budget::Percent(p) if p == 0.0);
        let mut out = Vec::new();
        if c.budgets.iter().any(zero) {
            out.push(ExperimentConfig { label: "weak_only".into(), budget: Budget::Count(0), ..base.clone() });
        }
        for &supervision in &c.supervisions {
            for &heuristic in &c.heuristics {
                for &budget in c.budgets.iter().filter(|b| !zero(b)) {
                    out.push(ExperimentConfig { heuristic, supervision, budget, ..base.clone() });
                }
            }
        }
        if c.include_full {
            out.push(ExperimentConfig { full_supervision: true, ..base });
        }
        out
    }

    pub fn compare_trends(&self) -> Result<Vec<Trend>, CliError> {
        self.compare.expect.iter().map(|s| parse_trend(s)).collect()
    }
}

pub fn parse_trend(s: &str) -> Result<Trend, CliError> {
    match s.split_once('>') {
        Some((h, l)) if !h.trim().is_empty() && !l.trim().is_empty() => {
            Ok(Trend { higher: h.trim().to_string(), lower: l.trim().to_string() })
        }
        _ => Err(CliError::Usage(format!("expected ordering must read `higher > lower`, got `{s}`"))),
    }
}
