//! Annotations (full programs or operator sketches), annotators, and the
//! append-only annotation ledger.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::buffer::MemoryBuffer;
use crate::dataset::{Dataset, Example};
use crate::executor::{answers_match, execute, Answer};
use crate::grammar::ActionSpace;
use crate::mr::{parse_program, parse_sketch, sketch_of, Program, Sketch};
use crate::table::{TableEnv, TableJson};
use crate::train::{gold_entry, Instance};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotationKind {
    FullMr,
    Sketch,
}

impl std::str::FromStr for AnnotationKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "full_mr" | "full" => Ok(AnnotationKind::FullMr),
            "sketch" => Ok(AnnotationKind::Sketch),
            _ => Err(format!("unknown supervision kind `{s}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotatorKind {
    #[default]
    Oracle,
    Human,
}

/// Wire form of an annotation. `payload` is program text for `full_mr` and
/// sketch text such as `(argmax ...) (hop ...)` for `sketch`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub example_id: String,
    pub kind: AnnotationKind,
    pub payload: String,
    #[serde(default)]
    pub annotator: AnnotatorKind,
    /// Seconds since the Unix epoch.
    #[serde(default)]
    pub timestamp: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Content {
    FullMr(Program),
    Sketch(Sketch),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SupervisionError {
    #[error("example {0} has no gold program")]
    NoGoldAvailable(String),
    #[error("annotation rejected: {0}")]
    Rejected(String),
    #[error("example {0} is already annotated")]
    AlreadyAnnotated(String),
    #[error("unknown example {0}")]
    UnknownExample(String),
    #[error("annotator timed out after {0} s")]
    Timeout(u64),
    #[error("annotator unavailable: {0}")]
    Unavailable(String),
    #[error("ledger: {0}")]
    Ledger(String),
}

pub fn now_secs() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

impl Annotation {
    pub fn new(example_id: impl Into<String>, kind: AnnotationKind, payload: impl Into<String>) -> Self {
        Annotation {
            example_id: example_id.into(),
            kind,
            payload: payload.into(),
            annotator: AnnotatorKind::Oracle,
            timestamp: 0,
        }
    }

    /// Parses the payload without looking at the example.
    pub fn content(&self) -> Result<Content, SupervisionError> {
        let rej = |e: crate::mr::MrError| SupervisionError::Rejected(e.to_string());
        match self.kind {
            AnnotationKind::FullMr => parse_program(&self.payload).map(Content::FullMr).map_err(rej),
            AnnotationKind::Sketch => parse_sketch(&self.payload).map(Content::Sketch).map_err(rej),
        }
    }
}

/// Checks `ann` against its example: a full program must run on the table,
/// reach the answer, and be spellable by the parser; a sketch must be a
/// well-formed chain no longer than `max_len`.
pub fn validate(ann: &Annotation, inst: &Instance) -> Result<Content, SupervisionError> {
    validate_parts(ann, &inst.example.id, &inst.example.answer, &inst.env, &inst.enc.space)
}

/// [`validate`] for callers holding the pieces rather than an [`Instance`].
pub fn validate_parts(
    ann: &Annotation,
    example_id: &str,
    answer: &Answer,
    env: &TableEnv,
    space: &ActionSpace,
) -> Result<Content, SupervisionError> {
    if ann.example_id != example_id {
        return Err(SupervisionError::Rejected(format!(
            "annotation is for {} but the example is {example_id}",
            ann.example_id
        )));
    }
    let content = ann.content()?;
    match &content {
        Content::FullMr(p) => {
            check_program(p, env, answer)?;
            if space.actions_of(p).is_none() {
                return Err(SupervisionError::Rejected(format!(
                    "{p} uses a literal the utterance does not mention or repeats a statement"
                )));
            }
        }
        Content::Sketch(s) => check_sketch(s, space.max_len)?,
    }
    Ok(content)
}

pub fn check_program(p: &Program, env: &TableEnv, answer: &Answer) -> Result<(), SupervisionError> {
    match execute(p, env) {
        Err(e) => Err(SupervisionError::Rejected(format!("execution failed: {e}"))),
        Ok(v) if !answers_match(&Ok(v.clone()), answer) => {
            let got = Answer::from_value(&v).map_or_else(|| "a row set".to_string(), |a| a.to_string());
            Err(SupervisionError::Rejected(format!("executes to {got}, expected {answer}")))
        }
        Ok(_) => Ok(()),
    }
}

pub fn check_sketch(s: &Sketch, max_len: usize) -> Result<(), SupervisionError> {
    let rej = |m: String| Err(SupervisionError::Rejected(m));
    if s.is_empty() {
        return rej("empty sketch".into());
    }
    if s.len() > max_len {
        return rej(format!("sketch has {} statements, at most {max_len} allowed", s.len()));
    }
    let (last, init) = s.funcs.split_last().expect("nonempty");
    if last.produces_rows() {
        return rej(format!("sketch must end with an answer operator, not {}", last.as_str()));
    }
    if let Some(f) = init.iter().find(|f| !f.produces_rows()) {
        return rej(format!("{} can only be the last statement", f.as_str()));
    }
    Ok(())
}

/// A full program replaces and locks the buffer; a sketch filters it and
/// constrains later exploration.
pub fn apply(content: &Content, inst: &Instance, buffer: &mut MemoryBuffer) -> Result<(), SupervisionError> {
    match content {
        Content::FullMr(p) => {
            let entry = gold_entry(inst, p)
                .ok_or_else(|| SupervisionError::Rejected(format!("{p} is outside the search space")))?;
            buffer.lock_to(entry);
        }
        Content::Sketch(s) => buffer.constrain(s.clone()),
    }
    Ok(())
}

pub fn oracle_annotate(example: &Example, kind: AnnotationKind) -> Result<Annotation, SupervisionError> {
    let gold = example
        .gold_mr
        .as_ref()
        .ok_or_else(|| SupervisionError::NoGoldAvailable(example.id.clone()))?;
    let payload = match kind {
        AnnotationKind::FullMr => gold.to_string(),
        AnnotationKind::Sketch => sketch_of(gold).to_string(),
    };
    Ok(Annotation::new(example.id.clone(), kind, payload))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub program: String,
    pub prob: f64,
}

/// Everything an annotator sees for one example.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub example_id: String,
    pub iteration: usize,
    pub utterance: String,
    pub table_id: String,
    pub table: TableJson,
    pub answer: Answer,
    pub candidates: Vec<Candidate>,
    pub kinds: Vec<AnnotationKind>,
    /// Longest program the parser can spell for this example.
    pub max_len: usize,
}

impl Query {
    pub fn new(inst: &Instance, iteration: usize, candidates: Vec<Candidate>, kinds: Vec<AnnotationKind>) -> Self {
        Query {
            example_id: inst.example.id.clone(),
            iteration,
            utterance: inst.example.text.clone(),
            table_id: inst.example.table_id.clone(),
            table: inst.env.to_json(),
            answer: inst.example.answer.clone(),
            candidates,
            kinds,
            max_len: inst.enc.space.max_len,
        }
    }
}

/// Source of annotations for a batch of queries. May return fewer
/// annotations than queries; missing ones count as unanswered.
pub trait Annotator {
    fn annotate(&mut self, queries: &[Query], kind: AnnotationKind) -> Result<Vec<Annotation>, SupervisionError>;
}

/// Answers from the gold programs of a dataset.
#[derive(Clone, Debug)]
pub struct OracleAnnotator {
    examples: BTreeMap<String, Example>,
}

impl OracleAnnotator {
    pub fn new(d: &Dataset) -> Self {
        OracleAnnotator { examples: d.examples.iter().map(|e| (e.id.clone(), e.clone())).collect() }
    }
}

impl Annotator for OracleAnnotator {
    fn annotate(&mut self, queries: &[Query], kind: AnnotationKind) -> Result<Vec<Annotation>, SupervisionError> {
        queries
            .iter()
            .map(|q| {
                let ex = self
                    .examples
                    .get(&q.example_id)
                    .ok_or_else(|| SupervisionError::UnknownExample(q.example_id.clone()))?;
                oracle_annotate(ex, kind)
            })
            .collect()
    }
}

/// One annotation per example, mirrored to a JSONL file when a path is set.
#[derive(Debug, Default)]
pub struct AnnotationLedger {
    by_id: BTreeMap<String, Annotation>,
    order: Vec<String>,
    path: Option<PathBuf>,
}

impl AnnotationLedger {
    pub fn in_memory() -> Self {
        AnnotationLedger::default()
    }

    /// Opens `path`, replaying any existing events.
    pub fn open(path: &Path) -> Result<Self, SupervisionError> {
        let mut ledger = AnnotationLedger::default();
        if path.exists() {
            let f = File::open(path).map_err(|e| SupervisionError::Ledger(e.to_string()))?;
            for (i, line) in BufReader::new(f).lines().enumerate() {
                let line = line.map_err(|e| SupervisionError::Ledger(e.to_string()))?;
                if line.trim().is_empty() {
                    continue;
                }
                let ann: Annotation = serde_json::from_str(&line)
                    .map_err(|e| SupervisionError::Ledger(format!("line {}: {e}", i + 1)))?;
                ledger.insert(ann)?;
            }
        }
        ledger.path = Some(path.to_path_buf());
        Ok(ledger)
    }

    fn insert(&mut self, ann: Annotation) -> Result<(), SupervisionError> {
        if self.by_id.contains_key(&ann.example_id) {
            return Err(SupervisionError::AlreadyAnnotated(ann.example_id));
        }
        self.order.push(ann.example_id.clone());
        self.by_id.insert(ann.example_id.clone(), ann);
        Ok(())
    }

    pub fn record(&mut self, ann: Annotation) -> Result<(), SupervisionError> {
        if self.by_id.contains_key(&ann.example_id) {
            return Err(SupervisionError::AlreadyAnnotated(ann.example_id));
        }
        if let Some(p) = &self.path {
            let mut f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(p)
                .map_err(|e| SupervisionError::Ledger(e.to_string()))?;
            let line = serde_json::to_string(&ann).map_err(|e| SupervisionError::Ledger(e.to_string()))?;
            writeln!(f, "{line}").map_err(|e| SupervisionError::Ledger(e.to_string()))?;
        }
        self.insert(ann)
    }

    pub fn get(&self, id: &str) -> Option<&Annotation> {
        self.by_id.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.by_id.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Annotations in the order they were recorded.
    pub fn iter(&self) -> impl Iterator<Item = &Annotation> {
        self.order.iter().map(|id| &self.by_id[id])
    }

    pub fn ids(&self) -> std::collections::BTreeSet<String> {
        self.by_id.keys().cloned().collect()
    }
}
