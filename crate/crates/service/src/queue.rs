//! The annotation queue and its JSONL event log.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tablesp_core::executor::Answer;
use tablesp_core::supervision::{
    now_secs, validate_parts, Annotation, AnnotationKind, AnnotatorKind, Candidate, Content, Query,
};
use tablesp_core::table::TableJson;
use tablesp_core::text::tokenize;
use tablesp_core::{ActionSpace, TableEnv};

pub const PREVIEW_ROWS: usize = 12;
pub const LOG_FILE: &str = "queue.jsonl";

/// What the annotator sees for one pending example.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PendingQuery {
    pub query_id: u64,
    pub example_id: String,
    pub iteration: usize,
    pub utterance: String,
    pub table_id: String,
    /// At most [`PREVIEW_ROWS`] rows.
    pub table: TableJson,
    pub total_rows: usize,
    pub answer: Answer,
    pub candidates: Vec<Candidate>,
    pub kinds: Vec<AnnotationKind>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryStatus {
    Pending,
    Resolved,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub query_id: u64,
    pub status: QueryStatus,
    pub query: Query,
    pub annotation: Option<Annotation>,
}

impl QueryRecord {
    pub fn pending_view(&self) -> PendingQuery {
        let q = &self.query;
        let mut table = q.table.clone();
        let total_rows = table.rows.len();
        table.rows.truncate(PREVIEW_ROWS);
        let mut candidates = q.candidates.clone();
        candidates.sort_by(|a, b| b.prob.total_cmp(&a.prob));
        PendingQuery {
            query_id: self.query_id,
            example_id: q.example_id.clone(),
            iteration: q.iteration,
            utterance: q.utterance.clone(),
            table_id: q.table_id.clone(),
            table,
            total_rows,
            answer: q.answer.clone(),
            candidates,
            kinds: q.kinds.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
enum Event {
    Enqueued { query_id: u64, query: Query },
    Resolved { query_id: u64, annotation: Annotation },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QueueError {
    #[error("unknown query {0}")]
    NotFound(u64),
    #[error("query {0} is already resolved")]
    AlreadyResolved(u64),
    #[error("{0}")]
    Invalid(String),
    #[error("queue log: {0}")]
    Log(String),
}

/// Pending and resolved queries, mirrored to an append-only log when opened
/// on a directory.
#[derive(Debug, Default)]
pub struct Queue {
    records: BTreeMap<u64, QueryRecord>,
    next_id: u64,
    log: Option<PathBuf>,
}

fn log_err(e: impl std::fmt::Display) -> QueueError {
    QueueError::Log(e.to_string())
}

impl Queue {
    pub fn in_memory() -> Self {
        Queue { next_id: 1, ..Queue::default() }
    }

    /// Opens the queue stored in `dir`, replaying its log. A final line cut
    /// short by a crash is dropped.
    pub fn open(dir: &Path) -> Result<Self, QueueError> {
        fs::create_dir_all(dir).map_err(log_err)?;
        let path = dir.join(LOG_FILE);
        let mut q = Queue::in_memory();
        if path.exists() {
            let text = fs::read_to_string(&path).map_err(log_err)?;
            let complete = text.ends_with('\n') || text.is_empty();
            let lines: Vec<&str> = text.lines().collect();
            for (i, line) in lines.iter().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let ev: Event = match serde_json::from_str(line) {
                    Ok(ev) => ev,
                    Err(_) if !complete && i + 1 == lines.len() => {
                        let keep = text.len() - line.len();
                        fs::write(&path, &text[..keep]).map_err(log_err)?;
                        break;
                    }
                    Err(e) => return Err(QueueError::Log(format!("line {}: {e}", i + 1))),
                };
                q.apply(ev).map_err(|e| QueueError::Log(format!("line {}: {e}", i + 1)))?;
            }
        }
        q.log = Some(path);
        Ok(q)
    }

    fn apply(&mut self, ev: Event) -> Result<(), QueueError> {
        match ev {
            Event::Enqueued { query_id, query } => {
                self.records.insert(query_id, QueryRecord { query_id, status: QueryStatus::Pending, query, annotation: None });
                self.next_id = self.next_id.max(query_id + 1);
            }
            Event::Resolved { query_id, annotation } => {
                let r = self.records.get_mut(&query_id).ok_or(QueueError::NotFound(query_id))?;
                if r.status == QueryStatus::Resolved {
                    return Err(QueueError::AlreadyResolved(query_id));
                }
                r.status = QueryStatus::Resolved;
                r.annotation = Some(annotation);
            }
        }
        Ok(())
    }

    fn append(&self, ev: &Event) -> Result<(), QueueError> {
        if let Some(p) = &self.log {
            let mut f: File = OpenOptions::new().create(true).append(true).open(p).map_err(log_err)?;
            let line = serde_json::to_string(ev).map_err(log_err)?;
            writeln!(f, "{line}").map_err(log_err)?;
            f.sync_data().map_err(log_err)?;
        }
        Ok(())
    }

    pub fn enqueue(&mut self, query: Query) -> Result<u64, QueueError> {
        TableEnv::from_json(query.table_id.clone(), query.table.clone())
            .map_err(|e| QueueError::Invalid(format!("table: {e}")))?;
        if query.kinds.is_empty() {
            return Err(QueueError::Invalid("a query must allow at least one annotation kind".into()));
        }
        let ev = Event::Enqueued { query_id: self.next_id, query };
        self.append(&ev)?;
        let id = self.next_id;
        self.apply(ev)?;
        Ok(id)
    }

    /// Checks `ann` against the query's example and, when it passes,
    /// resolves the query.
    pub fn resolve(&mut self, query_id: u64, mut ann: Annotation) -> Result<Content, QueueError> {
        let r = self.records.get(&query_id).ok_or(QueueError::NotFound(query_id))?;
        if r.status == QueryStatus::Resolved {
            return Err(QueueError::AlreadyResolved(query_id));
        }
        let q = &r.query;
        if !q.kinds.contains(&ann.kind) {
            return Err(QueueError::Invalid(format!("this query does not accept {:?} annotations", ann.kind)));
        }
        let env = TableEnv::from_json(q.table_id.clone(), q.table.clone()).map_err(|e| QueueError::Invalid(e.to_string()))?;
        let space = ActionSpace::new(&env, &tokenize(&q.utterance), q.max_len);
        let content =
            validate_parts(&ann, &q.example_id, &q.answer, &env, &space).map_err(|e| QueueError::Invalid(e.to_string()))?;
        ann.annotator = AnnotatorKind::Human;
        if ann.timestamp == 0 {
            ann.timestamp = now_secs();
        }
        let ev = Event::Resolved { query_id, annotation: ann };
        self.append(&ev)?;
        self.apply(ev)?;
        Ok(content)
    }

    pub fn get(&self, id: u64) -> Option<&QueryRecord> {
        self.records.get(&id)
    }

    /// Pending queries by id.
    pub fn pending(&self) -> Vec<PendingQuery> {
        self.records.values().filter(|r| r.status == QueryStatus::Pending).map(QueryRecord::pending_view).collect()
    }

    pub fn pending_count(&self) -> usize {
        self.records.values().filter(|r| r.status == QueryStatus::Pending).count()
    }

    pub fn records(&self) -> impl Iterator<Item = &QueryRecord> {
        self.records.values()
    }
}
