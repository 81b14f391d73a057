//! Loop-side client: posts queries, waits for the human, reports progress.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use serde::de::DeserializeOwned;
use serde::Serialize;
use tablesp_core::experiment::Progress;
use tablesp_core::supervision::{Annotation, AnnotationKind, Annotator, Query, SupervisionError};

use crate::api::{AccuracyPoint, Enqueued, RunState, StatusUpdate};
use crate::queue::{QueryRecord, QueryStatus};

fn agent(timeout: Duration) -> ureq::Agent {
    ureq::Agent::config_builder().timeout_global(Some(timeout)).http_status_as_error(false).build().into()
}

fn unavailable(e: impl std::fmt::Display) -> SupervisionError {
    SupervisionError::Unavailable(e.to_string())
}

fn read<T: DeserializeOwned>(mut r: ureq::http::Response<ureq::Body>) -> Result<T, SupervisionError> {
    let code = r.status();
    if !code.is_success() {
        let body = r.body_mut().read_to_string().unwrap_or_default();
        return Err(unavailable(format!("HTTP {code}: {body}")));
    }
    r.body_mut().read_json().map_err(unavailable)
}

fn get_json<T: DeserializeOwned>(a: &ureq::Agent, url: &str) -> Result<T, SupervisionError> {
    read(a.get(url).call().map_err(unavailable)?)
}

fn send_json<T: DeserializeOwned>(a: &ureq::Agent, method: &str, url: &str, body: &impl Serialize) -> Result<T, SupervisionError> {
    let r = match method {
        "PUT" => a.put(url).send_json(body),
        _ => a.post(url).send_json(body),
    };
    read(r.map_err(unavailable)?)
}

/// Annotator backed by the service queue: a batch is enqueued, then polled
/// until every query is resolved or `timeout` passes.
pub struct HttpAnnotator {
    base: String,
    agent: ureq::Agent,
    pub timeout: Duration,
    pub poll: Duration,
}

impl HttpAnnotator {
    pub fn new(base: impl Into<String>, timeout: Duration) -> Self {
        HttpAnnotator {
            base: base.into().trim_end_matches('/').to_string(),
            agent: agent(Duration::from_secs(30)),
            timeout,
            poll: Duration::from_millis(500),
        }
    }

    pub fn check_health(&self) -> Result<(), SupervisionError> {
        get_json::<serde_json::Value>(&self.agent, &format!("{}/api/health", self.base)).map(|_| ())
    }
}

impl Annotator for HttpAnnotator {
    fn annotate(&mut self, queries: &[Query], kind: AnnotationKind) -> Result<Vec<Annotation>, SupervisionError> {
        let mut waiting = Vec::new();
        for q in queries {
            let mut q = q.clone();
            q.kinds = vec![kind];
            let e: Enqueued = send_json(&self.agent, "POST", &format!("{}/api/queries", self.base), &q)?;
            waiting.push(e.query_id);
        }
        let deadline = Instant::now() + self.timeout;
        let mut done: BTreeMap<u64, Annotation> = BTreeMap::new();
        loop {
            for &id in &waiting {
                if done.contains_key(&id) {
                    continue;
                }
                let r: QueryRecord = get_json(&self.agent, &format!("{}/api/queries/{id}", self.base))?;
                if r.status == QueryStatus::Resolved {
                    done.insert(id, r.annotation.ok_or_else(|| unavailable("resolved query without annotation"))?);
                }
            }
            if done.len() == waiting.len() {
                return Ok(waiting.iter().map(|id| done.remove(id).expect("resolved")).collect());
            }
            if Instant::now() >= deadline {
                return Err(SupervisionError::Timeout(self.timeout.as_secs()));
            }
            std::thread::sleep(self.poll.min(deadline.saturating_duration_since(Instant::now())));
        }
    }
}

/// Mirrors loop progress onto the service's status board.
pub struct StatusReporter {
    base: String,
    agent: ureq::Agent,
    status: StatusUpdate,
}

impl StatusReporter {
    pub fn new(base: impl Into<String>, label: impl Into<String>) -> Self {
        StatusReporter {
            base: base.into().trim_end_matches('/').to_string(),
            agent: agent(Duration::from_secs(10)),
            status: StatusUpdate { label: label.into(), ..StatusUpdate::default() },
        }
    }

    pub fn report(&mut self, p: &Progress) -> Result<(), SupervisionError> {
        let s = &mut self.status;
        match *p {
            Progress::Training { iteration } => {
                s.state = RunState::Training;
                s.iteration = iteration;
            }
            Progress::AwaitingAnnotations { iteration, .. } => {
                s.state = RunState::AwaitingAnnotations;
                s.iteration = iteration;
            }
            Progress::IterationDone { iteration, dev_accuracy, test_accuracy } => {
                s.iteration = iteration;
                s.accuracies.push(AccuracyPoint { iteration, dev_accuracy, test_accuracy });
            }
            Progress::Done { .. } => s.state = RunState::Done,
        }
        send_json::<serde_json::Value>(&self.agent, "PUT", &format!("{}/api/experiment/status", self.base), &self.status)
            .map(|_| ())
    }
}
