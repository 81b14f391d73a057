use std::path::Path;
use std::time::Duration;

use serde_json::{json, Value};
use tablesp_core::executor::{execute, Answer};
use tablesp_core::supervision::{AnnotationKind, Annotator, Candidate, Query, SupervisionError};
use tablesp_core::{parse_program, Cell, Column, ColumnKind, TableEnv};
use tablesp_service::{spawn, HttpAnnotator, ServiceConfig, ServiceHandle};

const Z0: &str = "(argmax all_rows `Gold') (hop v0 `Nation')";

fn table(rows: usize) -> TableEnv {
    let names = ["Norway", "Germany", "Canada", "Sweden", "Chile", "Peru", "Kenya", "Japan", "Italy", "Spain", "Brazil", "Egypt", "India", "Mexico", "Ghana"];
    TableEnv::new(
        "standings",
        vec![
            Column { name: "Nation".into(), kind: ColumnKind::Text },
            Column { name: "Rank".into(), kind: ColumnKind::Number },
            Column { name: "Gold".into(), kind: ColumnKind::Number },
        ],
        (0..rows).map(|i| vec![Cell::text(names[i]), Cell::int(i as i64 + 1), Cell::int(20 - i as i64)]).collect(),
    )
    .unwrap()
}

fn query(example_id: &str, rows: usize) -> Query {
    let env = table(rows);
    let answer = Answer::from_value(&execute(&parse_program(Z0).unwrap(), &env).unwrap()).unwrap();
    Query {
        example_id: example_id.into(),
        iteration: 1,
        utterance: "which nation ranked 1 won the most gold".into(),
        table_id: "standings".into(),
        table: env.to_json(),
        answer,
        candidates: vec![
            Candidate { program: "(count all_rows)".into(), prob: 0.1 },
            Candidate { program: Z0.into(), prob: 0.6 },
        ],
        kinds: vec![AnnotationKind::FullMr, AnnotationKind::Sketch],
        max_len: 4,
    }
}

fn start(dir: &Path) -> ServiceHandle {
    spawn(ServiceConfig { addr: "127.0.0.1:0".parse().unwrap(), data_dir: dir.to_path_buf(), ui_dir: None }).unwrap()
}

fn agent() -> ureq::Agent {
    ureq::Agent::config_builder().http_status_as_error(false).build().into()
}

fn call(method: &str, url: &str, body: Option<&Value>) -> (u16, Value) {
    let a = agent();
    let mut r = match (method, body) {
        ("GET", _) => a.get(url).call().unwrap(),
        ("PUT", Some(b)) => a.put(url).send_json(b).unwrap(),
        (_, Some(b)) => a.post(url).send_json(b).unwrap(),
        _ => unreachable!(),
    };
    let code = r.status().as_u16();
    let text = r.body_mut().read_to_string().unwrap();
    (code, serde_json::from_str(&text).unwrap_or(Value::String(text)))
}

fn enqueue(s: &ServiceHandle, q: &Query) -> u64 {
    let (code, v) = call("POST", &format!("{}/api/queries", s.url()), Some(&serde_json::to_value(q).unwrap()));
    assert_eq!(code, 201, "{v}");
    v["query_id"].as_u64().unwrap()
}

fn submit(s: &ServiceHandle, id: u64, example: &str, kind: &str, payload: &str) -> (u16, Value) {
    let body = json!({ "example_id": example, "kind": kind, "payload": payload });
    call("POST", &format!("{}/api/queries/{id}/annotation", s.url()), Some(&body))
}

fn pending_ids(s: &ServiceHandle) -> Vec<u64> {
    let (code, v) = call("GET", &format!("{}/api/queries/pending", s.url()), None);
    assert_eq!(code, 200);
    v.as_array().unwrap().iter().map(|q| q["query_id"].as_u64().unwrap()).collect()
}

#[test]
fn idle_service_reports_nothing_pending() {
    let dir = tempfile::tempdir().unwrap();
    let s = start(dir.path());
    assert_eq!(call("GET", &format!("{}/api/health", s.url()), None).0, 200);
    assert!(pending_ids(&s).is_empty());
    let (code, st) = call("GET", &format!("{}/api/experiment/status", s.url()), None);
    assert_eq!(code, 200);
    assert_eq!(st["state"], "idle");
    assert_eq!(st["pending_count"], 0);
    assert_eq!(call("GET", &format!("{}/api/queries/7", s.url()), None).0, 404);
}

#[test]
fn pending_queries_are_ordered_previews() {
    let dir = tempfile::tempdir().unwrap();
    let s = start(dir.path());
    let ids: Vec<u64> = (0..10).map(|i| enqueue(&s, &query(&format!("q{i}"), 15))).collect();
    assert_eq!(ids, (1..=10).collect::<Vec<_>>());
    assert_eq!(pending_ids(&s), ids);
    let (_, v) = call("GET", &format!("{}/api/queries/pending", s.url()), None);
    let first = &v[0];
    assert_eq!(first["table"]["rows"].as_array().unwrap().len(), 12);
    assert_eq!(first["total_rows"], 15);
    assert_eq!(first["candidates"][0]["program"], Z0);
    assert_eq!(first["kinds"], json!(["full_mr", "sketch"]));
    let (_, again) = call("GET", &format!("{}/api/queries/pending", s.url()), None);
    assert_eq!(v, again);

    let mut bad = serde_json::to_value(query("x", 4)).unwrap();
    bad["table"]["rows"][0] = json!(["Norway", "one", 3]);
    assert_eq!(call("POST", &format!("{}/api/queries", s.url()), Some(&bad)).0, 422);
}

#[test]
fn submissions_are_validated() {
    let dir = tempfile::tempdir().unwrap();
    let s = start(dir.path());
    let a = enqueue(&s, &query("a", 4));
    let b = enqueue(&s, &query("b", 4));

    let (code, v) = submit(&s, a, "a", "full_mr", "(argmin all_rows `Gold') (hop v0 `Nation')");
    assert_eq!(code, 422);
    assert!(v["error"].as_str().unwrap().contains("executes to"), "{v}");
    let (code, v) = submit(&s, a, "a", "full_mr", "(argmax all_rows `Gold'");
    assert_eq!(code, 422, "{v}");
    assert_eq!(submit(&s, a, "b", "full_mr", Z0).0, 422);
    assert_eq!(submit(&s, a, "a", "sketch", "(hop ...) (argmax ...)").0, 422);
    let (code, _) = call("POST", &format!("{}/api/queries/{a}/annotation", s.url()), Some(&json!({ "payload": 3 })));
    assert_eq!(code, 422);
    assert_eq!(pending_ids(&s), vec![a, b]);

    let (code, v) = submit(&s, a, "a", "full_mr", Z0);
    assert_eq!(code, 200, "{v}");
    assert_eq!(v["stored_as"], "full_mr");
    let (code, v) = submit(&s, b, "b", "sketch", "(argmax ...) (hop ...)");
    assert_eq!(code, 200, "{v}");
    assert_eq!(v["stored_as"], "sketch");
    assert_eq!(v["canonical"], "(argmax ...) (hop ...)");
    assert!(pending_ids(&s).is_empty());
    assert_eq!(submit(&s, a, "a", "full_mr", Z0).0, 409);
    assert_eq!(submit(&s, 99, "a", "full_mr", Z0).0, 404);

    let (_, rec) = call("GET", &format!("{}/api/queries/{b}", s.url()), None);
    assert_eq!(rec["status"], "resolved");
    assert_eq!(rec["annotation"]["kind"], "sketch");
    assert_eq!(rec["annotation"]["annotator"], "human");

    let only_sketch = Query { kinds: vec![AnnotationKind::Sketch], ..query("c", 4) };
    let c = enqueue(&s, &only_sketch);
    assert_eq!(submit(&s, c, "c", "full_mr", Z0).0, 422);
}

#[test]
fn concurrent_submits_resolve_once() {
    let dir = tempfile::tempdir().unwrap();
    let s = start(dir.path());
    let id = enqueue(&s, &query("a", 4));
    let codes: Vec<u16> = std::thread::scope(|sc| {
        let hs: Vec<_> = (0..8).map(|_| sc.spawn(|| submit(&s, id, "a", "full_mr", Z0).0)).collect();
        hs.into_iter().map(|h| h.join().unwrap()).collect()
    });
    assert_eq!(codes.iter().filter(|&&c| c == 200).count(), 1, "{codes:?}");
    assert_eq!(codes.iter().filter(|&&c| c == 409).count(), 7, "{codes:?}");
    let log = std::fs::read_to_string(dir.path().join("queue.jsonl")).unwrap();
    assert_eq!(log.lines().filter(|l| l.contains("\"resolved\"")).count(), 1);
}

#[test]
fn status_board_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let s = start(dir.path());
    for i in 0..3 {
        enqueue(&s, &query(&format!("q{i}"), 4));
    }
    let up = json!({
        "state": "awaiting_annotations",
        "iteration": 2,
        "label": "correctness/full_mr/5%/warm",
        "accuracies": [{ "iteration": 1, "dev_accuracy": 0.5, "test_accuracy": 0.25 }]
    });
    let (code, v) = call("PUT", &format!("{}/api/experiment/status", s.url()), Some(&up));
    assert_eq!(code, 200);
    assert_eq!(v["pending_count"], 3);
    let (_, v) = call("GET", &format!("{}/api/experiment/status", s.url()), None);
    assert_eq!(v["state"], "awaiting_annotations");
    assert_eq!(v["accuracies"][0]["test_accuracy"], 0.25);
    assert_eq!(call("PUT", &format!("{}/api/experiment/status", s.url()), Some(&json!({ "state": "bogus" }))).0, 422);
}

#[test]
fn http_annotator_waits_for_every_answer() {
    let dir = tempfile::tempdir().unwrap();
    let s = start(dir.path());
    let url = s.url();
    let human = std::thread::spawn({
        let url = url.clone();
        move || {
            let mut answered = 0;
            while answered < 2 {
                let (_, v) = call("GET", &format!("{url}/api/queries/pending"), None);
                for q in v.as_array().unwrap() {
                    let id = q["query_id"].as_u64().unwrap();
                    let ex = q["example_id"].as_str().unwrap();
                    let body = json!({ "example_id": ex, "kind": "sketch", "payload": "(argmax ...) (hop ...)" });
                    let (code, _) = call("POST", &format!("{url}/api/queries/{id}/annotation"), Some(&body));
                    assert_eq!(code, 200);
                    answered += 1;
                }
                std::thread::sleep(Duration::from_millis(20));
            }
        }
    });
    let mut ann = HttpAnnotator::new(&url, Duration::from_secs(20));
    ann.poll = Duration::from_millis(20);
    let got = ann.annotate(&[query("a", 4), query("b", 4)], AnnotationKind::Sketch).unwrap();
    human.join().unwrap();
    let ids: Vec<&str> = got.iter().map(|a| a.example_id.as_str()).collect();
    assert_eq!(ids, vec!["a", "b"]);
    assert!(got.iter().all(|a| a.kind == AnnotationKind::Sketch && a.timestamp > 0));

    let mut impatient = HttpAnnotator::new(&url, Duration::from_millis(100));
    impatient.poll = Duration::from_millis(20);
    assert_eq!(impatient.annotate(&[query("c", 4)], AnnotationKind::FullMr), Err(SupervisionError::Timeout(0)));
    drop(s);
    let gone = HttpAnnotator::new(&url, Duration::from_secs(1));
    assert!(matches!(gone.check_health(), Err(SupervisionError::Unavailable(_))));
}
