//! Acceptance criteria, one PASS or FAIL line each. Arguments that do not
//! start with `--` keep only the criteria whose name contains one of them.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::BTreeSet;
use std::ops::ControlFlow;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::{Mutex, OnceLock};
use std::time::Instant;

use common::{
    agrees, ctx, d_minus, entry, families, micro, mixed, programs, randomize, reference_execute, standings_instance, tiny,
    total_prob, untimed, view, Z0, Z1, Z2,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tablesp_core::active::{kmeans, Embeddings, Heuristic, SelectionContext, EMBED_DIM};
use tablesp_core::experiment::{
    compare_experiments, run_full_supervision, run_wassp, warm_start, Budget, Comparison, ExperimentConfig, Start,
};
use tablesp_core::features::Feature;
use tablesp_core::generator::GenConfig;
use tablesp_core::grammar::allowed;
use tablesp_core::model::{featurize, Prev};
use tablesp_core::supervision::{apply, oracle_annotate, validate, Annotation, AnnotationKind, OracleAnnotator, Query};
use tablesp_core::text::tokenize;
use tablesp_core::train::{accuracy, beam, explore_and_update_buffer, prepare, prepare_split};
use tablesp_core::*;
use tablesp_service::{spawn, PendingQuery, ServiceConfig};

type Verdict = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn pts(x: f64) -> String {
    format!("{:.2}", 100.0 * x)
}

/// Programs per example drawn at the full length.
const LONG_SAMPLES: usize = 100;

fn executor_oracle_equivalence() -> Verdict {
    let corpus = common::corpus();
    let (mut short, mut long) = (0u64, 0u64);
    for (k, d) in [&corpus.train, &corpus.dev, &corpus.test].into_iter().enumerate() {
        for (n, ex) in d.examples.iter().enumerate() {
            let env = d.table(ex);
            let space = ActionSpace::new(env, &ex.utterance, 3);
            let mut bad = None;
            space.for_each_executed(env, |acts, out| {
                if bad.is_some() {
                    return;
                }
                let p = space.program(acts);
                let want = reference_execute(&p, env);
                if !agrees(out, &want) || !agrees(&execute(&p, env), &want) {
                    bad = Some(format!("{}: {p} gave {out:?}, reference {want:?}", ex.id));
                }
                short += 1;
            });
            if let Some(b) = bad {
                return Err(b);
            }
            let space = ActionSpace::new(env, &ex.utterance, MAX_PROGRAM_LEN);
            let mut rng = ChaCha8Rng::seed_from_u64((k as u64) << 32 | n as u64);
            'draw: for _ in 0..LONG_SAMPLES {
                let mut acts: Vec<Action> = Vec::new();
                for step in 0..MAX_PROGRAM_LEN {
                    let last = step + 1 == MAX_PROGRAM_LEN;
                    let pool: Vec<Action> = space
                        .actions(step)
                        .iter()
                        .filter(|a| a.func.produces_rows() != last && allowed(&acts, a))
                        .copied()
                        .collect();
                    if pool.is_empty() {
                        continue 'draw;
                    }
                    acts.push(pool[rng.random_range(0..pool.len())]);
                }
                let p = space.program(&acts);
                let want = reference_execute(&p, env);
                if !agrees(&execute(&p, env), &want) || !agrees(&space.execute(env, &acts), &want) {
                    return Err(format!("{}: {p}, reference {want:?}", ex.id));
                }
                long += 1;
            }
        }
    }
    ensure(
        long > 0,
        format!("{short} programs of up to 3 statements checked exhaustively, {long} drawn at {MAX_PROGRAM_LEN}; 0 mismatches"),
    )
}

fn probability_normalization() -> Verdict {
    let env = tiny();
    let utt = tokenize("what is the score");
    let mut m = Model::new(Hyper { max_len: 2, ..Hyper::default() });
    let enc = m.encode(&utt, &env);
    let progs = programs(&enc, &env, &utt);
    let mut worst = (total_prob(&m, &enc, &progs) - 1.0).abs();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        randomize(&mut m, &enc, &progs, &mut rng, 2.0);
        worst = worst.max((total_prob(&m, &enc, &progs) - 1.0).abs());
    }
    ensure(worst < 1e-9, format!("{} derivations, 11 parameter settings, max |sum - 1| = {worst:.1e}", progs.len()))
}

fn gradient_check() -> Verdict {
    let corpus = common::corpus();
    let mut m = Model::new(Hyper { max_len: 3, ..Hyper::default() });
    let data = prepare_split(&mut m, &corpus.train);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let eps = 1e-5;
    let mut worst = 0.0f64;
    let mut coords = 0;
    let mut examples = 0;
    for inst in data.iter().step_by(97).take(10) {
        let mut buffer: Vec<Vec<Action>> = Vec::new();
        inst.enc.space.for_each_executed(&inst.env, |acts, out| {
            if buffer.len() < 5 && answers_match(out, &inst.example.answer) {
                buffer.push(acts.to_vec());
            }
        });
        if buffer.is_empty() {
            return Err(format!("{} has no consistent program", inst.example.id));
        }
        let mut prefixes = buffer.clone();
        prefixes.push(inst.enc.space.actions(0)[..1].to_vec());
        randomize(&mut m, &inst.enc, &prefixes, &mut rng, 0.5);
        let seqs: Vec<&[Action]> = buffer.iter().map(Vec::as_slice).collect();
        let (_, grad) = m.mml_loss_and_grad(&inst.enc, &seqs).map_err(|e| e.to_string())?;
        let mut keys: Vec<Feature> = grad.keys().copied().collect();
        keys.sort();
        if keys.len() < 20 {
            return Err(format!("{}: only {} coordinates", inst.example.id, keys.len()));
        }
        for f in keys.iter().step_by(keys.len() / 20).take(24) {
            let w = m.weight(f);
            m.set_weight(*f, w + eps);
            let up = m.mml_loss_and_grad(&inst.enc, &seqs).unwrap().0;
            m.set_weight(*f, w - eps);
            let down = m.mml_loss_and_grad(&inst.enc, &seqs).unwrap().0;
            m.set_weight(*f, w);
            let numeric = (up - down) / (2.0 * eps);
            let analytic = grad[f];
            worst = worst.max((numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-6));
            coords += 1;
        }
        examples += 1;
    }
    ensure(
        examples == 10 && worst < 1e-4,
        format!("{coords} coordinates over {examples} examples, max relative error {worst:.2e}"),
    )
}

/// Train examples of the default corpus with a program other than the gold
/// one reaching the answer within one statement of the gold length.
const PINNED_SPURIOUS: usize = 1423;

fn spuriousness() -> Verdict {
    let corpus = common::corpus();
    let d = &corpus.train;
    let mut with = 0;
    for ex in &d.examples {
        let env = d.table(ex);
        let gold = ex.gold_mr.as_ref().ok_or_else(|| format!("{} has no gold program", ex.id))?;
        let space = ActionSpace::new(env, &ex.utterance, (gold.len() + 1).min(MAX_PROGRAM_LEN));
        let gold_acts = space.actions_of(gold);
        let mut found = None;
        let _ = space.try_for_each_executed(env, |acts, out| {
            if answers_match(out, &ex.answer) && gold_acts.as_deref() != Some(acts) {
                found = Some(space.program(acts));
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        });
        if let Some(p) = found {
            let got = execute(&p, env);
            if !answers_match(&got, &ex.answer) || !agrees(&got, &reference_execute(&p, env)) {
                return Err(format!("{}: {p} does not reproduce the answer", ex.id));
            }
            with += 1;
        }
    }
    let rate = with as f64 / d.len() as f64;
    ensure(
        rate >= 0.20 && with == PINNED_SPURIOUS,
        format!("{with}/{} train examples ({}%) admit a spurious program; pinned {PINNED_SPURIOUS}", d.len(), pts(rate)),
    )
}

fn base() -> ExperimentConfig {
    ExperimentConfig { hyper: Hyper { beam_size: 4, ..Hyper::default() }, start: Start::Warm, ..ExperimentConfig::default() }
}

fn labelled(label: &str, cfg: ExperimentConfig) -> ExperimentConfig {
    ExperimentConfig { label: label.into(), ..cfg }
}

fn active(label: &str, heuristic: Heuristic, supervision: AnnotationKind, pct: f64) -> ExperimentConfig {
    labelled(label, ExperimentConfig { heuristic, supervision, budget: Budget::Percent(pct), ..base() })
}

fn run_grid(cfgs: &[ExperimentConfig]) -> Result<Comparison, String> {
    let t = Instant::now();
    let c = compare_experiments::<f64>(cfgs, &[], 1).map_err(|e| e.to_string())?;
    eprint!("{}", c.to_table());
    eprintln!("({} runs in {:.0}s)", cfgs.len() * cfgs[0].seeds.len(), t.elapsed().as_secs_f64());
    Ok(c)
}

/// The default corpus, beam 4, warm start, five seeds.
fn main_grid() -> &'static Result<Comparison, String> {
    static G: OnceLock<Result<Comparison, String>> = OnceLock::new();
    G.get_or_init(|| {
        use AnnotationKind::{FullMr, Sketch};
        use Heuristic::*;
        run_grid(&[
            labelled("weak_only", base()),
            active("corr_full_2", Correctness, FullMr, 2.0),
            active("corr_full_5", Correctness, FullMr, 5.0),
            active("corr_full_20", Correctness, FullMr, 20.0),
            labelled("full_supervision", ExperimentConfig { full_supervision: true, ..base() }),
            active("random_full_5", Random, FullMr, 5.0),
            active("unc_corr_full_5", UncertaintyCorrectness, FullMr, 5.0),
            active("corr_sketch_5", Correctness, Sketch, 5.0),
            active("corr_sketch_20", Correctness, Sketch, 20.0),
        ])
    })
}

fn means(labels: &[&str]) -> Result<Vec<f64>, String> {
    let g = main_grid().as_ref().map_err(Clone::clone)?;
    labels.iter().map(|l| g.row(l).map(|r| r.test_mean).ok_or_else(|| format!("no row {l}"))).collect()
}

fn budget_trend() -> Verdict {
    let m = means(&["weak_only", "corr_full_2", "corr_full_5", "corr_full_20", "full_supervision"])?;
    let increasing = m[..4].windows(2).all(|w| w[1] > w[0]);
    let gap = m[4] - m[3];
    ensure(
        increasing && gap.abs() <= 0.02,
        format!(
            "budgets 0/2/5/20%: {} / {} / {} / {} (increasing: {increasing}); full supervision {}, gap {} (limit 2.00)",
            pts(m[0]),
            pts(m[1]),
            pts(m[2]),
            pts(m[3]),
            pts(m[4]),
            pts(gap)
        ),
    )
}

fn heuristic_ordering() -> Verdict {
    let m = means(&["unc_corr_full_5", "corr_full_5", "random_full_5"])?;
    ensure(
        m[0] >= m[1] && m[1] >= m[2] && m[0] - m[2] >= 0.01,
        format!(
            "at 5%: uncertainty+correctness {} >= correctness {} >= random {}; margin {} (need 1.00)",
            pts(m[0]),
            pts(m[1]),
            pts(m[2]),
            pts(m[0] - m[2])
        ),
    )
}

fn sketch_trend() -> Verdict {
    let m = means(&["corr_sketch_5", "corr_full_5", "corr_sketch_20", "corr_full_20", "weak_only"])?;
    let (d5, d20) = (m[0] - m[1], m[2] - m[3]);
    ensure(
        d5.abs() <= 0.03 && d20.abs() <= 0.03 && m[0] > m[4] && m[2] > m[4],
        format!(
            "sketch vs full program: 5% {} vs {} ({}), 20% {} vs {} ({}); zero budget {}",
            pts(m[0]),
            pts(m[1]),
            pts(d5),
            pts(m[2]),
            pts(m[3]),
            pts(d20),
            pts(m[4])
        ),
    )
}

fn cold_start() -> Verdict {
    let stress = ExperimentConfig { generator: GenConfig::cold_start_stress(), ..base() };
    let cold = ExperimentConfig { start: Start::Cold, ..stress.clone() };
    let g = run_grid(&[
        labelled("weak_cold", cold.clone()),
        labelled("weak_warm", stress),
        labelled("cold_2.5", ExperimentConfig { budget: Budget::Percent(2.5), ..cold }),
    ])?;
    let m: Vec<f64> = g.rows.iter().map(|r| r.test_mean).collect();
    ensure(
        m[0] < m[1] && m[2] - m[0] >= 0.10,
        format!(
            "weak-only cold {} < warm {}; cold + 2.5% {} (+{}, need +10.00)",
            pts(m[0]),
            pts(m[1]),
            pts(m[2]),
            pts(m[2] - m[0])
        ),
    )
}

fn degeneracies() -> Verdict {
    let corpus = common::corpus();
    let seed = 1;
    let cfg = base();
    let mut oracle = OracleAnnotator::new(&corpus.train);
    let (report, state) = run_wassp::<f64>(&cfg, &corpus, seed, &mut oracle, &mut |_| {}).map_err(|e| e.to_string())?;

    let mut model = Model::new(cfg.hyper.clone());
    let data = prepare(&mut model, &corpus);
    let mut buffers = BufferSet::new(data.train.len(), cfg.hyper.buffer_capacity);
    warm_start(&model, &data.train, &mut buffers);
    let mut weak = train(&mut model, &data, &mut buffers, Mode::Weak, &cfg.initial_options(seed)).map_err(|e| e.to_string())?;
    weak.wall_secs = 0.0;
    let report = untimed(report);
    assert!(report.iterations.is_empty() && report.queries_spent == 0);
    assert_eq!(report.initial, weak);
    assert_eq!(report.final_dev_accuracy, weak.dev_accuracy);
    assert_eq!(report.final_test_accuracy, accuracy(&model, &data.test));
    assert_eq!(state.buffers, buffers);
    assert!(state.model.to_checkpoint() == model.to_checkpoint(), "zero-budget weights differ");

    let full_cfg = ExperimentConfig { start: Start::Cold, ..base() };
    let (_, full) = run_full_supervision::<f64>(&full_cfg, &corpus, seed).map_err(|e| e.to_string())?;
    let mut model = Model::new(full_cfg.hyper.clone());
    let data = prepare(&mut model, &corpus);
    let mut buffers = BufferSet::new(data.train.len(), full_cfg.hyper.buffer_capacity);
    for (i, inst) in data.train.iter().enumerate() {
        let ann = oracle_annotate(&inst.example, AnnotationKind::FullMr).map_err(|e| e.to_string())?;
        let content = validate(&ann, inst).map_err(|e| format!("{}: {e}", inst.example.id))?;
        apply(&content, inst, buffers.get_mut(i)).map_err(|e| e.to_string())?;
    }
    train(&mut model, &data, &mut buffers, Mode::Weak, &full_cfg.initial_options(seed)).map_err(|e| e.to_string())?;
    assert_eq!(full.buffers, buffers);
    assert!(full.model.to_checkpoint() == model.to_checkpoint(), "fully annotated weights differ");
    Ok(format!(
        "zero budget equals weak-only training ({} epochs, test {}); {} annotated buffers and {} weights equal full supervision",
        weak.epochs.len(),
        pts(report.final_test_accuracy),
        data.train.len(),
        model.n_features()
    ))
}

fn sse(points: &[Vec<f64>], members: &[usize]) -> f64 {
    if members.is_empty() {
        return 0.0;
    }
    let mut mean = vec![0.0; points[0].len()];
    for &i in members {
        for (m, x) in mean.iter_mut().zip(&points[i]) {
            *m += x / members.len() as f64;
        }
    }
    members.iter().map(|&i| points[i].iter().zip(&mean).map(|(x, m)| (x - m) * (x - m)).sum::<f64>()).sum()
}

fn ids(c: &SelectionContext, h: Heuristic, n: usize) -> BTreeSet<String> {
    c.select(h, n).ids.into_iter().collect()
}

fn heuristic_properties() -> Verdict {
    let c = mixed();
    let fail = d_minus(&c);
    assert_eq!(fail, ["a", "c", "d", "f"].map(String::from).into());
    let eligible = ids(&c, Heuristic::Correctness, 100);
    assert_eq!(eligible, ["a", "d", "f"].map(String::from).into());
    for n in 0..=6 {
        assert!(ids(&c, Heuristic::Correctness, n).is_subset(&fail));
        assert!(ids(&c, Heuristic::UncertaintyCorrectness, n).is_subset(&eligible));
    }
    assert_eq!(c.select(Heuristic::UncertaintyCorrectness, 2).ids, vec!["d", "f"]);

    let c = micro();
    let rates = c.failure_rates();
    let expect = [
        ("gold", 3.0 / 4.0),
        ("most", 1.0),
        ("nation", 1.0),
        ("count", 1.0),
        ("least", 1.0),
        ("silver", 0.0),
        ("venue", 0.0),
    ];
    assert_eq!(rates.len(), expect.len());
    for (w, r) in expect {
        assert!((rates[w] - r).abs() < 1e-12, "P(fail | {w}) = {}, hand count {r}", rates[w]);
    }

    let c = families();
    let emb = Embeddings::new(EMBED_DIM, c.seed);
    let points: Vec<Vec<f64>> = c.examples.iter().map(|e| emb.sentence(&e.tokens)).collect();
    let n = points.len();
    let mut best = (f64::INFINITY, 0u32);
    for mask in 1..(1u32 << n) - 1 {
        let (a, b): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| mask >> i & 1 == 1);
        let cost = sse(&points, &a) + sse(&points, &b);
        if cost < best.0 {
            best = (cost, mask);
        }
    }
    assert!(best.1 == 0b000111 || best.1 == 0b111000, "best 2-means split {:06b}", best.1);
    let assign = kmeans(&points, 2, 100, &mut ChaCha8Rng::from_seed([3; 32]));
    assert!(assign[0] == assign[1] && assign[1] == assign[2] && assign[3] == assign[4] && assign[4] == assign[5]);
    assert_ne!(assign[0], assign[3]);
    let b = c.select_clustering(2, 2);
    assert_eq!(b.fallback, None);
    let fam: Vec<char> = b.ids.iter().map(|id| id.chars().next().unwrap()).collect();
    assert!(fam.len() == 2 && fam[0] != fam[1], "clustering picked {:?}", b.ids);

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let words = ["how", "many", "gold", "film", "venue", "after", "most", "count", "nation", "silver"];
    let mut runs = 0;
    for seed in 0..20u64 {
        let examples = (0..30)
            .map(|i| {
                let text: Vec<&str> = (0..rng.random_range(1..6)).map(|_| words[rng.random_range(0..words.len())]).collect();
                let (top1, any) = (rng.random_bool(0.5), rng.random_bool(0.6));
                view(&format!("x{i}"), &text.join(" "), rng.random_bool(0.4), top1, top1 || any, rng.random_range(0.0..1.0))
            })
            .collect();
        let cx = ctx(examples, seed);
        for h in Heuristic::ALL {
            for budget in [1, 5, 12] {
                assert_eq!(cx.select(h, budget), cx.clone().select(h, budget), "{h} under seed {seed}");
                runs += 1;
            }
        }
    }
    Ok(format!(
        "subset properties, hand-counted failure rates, one pick per family, {runs} repeated selections identical"
    ))
}

fn sketch_semantics() -> Verdict {
    let mut m = Model::new(Hyper::default());
    let inst = standings_instance(&mut m);
    let mut buf = MemoryBuffer::default();
    for z in [Z0, Z1, Z2] {
        assert!(buf.insert(entry(&inst, z), 10, |_| 0.0));
    }
    let ann = Annotation::new("q1", AnnotationKind::Sketch, "(argmax ...) (hop ...)");
    let content = validate(&ann, &inst).map_err(|e| e.to_string())?;
    apply(&content, &inst, &mut buf).map_err(|e| e.to_string())?;
    let texts: Vec<&str> = buf.entries().iter().map(|e| e.text.as_str()).collect();
    assert_eq!(texts, vec![Z0]);
    assert!(!buf.insert(entry(&inst, Z2), 10, |_| 0.0));

    let mut m = Model::new(Hyper { beam_size: 64, ..Hyper::default() });
    let inst = standings_instance(&mut m);
    let sketch = parse_sketch("(argmax ...) (hop ...)").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut feats: Vec<Feature> = Vec::new();
    for step in 0..inst.enc.space.max_len {
        for a in inst.enc.space.actions(step) {
            for b in inst.enc.space.actions(0) {
                feats.extend(featurize(&inst.enc, step, Prev::of(&[*b]), a));
            }
            feats.extend(featurize(&inst.enc, step, Prev::START, a));
        }
    }
    let mut seen = 0;
    for trial in 0..5 {
        for f in &feats {
            m.set_weight(*f, rng.random_range(-1.0..1.0));
        }
        let mut buffers = BufferSet::new(1, 10);
        for z in [Z1, Z2] {
            buffers.get_mut(0).insert(entry(&inst, z), 10, |_| 0.0);
        }
        buffers.get_mut(0).constrain(sketch.clone());
        assert!(buffers.get(0).is_empty());
        explore_and_update_buffer(&m, &inst, &mut buffers, 0);
        for e in buffers.get(0).entries() {
            assert!(e.matches_sketch(&sketch), "trial {trial}: {}", e.text);
        }
        let derivs = beam(&m, &inst, Some(&sketch));
        assert!(!derivs.is_empty());
        for d in derivs {
            assert!(sketch.matches(&d.program(&inst.enc)), "trial {trial}: {}", d.program(&inst.enc));
            seen += 1;
        }
    }
    Ok(format!("buffer reduced to {{{Z0}}}; {seen} constrained derivations over 5 random models all match"))
}

fn get<T: serde::de::DeserializeOwned>(url: &str) -> T {
    ureq::get(url).call().unwrap().body_mut().read_json().unwrap()
}

fn crash_recovery() -> Verdict {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = || ServiceConfig { addr: "127.0.0.1:0".parse().unwrap(), data_dir: dir.path().into(), ui_dir: None };
    let corpus = common::corpus();
    let mut m = Model::new(Hyper::default());
    let data = prepare_split(&mut m, &corpus.train);
    let s = spawn(cfg()).map_err(|e| e.to_string())?;
    let url = s.url();
    let n = 8;
    for inst in data.iter().take(n) {
        let q = Query::new(inst, 1, Vec::new(), vec![AnnotationKind::FullMr, AnnotationKind::Sketch]);
        ureq::post(format!("{url}/api/queries")).send_json(&q).map_err(|e| e.to_string())?;
    }
    let kind = |id: u64| if id % 2 == 0 { AnnotationKind::FullMr } else { AnnotationKind::Sketch };
    for id in [1u64, 2, 5, 6] {
        let ann = oracle_annotate(&data[id as usize - 1].example, kind(id)).unwrap();
        ureq::post(format!("{url}/api/queries/{id}/annotation")).send_json(&ann).map_err(|e| e.to_string())?;
    }
    let snapshot = |url: &str| {
        let pending: Vec<PendingQuery> = get(&format!("{url}/api/queries/pending"));
        let records: Vec<serde_json::Value> = (1..=n).map(|id| get(&format!("{url}/api/queries/{id}"))).collect();
        (pending, records)
    };
    let before = snapshot(&url);
    s.stop().map_err(|e| e.to_string())?;

    let s = spawn(cfg()).map_err(|e| e.to_string())?;
    let url = s.url();
    let after = snapshot(&url);
    assert_eq!(after.0, before.0, "pending queries differ after restart");
    assert_eq!(after.1, before.1, "query records differ after restart");
    let resolved = after.1.iter().filter(|r| r["status"] == "resolved").count();
    assert_eq!((after.0.len(), resolved), (n - 4, 4));
    let again = oracle_annotate(&data[0].example, kind(1)).unwrap();
    let code = match ureq::post(format!("{url}/api/queries/1/annotation")).send_json(&again) {
        Err(ureq::Error::StatusCode(c)) => c,
        other => return Err(format!("re-resolving gave {other:?}")),
    };
    assert_eq!(code, 409);
    let ann = oracle_annotate(&data[2].example, kind(3)).unwrap();
    ureq::post(format!("{url}/api/queries/3/annotation")).send_json(&ann).map_err(|e| e.to_string())?;
    let left: Vec<PendingQuery> = get(&format!("{url}/api/queries/pending"));
    assert_eq!(left.len(), n - 5);
    s.stop().map_err(|e| e.to_string())?;
    Ok(format!("{} pending and {resolved} resolved queries restored exactly; resolved query answers 409", before.0.len()))
}

type Criterion = (&'static str, fn() -> Verdict);

const CRITERIA: [Criterion; 12] = [
    ("executor_oracle_equivalence", executor_oracle_equivalence),
    ("probability_normalization", probability_normalization),
    ("gradient_check", gradient_check),
    ("spuriousness", spuriousness),
    ("budget_trend", budget_trend),
    ("heuristic_ordering", heuristic_ordering),
    ("sketch_trend", sketch_trend),
    ("cold_start", cold_start),
    ("degeneracies", degeneracies),
    ("heuristic_properties", heuristic_properties),
    ("sketch_semantics", sketch_semantics),
    ("crash_recovery", crash_recovery),
];

static PANIC: Mutex<Option<String>> = Mutex::new(None);

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with("--")).collect();
    std::panic::set_hook(Box::new(|info| {
        let msg = match (info.payload().downcast_ref::<&str>(), info.payload().downcast_ref::<String>()) {
            (Some(s), _) => s.to_string(),
            (_, Some(s)) => s.clone(),
            _ => "panic".into(),
        };
        let at = info.location().map(|l| format!(" at {}:{}", l.file(), l.line())).unwrap_or_default();
        *PANIC.lock().unwrap_or_else(|p| p.into_inner()) = Some(format!("{msg}{at}"));
    }));
    let mut failed = Vec::new();
    let mut ran = 0;
    for (name, check) in CRITERIA {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        ran += 1;
        let t = Instant::now();
        let verdict = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| {
            Err(PANIC.lock().unwrap_or_else(|p| p.into_inner()).take().unwrap_or_else(|| "panic".into()))
        });
        let secs = t.elapsed().as_secs_f64();
        match verdict {
            Ok(d) => println!("PASS {name} ({secs:.1}s): {d}"),
            Err(d) => {
                println!("FAIL {name} ({secs:.1}s): {d}");
                failed.push(name);
            }
        }
    }
    println!("\n{} of {ran} criteria passed", ran - failed.len());
    if !failed.is_empty() {
        println!("failed: {}", failed.join(", "));
        std::process::exit(1);
    }
}
