mod common;

use std::collections::{BTreeMap, BTreeSet};

use tablesp_core::dataset::{load_dataset, vocab_of, Corpus, DatasetError, Split};
use tablesp_core::generator::{generate_corpus, template_mix, GenConfig};
use tablesp_core::text::tokenize;
use tablesp_core::train::{explore_and_update_buffer, prepare_split};
use tablesp_core::*;

#[test]
fn saved_corpus_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = GenConfig { n_train: 300, n_dev: 50, n_test: 50, ..GenConfig::default() };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    generate_corpus(&cfg).unwrap().save(&a).unwrap();
    generate_corpus(&cfg).unwrap().save(&b).unwrap();
    for f in ["tables.json", "train.jsonl", "dev.jsonl", "test.jsonl"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let back = Corpus::load(&a).unwrap();
    let c = dir.path().join("c");
    back.save(&c).unwrap();
    for f in ["tables.json", "train.jsonl", "dev.jsonl", "test.jsonl"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(c.join(f)).unwrap(), "{f}");
    }
    let other = generate_corpus(&GenConfig { seed: 8, ..cfg }).unwrap();
    assert_ne!(other.train.examples, back.train.examples);
}

#[test]
fn stripped_corpus_loads_and_bad_rows_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let c = generate_corpus(&GenConfig { n_train: 20, n_dev: 5, n_test: 5, ..GenConfig::default() }).unwrap();
    let stripped = Corpus { train: c.train.strip_gold(), dev: c.dev.strip_gold(), test: c.test.strip_gold() };
    stripped.save(dir.path()).unwrap();
    let back = Corpus::load(dir.path()).unwrap();
    assert!(back.train.examples.iter().all(|e| e.gold_mr.is_none() && e.gold_sketch.is_none()));

    let path = dir.path().join("train.jsonl");
    let mut lines: Vec<String> = std::fs::read_to_string(&path).unwrap().lines().map(String::from).collect();
    let mut row: serde_json::Value = serde_json::from_str(&lines[3]).unwrap();
    row.as_object_mut().unwrap().remove("answer");
    lines[3] = row.to_string();
    std::fs::write(&path, lines.join("\n")).unwrap();
    match load_dataset(&path, back.train.tables.clone(), Split::Train) {
        Err(DatasetError::Parse { line, message, .. }) => {
            assert_eq!(line, 4);
            assert!(message.contains("answer"), "{message}");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn every_gold_program_is_reachable_at_its_own_length() {
    let corpus = common::corpus();
    for s in Split::ALL {
        let d = corpus.split(s);
        for ex in &d.examples {
            let gold = ex.gold_mr.as_ref().unwrap();
            let env = d.table(ex);
            assert!(answers_match(&execute(gold, env), &ex.answer), "{}", ex.id);
            assert_eq!(ex.gold_sketch.as_ref(), Some(&gold.sketch()));
            let space = ActionSpace::new(env, &ex.utterance, gold.len());
            assert!(space.actions_of(gold).is_some(), "{}: {gold}", ex.id);
        }
    }
    let ids: BTreeSet<&str> = Split::ALL.iter().flat_map(|&s| corpus.split(s).examples.iter().map(|e| e.id.as_str())).collect();
    assert_eq!(ids.len(), 2800);
}

#[test]
fn templates_come_in_several_phrasings() {
    let corpus = common::corpus();
    let distractors = [
        "please tell me ,",
        "in this table ,",
        "according to the list ,",
        "quick question :",
        "in the table",
        "according to the chart",
        "if you know",
        "from the data shown",
        "listed here",
    ];
    let nouns = ["nations", "venues", "drivers", "films", "cities", "players"];
    let mut shapes: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for ex in &corpus.train.examples {
        let env = corpus.train.table(ex);
        let mut masked: BTreeSet<String> = nouns.iter().map(|n| n.to_string()).collect();
        for c in env.columns() {
            masked.extend(tokenize(&c.name));
        }
        for row in env.rows() {
            for cell in row {
                masked.extend(tokenize(&cell.to_string()));
            }
        }
        let mut text = tokenize(&ex.text).join(" ");
        for d in distractors {
            text = text.replace(&tokenize(d).join(" "), "");
        }
        let shape: Vec<&str> = text
            .split_whitespace()
            .map(|t| if masked.contains(t) || t.chars().any(|c| c.is_ascii_digit()) { "_" } else { t })
            .collect();
        shapes.entry(ex.template.clone().unwrap()).or_default().insert(shape.join(" "));
    }
    assert_eq!(shapes.len(), 14);
    for (t, s) in &shapes {
        assert!(s.len() >= 3, "{t}: {s:?}");
    }
    let mix = template_mix(&corpus.train);
    assert_eq!(mix.values().sum::<usize>(), 2000);
}

#[test]
fn bag_of_words_sums_to_corpus_counts() {
    let corpus = common::corpus();
    let vocab = vocab_of(&corpus.train);
    let mut counts: BTreeMap<&str, u32> = BTreeMap::new();
    for ex in &corpus.train.examples {
        for t in &ex.utterance {
            *counts.entry(t.as_str()).or_insert(0) += 1;
        }
    }
    assert_eq!(vocab.words(), counts.keys().map(|w| w.to_string()).collect::<Vec<_>>());
    let mut total = vec![0u32; vocab.len()];
    for ex in &corpus.train.examples {
        for (t, q) in total.iter_mut().zip(vocab.bag_of_words(&ex.utterance)) {
            *t += q;
        }
    }
    for (w, t) in vocab.words().iter().zip(&total) {
        assert_eq!(counts[w.as_str()], *t, "{w}");
    }
    assert!(vocab.bag_of_words(&[]).iter().all(|&q| q == 0));
}

/// Measured on the default corpus with the untrained model and the default
/// beam: easy examples whose first exploration pass stores a one-statement
/// program, and those that store any program.
#[test]
fn first_exploration_pass_on_easy_examples() {
    let corpus = common::corpus();
    let mut m = Model::new(Hyper::default());
    let data = prepare_split(&mut m, &corpus.train);
    let mut buffers = BufferSet::new(data.len(), 10);
    let (mut easy, mut one, mut any) = (0, 0, 0);
    for (i, inst) in data.iter().enumerate() {
        explore_and_update_buffer(&m, inst, &mut buffers, i);
        if inst.example.is_easy() == Some(true) {
            easy += 1;
            one += usize::from(buffers.get(i).entries().iter().any(|e| e.actions.len() == 1));
            any += usize::from(!buffers.get(i).is_empty());
        }
    }
    assert_eq!((easy, one, any), (1043, 359, 591));
}

#[test]
fn cold_start_preset_is_mostly_hard() {
    let c = generate_corpus(&GenConfig { n_train: 500, ..GenConfig::cold_start_stress() }).unwrap();
    let hard = c.train.examples.iter().filter(|e| e.is_easy() == Some(false)).count();
    assert!((360..=440).contains(&hard), "{hard}");
}
