mod common;

use common::{programs, randomize, tiny, total_prob};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tablesp_core::text::tokenize;
use tablesp_core::*;

#[test]
fn probabilities_sum_to_one_with_repeat_exclusions() {
    let env = common::medals();
    let utt = tokenize("which nation had 8 silver and 6 bronze");
    let mut m = Model::new(Hyper { max_len: 3, ..Hyper::default() });
    let enc = m.encode(&utt, &env);
    let progs = programs(&enc, &env, &utt);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for round in 0..4 {
        if round > 0 {
            randomize(&mut m, &enc, &progs, &mut rng, 1.5);
        }
        let s = total_prob(&m, &enc, &progs);
        assert!((s - 1.0).abs() < 1e-9, "{s}");
    }
}

#[test]
fn single_precision_model_normalizes() {
    let env = tiny();
    let utt = tokenize("what is the score");
    let mut m = Model32::new(Hyper { max_len: 2, ..Hyper::default() });
    let enc = m.encode(&utt, &env);
    let progs = programs(&enc, &env, &utt);
    randomize(&mut m, &enc, &progs, &mut ChaCha8Rng::seed_from_u64(3), 1.0);
    assert!((total_prob(&m, &enc, &progs) - 1.0).abs() < 1e-5);
}

#[test]
fn exhaustive_beam_equals_ranked_enumeration() {
    let env = tiny();
    let utt = tokenize("what is the score");
    let mut m = Model::new(Hyper { max_len: 2, ..Hyper::default() });
    let enc = m.encode(&utt, &env);
    let progs = programs(&enc, &env, &utt);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for round in 0..3 {
        if round > 0 {
            randomize(&mut m, &enc, &progs, &mut rng, 1.0);
        }
        let sc = m.scores(&enc);
        let mut ranked: Vec<(f64, String)> = progs
            .iter()
            .map(|z| (m.log_prob(&enc, &sc, z), enc.space.program(z).to_string()))
            .collect();
        ranked.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then_with(|| a.1.cmp(&b.1)));
        let beam = m.beam_search(&enc, &sc, 1000, None);
        let got: Vec<(f64, String)> = beam.iter().map(|d| (d.log_prob, d.program(&enc).to_string())).collect();
        assert_eq!(got.len(), ranked.len());
        for (g, r) in got.iter().zip(&ranked) {
            assert_eq!(g.1, r.1);
            assert!((g.0 - r.0).abs() < 1e-12);
        }
    }
}

#[test]
fn narrow_beam_keeps_the_most_probable() {
    let env = common::medals();
    let utt = tokenize("which nation had the most gold");
    let mut m = Model::new(Hyper { max_len: 2, ..Hyper::default() });
    let enc = m.encode(&utt, &env);
    let progs = programs(&enc, &env, &utt);
    randomize(&mut m, &enc, &progs, &mut ChaCha8Rng::seed_from_u64(8), 1.0);
    let sc = m.scores(&enc);
    let best = progs
        .iter()
        .map(|z| m.log_prob(&enc, &sc, z))
        .fold(f64::NEG_INFINITY, f64::max);
    let beam = m.beam_search(&enc, &sc, 4, None);
    assert!(beam.len() <= 4);
    assert!(beam[0].log_prob <= best + 1e-12);
    for w in beam.windows(2) {
        assert!(w[0].log_prob >= w[1].log_prob);
    }
}

