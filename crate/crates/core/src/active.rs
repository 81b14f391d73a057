//! Query selection: which training examples to send to the annotator.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxHasher;
use serde::{Deserialize, Serialize};

use crate::buffer::BufferSet;
use crate::model::ParserModel;
use crate::scalar::Scalar;
use crate::train::{beam, derivation_correct, Instance};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Heuristic {
    Random,
    Correctness,
    Uncertainty,
    UncertaintyCorrectness,
    FailedWords,
    Clustering,
}

impl Heuristic {
    pub const ALL: [Heuristic; 6] = [
        Heuristic::Random,
        Heuristic::Correctness,
        Heuristic::Uncertainty,
        Heuristic::UncertaintyCorrectness,
        Heuristic::FailedWords,
        Heuristic::Clustering,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Heuristic::Random => "random",
            Heuristic::Correctness => "correctness",
            Heuristic::Uncertainty => "uncertainty",
            Heuristic::UncertaintyCorrectness => "uncertainty_correctness",
            Heuristic::FailedWords => "failed_words",
            Heuristic::Clustering => "clustering",
        }
    }
}

impl fmt::Display for Heuristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Heuristic {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Heuristic::ALL
            .into_iter()
            .find(|h| h.as_str() == s)
            .ok_or_else(|| format!("unknown heuristic `{s}`"))
    }
}

/// What the selector knows about one training example.
#[derive(Clone, Debug, PartialEq)]
pub struct ExampleView {
    pub id: String,
    pub tokens: Vec<String>,
    pub buffer_empty: bool,
    pub top1_correct: bool,
    pub any_beam_correct: bool,
    /// Largest beam probability; 0 for an empty beam.
    pub confidence: f64,
}

impl ExampleView {
    /// No buffer hit and a wrong top prediction.
    pub fn failed(&self) -> bool {
        self.buffer_empty && !self.top1_correct
    }

    /// No buffer hit and nothing in the beam reaches the answer.
    pub fn no_signal(&self) -> bool {
        self.buffer_empty && !self.any_beam_correct
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SelectionContext {
    pub examples: Vec<ExampleView>,
    pub annotated: BTreeSet<String>,
    pub seed: u64,
}

/// Selected ids plus a note when the heuristic had to fall back.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QueryBatch {
    pub ids: Vec<String>,
    pub fallback: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SelectionDiagnostics {
    pub failed: usize,
    pub no_signal: usize,
    /// Counts of beam confidence in ten equal bins over [0, 1].
    pub confidence_histogram: [usize; 10],
}

impl SelectionContext {
    /// Labels every instance with the current model's beam.
    pub fn snapshot<F: Scalar>(
        model: &ParserModel<F>,
        instances: &[Instance],
        buffers: &BufferSet,
        annotated: &BTreeSet<String>,
        seed: u64,
    ) -> Self {
        let examples = instances
            .iter()
            .enumerate()
            .map(|(i, inst)| {
                let derivs = beam(model, inst, buffers.get(i).sketch());
                let correct: Vec<bool> = derivs.iter().map(|d| derivation_correct(inst, d)).collect();
                ExampleView {
                    id: inst.example.id.clone(),
                    tokens: inst.example.utterance.clone(),
                    buffer_empty: buffers.get(i).is_empty(),
                    top1_correct: correct.first().copied().unwrap_or(false),
                    any_beam_correct: correct.iter().any(|&c| c),
                    confidence: derivs.iter().map(|d| d.prob().as_f64()).fold(0.0, f64::max),
                }
            })
            .collect();
        SelectionContext { examples, annotated: annotated.clone(), seed }
    }

    pub fn diagnostics(&self) -> SelectionDiagnostics {
        let mut h = [0usize; 10];
        for e in &self.examples {
            h[((e.confidence * 10.0) as usize).min(9)] += 1;
        }
        SelectionDiagnostics {
            failed: self.examples.iter().filter(|e| e.failed()).count(),
            no_signal: self.examples.iter().filter(|e| e.no_signal()).count(),
            confidence_histogram: h,
        }
    }

    fn eligible(&self) -> impl Iterator<Item = &ExampleView> {
        self.examples.iter().filter(|e| !self.annotated.contains(&e.id))
    }

    fn rng(&self, salt: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15))
    }

    pub fn select(&self, h: Heuristic, budget: usize) -> QueryBatch {
        match h {
            Heuristic::Random => self.select_random(budget),
            Heuristic::Correctness => self.select_correctness(budget),
            Heuristic::Uncertainty => self.select_uncertainty(budget, false),
            Heuristic::UncertaintyCorrectness => self.select_uncertainty(budget, true),
            Heuristic::FailedWords => self.select_failed_words(budget),
            Heuristic::Clustering => {
                let k = (self.eligible().count() as f64).sqrt().ceil() as usize;
                self.select_clustering(budget, k.max(2))
            }
        }
    }

    pub fn select_random(&self, budget: usize) -> QueryBatch {
        let mut ids: Vec<String> = self.eligible().map(|e| e.id.clone()).collect();
        ids.shuffle(&mut self.rng(1));
        ids.truncate(budget);
        QueryBatch { ids, fallback: None }
    }

    /// Examples without any learning signal, in seeded random order.
    pub fn select_correctness(&self, budget: usize) -> QueryBatch {
        let mut ids: Vec<String> = self.eligible().filter(|e| e.no_signal()).map(|e| e.id.clone()).collect();
        ids.shuffle(&mut self.rng(2));
        ids.truncate(budget);
        QueryBatch { ids, fallback: None }
    }

    /// Least confident first, ties by id.
    pub fn select_uncertainty(&self, budget: usize, only_no_signal: bool) -> QueryBatch {
        let mut cands: Vec<&ExampleView> = self.eligible().filter(|e| !only_no_signal || e.no_signal()).collect();
        cands.sort_by(|a, b| a.confidence.total_cmp(&b.confidence).then_with(|| a.id.cmp(&b.id)));
        QueryBatch { ids: cands.into_iter().take(budget).map(|e| e.id.clone()).collect(), fallback: None }
    }

    /// Per-word failure rate over the whole training set.
    pub fn failure_rates(&self) -> BTreeMap<&str, f64> {
        let mut total: BTreeMap<&str, usize> = BTreeMap::new();
        let mut fail: BTreeMap<&str, usize> = BTreeMap::new();
        for e in &self.examples {
            for t in &e.tokens {
                *total.entry(t).or_insert(0) += 1;
                if e.failed() {
                    *fail.entry(t).or_insert(0) += 1;
                }
            }
        }
        total
            .into_iter()
            .map(|(w, n)| (w, fail.get(w).copied().unwrap_or(0) as f64 / n as f64))
            .collect()
    }

    /// Sum over the utterance's tokens of each word's failure rate.
    pub fn failed_word_score(&self, rates: &BTreeMap<&str, f64>, e: &ExampleView) -> f64 {
        e.tokens.iter().map(|t| rates.get(t.as_str()).copied().unwrap_or(0.0)).sum()
    }

    pub fn select_failed_words(&self, budget: usize) -> QueryBatch {
        if !self.examples.iter().any(ExampleView::failed) {
            let mut b = self.select_random(budget);
            b.fallback = Some("no failed examples; random selection".into());
            return b;
        }
        let rates = self.failure_rates();
        let mut scored: Vec<(f64, &ExampleView)> =
            self.eligible().map(|e| (self.failed_word_score(&rates, e), e)).collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.id.cmp(&b.1.id)));
        QueryBatch { ids: scored.into_iter().take(budget).map(|(_, e)| e.id.clone()).collect(), fallback: None }
    }

    pub fn select_clustering(&self, budget: usize, k: usize) -> QueryBatch {
        let pool: Vec<&ExampleView> = self.eligible().collect();
        let emb = Embeddings::new(EMBED_DIM, self.seed);
        let points: Vec<Vec<f64>> = pool.iter().map(|e| emb.sentence(&e.tokens)).collect();
        let assign = kmeans(&points, k, 100, &mut self.rng(3));
        let mut clusters: Vec<Vec<usize>> = vec![Vec::new(); k];
        for (i, &c) in assign.iter().enumerate() {
            clusters[c].push(i);
        }
        if clusters.iter().filter(|c| !c.is_empty()).count() < 2 {
            let mut b = self.select_random(budget);
            b.fallback = Some("fewer than two nonempty clusters; random selection".into());
            return b;
        }
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| clusters[b].len().cmp(&clusters[a].len()).then(a.cmp(&b)));
        order.truncate(k - k / 5);
        let per = budget.div_ceil(order.len());
        let mut rng = self.rng(4);
        let mut ids = Vec::new();
        for c in order {
            let mut members = clusters[c].clone();
            members.shuffle(&mut rng);
            ids.extend(members.into_iter().take(per).map(|i| pool[i].id.clone()));
        }
        ids.truncate(budget);
        QueryBatch { ids, fallback: None }
    }
}

pub const EMBED_DIM: usize = 32;

/// Deterministic pseudo-random word vectors keyed by a hash of the word.
#[derive(Clone, Debug)]
pub struct Embeddings {
    pub dim: usize,
    pub seed: u64,
}

impl Embeddings {
    pub fn new(dim: usize, seed: u64) -> Self {
        Embeddings { dim, seed }
    }

    pub fn word(&self, w: &str) -> Vec<f64> {
        let mut h = FxHasher::default();
        w.hash(&mut h);
        let mut rng = ChaCha8Rng::seed_from_u64(h.finish() ^ self.seed);
        (0..self.dim).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    /// Mean of the token vectors; zero for an empty utterance.
    pub fn sentence(&self, tokens: &[String]) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for t in tokens {
            for (a, b) in v.iter_mut().zip(self.word(t)) {
                *a += b;
            }
        }
        if !tokens.is_empty() {
            for a in &mut v {
                *a /= tokens.len() as f64;
            }
        }
        v
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd's algorithm from a k-means++ start. Returns a cluster per point.
pub fn kmeans(points: &[Vec<f64>], k: usize, max_iter: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    if points.is_empty() || k == 0 {
        return vec![0; points.len()];
    }
    let mut centers: Vec<Vec<f64>> = vec![points[rng.random_range(0..points.len())].clone()];
    while centers.len() < k {
        let d: Vec<f64> = points
            .iter()
            .map(|p| centers.iter().map(|c| dist2(p, c)).fold(f64::INFINITY, f64::min))
            .collect();
        let total: f64 = d.iter().sum();
        if total <= 0.0 {
            break;
        }
        let mut r = rng.random_range(0.0..total);
        let mut pick = d.len() - 1;
        for (i, &x) in d.iter().enumerate() {
            if r < x {
                pick = i;
                break;
            }
            r -= x;
        }
        centers.push(points[pick].clone());
    }
    let nearest = |p: &[f64], centers: &[Vec<f64>]| {
        let mut best = (f64::INFINITY, 0);
        for (j, c) in centers.iter().enumerate() {
            let d = dist2(p, c);
            if d < best.0 {
                best = (d, j);
            }
        }
        best.1
    };
    let mut assign: Vec<usize> = points.iter().map(|p| nearest(p, &centers)).collect();
    for _ in 0..max_iter {
        let dim = points[0].len();
        let mut sums = vec![vec![0.0; dim]; centers.len()];
        let mut counts = vec![0usize; centers.len()];
        for (p, &a) in points.iter().zip(&assign) {
            counts[a] += 1;
            for (s, x) in sums[a].iter_mut().zip(p) {
                *s += x;
            }
        }
        for (j, c) in centers.iter_mut().enumerate() {
            if counts[j] > 0 {
                *c = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            }
        }
        let next: Vec<usize> = points.iter().map(|p| nearest(p, &centers)).collect();
        if next == assign {
            break;
        }
        assign = next;
    }
    assign
}

#[cfg(test)]
mod tests {
    use super::*;

    fn view(id: &str, text: &str, empty: bool, top: bool, any: bool, conf: f64) -> ExampleView {
        ExampleView {
            id: id.into(),
            tokens: text.split(' ').map(String::from).collect(),
            buffer_empty: empty,
            top1_correct: top,
            any_beam_correct: any,
            confidence: conf,
        }
    }

    #[test]
    fn parses_names() {
        for h in Heuristic::ALL {
            assert_eq!(h.as_str().parse::<Heuristic>(), Ok(h));
        }
        assert!("best".parse::<Heuristic>().is_err());
    }

    #[test]
    fn uncertainty_prefers_low_confidence() {
        let cx = SelectionContext {
            examples: vec![view("a", "x", false, true, true, 0.9), view("b", "x", false, true, true, 0.3)],
            annotated: BTreeSet::new(),
            seed: 0,
        };
        assert_eq!(cx.select_uncertainty(1, false).ids, vec!["b"]);
    }
}
