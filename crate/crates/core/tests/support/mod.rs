//! Independent oracles and fixture generators shared by the integration
//! tests and the acceptance gate.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use xlate::analogy::predict_target;
use xlate::corpus::WordId;
use xlate::store::{cosine, EmbeddingMatrix};
use xlate::trainer::{nce_loss_and_grads, neg_loss_and_grads, ModelState, PairGradients};
use xlate::xmap::{mapping_gradient, mapping_loss, Aligned, ProjectionMatrix};

pub const FD_STEP: f64 = 1e-4;
pub const FD_TOL: f64 = 1e-4;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// `|a - n| / max(|a|, |n|, 1e-6)`; the floor keeps vanishing components
/// from turning round-off into large relative errors.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

pub fn random_state(rng: &mut ChaCha8Rng, vocab: usize, dim: usize) -> ModelState {
    let mut table = || (0..vocab * dim).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
    let input = table();
    let output = table();
    ModelState::from_tables(vocab, dim, input, output).unwrap()
}

/// Max relative error between `grads` and central differences of `loss`
/// over the center row and every output row it reports.
fn fd_check(
    state: &ModelState,
    center: WordId,
    grads: &PairGradients,
    loss: &dyn Fn(&ModelState) -> f64,
) -> f64 {
    let mut worst: f64 = 0.0;
    let dim = state.dim();
    let mut s = state.clone();
    for i in 0..dim {
        let x = s.input_row(center)[i];
        s.input_row_mut(center)[i] = x + FD_STEP;
        let up = loss(&s);
        s.input_row_mut(center)[i] = x - FD_STEP;
        let down = loss(&s);
        s.input_row_mut(center)[i] = x;
        worst = worst.max(rel_err(grads.center[i], (up - down) / (2.0 * FD_STEP)));
    }
    let touched: HashSet<WordId> = grads.outputs.iter().map(|(id, _)| *id).collect();
    for w in 0..state.vocab_size() as WordId {
        let analytic = grads.outputs.iter().find(|(id, _)| *id == w).map(|(_, g)| g.clone());
        for i in 0..dim {
            let x = s.output_row(w)[i];
            s.output_row_mut(w)[i] = x + FD_STEP;
            let up = loss(&s);
            s.output_row_mut(w)[i] = x - FD_STEP;
            let down = loss(&s);
            s.output_row_mut(w)[i] = x;
            let numeric = (up - down) / (2.0 * FD_STEP);
            let a = analytic.as_ref().map_or(0.0, |g| g[i]);
            if !touched.contains(&w) {
                assert_eq!(numeric, 0.0, "untouched row {w} has a gradient");
            }
            worst = worst.max(rel_err(a, numeric));
        }
    }
    worst
}

/// Random instance with D <= 8 and k <= 5; returns the worst component error.
pub fn neg_fd_error(rng: &mut ChaCha8Rng) -> f64 {
    let vocab = rng.random_range(2..8);
    let dim = rng.random_range(1..=8);
    let k = rng.random_range(1..=5);
    let state = random_state(rng, vocab, dim);
    let center = rng.random_range(0..vocab) as WordId;
    let target = rng.random_range(0..vocab) as WordId;
    let noise: Vec<WordId> = (0..k).map(|_| rng.random_range(0..vocab) as WordId).collect();
    let grads = neg_loss_and_grads(&state, center, target, &noise).unwrap();
    fd_check(&state, center, &grads, &|s| neg_loss_and_grads(s, center, target, &noise).unwrap().loss)
}

pub fn nce_fd_error(rng: &mut ChaCha8Rng) -> f64 {
    let vocab = rng.random_range(2..8);
    let dim = rng.random_range(1..=8);
    let k = rng.random_range(1..=5);
    let state = random_state(rng, vocab, dim);
    let raw: Vec<f64> = (0..vocab).map(|_| rng.random_range(0.05..1.0)).collect();
    let z: f64 = raw.iter().sum();
    let q: Vec<f64> = raw.iter().map(|x| x / z).collect();
    let center = rng.random_range(0..vocab) as WordId;
    let target = rng.random_range(0..vocab) as WordId;
    let noise: Vec<WordId> = (0..k).map(|_| rng.random_range(0..vocab) as WordId).collect();
    let grads = nce_loss_and_grads(&state, center, target, &noise, &q).unwrap();
    fd_check(&state, center, &grads, &|s| {
        nce_loss_and_grads(s, center, target, &noise, &q).unwrap().loss
    })
}

/// Random `3 x 2` projection problem.
pub fn mapping_fd_error(rng: &mut ChaCha8Rng) -> f64 {
    let (dt, ds) = (3, 2);
    let n = rng.random_range(1..10);
    let mut r = || rng.random_range(-1.0..1.0);
    let source = (0..n * ds).map(|_| r()).collect();
    let target = (0..n * dt).map(|_| r()).collect();
    let mut w: Vec<f64> = (0..dt * ds).map(|_| r()).collect();
    let data = Aligned::new(n, ds, dt, source, target).unwrap();
    let grad = mapping_gradient(&w, &data);
    let mut worst: f64 = 0.0;
    for i in 0..w.len() {
        let x = w[i];
        w[i] = x + FD_STEP;
        let up = mapping_loss(&w, &data);
        w[i] = x - FD_STEP;
        let down = mapping_loss(&w, &data);
        w[i] = x;
        worst = worst.max(rel_err(grad[i], (up - down) / (2.0 * FD_STEP)));
    }
    worst
}

/// Rows drawn from a coarse integer grid so that exact cosine ties occur;
/// roughly one row in ten is zero.
pub fn grid_matrix(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> EmbeddingMatrix {
    let mut values = Vec::with_capacity(n * dim);
    for _ in 0..n {
        let zero = rng.random_bool(0.1);
        for _ in 0..dim {
            values.push(if zero { 0.0 } else { rng.random_range(-2..=2) as f64 });
        }
    }
    EmbeddingMatrix::new((0..n).map(|i| format!("w{i}")).collect(), dim, values).unwrap()
}

/// Full sort of every eligible row by (cosine desc, id asc).
pub fn brute_top_k(query: &[f64], m: &EmbeddingMatrix, k: usize, exclude: &[usize]) -> Vec<(usize, f64)> {
    let mut all: Vec<(usize, f64)> = (0..m.len())
        .filter(|i| !exclude.contains(i))
        .filter_map(|i| cosine(query, m.row(i)).ok().map(|c| (i, c)))
        .collect();
    all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

/// `C/|C| + B/|B| - A/|A|` computed directly.
pub fn manual_prediction(m: &EmbeddingMatrix, a: usize, b: usize, c: usize) -> Vec<f64> {
    let unit = |i: usize| -> Vec<f64> {
        let n = m.row(i).iter().map(|x| x * x).sum::<f64>().sqrt();
        m.row(i).iter().map(|x| if n > 0.0 { x / n } else { 0.0 }).collect()
    };
    let (a, b, c) = (unit(a), unit(b), unit(c));
    (0..m.dim()).map(|i| c[i] + b[i] - a[i]).collect()
}

/// Hits at each `k` for the given questions, by exhaustive ranking.
pub fn brute_analogy(questions: &[[usize; 4]], m: &EmbeddingMatrix, ks: &[usize]) -> Vec<usize> {
    let mut hits = vec![0; ks.len()];
    for &[a, b, c, d] in questions {
        let q = predict_target(a, b, c, m);
        let manual = manual_prediction(m, a, b, c);
        assert!(q.iter().zip(&manual).all(|(x, y)| (x - y).abs() < 1e-12));
        let ranked = brute_top_k(&q, m, usize::MAX, &[a, b, c]);
        if let Some(pos) = ranked.iter().position(|&(i, _)| i == d) {
            for (h, &k) in hits.iter_mut().zip(ks) {
                if pos < k {
                    *h += 1;
                }
            }
        }
    }
    hits
}

/// Small-vocabulary lines with planted collocations, at most 50 tokens.
pub fn phrase_corpus(rng: &mut ChaCha8Rng) -> Vec<Vec<String>> {
    let vocab = ["a", "b", "c", "d", "e", "f"];
    let mut budget = rng.random_range(1..=50);
    let mut lines = Vec::new();
    while budget > 0 {
        let len = rng.random_range(1..=budget.min(12));
        budget -= len;
        let mut line = Vec::with_capacity(len);
        while line.len() < len {
            if line.len() + 1 < len && rng.random_bool(0.3) {
                line.push("new".to_owned());
                line.push("york".to_owned());
            } else {
                line.push(vocab[rng.random_range(0..vocab.len())].to_owned());
            }
        }
        lines.push(line);
    }
    lines
}

/// Re-count, score every adjacent pair, merge greedily, repeat per threshold.
pub fn brute_phrases(lines: &[Vec<String>], delta: f64, thresholds: &[f64]) -> Vec<Vec<String>> {
    let mut lines = lines.to_vec();
    for &theta in thresholds {
        let mut uni: BTreeMap<&str, u64> = BTreeMap::new();
        let mut bi: BTreeMap<(&str, &str), u64> = BTreeMap::new();
        for l in &lines {
            for w in l {
                *uni.entry(w).or_default() += 1;
            }
            for p in l.windows(2) {
                *bi.entry((&p[0], &p[1])).or_default() += 1;
            }
        }
        let score = |a: &str, b: &str| {
            let cij = bi.get(&(a, b)).copied().unwrap_or(0) as f64;
            (cij - delta) / (uni[a] as f64 * uni[b] as f64)
        };
        let next: Vec<Vec<String>> = lines
            .iter()
            .map(|l| {
                let mut out = Vec::new();
                let mut i = 0;
                while i < l.len() {
                    if i + 1 < l.len() && score(&l[i], &l[i + 1]) > theta {
                        out.push(format!("{}_{}", l[i], l[i + 1]));
                        i += 2;
                    } else {
                        out.push(l[i].clone());
                        i += 1;
                    }
                }
                out
            })
            .collect();
        lines = next;
    }
    lines
}

/// Hits at each `k` for translating `pairs` (row indices) through `w`.
pub fn brute_translation(
    pairs: &[(usize, usize)],
    w: &ProjectionMatrix,
    src: &EmbeddingMatrix,
    tgt: &EmbeddingMatrix,
    ks: &[usize],
) -> Vec<usize> {
    let mut hits = vec![0; ks.len()];
    for &(i, gold) in pairs {
        let s = src.row(i);
        let projected: Vec<f64> = (0..w.rows)
            .map(|r| (0..w.cols).map(|c| w.w[r * w.cols + c] * s[c]).sum())
            .collect();
        let lib = w.project(s);
        assert!(projected.iter().zip(&lib).all(|(x, y)| (x - y).abs() < 1e-12));
        let ranked = brute_top_k(&lib, tgt, usize::MAX, &[]);
        if let Some(pos) = ranked.iter().position(|&(j, _)| j == gold) {
            for (h, &k) in hits.iter_mut().zip(ks) {
                if pos < k {
                    *h += 1;
                }
            }
        }
    }
    hits
}

/// Source vectors `s ~ N(0, I)`, targets `W* s + N(0, sigma^2 I)`; the first
/// `n_train` pairs are for fitting, the rest are held out.
pub struct SyntheticAlignment {
    pub w_star: Vec<f64>,
    pub dim: usize,
    pub source: EmbeddingMatrix,
    pub target: EmbeddingMatrix,
    pub n_train: usize,
}

impl SyntheticAlignment {
    pub fn generate(rng: &mut ChaCha8Rng, dim: usize, n_train: usize, n_test: usize, sigma: f64) -> Self {
        let n = n_train + n_test;
        let w_star: Vec<f64> = (0..dim * dim).map(|_| gaussian(rng)).collect();
        let source: Vec<f64> = (0..n * dim).map(|_| gaussian(rng)).collect();
        let mut target = Vec::with_capacity(n * dim);
        for k in 0..n {
            let s = &source[k * dim..(k + 1) * dim];
            for r in 0..dim {
                let clean: f64 = (0..dim).map(|c| w_star[r * dim + c] * s[c]).sum();
                target.push(clean + sigma * gaussian(rng));
            }
        }
        SyntheticAlignment {
            w_star,
            dim,
            source: EmbeddingMatrix::new((0..n).map(|i| format!("s{i}")).collect(), dim, source).unwrap(),
            target: EmbeddingMatrix::new((0..n).map(|i| format!("t{i}")).collect(), dim, target).unwrap(),
            n_train,
        }
    }

    pub fn train(&self) -> Aligned {
        let d = self.dim;
        let n = self.n_train;
        Aligned::new(
            n,
            d,
            d,
            self.source.values()[..n * d].to_vec(),
            self.target.values()[..n * d].to_vec(),
        )
        .unwrap()
    }

    pub fn test_lexicon(&self) -> xlate::xmap::Lexicon {
        xlate::xmap::Lexicon::new(
            (self.n_train..self.source.len())
                .map(|i| (format!("s{i}"), format!("t{i}")))
                .collect(),
        )
        .unwrap()
    }
}
