//! Per-pair SGD over the skip-gram objective.
//!
//! Tables live in `AtomicU64` cells (f64 bit patterns) during training so
//! that several workers can update them without locks. Loads and stores are
//! `Relaxed`: concurrent updates to the same row may interleave, which
//! Hogwild-style training tolerates. With one worker every run is
//! bit-reproducible.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{window_size, Corpus, SubsampleConfig, Subsampler, Vocabulary, WindowConfig, WordId};
use crate::error::{Error, Result};
use crate::rng;

use super::loss::{dot, logistic_term};
use super::model::{init_model, ModelState};
use super::sampler::NoiseSampler;
use super::{LossKind, TrainerConfig};

/// Linear interpolation from `lr_start` (progress 0) to `lr_end` (progress `total`).
pub fn learning_rate_at(lr_start: f64, lr_end: f64, progress: u64, total: u64) -> f64 {
    if total == 0 {
        return lr_start;
    }
    let frac = (progress.min(total)) as f64 / total as f64;
    lr_start + (lr_end - lr_start) * frac
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub mean_loss: f64,
    pub pairs: u64,
    pub tokens_per_sec: f64,
}

impl EpochMetrics {
    /// `epoch<TAB>mean_loss<TAB>tokens_per_sec`
    pub fn log_line(&self) -> String {
        format!("{}\t{:.6}\t{:.1}", self.epoch, self.mean_loss, self.tokens_per_sec)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub state: ModelState,
    pub epochs: Vec<EpochMetrics>,
}

pub fn train(corpus: &Corpus, vocab: &Vocabulary, cfg: &TrainerConfig) -> Result<TrainOutput> {
    train_with(corpus, vocab, cfg, |_, _| Ok(()))
}

struct Shared<'a> {
    input: &'a [AtomicU64],
    output: &'a [AtomicU64],
    dim: usize,
}

impl Shared<'_> {
    #[inline]
    fn load(table: &[AtomicU64], id: WordId, dim: usize, buf: &mut [f64]) {
        let row = &table[id as usize * dim..(id as usize + 1) * dim];
        for (b, cell) in buf.iter_mut().zip(row) {
            *b = f64::from_bits(cell.load(Ordering::Relaxed));
        }
    }

    /// Store `buf` into the row; false if any value is non-finite.
    #[inline]
    fn store(table: &[AtomicU64], id: WordId, dim: usize, buf: &[f64]) -> bool {
        let row = &table[id as usize * dim..(id as usize + 1) * dim];
        let mut finite = true;
        for (cell, &b) in row.iter().zip(buf) {
            finite &= b.is_finite();
            cell.store(b.to_bits(), Ordering::Relaxed);
        }
        finite
    }
}

struct Worker<'a> {
    shared: &'a Shared<'a>,
    sampler: &'a NoiseSampler,
    /// `log(k·q(w))` per id for NCE, empty for NEG.
    offsets: &'a [f64],
    k: usize,
    center: Vec<f64>,
    grad: Vec<f64>,
    out_row: Vec<f64>,
    noise: Vec<WordId>,
}

impl Worker<'_> {
    /// One SGD step on `(center, context)`; returns `(loss, finite)`.
    fn step(&mut self, center: WordId, context: WordId, lr: f64, rng: &mut ChaCha8Rng) -> (f64, bool) {
        let dim = self.shared.dim;
        self.noise.clear();
        for _ in 0..self.k {
            self.noise.push(self.sampler.sample(rng));
        }
        Shared::load(self.shared.input, center, dim, &mut self.center);
        self.grad.iter_mut().for_each(|g| *g = 0.0);
        let mut loss = 0.0;
        let mut finite = true;
        for i in 0..=self.k {
            let (id, positive) = if i == 0 { (context, true) } else { (self.noise[i - 1], false) };
            let offset = if self.offsets.is_empty() { 0.0 } else { self.offsets[id as usize] };
            Shared::load(self.shared.output, id, dim, &mut self.out_row);
            let (l, g) = logistic_term(dot(&self.out_row, &self.center) - offset, positive);
            loss += l;
            for ((gc, u), &v) in self.grad.iter_mut().zip(self.out_row.iter_mut()).zip(&self.center) {
                *gc += g * *u;
                *u -= lr * g * v;
            }
            finite &= Shared::store(self.shared.output, id, dim, &self.out_row);
        }
        for (v, g) in self.center.iter_mut().zip(&self.grad) {
            *v -= lr * g;
        }
        finite &= Shared::store(self.shared.input, center, dim, &self.center);
        (loss, finite && loss.is_finite())
    }
}

/// Train and call `observe` after every epoch with that epoch's metrics and
/// a snapshot of the model.
pub fn train_with<F>(corpus: &Corpus, vocab: &Vocabulary, cfg: &TrainerConfig, mut observe: F) -> Result<TrainOutput>
where
    F: FnMut(&EpochMetrics, &ModelState) -> Result<()>,
{
    cfg.validate()?;
    if vocab.is_empty() || corpus.sentences.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if let Some(bad) = corpus.sentences.iter().flatten().find(|&&id| id as usize >= vocab.len()) {
        return Err(Error::Mismatch(format!(
            "corpus id {bad} outside vocabulary of {} words",
            vocab.len()
        )));
    }

    let dim = cfg.embedding_size;
    let mut state = init_model(vocab.len(), dim, cfg.seed);
    let sampler = NoiseSampler::new(vocab, cfg.noise_power)?;
    let offsets: Vec<f64> = match cfg.loss {
        LossKind::Neg => Vec::new(),
        LossKind::Nce => {
            let k = cfg.negative_samples as f64;
            sampler.probabilities().iter().map(|&q| (k * q).ln()).collect()
        }
    };
    if cfg.loss == LossKind::Nce && sampler.probabilities().iter().any(|&q| !(q > 0.0)) {
        return Err(Error::Domain("NCE requires a positive noise probability for every word".into()));
    }

    let input: Vec<AtomicU64> = state.input.iter().map(|x| AtomicU64::new(x.to_bits())).collect();
    let output: Vec<AtomicU64> = state.output.iter().map(|x| AtomicU64::new(x.to_bits())).collect();
    let shared = Shared {
        input: &input,
        output: &output,
        dim,
    };

    let tokens_per_epoch = corpus.token_count();
    let total = tokens_per_epoch * cfg.epochs as u64;
    let mut offsets_of_sentence = Vec::with_capacity(corpus.sentences.len());
    let mut acc = 0u64;
    for s in &corpus.sentences {
        offsets_of_sentence.push(acc);
        acc += s.len() as u64;
    }
    let workers = cfg.workers.min(corpus.sentences.len()).max(1);
    let chunk = corpus.sentences.len().div_ceil(workers);

    let progress = AtomicU64::new(0);
    let failed = AtomicBool::new(false);
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let epoch_seed = rng::derive(cfg.seed, epoch as u64 + 1);
        let subsampler = Subsampler::new(
            vocab,
            SubsampleConfig {
                threshold: cfg.subsample_threshold,
                seed: epoch_seed,
            },
        )?;
        let started = Instant::now();
        let run_shard = |w: usize| -> (f64, u64) {
            let mut worker = Worker {
                shared: &shared,
                sampler: &sampler,
                offsets: &offsets,
                k: cfg.negative_samples,
                center: vec![0.0; dim],
                grad: vec![0.0; dim],
                out_row: vec![0.0; dim],
                noise: Vec::with_capacity(cfg.negative_samples),
            };
            let mut noise_rng = ChaCha8Rng::seed_from_u64(rng::derive(
                rng::derive(cfg.seed, rng::tags::NOISE),
                (epoch as u64) << 20 | w as u64,
            ));
            let mut kept = Vec::new();
            let mut positions = Vec::new();
            let (mut loss, mut count) = (0.0, 0u64);
            let lo = w * chunk;
            let hi = ((w + 1) * chunk).min(corpus.sentences.len());
            for si in lo..hi {
                if failed.load(Ordering::Relaxed) {
                    break;
                }
                let sentence = &corpus.sentences[si];
                let base = progress.fetch_add(sentence.len() as u64, Ordering::Relaxed);
                let offset = offsets_of_sentence[si];
                kept.clear();
                positions.clear();
                for (i, &id) in sentence.iter().enumerate() {
                    if subsampler.keep(id, offset + i as u64) {
                        kept.push(id);
                        positions.push(i as u64);
                    }
                }
                if kept.len() < 2 {
                    continue;
                }
                let window = WindowConfig {
                    max_context: cfg.max_context,
                    seed: rng::derive(epoch_seed, si as u64),
                };
                'sentence: for pos in 0..kept.len() {
                    let b = window_size(window, pos as u64) as usize;
                    let lr = learning_rate_at(cfg.lr_start, cfg.lr_end, base + positions[pos], total);
                    for ctx in pos.saturating_sub(b)..=(pos + b).min(kept.len() - 1) {
                        if ctx == pos {
                            continue;
                        }
                        let (l, ok) = worker.step(kept[pos], kept[ctx], lr, &mut noise_rng);
                        if !ok {
                            failed.store(true, Ordering::Relaxed);
                            break 'sentence;
                        }
                        loss += l;
                        count += 1;
                    }
                }
            }
            (loss, count)
        };

        let results: Vec<(f64, u64)> = if workers == 1 {
            vec![run_shard(0)]
        } else {
            std::thread::scope(|scope| {
                let handles: Vec<_> = (0..workers).map(|w| scope.spawn(move || run_shard(w))).collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("training worker panicked"))
                    .collect()
            })
        };

        let updates = results.iter().map(|r| r.1).sum::<u64>();
        snapshot(&input, &mut state.input);
        snapshot(&output, &mut state.output);
        if failed.load(Ordering::Relaxed) {
            let table = state.first_non_finite_table().unwrap_or("loss");
            return Err(Error::NonFinite { table, updates });
        }
        state.trained_tokens += tokens_per_epoch;
        let elapsed = started.elapsed().as_secs_f64().max(1e-9);
        let metrics = EpochMetrics {
            epoch: epoch + 1,
            mean_loss: if updates == 0 {
                f64::NAN
            } else {
                results.iter().map(|r| r.0).sum::<f64>() / updates as f64
            },
            pairs: updates,
            tokens_per_sec: tokens_per_epoch as f64 / elapsed,
        };
        log::info!(
            "epoch {}: mean loss {:.5}, {} pairs, {:.0} tokens/s",
            metrics.epoch,
            metrics.mean_loss,
            metrics.pairs,
            metrics.tokens_per_sec
        );
        observe(&metrics, &state)?;
        history.push(metrics);
    }
    Ok(TrainOutput { state, epochs: history })
}

fn snapshot(src: &[AtomicU64], dst: &mut [f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d = f64::from_bits(s.load(Ordering::Relaxed));
    }
}
