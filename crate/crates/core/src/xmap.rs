//! Linear maps between embedding spaces: seed lexicons, least-squares fits,
//! projected retrieval and translation P@k.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng;
use crate::store::{format_sig6, top_k, EmbeddingMatrix, WordLookup};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    pub pairs: Vec<(String, String)>,
}

impl Lexicon {
    pub fn new(pairs: Vec<(String, String)>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(pairs.len());
        for (s, _) in &pairs {
            if !seen.insert(s.as_str()) {
                return Err(Error::Mismatch(format!("duplicate source word {s:?} in lexicon")));
            }
        }
        Ok(Lexicon { pairs })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn write<W: Write>(&self, w: W) -> Result<()> {
        let mut w = BufWriter::new(w);
        for (s, t) in &self.pairs {
            writeln!(w, "{s}\t{t}")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write(f)
    }

    /// A lexicon file must not repeat a source word.
    pub fn load(path: &Path) -> Result<Self> {
        Self::new(load_pairs(path)?)
    }
}

/// `source<TAB>target` lines; blank lines are skipped.
pub fn read_pairs<R: BufRead>(reader: R) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        match (fields.next(), fields.next(), fields.next()) {
            (Some(s), Some(t), None) if !s.trim().is_empty() && !t.trim().is_empty() => {
                pairs.push((s.trim().to_owned(), t.trim().to_owned()))
            }
            _ => return Err(Error::parse(i + 1, "expected source<TAB>target")),
        }
    }
    Ok(pairs)
}

pub fn load_pairs(path: &Path) -> Result<Vec<(String, String)>> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_pairs(BufReader::new(f))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedSplit {
    pub train: Lexicon,
    pub test: Lexicon,
    /// Pairs whose source or target word is not in its vocabulary.
    pub dropped_oov: usize,
    /// Later pairs repeating an earlier source word.
    pub dropped_duplicate: usize,
}

/// Order resolvable pairs by the source word's row (frequency rank) and split
/// off the first `train_size` for training and the next `test_size` for testing.
pub fn build_seed_lexicon(
    pairs: &[(String, String)],
    source: &impl WordLookup,
    target: &impl WordLookup,
    train_size: usize,
    test_size: usize,
) -> Result<SeedSplit> {
    let mut seen = HashSet::new();
    let mut dropped_oov = 0;
    let mut dropped_duplicate = 0;
    let mut ranked = Vec::new();
    for (s, t) in pairs {
        if !seen.insert(s.as_str()) {
            dropped_duplicate += 1;
            continue;
        }
        match (source.lookup(s), target.lookup(t)) {
            (Some(rank), Some(_)) => ranked.push((rank, s.clone(), t.clone())),
            _ => dropped_oov += 1,
        }
    }
    if ranked.len() < train_size {
        return Err(Error::InsufficientLexicon {
            resolvable: ranked.len(),
            dropped: dropped_oov + dropped_duplicate,
            required: train_size,
        });
    }
    ranked.sort_by_key(|r| r.0);
    let mut it = ranked.into_iter().map(|(_, s, t)| (s, t));
    let train: Vec<_> = it.by_ref().take(train_size).collect();
    let test: Vec<_> = it.take(test_size).collect();
    if test.len() < test_size {
        log::warn!("only {} test pairs available, {} requested", test.len(), test_size);
    }
    Ok(SeedSplit {
        train: Lexicon { pairs: train },
        test: Lexicon { pairs: test },
        dropped_oov,
        dropped_duplicate,
    })
}

/// Row-aligned source and target vectors, one pair per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Aligned {
    pub n: usize,
    pub source_dim: usize,
    pub target_dim: usize,
    pub source: Vec<f64>,
    pub target: Vec<f64>,
}

impl Aligned {
    pub fn new(n: usize, source_dim: usize, target_dim: usize, source: Vec<f64>, target: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Mismatch("mapping fit needs at least one pair".into()));
        }
        if source.len() != n * source_dim || target.len() != n * target_dim {
            return Err(Error::Mismatch(format!(
                "aligned rows do not match {n} pairs of {source_dim}/{target_dim} dimensions"
            )));
        }
        Ok(Aligned {
            n,
            source_dim,
            target_dim,
            source,
            target,
        })
    }

    /// Raw (unnormalized) rows for each lexicon pair.
    pub fn from_lexicon(lex: &Lexicon, src: &EmbeddingMatrix, tgt: &EmbeddingMatrix) -> Result<Self> {
        let mut source = Vec::with_capacity(lex.len() * src.dim());
        let mut target = Vec::with_capacity(lex.len() * tgt.dim());
        for (s, t) in &lex.pairs {
            let (Some(i), Some(j)) = (src.lookup(s), tgt.lookup(t)) else {
                return Err(Error::Mismatch(format!("lexicon pair {s:?} -> {t:?} is not in the embeddings")));
            };
            source.extend_from_slice(src.row(i));
            target.extend_from_slice(tgt.row(j));
        }
        Self::new(lex.len(), src.dim(), tgt.dim(), source, target)
    }

    pub fn source_row(&self, k: usize) -> &[f64] {
        &self.source[k * self.source_dim..(k + 1) * self.source_dim]
    }

    pub fn target_row(&self, k: usize) -> &[f64] {
        &self.target[k * self.target_dim..(k + 1) * self.target_dim]
    }
}

/// `W s` for a row-major `rows x cols` matrix.
pub fn apply(w: &[f64], rows: usize, cols: usize, s: &[f64]) -> Vec<f64> {
    debug_assert_eq!(w.len(), rows * cols);
    debug_assert_eq!(s.len(), cols);
    w.chunks_exact(cols)
        .map(|r| r.iter().zip(s).map(|(a, b)| a * b).sum())
        .collect()
}

fn residual(w: &[f64], data: &Aligned, k: usize) -> Vec<f64> {
    let mut r = apply(w, data.target_dim, data.source_dim, data.source_row(k));
    r.iter_mut().zip(data.target_row(k)).for_each(|(r, t)| *r -= t);
    r
}

/// `Σ_k ‖W s_k − t_k‖²`.
pub fn mapping_loss(w: &[f64], data: &Aligned) -> f64 {
    (0..data.n)
        .map(|k| residual(w, data, k).iter().map(|x| x * x).sum::<f64>())
        .sum()
}

fn loss_and_gradient(w: &[f64], data: &Aligned, rows: &[usize]) -> (f64, Vec<f64>) {
    let cols = data.source_dim;
    let mut grad = vec![0.0; w.len()];
    let mut loss = 0.0;
    for &k in rows {
        let r = residual(w, data, k);
        loss += r.iter().map(|x| x * x).sum::<f64>();
        let s = data.source_row(k);
        for (g_row, &ri) in grad.chunks_exact_mut(cols).zip(&r) {
            g_row.iter_mut().zip(s).for_each(|(g, &sj)| *g += 2.0 * ri * sj);
        }
    }
    (loss, grad)
}

/// `2 Σ_k (W s_k − t_k) s_kᵀ`, row-major like `w`.
pub fn mapping_gradient(w: &[f64], data: &Aligned) -> Vec<f64> {
    let all: Vec<usize> = (0..data.n).collect();
    loss_and_gradient(w, data, &all).1
}

#[derive(Debug, Clone, PartialEq)]
pub struct MappingConfig {
    pub lr: f64,
    pub epochs: usize,
    /// Pairs per gradient step; `None` is full batch.
    pub batch: Option<usize>,
    pub train_size: usize,
    pub test_size: usize,
    pub seed: u64,
    pub halve_on_increase: bool,
    /// Stop when the relative loss change between epochs drops below this.
    pub tolerance: f64,
}

impl Default for MappingConfig {
    fn default() -> Self {
        MappingConfig {
            lr: 0.001,
            epochs: 500,
            batch: None,
            train_size: 5000,
            test_size: 2500,
            seed: 1,
            halve_on_increase: true,
            tolerance: 1e-7,
        }
    }
}

impl MappingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::config("map_lr", "must be a positive finite number"));
        }
        if self.epochs == 0 {
            return Err(Error::config("map_epochs", "must be >= 1"));
        }
        if self.batch == Some(0) {
            return Err(Error::config("map_batch", "must be >= 1"));
        }
        if self.train_size == 0 {
            return Err(Error::config("map_train_size", "must be >= 1"));
        }
        if self.test_size == 0 {
            return Err(Error::config("map_test_size", "must be >= 1"));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::config("map_tolerance", "must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitMethod {
    GradientDescent,
    LeastSquares,
}

impl FitMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            FitMethod::GradientDescent => "gd",
            FitMethod::LeastSquares => "lstsq",
        }
    }
}

impl std::str::FromStr for FitMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gd" => Ok(FitMethod::GradientDescent),
            "lstsq" => Ok(FitMethod::LeastSquares),
            _ => Err(Error::config("map_method", format!("expected gd or lstsq, got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitDiagnostics {
    pub method: FitMethod,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub iterations: usize,
    pub final_lr: f64,
    /// Diagonal added to `SᵀS` when it was not positive definite.
    pub ridge: f64,
}

/// `W`, `target_dim x source_dim`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionMatrix {
    pub rows: usize,
    pub cols: usize,
    pub w: Vec<f64>,
    pub source_digest: String,
    pub target_digest: String,
    pub manifest: Option<String>,
    pub diagnostics: FitDiagnostics,
}

const PROJECTION_MAGIC: &str = "xlate-projection 1";

impl ProjectionMatrix {
    pub fn identity(dim: usize) -> Self {
        let mut w = vec![0.0; dim * dim];
        (0..dim).for_each(|i| w[i * dim + i] = 1.0);
        ProjectionMatrix {
            rows: dim,
            cols: dim,
            w,
            source_digest: String::new(),
            target_digest: String::new(),
            manifest: None,
            diagnostics: FitDiagnostics {
                method: FitMethod::LeastSquares,
                initial_loss: 0.0,
                final_loss: 0.0,
                iterations: 0,
                final_lr: 0.0,
                ridge: 0.0,
            },
        }
    }

    pub fn project(&self, s: &[f64]) -> Vec<f64> {
        apply(&self.w, self.rows, self.cols, s)
    }

    pub fn loss(&self, data: &Aligned) -> f64 {
        mapping_loss(&self.w, data)
    }

    /// `‖A − B‖_F / ‖B‖_F`.
    pub fn relative_frobenius(a: &[f64], b: &[f64]) -> f64 {
        let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        let base: f64 = b.iter().map(|y| y * y).sum();
        (diff / base).sqrt()
    }

    fn check_dims(&self, src: &EmbeddingMatrix, tgt: &EmbeddingMatrix) -> Result<()> {
        if src.dim() != self.cols || tgt.dim() != self.rows {
            return Err(Error::Mismatch(format!(
                "projection is {}x{} but embeddings have dimensions {} -> {}",
                self.rows,
                self.cols,
                src.dim(),
                tgt.dim()
            )));
        }
        Ok(())
    }

    /// Text checkpoint; values use the shortest round-trip decimal form.
    pub fn write<W: Write>(&self, w: W) -> Result<()> {
        let mut w = BufWriter::new(w);
        let d = &self.diagnostics;
        writeln!(w, "{PROJECTION_MAGIC}")?;
        writeln!(w, "rows\t{}", self.rows)?;
        writeln!(w, "cols\t{}", self.cols)?;
        writeln!(w, "source_digest\t{}", self.source_digest)?;
        writeln!(w, "target_digest\t{}", self.target_digest)?;
        if let Some(m) = &self.manifest {
            writeln!(w, "manifest\t{m}")?;
        }
        writeln!(w, "method\t{}", d.method.as_str())?;
        writeln!(w, "initial_loss\t{}", d.initial_loss)?;
        writeln!(w, "final_loss\t{}", d.final_loss)?;
        writeln!(w, "iterations\t{}", d.iterations)?;
        writeln!(w, "final_lr\t{}", d.final_lr)?;
        writeln!(w, "ridge\t{}", d.ridge)?;
        writeln!(w, "W")?;
        for row in self.w.chunks_exact(self.cols.max(1)) {
            let line: Vec<String> = row.iter().map(|x| x.to_string()).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write(f)
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        match lines.next() {
            Some((_, Ok(l))) if l == PROJECTION_MAGIC => {}
            _ => return Err(Error::parse(1, "not a projection checkpoint")),
        }
        let mut fields = std::collections::HashMap::new();
        let mut body_start = 0;
        for (i, line) in lines.by_ref() {
            let line = line?;
            if line == "W" {
                body_start = i + 1;
                break;
            }
            let (k, v) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(i + 1, "expected key<TAB>value"))?;
            fields.insert(k.to_owned(), (i + 1, v.to_owned()));
        }
        if body_start == 0 {
            return Err(Error::parse(1, "missing W block"));
        }
        fn get<T: std::str::FromStr>(
            fields: &std::collections::HashMap<String, (usize, String)>,
            key: &str,
        ) -> Result<T> {
            let (line, v) = fields
                .get(key)
                .ok_or_else(|| Error::parse(1, format!("missing {key}")))?;
            v.parse()
                .map_err(|_| Error::parse(*line, format!("invalid {key} {v:?}")))
        }
        let rows: usize = get(&fields, "rows")?;
        let cols: usize = get(&fields, "cols")?;
        let method: String = get(&fields, "method")?;
        let diagnostics = FitDiagnostics {
            method: method.parse()?,
            initial_loss: get(&fields, "initial_loss")?,
            final_loss: get(&fields, "final_loss")?,
            iterations: get(&fields, "iterations")?,
            final_lr: get(&fields, "final_lr")?,
            ridge: get(&fields, "ridge")?,
        };
        let mut w = Vec::with_capacity(rows * cols);
        for (i, line) in lines {
            let line = line?;
            let before = w.len();
            for f in line.split_whitespace() {
                w.push(
                    f.parse::<f64>()
                        .map_err(|_| Error::parse(i + 1, format!("invalid number {f:?}")))?,
                );
            }
            if w.len() - before != cols {
                return Err(Error::parse(i + 1, format!("expected {cols} values")));
            }
        }
        if w.len() != rows * cols {
            return Err(Error::Mismatch(format!("W has {} values, expected {rows}x{cols}", w.len())));
        }
        if w.iter().any(|x| !x.is_finite()) {
            return Err(Error::Mismatch("W holds non-finite values".into()));
        }
        Ok(ProjectionMatrix {
            rows,
            cols,
            w,
            source_digest: get(&fields, "source_digest")?,
            target_digest: get(&fields, "target_digest")?,
            manifest: fields.get("manifest").map(|(_, v)| v.clone()),
            diagnostics,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(BufReader::new(f))
    }
}

fn warn_if_underdetermined(data: &Aligned) {
    if data.n < data.source_dim {
        log::warn!(
            "{} pairs for a {}-dimensional source space; the fit is underdetermined",
            data.n,
            data.source_dim
        );
    }
}

/// Minimize `Σ‖W s_k − t_k‖²` by gradient descent from `W = 0`.
///
/// The step size halves whenever an epoch ends with a higher loss than the
/// previous one. Fitting stops early once the relative loss change falls
/// below `cfg.tolerance`, and aborts if the loss exceeds 1000 times its
/// initial value.
pub fn fit_gradient_descent(data: &Aligned, cfg: &MappingConfig) -> Result<ProjectionMatrix> {
    cfg.validate()?;
    warn_if_underdetermined(data);
    let (rows, cols) = (data.target_dim, data.source_dim);
    let mut w = vec![0.0; rows * cols];
    let initial = mapping_loss(&w, data);
    let mut lr = cfg.lr;
    let mut prev = initial;
    let mut order: Vec<usize> = (0..data.n).collect();
    let batch = cfg.batch.unwrap_or(data.n).min(data.n);
    let mut shuffle = ChaCha8Rng::seed_from_u64(rng::derive(cfg.seed, rng::tags::MAPPING));
    let mut iterations = 0;
    for _ in 0..cfg.epochs {
        if batch < data.n {
            order.shuffle(&mut shuffle);
        }
        for rows_idx in order.chunks(batch) {
            let (_, grad) = loss_and_gradient(&w, data, rows_idx);
            w.iter_mut().zip(&grad).for_each(|(w, g)| *w -= lr * g);
        }
        iterations += 1;
        let loss = mapping_loss(&w, data);
        if !loss.is_finite() || loss > 1e3 * initial.max(f64::MIN_POSITIVE) {
            return Err(Error::Diverged { loss, initial });
        }
        if loss > prev && cfg.halve_on_increase {
            lr *= 0.5;
        }
        let change = (prev - loss).abs() / prev.max(f64::MIN_POSITIVE);
        prev = loss;
        if loss == 0.0 || change < cfg.tolerance {
            break;
        }
    }
    log::info!("gradient descent: loss {initial:.6e} -> {prev:.6e} in {iterations} epochs");
    Ok(ProjectionMatrix {
        rows,
        cols,
        w,
        source_digest: String::new(),
        target_digest: String::new(),
        manifest: None,
        diagnostics: FitDiagnostics {
            method: FitMethod::GradientDescent,
            initial_loss: initial,
            final_loss: prev,
            iterations,
            final_lr: lr,
            ridge: 0.0,
        },
    })
}

pub const RIDGE: f64 = 1e-8;

/// Closed-form minimizer via the normal equations `(SᵀS) Wᵀ = SᵀT`.
///
/// When `SᵀS` is singular (for example fewer pairs than source dimensions)
/// a ridge of `1e-8` is added to its diagonal and recorded.
pub fn fit_least_squares(data: &Aligned) -> Result<ProjectionMatrix> {
    warn_if_underdetermined(data);
    let (n, ds, dt) = (data.n, data.source_dim, data.target_dim);
    let s = DMatrix::from_row_slice(n, ds, &data.source);
    let t = DMatrix::from_row_slice(n, dt, &data.target);
    let gram = s.transpose() * &s;
    let rhs = s.transpose() * &t;
    let mut ridge = 0.0;
    let chol = match (n >= ds).then(|| gram.clone().cholesky()).flatten() {
        Some(c) => c,
        None => {
            ridge = RIDGE;
            log::warn!("SᵀS is singular; adding ridge {RIDGE:e}");
            (gram + DMatrix::identity(ds, ds) * RIDGE)
                .cholesky()
                .ok_or_else(|| Error::Domain("normal equations are singular even with ridge".into()))?
        }
    };
    let wt = chol.solve(&rhs);
    let mut w = Vec::with_capacity(dt * ds);
    for r in 0..dt {
        w.extend((0..ds).map(|c| wt[(c, r)]));
    }
    if w.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite {
            table: "projection",
            updates: 0,
        });
    }
    let zero = vec![0.0; dt * ds];
    let final_loss = mapping_loss(&w, data);
    Ok(ProjectionMatrix {
        rows: dt,
        cols: ds,
        w,
        source_digest: String::new(),
        target_digest: String::new(),
        manifest: None,
        diagnostics: FitDiagnostics {
            method: FitMethod::LeastSquares,
            initial_loss: mapping_loss(&zero, data),
            final_loss,
            iterations: 1,
            final_lr: 0.0,
            ridge,
        },
    })
}

/// Source words within edit distance 2 of `word`, closest and most frequent first.
pub fn spelling_suggestions(word: &str, matrix: &EmbeddingMatrix, limit: usize) -> Vec<String> {
    let mut hits: Vec<(usize, usize)> = matrix
        .words()
        .iter()
        .enumerate()
        .filter_map(|(i, w)| {
            let d = strsim::levenshtein(word, w);
            (d <= 2).then_some((d, i))
        })
        .collect();
    hits.sort_unstable();
    hits.into_iter()
        .take(limit)
        .map(|(_, i)| matrix.word(i).to_owned())
        .collect()
}

/// Project `word` through `W` and return the `k` nearest target words by cosine.
pub fn translate(
    word: &str,
    w: &ProjectionMatrix,
    src: &EmbeddingMatrix,
    tgt: &EmbeddingMatrix,
    k: usize,
) -> Result<Vec<(String, f64)>> {
    w.check_dims(src, tgt)?;
    let Some(i) = src.lookup(word) else {
        return Err(Error::OutOfVocabulary {
            word: word.to_owned(),
            suggestions: spelling_suggestions(word, src, 5),
        });
    };
    let projected = w.project(src.row(i));
    Ok(top_k(&projected, tgt, k, &[])
        .into_iter()
        .map(|(j, c)| (tgt.word(j).to_owned(), c))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TranslationReport {
    pub ks: Vec<usize>,
    pub evaluated: usize,
    /// Test pairs skipped because a word is missing from the embeddings.
    pub unresolved: usize,
    pub hits: Vec<usize>,
}

impl TranslationReport {
    pub fn precision(&self, j: usize) -> Option<f64> {
        (self.evaluated > 0).then(|| self.hits[j] as f64 / self.evaluated as f64)
    }

    /// `k<TAB>precision` lines.
    pub fn render(&self) -> String {
        let mut out = String::from("k\tprecision\n");
        for (j, k) in self.ks.iter().enumerate() {
            match self.precision(j) {
                Some(p) => writeln!(out, "{k}\t{p:.4}").unwrap(),
                None => writeln!(out, "{k}\tn/a").unwrap(),
            }
        }
        out
    }
}

/// A pair is correct at `k` when its single gold target is among the top `k`
/// projected candidates (exact string match).
pub fn evaluate_translation(
    test: &Lexicon,
    w: &ProjectionMatrix,
    src: &EmbeddingMatrix,
    tgt: &EmbeddingMatrix,
    ks: &[usize],
) -> Result<TranslationReport> {
    w.check_dims(src, tgt)?;
    let ks = crate::analogy::normalize_ks(ks)?;
    let max_k = *ks.last().expect("non-empty");
    let resolved: Vec<(usize, usize)> = test
        .pairs
        .iter()
        .filter_map(|(s, t)| Some((src.lookup(s)?, tgt.lookup(t)?)))
        .collect();
    let ranks: Vec<Option<usize>> = resolved
        .par_iter()
        .map(|&(i, gold)| {
            let projected = w.project(src.row(i));
            top_k(&projected, tgt, max_k, &[])
                .iter()
                .position(|&(j, _)| j == gold)
                .map(|p| p + 1)
        })
        .collect();
    Ok(TranslationReport {
        hits: ks
            .iter()
            .map(|&k| ranks.iter().filter(|r| r.is_some_and(|r| r <= k)).count())
            .collect(),
        ks,
        evaluated: resolved.len(),
        unresolved: test.len() - resolved.len(),
    })
}

/// Up to `n` pairs drawn without replacement, in lexicon order.
pub fn sample_pairs(lex: &Lexicon, n: usize, seed: u64) -> Lexicon {
    let mut rng = ChaCha8Rng::seed_from_u64(rng::derive(seed, rng::tags::SAMPLE));
    let mut idx = rand::seq::index::sample(&mut rng, lex.len(), n.min(lex.len())).into_vec();
    idx.sort_unstable();
    Lexicon {
        pairs: idx.into_iter().map(|i| lex.pairs[i].clone()).collect(),
    }
}

/// Write projected source vectors and target vectors with labels for
/// external plotting. One header line, then a `src` and a `tgt` row per pair.
pub fn export_paired_projection<W: Write>(
    pairs: &Lexicon,
    w: &ProjectionMatrix,
    src: &EmbeddingMatrix,
    tgt: &EmbeddingMatrix,
    out: W,
) -> Result<()> {
    w.check_dims(src, tgt)?;
    let mut out = BufWriter::new(out);
    let mut header = String::from("label\tlang");
    for d in 1..=w.rows {
        write!(header, "\tx{d}").unwrap();
    }
    writeln!(out, "{header}")?;
    for (s, t) in &pairs.pairs {
        let (Some(i), Some(j)) = (src.lookup(s), tgt.lookup(t)) else {
            return Err(Error::Mismatch(format!("pair {s:?} -> {t:?} is not in the embeddings")));
        };
        for (label, lang, v) in [(s, "src", w.project(src.row(i))), (t, "tgt", tgt.row(j).to_vec())] {
            let mut line = format!("{label}\t{lang}");
            for x in v {
                line.push('\t');
                line.push_str(&format_sig6(x));
            }
            writeln!(out, "{line}")?;
        }
    }
    out.flush()?;
    Ok(())
}
