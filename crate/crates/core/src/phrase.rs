//! Collocation mining: score adjacent pairs with a discounted co-occurrence
//! ratio, merge pairs above a threshold into underscore-joined tokens, and
//! repeat with lower thresholds so merged tokens can grow into longer ngrams.

use std::collections::HashMap;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};

pub const JOINER: char = '_';

/// Unigram and adjacent-bigram counts over a line-structured token stream.
#[derive(Debug, Clone, Default)]
pub struct NgramCounts {
    forms: Vec<String>,
    index: HashMap<String, u32>,
    unigram: Vec<u64>,
    bigram: HashMap<(u32, u32), u64>,
    total_tokens: u64,
}

impl NgramCounts {
    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    pub fn unigram(&self, w: &str) -> u64 {
        self.index.get(w).map_or(0, |&i| self.unigram[i as usize])
    }

    pub fn bigram(&self, a: &str, b: &str) -> u64 {
        match (self.index.get(a), self.index.get(b)) {
            (Some(&i), Some(&j)) => self.bigram.get(&(i, j)).copied().unwrap_or(0),
            _ => 0,
        }
    }

    pub fn distinct_bigrams(&self) -> usize {
        self.bigram.len()
    }

    /// All bigrams as `((left, right), count)`, in no particular order.
    pub fn bigrams(&self) -> impl Iterator<Item = ((&str, &str), u64)> + '_ {
        self.bigram.iter().map(move |(&(i, j), &c)| {
            ((self.forms[i as usize].as_str(), self.forms[j as usize].as_str()), c)
        })
    }

    /// Score of `(a, b)`, `None` when either side was never seen.
    pub fn score(&self, a: &str, b: &str, delta: f64) -> Option<f64> {
        let (&i, &j) = (self.index.get(a)?, self.index.get(b)?);
        let cij = self.bigram.get(&(i, j)).copied().unwrap_or(0);
        score_bigram(cij, self.unigram[i as usize], self.unigram[j as usize], delta).ok()
    }
}

/// Count unigrams and within-line adjacent pairs.
pub fn count_ngrams(lines: &[Vec<String>]) -> NgramCounts {
    let mut counts = NgramCounts::default();
    let encoded: Vec<Vec<u32>> = lines
        .iter()
        .map(|line| {
            line.iter()
                .map(|t| {
                    if let Some(&i) = counts.index.get(t.as_str()) {
                        counts.unigram[i as usize] += 1;
                        i
                    } else {
                        let i = counts.forms.len() as u32;
                        counts.forms.push(t.clone());
                        counts.index.insert(t.clone(), i);
                        counts.unigram.push(1);
                        i
                    }
                })
                .collect()
        })
        .collect();
    counts.total_tokens = counts.unigram.iter().sum();
    counts.bigram = encoded
        .par_iter()
        .fold(HashMap::new, |mut acc: HashMap<(u32, u32), u64>, line| {
            for w in line.windows(2) {
                *acc.entry((w[0], w[1])).or_insert(0) += 1;
            }
            acc
        })
        .reduce(HashMap::new, |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_insert(0) += v;
            }
            a
        });
    counts
}

/// `(c_ij - delta) / (c_i * c_j)`.
pub fn score_bigram(pair_count: u64, left_count: u64, right_count: u64, delta: f64) -> Result<f64> {
    if left_count == 0 || right_count == 0 {
        return Err(Error::Domain("bigram score needs non-zero unigram counts".into()));
    }
    Ok((pair_count as f64 - delta) / (left_count as f64 * right_count as f64))
}

fn join(a: &str, b: &str) -> String {
    let mut s = String::with_capacity(a.len() + b.len() + 1);
    s.push_str(a);
    s.push(JOINER);
    s.push_str(b);
    s
}

/// One left-to-right greedy merge over every line.
///
/// Returns the merged lines and, for each newly formed token, the score that
/// produced it.
pub fn merge_pass(
    lines: &[Vec<String>],
    counts: &NgramCounts,
    delta: f64,
    threshold: f64,
) -> (Vec<Vec<String>>, HashMap<String, f64>) {
    type Merged = (Vec<String>, Vec<(String, f64)>);
    let per_line: Vec<Merged> = lines
        .par_iter()
        .map(|line| {
            let mut out = Vec::with_capacity(line.len());
            let mut formed = Vec::new();
            let mut i = 0;
            while i < line.len() {
                if i + 1 < line.len() {
                    if let Some(s) = counts.score(&line[i], &line[i + 1], delta) {
                        if s > threshold {
                            let merged = join(&line[i], &line[i + 1]);
                            formed.push((merged.clone(), s));
                            out.push(merged);
                            i += 2;
                            continue;
                        }
                    }
                }
                out.push(line[i].clone());
                i += 1;
            }
            (out, formed)
        })
        .collect();
    let mut scores = HashMap::new();
    let mut merged = Vec::with_capacity(per_line.len());
    for (line, formed) in per_line {
        merged.push(line);
        scores.extend(formed);
    }
    (merged, scores)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhraseConfig {
    pub delta: f64,
    pub thresholds: Vec<f64>,
}

impl PhraseConfig {
    pub const DEFAULT_DELTA: f64 = 5.0;
    pub const DEFAULT_DECAY: f64 = 0.5;

    pub fn new(delta: f64, thresholds: Vec<f64>) -> Result<Self> {
        let cfg = PhraseConfig { delta, thresholds };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `passes` thresholds starting at `start`, each `decay` times the previous.
    pub fn geometric(delta: f64, start: f64, decay: f64, passes: usize) -> Result<Self> {
        if !(decay > 0.0 && decay < 1.0) {
            return Err(Error::config("phrase_decay", "must lie in (0, 1)"));
        }
        let thresholds = (0..passes).map(|p| start * decay.powi(p as i32)).collect();
        Self::new(delta, thresholds)
    }

    pub fn passes(&self) -> usize {
        self.thresholds.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta >= 0.0) {
            return Err(Error::config("phrase_delta", "must be non-negative"));
        }
        if self.thresholds.is_empty() {
            return Err(Error::config("phrase_passes", "must be a positive integer"));
        }
        if self.thresholds.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::config("phrase_thresholds", "must be positive"));
        }
        if self.thresholds.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::config("phrase_thresholds", "must be strictly decreasing"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PassStats {
    pub pass: usize,
    pub threshold: f64,
    pub merges: u64,
    pub tokens: u64,
    pub ngram_tokens: u64,
}

impl PassStats {
    /// Share of output tokens that are ngrams.
    pub fn ngram_fraction(&self) -> f64 {
        if self.tokens == 0 {
            0.0
        } else {
            self.ngram_tokens as f64 / self.tokens as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct PhraseOutput {
    pub lines: Vec<Vec<String>>,
    pub passes: Vec<PassStats>,
    /// Score at which each merged token was last formed.
    pub scores: HashMap<String, f64>,
}

impl PhraseOutput {
    /// Merged tokens with their score and final count, most frequent first.
    pub fn report_rows(&self) -> Vec<(String, f64, u64)> {
        let mut counts: HashMap<&str, u64> = HashMap::new();
        for line in &self.lines {
            for t in line {
                if self.scores.contains_key(t) {
                    *counts.entry(t.as_str()).or_insert(0) += 1;
                }
            }
        }
        let mut rows: Vec<(String, f64, u64)> = counts
            .into_iter()
            .map(|(t, c)| (t.to_owned(), self.scores[t], c))
            .collect();
        rows.sort_by(|a, b| b.2.cmp(&a.2).then_with(|| a.0.cmp(&b.0)));
        rows
    }

    /// `ngram<TAB>score<TAB>count`, sorted by descending count.
    pub fn render_report(&self) -> String {
        let mut out = String::new();
        for (t, s, c) in self.report_rows() {
            let _ = writeln!(out, "{t}\t{s}\t{c}");
        }
        out
    }
}

pub fn run_phrase_pipeline(lines: Vec<Vec<String>>, cfg: &PhraseConfig) -> Result<PhraseOutput> {
    cfg.validate()?;
    let mut lines = lines;
    let mut passes = Vec::with_capacity(cfg.passes());
    let mut scores = HashMap::new();
    for (p, &threshold) in cfg.thresholds.iter().enumerate() {
        let counts = count_ngrams(&lines);
        let before = counts.total_tokens();
        let (merged, formed) = merge_pass(&lines, &counts, cfg.delta, threshold);
        lines = merged;
        scores.extend(formed);
        let tokens: u64 = lines.iter().map(|l| l.len() as u64).sum();
        let ngram_tokens = lines
            .iter()
            .flatten()
            .filter(|t| t.contains(JOINER) && scores.contains_key(t.as_str()))
            .count() as u64;
        log::info!("phrase pass {}: threshold {threshold}, {} merges", p + 1, before - tokens);
        passes.push(PassStats {
            pass: p + 1,
            threshold,
            merges: before - tokens,
            tokens,
            ngram_tokens,
        });
    }
    Ok(PhraseOutput {
        lines,
        passes,
        scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lines(text: &str) -> Vec<Vec<String>> {
        text.lines()
            .map(|l| l.split_whitespace().map(str::to_owned).collect())
            .collect()
    }

    #[test]
    fn count_examples() {
        let c = count_ngrams(&lines("a b a b"));
        assert_eq!(c.unigram("a"), 2);
        assert_eq!(c.unigram("b"), 2);
        assert_eq!(c.bigram("a", "b"), 2);
        assert_eq!(c.bigram("b", "a"), 1);
        assert_eq!(c.distinct_bigrams(), 2);

        let c = count_ngrams(&lines("solo\nx y"));
        assert_eq!(c.bigram("solo", "x"), 0);
        assert_eq!(c.distinct_bigrams(), 1);

        let c = count_ngrams(&[]);
        assert_eq!(c.total_tokens(), 0);
        assert_eq!(c.distinct_bigrams(), 0);
    }

    #[test]
    fn score_examples() {
        assert_eq!(score_bigram(5, 7, 9, 5.0).unwrap(), 0.0);
        assert!((score_bigram(10, 20, 10, 5.0).unwrap() - 0.025).abs() < 1e-12);
        assert!(score_bigram(2, 3, 3, 5.0).unwrap() < 0.0);
        assert!(score_bigram(1, 0, 3, 5.0).is_err());
    }

    #[test]
    fn merges_qualifying_pair() {
        let text = "i love new york\nnew york is big\nnew york city\nthe new car";
        let input = lines(text);
        let c = count_ngrams(&input);
        // (new, york): (3 - 1) / (4 * 3) = 1/6
        let (out, formed) = merge_pass(&input, &c, 1.0, 0.1);
        assert_eq!(out[0], ["i", "love", "new_york"]);
        assert_eq!(out[3], ["the", "new", "car"]);
        assert!((formed["new_york"] - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn infinite_threshold_is_identity() {
        let input = lines("a b c\na b\nb c");
        let c = count_ngrams(&input);
        let (out, formed) = merge_pass(&input, &c, 0.0, f64::INFINITY);
        assert_eq!(out, input);
        assert!(formed.is_empty());
    }

    #[test]
    fn greedy_left_to_right_without_overlap() {
        let input = lines("a b c");
        let c = count_ngrams(&input);
        let (out, _) = merge_pass(&input, &c, 0.0, 0.5);
        assert_eq!(out[0], ["a_b", "c"]);
    }

    #[test]
    fn two_pass_trigram() {
        // Pass 1: (san,francisco) = (3-1)/(3*3) = 0.222 > 0.2;
        //         (francisco,bay) = (2-1)/(3*2) = 0.167 < 0.2.
        // Pass 2: (san_francisco,bay) = (2-1)/(3*2) = 0.167 > 0.1.
        let text = "san francisco bay\nsan francisco bay\nsan francisco";
        let cfg = PhraseConfig::new(1.0, vec![0.2, 0.1]).unwrap();
        let out = run_phrase_pipeline(lines(text), &cfg).unwrap();
        assert_eq!(out.lines[0], ["san_francisco_bay"]);
        assert_eq!(out.lines[2], ["san_francisco"]);
        assert_eq!(out.passes[0].merges, 3);
        assert_eq!(out.passes[1].merges, 2);
        assert_eq!(
            out.render_report(),
            format!("san_francisco_bay\t{}\t2\nsan_francisco\t{}\t1\n", 1.0 / 6.0, 2.0 / 9.0)
        );
    }

    #[test]
    fn no_qualifying_pairs_leaves_stream() {
        let input = lines("a b c d");
        let cfg = PhraseConfig::new(5.0, vec![0.01]).unwrap();
        let out = run_phrase_pipeline(input.clone(), &cfg).unwrap();
        assert_eq!(out.lines, input);
        assert_eq!(out.passes[0].ngram_fraction(), 0.0);
    }

    #[test]
    fn config_validation() {
        assert!(PhraseConfig::new(5.0, vec![]).is_err());
        assert!(PhraseConfig::new(5.0, vec![0.2, 0.2]).is_err());
        assert!(PhraseConfig::new(-1.0, vec![0.2]).is_err());
        let g = PhraseConfig::geometric(5.0, 0.4, 0.5, 3).unwrap();
        assert_eq!(g.thresholds, [0.4, 0.2, 0.1]);
    }
}
