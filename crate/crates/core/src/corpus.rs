//! Tokenization, vocabulary construction, frequent-word subsampling and
//! skip-gram pair generation.
//!
//! A sentence is one input line. Blank lines separate articles and never
//! produce tokens.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::digest::words_digest;
use crate::error::{Error, Result};
use crate::rng;

pub type WordId = u32;

/// Surface form of the bucket that collects all words below the minimum count.
pub const UNK: &str = "UNK";

/// Split on runs of whitespace, optionally lowercasing.
pub fn tokenize_line(text: &str, lowercase: bool) -> Vec<String> {
    text.split_whitespace()
        .map(|t| if lowercase { t.to_lowercase() } else { t.to_owned() })
        .collect()
}

/// Word ↔ id table ordered by descending count.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    words: Vec<String>,
    id_of: HashMap<String, WordId>,
    counts: Vec<u64>,
    total_tokens: u64,
    unk_id: Option<WordId>,
    min_count: u64,
}

impl Vocabulary {
    /// Count a finite token stream and fold words below `min_count` into UNK.
    pub fn build<I, S>(tokens: I, min_count: u64) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut counts: HashMap<String, u64> = HashMap::new();
        for t in tokens {
            let t = t.as_ref();
            if let Some(c) = counts.get_mut(t) {
                *c += 1;
            } else {
                counts.insert(t.to_owned(), 1);
            }
        }
        Self::from_counts(counts, min_count)
    }

    /// Parallel count over lines (shards are reduced by map merge).
    pub fn build_from_lines(lines: &[String], lowercase: bool, min_count: u64) -> Result<Self> {
        let counts = lines
            .par_iter()
            .fold(HashMap::new, |mut acc: HashMap<String, u64>, line| {
                for t in line.split_whitespace() {
                    let key = if lowercase { t.to_lowercase() } else { t.to_owned() };
                    *acc.entry(key).or_insert(0) += 1;
                }
                acc
            })
            .reduce(HashMap::new, |mut a, b| {
                if a.len() < b.len() {
                    return merge_counts(b, a);
                }
                for (k, v) in b {
                    *a.entry(k).or_insert(0) += v;
                }
                a
            });
        Self::from_counts(counts, min_count)
    }

    pub fn from_counts(counts: HashMap<String, u64>, min_count: u64) -> Result<Self> {
        if min_count == 0 {
            return Err(Error::config("min_count", "must be a positive integer"));
        }
        let total_tokens: u64 = counts.values().sum();
        if total_tokens == 0 {
            return Err(Error::EmptyCorpus);
        }
        let mut unk = 0u64;
        let mut kept: Vec<(String, u64)> = Vec::with_capacity(counts.len());
        for (w, c) in counts {
            if c == 0 {
                continue;
            }
            if w == UNK || c < min_count {
                unk += c;
            } else {
                kept.push((w, c));
            }
        }
        if unk > 0 {
            kept.push((UNK.to_owned(), unk));
        }
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let (words, counts): (Vec<_>, Vec<_>) = kept.into_iter().unzip();
        Ok(Self::assemble(words, counts, total_tokens, min_count))
    }

    fn assemble(words: Vec<String>, counts: Vec<u64>, total_tokens: u64, min_count: u64) -> Self {
        let id_of: HashMap<String, WordId> = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as WordId))
            .collect();
        let unk_id = id_of.get(UNK).copied();
        Vocabulary {
            words,
            id_of,
            counts,
            total_tokens,
            unk_id,
            min_count,
        }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn word(&self, id: WordId) -> &str {
        &self.words[id as usize]
    }

    pub fn id(&self, word: &str) -> Option<WordId> {
        self.id_of.get(word).copied()
    }

    /// Id used when encoding `word`: its own id, else UNK if one exists.
    pub fn encode_word(&self, word: &str) -> Option<WordId> {
        self.id(word).or(self.unk_id)
    }

    pub fn count(&self, id: WordId) -> u64 {
        self.counts[id as usize]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    pub fn unk_id(&self) -> Option<WordId> {
        self.unk_id
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    /// Relative frequency of `id` in the counted stream.
    pub fn frequency(&self, id: WordId) -> f64 {
        self.counts[id as usize] as f64 / self.total_tokens as f64
    }

    pub fn digest(&self) -> String {
        words_digest(&self.words)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.words.len() * 12);
        let _ = writeln!(out, "total_tokens={} min_count={}", self.total_tokens, self.min_count);
        for (w, c) in self.words.iter().zip(&self.counts) {
            let _ = writeln!(out, "{w}\t{c}");
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(BufReader::new(file))
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::parse(1, "missing header"))??;
        let (total_tokens, min_count) = parse_vocab_header(&header)?;
        let mut words = Vec::new();
        let mut counts = Vec::new();
        let mut seen = HashSet::new();
        for (i, line) in lines.enumerate() {
            let lineno = i + 2;
            let line = line?;
            let (w, c) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(lineno, "expected word<TAB>count"))?;
            if w.is_empty() || w.contains(char::is_whitespace) {
                return Err(Error::parse(lineno, format!("invalid word {w:?}")));
            }
            let c: u64 = c
                .trim()
                .parse()
                .map_err(|_| Error::parse(lineno, format!("invalid count {c:?}")))?;
            if !seen.insert(w.to_owned()) {
                return Err(Error::parse(lineno, format!("duplicate word {w:?}")));
            }
            words.push(w.to_owned());
            counts.push(c);
        }
        let sum: u64 = counts.iter().sum();
        if sum != total_tokens {
            return Err(Error::Mismatch(format!(
                "vocabulary counts sum to {sum} but header declares total_tokens={total_tokens}"
            )));
        }
        if words.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        Ok(Self::assemble(words, counts, total_tokens, min_count))
    }
}

fn merge_counts(mut big: HashMap<String, u64>, small: HashMap<String, u64>) -> HashMap<String, u64> {
    for (k, v) in small {
        *big.entry(k).or_insert(0) += v;
    }
    big
}

fn parse_vocab_header(header: &str) -> Result<(u64, u64)> {
    let mut total = None;
    let mut min = None;
    for field in header.split_whitespace() {
        match field.split_once('=') {
            Some(("total_tokens", v)) => total = v.parse().ok(),
            Some(("min_count", v)) => min = v.parse().ok(),
            _ => return Err(Error::parse(1, format!("unexpected header field {field:?}"))),
        }
    }
    match (total, min) {
        (Some(t), Some(m)) => Ok((t, m)),
        _ => Err(Error::parse(1, "header must be \"total_tokens=<N> min_count=<M>\"")),
    }
}

/// `max(0, 1 - sqrt(t / f))`.
pub fn discard_probability(frequency: f64, threshold: f64) -> Result<f64> {
    if !(frequency > 0.0) || !(threshold > 0.0) {
        return Err(Error::Domain(format!(
            "discard probability needs f > 0 and t > 0 (got f={frequency}, t={threshold})"
        )));
    }
    Ok((1.0 - (threshold / frequency).sqrt()).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubsampleConfig {
    pub threshold: f64,
    pub seed: u64,
}

/// Per-id discard probabilities with position-keyed draws.
#[derive(Debug, Clone)]
pub struct Subsampler {
    discard: Vec<f64>,
    seed: u64,
}

impl Subsampler {
    pub fn new(vocab: &Vocabulary, cfg: SubsampleConfig) -> Result<Self> {
        if !(cfg.threshold > 0.0) {
            return Err(Error::config("subsample_threshold", "must be > 0"));
        }
        let discard = (0..vocab.len() as WordId)
            .map(|id| match vocab.count(id) {
                0 => Ok(0.0),
                _ => discard_probability(vocab.frequency(id), cfg.threshold),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Subsampler {
            discard,
            seed: rng::derive(cfg.seed, rng::tags::SUBSAMPLE),
        })
    }

    pub fn discard_probability(&self, id: WordId) -> f64 {
        self.discard[id as usize]
    }

    #[inline]
    pub fn keep(&self, id: WordId, position: u64) -> bool {
        let p = self.discard[id as usize];
        p == 0.0 || rng::unit_at(self.seed, position) >= p
    }

    /// Keep-filter `ids`, where `ids[i]` sits at stream position `offset + i`.
    pub fn filter_into(&self, ids: &[WordId], offset: u64, out: &mut Vec<WordId>) {
        out.clear();
        out.extend(
            ids.iter()
                .enumerate()
                .filter(|&(i, &id)| self.keep(id, offset + i as u64))
                .map(|(_, &id)| id),
        );
    }
}

pub fn subsample_stream(ids: &[WordId], vocab: &Vocabulary, cfg: SubsampleConfig) -> Result<Vec<WordId>> {
    let sampler = Subsampler::new(vocab, cfg)?;
    let mut out = Vec::with_capacity(ids.len());
    sampler.filter_into(ids, 0, &mut out);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowConfig {
    pub max_context: u32,
    pub seed: u64,
}

/// Effective window half-width for the center at `position`, uniform on `1..=C`.
#[inline]
pub fn window_size(cfg: WindowConfig, position: u64) -> u32 {
    rng::range_at(rng::derive(cfg.seed, rng::tags::WINDOW), position, cfg.max_context)
}

pub fn generate_training_pairs(sentence: &[WordId], cfg: WindowConfig) -> Vec<(WordId, WordId)> {
    let mut out = Vec::new();
    generate_training_pairs_into(sentence, cfg, &mut out);
    out
}

/// Appends `(center, context)` pairs to `out` without clearing it.
pub fn generate_training_pairs_into(sentence: &[WordId], cfg: WindowConfig, out: &mut Vec<(WordId, WordId)>) {
    assert!(cfg.max_context >= 1, "max_context must be >= 1");
    let n = sentence.len();
    for (pos, &center) in sentence.iter().enumerate() {
        let b = window_size(cfg, pos as u64) as usize;
        let lo = pos.saturating_sub(b);
        let hi = (pos + b).min(n - 1);
        for ctx in lo..=hi {
            if ctx != pos {
                out.push((center, sentence[ctx]));
            }
        }
    }
}

/// An encoded corpus: one id sequence per non-blank input line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub sentences: Vec<Vec<WordId>>,
}

impl Corpus {
    /// Encode lines with `vocab`. Words absent from a vocabulary without UNK are dropped.
    pub fn encode(lines: &[String], vocab: &Vocabulary, lowercase: bool) -> Self {
        let sentences = lines
            .par_iter()
            .filter_map(|line| {
                let ids: Vec<WordId> = line
                    .split_whitespace()
                    .filter_map(|t| {
                        if lowercase {
                            vocab.encode_word(&t.to_lowercase())
                        } else {
                            vocab.encode_word(t)
                        }
                    })
                    .collect();
                (!ids.is_empty()).then_some(ids)
            })
            .collect();
        Corpus { sentences }
    }

    pub fn token_count(&self) -> u64 {
        self.sentences.iter().map(|s| s.len() as u64).sum()
    }

    /// Token counts per id, for checking against `Vocabulary::counts`.
    pub fn recount(&self, vocab_len: usize) -> Vec<u64> {
        let mut counts = vec![0u64; vocab_len];
        for s in &self.sentences {
            for &id in s {
                counts[id as usize] += 1;
            }
        }
        counts
    }
}

pub fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text.lines().map(str::to_owned).collect())
}

/// Size of a corpus in the units of a per-language statistics table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CorpusStats {
    pub articles: u64,
    pub sentences: u64,
    pub tokens: u64,
    pub word_forms: u64,
    pub excluded_articles: u64,
}

impl CorpusStats {
    pub fn render(&self) -> String {
        format!(
            "articles\tsentences\ttokens\tword_forms\texcluded_articles\n{}\t{}\t{}\t{}\t{}\n",
            self.articles, self.sentences, self.tokens, self.word_forms, self.excluded_articles
        )
    }
}

/// Split lines into articles at blank lines.
pub fn articles(lines: &[String]) -> Vec<&[String]> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, line) in lines.iter().enumerate() {
        let blank = line.trim().is_empty();
        match (start, blank) {
            (None, false) => start = Some(i),
            (Some(s), true) => {
                out.push(&lines[s..i]);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(&lines[s..]);
    }
    out
}

/// Corpus statistics after dropping articles shorter than `min_doc_words`.
/// `kept` receives the surviving articles, blank-line separated, when given.
pub fn corpus_stats(
    lines: &[String],
    lowercase: bool,
    min_doc_words: u64,
    mut kept: Option<&mut dyn Write>,
) -> Result<CorpusStats> {
    let mut stats = CorpusStats::default();
    let mut forms: HashSet<String> = HashSet::new();
    for article in articles(lines) {
        let words: u64 = article.iter().map(|l| l.split_whitespace().count() as u64).sum();
        if words < min_doc_words {
            stats.excluded_articles += 1;
            continue;
        }
        stats.articles += 1;
        stats.sentences += article.len() as u64;
        stats.tokens += words;
        for line in article {
            for t in tokenize_line(line, lowercase) {
                forms.insert(t);
            }
        }
        if let Some(w) = kept.as_deref_mut() {
            for line in article {
                writeln!(w, "{line}")?;
            }
            writeln!(w)?;
        }
    }
    stats.word_forms = forms.len() as u64;
    Ok(stats)
}
