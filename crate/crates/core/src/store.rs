//! Dense word-vector tables: text and binary I/O, normalization, and exact
//! cosine retrieval.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::corpus::{Vocabulary, UNK};
use crate::digest::words_digest;
use crate::error::{Error, Result};

/// Resolve a word to a row, excluding the UNK bucket.
pub trait WordLookup {
    fn lookup(&self, word: &str) -> Option<usize>;
}

impl WordLookup for Vocabulary {
    fn lookup(&self, word: &str) -> Option<usize> {
        let id = self.id(word)?;
        (Some(id) != self.unk_id()).then_some(id as usize)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    words: Vec<String>,
    index: HashMap<String, usize>,
    dim: usize,
    values: Vec<f64>,
    norms: Vec<f64>,
    normalized: bool,
}

impl WordLookup for EmbeddingMatrix {
    fn lookup(&self, word: &str) -> Option<usize> {
        if word == UNK {
            return None;
        }
        self.index.get(word).copied()
    }
}

impl EmbeddingMatrix {
    pub fn new(words: Vec<String>, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Mismatch("embedding dimension must be >= 1".into()));
        }
        if values.len() != words.len() * dim {
            return Err(Error::Mismatch(format!(
                "{} values for {} words of dimension {dim}",
                values.len(),
                words.len()
            )));
        }
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(Error::Mismatch(format!("duplicate word {w:?}")));
            }
        }
        let norms = values.chunks_exact(dim).map(l2_norm).collect();
        Ok(EmbeddingMatrix {
            words,
            index,
            dim,
            values,
            norms,
            normalized: false,
        })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn word(&self, row: usize) -> &str {
        &self.words[row]
    }

    /// Row of `word`, including UNK.
    pub fn id(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norm(&self, i: usize) -> f64 {
        self.norms[i]
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn digest(&self) -> String {
        words_digest(&self.words)
    }

    /// Scale every non-zero row to unit length. Zero rows stay zero and are
    /// skipped by retrieval.
    pub fn normalize(&mut self) {
        for (row, norm) in self.values.chunks_exact_mut(self.dim).zip(&mut self.norms) {
            if *norm > 0.0 {
                row.iter_mut().for_each(|x| *x /= *norm);
                *norm = l2_norm(row);
            }
        }
        self.normalized = true;
    }

    pub fn normalized(&self) -> Self {
        let mut m = self.clone();
        m.normalize();
        m
    }

    pub fn zero_rows(&self) -> usize {
        self.norms.iter().filter(|&&n| n == 0.0).count()
    }

    /// Text format: a `|V| D` header, then `word v1 .. vD` per row with six
    /// significant digits in plain decimal notation.
    pub fn write_text<W: Write>(&self, w: W) -> Result<()> {
        let mut w = BufWriter::new(w);
        writeln!(w, "{} {}", self.len(), self.dim)?;
        let mut line = String::new();
        for (i, word) in self.words.iter().enumerate() {
            line.clear();
            line.push_str(word);
            for &x in self.row(i) {
                line.push(' ');
                line.push_str(&format_sig6(x));
            }
            line.push('\n');
            w.write_all(line.as_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_text(&self, path: &Path) -> Result<()> {
        let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_text(f)
    }

    pub fn read_text<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines.next().ok_or_else(|| Error::parse(1, "missing header"))??;
        let mut parts = header.split_whitespace();
        let (n, dim) = match (parts.next(), parts.next(), parts.next()) {
            (Some(n), Some(d), None) => match (n.parse::<usize>(), d.parse::<usize>()) {
                (Ok(n), Ok(d)) if d > 0 => (n, d),
                _ => return Err(Error::parse(1, format!("malformed header {header:?}"))),
            },
            _ => return Err(Error::parse(1, format!("malformed header {header:?}"))),
        };
        let mut words = Vec::with_capacity(n);
        let mut values = Vec::with_capacity(n * dim);
        let mut seen = HashSet::with_capacity(n);
        for (i, line) in lines.enumerate() {
            let lineno = i + 2;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            if words.len() == n {
                return Err(Error::parse(lineno, format!("more rows than the {n} declared")));
            }
            let mut fields = line.split_whitespace();
            let word = fields.next().expect("non-blank line has a field");
            let before = values.len();
            for f in fields {
                let x: f64 = f
                    .parse()
                    .map_err(|_| Error::parse(lineno, format!("invalid number {f:?}")))?;
                values.push(x);
            }
            let got = values.len() - before;
            if got != dim {
                return Err(Error::parse(lineno, format!("expected {dim} values, found {got}")));
            }
            if !seen.insert(word.to_owned()) {
                return Err(Error::parse(lineno, format!("duplicate word {word:?}")));
            }
            words.push(word.to_owned());
        }
        if words.len() != n {
            return Err(Error::parse(
                n + 1,
                format!("header declares {n} rows, found {}", words.len()),
            ));
        }
        Self::new(words, dim, values)
    }

    pub fn load_text(path: &Path) -> Result<Self> {
        let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_text(BufReader::new(f))
    }

    /// Binary sidecar: `|V| D` header line, then little-endian f32 values, row-major.
    pub fn write_binary<W: Write>(&self, w: W) -> Result<()> {
        let mut w = BufWriter::new(w);
        writeln!(w, "{} {}", self.len(), self.dim)?;
        for &x in &self.values {
            w.write_all(&(x as f32).to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_binary<R: BufRead>(mut reader: R, words: Vec<String>) -> Result<Self> {
        let mut header = String::new();
        reader.read_line(&mut header)?;
        let dims: Vec<usize> = header.split_whitespace().filter_map(|s| s.parse().ok()).collect();
        let [n, dim] = dims[..] else {
            return Err(Error::parse(1, format!("malformed header {:?}", header.trim_end())));
        };
        if n != words.len() {
            return Err(Error::Mismatch(format!(
                "binary table has {n} rows but {} words were supplied",
                words.len()
            )));
        }
        let mut bytes = vec![0u8; 4 * n * dim];
        reader.read_exact(&mut bytes)?;
        let values = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")) as f64)
            .collect();
        Self::new(words, dim, values)
    }
}

fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Six significant digits, no exponent, trailing zeros trimmed.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_finite() { "0".into() } else { format!("{x}") };
    }
    let exp = x.abs().log10().floor() as i32;
    let decimals = (5 - exp).clamp(0, 330) as usize;
    let mut s = format!("{x:.decimals$}");
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    let (na, nb) = (l2_norm(a), l2_norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Domain("cosine of a zero vector".into()));
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Order by descending score, then ascending id.
fn rank_order(a: &(usize, f64), b: &(usize, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

/// Exact top-`k` rows by cosine similarity to `query`.
///
/// Rows in `exclude` and zero rows are never returned. A zero query has no
/// defined neighbors and yields an empty list.
pub fn top_k(query: &[f64], matrix: &EmbeddingMatrix, k: usize, exclude: &[usize]) -> Vec<(usize, f64)> {
    debug_assert_eq!(query.len(), matrix.dim());
    let qn = l2_norm(query);
    if qn == 0.0 || k == 0 {
        return Vec::new();
    }
    let mut scored: Vec<(usize, f64)> = (0..matrix.len())
        .filter(|i| matrix.norms[*i] > 0.0 && !exclude.contains(i))
        .map(|i| (i, (dot(query, matrix.row(i)) / (qn * matrix.norms[i])).clamp(-1.0, 1.0)))
        .collect();
    if k < scored.len() {
        scored.select_nth_unstable_by(k - 1, rank_order);
        scored.truncate(k);
    }
    scored.sort_unstable_by(rank_order);
    scored
}
