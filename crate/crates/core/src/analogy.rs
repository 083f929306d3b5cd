//! A:B :: C:D analogy questions and P@k scoring.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rayon::prelude::*;

use crate::corpus::UNK;
use crate::error::{Error, Result};
use crate::store::{top_k, EmbeddingMatrix};

pub type Question = [String; 4];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Category {
    pub name: String,
    pub questions: Vec<Question>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AnalogySet {
    pub categories: Vec<Category>,
}

impl AnalogySet {
    /// Parse `: category` headers followed by four-word question lines.
    /// Words are lowercased; blank lines are ignored.
    pub fn parse<R: BufRead>(reader: R) -> Result<Self> {
        let mut set = AnalogySet::default();
        let mut seen = HashSet::new();
        for (i, line) in reader.lines().enumerate() {
            let lineno = i + 1;
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix(':') {
                let name = name.trim();
                if name.is_empty() {
                    return Err(Error::parse(lineno, "empty category name"));
                }
                if !seen.insert(name.to_owned()) {
                    return Err(Error::parse(lineno, format!("duplicate category {name:?}")));
                }
                set.categories.push(Category {
                    name: name.to_owned(),
                    questions: Vec::new(),
                });
                continue;
            }
            let words: Vec<String> = line.split_whitespace().map(str::to_lowercase).collect();
            let Ok(q) = <Question>::try_from(words) else {
                let n = line.split_whitespace().count();
                return Err(Error::parse(lineno, format!("expected 4 words, found {n}")));
            };
            match set.categories.last_mut() {
                Some(cat) => cat.questions.push(q),
                None => return Err(Error::parse(lineno, "question before the first ': category' header")),
            }
        }
        Ok(set)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse(BufReader::new(f))
    }

    /// Expand per-category base pairs such as `(tokyo, japan)` into every
    /// ordered question `a_i b_i a_j b_j` with `i != j`.
    pub fn from_base_pairs(categories: Vec<(String, Vec<(String, String)>)>) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut set = AnalogySet::default();
        for (name, pairs) in categories {
            if !seen.insert(name.clone()) {
                return Err(Error::Mismatch(format!("duplicate category {name:?}")));
            }
            let mut questions = Vec::with_capacity(pairs.len() * pairs.len().saturating_sub(1));
            for (i, (a, b)) in pairs.iter().enumerate() {
                for (j, (c, d)) in pairs.iter().enumerate() {
                    if i != j {
                        questions.push([a, b, c, d].map(|w| w.to_lowercase()));
                    }
                }
            }
            set.categories.push(Category { name, questions });
        }
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.categories.iter().map(|c| c.questions.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn category(&self, name: &str) -> Option<&Category> {
        self.categories.iter().find(|c| c.name == name)
    }
}

/// Questions resolved to matrix rows; `total` keeps the pre-filter count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestableCategory {
    pub name: String,
    pub questions: Vec<[usize; 4]>,
    pub total: usize,
}

/// Maps lowercased words to rows. When several rows lowercase to the same
/// form the lowest row (the most frequent word) wins.
pub fn lowercase_index(matrix: &EmbeddingMatrix) -> HashMap<String, usize> {
    let mut index = HashMap::with_capacity(matrix.len());
    for (i, w) in matrix.words().iter().enumerate() {
        if w != UNK {
            index.entry(w.to_lowercase()).or_insert(i);
        }
    }
    index
}

/// Keep only questions whose four words all resolve to non-UNK rows.
pub fn filter_testable(set: &AnalogySet, matrix: &EmbeddingMatrix) -> Vec<TestableCategory> {
    let index = lowercase_index(matrix);
    set.categories
        .iter()
        .map(|cat| TestableCategory {
            name: cat.name.clone(),
            total: cat.questions.len(),
            questions: cat
                .questions
                .iter()
                .filter_map(|q| {
                    let ids: Vec<usize> = q.iter().map_while(|w| index.get(w).copied()).collect();
                    <[usize; 4]>::try_from(ids).ok()
                })
                .collect(),
        })
        .collect()
}

/// `C + B - A` over unit-length rows. Zero rows contribute nothing.
pub fn predict_target(a: usize, b: usize, c: usize, matrix: &EmbeddingMatrix) -> Vec<f64> {
    let unit = |i: usize| {
        let n = matrix.norm(i);
        let scale = if n > 0.0 { 1.0 / n } else { 0.0 };
        matrix.row(i).iter().map(move |x| x * scale)
    };
    unit(c)
        .zip(unit(b))
        .zip(unit(a))
        .map(|((c, b), a)| c + b - a)
        .collect()
}

/// 1-based rank of `gold` among the top `k` neighbors of `query`, if present.
fn gold_rank(query: &[f64], matrix: &EmbeddingMatrix, k: usize, exclude: &[usize], gold: usize) -> Option<usize> {
    top_k(query, matrix, k, exclude)
        .iter()
        .position(|&(id, _)| id == gold)
        .map(|p| p + 1)
}

/// Rank of the gold answer for one question, searching the top `k`.
/// `exclude_query` removes A, B and C from the candidates.
pub fn question_rank(q: [usize; 4], matrix: &EmbeddingMatrix, k: usize, exclude_query: bool) -> Option<usize> {
    let [a, b, c, d] = q;
    let target = predict_target(a, b, c, matrix);
    let exclude: &[usize] = if exclude_query { &[a, b, c] } else { &[] };
    gold_rank(&target, matrix, k, exclude, d)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategoryScore {
    pub name: String,
    pub testable: usize,
    pub total: usize,
    /// Correct answers within the first `ks[j]` candidates.
    pub hits: Vec<usize>,
}

impl CategoryScore {
    /// P@ks[j], or `None` when nothing was testable.
    pub fn precision(&self, j: usize) -> Option<f64> {
        (self.testable > 0).then(|| self.hits[j] as f64 / self.testable as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub ks: Vec<usize>,
    pub categories: Vec<CategoryScore>,
    pub overall: CategoryScore,
}

fn fmt_precision(p: Option<f64>) -> String {
    p.map_or_else(|| "n/a".to_owned(), |p| format!("{p:.4}"))
}

impl EvalReport {
    fn rows(&self) -> impl Iterator<Item = &CategoryScore> {
        self.categories.iter().chain(std::iter::once(&self.overall))
    }

    /// `category<TAB>testable<TAB>total<TAB>p@k...` with a trailing overall row.
    pub fn render_tsv(&self) -> String {
        let mut out = String::from("category\ttestable\ttotal");
        for k in &self.ks {
            write!(out, "\tp@{k}").unwrap();
        }
        out.push('\n');
        for row in self.rows() {
            write!(out, "{}\t{}\t{}", row.name, row.testable, row.total).unwrap();
            for j in 0..self.ks.len() {
                write!(out, "\t{}", fmt_precision(row.precision(j))).unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn render_table(&self) -> String {
        let width = self.rows().map(|r| r.name.len()).max().unwrap_or(0).max("category".len());
        let mut out = format!("{:<width$}  {:>8}  {:>8}", "category", "testable", "total");
        for k in &self.ks {
            write!(out, "  {:>7}", format!("P@{k}")).unwrap();
        }
        out.push('\n');
        for row in self.rows() {
            write!(out, "{:<width$}  {:>8}  {:>8}", row.name, row.testable, row.total).unwrap();
            for j in 0..self.ks.len() {
                write!(out, "  {:>7}", fmt_precision(row.precision(j))).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Sorted, deduplicated, all >= 1.
pub fn normalize_ks(ks: &[usize]) -> Result<Vec<usize>> {
    let mut ks = ks.to_vec();
    ks.sort_unstable();
    ks.dedup();
    if ks.is_empty() || ks[0] == 0 {
        return Err(Error::config("ks", "need at least one k and every k >= 1"));
    }
    Ok(ks)
}

/// Score every testable question at each `k`, per category and overall.
pub fn evaluate(testable: &[TestableCategory], matrix: &EmbeddingMatrix, ks: &[usize]) -> Result<EvalReport> {
    evaluate_with(testable, matrix, ks, true)
}

pub fn evaluate_with(
    testable: &[TestableCategory],
    matrix: &EmbeddingMatrix,
    ks: &[usize],
    exclude_query: bool,
) -> Result<EvalReport> {
    let ks = normalize_ks(ks)?;
    let max_k = *ks.last().expect("non-empty");
    let categories: Vec<CategoryScore> = testable
        .iter()
        .map(|cat| {
            let ranks: Vec<Option<usize>> = cat
                .questions
                .par_iter()
                .map(|&q| question_rank(q, matrix, max_k, exclude_query))
                .collect();
            CategoryScore {
                name: cat.name.clone(),
                testable: cat.questions.len(),
                total: cat.total,
                hits: ks
                    .iter()
                    .map(|&k| ranks.iter().filter(|r| r.is_some_and(|r| r <= k)).count())
                    .collect(),
            }
        })
        .collect();
    let overall = CategoryScore {
        name: "overall".into(),
        testable: categories.iter().map(|c| c.testable).sum(),
        total: categories.iter().map(|c| c.total).sum(),
        hits: (0..ks.len()).map(|j| categories.iter().map(|c| c.hits[j]).sum()).collect(),
    };
    Ok(EvalReport {
        ks,
        categories,
        overall,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_one_question() {
        let set = AnalogySet::parse(": Family\nuncle aunt king queen\n".as_bytes()).unwrap();
        assert_eq!(set.categories.len(), 1);
        assert_eq!(set.categories[0].name, "Family");
        assert_eq!(set.categories[0].questions, vec![["uncle", "aunt", "king", "queen"].map(String::from)]);
    }

    #[test]
    fn parse_empty_and_errors() {
        assert!(AnalogySet::parse("".as_bytes()).unwrap().is_empty());
        let err = AnalogySet::parse(": c\na b c d\na b c\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        assert!(AnalogySet::parse("a b c d\n".as_bytes()).is_err());
        assert!(AnalogySet::parse(": c\n: c\n".as_bytes()).is_err());
    }

    #[test]
    fn parse_lowercases() {
        let set = AnalogySet::parse(": c\nAthens Greece Baghdad Iraq\n".as_bytes()).unwrap();
        assert_eq!(set.categories[0].questions[0][0], "athens");
    }

    #[test]
    fn base_pairs_compose() {
        let pairs = vec![("tokyo", "japan"), ("paris", "france"), ("rome", "italy")]
            .into_iter()
            .map(|(a, b)| (a.to_owned(), b.to_owned()))
            .collect();
        let set = AnalogySet::from_base_pairs(vec![("capitals".into(), pairs)]).unwrap();
        let qs = &set.categories[0].questions;
        assert_eq!(qs.len(), 6);
        assert_eq!(qs[0], ["tokyo", "japan", "paris", "france"].map(String::from));
        assert!(qs.iter().all(|q| q[0] != q[2]));
    }

    fn fixture() -> EmbeddingMatrix {
        // man, king, woman, queen, with queen = woman + king - man exactly
        // after normalization (all rows unit length).
        let s = std::f64::consts::FRAC_1_SQRT_2;
        EmbeddingMatrix::new(
            ["man", "king", "woman", "queen", "apple"].map(String::from).to_vec(),
            3,
            vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.5, -0.5, s, -0.5, 0.5, s, 0.0, 0.0, -1.0],
        )
        .unwrap()
    }

    #[test]
    fn constructed_fixture_ranks_gold_first() {
        let m = fixture();
        let target = predict_target(0, 1, 2, &m);
        let expect = m.row(3).to_vec();
        for (t, e) in target.iter().zip(expect) {
            assert!((t - e).abs() < 1e-12);
        }
        let set = AnalogySet::parse(": royal\nman king woman queen\n".as_bytes()).unwrap();
        let t = filter_testable(&set, &m);
        let r = evaluate(&t, &m, &[1, 5]).unwrap();
        assert_eq!(r.overall.precision(0), Some(1.0));
    }

    #[test]
    fn a_equals_b_predicts_c() {
        let m = fixture();
        let t = predict_target(1, 1, 3, &m);
        for (x, y) in t.iter().zip(m.row(3)) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn oov_questions_count_in_total_only() {
        let m = fixture();
        let set = AnalogySet::parse(": c\nman king woman queen\nman king woman prince\n".as_bytes()).unwrap();
        let t = filter_testable(&set, &m);
        assert_eq!(t[0].questions.len(), 1);
        assert_eq!(t[0].total, 2);
    }

    #[test]
    fn empty_report_renders_na() {
        let r = evaluate(&[], &fixture(), &[1, 5]).unwrap();
        let tsv = r.render_tsv();
        assert_eq!(tsv, "category\ttestable\ttotal\tp@1\tp@5\noverall\t0\t0\tn/a\tn/a\n");
        assert!(r.render_table().contains("n/a"));
    }
}
