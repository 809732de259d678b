//! Word-similarity evaluation: cosine similarity of embeddings against human
//! ratings, scored by Spearman's rho over the pairs both words of which are
//! covered.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::io::{self, BufRead};

use num_traits::Float;
use thiserror::Error;

use crate::embeddings::Embeddings;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("cosine similarity undefined for a zero-norm vector")]
    UndefinedSimilarity,
    #[error("spearman correlation undefined: {0}")]
    UndefinedCorrelation(&'static str),
    #[error("dataset {dataset}: only {scored} of {total} pairs scorable (coverage {coverage:.4})")]
    InsufficientCoverage {
        dataset: String,
        scored: usize,
        total: usize,
        coverage: f64,
    },
    #[error("word {0:?} is not in the embedding vocabulary")]
    UnknownWord(String),
    #[error("dataset {name}: line {line}: {message}")]
    Parse { name: String, line: usize, message: String },
    #[error("dataset {0} has no pairs")]
    EmptyDataset(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// `u.v / (|u| |v|)`, accumulated in f64 and clamped to `[-1, 1]`.
pub fn cosine_similarity<T: Float>(u: &[T], v: &[T]) -> Result<f64, EvalError> {
    assert_eq!(u.len(), v.len(), "cosine of vectors with different dims");
    let (mut uv, mut uu, mut vv) = (0f64, 0f64, 0f64);
    for (&a, &b) in u.iter().zip(v) {
        let (a, b) = (a.to_f64().unwrap_or(f64::NAN), b.to_f64().unwrap_or(f64::NAN));
        uv += a * b;
        uu += a * a;
        vv += b * b;
    }
    if uu == 0.0 || vv == 0.0 {
        return Err(EvalError::UndefinedSimilarity);
    }
    Ok((uv / (uu.sqrt() * vv.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks, ties sharing the mean of the positions they span.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).unwrap_or(Ordering::Equal));
    let mut ranks = vec![0f64; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && x[order[j]] == x[order[i]] {
            j += 1;
        }
        // positions i..j hold equal values; ranks i+1..=j
        let r = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64, EvalError> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0f64, 0f64, 0f64);
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(EvalError::UndefinedCorrelation("constant input"));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Pearson correlation of average-tie ranks.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<f64, EvalError> {
    if x.len() != y.len() {
        return Err(EvalError::UndefinedCorrelation("length mismatch"));
    }
    if x.len() < 2 {
        return Err(EvalError::UndefinedCorrelation("fewer than two observations"));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(EvalError::UndefinedCorrelation("non-finite input"));
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityDataset {
    pub name: String,
    pub pairs: Vec<(String, String, f64)>,
}

impl SimilarityDataset {
    pub fn new(name: impl Into<String>, pairs: Vec<(String, String, f64)>) -> Result<Self, EvalError> {
        let name = name.into();
        if pairs.is_empty() {
            return Err(EvalError::EmptyDataset(name));
        }
        if pairs.iter().any(|p| !p.2.is_finite()) {
            return Err(EvalError::Parse {
                name,
                line: 0,
                message: "non-finite gold score".into(),
            });
        }
        Ok(SimilarityDataset { name, pairs })
    }

    /// `word_a word_b score` per line, tab or space separated. `#` lines and
    /// blank lines are skipped, extra columns ignored, words lowercased.
    pub fn parse<R: BufRead>(name: impl Into<String>, reader: R) -> Result<Self, EvalError> {
        let name = name.into();
        let mut pairs = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let err = |message: &str| EvalError::Parse {
                name: name.clone(),
                line: n + 1,
                message: message.to_string(),
            };
            let mut fields = trimmed.split_whitespace();
            let (Some(a), Some(b), Some(score)) = (fields.next(), fields.next(), fields.next()) else {
                return Err(err("expected word_a word_b score"));
            };
            let score: f64 = score.parse().map_err(|_| err("score is not a number"))?;
            if !score.is_finite() {
                return Err(err("score is not finite"));
            }
            pairs.push((a.to_lowercase(), b.to_lowercase(), score));
        }
        Self::new(name, pairs)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub dataset: String,
    pub spearman_rho: f64,
    pub pairs_total: usize,
    pub pairs_scored: usize,
    /// Pairs with both words present but a zero-norm vector.
    pub pairs_undefined: usize,
    pub coverage: f64,
}

impl EvalReport {
    /// `dataset<TAB>rho<TAB>scored<TAB>total<TAB>coverage`
    pub fn tsv_line(&self) -> String {
        format!(
            "{}\t{:.6}\t{}\t{}\t{:.4}",
            self.dataset, self.spearman_rho, self.pairs_scored, self.pairs_total, self.coverage
        )
    }
}

/// Cosines of every covered pair, with gold scores, in dataset order.
pub fn score_pairs(embeddings: &Embeddings, dataset: &SimilarityDataset) -> (Vec<f64>, Vec<f64>, usize) {
    let mut predicted = Vec::new();
    let mut gold = Vec::new();
    let mut undefined = 0;
    for (a, b, g) in &dataset.pairs {
        let (Some(u), Some(v)) = (embeddings.get(a), embeddings.get(b)) else {
            continue;
        };
        match cosine_similarity(u, v) {
            Ok(c) => {
                predicted.push(c);
                gold.push(*g);
            }
            Err(_) => undefined += 1,
        }
    }
    (predicted, gold, undefined)
}

pub fn evaluate_dataset(embeddings: &Embeddings, dataset: &SimilarityDataset) -> Result<EvalReport, EvalError> {
    let (predicted, gold, undefined) = score_pairs(embeddings, dataset);
    let total = dataset.pairs.len();
    let scored = predicted.len();
    let coverage = scored as f64 / total as f64;
    if scored < 2 {
        return Err(EvalError::InsufficientCoverage {
            dataset: dataset.name.clone(),
            scored,
            total,
            coverage,
        });
    }
    Ok(EvalReport {
        dataset: dataset.name.clone(),
        spearman_rho: spearman_rho(&predicted, &gold)?,
        pairs_total: total,
        pairs_scored: scored,
        pairs_undefined: undefined,
        coverage,
    })
}

/// Per-dataset lines followed by an `average` row: unweighted mean rho,
/// summed pair counts, pooled coverage.
pub fn report_tsv(reports: &[EvalReport]) -> String {
    let mut out = String::new();
    for r in reports {
        let _ = writeln!(out, "{}", r.tsv_line());
    }
    if reports.len() > 1 {
        let n = reports.len() as f64;
        let scored: usize = reports.iter().map(|r| r.pairs_scored).sum();
        let total: usize = reports.iter().map(|r| r.pairs_total).sum();
        let avg = EvalReport {
            dataset: "average".into(),
            spearman_rho: reports.iter().map(|r| r.spearman_rho).sum::<f64>() / n,
            pairs_total: total,
            pairs_scored: scored,
            pairs_undefined: reports.iter().map(|r| r.pairs_undefined).sum(),
            coverage: scored as f64 / total as f64,
        };
        let _ = writeln!(out, "{}", avg.tsv_line());
    }
    out
}

/// The `k` most cosine-similar words to `query`, excluding the query.
/// Ties are ordered by ascending word; zero-norm rows are skipped.
pub fn nearest_neighbors(embeddings: &Embeddings, query: &str, k: usize) -> Result<Vec<(String, f64)>, EvalError> {
    let qi = embeddings
        .index_of(query)
        .ok_or_else(|| EvalError::UnknownWord(query.to_string()))?;
    let q = embeddings.matrix().row(qi);
    if q.iter().all(|&x| x == 0.0) {
        return Err(EvalError::UndefinedSimilarity);
    }
    let mut scored: Vec<(usize, f64)> = embeddings
        .matrix()
        .iter_rows()
        .enumerate()
        .filter(|&(i, _)| i != qi)
        .filter_map(|(i, row)| cosine_similarity(q, row).ok().map(|c| (i, c)))
        .collect();
    let words = embeddings.words();
    let cmp = |a: &(usize, f64), b: &(usize, f64)| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(Ordering::Equal)
            .then_with(|| words[a.0].cmp(&words[b.0]))
    };
    if k < scored.len() {
        scored.select_nth_unstable_by(k, cmp);
        scored.truncate(k);
    }
    scored.sort_by(cmp);
    Ok(scored.into_iter().map(|(i, c)| (words[i].clone(), c)).collect())
}
