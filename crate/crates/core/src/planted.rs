//! Synthetic ground truth for desk-scale recovery tests: a planted space of
//! unit vectors, a Zipf-weighted corpus over its words, and gold similarity
//! pairs scored by planted cosine.

use std::collections::HashSet;

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::corpus::{TokenizedCorpus, Vocabulary};
use crate::eval::{cosine_similarity, SimilarityDataset};
use crate::matrix::Matrix;

#[derive(Debug, Error)]
#[error("word {word:?} is not covered by the planted space")]
pub struct CoverageError {
    pub word: String,
}

/// Unit-norm ground-truth vectors over a synthetic vocabulary.
#[derive(Clone, Debug)]
pub struct PlantedSpace {
    words: Vec<String>,
    vectors: Matrix<f32>,
    seed: u64,
}

/// `w00000`, `w00001`, ...; rank order doubles as frequency order in
/// [`synthesize_corpus`].
pub fn synthetic_words(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("w{i:05}")).collect()
}

impl PlantedSpace {
    /// Isotropic Gaussian directions, normalized in f64.
    pub fn generate(words: Vec<String>, dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = Vec::with_capacity(words.len() * dim);
        let mut row = vec![0f64; dim];
        for _ in 0..words.len() {
            loop {
                for x in row.iter_mut() {
                    *x = rng.sample(StandardNormal);
                }
                let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 1e-6 {
                    data.extend(row.iter().map(|x| (x / norm) as f32));
                    break;
                }
            }
        }
        PlantedSpace {
            vectors: Matrix::from_vec(words.len(), dim, data),
            words,
            seed,
        }
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn vectors(&self) -> &Matrix<f32> {
        &self.vectors
    }

    pub fn dim(&self) -> usize {
        self.vectors.dim()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Rows reordered to vocabulary ids.
    pub fn aligned_to(&self, vocab: &Vocabulary) -> Result<Matrix<f32>, CoverageError> {
        let index: std::collections::HashMap<&str, usize> =
            self.words.iter().enumerate().map(|(i, w)| (w.as_str(), i)).collect();
        let dim = self.dim();
        let mut data = Vec::with_capacity(vocab.len() * dim);
        for w in vocab.words() {
            let &i = index.get(w).ok_or_else(|| CoverageError { word: w.to_string() })?;
            data.extend_from_slice(self.vectors.row(i));
        }
        Ok(Matrix::from_vec(vocab.len(), dim, data))
    }

    /// Gold dataset whose scores are planted cosines.
    pub fn similarity_dataset(&self, name: &str, pairs: &[(usize, usize)]) -> SimilarityDataset {
        let pairs = pairs
            .iter()
            .map(|&(a, b)| {
                let gold = cosine_similarity(self.vectors.row(a), self.vectors.row(b))
                    .expect("planted rows are unit norm");
                (self.words[a].clone(), self.words[b].clone(), gold)
            })
            .collect();
        SimilarityDataset::new(name, pairs).expect("at least one pair")
    }
}

/// `n` distinct unordered pairs of distinct indices below `n_words`.
pub fn random_pairs(n_words: usize, n: usize, seed: u64) -> Vec<(usize, usize)> {
    assert!(n_words >= 2 && n <= n_words * (n_words - 1) / 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let a = rng.random_range(0..n_words);
        let b = rng.random_range(0..n_words);
        if a == b || !seen.insert((a.min(b), a.max(b))) {
            continue;
        }
        out.push((a, b));
    }
    out
}

#[derive(Clone, Debug)]
pub struct SynthConfig {
    pub sentences: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Sentences per paragraph, inclusive range.
    pub paragraph_sentences: (usize, usize),
    /// Word `r` (0-based rank) is drawn with weight `1 / (r + 1)^zipf_exponent`.
    pub zipf_exponent: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            sentences: 200_000,
            min_len: 5,
            max_len: 20,
            paragraph_sentences: (3, 6),
            zipf_exponent: 1.0,
            seed: 0,
        }
    }
}

/// Sentences of i.i.d. frequency-weighted words, grouped into paragraphs.
pub fn synthesize_corpus(words: &[String], config: &SynthConfig) -> TokenizedCorpus {
    assert!(!words.is_empty() && config.min_len >= 1 && config.min_len <= config.max_len);
    let (pmin, pmax) = config.paragraph_sentences;
    assert!(pmin >= 1 && pmin <= pmax);

    let weights: Vec<f64> = (0..words.len())
        .map(|r| (r as f64 + 1.0).powf(-config.zipf_exponent))
        .collect();
    let dist = WeightedIndex::new(&weights).expect("positive weights");
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut corpus = TokenizedCorpus::default();
    let mut remaining = config.sentences;
    while remaining > 0 {
        let n = rng.random_range(pmin..=pmax).min(remaining);
        let paragraph = (0..n)
            .map(|_| {
                let len = rng.random_range(config.min_len..=config.max_len);
                (0..len).map(|_| words[dist.sample(&mut rng)].clone()).collect()
            })
            .collect();
        corpus.paragraphs.push(paragraph);
        remaining -= n;
    }
    corpus
}
