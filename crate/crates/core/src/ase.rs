//! Aggregated static embeddings: the average of a word's teacher vectors over
//! all of its occurrences.

use std::io::{self, Write};

use thiserror::Error;

use crate::corpus::{Vocabulary, OOV};
use crate::embeddings::{Embeddings, EmbeddingsError};
use crate::matrix::Matrix;
use crate::stream::{RecordSource, SentenceRecord, StreamError};

#[derive(Debug, Error)]
pub enum AseError {
    #[error("record has {scalars} scalars for {tokens} tokens at dim {dim}")]
    DimMismatch { scalars: usize, tokens: usize, dim: usize },
    #[error("accumulators differ in shape")]
    ShapeMismatch,
    #[error("token id {0} outside the vocabulary")]
    IdOutOfRange(u32),
    #[error("no vocabulary word occurs in the stream")]
    NothingSeen,
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error(transparent)]
    Embeddings(#[from] EmbeddingsError),
}

/// Per-word running sums in f64. Shards merge by addition.
#[derive(Clone, Debug, PartialEq)]
pub struct AseAccumulator {
    dim: usize,
    sums: Vec<f64>,
    counts: Vec<u64>,
    cap: Option<u64>,
}

impl AseAccumulator {
    /// `cap` limits how many occurrences of each word are pooled; later ones
    /// are ignored.
    pub fn new(vocab_len: usize, dim: usize, cap: Option<u64>) -> Self {
        AseAccumulator {
            dim,
            sums: vec![0.0; vocab_len * dim],
            counts: vec![0; vocab_len],
            cap,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn accumulate(&mut self, record: &SentenceRecord) -> Result<(), AseError> {
        let dim = self.dim;
        if record.vectors.len() != record.token_ids.len() * dim {
            return Err(AseError::DimMismatch {
                scalars: record.vectors.len(),
                tokens: record.token_ids.len(),
                dim,
            });
        }
        for (&id, v) in record.token_ids.iter().zip(record.vectors.chunks_exact(dim)) {
            if id == OOV {
                continue;
            }
            let i = id as usize;
            if i >= self.counts.len() {
                return Err(AseError::IdOutOfRange(id));
            }
            if self.cap.is_some_and(|c| self.counts[i] >= c) {
                continue;
            }
            self.counts[i] += 1;
            for (s, &x) in self.sums[i * dim..(i + 1) * dim].iter_mut().zip(v) {
                *s += x as f64;
            }
        }
        Ok(())
    }

    /// Adds another shard's sums and counts. With a cap set, the merged count
    /// may exceed the cap if both shards pooled the same word.
    pub fn merge(&mut self, other: &AseAccumulator) -> Result<(), AseError> {
        if self.dim != other.dim || self.counts.len() != other.counts.len() {
            return Err(AseError::ShapeMismatch);
        }
        for (a, b) in self.sums.iter_mut().zip(&other.sums) {
            *a += b;
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    /// Means of every word seen at least once. Does not consume or modify
    /// the accumulator.
    pub fn finalize(&self) -> Result<AseResult, AseError> {
        let dim = self.dim;
        let ids: Vec<u32> = (0..self.counts.len() as u32).filter(|&i| self.counts[i as usize] > 0).collect();
        if ids.is_empty() {
            return Err(AseError::NothingSeen);
        }
        let mut data = Vec::with_capacity(ids.len() * dim);
        for &id in &ids {
            let i = id as usize;
            let n = self.counts[i] as f64;
            data.extend(self.sums[i * dim..(i + 1) * dim].iter().map(|s| s / n));
        }
        Ok(AseResult {
            means: Matrix::from_vec(ids.len(), dim, data),
            ids,
            counts: self.counts.clone(),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AseResult {
    /// Vocabulary ids of the rows of `means`, ascending.
    pub ids: Vec<u32>,
    pub means: Matrix<f64>,
    /// Pooled occurrences per vocabulary id, zero for unseen words.
    pub counts: Vec<u64>,
}

impl AseResult {
    pub fn seen(&self) -> usize {
        self.ids.len()
    }

    pub fn unseen(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.counts.len() as u32).filter(|&i| self.counts[i as usize] == 0)
    }

    pub fn to_embeddings(&self, vocab: &Vocabulary) -> Result<Embeddings, AseError> {
        let words = self
            .ids
            .iter()
            .map(|&id| vocab.word(id).map(String::from).ok_or(AseError::IdOutOfRange(id)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Embeddings::new(words, self.means.to_f32())?)
    }

    /// `word<TAB>occurrences` for every vocabulary word, in id order.
    pub fn write_coverage<W: Write>(&self, vocab: &Vocabulary, mut w: W) -> io::Result<()> {
        for (word, count) in vocab.words().zip(&self.counts) {
            writeln!(w, "{word}\t{count}")?;
        }
        w.flush()
    }
}

/// Pools every record of `source`.
pub fn ase_from_source(source: &dyn RecordSource, vocab_len: usize, cap: Option<u64>) -> Result<AseResult, AseError> {
    let mut acc = AseAccumulator::new(vocab_len, source.header().dim as usize, cap);
    for record in source.records()? {
        acc.accumulate(&record?)?;
    }
    acc.finalize()
}
