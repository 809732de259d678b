//! Corpus-size study: distilled embeddings and ASE trained on growing
//! prefixes of one record stream, evaluated on the same datasets.
//!
//! Prefixes are record-aligned and nested, so a larger fraction always sees
//! every record of a smaller one.

use std::fmt::Write as _;

use thiserror::Error;

use crate::ase::{ase_from_source, AseError};
use crate::corpus::Vocabulary;
use crate::embeddings::Embeddings;
use crate::eval::{evaluate_dataset, EvalError, SimilarityDataset};
use crate::stream::{count_records, PrefixSource, RecordSource, StreamError};
use crate::train::{distill, Mode, TrainError, TrainerConfig, TrainingInput};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("fractions must be ascending values in (0, 1], got {0:?}")]
    InvalidFractions(Vec<f64>),
    #[error("fraction {fraction} of {total} records selects no record")]
    EmptyPrefix { fraction: f64, total: usize },
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Ase(#[from] AseError),
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Distilled,
    Ase,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Distilled => "distilled",
            Method::Ase => "ase",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub method: Method,
    pub fraction: f64,
    pub records: usize,
    pub dataset: String,
    /// NaN when fewer than two pairs were scorable.
    pub rho: f64,
    pub pairs_scored: usize,
    pub pairs_total: usize,
    /// Words with a trained row (distilled) or at least one pooled
    /// occurrence (ASE).
    pub words_covered: usize,
}

#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub fractions: Vec<f64>,
    pub trainer: TrainerConfig,
    pub ase_cap: Option<u64>,
}

/// Number of records in the prefix for `fraction`.
pub fn prefix_len(fraction: f64, total: usize) -> usize {
    (fraction * total as f64 + 1e-9).floor() as usize
}

fn check_fractions(fractions: &[f64]) -> Result<(), SweepError> {
    let valid = !fractions.is_empty()
        && fractions.iter().all(|&f| f > 0.0 && f <= 1.0)
        && fractions.windows(2).all(|w| w[0] < w[1]);
    if valid {
        Ok(())
    } else {
        Err(SweepError::InvalidFractions(fractions.to_vec()))
    }
}

/// One row per (fraction, method, dataset).
pub fn sweep(
    source: &dyn RecordSource,
    vocab: &Vocabulary,
    datasets: &[SimilarityDataset],
    config: &SweepConfig,
) -> Result<Vec<SweepRow>, SweepError> {
    check_fractions(&config.fractions)?;
    let total = count_records(source)?;
    let prefixes: Vec<usize> = config.fractions.iter().map(|&f| prefix_len(f, total)).collect();
    if let Some(i) = prefixes.iter().position(|&n| n == 0) {
        return Err(SweepError::EmptyPrefix {
            fraction: config.fractions[i],
            total,
        });
    }

    let trainer = TrainerConfig {
        mode: Mode::Teacher,
        ..config.trainer.clone()
    };
    let mut rows = Vec::new();
    for (&fraction, &n) in config.fractions.iter().zip(&prefixes) {
        let prefix = PrefixSource::new(source, n);

        let trained = distill(TrainingInput::Teacher(&prefix), vocab, &trainer)?;
        let trained_words = trained.target_steps.iter().filter(|&&s| s > 0).count();
        let distilled = Embeddings::from_vocabulary(vocab, trained.target).expect("vocabulary-shaped matrix");
        push_rows(&mut rows, Method::Distilled, fraction, n, &distilled, trained_words, datasets)?;

        let ase = ase_from_source(&prefix, vocab.len(), config.ase_cap)?;
        let ase_embeddings = ase.to_embeddings(vocab)?;
        push_rows(&mut rows, Method::Ase, fraction, n, &ase_embeddings, ase.seen(), datasets)?;
    }
    Ok(rows)
}

fn push_rows(
    rows: &mut Vec<SweepRow>,
    method: Method,
    fraction: f64,
    records: usize,
    embeddings: &Embeddings,
    words_covered: usize,
    datasets: &[SimilarityDataset],
) -> Result<(), SweepError> {
    for ds in datasets {
        let (rho, scored) = match evaluate_dataset(embeddings, ds) {
            Ok(r) => (r.spearman_rho, r.pairs_scored),
            Err(EvalError::InsufficientCoverage { scored, .. }) => (f64::NAN, scored),
            Err(e) => return Err(e.into()),
        };
        rows.push(SweepRow {
            method,
            fraction,
            records,
            dataset: ds.name.clone(),
            rho,
            pairs_scored: scored,
            pairs_total: ds.pairs.len(),
            words_covered,
        });
    }
    Ok(())
}

/// Header plus one tab-separated line per row.
pub fn rows_tsv(rows: &[SweepRow]) -> String {
    let mut out = String::from("method\tfraction\trecords\tdataset\trho\tscored\ttotal\twords\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{:.6}\t{}\t{}\t{}",
            r.method.name(),
            r.fraction,
            r.records,
            r.dataset,
            r.rho,
            r.pairs_scored,
            r.pairs_total,
            r.words_covered
        );
    }
    out
}
