//! Learning the static target matrix.
//!
//! For every sentence the context vector is the mean of the teacher's token
//! vectors (teacher mode) or the mean of trainable context rows of the other
//! words (static baseline). Each in-vocabulary target that survives
//! subsampling contributes the negative-sampling logistic loss of its target
//! row against that context. Gradients are summed over `batch_size` examples
//! and applied with lazy Adam. In teacher mode the teacher vectors are
//! constants and only the target matrix is trained.

mod adam;
mod hogwild;
mod loss;
mod sampling;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adam::{adam_row_update, lazy_adam_step, AdamConfig, AdamState, SparseGrad};
pub use loss::{logistic_loss, logistic_loss_derivative, pair_loss, pair_loss_grad, sigmoid, PairGradient};
pub use sampling::{keep_probability, keep_target, sample_negatives, NegativeTable, NEGATIVE_POWER};

use crate::corpus::{EncodedCorpus, Vocabulary, OOV};
use crate::matrix::Matrix;
use crate::stream::{context_vector, static_context_vector, RecordSource, SentenceRecord, StreamError};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("stream dim {stream} does not match configured dim {config}")]
    DimMismatch { stream: usize, config: usize },
    #[error("no training examples survived (skipped {skipped})")]
    EmptyTrainingSet { skipped: u64 },
    #[error("non-finite gradient for row {row} in batch {batch}")]
    NonFiniteGradient { row: u32, batch: u64 },
    #[error("record {record}: token id {id} outside vocabulary of {vocab}")]
    IdOutOfRange { record: u64, id: u32, vocab: usize },
    #[error("negative sampling: {0}")]
    Sampling(String),
    #[error("mode {0:?} does not match the training input")]
    ModeMismatch(Mode),
    #[error(transparent)]
    Stream(#[from] StreamError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Context from frozen teacher vectors.
    Teacher,
    /// Context from trainable static rows, target excluded.
    StaticBaseline,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    pub epochs: u32,
    pub negatives: usize,
    pub subsample_t: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub mode: Mode,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// Embedding width. Required for the static baseline; in teacher mode it
    /// must match the stream if set.
    pub dim: Option<usize>,
    /// More than one thread selects the unsynchronized, nondeterministic
    /// teacher-mode path.
    pub threads: usize,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            epochs: 1,
            negatives: 10,
            subsample_t: 5e-6,
            learning_rate: 0.001,
            batch_size: 128,
            seed: 0,
            mode: Mode::Teacher,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            dim: None,
            threads: 1,
        }
    }
}

impl TrainerConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if self.epochs == 0 {
            return bad("epochs must be >= 1");
        }
        if self.negatives == 0 {
            return bad("negatives must be >= 1");
        }
        if !(self.subsample_t > 0.0 && self.subsample_t.is_finite()) {
            return bad("subsample_t must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        if !(self.adam_beta1 > 0.0 && self.adam_beta1 < 1.0 && self.adam_beta2 > 0.0 && self.adam_beta2 < 1.0) {
            return bad("adam betas must lie in (0, 1)");
        }
        if !(self.adam_eps > 0.0 && self.adam_eps.is_finite()) {
            return bad("adam_eps must be positive");
        }
        if self.dim == Some(0) {
            return bad("dim must be >= 1");
        }
        if self.threads == 0 {
            return bad("threads must be >= 1");
        }
        Ok(())
    }
}

/// Seeds for initialization and sampling, all derived from the config seed.
pub fn target_init_seed(seed: u64) -> u64 {
    seed ^ 0x7A26_E7F0_0000_0001
}

pub fn context_init_seed(seed: u64) -> u64 {
    seed ^ 0x7A26_E7F0_0000_0002
}

fn sampler_seed(seed: u64, worker: usize) -> u64 {
    seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(worker as u64 + 1))
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainStats {
    /// Mean per-example loss of each epoch.
    pub epoch_losses: Vec<f64>,
    /// Mean per-example loss of the first batch, before any update.
    pub initial_loss: Option<f64>,
    pub examples: u64,
    /// Targets dropped by subsampling.
    pub subsampled: u64,
    /// OOV targets.
    pub oov_targets: u64,
    /// Empty records and targets without usable static context.
    pub skipped: u64,
    pub batches: u64,
}

#[derive(Clone, Debug)]
pub struct TrainOutput {
    pub target: Matrix<f32>,
    /// Context rows, static baseline only.
    pub context: Option<Matrix<f32>>,
    /// Lazy Adam step count per target row.
    pub target_steps: Vec<u32>,
    pub stats: TrainStats,
}

pub enum TrainingInput<'a> {
    Teacher(&'a dyn RecordSource),
    Corpus(&'a EncodedCorpus),
}

/// Trains according to `config.mode`, which must match `input`.
pub fn distill(input: TrainingInput<'_>, vocab: &Vocabulary, config: &TrainerConfig) -> Result<TrainOutput, TrainError> {
    match (input, config.mode) {
        (TrainingInput::Teacher(source), Mode::Teacher) => train_teacher(source, vocab, config),
        (TrainingInput::Corpus(corpus), Mode::StaticBaseline) => train_static(corpus, vocab, config),
        (_, mode) => Err(TrainError::ModeMismatch(mode)),
    }
}

/// Per-worker sampling state and batch accumulator.
struct Learner<'a> {
    config: &'a TrainerConfig,
    table: &'a NegativeTable,
    frequencies: &'a [f64],
    rng: ChaCha8Rng,
    dim: usize,
    grads: SparseGrad,
    negatives: Vec<u32>,
    target_row: Vec<f32>,
    negative_rows: Vec<f32>,
    pair: PairGradient<f32>,
    batch_examples: usize,
    batch_loss: f64,
    epoch_loss: f64,
    epoch_examples: u64,
    stats: TrainStats,
}

/// Read access to parameter rows, shared by the exclusive and the
/// unsynchronized paths.
trait RowSource {
    fn read_row(&self, id: u32, out: &mut [f32]);
}

impl RowSource for Matrix<f32> {
    #[inline]
    fn read_row(&self, id: u32, out: &mut [f32]) {
        out.copy_from_slice(self.row(id as usize));
    }
}

impl<'a> Learner<'a> {
    fn new(
        config: &'a TrainerConfig,
        table: &'a NegativeTable,
        frequencies: &'a [f64],
        vocab_len: usize,
        dim: usize,
        worker: usize,
    ) -> Self {
        Learner {
            config,
            table,
            frequencies,
            rng: ChaCha8Rng::seed_from_u64(sampler_seed(config.seed, worker)),
            dim,
            grads: SparseGrad::new(vocab_len, dim),
            negatives: Vec::with_capacity(config.negatives),
            target_row: vec![0.0; dim],
            negative_rows: vec![0.0; dim * config.negatives],
            pair: PairGradient::default(),
            batch_examples: 0,
            batch_loss: 0.0,
            epoch_loss: 0.0,
            epoch_examples: 0,
            stats: TrainStats::default(),
        }
    }

    /// Subsampling decision for a target id; counts OOV and dropped targets.
    fn accept_target(&mut self, id: u32) -> bool {
        if id == OOV {
            self.stats.oov_targets += 1;
            return false;
        }
        if keep_target(self.frequencies[id as usize], self.config.subsample_t, &mut self.rng) {
            true
        } else {
            self.stats.subsampled += 1;
            false
        }
    }

    /// Accumulates the gradient of one (target, context) example and returns
    /// the gradient with respect to the context, scaled into `ctx_grad` when
    /// requested.
    fn example<P: RowSource>(
        &mut self,
        params: &P,
        target: u32,
        context: &[f32],
        ctx_grad: Option<&mut [f64]>,
    ) -> Result<(), TrainError> {
        let dim = self.dim;
        self.negatives.clear();
        self.table
            .sample_into(self.config.negatives, target, &mut self.rng, &mut self.negatives)?;

        params.read_row(target, &mut self.target_row);
        for (j, &n) in self.negatives.iter().enumerate() {
            params.read_row(n, &mut self.negative_rows[j * dim..(j + 1) * dim]);
        }
        let rows: Vec<&[f32]> = self.negative_rows.chunks_exact(dim).take(self.negatives.len()).collect();
        pair_loss_grad(&self.target_row, context, &rows, &mut self.pair);

        if let Some(g) = ctx_grad {
            let ct = self.pair.target_coeff as f64;
            for (gi, &u) in g.iter_mut().zip(&self.target_row) {
                *gi = ct * u as f64;
            }
            for (row, &c) in rows.iter().zip(&self.pair.negative_coeffs) {
                let c = c as f64;
                for (gi, &u) in g.iter_mut().zip(row.iter()) {
                    *gi += c * u as f64;
                }
            }
        }

        self.grads.add_scaled(target, self.pair.target_coeff as f64, context);
        for (&n, &c) in self.negatives.iter().zip(&self.pair.negative_coeffs) {
            self.grads.add_scaled(n, c as f64, context);
        }

        let loss = self.pair.loss as f64;
        self.batch_loss += loss;
        self.epoch_loss += loss;
        self.batch_examples += 1;
        self.epoch_examples += 1;
        self.stats.examples += 1;
        Ok(())
    }

    fn batch_full(&self) -> bool {
        self.batch_examples >= self.config.batch_size
    }

    /// Bookkeeping after a batch has been applied.
    fn finish_batch(&mut self) {
        if self.stats.initial_loss.is_none() && self.batch_examples > 0 {
            self.stats.initial_loss = Some(self.batch_loss / self.batch_examples as f64);
        }
        self.stats.batches += 1;
        self.batch_examples = 0;
        self.batch_loss = 0.0;
        self.grads.clear();
    }

    fn finish_epoch(&mut self) {
        let mean = if self.epoch_examples > 0 {
            self.epoch_loss / self.epoch_examples as f64
        } else {
            f64::NAN
        };
        self.stats.epoch_losses.push(mean);
        self.epoch_loss = 0.0;
        self.epoch_examples = 0;
    }
}

fn check_record(record: &SentenceRecord, index: u64, vocab_len: usize, dim: usize) -> Result<(), TrainError> {
    if record.vectors.len() != record.token_ids.len() * dim {
        return Err(StreamError::Format {
            record: index,
            message: format!("{} scalars for {} tokens at dim {dim}", record.vectors.len(), record.token_ids.len()),
        }
        .into());
    }
    match record.token_ids.iter().find(|&&id| id != OOV && id as usize >= vocab_len) {
        Some(&id) => Err(TrainError::IdOutOfRange {
            record: index,
            id,
            vocab: vocab_len,
        }),
        None => Ok(()),
    }
}

/// Fails up front when no negative distinct from a target can exist.
fn negative_table(vocab: &Vocabulary) -> Result<NegativeTable, TrainError> {
    let table = NegativeTable::from_vocabulary(vocab)?;
    if table.len() < 2 {
        return Err(TrainError::Sampling("vocabulary needs at least two words".into()));
    }
    Ok(table)
}

fn frequencies(vocab: &Vocabulary) -> Vec<f64> {
    (0..vocab.len() as u32).map(|id| vocab.frequency(id)).collect()
}

fn train_teacher(source: &dyn RecordSource, vocab: &Vocabulary, config: &TrainerConfig) -> Result<TrainOutput, TrainError> {
    config.validate()?;
    let dim = source.header().dim as usize;
    if let Some(d) = config.dim {
        if d != dim {
            return Err(TrainError::DimMismatch { stream: dim, config: d });
        }
    }
    if config.threads > 1 {
        return hogwild::train_teacher_parallel(source, vocab, config, dim);
    }

    let v = vocab.len();
    let table = negative_table(vocab)?;
    let freqs = frequencies(vocab);
    let adam = config.adam();
    let mut target = Matrix::uniform_init(v, dim, target_init_seed(config.seed));
    let mut state = AdamState::new(v, dim);
    let mut learner = Learner::new(config, &table, &freqs, v, dim, 0);

    for _ in 0..config.epochs {
        for (index, record) in source.records()?.enumerate() {
            let record = record?;
            check_record(&record, index as u64, v, dim)?;
            if record.is_empty() {
                learner.stats.skipped += 1;
                continue;
            }
            let context = context_vector(&record, dim);
            for &id in &record.token_ids {
                if !learner.accept_target(id) {
                    continue;
                }
                learner.example(&target, id, &context, None)?;
                if learner.batch_full() {
                    lazy_adam_step(&mut target, &mut state, &learner.grads, &adam, learner.stats.batches)?;
                    learner.finish_batch();
                }
            }
        }
        if learner.batch_examples > 0 {
            lazy_adam_step(&mut target, &mut state, &learner.grads, &adam, learner.stats.batches)?;
            learner.finish_batch();
        }
        learner.finish_epoch();
        if learner.stats.examples == 0 {
            return Err(TrainError::EmptyTrainingSet {
                skipped: learner.stats.skipped + learner.stats.subsampled + learner.stats.oov_targets,
            });
        }
    }

    Ok(TrainOutput {
        target,
        context: None,
        target_steps: state.steps,
        stats: learner.stats,
    })
}

fn train_static(corpus: &EncodedCorpus, vocab: &Vocabulary, config: &TrainerConfig) -> Result<TrainOutput, TrainError> {
    config.validate()?;
    let dim = config
        .dim
        .ok_or_else(|| TrainError::InvalidConfig("static baseline requires dim".into()))?;
    if config.threads > 1 {
        return Err(TrainError::InvalidConfig(
            "the static baseline trains single-threaded only".into(),
        ));
    }
    let v = vocab.len();
    let table = negative_table(vocab)?;
    let freqs = frequencies(vocab);
    let adam = config.adam();

    let mut target = Matrix::uniform_init(v, dim, target_init_seed(config.seed));
    let mut context_rows = Matrix::uniform_init(v, dim, context_init_seed(config.seed));
    let mut target_state = AdamState::new(v, dim);
    let mut context_state = AdamState::new(v, dim);
    let mut context_grads = SparseGrad::new(v, dim);
    let mut learner = Learner::new(config, &table, &freqs, v, dim, 0);
    let mut ctx_grad = vec![0f64; dim];

    for _ in 0..config.epochs {
        for (index, sentence) in corpus.sentences().enumerate() {
            if let Some(&id) = sentence.iter().find(|&&id| id != OOV && id as usize >= v) {
                return Err(TrainError::IdOutOfRange {
                    record: index as u64,
                    id,
                    vocab: v,
                });
            }
            for (pos, &id) in sentence.iter().enumerate() {
                if !learner.accept_target(id) {
                    continue;
                }
                let Ok(context) = static_context_vector(sentence, pos, &context_rows) else {
                    learner.stats.skipped += 1;
                    continue;
                };
                learner.example(&target, id, &context, Some(&mut ctx_grad))?;

                let n = sentence.iter().enumerate().filter(|&(i, &w)| i != pos && w != OOV).count() as f64;
                for (i, &w) in sentence.iter().enumerate() {
                    if i == pos || w == OOV {
                        continue;
                    }
                    for (g, &d) in context_grads.row_mut(w).iter_mut().zip(&ctx_grad) {
                        *g += d / n;
                    }
                }

                if learner.batch_full() {
                    let batch = learner.stats.batches;
                    lazy_adam_step(&mut target, &mut target_state, &learner.grads, &adam, batch)?;
                    lazy_adam_step(&mut context_rows, &mut context_state, &context_grads, &adam, batch)?;
                    context_grads.clear();
                    learner.finish_batch();
                }
            }
        }
        if learner.batch_examples > 0 {
            let batch = learner.stats.batches;
            lazy_adam_step(&mut target, &mut target_state, &learner.grads, &adam, batch)?;
            lazy_adam_step(&mut context_rows, &mut context_state, &context_grads, &adam, batch)?;
            context_grads.clear();
            learner.finish_batch();
        }
        learner.finish_epoch();
        if learner.stats.examples == 0 {
            return Err(TrainError::EmptyTrainingSet {
                skipped: learner.stats.skipped + learner.stats.subsampled + learner.stats.oov_targets,
            });
        }
    }

    Ok(TrainOutput {
        target,
        context: Some(context_rows),
        target_steps: target_state.steps,
        stats: learner.stats,
    })
}

/// Mean pair loss of every target in `source` against fixed parameters,
/// with the same subsampling and negative draws a training run would make.
pub fn evaluate_loss(
    source: &dyn RecordSource,
    vocab: &Vocabulary,
    target: &Matrix<f32>,
    config: &TrainerConfig,
) -> Result<f64, TrainError> {
    let dim = source.header().dim as usize;
    let table = negative_table(vocab)?;
    let freqs = frequencies(vocab);
    let mut learner = Learner::new(config, &table, &freqs, vocab.len(), dim, 0);
    for (index, record) in source.records()?.enumerate() {
        let record = record?;
        check_record(&record, index as u64, vocab.len(), dim)?;
        if record.is_empty() {
            continue;
        }
        let context = context_vector(&record, dim);
        for &id in &record.token_ids {
            if learner.accept_target(id) {
                learner.example(target, id, &context, None)?;
                learner.grads.clear();
            }
        }
    }
    if learner.epoch_examples == 0 {
        return Err(TrainError::EmptyTrainingSet { skipped: 0 });
    }
    Ok(learner.epoch_loss / learner.epoch_examples as f64)
}
