//! Unsynchronized multi-worker teacher-mode training.
//!
//! Workers own disjoint, interleaved shards of the record stream and update
//! shared rows without locks. Values are stored as f32 bit patterns in
//! relaxed atomics: concurrent updates to one row may interleave, so results
//! depend on scheduling and this path is excluded from determinism tests.

use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};

use super::{
    adam_row_update, check_record, frequencies, negative_table, target_init_seed, AdamConfig, Learner, RowSource,
    SparseGrad, TrainError, TrainOutput, TrainStats, TrainerConfig,
};
use crate::corpus::Vocabulary;
use crate::matrix::Matrix;
use crate::stream::{context_vector, RecordSource};

struct SharedTable {
    dim: usize,
    params: Vec<AtomicU32>,
    first: Vec<AtomicU32>,
    second: Vec<AtomicU32>,
    steps: Vec<AtomicU32>,
}

impl SharedTable {
    fn new(init: &Matrix<f32>) -> Self {
        let n = init.as_slice().len();
        let zeros = || (0..n).map(|_| AtomicU32::new(0f32.to_bits())).collect();
        SharedTable {
            dim: init.dim(),
            params: init.as_slice().iter().map(|x| AtomicU32::new(x.to_bits())).collect(),
            first: zeros(),
            second: zeros(),
            steps: (0..init.rows()).map(|_| AtomicU32::new(0)).collect(),
        }
    }

    fn load(cells: &[AtomicU32], out: &mut [f32]) {
        for (o, c) in out.iter_mut().zip(cells) {
            *o = f32::from_bits(c.load(Ordering::Relaxed));
        }
    }

    fn store(cells: &[AtomicU32], values: &[f32]) {
        for (c, v) in cells.iter().zip(values) {
            c.store(v.to_bits(), Ordering::Relaxed);
        }
    }

    fn range(&self, id: u32) -> std::ops::Range<usize> {
        id as usize * self.dim..(id as usize + 1) * self.dim
    }

    fn apply(&self, grads: &SparseGrad, cfg: &AdamConfig, batch: u64, scratch: &mut [Vec<f32>; 3]) -> Result<(), TrainError> {
        if let Some(row) = grads.first_non_finite() {
            return Err(TrainError::NonFiniteGradient { row, batch });
        }
        let [p, m, v] = scratch;
        for (row, g) in grads.iter() {
            let r = self.range(row);
            let step = self.steps[row as usize].fetch_add(1, Ordering::Relaxed) + 1;
            Self::load(&self.params[r.clone()], p);
            Self::load(&self.first[r.clone()], m);
            Self::load(&self.second[r.clone()], v);
            adam_row_update(p, m, v, step, g, cfg);
            Self::store(&self.params[r.clone()], p);
            Self::store(&self.first[r.clone()], m);
            Self::store(&self.second[r], v);
        }
        Ok(())
    }

    fn into_output(self, rows: usize) -> (Matrix<f32>, Vec<u32>) {
        let data = self.params.into_iter().map(|c| f32::from_bits(c.into_inner())).collect();
        let steps = self.steps.into_iter().map(AtomicU32::into_inner).collect();
        (Matrix::from_vec(rows, self.dim, data), steps)
    }
}

impl RowSource for SharedTable {
    fn read_row(&self, id: u32, out: &mut [f32]) {
        Self::load(&self.params[self.range(id)], out);
    }
}

pub(super) fn train_teacher_parallel(
    source: &dyn RecordSource,
    vocab: &Vocabulary,
    config: &TrainerConfig,
    dim: usize,
) -> Result<TrainOutput, TrainError> {
    let v = vocab.len();
    let table = negative_table(vocab)?;
    let freqs = frequencies(vocab);
    let adam = config.adam();
    let init = Matrix::uniform_init(v, dim, target_init_seed(config.seed));
    let shared = SharedTable::new(&init);
    drop(init);
    let batches = AtomicU64::new(0);
    let threads = config.threads;

    let results: Vec<Result<TrainStats, TrainError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..threads)
            .map(|worker| {
                let (shared, table, freqs, batches) = (&shared, &table, &freqs, &batches);
                scope.spawn(move || -> Result<TrainStats, TrainError> {
                    let mut learner = Learner::new(config, table, freqs, v, dim, worker);
                    let mut scratch = [vec![0f32; dim], vec![0f32; dim], vec![0f32; dim]];
                    let mut flush = |learner: &mut Learner| -> Result<(), TrainError> {
                        let b = batches.fetch_add(1, Ordering::Relaxed);
                        shared.apply(&learner.grads, &adam, b, &mut scratch)?;
                        learner.finish_batch();
                        Ok(())
                    };
                    for _ in 0..config.epochs {
                        for (index, record) in source.records()?.enumerate() {
                            if index % threads != worker {
                                continue;
                            }
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
                                learner.example(shared, id, &context, None)?;
                                if learner.batch_full() {
                                    flush(&mut learner)?;
                                }
                            }
                        }
                        if learner.batch_examples > 0 {
                            flush(&mut learner)?;
                        }
                        learner.finish_epoch();
                    }
                    Ok(learner.stats)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });

    let mut stats = TrainStats::default();
    let mut per_epoch = vec![(0f64, 0u64); config.epochs as usize];
    for r in results {
        let s = r?;
        stats.examples += s.examples;
        stats.subsampled += s.subsampled;
        stats.oov_targets += s.oov_targets;
        stats.skipped += s.skipped;
        stats.batches += s.batches;
        if stats.initial_loss.is_none() {
            stats.initial_loss = s.initial_loss;
        }
        // worker epoch means weighted equally; examples per worker are similar
        for (acc, l) in per_epoch.iter_mut().zip(&s.epoch_losses) {
            if l.is_finite() {
                acc.0 += l;
                acc.1 += 1;
            }
        }
    }
    if stats.examples == 0 {
        return Err(TrainError::EmptyTrainingSet {
            skipped: stats.skipped + stats.subsampled + stats.oov_targets,
        });
    }
    stats.epoch_losses = per_epoch
        .into_iter()
        .map(|(sum, n)| if n > 0 { sum / n as f64 } else { f64::NAN })
        .collect();
    let (target, target_steps) = shared.into_output(v);
    Ok(TrainOutput {
        target,
        context: None,
        target_steps,
        stats,
    })
}
