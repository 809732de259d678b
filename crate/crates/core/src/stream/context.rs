use crate::corpus::OOV;
use crate::matrix::Matrix;

use super::SentenceRecord;

/// Mean of every token vector in the record, target included.
///
/// Sentence and paragraph scope share this arithmetic; they differ only in
/// what the teacher saw. Accumulates in f64.
///
/// Panics on an empty record.
pub fn context_vector(record: &SentenceRecord, dim: usize) -> Vec<f32> {
    assert!(!record.is_empty(), "context of an empty record");
    let mut acc = vec![0f64; dim];
    for v in record.iter_vectors(dim) {
        for (a, &x) in acc.iter_mut().zip(v) {
            *a += x as f64;
        }
    }
    let n = record.len() as f64;
    acc.into_iter().map(|a| (a / n) as f32).collect()
}

/// No in-vocabulary token besides the target.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EmptyContext;

/// Mean of the context rows of every in-vocabulary token except the one at
/// `target_position`. The target's own row is never read.
pub fn static_context_vector(
    sentence: &[u32],
    target_position: usize,
    context: &Matrix<f32>,
) -> Result<Vec<f32>, EmptyContext> {
    let dim = context.dim();
    let mut acc = vec![0f64; dim];
    let mut n = 0usize;
    for (i, &id) in sentence.iter().enumerate() {
        if i == target_position || id == OOV {
            continue;
        }
        for (a, &x) in acc.iter_mut().zip(context.row(id as usize)) {
            *a += x as f64;
        }
        n += 1;
    }
    if n == 0 {
        return Err(EmptyContext);
    }
    Ok(acc.into_iter().map(|a| (a / n as f64) as f32).collect())
}
