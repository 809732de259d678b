//! Lazy (sparse) Adam over embedding rows.
//!
//! Only rows that received a gradient in the current batch are touched: their
//! moments decay, their step count advances and bias correction uses that
//! per-row count. All other rows stay bit-identical.

use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::matrix::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub first_moment: Matrix<T>,
    pub second_moment: Matrix<T>,
    pub steps: Vec<u32>,
}

impl<T: Float> AdamState<T> {
    pub fn new(rows: usize, dim: usize) -> Self {
        AdamState {
            first_moment: Matrix::zeros(rows, dim),
            second_moment: Matrix::zeros(rows, dim),
            steps: vec![0; rows],
        }
    }
}

/// Summed gradients for the rows touched in one batch, in first-touch order.
#[derive(Clone, Debug)]
pub struct SparseGrad {
    dim: usize,
    slot_of: Vec<u32>,
    rows: Vec<u32>,
    data: Vec<f64>,
}

const NO_SLOT: u32 = u32::MAX;

impl SparseGrad {
    pub fn new(num_rows: usize, dim: usize) -> Self {
        SparseGrad {
            dim,
            slot_of: vec![NO_SLOT; num_rows],
            rows: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Zero-initialized on first access within a batch.
    #[inline]
    pub fn row_mut(&mut self, id: u32) -> &mut [f64] {
        let slot = match self.slot_of[id as usize] {
            NO_SLOT => {
                let s = self.rows.len();
                self.slot_of[id as usize] = s as u32;
                self.rows.push(id);
                self.data.resize(self.data.len() + self.dim, 0.0);
                s
            }
            s => s as usize,
        };
        &mut self.data[slot * self.dim..(slot + 1) * self.dim]
    }

    /// `row += scale * v`.
    #[inline]
    pub fn add_scaled(&mut self, id: u32, scale: f64, v: &[f32]) {
        for (g, &x) in self.row_mut(id).iter_mut().zip(v) {
            *g += scale * x as f64;
        }
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn touched(&self) -> &[u32] {
        &self.rows
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &[f64])> {
        self.rows
            .iter()
            .zip(self.data.chunks_exact(self.dim.max(1)))
            .map(|(&r, g)| (r, g))
    }

    pub fn clear(&mut self) {
        for &r in &self.rows {
            self.slot_of[r as usize] = NO_SLOT;
        }
        self.rows.clear();
        self.data.clear();
    }

    pub fn first_non_finite(&self) -> Option<u32> {
        self.iter().find(|(_, g)| g.iter().any(|x| !x.is_finite())).map(|(r, _)| r)
    }
}

/// One Adam update of a single row. `step` is the row's count after
/// incrementing (1 on the first update).
#[inline]
pub fn adam_row_update<T: Float>(
    param: &mut [T],
    first: &mut [T],
    second: &mut [T],
    step: u32,
    grad: &[f64],
    cfg: &AdamConfig,
) {
    let c = |x: f64| T::from(x).expect("float conversion");
    let (b1, b2) = (c(cfg.beta1), c(cfg.beta2));
    let one = T::one();
    let bias1 = one - b1.powi(step as i32);
    let bias2 = one - b2.powi(step as i32);
    let lr = c(cfg.learning_rate);
    let eps = c(cfg.eps);
    for (((p, m), v), &g) in param.iter_mut().zip(first.iter_mut()).zip(second.iter_mut()).zip(grad) {
        let g = c(g);
        *m = b1 * *m + (one - b1) * g;
        *v = b2 * *v + (one - b2) * g * g;
        let m_hat = *m / bias1;
        let v_hat = *v / bias2;
        *p = *p - lr * m_hat / (v_hat.sqrt() + eps);
    }
}

/// Applies one lazy Adam step for every row in `grads`. Fails before
/// modifying anything if a gradient is non-finite.
pub fn lazy_adam_step<T: Float>(
    params: &mut Matrix<T>,
    state: &mut AdamState<T>,
    grads: &SparseGrad,
    cfg: &AdamConfig,
    batch: u64,
) -> Result<(), TrainError> {
    if let Some(row) = grads.first_non_finite() {
        return Err(TrainError::NonFiniteGradient { row, batch });
    }
    for (row, g) in grads.iter() {
        let r = row as usize;
        state.steps[r] += 1;
        let step = state.steps[r];
        adam_row_update(
            params.row_mut(r),
            state.first_moment.row_mut(r),
            state.second_moment.row_mut(r),
            step,
            g,
            cfg,
        );
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_is_lr_times_sign() {
        let cfg = AdamConfig::default();
        let mut p = Matrix::from_vec(1, 3, vec![0.5f64, 0.5, 0.5]);
        let mut st = AdamState::new(1, 3);
        let mut g = SparseGrad::new(1, 3);
        g.row_mut(0).copy_from_slice(&[3.0, -0.2, 1e3]);
        lazy_adam_step(&mut p, &mut st, &g, &cfg, 0).unwrap();
        for (x, s) in p.row(0).iter().zip([-1.0, 1.0, -1.0]) {
            assert!((x - (0.5 + s * 0.001)).abs() < 1e-9);
        }
        assert_eq!(st.steps, [1]);
    }

    #[test]
    fn untouched_rows_are_bit_identical() {
        let cfg = AdamConfig::default();
        let mut p = Matrix::from_vec(3, 2, vec![0.1f32, 0.2, 0.3, 0.4, 0.5, 0.6]);
        let before = p.clone();
        let mut st = AdamState::new(3, 2);
        let mut g = SparseGrad::new(3, 2);
        for batch in 0..5 {
            g.clear();
            g.row_mut(1).copy_from_slice(&[0.7, -0.1]);
            lazy_adam_step(&mut p, &mut st, &g, &cfg, batch).unwrap();
        }
        assert_eq!(p.row(0), before.row(0));
        assert_eq!(p.row(2), before.row(2));
        assert_ne!(p.row(1), before.row(1));
        assert_eq!(st.steps, [0, 5, 0]);
        assert!(st.first_moment.row(0).iter().chain(st.second_moment.row(2)).all(|&x| x == 0.0));
        assert!(st.second_moment.as_slice().iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn non_finite_gradient_aborts_untouched() {
        let cfg = AdamConfig::default();
        let mut p = Matrix::from_vec(2, 1, vec![1.0f32, 2.0]);
        let mut st = AdamState::new(2, 1);
        let mut g = SparseGrad::new(2, 1);
        g.row_mut(0)[0] = 1.0;
        g.row_mut(1)[0] = f64::NAN;
        let err = lazy_adam_step(&mut p, &mut st, &g, &cfg, 17).unwrap_err();
        assert!(matches!(err, TrainError::NonFiniteGradient { row: 1, batch: 17 }));
        assert_eq!(p.as_slice(), &[1.0, 2.0]);
        assert_eq!(st.steps, [0, 0]);
    }

    #[test]
    fn sparse_grad_accumulates_and_clears() {
        let mut g = SparseGrad::new(4, 2);
        g.add_scaled(3, 2.0, &[1.0, 1.0]);
        g.add_scaled(1, 1.0, &[0.5, 0.0]);
        g.add_scaled(3, -1.0, &[1.0, 0.0]);
        let rows: Vec<_> = g.iter().map(|(r, v)| (r, v.to_vec())).collect();
        assert_eq!(rows, vec![(3, vec![1.0, 2.0]), (1, vec![0.5, 0.0])]);
        g.clear();
        assert!(g.is_empty());
        g.add_scaled(1, 1.0, &[1.0, 1.0]);
        assert_eq!(g.iter().next().unwrap().1, &[1.0, 1.0]);
    }
}
