use num_traits::Float;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Row-major dense matrix, one row per word.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    dim: usize,
    data: Vec<T>,
}

/// The trained target matrix and the baseline context matrix.
pub type EmbeddingMatrix = Matrix<f32>;

impl<T: Float> Matrix<T> {
    pub fn zeros(rows: usize, dim: usize) -> Self {
        Matrix {
            rows,
            dim,
            data: vec![T::zero(); rows * dim],
        }
    }

    /// Panics if `data.len() != rows * dim`.
    pub fn from_vec(rows: usize, dim: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * dim, "matrix data length mismatch");
        Matrix { rows, dim, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks_exact(self.dim.max(1)).take(self.rows)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

impl Matrix<f32> {
    /// Entries i.i.d. uniform in `[-0.5/dim, 0.5/dim]`, drawn row-major from
    /// a ChaCha8 stream seeded with `seed`.
    pub fn uniform_init(rows: usize, dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 0.5 / dim as f32;
        let data = (0..rows * dim)
            .map(|_| rng.random_range(-bound..=bound))
            .collect();
        Matrix { rows, dim, data }
    }

    pub fn to_f64(&self) -> Matrix<f64> {
        Matrix {
            rows: self.rows,
            dim: self.dim,
            data: self.data.iter().map(|&x| x as f64).collect(),
        }
    }
}

impl Matrix<f64> {
    pub fn to_f32(&self) -> Matrix<f32> {
        Matrix {
            rows: self.rows,
            dim: self.dim,
            data: self.data.iter().map(|&x| x as f32).collect(),
        }
    }
}

/// Eight independent partial sums so the loop vectorizes; the summation
/// order is fixed, so results are reproducible.
#[inline]
pub fn dot<T: Float>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    const LANES: usize = 8;
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [T::zero(); LANES];
    let (ca, cb) = (a.chunks_exact(LANES), b.chunks_exact(LANES));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for i in 0..LANES {
            acc[i] = acc[i] + x[i] * y[i];
        }
    }
    let mut tail = T::zero();
    for (&x, &y) in ra.iter().zip(rb) {
        tail = tail + x * y;
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail
}
