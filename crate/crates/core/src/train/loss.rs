//! Negative-sampling logistic objective and its gradients.

use num_traits::Float;

use crate::matrix::dot;

/// `log(1 + e^-x)`, stable for large `|x|`.
#[inline]
pub fn logistic_loss<T: Float>(x: T) -> T {
    if x >= T::zero() {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

/// `1 / (1 + e^-x)` without overflow.
#[inline]
pub fn sigmoid<T: Float>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Derivative of [`logistic_loss`]: `-sigmoid(-x)`.
#[inline]
pub fn logistic_loss_derivative<T: Float>(x: T) -> T {
    -sigmoid(-x)
}

/// `l(u.v) + sum_j l(-u_j.v)` for target row `u`, context `v` and negative
/// rows `u_j`.
pub fn pair_loss<T: Float>(target: &[T], context: &[T], negatives: &[&[T]]) -> T {
    check_dims(target, context, negatives);
    negatives
        .iter()
        .fold(logistic_loss(dot(target, context)), |acc, n| acc + logistic_loss(-dot(n, context)))
}

/// Gradient of [`pair_loss`] as scalar coefficients.
///
/// With `s = u.v` and `s_j = u_j.v`:
/// `dL/du = target_coeff * v`, `dL/du_j = negative_coeffs[j] * v`, and
/// `dL/dv = target_coeff * u + sum_j negative_coeffs[j] * u_j`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PairGradient<T> {
    pub loss: T,
    pub target_coeff: T,
    pub negative_coeffs: Vec<T>,
}

impl<T: Float> PairGradient<T> {
    pub fn wrt_target(&self, context: &[T]) -> Vec<T> {
        context.iter().map(|&c| self.target_coeff * c).collect()
    }

    pub fn wrt_negative(&self, j: usize, context: &[T]) -> Vec<T> {
        context.iter().map(|&c| self.negative_coeffs[j] * c).collect()
    }

    pub fn wrt_context(&self, target: &[T], negatives: &[&[T]]) -> Vec<T> {
        let mut g: Vec<T> = target.iter().map(|&u| self.target_coeff * u).collect();
        for (n, &c) in negatives.iter().zip(&self.negative_coeffs) {
            for (gi, &x) in g.iter_mut().zip(n.iter()) {
                *gi = *gi + c * x;
            }
        }
        g
    }
}

/// Loss and gradient coefficients, written into `out` to reuse its buffer.
pub fn pair_loss_grad<T: Float>(target: &[T], context: &[T], negatives: &[&[T]], out: &mut PairGradient<T>) {
    check_dims(target, context, negatives);
    let s = dot(target, context);
    let mut loss = logistic_loss(s);
    out.target_coeff = logistic_loss_derivative(s);
    out.negative_coeffs.clear();
    for n in negatives {
        let sj = dot(n, context);
        loss = loss + logistic_loss(-sj);
        // d/ds_j l(-s_j) = -l'(-s_j) = sigmoid(s_j)
        out.negative_coeffs.push(sigmoid(sj));
    }
    out.loss = loss;
}

fn check_dims<T>(target: &[T], context: &[T], negatives: &[&[T]]) {
    assert_eq!(target.len(), context.len(), "target/context dim mismatch");
    for n in negatives {
        assert_eq!(n.len(), context.len(), "negative/context dim mismatch");
    }
}
