//! Gradient steps shared by the embedding trainers.
//!
//! All steps follow the word2vec update orientation: the gradient for the
//! hidden vector is accumulated into a separate buffer while output vectors
//! are updated in place, and the caller applies the accumulated buffer to
//! the input rows afterwards.

use crate::matrix::{axpy, dot};

const LOG_EPS: f32 = 1e-7;

#[inline]
pub fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}

/// One logistic prediction of `label` from `hidden` through `output`.
///
/// With `p = sigmoid(output . hidden)` and `g = lr * (label - p)`, adds
/// `g * output` to `hidden_grad` and `g * hidden` to `output`. Returns the
/// negative log-likelihood of `label`.
#[inline]
pub fn binary_logistic(hidden: &[f32], hidden_grad: &mut [f32], output: &mut [f32], label: bool, lr: f32) -> f32 {
    let p = sigmoid(dot(output, hidden));
    let target = if label { 1.0 } else { 0.0 };
    let g = lr * (target - p);
    axpy(g, output, hidden_grad);
    axpy(g, hidden, output);
    if label {
        -p.max(LOG_EPS).ln()
    } else {
        -(1.0 - p).max(LOG_EPS).ln()
    }
}

/// Linear learning-rate decay from `lr0` towards `lr_min` over `total`
/// scheduled tokens.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearSchedule {
    pub lr0: f32,
    pub lr_min: f32,
    pub total: u64,
}

impl LinearSchedule {
    /// `max(lr_min, lr0 * (1 - processed / total))`
    #[inline]
    pub fn at(&self, processed: u64) -> f32 {
        let progress = if self.total == 0 {
            1.0
        } else {
            processed as f64 / self.total as f64
        };
        let lr = f64::from(self.lr0) * (1.0 - progress);
        (lr as f32).max(self.lr_min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_output_positive_update() {
        let hidden = [0.3, -0.2, 0.9];
        let mut grad = [0.0; 3];
        let mut out = [0.0; 3];
        let lr = 0.05;
        let loss = binary_logistic(&hidden, &mut grad, &mut out, true, lr);
        assert_eq!(grad, [0.0; 3]);
        for (o, h) in out.iter().zip(&hidden) {
            assert!((o - 0.5 * lr * h).abs() < 1e-8);
        }
        assert!((loss - std::f32::consts::LN_2).abs() < 1e-6);
    }

    #[test]
    fn schedule_endpoints() {
        let s = LinearSchedule {
            lr0: 0.025,
            lr_min: 2.5e-6,
            total: 1000,
        };
        assert_eq!(s.at(0), 0.025);
        assert!((s.at(500) - 0.0125).abs() < 1e-9);
        assert_eq!(s.at(1000), 2.5e-6);
        assert_eq!(s.at(5000), 2.5e-6);
    }
}
