use alloc::vec::Vec;

use super::Real;
use crate::{Error, Result};

/// Mean over the batch of the squared Euclidean error, `(1/N_b) Σ ‖q − s‖²`,
/// and its gradient `2 (s − q) / N_b` with respect to each prediction.
pub fn mse_loss<T: Real>(predictions: &[Vec<T>], targets: &[Vec<T>]) -> Result<(T, Vec<Vec<T>>)> {
    if predictions.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if predictions.len() != targets.len() {
        return Err(Error::LengthMismatch {
            expected: predictions.len(),
            got: targets.len(),
        });
    }
    let nb = T::lit(predictions.len() as f64);
    let two = T::lit(2.0);
    let mut loss = T::zero();
    let mut grads = Vec::with_capacity(predictions.len());
    for (s, q) in predictions.iter().zip(targets) {
        if s.len() != q.len() {
            return Err(Error::LengthMismatch {
                expected: s.len(),
                got: q.len(),
            });
        }
        let mut g = Vec::with_capacity(s.len());
        for (&a, &b) in s.iter().zip(q) {
            let d = a - b;
            loss += d * d;
            g.push(two * d / nb);
        }
        grads.push(g);
    }
    Ok((loss / nb, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn perfect_prediction_is_zero() {
        let s = vec![vec![1.0, 2.0, 3.0]];
        let (l, g) = mse_loss(&s, &s).unwrap();
        assert_eq!(l, 0.0);
        assert_eq!(g, vec![vec![0.0; 3]]);
    }

    #[test]
    fn unit_offset() {
        let (l, _) = mse_loss(&[vec![0.0, 2.0, 3.0]], &[vec![1.0, 2.0, 3.0]]).unwrap();
        assert_eq!(l, 1.0);
    }

    #[test]
    fn empty_batch_is_error() {
        assert_eq!(mse_loss::<f64>(&[], &[]), Err(Error::EmptyBatch));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let s: Vec<Vec<f64>> = vec![vec![0.3, -1.2, 2.0], vec![1.5, 0.1, -0.7], vec![0.0, 0.9, 1.1]];
        let q = vec![vec![1.0, 2.0, 3.0], vec![-0.5, 0.4, 0.2], vec![0.2, 0.2, 0.2]];
        let (_, g) = mse_loss(&s, &q).unwrap();
        let h = 1e-6;
        for i in 0..s.len() {
            for k in 0..3 {
                let mut sp = s.clone();
                let mut sm = s.clone();
                sp[i][k] += h;
                sm[i][k] -= h;
                let fd = (mse_loss(&sp, &q).unwrap().0 - mse_loss(&sm, &q).unwrap().0) / (2.0 * h);
                assert!((fd - g[i][k]).abs() <= 1e-6 * g[i][k].abs().max(1e-3), "{fd} vs {}", g[i][k]);
            }
        }
    }
}
