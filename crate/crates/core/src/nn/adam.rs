use alloc::vec::Vec;

use super::{Gradients, Real, Tensor};
use crate::{Error, Result};

/// Adam hyperparameters; defaults are the method's published ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && self.learning_rate.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(alloc::format!("bad Adam settings {self:?}")))
        }
    }
}

/// Adam state: first and second moments per parameter plus the step count.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub config: AdamConfig,
    pub step: u64,
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
}

impl<T: Real> Adam<T> {
    /// Fresh state with zero moments for parameters shaped like `params`.
    pub fn new(config: AdamConfig, params: &[Tensor<T>]) -> Self {
        let zeros = || params.iter().map(|p| alloc::vec![T::zero(); p.len()]).collect();
        Adam {
            config,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    /// One update `θ ← θ − α·m̂/(√v̂ + ε)` with bias-corrected moments.
    pub fn update(&mut self, params: &mut [Tensor<T>], grads: &Gradients<T>) -> Result<()> {
        if !grads.is_finite() {
            return Err(Error::NonFinite("gradient"));
        }
        if params.len() != self.m.len() || grads.tensors.len() != params.len() {
            return Err(Error::LengthMismatch {
                expected: self.m.len(),
                got: params.len(),
            });
        }
        self.step += 1;
        let c = self.config;
        let t = self.step as f64;
        let bc1 = 1.0 - libm::pow(c.beta1, t);
        let bc2 = 1.0 - libm::pow(c.beta2, t);
        let (b1, b2) = (T::lit(c.beta1), T::lit(c.beta2));
        let (ob1, ob2) = (T::lit(1.0 - c.beta1), T::lit(1.0 - c.beta2));
        let (lr, eps) = (T::lit(c.learning_rate), T::lit(c.epsilon));
        let (inv_bc1, inv_bc2) = (T::lit(1.0 / bc1), T::lit(1.0 / bc2));
        for (i, p) in params.iter_mut().enumerate() {
            let g = grads.tensors[i].data();
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for (k, w) in p.data_mut().iter_mut().enumerate() {
                m[k] = b1 * m[k] + ob1 * g[k];
                v[k] = b2 * v[k] + ob2 * g[k] * g[k];
                let m_hat = m[k] * inv_bc1;
                let v_hat = v[k] * inv_bc2;
                *w -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn single(v: f64) -> Vec<Tensor<f64>> {
        vec![Tensor::from_vec(&[1], vec![v]).unwrap()]
    }

    fn grad(v: f64) -> Gradients<f64> {
        Gradients { tensors: single(v) }
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = single(0.0);
        let mut opt = Adam::new(AdamConfig::default(), &p);
        opt.update(&mut p, &grad(1.0)).unwrap();
        let moved = p[0].data()[0];
        assert!(moved < 0.0);
        assert!((moved.abs() - 1e-3).abs() < 1e-6 * 1e-3);
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = single(0.7);
        let mut opt = Adam::new(AdamConfig::default(), &p);
        for _ in 0..5 {
            opt.update(&mut p, &grad(0.0)).unwrap();
        }
        assert_eq!(p[0].data()[0], 0.7);
    }

    #[test]
    fn proportional_histories_give_equal_steps() {
        let mut a = single(0.0);
        let mut b = single(0.0);
        let mut oa = Adam::new(AdamConfig::default(), &a);
        let mut ob = Adam::new(AdamConfig::default(), &b);
        for g in [0.3, -1.0, 2.5, 0.05] {
            oa.update(&mut a, &grad(g)).unwrap();
            ob.update(&mut b, &grad(2.0 * g)).unwrap();
            let (x, y) = (a[0].data()[0], b[0].data()[0]);
            assert!((x - y).abs() < 1e-9, "{x} vs {y}");
        }
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut p = single(0.0);
        let mut opt = Adam::new(AdamConfig::default(), &p);
        assert_eq!(opt.update(&mut p, &grad(f64::NAN)), Err(Error::NonFinite("gradient")));
        assert_eq!(opt.step, 0);
    }
}
