use serde::{Deserialize, Serialize};

use crate::encoder::Weights;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction and a constant learning rate.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    cfg: AdamConfig,
    m: Weights<T>,
    v: Weights<T>,
    t: i32,
}

impl<T: Scalar> Adam<T> {
    pub fn new(cfg: AdamConfig, like: &Weights<T>) -> Self {
        Adam {
            cfg,
            m: like.zeros_like(),
            v: like.zeros_like(),
            t: 0,
        }
    }

    pub fn steps(&self) -> i32 {
        self.t
    }

    pub fn step(&mut self, params: &mut Weights<T>, grads: &Weights<T>) {
        self.t += 1;
        let b1 = T::of(self.cfg.beta1);
        let b2 = T::of(self.cfg.beta2);
        let lr = T::of(self.cfg.learning_rate);
        let eps = T::of(self.cfg.eps);
        let c1 = T::one() - b1.powi(self.t);
        let c2 = T::one() - b2.powi(self.t);
        let tensors = params
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(self.m.tensors_mut())
            .zip(self.v.tensors_mut());
        for (((p, g), m), v) in tensors {
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = b1 * m[i] + (T::one() - b1) * gi;
                v[i] = b2 * v[i] + (T::one() - b2) * gi * gi;
                let mhat = m[i] / c1;
                let vhat = v[i] / c2;
                p[i] -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = Weights::<f64>::zeros(1, 2, 1);
        let mut g = p.zeros_like();
        g.embedding.data = vec![3.0, -0.5];
        let mut opt = Adam::new(AdamConfig { learning_rate: 0.1, ..Default::default() }, &p);
        opt.step(&mut p, &g);
        // Bias-corrected first step is lr · sign(g) up to eps.
        assert!((p.embedding.data[0] + 0.1).abs() < 1e-6);
        assert!((p.embedding.data[1] - 0.1).abs() < 1e-6);
        assert_eq!(p.layers[0].w1.data, vec![0.0; 4]);
    }

    #[test]
    fn zero_learning_rate_is_a_no_op() {
        let mut p = Weights::<f32>::zeros(2, 2, 1);
        p.embedding.data = vec![0.25, -1.0, 3.0, 7.5];
        let before = p.clone();
        let mut g = p.zeros_like();
        g.embedding.data = vec![1.0, 2.0, -3.0, 0.1];
        let mut opt = Adam::new(AdamConfig { learning_rate: 0.0, ..Default::default() }, &p);
        for _ in 0..5 {
            opt.step(&mut p, &g);
        }
        assert_eq!(p, before);
    }
}
