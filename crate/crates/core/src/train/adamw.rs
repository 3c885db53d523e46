//! Adam with decoupled weight decay.
//!
//! ```text
//! θ ← θ − lr·λ·θ
//! m ← β₁ m + (1 − β₁) g
//! v ← β₂ v + (1 − β₂) g²
//! θ ← θ − lr · (m / (1 − β₁ᵗ)) / (sqrt(v / (1 − β₂ᵗ)) + ε)
//! ```

use ndarray::{Array2, Zip};

use crate::probes::ProbeParams;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    /// PyTorch's defaults.
    fn default() -> Self {
        AdamWConfig { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 1e-2 }
    }
}

pub struct AdamW<T> {
    config: AdamWConfig,
    step: i32,
    m: Vec<Array2<T>>,
    v: Vec<Array2<T>>,
}

impl<T: Real> AdamW<T> {
    pub fn new(config: AdamWConfig, params: &ProbeParams<T>) -> Self {
        let zeros = || params.tensors().iter().map(|t| Array2::zeros(t.dim())).collect();
        AdamW { config, step: 0, m: zeros(), v: zeros() }
    }

    pub fn steps(&self) -> i32 {
        self.step
    }

    pub fn step(&mut self, params: &mut ProbeParams<T>, grad: &ProbeParams<T>) {
        self.step += 1;
        let c = self.config;
        let lr = T::of(c.lr);
        let decay = T::of(1.0 - c.lr * c.weight_decay);
        let (b1, b2) = (T::of(c.beta1), T::of(c.beta2));
        let bc1 = T::of(1.0 - c.beta1.powi(self.step));
        let bc2 = T::of(1.0 - c.beta2.powi(self.step));
        let eps = T::of(c.eps);
        let one = T::one();
        for (((p, g), m), v) in params
            .tensors_mut()
            .into_iter()
            .zip(grad.tensors())
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
                *p *= decay;
                *m = b1 * *m + (one - b1) * g;
                *v = b2 * *v + (one - b2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probes::{Scorer, StructuralParams};
    use ndarray::array;

    fn single(v: f64) -> ProbeParams<f64> {
        ProbeParams {
            scorer: Scorer::Structural(StructuralParams { proj: array![[v]] }),
            positions: None,
        }
    }

    fn value(p: &ProbeParams<f64>) -> f64 {
        p.tensors()[0][[0, 0]]
    }

    #[test]
    fn first_step_moves_by_lr() {
        // With bias correction the first update is lr·sign(g) (up to eps).
        let mut p = single(1.0);
        let mut opt = AdamW::new(AdamWConfig { weight_decay: 0.0, ..Default::default() }, &p);
        opt.step(&mut p, &single(0.37));
        assert!((value(&p) - (1.0 - 1e-3)).abs() < 1e-9);
    }

    #[test]
    fn decay_is_decoupled() {
        // Zero gradient: only the multiplicative decay applies.
        let mut p = single(2.0);
        let cfg = AdamWConfig { lr: 0.1, weight_decay: 0.5, ..Default::default() };
        let mut opt = AdamW::new(cfg, &p);
        opt.step(&mut p, &single(0.0));
        assert!((value(&p) - 2.0 * (1.0 - 0.05)).abs() < 1e-12);
    }

    #[test]
    fn minimises_quadratic() {
        let mut p = single(3.0);
        let cfg = AdamWConfig { lr: 0.05, weight_decay: 0.0, ..Default::default() };
        let mut opt = AdamW::new(cfg, &p);
        for _ in 0..2000 {
            let g = single(2.0 * (value(&p) - 0.5));
            opt.step(&mut p, &g);
        }
        assert!((value(&p) - 0.5).abs() < 1e-3);
    }
}
