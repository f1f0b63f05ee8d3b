use std::collections::HashMap;

use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Adam with bias correction. Moment buffers are keyed by tensor id, so the
/// same optimizer instance must keep seeing the same parameter tensors
/// (mutated in place) across steps.
pub struct Adam<S: Scalar> {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    slots: HashMap<u64, (Vec<S>, Vec<S>)>,
}

impl<S: Scalar> Default for Adam<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> Adam<S> {
    pub fn new() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            slots: HashMap::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// One update over `params`, reading each tensor's accumulated gradient
    /// (absent gradients count as zero, leaving the parameter unchanged).
    pub fn step(&mut self, params: &[Tensor<S>], lr: f64) {
        self.step += 1;
        let t = self.step as i32;
        let b1 = S::from_f64(self.beta1);
        let b2 = S::from_f64(self.beta2);
        let one = S::one();
        let bc1 = S::from_f64(1.0 - self.beta1.powi(t));
        let bc2 = S::from_f64(1.0 - self.beta2.powi(t));
        let lr_s = S::from_f64(lr);
        let eps_s = S::from_f64(self.eps);

        for p in params {
            let g = p.grad_or_zeros();
            let (m, v) = self
                .slots
                .entry(p.id())
                .or_insert_with(|| (vec![S::zero(); p.len()], vec![S::zero(); p.len()]));
            assert_eq!(m.len(), p.len(), "adam: parameter length changed between steps");
            let mut data = p.data_mut();
            for i in 0..data.len() {
                let gi = g[i];
                m[i] = b1 * m[i] + (one - b1) * gi;
                v[i] = b2 * v[i] + (one - b2) * gi * gi;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                data[i] = data[i] - lr_s * m_hat / (v_hat.sqrt() + eps_s);
            }
        }
    }
}

/// Cosine annealing with warm restarts. Cycle `i` spans `t0 * t_mult^i`
/// epochs; within a cycle,
/// `lr = eta_min + (eta_max - eta_min) * (1 + cos(pi * t_cur / t_len)) / 2`,
/// so every cycle opens at `eta_max` exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarmRestartSchedule {
    pub eta_max: f64,
    pub eta_min: f64,
    pub t0: u64,
    pub t_mult: u64,
}

impl WarmRestartSchedule {
    pub fn new(eta_max: f64, eta_min: f64, t0: u64, t_mult: u64) -> Self {
        assert!(t0 >= 1, "warm restarts: t0 must be at least 1");
        assert!(t_mult >= 1, "warm restarts: t_mult must be at least 1");
        assert!(eta_max >= eta_min, "warm restarts: eta_max below eta_min");
        Self {
            eta_max,
            eta_min,
            t0,
            t_mult,
        }
    }

    /// Learning rate for the given epoch (0-based).
    pub fn lr_at(&self, epoch: u64) -> f64 {
        let mut start = 0u64;
        let mut t_len = self.t0;
        while epoch >= start + t_len {
            start += t_len;
            t_len = t_len.saturating_mul(self.t_mult);
        }
        let t_cur = (epoch - start) as f64;
        let frac = (1.0 + (std::f64::consts::PI * t_cur / t_len as f64).cos()) / 2.0;
        self.eta_min + (self.eta_max - self.eta_min) * frac
    }
}
