use serde::{Deserialize, Serialize};

use super::params::{ParamId, ParamStore};
use super::tensor::Tensor;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Multiplicative learning-rate decay applied once per epoch.
    pub gamma: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            gamma: 1.0,
        }
    }
}

/// Adam with bias correction and an exponential per-epoch schedule.
#[derive(Clone, Debug)]
pub struct Adam<T> {
    pub config: AdamConfig,
    first: Vec<Option<Tensor<T>>>,
    second: Vec<Option<Tensor<T>>>,
    steps: Vec<u64>,
    epoch: u32,
}

impl<T: Scalar> Adam<T> {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            first: Vec::new(),
            second: Vec::new(),
            steps: Vec::new(),
            epoch: 0,
        }
    }

    pub fn epoch(&self) -> u32 {
        self.epoch
    }

    pub fn set_epoch(&mut self, epoch: u32) {
        self.epoch = epoch;
    }

    pub fn next_epoch(&mut self) {
        self.epoch += 1;
    }

    /// `lr * gamma^epoch`.
    pub fn effective_lr(&self) -> f64 {
        self.config.lr * self.config.gamma.powi(self.epoch as i32)
    }

    /// Updates every parameter that has a gradient; others are untouched.
    pub fn step<'a>(&mut self, store: &mut ParamStore<T>, grads: impl IntoIterator<Item = (ParamId, &'a Tensor<T>)>) {
        let n = store.len();
        if self.first.len() < n {
            self.first.resize(n, None);
            self.second.resize(n, None);
            self.steps.resize(n, 0);
        }
        let c = self.config;
        let lr = self.effective_lr();
        let (b1, b2) = (T::of(c.beta1), T::of(c.beta2));
        let eps = T::of(c.eps);
        for (id, g) in grads {
            let i = id.index();
            let p = store.get_mut(id);
            debug_assert_eq!(p.shape(), g.shape());
            let s = p.shape();
            let m = self.first[i].get_or_insert_with(|| Tensor::zeros(s.rows, s.cols));
            let v = self.second[i].get_or_insert_with(|| Tensor::zeros(s.rows, s.cols));
            self.steps[i] += 1;
            let t = self.steps[i] as i32;
            let bc1 = T::of(1.0 - c.beta1.powi(t));
            let bc2 = T::of(1.0 - c.beta2.powi(t));
            let lr = T::of(lr);
            for (((w, &gi), mi), vi) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut().iter_mut())
                .zip(v.data_mut().iter_mut())
            {
                *mi = b1 * *mi + (T::one() - b1) * gi;
                *vi = b2 * *vi + (T::one() - b2) * gi * gi;
                let mhat = *mi / bc1;
                let vhat = *vi / bc2;
                *w -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
    }
}
