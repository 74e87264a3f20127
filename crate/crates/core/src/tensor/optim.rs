use serde::{Deserialize, Serialize};

use super::matrix::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias-corrected moment estimates.
#[derive(Clone, Debug)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    first: Vec<Matrix>,
    second: Vec<Matrix>,
}

impl Adam {
    pub fn new(config: AdamConfig, params: &[Matrix]) -> Self {
        let zeros = || params.iter().map(|p| Matrix::zeros(p.rows(), p.cols())).collect();
        Adam {
            config,
            step: 0,
            first: zeros(),
            second: zeros(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut [Matrix], grads: &[Matrix]) {
        assert_eq!(params.len(), grads.len());
        assert_eq!(params.len(), self.first.len());
        self.step += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.first)
            .zip(&mut self.second)
        {
            assert_eq!(p.shape(), g.shape());
            for (((pv, &gv), mv), vv) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *mv = beta1 * *mv + (1.0 - beta1) * gv;
                *vv = beta2 * *vv + (1.0 - beta2) * gv * gv;
                let m_hat = *mv / c1;
                let v_hat = *vv / c2;
                *pv -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}
