//! Adam with transformer-standard defaults (beta 0.9/0.98, eps 1e-9).

use crate::error::{Error, Result};
use crate::model::{OptimizerState, ParamSet};
use crate::nn::Tensor;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.98,
            eps: 1e-9,
        }
    }
}

pub struct Adam {
    cfg: AdamConfig,
    state: OptimizerState,
}

impl Adam {
    pub fn new(params: &ParamSet, cfg: AdamConfig) -> Self {
        let zeros: Vec<Tensor> = (0..params.len())
            .map(|i| Tensor::zeros(params.tensor(i).shape()))
            .collect();
        Adam {
            cfg,
            state: OptimizerState {
                step: 0,
                m: zeros.clone(),
                v: zeros,
            },
        }
    }

    pub fn from_state(state: OptimizerState, cfg: AdamConfig) -> Self {
        Adam { cfg, state }
    }

    pub fn state(&self) -> &OptimizerState {
        &self.state
    }

    pub fn into_state(self) -> OptimizerState {
        self.state
    }

    /// One update with bias-corrected moments.
    pub fn step(&mut self, params: &mut ParamSet, grads: &[Tensor], lr: f64) -> Result<()> {
        if grads.len() != params.len() {
            return Err(Error::Training(format!(
                "{} gradients for {} parameters",
                grads.len(),
                params.len()
            )));
        }
        self.state.step += 1;
        let t = self.state.step as f64;
        let bc1 = 1.0 - self.cfg.beta1.powf(t);
        let bc2 = 1.0 - self.cfg.beta2.powf(t);
        for i in 0..grads.len() {
            let g = grads[i].data();
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical(format!(
                    "non-finite gradient for parameter '{}'",
                    params.name(i)
                )));
            }
            let m = self.state.m[i].data_mut();
            let v = self.state.v[i].data_mut();
            let theta = params.tensor_mut(i).data_mut();
            for j in 0..g.len() {
                m[j] = self.cfg.beta1 * m[j] + (1.0 - self.cfg.beta1) * g[j];
                v[j] = self.cfg.beta2 * v[j] + (1.0 - self.cfg.beta2) * g[j] * g[j];
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                theta[j] -= lr * m_hat / (v_hat.sqrt() + self.cfg.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Adam on a quadratic bowl reaches the minimum.
    #[test]
    fn converges_on_a_quadratic() {
        let mut params = ParamSet::new();
        let id = params.alloc("x", Tensor::from_vec(&[2], vec![3.0, -2.0]));
        let mut adam = Adam::new(&params, AdamConfig::default());
        for _ in 0..2000 {
            let x = params.value(id).data().to_vec();
            let grad = Tensor::from_vec(&[2], vec![2.0 * x[0], 2.0 * x[1]]);
            adam.step(&mut params, &[grad], 0.01).unwrap();
        }
        let x = params.value(id).data();
        assert!(x[0].abs() < 1e-3 && x[1].abs() < 1e-3, "x = {x:?}");
    }

    #[test]
    fn non_finite_gradient_is_reported() {
        let mut params = ParamSet::new();
        params.alloc("x", Tensor::from_vec(&[1], vec![0.0]));
        let mut adam = Adam::new(&params, AdamConfig::default());
        let err = adam
            .step(&mut params, &[Tensor::from_vec(&[1], vec![f64::NAN])], 0.1)
            .unwrap_err();
        assert!(err.to_string().contains("non-finite"), "{err}");
    }
}
