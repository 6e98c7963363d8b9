use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::io::{Decoder, Encoder};

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(n_params: usize, learning_rate: f64, beta1: f64, beta2: f64, epsilon: f64) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(invalid(format!("learning rate must be positive, got {learning_rate}")));
        }
        if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || !(epsilon > 0.0) {
            return Err(invalid("Adam betas must lie in [0, 1) and epsilon be positive"));
        }
        Ok(Self {
            learning_rate,
            beta1,
            beta2,
            epsilon,
            step: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        })
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn n_params(&self) -> usize {
        self.m.len()
    }

    pub fn update(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step as i32);
        let c2 = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }

    pub(crate) fn encode(&self, e: &mut Encoder) {
        e.f64(self.learning_rate);
        e.f64(self.beta1);
        e.f64(self.beta2);
        e.f64(self.epsilon);
        e.u64(self.step);
        e.u64(self.m.len() as u64);
        e.f64s(&self.m);
        e.f64s(&self.v);
    }

    pub(crate) fn decode(d: &mut Decoder<'_>) -> Result<Self> {
        let (learning_rate, beta1, beta2, epsilon) = (d.f64()?, d.f64()?, d.f64()?, d.f64()?);
        let step = d.u64()?;
        let n = d.usize()?;
        let m = d.f64s(n)?;
        let v = d.f64s(n)?;
        Ok(Self {
            learning_rate,
            beta1,
            beta2,
            epsilon,
            step,
            m,
            v,
        })
    }
}
