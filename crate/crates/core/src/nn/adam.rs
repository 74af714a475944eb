use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use super::Param;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
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
        if !(self.beta1 > 0.0 && self.beta1 < 1.0 && self.beta2 > 0.0 && self.beta2 < 1.0) {
            return Err(Error::Config("Adam betas must lie in (0, 1)".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// First and second moment estimates for one parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Array2<f64>,
    pub v: Array2<f64>,
}

impl AdamState {
    pub fn new(shape: (usize, usize)) -> Self {
        AdamState {
            step: 0,
            m: Array2::zeros(shape),
            v: Array2::zeros(shape),
        }
    }
}

/// One bias-corrected Adam update of `value` in place.
pub fn adam_step(
    value: &mut Array2<f64>,
    grad: &Array2<f64>,
    state: &mut AdamState,
    cfg: &AdamConfig,
) -> Result<()> {
    if value.dim() != grad.dim() || value.dim() != state.m.dim() {
        return Err(Error::Shape(format!(
            "Adam update: parameter {:?}, gradient {:?}, state {:?}",
            value.dim(),
            grad.dim(),
            state.m.dim()
        )));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    let (b1, b2, lr, eps) = (cfg.beta1, cfg.beta2, cfg.learning_rate, cfg.epsilon);
    Zip::from(value)
        .and(grad)
        .and(&mut state.m)
        .and(&mut state.v)
        .for_each(|w, &g, m, v| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *w -= lr * m_hat / (v_hat.sqrt() + eps);
        });
    Ok(())
}

/// Adam over an ordered parameter list.
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    states: Vec<AdamState>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Adam {
            config,
            states: Vec::new(),
        }
    }

    pub fn step(&mut self, params: Vec<&mut Param>) -> Result<()> {
        if self.states.is_empty() {
            self.states = params.iter().map(|p| AdamState::new(p.value.dim())).collect();
        }
        if self.states.len() != params.len() {
            return Err(Error::Shape(format!(
                "optimizer tracks {} parameters, got {}",
                self.states.len(),
                params.len()
            )));
        }
        for (p, s) in params.into_iter().zip(&mut self.states) {
            adam_step(&mut p.value, &p.grad, s, &self.config)?;
        }
        Ok(())
    }
}
