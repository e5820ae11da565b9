use serde::{Deserialize, Serialize};

use super::params::{Gradients, ParameterSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
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

/// One bias-corrected Adam update. Frozen tensors keep their values and moments.
pub fn adam_step(params: &mut ParameterSet, grads: &Gradients, cfg: &AdamConfig) -> Result<()> {
    if grads.0.len() != params.values.len() {
        return Err(Error::invalid("gradient buffer does not match parameters"));
    }
    if let Some(i) = grads.0.iter().position(|g| !g.is_finite()) {
        return Err(Error::non_finite(format!("gradient of {}", params.name_of(i))));
    }
    params.adam.step += 1;
    let t = params.adam.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    let ParameterSet { layout, values, adam } = params;
    for info in layout.iter().filter(|t| t.trainable) {
        for i in info.range() {
            let g = grads.0[i];
            adam.m[i] = cfg.beta1 * adam.m[i] + (1.0 - cfg.beta1) * g;
            adam.v[i] = cfg.beta2 * adam.v[i] + (1.0 - cfg.beta2) * g * g;
            let m_hat = adam.m[i] / c1;
            let v_hat = adam.v[i] / c2;
            values[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}
