use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmsGradConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AmsGradConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-2,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// AMSGrad moment state.
///
/// `m ← β₁m + (1−β₁)g`, `v ← β₂v + (1−β₂)g²`, `v̂ ← max(v̂, v)`,
/// `θ ← θ − lr·m/(√v̂ + ε)`; no bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct AmsGradState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub v_hat: Vec<f64>,
    pub step: usize,
}

impl AmsGradState {
    pub fn new(n_params: usize) -> Self {
        Self {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            v_hat: vec![0.0; n_params],
            step: 0,
        }
    }
}

pub fn amsgrad_step(
    state: &mut AmsGradState,
    params: &mut [f64],
    grads: &[f64],
    config: &AmsGradConfig,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::dim(format!(
            "{} parameters, {} gradients, state for {}",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    let AmsGradConfig {
        learning_rate,
        beta1,
        beta2,
        epsilon,
    } = *config;
    state.step += 1;
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g * g;
        state.v_hat[i] = state.v_hat[i].max(state.v[i]);
        params[i] -= learning_rate * state.m[i] / (state.v_hat[i].sqrt() + epsilon);
    }
    Ok(())
}
