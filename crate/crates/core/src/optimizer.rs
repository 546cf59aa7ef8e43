//! SGD and Adam steps on an ascent direction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum OptimizerKind {
    Sgd,
    Adam {
        #[serde(default = "default_beta1")]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_eps")]
        epsilon: f64,
    },
}

fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}

impl Default for OptimizerKind {
    fn default() -> Self {
        OptimizerKind::Adam {
            beta1: default_beta1(),
            beta2: default_beta2(),
            epsilon: default_eps(),
        }
    }
}

impl OptimizerKind {
    pub fn validate(&self) -> Result<()> {
        if let OptimizerKind::Adam { beta1, beta2, epsilon } = *self {
            let ok = (0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2) && epsilon > 0.0;
            if !ok {
                return Err(Error::Config(format!(
                    "adam needs beta1, beta2 in [0, 1) and epsilon > 0, got ({beta1}, {beta2}, {epsilon})"
                )));
            }
        }
        Ok(())
    }
}

/// Adam moments are allocated lazily and zero-initialised.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OptimizerState {
    pub step_count: u64,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
}

impl OptimizerState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn reset(&mut self) {
        *self = Self::default();
    }
}

/// Moves `theta` along `grad` (ascent). The L2 term pulls towards zero:
/// SGD applies `theta += lr * grad - lr * l2 * theta`, Adam runs its
/// bias-corrected update on `grad - l2 * theta`.
pub fn apply_update(
    theta: &mut [f64],
    grad: &[f64],
    state: &mut OptimizerState,
    kind: &OptimizerKind,
    learning_rate: f64,
    l2_coeff: f64,
) {
    assert_eq!(theta.len(), grad.len(), "gradient shape mismatch");
    state.step_count += 1;
    match *kind {
        OptimizerKind::Sgd => {
            for (t, &g) in theta.iter_mut().zip(grad) {
                *t += learning_rate * g - learning_rate * l2_coeff * *t;
            }
        }
        OptimizerKind::Adam { beta1, beta2, epsilon } => {
            if state.first_moment.len() != theta.len() {
                state.first_moment = vec![0.0; theta.len()];
                state.second_moment = vec![0.0; theta.len()];
            }
            let t = state.step_count as i32;
            let c1 = 1.0 - beta1.powi(t);
            let c2 = 1.0 - beta2.powi(t);
            for ((th, &g), (m, v)) in theta
                .iter_mut()
                .zip(grad)
                .zip(state.first_moment.iter_mut().zip(state.second_moment.iter_mut()))
            {
                let g = g - l2_coeff * *th;
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *th += learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
    }
}
