//! Black-box objectives: classic test functions and a stochastic point-mass
//! control task driven by a tanh MLP policy.

mod functions;
mod pointmass;

pub use functions::{FunctionKind, TestFunction};
pub use pointmass::{MlpPolicy, PointMassEnv, PointMassTask, DEFAULT_HORIZON};

use crate::error::{Error, Result};
use crate::rng::mix_seed;

/// Outcome of one episode (or one function evaluation).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub ret: f64,
    pub steps: u64,
}

/// A score to maximise. Must be pure in `(params, episode_seed)`.
pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;

    fn evaluate(&self, params: &[f64], episode_seed: u64) -> Result<Evaluation>;

    /// True when the episode seed has no effect on the return.
    fn deterministic(&self) -> bool;
}

/// Median of `values`; the mean of the two central values for even lengths.
pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty slice");
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyEvaluation {
    pub median_return: f64,
    pub env_steps: u64,
}

/// Median return over `n_eval` rollouts with seeds `mix_seed(seed_base, i)`.
pub fn evaluate_policy_median(
    objective: &dyn Objective,
    params: &[f64],
    n_eval: usize,
    seed_base: u64,
) -> Result<PolicyEvaluation> {
    if n_eval == 0 {
        return Err(Error::Config("n_eval must be at least 1".into()));
    }
    let mut returns = Vec::with_capacity(n_eval);
    let mut env_steps = 0;
    for i in 0..n_eval {
        let e = objective.evaluate(params, mix_seed(seed_base, i as u64))?;
        returns.push(e.ret);
        env_steps += e.steps;
    }
    Ok(PolicyEvaluation {
        median_return: median(&mut returns),
        env_steps,
    })
}
