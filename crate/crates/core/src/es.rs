//! Plain ES: fitness shaping, the score-function gradient estimate and the
//! batch record that importance-weighted updates reuse.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{NoiseTable, PerturbationHandle};
use crate::optimizer::OptimizerKind;
use crate::pool::WorkerPool;
use crate::ParamVector;

/// Coordinates per gradient task; below this the split is not worth it.
pub(crate) const MIN_COORD_CHUNK: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitnessShaping {
    #[default]
    CenteredRank,
    Raw,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PopulationConfig {
    pub sigma: f64,
    pub batch_pairs: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub l2_coeff: f64,
    pub fitness_shaping: FitnessShaping,
}

impl Default for PopulationConfig {
    fn default() -> Self {
        Self {
            sigma: 0.02,
            batch_pairs: 128,
            learning_rate: 1e-4,
            optimizer: OptimizerKind::default(),
            l2_coeff: 0.0,
            fitness_shaping: FitnessShaping::CenteredRank,
        }
    }
}

impl PopulationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!("sigma must be positive, got {}", self.sigma)));
        }
        // zero is allowed so that frozen-parameter runs can be expressed
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be non-negative, got {}",
                self.learning_rate
            )));
        }
        if self.batch_pairs == 0 {
            return Err(Error::Config("batch_pairs must be at least 1".into()));
        }
        if self.l2_coeff.is_nan() || self.l2_coeff < 0.0 {
            return Err(Error::Config(format!("l2_coeff must be >= 0, got {}", self.l2_coeff)));
        }
        self.optimizer.validate()
    }
}

/// Evidence gathered at one base point. Never mutated by the updates that
/// consume it.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchRecord {
    pub base_params: ParamVector,
    pub handles: Vec<PerturbationHandle>,
    pub raw_returns: Vec<f64>,
    pub shaped_fitness: Vec<f64>,
    pub env_steps: u64,
}

impl BatchRecord {
    /// Builds a record, shaping `raw_returns` once.
    pub fn new(
        base_params: ParamVector,
        handles: Vec<PerturbationHandle>,
        raw_returns: Vec<f64>,
        shaping: FitnessShaping,
        env_steps: u64,
    ) -> Result<Self> {
        if handles.is_empty() || handles.len() != raw_returns.len() {
            return Err(Error::Config(format!(
                "batch needs matching non-empty handles ({}) and returns ({})",
                handles.len(),
                raw_returns.len()
            )));
        }
        let shaped_fitness = shape_fitness(&raw_returns, shaping);
        Ok(Self {
            base_params,
            handles,
            raw_returns,
            shaped_fitness,
            env_steps,
        })
    }

    pub fn len(&self) -> usize {
        self.handles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.handles.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.base_params.len()
    }
}

/// Maps returns to fitness values. Centered ranks place the sorted returns on
/// the uniform grid `rank / (n - 1) - 0.5`; ties are ranked by index.
pub fn shape_fitness(raw_returns: &[f64], shaping: FitnessShaping) -> Vec<f64> {
    match shaping {
        FitnessShaping::Raw => raw_returns.to_vec(),
        FitnessShaping::CenteredRank => {
            let n = raw_returns.len();
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| raw_returns[a].total_cmp(&raw_returns[b]));
            let mut out = vec![0.0; n];
            if n > 1 {
                let denom = (n - 1) as f64;
                for (rank, &i) in order.iter().enumerate() {
                    out[i] = rank as f64 / denom - 0.5;
                }
            }
            out
        }
    }
}

/// Score-function gradient estimate at the batch base:
/// `sum_i F_i * sign_i * window_i / (n * sigma)`, an ascent direction.
pub fn estimate_gradient_vanilla(
    batch: &BatchRecord,
    cfg: &PopulationConfig,
    table: &NoiseTable,
    pool: &WorkerPool,
) -> ParamVector {
    weighted_window_sum(batch, &batch.shaped_fitness, None, table, pool, batch.len() as f64 * cfg.sigma)
}

/// `out[j] = sum_i coef_i * sign_i * window_i[j] / denom` with optional extra
/// per-item factors, accumulated in index order for every coordinate.
pub(crate) fn weighted_window_sum(
    batch: &BatchRecord,
    fitness: &[f64],
    factors: Option<&[f64]>,
    table: &NoiseTable,
    pool: &WorkerPool,
    denom: f64,
) -> ParamVector {
    let dim = batch.dim();
    let coefs: Vec<f64> = batch
        .handles
        .iter()
        .enumerate()
        .map(|(i, h)| {
            let f = factors.map_or(fitness[i], |c| fitness[i] * c[i]);
            f * h.sign_f64()
        })
        .collect();
    let noise = table.values();
    let mut out = vec![0.0; dim];
    pool.fill_chunks(&mut out, MIN_COORD_CHUNK, |start, acc| {
        for (h, &c) in batch.handles.iter().zip(&coefs) {
            let w = &noise[h.offset + start..h.offset + start + acc.len()];
            for (a, &x) in acc.iter_mut().zip(w) {
                *a += c * x;
            }
        }
        for a in acc.iter_mut() {
            *a /= denom;
        }
    });
    out
}
