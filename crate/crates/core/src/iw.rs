//! Importance-weighted reuse of a batch.
//!
//! After the plain ES step at the batch base `theta_t`, the same perturbations
//! are reweighted for the moved mean `theta_now`. For a Gaussian population
//! with shared `sigma` the normalising constants cancel, leaving
//!
//! ```text
//! log c_i = (|eps_i|^2 - |eps_i - delta|^2) / (2 sigma^2),   delta = theta_now - theta_t
//! ```
//!
//! `|eps_i|^2` comes from the noise table's prefix sums in O(1); only the
//! numerator term is O(dim). Weights are clipped at 1 and the gradient is
//! self-normalised by their sum.

use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::es::{estimate_gradient_vanilla, BatchRecord, PopulationConfig, MIN_COORD_CHUNK};
use crate::noise::{NoiseTable, PerturbationHandle};
use crate::optimizer::{apply_update, OptimizerState};
use crate::pool::{parallel_map_weights, WorkerPool};
use crate::ParamVector;

#[derive(Debug, Clone, PartialEq)]
pub struct IwConfig {
    /// Additional importance-weighted updates after the plain one.
    pub k: usize,
    /// Stop reusing the batch once `ess < ess_min_fraction * n`. 0 disables.
    pub ess_min_fraction: f64,
    /// Absolute floor on the weight sum; `None` means `1e-8 * n`.
    pub weight_sum_min: Option<f64>,
    /// Weight raw returns instead of the shaped fitness in IW updates.
    pub uses_raw_returns: bool,
}

impl Default for IwConfig {
    fn default() -> Self {
        Self {
            k: 0,
            ess_min_fraction: 0.0,
            weight_sum_min: None,
            uses_raw_returns: false,
        }
    }
}

impl IwConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.ess_min_fraction) {
            return Err(Error::Config(format!(
                "ess_min_fraction must lie in [0, 1], got {}",
                self.ess_min_fraction
            )));
        }
        if let Some(m) = self.weight_sum_min {
            if !(m > 0.0 && m.is_finite()) {
                return Err(Error::Config(format!("weight_sum_min must be positive, got {m}")));
            }
        }
        Ok(())
    }

    pub fn weight_sum_threshold(&self, n: usize) -> f64 {
        self.weight_sum_min.unwrap_or(1e-8 * n as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceWeights {
    /// Clipped weights `min(1, exp(log c_i))`.
    pub weights: Vec<f64>,
    /// Unclipped log-weights; `-inf` marks a non-finite computation.
    pub log_weights_raw: Vec<f64>,
    pub weight_sum: f64,
    pub ess: f64,
    pub clip_fraction: f64,
}

/// Log importance weight of one stored perturbation at `theta_now`.
pub fn compute_log_weight(
    handle: &PerturbationHandle,
    theta_t: &[f64],
    theta_now: &[f64],
    sigma: f64,
    table: &NoiseTable,
) -> Result<f64> {
    let dim = theta_t.len();
    assert_eq!(dim, theta_now.len(), "parameter shape mismatch");
    // the two norms come from different summations; equal parameters must give exactly 1
    if theta_t == theta_now {
        return Ok(0.0);
    }
    let s = sigma * handle.sign_f64();
    let eps_sq = sigma * sigma * table.perturbation_sq_norm(handle, dim);
    let shifted_sq = shifted_sq_norm(table.window(handle, dim), s, theta_t, theta_now);
    finish_log_weight(eps_sq, shifted_sq, sigma)
}

/// Same quantity with the denominator summed directly in O(dim).
pub fn compute_log_weight_direct(
    handle: &PerturbationHandle,
    theta_t: &[f64],
    theta_now: &[f64],
    sigma: f64,
    table: &NoiseTable,
) -> Result<f64> {
    if theta_t == theta_now {
        return Ok(0.0);
    }
    let w = table.window(handle, theta_t.len());
    let s = sigma * handle.sign_f64();
    let eps_sq: f64 = w.iter().map(|x| (s * x) * (s * x)).sum();
    finish_log_weight(eps_sq, shifted_sq_norm(w, s, theta_t, theta_now), sigma)
}

#[inline]
fn shifted_sq_norm(window: &[f64], scale: f64, theta_t: &[f64], theta_now: &[f64]) -> f64 {
    window
        .iter()
        .zip(theta_t.iter().zip(theta_now))
        .map(|(&w, (&t, &n))| {
            let d = scale * w - (n - t);
            d * d
        })
        .sum()
}

fn finish_log_weight(eps_sq: f64, shifted_sq: f64, sigma: f64) -> Result<f64> {
    let lw = (eps_sq - shifted_sq) / (2.0 * sigma * sigma);
    if lw.is_finite() {
        Ok(lw)
    } else {
        Err(Error::Numeric(format!(
            "non-finite log weight from |eps|^2={eps_sq}, |eps-delta|^2={shifted_sq}"
        )))
    }
}

/// `(sum c)^2 / sum c^2`.
pub fn effective_sample_size(weights: &[f64]) -> Result<f64> {
    let sum: f64 = weights.iter().sum();
    let sq: f64 = weights.iter().map(|c| c * c).sum();
    if sq > 0.0 && sum.is_finite() {
        Ok(sum * sum / sq)
    } else {
        Err(Error::DegenerateBatch {
            weight_sum: sum,
            threshold: 0.0,
        })
    }
}

/// Clipped importance weights of every batch member at `theta_now`,
/// computed across the pool and assembled in index order.
///
/// Non-finite log-weights become weight 0. A weight sum below
/// `weight_sum_min` yields [`Error::DegenerateBatch`].
pub fn compute_weights(
    batch: &BatchRecord,
    theta_now: &[f64],
    sigma: f64,
    table: &NoiseTable,
    pool: &WorkerPool,
    weight_sum_min: f64,
) -> Result<ImportanceWeights> {
    let n = batch.len();
    let log_weights_raw = parallel_map_weights(pool, n, 0, |i| {
        match compute_log_weight(&batch.handles[i], &batch.base_params, theta_now, sigma, table) {
            Ok(lw) => Ok(lw),
            Err(Error::Numeric(msg)) => {
                log::warn!("importance weight {i} treated as zero: {msg}");
                Ok(f64::NEG_INFINITY)
            }
            Err(e) => Err(e),
        }
    })?;
    let weights: Vec<f64> = log_weights_raw.iter().map(|&lw| lw.exp().min(1.0)).collect();
    let clipped = log_weights_raw.iter().filter(|&&lw| lw > 0.0).count();
    let clip_fraction = clipped as f64 / n as f64;
    let weight_sum: f64 = weights.iter().sum();
    if weight_sum.is_nan() || weight_sum < weight_sum_min || weight_sum == 0.0 {
        return Err(Error::DegenerateBatch {
            weight_sum,
            threshold: weight_sum_min,
        });
    }
    let ess = effective_sample_size(&weights)?;
    Ok(ImportanceWeights {
        weights,
        log_weights_raw,
        weight_sum,
        ess,
        clip_fraction,
    })
}

/// Self-normalised importance-weighted gradient at `theta_now`:
/// `sum_i F_i c_i (theta_t + eps_i - theta_now) / (sigma^2 sum_i c_i)`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_gradient_iw(
    batch: &BatchRecord,
    theta_now: &[f64],
    weights: &ImportanceWeights,
    fitness: &[f64],
    sigma: f64,
    table: &NoiseTable,
    pool: &WorkerPool,
    weight_sum_min: f64,
) -> Result<ParamVector> {
    let dim = batch.dim();
    assert_eq!(theta_now.len(), dim, "parameter shape mismatch");
    assert_eq!(weights.weights.len(), batch.len());
    let weight_sum: f64 = weights.weights.iter().sum();
    if weight_sum.is_nan() || weight_sum < weight_sum_min || weight_sum == 0.0 {
        return Err(Error::DegenerateBatch {
            weight_sum,
            threshold: weight_sum_min,
        });
    }
    let coefs: Vec<f64> = fitness.iter().zip(&weights.weights).map(|(f, c)| f * c).collect();
    let coef_sum: f64 = coefs.iter().sum();
    let noise = table.values();
    let denom = sigma * sigma * weight_sum;
    let mut out = vec![0.0; dim];
    pool.fill_chunks(&mut out, MIN_COORD_CHUNK, |start, acc| {
        for (h, &a) in batch.handles.iter().zip(&coefs) {
            let sa = a * h.sign_f64();
            let w = &noise[h.offset + start..h.offset + start + acc.len()];
            for (x, &e) in acc.iter_mut().zip(w) {
                *x += sa * e;
            }
        }
        for (j, x) in acc.iter_mut().enumerate() {
            let shift = batch.base_params[start + j] - theta_now[start + j];
            *x = (coef_sum * shift + sigma * *x) / denom;
        }
    });
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkipReason {
    DegenerateBatch,
    LowEss,
    /// An earlier update of the same batch was skipped.
    Abandoned,
}

/// Diagnostics for one of the `K + 1` update slots of a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateDiag {
    pub update_index: usize,
    pub ess: f64,
    pub clip_fraction: f64,
    pub grad_norm: f64,
    pub weight_sum: f64,
    pub skipped: Option<SkipReason>,
    /// Time spent computing importance weights for this update.
    pub weight_time: Duration,
}

impl UpdateDiag {
    fn skipped(update_index: usize, reason: SkipReason, weight_sum: f64, clip_fraction: f64, ess: f64) -> Self {
        Self {
            update_index,
            ess,
            clip_fraction,
            grad_norm: 0.0,
            weight_sum,
            skipped: Some(reason),
            weight_time: Duration::ZERO,
        }
    }
}

fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// One plain ES update followed by up to `K` importance-weighted updates on
/// the same batch. Weights are always taken against the batch base. Returns
/// exactly `K + 1` diagnostics; slots after an early stop are marked skipped.
#[allow(clippy::too_many_arguments)]
pub fn run_batch_updates(
    theta: &mut ParamVector,
    batch: &BatchRecord,
    iw_cfg: &IwConfig,
    pop_cfg: &PopulationConfig,
    opt: &mut OptimizerState,
    table: &NoiseTable,
    pool: &WorkerPool,
) -> Result<Vec<UpdateDiag>> {
    let n = batch.len();
    let nf = n as f64;
    let sum_min = iw_cfg.weight_sum_threshold(n);
    let fitness = if iw_cfg.uses_raw_returns {
        &batch.raw_returns
    } else {
        &batch.shaped_fitness
    };
    let step = |theta: &mut ParamVector, grad: &[f64], opt: &mut OptimizerState| {
        apply_update(theta, grad, opt, &pop_cfg.optimizer, pop_cfg.learning_rate, pop_cfg.l2_coeff)
    };

    let mut diags = Vec::with_capacity(iw_cfg.k + 1);
    let grad = estimate_gradient_vanilla(batch, pop_cfg, table, pool);
    step(theta, &grad, opt);
    diags.push(UpdateDiag {
        update_index: 0,
        ess: nf,
        clip_fraction: 0.0,
        grad_norm: l2_norm(&grad),
        weight_sum: nf,
        skipped: None,
        weight_time: Duration::ZERO,
    });

    for k in 1..=iw_cfg.k {
        let started = Instant::now();
        let weights = match compute_weights(batch, theta, pop_cfg.sigma, table, pool, sum_min) {
            Ok(w) => w,
            Err(Error::DegenerateBatch { weight_sum, threshold }) => {
                log::warn!("update {k}: weight sum {weight_sum:e} below {threshold:e}, abandoning batch");
                let ws = if weight_sum.is_finite() { weight_sum } else { 0.0 };
                diags.push(UpdateDiag::skipped(k, SkipReason::DegenerateBatch, ws, 0.0, 0.0));
                break;
            }
            Err(e) => return Err(e),
        };
        let weight_time = started.elapsed();
        if iw_cfg.ess_min_fraction > 0.0 && weights.ess < iw_cfg.ess_min_fraction * nf {
            log::debug!("update {k}: ess {:.2} below guard, abandoning batch", weights.ess);
            diags.push(UpdateDiag::skipped(
                k,
                SkipReason::LowEss,
                weights.weight_sum,
                weights.clip_fraction,
                weights.ess,
            ));
            break;
        }
        let grad = estimate_gradient_iw(batch, theta, &weights, fitness, pop_cfg.sigma, table, pool, sum_min)?;
        step(theta, &grad, opt);
        diags.push(UpdateDiag {
            update_index: k,
            ess: weights.ess,
            clip_fraction: weights.clip_fraction,
            grad_norm: l2_norm(&grad),
            weight_sum: weights.weight_sum,
            skipped: None,
            weight_time,
        });
    }
    for k in diags.len()..=iw_cfg.k {
        diags.push(UpdateDiag::skipped(k, SkipReason::Abandoned, 0.0, 0.0, 0.0));
    }
    Ok(diags)
}
