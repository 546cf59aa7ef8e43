//! Independent oracles shared by the integration tests. Nothing here calls
//! the library's weight or gradient code.
#![allow(dead_code)]

use iwes::noise::{NoiseTable, PerturbationHandle};
use iwes::rng::stream;
use rand::Rng;
use rand_chacha::ChaCha20Rng;

pub fn normal_pdf(x: f64, sigma: f64) -> f64 {
    (-(x * x) / (2.0 * sigma * sigma)).exp() / ((2.0 * std::f64::consts::PI).sqrt() * sigma)
}

/// Materialised perturbation `sigma * sign * window`.
pub fn perturbation(table: &NoiseTable, h: &PerturbationHandle, dim: usize, sigma: f64) -> Vec<f64> {
    table.values()[h.offset..h.offset + dim]
        .iter()
        .map(|w| sigma * f64::from(h.sign) * w)
        .collect()
}

/// Ratio of the two diagonal-Gaussian densities, evaluated coordinate by
/// coordinate in linear space.
pub fn density_ratio(eps: &[f64], theta_t: &[f64], theta_now: &[f64], sigma: f64) -> f64 {
    let mut num = 1.0;
    let mut den = 1.0;
    for j in 0..eps.len() {
        num *= normal_pdf(theta_t[j] + eps[j] - theta_now[j], sigma);
        den *= normal_pdf(eps[j], sigma);
    }
    num / den
}

/// Direct self-normalised weighted estimate from explicit vectors.
pub fn iw_gradient_direct(
    eps: &[Vec<f64>],
    fitness: &[f64],
    weights: &[f64],
    theta_t: &[f64],
    theta_now: &[f64],
    sigma: f64,
) -> Vec<f64> {
    let d = theta_t.len();
    let wsum: f64 = weights.iter().sum();
    let mut out = vec![0.0; d];
    for i in 0..eps.len() {
        for j in 0..d {
            let x = theta_t[j] + eps[i][j] - theta_now[j];
            out[j] += fitness[i] * x * weights[i];
        }
    }
    out.iter().map(|v| v / (sigma * sigma * wsum)).collect()
}

/// Random small importance-weighting problem.
pub struct Instance {
    pub table: NoiseTable,
    pub dim: usize,
    pub sigma: f64,
    pub handles: Vec<PerturbationHandle>,
    pub theta_t: Vec<f64>,
    pub theta_now: Vec<f64>,
    pub returns: Vec<f64>,
}

pub fn random_instance(rng: &mut ChaCha20Rng, table_seed: u64) -> Instance {
    let dim = rng.gen_range(1..=8);
    let n: usize = rng.gen_range(1..=16);
    let sigma = 10f64.powf(rng.gen_range(-2.0..0.0));
    let table = NoiseTable::build(table_seed, 4096, dim).unwrap();
    let mirrored = rng.gen_bool(0.5);
    let mut handles = table.sample_handles(rng, n.div_ceil(2), dim, mirrored);
    handles.truncate(n);
    if handles.len() < n {
        handles.extend(table.sample_handles(rng, n - handles.len(), dim, false));
    }
    let theta_t: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let theta_now: Vec<f64> = theta_t
        .iter()
        .map(|t| t + rng.gen_range(-1.5..1.5) * sigma)
        .collect();
    let returns = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
    Instance {
        table,
        dim,
        sigma,
        handles,
        theta_t,
        theta_now,
        returns,
    }
}

pub fn instances(count: usize, seed: u64) -> Vec<Instance> {
    let mut rng = stream(seed, 77);
    (0..count)
        .map(|i| random_instance(&mut rng, seed.wrapping_add(i as u64)))
        .collect()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }
}
