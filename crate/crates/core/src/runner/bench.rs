use std::path::Path;

use super::config::{ObjectiveKind, RunConfig};
use super::train::{Resources, Trainer};
use crate::env::median;
use crate::error::{Error, Result};
use crate::persist::{self, fmt_real};

/// Minimum timed iterations per `(hidden, K)` cell.
pub const MIN_BENCH_ITERATIONS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputRow {
    pub hidden: usize,
    pub k: usize,
    pub iterations: usize,
    pub median_iter_ms: f64,
    /// `median_iter_ms` divided by the `K = 0` value at the same width.
    pub ratio: f64,
    pub median_weight_ms: f64,
}

/// Times full training iterations of the point-mass task for every
/// `(hidden, K)` pair and normalises by plain ES at the same width.
///
/// All K variants of one width advance round-robin, one iteration each, so
/// slow drifts in machine load hit every variant alike. One untimed warm-up
/// iteration precedes the measurements.
pub fn bench_throughput(cfg: &RunConfig, k_values: &[usize], hidden_values: &[usize], res: &Resources) -> Result<Vec<ThroughputRow>> {
    if k_values.is_empty() || hidden_values.is_empty() {
        return Err(Error::Config("bench needs at least one K and one hidden value".into()));
    }
    let iterations = cfg.iterations.max(MIN_BENCH_ITERATIONS);
    let seed = cfg.seeds[0];
    let mut rows = Vec::new();
    for &hidden in hidden_values {
        let mut ks: Vec<usize> = vec![0];
        ks.extend(k_values.iter().copied().filter(|&k| k != 0));
        let mut trainers = ks
            .iter()
            .map(|&k| {
                let c = RunConfig {
                    objective: ObjectiveKind::Pointmass,
                    hidden,
                    k,
                    iw_enabled: true,
                    ..cfg.clone()
                };
                Trainer::new(&c, seed, res)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut totals = vec![Vec::with_capacity(iterations); ks.len()];
        let mut weights = vec![Vec::with_capacity(iterations); ks.len()];
        for t in trainers.iter_mut() {
            t.step(true)?;
        }
        for _ in 0..iterations {
            for (i, t) in trainers.iter_mut().enumerate() {
                let out = t.step(true)?;
                totals[i].push(out.timing.total.as_secs_f64() * 1e3);
                weights[i].push(out.timing.weights.as_secs_f64() * 1e3);
            }
        }
        let medians: Vec<f64> = totals.iter_mut().map(|v| median(v)).collect();
        for &k in k_values {
            let i = ks.iter().position(|&x| x == k).expect("K listed");
            rows.push(ThroughputRow {
                hidden,
                k,
                iterations,
                median_iter_ms: medians[i],
                ratio: if k == 0 { 1.0 } else { medians[i] / medians[0] },
                median_weight_ms: median(&mut weights[i]),
            });
        }
        log::info!("bench hidden={hidden} done");
    }
    Ok(rows)
}

pub const THROUGHPUT_COLUMNS: [&str; 6] = ["hidden", "K", "iterations", "median_iter_ms", "ratio", "median_weight_ms"];

pub fn write_throughput(path: &Path, rows: &[ThroughputRow]) -> Result<()> {
    let lines: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.hidden.to_string(),
                r.k.to_string(),
                r.iterations.to_string(),
                fmt_real(r.median_iter_ms),
                fmt_real(r.ratio),
                fmt_real(r.median_weight_ms),
            ]
        })
        .collect();
    persist::write_table(path, &THROUGHPUT_COLUMNS, &lines)
}
