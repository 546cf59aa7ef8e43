//! In-process master/worker pool.
//!
//! The master thread owns all mutable state and hands out pure tasks
//! described by index spans. Workers send back scalars (returns or
//! log-weights) and the master merges them by index, so every aggregate is
//! independent of the pool size and of completion order.

use std::ops::Range;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::env::Objective;
use crate::error::{Error, Result};
use crate::noise::{NoiseTable, PerturbationHandle};
use crate::rng::mix_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    Rollout,
    WeightChunk,
}

/// What the master broadcasts for one unit of work.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskSpec {
    pub kind: TaskKind,
    pub param_version: u64,
    pub span: Range<usize>,
    pub episode_seed_base: u64,
}

/// What a worker sends back.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskResult {
    pub span: Range<usize>,
    pub values: Vec<f64>,
    pub env_steps: u64,
}

/// Returns and interaction count for one evaluated batch.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchEvaluation {
    pub raw_returns: Vec<f64>,
    pub env_steps: u64,
}

pub struct WorkerPool {
    size: usize,
    #[cfg(feature = "parallel")]
    pool: Option<rayon::ThreadPool>,
}

impl std::fmt::Debug for WorkerPool {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WorkerPool").field("size", &self.size).finish()
    }
}

/// Number of hardware threads, at least 1.
pub fn available_workers() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

impl WorkerPool {
    /// Creates a pool with `workers` threads (`0` = one per hardware thread).
    ///
    /// Without the `parallel` feature the size is recorded for task splitting
    /// but all tasks run on the calling thread.
    pub fn new(workers: usize) -> Result<Self> {
        let size = if workers == 0 {
            available_workers()
        } else {
            workers
        };
        #[cfg(feature = "parallel")]
        {
            let pool = if size > 1 {
                Some(
                    rayon::ThreadPoolBuilder::new()
                        .num_threads(size)
                        .thread_name(|i| format!("iwes-worker-{i}"))
                        .build()
                        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?,
                )
            } else {
                None
            };
            Ok(Self { size, pool })
        }
        #[cfg(not(feature = "parallel"))]
        Ok(Self { size })
    }

    /// Single-worker pool; everything runs inline.
    pub fn sequential() -> Self {
        Self {
            size: 1,
            #[cfg(feature = "parallel")]
            pool: None,
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Splits `0..n` into `ceil(n / size)`-long contiguous spans.
    pub fn spans(&self, n: usize) -> Vec<Range<usize>> {
        split_spans(n, self.size)
    }

    /// Runs `f` on every task and returns the results in task order.
    pub fn run<T, F>(&self, tasks: &[TaskSpec], f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&TaskSpec) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            return pool.install(|| tasks.par_iter().map(&f).collect());
        }
        tasks.iter().map(f).collect()
    }

    /// Fills `out` in contiguous chunks, `f(start, chunk)` writing
    /// `out[start..start + chunk.len()]`. Each element must depend only on its
    /// own index for the result to be pool-size independent.
    pub fn fill_chunks<F>(&self, out: &mut [f64], min_chunk: usize, f: F)
    where
        F: Fn(usize, &mut [f64]) + Sync + Send,
    {
        if out.is_empty() {
            return;
        }
        let chunk = out.len().div_ceil(self.size).max(min_chunk.max(1));
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            pool.install(|| {
                out.par_chunks_mut(chunk)
                    .enumerate()
                    .for_each(|(i, c)| f(i * chunk, c))
            });
            return;
        }
        for (i, c) in out.chunks_mut(chunk).enumerate() {
            f(i * chunk, c);
        }
    }
}

/// `ceil(n / parts)`-long contiguous spans covering `0..n` exactly once.
pub fn split_spans(n: usize, parts: usize) -> Vec<Range<usize>> {
    if n == 0 {
        return Vec::new();
    }
    let len = n.div_ceil(parts.max(1));
    (0..n).step_by(len).map(|s| s..(s + len).min(n)).collect()
}

/// Evaluates `objective` at `theta + sigma * sign_i * window_i` for every
/// handle. Item `i` runs with episode seed `mix_seed(seed_base, i)`.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_batch(
    pool: &WorkerPool,
    theta: &[f64],
    handles: &[PerturbationHandle],
    sigma: f64,
    table: &NoiseTable,
    objective: &dyn Objective,
    seed_base: u64,
    param_version: u64,
) -> Result<BatchEvaluation> {
    let dim = theta.len();
    if objective.dim() != dim {
        return Err(Error::Config(format!(
            "objective dimension {} does not match parameter dimension {dim}",
            objective.dim()
        )));
    }
    let tasks: Vec<TaskSpec> = pool
        .spans(handles.len())
        .into_iter()
        .map(|span| TaskSpec {
            kind: TaskKind::Rollout,
            param_version,
            span,
            episode_seed_base: seed_base,
        })
        .collect();

    let results = pool.run(&tasks, |task| -> Result<TaskResult> {
        let mut params = vec![0.0; dim];
        let mut values = Vec::with_capacity(task.span.len());
        let mut env_steps = 0;
        for i in task.span.clone() {
            let h = &handles[i];
            let scale = sigma * h.sign_f64();
            for ((p, &t), &w) in params.iter_mut().zip(theta).zip(table.window(h, dim)) {
                *p = t + scale * w;
            }
            let eval = objective
                .evaluate(&params, mix_seed(task.episode_seed_base, i as u64))
                .map_err(|e| Error::Objective {
                    index: i,
                    reason: e.to_string(),
                })?;
            values.push(eval.ret);
            env_steps += eval.steps;
        }
        Ok(TaskResult {
            span: task.span.clone(),
            values,
            env_steps,
        })
    });

    let mut raw_returns = Vec::with_capacity(handles.len());
    let mut env_steps = 0;
    for r in results {
        let r = r?;
        debug_assert_eq!(r.span.start, raw_returns.len());
        raw_returns.extend(r.values);
        env_steps += r.env_steps;
    }
    Ok(BatchEvaluation {
        raw_returns,
        env_steps,
    })
}

/// Computes `weight_fn(i)` for `i in 0..n` in pool-sized chunks and returns
/// the values in index order.
pub fn parallel_map_weights<F>(pool: &WorkerPool, n: usize, param_version: u64, weight_fn: F) -> Result<Vec<f64>>
where
    F: Fn(usize) -> Result<f64> + Sync + Send,
{
    let tasks: Vec<TaskSpec> = pool
        .spans(n)
        .into_iter()
        .map(|span| TaskSpec {
            kind: TaskKind::WeightChunk,
            param_version,
            span,
            episode_seed_base: 0,
        })
        .collect();
    let results = pool.run(&tasks, |task| -> Result<TaskResult> {
        let values = task.span.clone().map(&weight_fn).collect::<Result<Vec<_>>>()?;
        Ok(TaskResult {
            span: task.span.clone(),
            values,
            env_steps: 0,
        })
    });
    let mut out = Vec::with_capacity(n);
    for r in results {
        out.extend(r?.values);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{FunctionKind, TestFunction};

    #[test]
    fn spans_cover_each_index_once() {
        for n in [0, 1, 7, 64, 257] {
            for parts in [1, 2, 3, 8, 48] {
                let spans = split_spans(n, parts);
                let mut seen = vec![0u8; n];
                for s in &spans {
                    for i in s.clone() {
                        seen[i] += 1;
                    }
                }
                assert!(seen.iter().all(|&c| c == 1), "n={n} parts={parts}");
                assert!(spans.len() <= parts.max(1));
            }
        }
    }

    #[test]
    fn identity_weights_in_order() {
        for size in [1, 3, 8] {
            let pool = WorkerPool::new(size).unwrap();
            let out = parallel_map_weights(&pool, 100, 0, |i| Ok(i as f64)).unwrap();
            assert_eq!(out, (0..100).map(|i| i as f64).collect::<Vec<_>>());
        }
    }

    #[test]
    fn weight_errors_propagate() {
        let pool = WorkerPool::new(2).unwrap();
        let r = parallel_map_weights(&pool, 10, 0, |i| {
            if i == 7 {
                Err(Error::Numeric("boom".into()))
            } else {
                Ok(0.0)
            }
        });
        assert!(matches!(r, Err(Error::Numeric(_))));
    }

    #[test]
    fn sphere_return_of_single_handle() {
        let table = NoiseTable::from_values(0, vec![0.5, -2.0, 1.0, 3.0]);
        let f = TestFunction::new(FunctionKind::Sphere, 3);
        let h = [PerturbationHandle::new(1, 1)];
        let out = evaluate_batch(&WorkerPool::sequential(), &[0.0; 3], &h, 1.0, &table, &f, 0, 0).unwrap();
        assert_eq!(out.raw_returns, vec![-(4.0 + 1.0 + 9.0)]);
        assert_eq!(out.env_steps, 1);
    }

    #[test]
    fn fill_chunks_covers_output() {
        for size in [1, 4] {
            let pool = WorkerPool::new(size).unwrap();
            let mut out = vec![0.0; 1001];
            pool.fill_chunks(&mut out, 16, |start, c| {
                for (k, v) in c.iter_mut().enumerate() {
                    *v = (start + k) as f64;
                }
            });
            assert!(out.iter().enumerate().all(|(i, &v)| v == i as f64));
        }
    }
}
