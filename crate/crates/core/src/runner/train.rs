use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use rand::Rng;
use rand_chacha::ChaCha20Rng;

use super::config::{ObjectiveKind, RunConfig};
use crate::env::{evaluate_policy_median, MlpPolicy, Objective};
use crate::error::{Error, Result};
use crate::es::{estimate_gradient_vanilla, BatchRecord};
use crate::iw::{run_batch_updates, UpdateDiag};
use crate::noise::NoiseTable;
use crate::optimizer::{apply_update, OptimizerState};
use crate::persist::{self, AggregateRow, IterationLog, LogWriter};
use crate::pool::{evaluate_batch, WorkerPool};
use crate::rng::{box_muller, mix_seed, stream};
use crate::ParamVector;

// stream ids / seed salts derived from the run seed
const HANDLE_STREAM: u64 = 1;
const INIT_STREAM: u64 = 2;
const TRAIN_EPISODE_SALT: u64 = 0x7261_696e;
const EVAL_EPISODE_SALT: u64 = 0x6576_616c;

/// Shared, reusable state across runs: the worker pool and noise tables.
pub struct Resources {
    pub pool: WorkerPool,
    tables: Mutex<HashMap<(u64, usize), Arc<NoiseTable>>>,
}

impl Resources {
    pub fn new(workers: usize) -> Result<Self> {
        Ok(Self {
            pool: WorkerPool::new(workers)?,
            tables: Mutex::new(HashMap::new()),
        })
    }

    /// Returns the (cached) table for `seed` and `len`, checked against `dim`.
    pub fn table(&self, seed: u64, len: usize, dim: usize) -> Result<Arc<NoiseTable>> {
        if len < dim {
            return Err(Error::Config(format!(
                "noise table length {len} is below model dimension {dim}"
            )));
        }
        let mut cache = self.tables.lock().expect("table cache poisoned");
        if let Some(t) = cache.get(&(seed, len)) {
            return Ok(Arc::clone(t));
        }
        let t = Arc::new(NoiseTable::build(seed, len, dim)?);
        cache.insert((seed, len), Arc::clone(&t));
        Ok(t)
    }
}

/// Episode seed base of the fixed evaluation set for a run.
pub fn eval_seed_base(run_seed: u64) -> u64 {
    mix_seed(run_seed, EVAL_EPISODE_SALT)
}

/// Starting parameters: column-normalised init for the policy, standard
/// normals for the test functions.
pub fn initial_params(cfg: &RunConfig, run_seed: u64) -> ParamVector {
    let mut rng = stream(run_seed, INIT_STREAM);
    match cfg.objective {
        ObjectiveKind::Pointmass => MlpPolicy::new(cfg.hidden).init_params(&mut rng),
        _ => (0..cfg.dim).map(|_| box_muller(rng.gen(), rng.gen()).0).collect(),
    }
}

/// Timing of one iteration.
#[derive(Debug, Clone, Copy, Default)]
pub struct StepTiming {
    pub total: Duration,
    pub weights: Duration,
}

/// Output of one iteration: the `K + 1` log rows and its timing.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub rows: Vec<IterationLog>,
    pub timing: StepTiming,
}

/// Training loop state for a single run seed.
pub struct Trainer<'r> {
    cfg: RunConfig,
    seed: u64,
    res: &'r Resources,
    table: Arc<NoiseTable>,
    objective: Arc<dyn Objective>,
    theta: ParamVector,
    opt: OptimizerState,
    handle_rng: ChaCha20Rng,
    iteration: u64,
    train_steps: u64,
    eval_steps: u64,
    wall: Duration,
    last_eval: f64,
}

impl<'r> Trainer<'r> {
    pub fn new(cfg: &RunConfig, seed: u64, res: &'r Resources) -> Result<Self> {
        cfg.validate()?;
        let objective = cfg.build_objective();
        let table = res.table(cfg.noise_seed, cfg.noise_table_len, objective.dim())?;
        Ok(Self {
            cfg: cfg.clone(),
            seed,
            res,
            table,
            theta: initial_params(cfg, seed),
            objective,
            opt: OptimizerState::new(),
            handle_rng: stream(seed, HANDLE_STREAM),
            iteration: 0,
            train_steps: 0,
            eval_steps: 0,
            wall: Duration::ZERO,
            last_eval: f64::NAN,
        })
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn objective(&self) -> &dyn Objective {
        self.objective.as_ref()
    }

    fn evaluate(&mut self) -> Result<f64> {
        let e = evaluate_policy_median(self.objective.as_ref(), &self.theta, self.cfg.n_eval, eval_seed_base(self.seed))?;
        self.eval_steps += e.env_steps;
        self.last_eval = e.median_return;
        Ok(e.median_return)
    }

    /// Evaluates the starting parameters and returns the iteration-0 row.
    pub fn initial_row(&mut self) -> Result<IterationLog> {
        let started = Instant::now();
        let ret = self.evaluate()?;
        self.wall += started.elapsed();
        let n = self.cfg.batch_size() as f64;
        Ok(IterationLog {
            iteration: 0,
            update_index: 0,
            train_env_steps_cum: self.train_steps,
            eval_env_steps_cum: self.eval_steps,
            wall_ms_cum: self.wall.as_secs_f64() * 1e3,
            median_eval_return: ret,
            ess: n,
            clip_fraction: 0.0,
            grad_norm: 0.0,
            weight_sum: n,
            skipped: false,
        })
    }

    /// Samples and evaluates one batch, applies its updates and, when
    /// `evaluate` is set, scores the new parameters.
    pub fn step(&mut self, evaluate: bool) -> Result<StepOutcome> {
        let started = Instant::now();
        let cfg = &self.cfg;
        let pool = &self.res.pool;
        let dim = self.theta.len();
        self.iteration += 1;
        if cfg.reset_adam_per_batch {
            self.opt.reset();
        }

        let count = if cfg.mirrored { cfg.batch_pairs } else { cfg.batch_size() };
        let handles = self.table.sample_handles(&mut self.handle_rng, count, dim, cfg.mirrored);
        let seed_base = mix_seed(mix_seed(self.seed, TRAIN_EPISODE_SALT), self.iteration);
        let eval = evaluate_batch(
            pool,
            &self.theta,
            &handles,
            cfg.sigma,
            &self.table,
            self.objective.as_ref(),
            seed_base,
            self.iteration,
        )?;
        let batch = BatchRecord::new(self.theta.clone(), handles, eval.raw_returns, cfg.fitness_shaping, eval.env_steps)?;
        self.train_steps += batch.env_steps;

        let pop = cfg.population();
        let diags = if cfg.iw_enabled {
            run_batch_updates(&mut self.theta, &batch, &cfg.iw(), &pop, &mut self.opt, &self.table, pool)?
        } else {
            let grad = estimate_gradient_vanilla(&batch, &pop, &self.table, pool);
            apply_update(&mut self.theta, &grad, &mut self.opt, &pop.optimizer, pop.learning_rate, pop.l2_coeff);
            vec![UpdateDiag {
                update_index: 0,
                ess: batch.len() as f64,
                clip_fraction: 0.0,
                grad_norm: grad.iter().map(|g| g * g).sum::<f64>().sqrt(),
                weight_sum: batch.len() as f64,
                skipped: None,
                weight_time: Duration::ZERO,
            }]
        };
        if self.theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("parameters became non-finite at iteration {}", self.iteration)));
        }
        let median = if evaluate { self.evaluate()? } else { self.last_eval };
        let elapsed = started.elapsed();
        self.wall += elapsed;

        let weights: Duration = diags.iter().map(|d| d.weight_time).sum();
        let rows = diags
            .into_iter()
            .map(|d| IterationLog {
                iteration: self.iteration,
                update_index: d.update_index as u64,
                train_env_steps_cum: self.train_steps,
                eval_env_steps_cum: self.eval_steps,
                wall_ms_cum: self.wall.as_secs_f64() * 1e3,
                median_eval_return: median,
                ess: d.ess,
                clip_fraction: d.clip_fraction,
                grad_norm: d.grad_norm,
                weight_sum: d.weight_sum,
                skipped: d.skipped.is_some(),
            })
            .collect();
        Ok(StepOutcome {
            rows,
            timing: StepTiming {
                total: elapsed,
                weights,
            },
        })
    }

    /// Runs all configured iterations, streaming rows to `log` if given.
    /// Only evaluated iterations (every `log_every`, plus the last) are logged.
    pub fn run(&mut self, mut log: Option<&mut LogWriter>) -> Result<Vec<IterationLog>> {
        let mut rows = vec![self.initial_row()?];
        if let Some(w) = log.as_deref_mut() {
            w.write_row(&rows[0])?;
            w.flush()?;
        }
        let total = self.cfg.iterations as u64;
        for t in 1..=total {
            let evaluate = t % self.cfg.log_every as u64 == 0 || t == total;
            let out = self.step(evaluate)?;
            if evaluate {
                if let Some(w) = log.as_deref_mut() {
                    for r in &out.rows {
                        w.write_row(r)?;
                    }
                    w.flush()?;
                }
                rows.extend(out.rows);
            }
        }
        Ok(rows)
    }

    pub fn into_params(self) -> ParamVector {
        self.theta
    }
}

/// Result of one seed's run.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub rows: Vec<IterationLog>,
    pub final_params: ParamVector,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub out_dir: PathBuf,
    pub runs: Vec<SeedRun>,
    pub aggregate: Vec<AggregateRow>,
}

fn run_seed(cfg: &RunConfig, seed: u64, res: &Resources, dir: &Path) -> Result<SeedRun> {
    let mut trainer = Trainer::new(cfg, seed, res)?;
    let mut log = LogWriter::create(dir.join(format!("run_{seed}.csv")))?;
    let rows = trainer.run(Some(&mut log))?;
    let final_params = trainer.into_params();
    persist::save_params(&dir.join(format!("params_final_{seed}.bin")), &final_params)?;
    log::info!(
        "seed {seed}: final median return {:.4}",
        rows.last().map_or(f64::NAN, |r| r.median_eval_return)
    );
    Ok(SeedRun {
        seed,
        rows,
        final_params,
    })
}

/// Trains one run per seed into `cfg.out_dir`:
/// `config.echo.json`, `run_<seed>.csv`, `params_final_<seed>.bin`,
/// `params_final.bin` (first seed) and `aggregate.csv`.
pub fn train(cfg: &RunConfig) -> Result<TrainOutput> {
    let res = Resources::new(cfg.workers)?;
    train_with(cfg, &res)
}

pub fn train_with(cfg: &RunConfig, res: &Resources) -> Result<TrainOutput> {
    cfg.validate()?;
    let dir = cfg.out_dir.clone();
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let echo = dir.join("config.echo.json");
    std::fs::write(&echo, cfg.to_json_pretty()).map_err(|e| Error::io(&echo, e))?;

    let runs: Vec<SeedRun> = if cfg.parallel_seeds && cfg.seeds.len() > 1 {
        let dir = dir.as_path();
        std::thread::scope(|s| {
            let handles: Vec<_> = cfg
                .seeds
                .iter()
                .map(|&seed| s.spawn(move || run_seed(cfg, seed, res, dir)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("seed thread panicked"))
                .collect::<Result<_>>()
        })?
    } else {
        cfg.seeds
            .iter()
            .map(|&seed| run_seed(cfg, seed, res, &dir))
            .collect::<Result<_>>()?
    };

    persist::save_params(&dir.join("params_final.bin"), &runs[0].final_params)?;
    let all: Vec<Vec<IterationLog>> = runs.iter().map(|r| r.rows.clone()).collect();
    let aggregate = persist::aggregate(&all)?;
    persist::write_aggregate(&dir.join("aggregate.csv"), &aggregate)?;
    Ok(TrainOutput {
        out_dir: dir,
        runs,
        aggregate,
    })
}

/// Median return of stored parameters under a config's objective and the
/// evaluation seeds of its first run seed.
pub fn evaluate_params(cfg: &RunConfig, params: &[f64]) -> Result<f64> {
    cfg.validate()?;
    let objective = cfg.build_objective();
    if params.len() != objective.dim() {
        return Err(Error::Config(format!(
            "parameter file has dimension {}, objective expects {}",
            params.len(),
            objective.dim()
        )));
    }
    Ok(evaluate_policy_median(objective.as_ref(), params, cfg.n_eval, eval_seed_base(cfg.seeds[0]))?.median_return)
}
