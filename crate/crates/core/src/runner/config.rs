use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::env::{FunctionKind, Objective, PointMassTask, TestFunction};
use crate::error::{Error, Result};
use crate::es::{FitnessShaping, PopulationConfig};
use crate::iw::IwConfig;
use crate::noise::DEFAULT_TABLE_LEN;
use crate::optimizer::OptimizerKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveKind {
    Sphere,
    Rastrigin,
    Rosenbrock,
    Pointmass,
}

/// Everything a run needs, read from one JSON document. Unknown keys are
/// rejected; missing keys take the defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    // objective
    pub objective: ObjectiveKind,
    pub dim: usize,
    pub hidden: usize,
    pub horizon: usize,
    pub n_eval: usize,

    // noise table
    pub noise_seed: u64,
    pub noise_table_len: usize,
    pub mirrored: bool,

    // population / optimizer
    pub sigma: f64,
    pub batch_pairs: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub l2_coeff: f64,
    pub fitness_shaping: FitnessShaping,

    // importance-weighted reuse
    #[serde(rename = "K")]
    pub k: usize,
    pub ess_min_fraction: f64,
    pub weight_sum_min: Option<f64>,
    pub iw_uses_raw_returns: bool,
    pub reset_adam_per_batch: bool,
    /// `false` runs the plain ES loop without the IW machinery.
    pub iw_enabled: bool,

    // execution
    pub workers: usize,
    pub iterations: usize,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    pub log_every: usize,
    pub parallel_seeds: bool,
    /// Absolute steps-to-threshold level for sweep summaries.
    pub threshold: Option<f64>,
    /// Fraction of the reference run's improvement that defines the threshold.
    pub threshold_fraction: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            objective: ObjectiveKind::Pointmass,
            dim: 10,
            hidden: 64,
            horizon: crate::env::DEFAULT_HORIZON,
            n_eval: 30,
            noise_seed: 0,
            noise_table_len: DEFAULT_TABLE_LEN,
            mirrored: true,
            sigma: 0.02,
            batch_pairs: 128,
            learning_rate: 1e-4,
            optimizer: OptimizerKind::default(),
            l2_coeff: 0.0,
            fitness_shaping: FitnessShaping::CenteredRank,
            k: 0,
            ess_min_fraction: 0.0,
            weight_sum_min: None,
            iw_uses_raw_returns: false,
            reset_adam_per_batch: false,
            iw_enabled: true,
            workers: 0,
            iterations: 200,
            seeds: vec![0, 1, 2, 3, 4],
            out_dir: PathBuf::from("runs"),
            log_every: 1,
            parallel_seeds: false,
            threshold: None,
            threshold_fraction: 0.9,
        }
    }
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file and applies `key=value` overrides. Override values
    /// are parsed as JSON, falling back to a plain string.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut doc = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
                serde_json::from_str::<Value>(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
            }
            None => Value::Object(Default::default()),
        };
        apply_overrides(&mut doc, overrides)?;
        let cfg: Self = serde_json::from_value(doc).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.dim == 0 {
            return bad("dim must be at least 1".into());
        }
        if self.hidden == 0 {
            return bad("hidden must be at least 1".into());
        }
        if self.horizon == 0 {
            return bad("horizon must be at least 1".into());
        }
        if self.n_eval == 0 {
            return bad("n_eval must be at least 1".into());
        }
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        if self.log_every == 0 {
            return bad("log_every must be at least 1".into());
        }
        if !(self.threshold_fraction > 0.0 && self.threshold_fraction <= 1.0) {
            return bad(format!("threshold_fraction must lie in (0, 1], got {}", self.threshold_fraction));
        }
        if self.noise_table_len < self.param_dim() {
            return bad(format!(
                "noise_table_len {} is below the model dimension {}",
                self.noise_table_len,
                self.param_dim()
            ));
        }
        self.population().validate()?;
        self.iw().validate()
    }

    pub fn population(&self) -> PopulationConfig {
        PopulationConfig {
            sigma: self.sigma,
            batch_pairs: self.batch_pairs,
            learning_rate: self.learning_rate,
            optimizer: self.optimizer,
            l2_coeff: self.l2_coeff,
            fitness_shaping: self.fitness_shaping,
        }
    }

    pub fn iw(&self) -> IwConfig {
        IwConfig {
            k: self.k,
            ess_min_fraction: self.ess_min_fraction,
            weight_sum_min: self.weight_sum_min,
            uses_raw_returns: self.iw_uses_raw_returns,
        }
    }

    /// Evaluations per batch: `2 * batch_pairs` with or without mirroring.
    pub fn batch_size(&self) -> usize {
        2 * self.batch_pairs
    }

    pub fn param_dim(&self) -> usize {
        match self.objective {
            ObjectiveKind::Pointmass => crate::env::MlpPolicy::new(self.hidden).param_count(),
            _ => self.dim,
        }
    }

    pub fn build_objective(&self) -> Arc<dyn Objective> {
        let f = |k| Arc::new(TestFunction::new(k, self.dim)) as Arc<dyn Objective>;
        match self.objective {
            ObjectiveKind::Sphere => f(FunctionKind::Sphere),
            ObjectiveKind::Rastrigin => f(FunctionKind::Rastrigin),
            ObjectiveKind::Rosenbrock => f(FunctionKind::Rosenbrock),
            ObjectiveKind::Pointmass => Arc::new(PointMassTask::new(self.hidden, self.horizon)),
        }
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }
}

/// Applies `key=value` pairs to a JSON object.
pub fn apply_overrides(doc: &mut Value, overrides: &[String]) -> Result<()> {
    let obj = doc
        .as_object_mut()
        .ok_or_else(|| Error::Config("config root must be a JSON object".into()))?;
    for o in overrides {
        let (key, raw) = o
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override {o:?} is not key=value")))?;
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        obj.insert(key.trim().to_string(), value);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let c = RunConfig::default();
        c.validate().unwrap();
        assert_eq!(c.seeds.len(), 5);
        assert_eq!(c.batch_size(), 256);
        assert_eq!(c.param_dim(), 4610);
    }

    #[test]
    fn unknown_keys_rejected() {
        let e = RunConfig::from_json_str(r#"{"sigmaa": 0.1}"#).unwrap_err();
        assert!(e.is_config());
    }

    #[test]
    fn json_fields_and_overrides() {
        let c = RunConfig::from_json_str(
            r#"{"K": 3, "optimizer": {"kind": "sgd"}, "fitness_shaping": "raw", "objective": "sphere"}"#,
        )
        .unwrap();
        assert_eq!(c.k, 3);
        assert_eq!(c.optimizer, OptimizerKind::Sgd);
        assert_eq!(c.fitness_shaping, FitnessShaping::Raw);

        let mut doc = serde_json::to_value(&c).unwrap();
        apply_overrides(&mut doc, &["K=5".into(), "out_dir=somewhere".into(), "seeds=[7]".into()]).unwrap();
        let c2: RunConfig = serde_json::from_value(doc).unwrap();
        assert_eq!(c2.k, 5);
        assert_eq!(c2.out_dir, PathBuf::from("somewhere"));
        assert_eq!(c2.seeds, vec![7]);
    }

    #[test]
    fn invalid_values_rejected() {
        for c in [
            RunConfig { sigma: 0.0, ..Default::default() },
            RunConfig { noise_table_len: 100, ..Default::default() },
            RunConfig { ess_min_fraction: 2.0, ..Default::default() },
        ] {
            assert!(c.validate().is_err());
        }
    }
}
