use std::fmt;
use std::str::FromStr;

use serde_json::Value;

use super::config::{apply_overrides, RunConfig};
use super::train::{train_with, Resources};
use crate::error::{Error, Result};
use crate::persist::{self, fmt_real, AggregateRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    K,
    Hidden,
    LearningRate,
}

impl SweepAxis {
    pub fn key(self) -> &'static str {
        match self {
            SweepAxis::K => "K",
            SweepAxis::Hidden => "hidden",
            SweepAxis::LearningRate => "learning_rate",
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "K" | "k" => Ok(SweepAxis::K),
            "hidden" => Ok(SweepAxis::Hidden),
            "lr" | "learning_rate" => Ok(SweepAxis::LearningRate),
            other => Err(Error::Config(format!("unknown sweep axis {other:?} (expected K, hidden or lr)"))),
        }
    }
}

/// Parses a comma-separated value list.
pub fn parse_values(list: &str) -> Result<Vec<f64>> {
    list.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("bad sweep value {s:?}: {e}")))
        })
        .collect()
}

/// Config for one sweep point.
pub fn config_for(base: &RunConfig, axis: SweepAxis, value: f64) -> Result<RunConfig> {
    let json = match axis {
        SweepAxis::K | SweepAxis::Hidden => {
            if value < 0.0 || value.fract() != 0.0 {
                return Err(Error::Config(format!("{axis} must be a non-negative integer, got {value}")));
            }
            Value::from(value as u64)
        }
        SweepAxis::LearningRate => Value::from(value),
    };
    let mut doc = serde_json::to_value(base).map_err(|e| Error::Config(e.to_string()))?;
    apply_overrides(&mut doc, &[format!("{}={}", axis.key(), json)])?;
    let mut cfg: RunConfig = serde_json::from_value(doc).map_err(|e| Error::Config(e.to_string()))?;
    cfg.out_dir = base.out_dir.join(format!("{}_{}", axis.key(), value_label(value)));
    cfg.validate()?;
    Ok(cfg)
}

fn value_label(v: f64) -> String {
    format!("{v}")
}

/// Per-value line of `summary.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub value: f64,
    pub threshold: f64,
    pub steps_to_threshold: Option<f64>,
    pub initial_return: f64,
    pub best_return: f64,
    pub final_return: f64,
}

/// One row per iteration (the `update_index == 0` slot).
fn iteration_rows(agg: &[AggregateRow]) -> impl Iterator<Item = &AggregateRow> {
    agg.iter().filter(|r| r.update_index == 0)
}

/// Mean training interactions at the first iteration whose mean evaluation
/// return reaches `threshold`.
pub fn steps_to_threshold(agg: &[AggregateRow], threshold: f64) -> Option<f64> {
    iteration_rows(agg)
        .find(|r| r.median_eval_return >= threshold)
        .map(|r| r.train_env_steps_cum)
}

pub fn best_return(agg: &[AggregateRow]) -> f64 {
    iteration_rows(agg)
        .map(|r| r.median_eval_return)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `initial + fraction * (best - initial)` of the reference curve, so the
/// level sits between the starting score and the best score whatever the
/// sign of the returns.
pub fn relative_threshold(reference: &[AggregateRow], fraction: f64) -> f64 {
    let initial = reference.first().map_or(f64::NAN, |r| r.median_eval_return);
    initial + fraction * (best_return(reference) - initial)
}

pub fn summarize(values: &[f64], aggregates: &[Vec<AggregateRow>], reference: usize, threshold: Option<f64>, fraction: f64) -> Vec<SummaryRow> {
    let threshold = threshold.unwrap_or_else(|| relative_threshold(&aggregates[reference], fraction));
    values
        .iter()
        .zip(aggregates)
        .map(|(&value, agg)| SummaryRow {
            value,
            threshold,
            steps_to_threshold: steps_to_threshold(agg, threshold),
            initial_return: agg.first().map_or(f64::NAN, |r| r.median_eval_return),
            best_return: best_return(agg),
            final_return: agg.last().map_or(f64::NAN, |r| r.median_eval_return),
        })
        .collect()
}

pub const SUMMARY_COLUMNS: [&str; 7] = [
    "value",
    "threshold",
    "steps_to_threshold",
    "reached",
    "initial_return",
    "best_return",
    "final_return",
];

pub fn write_summary(path: &std::path::Path, rows: &[SummaryRow]) -> Result<()> {
    let lines: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                format!("{}", r.value),
                fmt_real(r.threshold),
                r.steps_to_threshold.map_or_else(|| "NA".to_string(), fmt_real),
                u8::from(r.steps_to_threshold.is_some()).to_string(),
                fmt_real(r.initial_return),
                fmt_real(r.best_return),
                fmt_real(r.final_return),
            ]
        })
        .collect();
    persist::write_table(path, &SUMMARY_COLUMNS, &lines)
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub aggregates: Vec<Vec<AggregateRow>>,
    pub summary: Vec<SummaryRow>,
}

/// Trains every `(value, seed)` pair, writes per-value run directories under
/// `base.out_dir` and a `summary.csv` of steps-to-threshold.
///
/// The threshold reference is the `K = 0` point on a K sweep and the first
/// listed value otherwise.
pub fn sweep(base: &RunConfig, axis: SweepAxis, values: &[f64]) -> Result<SweepOutput> {
    let res = Resources::new(base.workers)?;
    sweep_with(base, axis, values, &res)
}

pub fn sweep_with(base: &RunConfig, axis: SweepAxis, values: &[f64], res: &Resources) -> Result<SweepOutput> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let cfgs = values
        .iter()
        .map(|&v| config_for(base, axis, v))
        .collect::<Result<Vec<_>>>()?;
    let mut aggregates = Vec::with_capacity(values.len());
    for (cfg, v) in cfgs.iter().zip(values) {
        log::info!("sweep {axis}={v}");
        aggregates.push(train_with(cfg, res)?.aggregate);
    }
    let reference = match axis {
        SweepAxis::K => values.iter().position(|&v| v == 0.0).unwrap_or(0),
        _ => 0,
    };
    let summary = summarize(values, &aggregates, reference, base.threshold, base.threshold_fraction);
    write_summary(&base.out_dir.join("summary.csv"), &summary)?;
    Ok(SweepOutput {
        axis,
        values: values.to_vec(),
        aggregates,
        summary,
    })
}
