//! Run artefacts: per-update CSV logs, aggregates, summaries and the binary
//! parameter file.
//!
//! Reals are written with 17 significant digits in scientific notation,
//! which round-trips every `f64` exactly and never needs quoting.
//!
//! `params_final.bin` layout (little endian):
//!
//! ```text
//! offset 0   4 bytes  magic "IWES"
//! offset 4   4 bytes  version, u32 = 1
//! offset 8   8 bytes  dim, u64
//! offset 16  8*dim    f64 values
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub const PARAMS_MAGIC: &[u8; 4] = b"IWES";
pub const PARAMS_VERSION: u32 = 1;

pub const LOG_COLUMNS: [&str; 11] = [
    "iteration",
    "update_index",
    "train_env_steps_cum",
    "eval_env_steps_cum",
    "wall_ms_cum",
    "median_eval_return",
    "ess",
    "clip_fraction",
    "grad_norm",
    "weight_sum",
    "skipped",
];

/// Index of the wall-clock column, the only non-deterministic one.
pub const WALL_COLUMN: usize = 4;

/// One row per update slot (`K + 1` per iteration).
#[derive(Debug, Clone, PartialEq)]
pub struct IterationLog {
    pub iteration: u64,
    pub update_index: u64,
    pub train_env_steps_cum: u64,
    pub eval_env_steps_cum: u64,
    pub wall_ms_cum: f64,
    pub median_eval_return: f64,
    pub ess: f64,
    pub clip_fraction: f64,
    pub grad_norm: f64,
    pub weight_sum: f64,
    pub skipped: bool,
}

/// Mean of [`IterationLog`] rows across seeds; `skipped` becomes a fraction.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub iteration: u64,
    pub update_index: u64,
    pub train_env_steps_cum: f64,
    pub eval_env_steps_cum: f64,
    pub wall_ms_cum: f64,
    pub median_eval_return: f64,
    pub ess: f64,
    pub clip_fraction: f64,
    pub grad_norm: f64,
    pub weight_sum: f64,
    pub skipped: f64,
}

pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

impl IterationLog {
    fn to_line(&self) -> String {
        [
            self.iteration.to_string(),
            self.update_index.to_string(),
            self.train_env_steps_cum.to_string(),
            self.eval_env_steps_cum.to_string(),
            fmt_real(self.wall_ms_cum),
            fmt_real(self.median_eval_return),
            fmt_real(self.ess),
            fmt_real(self.clip_fraction),
            fmt_real(self.grad_norm),
            fmt_real(self.weight_sum),
            u8::from(self.skipped).to_string(),
        ]
        .join(",")
    }

    fn parse(line: &str) -> std::result::Result<Self, String> {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != LOG_COLUMNS.len() {
            return Err(format!("expected {} fields, found {}", LOG_COLUMNS.len(), f.len()));
        }
        let int = |i: usize| f[i].parse::<u64>().map_err(|e| format!("{}: {e}", LOG_COLUMNS[i]));
        let real = |i: usize| f[i].parse::<f64>().map_err(|e| format!("{}: {e}", LOG_COLUMNS[i]));
        Ok(Self {
            iteration: int(0)?,
            update_index: int(1)?,
            train_env_steps_cum: int(2)?,
            eval_env_steps_cum: int(3)?,
            wall_ms_cum: real(4)?,
            median_eval_return: real(5)?,
            ess: real(6)?,
            clip_fraction: real(7)?,
            grad_norm: real(8)?,
            weight_sum: real(9)?,
            skipped: match f[10] {
                "0" => false,
                "1" => true,
                other => return Err(format!("skipped: bad flag {other:?}")),
            },
        })
    }
}

/// Appends [`IterationLog`] rows to a CSV file.
pub struct LogWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl LogWriter {
    /// Creates the file and writes the header.
    pub fn create(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let mut out = create(&path)?;
        writeln!(out, "{}", LOG_COLUMNS.join(",")).map_err(|e| Error::io(&path, e))?;
        Ok(Self { path, out })
    }

    pub fn write_row(&mut self, row: &IterationLog) -> Result<()> {
        writeln!(self.out, "{}", row.to_line()).map_err(|e| Error::io(&self.path, e))
    }

    /// Flushes buffered rows; called at every iteration boundary.
    pub fn flush(&mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

pub fn read_log(path: &Path) -> Result<Vec<IterationLog>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let bad = |reason: String| Error::Format {
        path: path.to_path_buf(),
        reason,
    };
    let header = lines
        .next()
        .ok_or_else(|| bad("empty file".into()))?
        .map_err(|e| Error::io(path, e))?;
    if header != LOG_COLUMNS.join(",") {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        rows.push(IterationLog::parse(&line).map_err(|r| bad(format!("line {}: {r}", i + 2)))?);
    }
    Ok(rows)
}

/// Column-wise mean over runs with identical row layouts.
pub fn aggregate(runs: &[Vec<IterationLog>]) -> Result<Vec<AggregateRow>> {
    let Some(first) = runs.first() else {
        return Ok(Vec::new());
    };
    for r in runs {
        if r.len() != first.len()
            || r.iter()
                .zip(first)
                .any(|(a, b)| a.iteration != b.iteration || a.update_index != b.update_index)
        {
            return Err(Error::Numeric("runs do not share a row layout".into()));
        }
    }
    let n = runs.len() as f64;
    let mean = |f: &dyn Fn(&IterationLog) -> f64, row: usize| runs.iter().map(|r| f(&r[row])).sum::<f64>() / n;
    Ok((0..first.len())
        .map(|i| AggregateRow {
            iteration: first[i].iteration,
            update_index: first[i].update_index,
            train_env_steps_cum: mean(&|r| r.train_env_steps_cum as f64, i),
            eval_env_steps_cum: mean(&|r| r.eval_env_steps_cum as f64, i),
            wall_ms_cum: mean(&|r| r.wall_ms_cum, i),
            median_eval_return: mean(&|r| r.median_eval_return, i),
            ess: mean(&|r| r.ess, i),
            clip_fraction: mean(&|r| r.clip_fraction, i),
            grad_norm: mean(&|r| r.grad_norm, i),
            weight_sum: mean(&|r| r.weight_sum, i),
            skipped: mean(&|r| f64::from(u8::from(r.skipped)), i),
        })
        .collect())
}

pub fn write_aggregate(path: &Path, rows: &[AggregateRow]) -> Result<()> {
    let mut out = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(out, "{}", LOG_COLUMNS.join(",")).map_err(io)?;
    for r in rows {
        let line = [
            r.iteration.to_string(),
            r.update_index.to_string(),
            fmt_real(r.train_env_steps_cum),
            fmt_real(r.eval_env_steps_cum),
            fmt_real(r.wall_ms_cum),
            fmt_real(r.median_eval_return),
            fmt_real(r.ess),
            fmt_real(r.clip_fraction),
            fmt_real(r.grad_norm),
            fmt_real(r.weight_sum),
            fmt_real(r.skipped),
        ]
        .join(",");
        writeln!(out, "{line}").map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Writes a generic numeric table with a header.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut out = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(out, "{}", header.join(",")).map_err(io)?;
    for r in rows {
        debug_assert_eq!(r.len(), header.len());
        writeln!(out, "{}", r.join(",")).map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn save_params(path: &Path, theta: &[f64]) -> Result<()> {
    let mut out = create(path)?;
    let io = |e| Error::io(path, e);
    out.write_all(PARAMS_MAGIC).map_err(io)?;
    out.write_all(&PARAMS_VERSION.to_le_bytes()).map_err(io)?;
    out.write_all(&(theta.len() as u64).to_le_bytes()).map_err(io)?;
    for v in theta {
        out.write_all(&v.to_le_bytes()).map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn load_params(path: &Path) -> Result<Vec<f64>> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let bad = |reason: String| Error::Format {
        path: path.to_path_buf(),
        reason,
    };
    if bytes.len() < 16 {
        return Err(bad(format!("{} bytes is shorter than the 16-byte header", bytes.len())));
    }
    if &bytes[0..4] != PARAMS_MAGIC {
        return Err(bad("bad magic".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != PARAMS_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let dim = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let body = &bytes[16..];
    if Some(body.len() as u64) != dim.checked_mul(8) {
        return Err(bad(format!("header dim {dim} does not match {} payload bytes", body.len())));
    }
    Ok(body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}
