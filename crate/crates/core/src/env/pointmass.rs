//! Point-mass reaching task.
//!
//! A unit point starts at rest at the origin and must reach a goal drawn
//! uniformly from `[-1, 1]^2` for each episode:
//!
//! ```text
//! obs = (g - p, v)
//! v  <- 0.9 v + 0.1 clamp(a, -1, 1)
//! p  <- p + 0.1 v
//! r  =  -|p - g|^2          (after the move)
//! ```
//!
//! Episodes last exactly `horizon` steps. Goal coordinates are
//! `2 * unit_f64(mix_seed(episode_seed, k)) - 1` for `k = 0, 1`.

use rand::Rng;

use super::{Evaluation, Objective};
use crate::error::{Error, Result};
use crate::rng::{box_muller, mix_seed, unit_f64};

pub const OBS_DIM: usize = 4;
pub const ACT_DIM: usize = 2;
pub const DEFAULT_HORIZON: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PointMassEnv {
    pub horizon: usize,
}

impl Default for PointMassEnv {
    fn default() -> Self {
        Self {
            horizon: DEFAULT_HORIZON,
        }
    }
}

impl PointMassEnv {
    pub fn goal(episode_seed: u64) -> [f64; 2] {
        [
            2.0 * unit_f64(mix_seed(episode_seed, 0)) - 1.0,
            2.0 * unit_f64(mix_seed(episode_seed, 1)) - 1.0,
        ]
    }

    /// Runs one episode with `policy` and returns the summed reward.
    pub fn rollout(&self, policy: &MlpPolicy, params: &[f64], episode_seed: u64) -> Result<Evaluation> {
        assert_eq!(params.len(), policy.param_count(), "parameter length mismatch");
        let g = Self::goal(episode_seed);
        let (mut p, mut v) = ([0.0f64; 2], [0.0f64; 2]);
        let mut scratch = policy.scratch();
        let mut ret = 0.0;
        for t in 0..self.horizon {
            let obs = [g[0] - p[0], g[1] - p[1], v[0], v[1]];
            let a = policy.forward(params, &obs, &mut scratch);
            if !(a[0].is_finite() && a[1].is_finite()) {
                return Err(Error::Numeric(format!("non-finite action {a:?} at step {t}")));
            }
            for k in 0..2 {
                v[k] = 0.9 * v[k] + 0.1 * a[k].clamp(-1.0, 1.0);
                p[k] += 0.1 * v[k];
            }
            let (dx, dy) = (p[0] - g[0], p[1] - g[1]);
            ret -= dx * dx + dy * dy;
        }
        Ok(Evaluation {
            ret,
            steps: self.horizon as u64,
        })
    }
}

/// `4 -> h -> h -> 2` perceptron, tanh after both hidden layers, linear head.
///
/// Flat layout, layer by layer: the weight matrix in row-major `(out, in)`
/// order followed by the bias vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MlpPolicy {
    pub hidden: usize,
}

pub struct Scratch {
    h1: Vec<f64>,
    h2: Vec<f64>,
}

impl MlpPolicy {
    pub fn new(hidden: usize) -> Self {
        assert!(hidden >= 1);
        Self { hidden }
    }

    fn layers(&self) -> [(usize, usize); 3] {
        [
            (OBS_DIM, self.hidden),
            (self.hidden, self.hidden),
            (self.hidden, ACT_DIM),
        ]
    }

    pub fn param_count(&self) -> usize {
        self.layers().iter().map(|&(i, o)| i * o + o).sum()
    }

    pub fn scratch(&self) -> Scratch {
        Scratch {
            h1: vec![0.0; self.hidden],
            h2: vec![0.0; self.hidden],
        }
    }

    pub fn forward(&self, params: &[f64], obs: &[f64; OBS_DIM], scratch: &mut Scratch) -> [f64; ACT_DIM] {
        let h = self.hidden;
        let (l1, rest) = params.split_at(OBS_DIM * h + h);
        let (l2, l3) = rest.split_at(h * h + h);
        dense(l1, obs, &mut scratch.h1, true);
        dense(l2, &scratch.h1, &mut scratch.h2, true);
        let mut out = [0.0; ACT_DIM];
        dense(l3, &scratch.h2, &mut out, false);
        out
    }

    /// Column-normalised Gaussian init: each weight row has norm 1 in the
    /// hidden layers and 0.01 in the head; biases start at zero.
    pub fn init_params<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        let stds = [1.0, 1.0, 0.01];
        for (&(fan_in, fan_out), std) in self.layers().iter().zip(stds) {
            for _ in 0..fan_out {
                let row: Vec<f64> = (0..fan_in).map(|_| box_muller(rng.gen(), rng.gen()).0).collect();
                let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
                out.extend(row.iter().map(|v| v * std / norm));
            }
            out.extend(std::iter::repeat_n(0.0, fan_out));
        }
        out
    }
}

fn dense(layer: &[f64], x: &[f64], y: &mut [f64], activate: bool) {
    let (n_in, n_out) = (x.len(), y.len());
    let (w, b) = layer.split_at(n_in * n_out);
    for (o, out) in y.iter_mut().enumerate() {
        let row = &w[o * n_in..(o + 1) * n_in];
        let z = b[o] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        *out = if activate { z.tanh() } else { z };
    }
}

/// The point-mass task as an objective over policy parameters.
#[derive(Debug, Clone)]
pub struct PointMassTask {
    pub env: PointMassEnv,
    pub policy: MlpPolicy,
}

impl PointMassTask {
    pub fn new(hidden: usize, horizon: usize) -> Self {
        Self {
            env: PointMassEnv { horizon },
            policy: MlpPolicy::new(hidden),
        }
    }
}

impl Objective for PointMassTask {
    fn dim(&self) -> usize {
        self.policy.param_count()
    }

    fn evaluate(&self, params: &[f64], episode_seed: u64) -> Result<Evaluation> {
        self.env.rollout(&self.policy, params, episode_seed)
    }

    fn deterministic(&self) -> bool {
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn parameter_counts() {
        // (4*64 + 64) + (64*64 + 64) + (64*2 + 2)
        assert_eq!(MlpPolicy::new(64).param_count(), 4610);
        assert_eq!(MlpPolicy::new(256).param_count(), 4 * 256 + 256 + 256 * 256 + 256 + 256 * 2 + 2);
        assert_eq!(MlpPolicy::new(512).param_count(), 266_242);
    }

    #[test]
    fn zero_policy_closed_form() {
        let task = PointMassTask::new(64, 50);
        let zeros = vec![0.0; task.dim()];
        for seed in 0..10 {
            let g = PointMassEnv::goal(seed);
            let e = task.evaluate(&zeros, seed).unwrap();
            assert_eq!(e.steps, 50);
            let expect = -50.0 * (g[0] * g[0] + g[1] * g[1]);
            assert!((e.ret - expect).abs() <= 1e-12 * expect.abs());
        }
    }

    #[test]
    fn goals_in_box_and_rollouts_reproducible() {
        let task = PointMassTask::new(8, 50);
        let params = task.policy.init_params(&mut stream(1, 0));
        for seed in 0..100 {
            let g = PointMassEnv::goal(seed);
            assert!(g.iter().all(|c| (-1.0..1.0).contains(c)));
        }
        let a = task.evaluate(&params, 77).unwrap();
        let b = task.evaluate(&params, 77).unwrap();
        assert_eq!(a, b);
        assert!(a.ret <= 0.0);
    }

    #[test]
    fn init_layout_has_zero_biases() {
        let pol = MlpPolicy::new(3);
        let p = pol.init_params(&mut stream(2, 0));
        assert_eq!(p.len(), pol.param_count());
        // first-layer biases follow the 3x4 weights
        assert_eq!(&p[12..15], &[0.0; 3]);
        let row0: f64 = p[0..4].iter().map(|v| v * v).sum();
        assert!((row0 - 1.0).abs() < 1e-12);
    }
}
