use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::{Evaluation, Objective};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FunctionKind {
    Sphere,
    Rastrigin,
    Rosenbrock,
}

/// Deterministic test function, returned negated so that maximising the
/// return minimises the function. Every evaluation counts as one step.
#[derive(Debug, Clone)]
pub struct TestFunction {
    kind: FunctionKind,
    dim: usize,
}

impl TestFunction {
    pub fn new(kind: FunctionKind, dim: usize) -> Self {
        assert!(dim >= 1, "test function dimension must be at least 1");
        Self { kind, dim }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self.kind {
            FunctionKind::Sphere => x.iter().map(|v| v * v).sum(),
            FunctionKind::Rastrigin => {
                10.0 * x.len() as f64
                    + x.iter()
                        .map(|v| v * v - 10.0 * (TAU * v).cos())
                        .sum::<f64>()
            }
            FunctionKind::Rosenbrock => x
                .windows(2)
                .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
                .sum(),
        }
    }
}

impl Objective for TestFunction {
    fn dim(&self) -> usize {
        self.dim
    }

    fn evaluate(&self, params: &[f64], _episode_seed: u64) -> Result<Evaluation> {
        Ok(Evaluation {
            ret: -self.value(params),
            steps: 1,
        })
    }

    fn deterministic(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn optima_score_zero() {
        let z = vec![0.0; 6];
        let ones = vec![1.0; 6];
        let eval = |k, x: &[f64]| TestFunction::new(k, 6).evaluate(x, 0).unwrap().ret;
        assert_eq!(eval(FunctionKind::Sphere, &z), 0.0);
        assert!(eval(FunctionKind::Rastrigin, &z).abs() < 1e-12);
        assert_eq!(eval(FunctionKind::Rosenbrock, &ones), 0.0);
    }

    #[test]
    fn returns_are_negated_values() {
        let f = TestFunction::new(FunctionKind::Sphere, 2);
        assert_eq!(f.evaluate(&[1.0, 2.0], 3).unwrap().ret, -5.0);
        let r = TestFunction::new(FunctionKind::Rosenbrock, 2);
        // 100 (1 - 0)^2 + (1 - 0)^2
        assert_eq!(r.evaluate(&[0.0, 1.0], 0).unwrap().ret, -101.0);
        let g = TestFunction::new(FunctionKind::Rastrigin, 1);
        assert!((g.evaluate(&[0.5], 0).unwrap().ret + 20.25).abs() < 1e-12);
    }
}
