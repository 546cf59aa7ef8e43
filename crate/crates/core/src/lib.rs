//! Evolution Strategies with importance-weighted reuse of perturbation batches.
//!
//! A batch of perturbations is evaluated once, then used for one plain ES
//! update followed by up to `K` importance-weighted updates against the
//! batch's original sampling distribution. Perturbations are windows into a
//! shared Gaussian noise table, so they are identified by an offset and a
//! sign, and the squared norm of any window is available in O(1) from a
//! precomputed prefix sum.
//!
//! Data-parallel loops (rollouts, weight computation, gradient accumulation,
//! noise generation) run on rayon when the `parallel` feature is enabled, and
//! sequentially otherwise. Every reduction runs in a fixed index order, so
//! results do not depend on the number of worker threads.

pub mod env;
pub mod error;
pub mod es;
pub mod iw;
pub mod noise;
pub mod optimizer;
pub mod persist;
pub mod pool;
pub mod rng;
pub mod runner;

pub use error::{Error, Result};

/// Dense parameter vector (population mean / policy parameters).
pub type ParamVector = Vec<f64>;
