//! Shared Gaussian noise table.
//!
//! Every worker holds the same block of standard normals; a perturbation is a
//! window `values[offset .. offset + dim]` times `sigma * sign`. Alongside the
//! values the table keeps prefix sums of squares in double-double precision,
//! so the squared norm of any window costs two lookups and stays accurate to
//! a few ulps even at the end of a table with tens of millions of entries.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;

/// Default table length at desk scale.
pub const DEFAULT_TABLE_LEN: usize = 10_000_000;

/// One member of a batch: a window into the noise table and its sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PerturbationHandle {
    pub offset: usize,
    /// `+1` or `-1`.
    pub sign: i8,
}

impl PerturbationHandle {
    pub fn new(offset: usize, sign: i8) -> Self {
        debug_assert!(sign == 1 || sign == -1);
        Self { offset, sign }
    }

    #[inline]
    pub fn sign_f64(&self) -> f64 {
        f64::from(self.sign)
    }
}

#[derive(Debug, Clone)]
pub struct NoiseTable {
    seed: u64,
    values: Vec<f64>,
    // prefix sums of values[j]^2 as unevaluated sums hi + lo
    sq_hi: Vec<f64>,
    sq_lo: Vec<f64>,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn fast_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

impl NoiseTable {
    /// Builds a table of `length` standard normals from `seed`.
    ///
    /// Fails with a configuration error when the table cannot hold a single
    /// perturbation of dimension `dim`.
    pub fn build(seed: u64, length: usize, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("model dimension must be at least 1".into()));
        }
        if length < dim {
            return Err(Error::Config(format!(
                "noise table length {length} is below model dimension {dim}"
            )));
        }
        let mut values = vec![0.0; length];
        rng::fill_normals(seed, 0, &mut values);
        Ok(Self::from_values(seed, values))
    }

    /// Wraps explicit values (used for crafted tables in tests and tools).
    pub fn from_values(seed: u64, values: Vec<f64>) -> Self {
        let mut sq_hi = Vec::with_capacity(values.len() + 1);
        let mut sq_lo = Vec::with_capacity(values.len() + 1);
        let (mut hi, mut lo) = (0.0f64, 0.0f64);
        sq_hi.push(hi);
        sq_lo.push(lo);
        for &v in &values {
            let (s, e) = two_sum(hi, v * v);
            // v*v rounding error, recovered exactly with fma
            let sq_err = v.mul_add(v, -(v * v));
            let (h, l) = fast_two_sum(s, e + lo + sq_err);
            hi = h;
            lo = l;
            sq_hi.push(hi);
            sq_lo.push(lo);
        }
        Self {
            seed,
            values,
            sq_hi,
            sq_lo,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `sq_prefix[m]` rounded to a single real.
    pub fn sq_prefix(&self, m: usize) -> f64 {
        self.sq_hi[m] + self.sq_lo[m]
    }

    /// Raw noise window for a handle (no sigma, no sign).
    #[inline]
    pub fn window(&self, handle: &PerturbationHandle, dim: usize) -> &[f64] {
        &self.values[handle.offset..handle.offset + dim]
    }

    /// Largest valid offset for a perturbation of dimension `dim`.
    pub fn max_offset(&self, dim: usize) -> usize {
        self.values.len() - dim
    }

    /// Sum of squares of the handle's window, in O(1) from the prefix sums.
    /// Independent of the handle's sign.
    #[inline]
    pub fn perturbation_sq_norm(&self, handle: &PerturbationHandle, dim: usize) -> f64 {
        let (a, b) = (handle.offset, handle.offset + dim);
        let (s, e) = two_sum(self.sq_hi[b], -self.sq_hi[a]);
        s + (e + (self.sq_lo[b] - self.sq_lo[a]))
    }

    /// Samples perturbation handles with offsets uniform over `[0, L - dim]`.
    ///
    /// Mirrored sampling returns `2 * count` handles where handles `2k` and
    /// `2k + 1` share an offset with signs `+1` and `-1`. Otherwise `count`
    /// independent handles with sign `+1` are returned. Offsets may repeat.
    pub fn sample_handles<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        count: usize,
        dim: usize,
        mirrored: bool,
    ) -> Vec<PerturbationHandle> {
        assert!(dim >= 1 && dim <= self.len(), "dimension {dim} does not fit the table");
        let max = self.max_offset(dim);
        if mirrored {
            let mut out = Vec::with_capacity(2 * count);
            for _ in 0..count {
                let offset = rng.gen_range(0..=max);
                out.push(PerturbationHandle::new(offset, 1));
                out.push(PerturbationHandle::new(offset, -1));
            }
            out
        } else {
            (0..count)
                .map(|_| PerturbationHandle::new(rng.gen_range(0..=max), 1))
                .collect()
        }
    }
}
