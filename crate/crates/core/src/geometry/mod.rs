//! Flat tori `T^{2n} = (ℝ/2πℤ)^{2n}` sampled on uniform periodic grids, with
//! fourth-order difference operators, unitary (1,0)-frames, complex and real
//! Hessians, and field import/export.
//!
//! Real coordinates are `x_0, …, x_{2n−1}`; the complex coordinate `z_i`
//! pairs axes `2i` and `2i+1`, and the standard frame is
//! `e_i = (∂_{2i} − √−1 ∂_{2i+1})/√2`.

mod fields;
mod frame;
mod io;
pub mod stencil;

pub use fields::{complex_hessian, grad_norm_sq, real_hessian, HermitianField, SymmetricField};
pub use frame::{frame_bracket, FrameField};
pub use io::{read_binary, read_csv, write_binary, write_csv};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound for `res^{2n}·(n²+1)` complex samples, in bytes.
pub const MEMORY_BUDGET_BYTES: u128 = 8 << 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TorusGrid {
    n: usize,
    res: usize,
}

impl TorusGrid {
    pub fn new(n: usize, res: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("complex dimension must be ≥ 2, got {n}")));
        }
        if res < 4 || res % 2 != 0 {
            return Err(Error::InvalidArgument(format!("resolution must be even and ≥ 4, got {res}")));
        }
        let points = (res as u128).checked_pow(2 * n as u32).unwrap_or(u128::MAX);
        let bytes = points.saturating_mul((n * n + 1) as u128).saturating_mul(16);
        if bytes > MEMORY_BUDGET_BYTES {
            return Err(Error::MemoryBudget { bytes, budget: MEMORY_BUDGET_BYTES });
        }
        Ok(TorusGrid { n, res })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn res(&self) -> usize {
        self.res
    }

    /// Number of real axes, `2n`.
    pub fn dims(&self) -> usize {
        2 * self.n
    }

    pub fn spacing(&self) -> f64 {
        std::f64::consts::TAU / self.res as f64
    }

    pub fn len(&self) -> usize {
        self.res.pow(self.dims() as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Row-major stride of `axis`; axis 0 varies slowest.
    pub fn stride(&self, axis: usize) -> usize {
        self.res.pow((self.dims() - 1 - axis) as u32)
    }

    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims()];
        for a in (0..self.dims()).rev() {
            out[a] = idx % self.res;
            idx /= self.res;
        }
        out
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi.iter().fold(0, |acc, &i| acc * self.res + i % self.res)
    }

    pub fn coords(&self, idx: usize) -> Vec<f64> {
        let h = self.spacing();
        self.multi_index(idx).into_iter().map(|i| i as f64 * h).collect()
    }

    /// Index of the point `offset` steps along `axis`, wrapping periodically.
    #[inline]
    pub fn shift(&self, idx: usize, axis: usize, offset: isize) -> usize {
        let st = self.stride(axis);
        let i = (idx / st) % self.res;
        let j = (i as isize + offset).rem_euclid(self.res as isize) as usize;
        idx + j * st - i * st
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: TorusGrid,
    pub samples: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: TorusGrid, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} samples for a grid of {} points",
                samples.len(),
                grid.len()
            )));
        }
        if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite sample at grid point {i}")));
        }
        Ok(ScalarField { grid, samples })
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        ScalarField { grid, samples: vec![0.0; grid.len()] }
    }

    pub fn from_fn<F>(grid: TorusGrid, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let samples = (0..grid.len()).into_par_iter().map(|i| f(&grid.coords(i))).collect();
        ScalarField { grid, samples }
    }

    pub fn sup(&self) -> f64 {
        self.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn inf(&self) -> f64 {
        self.samples.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_abs(&self) -> f64 {
        self.samples.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    /// Mean with a fixed-order pairwise reduction.
    pub fn mean(&self) -> f64 {
        pairwise_sum(&self.samples) / self.samples.len() as f64
    }

    pub fn check_grid(&self, other: &TorusGrid) -> Result<()> {
        if &self.grid != other {
            return Err(Error::GridMismatch(format!("{:?} vs {:?}", self.grid, other)));
        }
        Ok(())
    }
}

/// Sum by recursive halving; the association order depends only on the length.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 64 {
        v.iter().sum()
    } else {
        let (a, b) = v.split_at(v.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}
