//! Fourth-order periodic central differences.
//!
//! First derivative `(f₋₂ − 8f₋₁ + 8f₁ − f₂)/(12h)`, second derivative
//! `(−f₋₂ + 16f₋₁ − 30f₀ + 16f₁ − f₂)/(12h²)`, mixed partials by composing
//! two first derivatives.

use std::ops::{Add, Mul, Sub};

use rayon::prelude::*;

use super::TorusGrid;

pub trait Sample: Copy + Send + Sync + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {}
impl<T> Sample for T where T: Copy + Send + Sync + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T> {}

/// Periodic neighbour lookup along one axis with the stride precomputed.
#[derive(Clone, Copy)]
struct AxisWalk {
    stride: usize,
    res: usize,
}

impl AxisWalk {
    fn new(grid: &TorusGrid, axis: usize) -> Self {
        AxisWalk { stride: grid.stride(axis), res: grid.res() }
    }

    /// The four neighbours at offsets −2, −1, +1, +2.
    #[inline]
    fn around(&self, i: usize) -> [usize; 4] {
        let k = (i / self.stride) % self.res;
        let base = i - k * self.stride;
        let at = |o: usize| base + ((k + o) % self.res) * self.stride;
        [at(self.res - 2), at(self.res - 1), at(1), at(2)]
    }
}

/// Pointwise stencils for operators that fuse several partials in one pass.
/// They agree with [`d1`], [`d2`] and [`d11`] up to rounding.
#[derive(Clone, Copy)]
pub struct PointStencil {
    walks: [AxisWalk; 16],
    inv12h: f64,
    inv12h2: f64,
}

impl PointStencil {
    pub fn new(grid: &TorusGrid) -> Self {
        assert!(grid.dims() <= 16, "at most 16 real axes");
        let mut walks = [AxisWalk { stride: 1, res: grid.res() }; 16];
        for (a, w) in walks.iter_mut().enumerate().take(grid.dims()) {
            *w = AxisWalk::new(grid, a);
        }
        let h = grid.spacing();
        PointStencil { walks, inv12h: 1.0 / (12.0 * h), inv12h2: 1.0 / (12.0 * h * h) }
    }

    #[inline]
    pub fn d1(&self, f: &[f64], i: usize, a: usize) -> f64 {
        let [m2, m1, p1, p2] = self.walks[a].around(i);
        ((f[m2] - f[p2]) + 8.0 * (f[p1] - f[m1])) * self.inv12h
    }

    #[inline]
    pub fn d2(&self, f: &[f64], i: usize, a: usize) -> f64 {
        let [m2, m1, p1, p2] = self.walks[a].around(i);
        (16.0 * (f[m1] + f[p1]) - (f[m2] + f[p2]) - 30.0 * f[i]) * self.inv12h2
    }

    /// `∂_a∂_b f` for `a ≠ b`.
    #[inline]
    pub fn d11(&self, f: &[f64], i: usize, a: usize, b: usize) -> f64 {
        let [m2, m1, p1, p2] = self.walks[a].around(i);
        ((self.d1(f, m2, b) - self.d1(f, p2, b)) + 8.0 * (self.d1(f, p1, b) - self.d1(f, m1, b))) * self.inv12h
    }
}

/// `∂_axis f`.
pub fn d1<T: Sample>(grid: &TorusGrid, f: &[T], axis: usize) -> Vec<T> {
    let c = 1.0 / (12.0 * grid.spacing());
    let walk = AxisWalk::new(grid, axis);
    (0..f.len())
        .into_par_iter()
        .map(|i| {
            let [a, b, p, q] = walk.around(i);
            let (m2, m1, p1, p2) = (f[a], f[b], f[p], f[q]);
            ((m2 - p2) + (p1 - m1) * 8.0) * c
        })
        .collect()
}

/// `∂²_axis f`.
pub fn d2<T: Sample>(grid: &TorusGrid, f: &[T], axis: usize) -> Vec<T> {
    let h = grid.spacing();
    let c = 1.0 / (12.0 * h * h);
    let walk = AxisWalk::new(grid, axis);
    (0..f.len())
        .into_par_iter()
        .map(|i| {
            let [a, b, p, q] = walk.around(i);
            let (m2, m1, p1, p2) = (f[a], f[b], f[p], f[q]);
            ((m1 + p1) * 16.0 - (m2 + p2) - f[i] * 30.0) * c
        })
        .collect()
}

/// `∂_a ∂_b f`; the pure second difference when `a == b`.
pub fn d11<T: Sample>(grid: &TorusGrid, f: &[T], a: usize, b: usize) -> Vec<T> {
    if a == b {
        d2(grid, f, a)
    } else {
        let (lo, hi) = (a.min(b), a.max(b));
        d1(grid, &d1(grid, f, hi), lo)
    }
}

/// Centre weight of the `∂_a∂_b` stencil (zero for mixed partials).
pub fn center_weight(grid: &TorusGrid, a: usize, b: usize) -> f64 {
    if a == b {
        let h = grid.spacing();
        -30.0 / (12.0 * h * h)
    } else {
        0.0
    }
}

/// All first partials, indexed by axis.
pub fn gradient(grid: &TorusGrid, f: &[f64]) -> Vec<Vec<f64>> {
    (0..grid.dims()).map(|a| d1(grid, f, a)).collect()
}

/// All second partials `∂_a∂_b f` for `a ≤ b`, in row-major upper-triangle order.
pub fn hessian_parts(grid: &TorusGrid, f: &[f64]) -> Vec<Vec<f64>> {
    let d = grid.dims();
    let first = gradient(grid, f);
    let mut out = Vec::with_capacity(d * (d + 1) / 2);
    for a in 0..d {
        for b in a..d {
            if a == b {
                out.push(d2(grid, f, a));
            } else {
                out.push(d1(grid, &first[b], a));
            }
        }
    }
    out
}

/// Position of `(a, b)` in the upper-triangle order used by [`hessian_parts`].
pub fn upper_index(dims: usize, a: usize, b: usize) -> usize {
    let (a, b) = (a.min(b), a.max(b));
    a * dims - a * (a + 1) / 2 + b
}
