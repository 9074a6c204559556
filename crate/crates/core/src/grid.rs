//! Regular cell grids, boolean masks and the exact Euclidean distance transform.
//!
//! Cell centers sit at `h · idx` for integer `idx` in an index box, so the
//! origin is a cell center whenever the box contains index 0.

use crate::math::{self, Point};
use alloc::vec;
use alloc::vec::Vec;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid spacing must be positive and finite, got {0}")]
    BadSpacing(f64),
    #[error("dimension {0} not supported (expected 2 or 3)")]
    BadDimension(usize),
    #[error("grid has no cells")]
    Empty,
    #[error("grid with {0} cells exceeds the addressable size")]
    TooLarge(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    dim: usize,
    h: f64,
    lo: [i64; 3],
    shape: [usize; 3],
}

impl Grid {
    /// `shape[k]` cells along axis `k`, starting at index `lo[k]`. Unused axes
    /// (axis 2 in 2D) are forced to a single cell at index 0.
    pub fn new(dim: usize, h: f64, lo: [i64; 3], shape: [usize; 3]) -> Result<Self, GridError> {
        if dim != 2 && dim != 3 {
            return Err(GridError::BadDimension(dim));
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(GridError::BadSpacing(h));
        }
        let mut lo = lo;
        let mut shape = shape;
        if dim == 2 {
            lo[2] = 0;
            shape[2] = 1;
        }
        let n = shape.iter().try_fold(1usize, |a, &s| a.checked_mul(s)).ok_or(GridError::TooLarge(usize::MAX))?;
        if n == 0 {
            return Err(GridError::Empty);
        }
        if n > u32::MAX as usize - 1 {
            return Err(GridError::TooLarge(n));
        }
        Ok(Grid { dim, h, lo, shape })
    }

    /// Square/cubic grid with `2n` cells per axis, indices `−n .. n−1`.
    pub fn centered(dim: usize, h: f64, n: usize) -> Result<Self, GridError> {
        let n = n as i64;
        Grid::new(dim, h, [-n; 3], [2 * n as usize; 3])
    }

    /// Smallest grid whose cell centers cover the closed ball `B_radius(center)`.
    pub fn covering(dim: usize, h: f64, center: Point, radius: f64) -> Result<Self, GridError> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(GridError::BadSpacing(h));
        }
        let mut lo = [0i64; 3];
        let mut shape = [1usize; 3];
        for k in 0..dim.min(3) {
            let a = math::floor((center[k] - radius) / h) as i64;
            let b = math::ceil((center[k] + radius) / h) as i64;
            lo[k] = a;
            shape[k] = (b - a + 1) as usize;
        }
        Grid::new(dim, h, lo, shape)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn lo(&self) -> [i64; 3] {
        self.lo
    }
    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }
    pub fn len(&self) -> usize {
        self.shape[0] * self.shape[1] * self.shape[2]
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Physical box spanned by the cell centers.
    pub fn bounds(&self) -> (Point, Point) {
        let mut a = Point::ZERO;
        let mut b = Point::ZERO;
        for k in 0..self.dim {
            a[k] = self.lo[k] as f64 * self.h;
            b[k] = (self.lo[k] + self.shape[k] as i64 - 1) as f64 * self.h;
        }
        (a, b)
    }

    pub fn contains_point(&self, x: Point) -> bool {
        let (a, b) = self.bounds();
        (0..self.dim).all(|k| x[k] >= a[k] - 0.5 * self.h && x[k] <= b[k] + 0.5 * self.h)
    }

    #[inline]
    pub fn index(&self, idx: [i64; 3]) -> Option<usize> {
        let mut lin = 0usize;
        for k in 0..3 {
            let i = idx[k] - self.lo[k];
            if i < 0 || i >= self.shape[k] as i64 {
                return None;
            }
            lin = lin * self.shape[k] + i as usize;
        }
        Some(lin)
    }

    #[inline]
    pub fn coords(&self, cell: usize) -> [i64; 3] {
        let i2 = cell % self.shape[2];
        let r = cell / self.shape[2];
        let i1 = r % self.shape[1];
        let i0 = r / self.shape[1];
        [i0 as i64 + self.lo[0], i1 as i64 + self.lo[1], i2 as i64 + self.lo[2]]
    }

    #[inline]
    pub fn center(&self, cell: usize) -> Point {
        let c = self.coords(cell);
        let mut p = Point::ZERO;
        for k in 0..self.dim {
            p[k] = c[k] as f64 * self.h;
        }
        p
    }

    /// Integer index of the cell whose center is nearest to `x`.
    pub fn nearest_index(&self, x: Point) -> [i64; 3] {
        let mut c = [0i64; 3];
        for k in 0..self.dim {
            c[k] = math::round(x[k] / self.h) as i64;
        }
        c
    }

    /// Cell containing `x`, if inside the grid.
    pub fn locate(&self, x: Point) -> Option<usize> {
        if !x.is_finite() {
            return None;
        }
        self.index(self.nearest_index(x))
    }

    /// True when the cell touches the outer face of the index box.
    pub fn is_boundary(&self, cell: usize) -> bool {
        let c = self.coords(cell);
        (0..self.dim).any(|k| c[k] == self.lo[k] || c[k] == self.lo[k] + self.shape[k] as i64 - 1)
    }

    /// Linear strides per axis.
    pub fn strides(&self) -> [usize; 3] {
        [self.shape[1] * self.shape[2], self.shape[2], 1]
    }

    /// Cells whose centers lie in the closed ball `B_r(center)`.
    pub fn cells_in_ball(&self, center: Point, r: f64) -> Vec<usize> {
        let mut out = Vec::new();
        let rc = (r / self.h) as i64 + 1;
        let c = self.nearest_index(center);
        let kz = if self.dim == 3 { rc } else { 0 };
        for i in -rc..=rc {
            for j in -rc..=rc {
                for l in -kz..=kz {
                    if let Some(cell) = self.index([c[0] + i, c[1] + j, c[2] + l]) {
                        if self.center(cell).dist(center) <= r + 1e-12 {
                            out.push(cell);
                        }
                    }
                }
            }
        }
        out
    }

    /// Face neighbors (2d of them in the interior).
    pub fn face_neighbors(&self, cell: usize, out: &mut Vec<usize>) {
        out.clear();
        let c = self.coords(cell);
        for k in 0..self.dim {
            for s in [-1i64, 1] {
                let mut n = c;
                n[k] += s;
                if let Some(m) = self.index(n) {
                    out.push(m);
                }
            }
        }
    }
}

/// Boolean cell set on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Mask {
    pub grid: Grid,
    pub bits: Vec<bool>,
}

impl Mask {
    pub fn empty(grid: Grid) -> Self {
        let n = grid.len();
        Mask { grid, bits: vec![false; n] }
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn get(&self, cell: usize) -> bool {
        self.bits[cell]
    }

    pub fn set(&mut self, cell: usize, v: bool) {
        self.bits[cell] = v;
    }

    /// Physical volume `h^d · #cells`.
    pub fn volume(&self) -> f64 {
        math::powi(self.grid.h(), self.grid.dim() as u32) * self.count() as f64
    }

    /// Euclidean distance (physical units) from each cell center to the
    /// nearest set cell; `+∞` when the mask is empty.
    pub fn distance(&self) -> Vec<f64> {
        let mut d2 = squared_edt(&self.grid, &self.bits);
        let h = self.grid.h();
        for v in d2.iter_mut() {
            *v = if v.is_finite() { math::sqrt(*v) * h } else { f64::INFINITY };
        }
        d2
    }

    /// Closed dilation by the physical radius `r`.
    pub fn dilate(&self, r: f64) -> Mask {
        let d = self.distance();
        let tol = 1e-9 * self.grid.h();
        Mask { grid: self.grid.clone(), bits: d.iter().map(|v| *v <= r + tol).collect() }
    }
}

/// Squared distance in cell units to the nearest `true` cell
/// (separable lower-envelope algorithm, exact).
pub fn squared_edt(grid: &Grid, bits: &[bool]) -> Vec<f64> {
    let n = grid.len();
    let mut f: Vec<f64> = bits.iter().map(|b| if *b { 0.0 } else { f64::INFINITY }).collect();
    let shape = grid.shape();
    let strides = grid.strides();
    let maxlen = shape.iter().copied().max().unwrap_or(1);
    let mut line = vec![0.0; maxlen];
    let mut out = vec![0.0; maxlen];
    let mut v = vec![0usize; maxlen];
    let mut z = vec![0.0; maxlen + 1];
    for axis in 0..grid.dim() {
        let len = shape[axis];
        if len == 1 {
            continue;
        }
        let st = strides[axis];
        for start in 0..n {
            // visit each line once: starts are cells with coordinate 0 on this axis
            if (start / st) % len != 0 {
                continue;
            }
            for i in 0..len {
                line[i] = f[start + i * st];
            }
            edt_1d(&line[..len], &mut out[..len], &mut v, &mut z);
            for i in 0..len {
                f[start + i * st] = out[i];
            }
        }
    }
    f
}

fn edt_1d(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k: usize = 0;
    let mut first = None;
    for q in 0..n {
        if f[q].is_finite() {
            first = Some(q);
            break;
        }
    }
    let Some(q0) = first else {
        for x in d.iter_mut() {
            *x = f64::INFINITY;
        }
        return;
    };
    v[0] = q0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in q0 + 1..n {
        if !f[q].is_finite() {
            continue;
        }
        loop {
            let p = v[k];
            let qf = q as f64;
            let pf = p as f64;
            let s = ((f[q] + qf * qf) - (f[p] + pf * pf)) / (2.0 * (qf - pf));
            if s <= z[k] {
                if k == 0 {
                    v[0] = q;
                    z[0] = f64::NEG_INFINITY;
                    z[1] = f64::INFINITY;
                    break;
                }
                k -= 1;
                continue;
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
            break;
        }
    }
    k = 0;
    for q in 0..n {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let dq = q as f64 - v[k] as f64;
        d[q] = dq * dq + f[v[k]];
    }
}
