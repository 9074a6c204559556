//! Dijkstra engine on a stencil graph.
//!
//! Each edge joins a cell to the cell displaced by a primitive lattice vector
//! `o` with `|o| ≤ K`. Its weight is the time a controlled path needs to run
//! along the straight segment: the segment is split into `max|o_k|` pieces,
//! the drift on each piece is the mean of its endpoint values (bilinear or
//! trilinear interpolation of the per-cell cache), and a piece of displacement
//! `d` under constant drift `w` takes the smallest `τ > 0` with
//! `|d − τw| ≤ τ`. Pieces with no such `τ` make the edge unusable.

use crate::env::VectorField;
use crate::grid::Grid;
use crate::math::{self, OrdF64, Point};
use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Reverse;

pub const NO_PARENT: u32 = u32::MAX;

/// Smallest `τ > 0` with `|d − τ w| ≤ τ`, given `c = |d|² > 0`.
#[inline]
pub fn segment_time(d: Point, c: f64, w: Point) -> Option<f64> {
    let a = w.norm_sq() - 1.0;
    let b = d.dot(w);
    let disc = b * b - a * c;
    if a >= 0.0 && (b <= 0.0 || disc < 0.0) {
        return None;
    }
    let t = c / (b + math::sqrt(disc.max(0.0)));
    if t.is_finite() && t > 0.0 {
        Some(t)
    } else {
        None
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Primitive lattice vectors of Euclidean length at most `radius`.
pub fn primitive_offsets(dim: usize, radius: u32) -> Vec<[i64; 3]> {
    let r = radius as i64;
    let rz = if dim == 3 { r } else { 0 };
    let mut out = Vec::new();
    for i in -r..=r {
        for j in -r..=r {
            for k in -rz..=rz {
                if i == 0 && j == 0 && k == 0 {
                    continue;
                }
                if i * i + j * j + k * k > r * r {
                    continue;
                }
                if gcd(gcd(i, j), k) != 1 {
                    continue;
                }
                out.push([i, j, k]);
            }
        }
    }
    out
}

#[derive(Clone, Debug)]
struct SubPoint {
    /// (linear offset from the edge origin, weight)
    corners: Vec<(isize, f64)>,
}

#[derive(Clone, Debug)]
struct Edge {
    off: [i64; 3],
    lin: isize,
    /// physical displacement of one piece and its squared length
    piece: Point,
    piece_sq: f64,
    /// interior sample points (the endpoints are the two cells themselves)
    inner: Vec<SubPoint>,
}

/// Reusable search state for repeated front computations on one grid.
pub struct FrontSolver<'a, F: VectorField> {
    field: &'a F,
    grid: Grid,
    sign: f64,
    edges: Vec<Edge>,
    stencil_radius: u32,
    drift: Vec<Point>,
    drift_ok: Vec<bool>,
    pub(crate) dist: Vec<f64>,
    pub(crate) parent: Vec<u32>,
    settled: Vec<bool>,
    touched: Vec<u32>,
    /// cells in settle order during the last run
    pub(crate) order: Vec<u32>,
    heap: BinaryHeap<Reverse<(OrdF64, u32)>>,
}

/// Outcome of one search.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunInfo {
    /// Time up to which settled cells are final.
    pub t_reached: f64,
    /// Earliest settle time of a cell on the grid's outer face, if any.
    pub truncated_at: Option<f64>,
    pub stopped_early: bool,
}

impl<'a, F: VectorField> FrontSolver<'a, F> {
    /// `reverse = true` evolves with drift `−V`.
    pub fn new(field: &'a F, grid: &Grid, stencil_radius: u32, reverse: bool) -> Self {
        let dim = grid.dim();
        let h = grid.h();
        let strides = grid.strides();
        let lin_of = |o: [i64; 3]| -> isize { (0..3).map(|k| o[k] as isize * strides[k] as isize).sum() };
        let mut edges = Vec::new();
        for off in primitive_offsets(dim, stencil_radius.max(1)) {
            let m = off.iter().map(|v| v.unsigned_abs()).max().unwrap_or(1) as usize;
            let mut piece = Point::ZERO;
            for k in 0..dim {
                piece[k] = off[k] as f64 * h / m as f64;
            }
            let mut inner = Vec::new();
            for j in 1..m {
                let mut base = [0i64; 3];
                let mut frac = [0.0f64; 3];
                for k in 0..dim {
                    // exact rational position j·o_k/m
                    let num = j as i64 * off[k];
                    base[k] = num.div_euclid(m as i64);
                    frac[k] = num.rem_euclid(m as i64) as f64 / m as f64;
                }
                let mut corners = Vec::new();
                let nc = 1usize << dim;
                for mask in 0..nc {
                    let mut w = 1.0;
                    let mut c = base;
                    for k in 0..dim {
                        if mask >> k & 1 == 1 {
                            w *= frac[k];
                            c[k] += 1;
                        } else {
                            w *= 1.0 - frac[k];
                        }
                    }
                    if w > 0.0 {
                        corners.push((lin_of(c), w));
                    }
                }
                inner.push(SubPoint { corners });
            }
            edges.push(Edge { off, lin: lin_of(off), piece, piece_sq: piece.norm_sq(), inner });
        }
        let n = grid.len();
        FrontSolver {
            field,
            grid: grid.clone(),
            sign: if reverse { -1.0 } else { 1.0 },
            edges,
            stencil_radius,
            drift: vec![Point::ZERO; n],
            drift_ok: vec![false; n],
            dist: vec![f64::INFINITY; n],
            parent: vec![NO_PARENT; n],
            settled: vec![false; n],
            touched: Vec::new(),
            order: Vec::new(),
            heap: BinaryHeap::new(),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn stencil_radius(&self) -> u32 {
        self.stencil_radius
    }

    pub fn is_reverse(&self) -> bool {
        self.sign < 0.0
    }

    #[inline]
    fn drift_at(&mut self, cell: usize) -> Point {
        if !self.drift_ok[cell] {
            self.drift[cell] = self.field.value(self.grid.center(cell)) * self.sign;
            self.drift_ok[cell] = true;
        }
        self.drift[cell]
    }

    /// Time to traverse edge `e` from `cell`. The target must be in the grid.
    #[inline]
    fn edge_time(&mut self, cell: usize, e: usize) -> Option<f64> {
        let edge = &self.edges[e];
        let piece = edge.piece;
        let c = edge.piece_sq;
        let target = (cell as isize + edge.lin) as usize;
        let ninner = edge.inner.len();
        let mut prev = self.drift_at(cell);
        let mut total = 0.0;
        for j in 0..=ninner {
            let cur = if j == ninner {
                self.drift_at(target)
            } else {
                let mut v = Point::ZERO;
                let nc = self.edges[e].inner[j].corners.len();
                for q in 0..nc {
                    let (lo, w) = self.edges[e].inner[j].corners[q];
                    v += self.drift_at((cell as isize + lo) as usize) * w;
                }
                v
            };
            total += segment_time(piece, c, (prev + cur) * 0.5)?;
            prev = cur;
        }
        Some(total)
    }

    fn reset(&mut self) {
        for &c in &self.touched {
            let c = c as usize;
            self.dist[c] = f64::INFINITY;
            self.parent[c] = NO_PARENT;
            self.settled[c] = false;
        }
        self.touched.clear();
        self.order.clear();
        self.heap.clear();
    }

    /// Runs the search from `sources` (cell, start time) until every cell with
    /// arrival ≤ `t_max` is settled, or until `stop(cell, time)` returns true.
    pub fn run(
        &mut self,
        sources: &[(usize, f64)],
        t_max: f64,
        mut stop: impl FnMut(usize, f64) -> bool,
    ) -> RunInfo {
        self.reset();
        for &(c, t) in sources {
            if t < self.dist[c] {
                if self.dist[c].is_infinite() {
                    self.touched.push(c as u32);
                }
                self.dist[c] = t;
                self.heap.push(Reverse((OrdF64(t), c as u32)));
            }
        }
        let dim = self.grid.dim();
        let lo = self.grid.lo();
        let shape = self.grid.shape();
        let mut truncated_at = None;
        let mut stopped_early = false;
        let mut t_reached = t_max;
        while let Some(Reverse((OrdF64(t), c32))) = self.heap.pop() {
            let cell = c32 as usize;
            if self.settled[cell] || t > self.dist[cell] {
                continue;
            }
            if t > t_max {
                break;
            }
            self.settled[cell] = true;
            self.order.push(c32);
            let coords = self.grid.coords(cell);
            let on_face = (0..dim).any(|k| coords[k] == lo[k] || coords[k] == lo[k] + shape[k] as i64 - 1);
            if on_face && truncated_at.is_none() {
                truncated_at = Some(t);
            }
            if stop(cell, t) {
                stopped_early = true;
                t_reached = t;
                break;
            }
            for e in 0..self.edges.len() {
                let off = self.edges[e].off;
                let inside = (0..dim).all(|k| {
                    let v = coords[k] + off[k] - lo[k];
                    v >= 0 && v < shape[k] as i64
                });
                if !inside {
                    continue;
                }
                let target = (cell as isize + self.edges[e].lin) as usize;
                if self.settled[target] {
                    continue;
                }
                let Some(dt) = self.edge_time(cell, e) else { continue };
                let nt = t + dt;
                if nt < self.dist[target] {
                    if self.dist[target].is_infinite() {
                        self.touched.push(target as u32);
                    }
                    self.dist[target] = nt;
                    self.parent[target] = c32;
                    self.heap.push(Reverse((OrdF64(nt), target as u32)));
                }
            }
        }
        RunInfo { t_reached, truncated_at, stopped_early }
    }

    /// Settled arrival times of the last run; unsettled cells are `+∞`.
    pub fn arrivals(&self) -> Vec<f64> {
        let mut out = vec![f64::INFINITY; self.grid.len()];
        for &c in &self.order {
            out[c as usize] = self.dist[c as usize];
        }
        out
    }

    /// Parent pointers restricted to settled cells.
    pub fn parents(&self) -> Vec<u32> {
        let mut out = vec![NO_PARENT; self.grid.len()];
        for &c in &self.order {
            out[c as usize] = self.parent[c as usize];
        }
        out
    }

    pub fn settle_order(&self) -> &[u32] {
        &self.order
    }

    pub fn arrival(&self, cell: usize) -> f64 {
        if self.settled[cell] {
            self.dist[cell]
        } else {
            f64::INFINITY
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segment_time_constant_drift() {
        let d = Point::new2(1.0, 0.0);
        assert!((segment_time(d, 1.0, Point::ZERO).unwrap() - 1.0).abs() < 1e-15);
        assert!((segment_time(d, 1.0, Point::new2(0.5, 0.0)).unwrap() - 1.0 / 1.5).abs() < 1e-15);
        assert!((segment_time(d, 1.0, Point::new2(-0.5, 0.0)).unwrap() - 2.0).abs() < 1e-15);
        assert!(segment_time(d, 1.0, Point::new2(-1.5, 0.0)).is_none());
        assert!((segment_time(d, 1.0, Point::new2(3.0, 0.0)).unwrap() - 0.25).abs() < 1e-15);
        // pure crosswind of speed 0.6: along-track speed 0.8
        assert!((segment_time(d, 1.0, Point::new2(0.0, 0.6)).unwrap() - 1.25).abs() < 1e-12);
        assert!(segment_time(d, 1.0, Point::new2(0.0, 1.0)).is_none());
    }

    #[test]
    fn primitive_offsets_counts() {
        assert_eq!(primitive_offsets(2, 1).len(), 4);
        assert_eq!(primitive_offsets(2, 2).len(), 8);
        assert_eq!(primitive_offsets(3, 1).len(), 6);
    }
}
