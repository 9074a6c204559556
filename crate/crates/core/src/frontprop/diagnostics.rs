//! Boundary-growth profile and the cone controllability check.

use super::{FrontError, FrontField, FrontOptions, FrontSolver};
use crate::env::VectorField;
use crate::grid::Grid;
use crate::math::{self, Point};
use alloc::vec::Vec;

/// Boundary measures of `ℛ_t^-` at one time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryProfile {
    pub t: f64,
    /// Estimated `H^{d−1}(∂ℛ_t^-)`.
    pub total: f64,
    /// Estimated measure of `{x ∈ ∂ℛ_t^- : V(x)·ν(x) ≥ −1/2}`.
    pub drift_not_inward: f64,
    /// Number of occupied/unoccupied cell faces.
    pub faces: usize,
}

/// Outward normal at an occupied cell from a smoothed occupancy gradient
/// over the `5^d` window.
fn outward_normal(front: &FrontField, cell: usize, t: f64) -> Point {
    let g = &front.grid;
    let c = g.coords(cell);
    let dim = g.dim();
    let r: i64 = 2;
    let rz = if dim == 3 { r } else { 0 };
    let mut n = Point::ZERO;
    for i in -r..=r {
        for j in -r..=r {
            for l in -rz..=rz {
                if i == 0 && j == 0 && l == 0 {
                    continue;
                }
                let o = [i, j, l];
                let occ = match g.index([c[0] + i, c[1] + j, c[2] + l]) {
                    Some(m) => front.arrival[m] <= t,
                    None => false,
                };
                if !occ {
                    let mut v = Point::ZERO;
                    for k in 0..dim {
                        v[k] = o[k] as f64;
                    }
                    let d2 = v.norm_sq();
                    n += v * (math::exp(-d2 / 2.0) / math::sqrt(d2));
                }
            }
        }
    }
    n.normalized()
}

/// Face-based boundary estimate of `ℛ_t^-` at time `t`.
///
/// A staircase approximates a smooth surface with normal `ν` by faces whose
/// total area is `‖ν‖₁` times the true area, so each face is weighted by
/// `h^{d−1}/‖ν‖₁`.
pub fn boundary_growth_profile<F: VectorField>(front: &FrontField, field: &F, t: f64) -> BoundaryProfile {
    let g = &front.grid;
    let dim = g.dim();
    let h = g.h();
    let face = math::powi(h, dim as u32 - 1);
    let mut total = 0.0;
    let mut good = 0.0;
    let mut faces = 0;
    for cell in 0..g.len() {
        if front.arrival[cell] > t {
            continue;
        }
        let c = g.coords(cell);
        let mut normal: Option<Point> = None;
        for k in 0..dim {
            for s in [-1i64, 1] {
                let mut q = c;
                q[k] += s;
                let open = match g.index(q) {
                    Some(m) => front.arrival[m] > t,
                    None => true,
                };
                if !open {
                    continue;
                }
                let nu = *normal.get_or_insert_with(|| outward_normal(front, cell, t));
                let l1: f64 = (0..dim).map(|i| nu[i].abs()).sum();
                let w = if l1 > 0.0 { face / l1 } else { face };
                let mut mid = g.center(cell);
                mid[k] += 0.5 * s as f64 * h;
                faces += 1;
                total += w;
                if field.value(mid).dot(nu) >= -0.5 {
                    good += w;
                }
            }
        }
    }
    BoundaryProfile { t, total, drift_not_inward: good, faces }
}

/// Result of sampling the cone `{x₀ + s v : v ∈ B_{1/2}(V(x₀)), 0 ≤ s ≤ T}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConeReport {
    pub holds: bool,
    /// Cone length `T`.
    pub length: f64,
    /// Largest arrival time over the sampled cone points (≤ 1 when it holds).
    pub worst_arrival: f64,
    pub samples: usize,
}

/// Cone check with the stated length `T = (2 Lip(V)(1 + ‖V‖∞))^{-1}`.
pub fn cone_check<F: VectorField>(field: &F, x0: Point, h: f64) -> Result<ConeReport, FrontError> {
    cone_check_scaled(field, x0, h, 1.0)
}

/// Cone check with the length multiplied by `stretch`.
///
/// Samples 16 unit directions `u` (a circle in 2D, a spiral point set in 3D)
/// and 8 radii; the point `x₀ + s(V(x₀) + u/2)` passes if some cell within
/// `2h` of it has arrival ≤ 1 in the front from `x₀`.
pub fn cone_check_scaled<F: VectorField>(field: &F, x0: Point, h: f64, stretch: f64) -> Result<ConeReport, FrontError> {
    let dim = field.dim();
    let n = field.norms();
    let sup_v = if n.sup_v.is_finite() { n.sup_v } else { field.value(x0).norm() };
    let length = stretch / (2.0 * n.lip_v * (1.0 + sup_v));
    let v0 = field.value(x0);
    let reach = length * (v0.norm() + 0.5) + 4.0 * h + 1.0;
    let grid = Grid::covering(dim, h, x0, reach).map_err(|_| FrontError::BadParameter { name: "h", value: h })?;
    let start = grid.locate(x0).ok_or(FrontError::SeedOutOfBounds)?;
    let mut solver = FrontSolver::new(field, &grid, FrontOptions::for_dim(dim).stencil_radius, false);
    solver.run(&[(start, 0.0)], 1.0 + 1e-9, |_, _| false);
    let dirs = sample_directions(dim, 16);
    let mut worst: f64 = 0.0;
    let mut samples = 0;
    for u in &dirs {
        let v = v0 + *u * 0.5;
        for r in 1..=8 {
            let p = x0 + v * (length * r as f64 / 8.0);
            let best = grid
                .cells_in_ball(p, 2.0 * h)
                .into_iter()
                .map(|c| solver.arrival(c))
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(best);
            samples += 1;
        }
    }
    Ok(ConeReport { holds: worst <= 1.0, length, worst_arrival: worst, samples })
}

/// `n` unit vectors: evenly spaced on the circle, or a Fibonacci spiral on the sphere.
pub fn sample_directions(dim: usize, n: usize) -> Vec<Point> {
    let mut out = Vec::with_capacity(n);
    let tau = 2.0 * core::f64::consts::PI;
    for i in 0..n {
        if dim == 2 {
            let a = tau * i as f64 / n as f64;
            out.push(Point::new2(math::cos(a), math::sin(a)));
        } else {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let r = math::sqrt((1.0 - z * z).max(0.0));
            let a = i as f64 * core::f64::consts::PI * (3.0 - math::sqrt(5.0));
            out.push(Point::new3(r * math::cos(a), r * math::sin(a), z));
        }
    }
    out
}
