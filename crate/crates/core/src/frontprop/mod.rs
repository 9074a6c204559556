//! Controlled paths, reachable sets and first-passage times on a grid.
//!
//! The cumulative reachable set `ℛ_t^-(S)` is represented through per-cell
//! arrival times `θ(S, ·)`: a cell is occupied at time `t` iff its arrival is
//! at most `t`. Arrival times come from the stencil-graph search in
//! [`engine`].

pub mod engine;
mod diagnostics;
mod guaranteed;
mod ode;

pub use diagnostics::{
    boundary_growth_profile, cone_check, cone_check_scaled, sample_directions, BoundaryProfile, ConeReport,
};
pub use engine::{segment_time, FrontSolver, RunInfo, NO_PARENT};
pub use guaranteed::{guaranteed_evolve, guaranteed_evolve_with, GuaranteedFront};
pub use ode::{shoot_path, PiecewiseControl};

use crate::env::VectorField;
use crate::grid::{Grid, Mask};
use crate::math::{self, Point};
use alloc::vec::Vec;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrontError {
    #[error("seed set is empty")]
    EmptySeed,
    #[error("seed point lies outside the grid")]
    SeedOutOfBounds,
    #[error("control piece {index} has norm {norm} > 1")]
    ControlOutsideBall { index: usize, norm: f64 },
    #[error("invalid parameter {name}: {value}")]
    BadParameter { name: &'static str, value: f64 },
    #[error("field dimension {field} does not match grid dimension {grid}")]
    DimensionMismatch { field: usize, grid: usize },
    #[error("front reached the grid boundary at t = {at} before the requested time")]
    Truncated { at: f64 },
}

/// Search parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrontOptions {
    /// Longest stencil edge, in cells.
    pub stencil_radius: u32,
}

impl FrontOptions {
    pub fn for_dim(dim: usize) -> Self {
        FrontOptions { stencil_radius: if dim == 3 { 3 } else { 6 } }
    }
}

/// Arrival times of a reachable set on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct FrontField {
    pub grid: Grid,
    /// `θ` per cell, `+∞` if not reached by `t_now`.
    pub arrival: Vec<f64>,
    pub t_now: f64,
    /// Earliest time at which the front touched the grid's outer face.
    pub truncated_at: Option<f64>,
    pub stencil_radius: u32,
    pub backward: bool,
    /// Predecessor of each reached cell along a discrete geodesic.
    pub parent: Vec<u32>,
}

impl FrontField {
    pub fn occupied(&self, cell: usize) -> bool {
        self.arrival[cell] <= self.t_now
    }

    pub fn occupied_at(&self, cell: usize, t: f64) -> bool {
        self.arrival[cell] <= t
    }

    pub fn mask_at(&self, t: f64) -> Mask {
        Mask { grid: self.grid.clone(), bits: self.arrival.iter().map(|a| *a <= t).collect() }
    }

    /// Errors if the front hit the grid boundary at or before `t`.
    pub fn check_valid_until(&self, t: f64) -> Result<(), FrontError> {
        match self.truncated_at {
            Some(at) if at <= t => Err(FrontError::Truncated { at }),
            _ => Ok(()),
        }
    }

    /// Cell sequence from a seed to `cell` along parent pointers.
    pub fn geodesic(&self, cell: usize) -> Vec<usize> {
        let mut out = Vec::new();
        if !self.arrival[cell].is_finite() {
            return out;
        }
        let mut c = cell;
        loop {
            out.push(c);
            let p = self.parent[c];
            if p == NO_PARENT {
                break;
            }
            c = p as usize;
        }
        out.reverse();
        out
    }
}

fn seed_cells(grid: &Grid, seeds: &[Point]) -> Result<Vec<(usize, f64)>, FrontError> {
    if seeds.is_empty() {
        return Err(FrontError::EmptySeed);
    }
    seeds
        .iter()
        .map(|p| grid.locate(*p).map(|c| (c, 0.0)).ok_or(FrontError::SeedOutOfBounds))
        .collect()
}

fn check_common<F: VectorField>(field: &F, grid: &Grid, t_max: f64) -> Result<(), FrontError> {
    if field.dim() != grid.dim() {
        return Err(FrontError::DimensionMismatch { field: field.dim(), grid: grid.dim() });
    }
    if !(t_max >= 0.0) || t_max.is_nan() {
        return Err(FrontError::BadParameter { name: "t_max", value: t_max });
    }
    Ok(())
}

pub(crate) fn front_from_solver<F: VectorField>(solver: &FrontSolver<'_, F>, info: RunInfo, backward: bool) -> FrontField {
    FrontField {
        grid: solver.grid().clone(),
        arrival: solver.arrivals(),
        t_now: info.t_reached,
        truncated_at: info.truncated_at,
        stencil_radius: solver.stencil_radius(),
        backward,
        parent: solver.parents(),
    }
}

/// `ℛ_t^-(seed_set)` for `t ≤ t_max` with default options.
pub fn evolve_front<F: VectorField>(field: &F, grid: &Grid, seeds: &[Point], t_max: f64) -> Result<FrontField, FrontError> {
    evolve_front_with(field, grid, seeds, t_max, FrontOptions::for_dim(grid.dim()))
}

pub fn evolve_front_with<F: VectorField>(
    field: &F,
    grid: &Grid,
    seeds: &[Point],
    t_max: f64,
    opts: FrontOptions,
) -> Result<FrontField, FrontError> {
    check_common(field, grid, t_max)?;
    let src = seed_cells(grid, seeds)?;
    let mut s = FrontSolver::new(field, grid, opts.stencil_radius, false);
    let info = s.run(&src, t_max, |_, _| false);
    Ok(front_from_solver(&s, info, false))
}

/// Backward reachable set `ℛ_t^+`: evolution under `−V`.
pub fn evolve_front_backward<F: VectorField>(
    field: &F,
    grid: &Grid,
    seeds: &[Point],
    t_max: f64,
) -> Result<FrontField, FrontError> {
    evolve_front_backward_with(field, grid, seeds, t_max, FrontOptions::for_dim(grid.dim()))
}

pub fn evolve_front_backward_with<F: VectorField>(
    field: &F,
    grid: &Grid,
    seeds: &[Point],
    t_max: f64,
    opts: FrontOptions,
) -> Result<FrontField, FrontError> {
    check_common(field, grid, t_max)?;
    let src = seed_cells(grid, seeds)?;
    let mut s = FrontSolver::new(field, grid, opts.stencil_radius, true);
    let info = s.run(&src, t_max, |_, _| false);
    Ok(front_from_solver(&s, info, true))
}

/// `θ(seed, y)`: arrival at the cell containing `y`; `+∞` if unreached or
/// outside the grid.
pub fn first_passage(front: &FrontField, y: Point) -> f64 {
    match front.grid.locate(y) {
        Some(c) => front.arrival[c],
        None => f64::INFINITY,
    }
}

/// `h^d · #{cells with arrival ≤ t}`.
pub fn reachable_volume(front: &FrontField, t: f64) -> f64 {
    let n = front.arrival.iter().filter(|a| **a <= t).count();
    math::powi(front.grid.h(), front.grid.dim() as u32) * n as f64
}

/// `W = inf{t : ℛ_t^-(x) ⊇ B_{1/2}(x)}`; `+∞` if not reached by `t_max`.
///
/// Stops the search as soon as the ball is covered. A front that touches the
/// grid boundary before that moment yields [`FrontError::Truncated`].
pub fn waiting_time<F: VectorField>(field: &F, grid: &Grid, x: Point, t_max: f64) -> Result<f64, FrontError> {
    let mut solver = FrontSolver::new(field, grid, FrontOptions::for_dim(grid.dim()).stencil_radius, false);
    waiting_time_with(&mut solver, x, 0.5, t_max)
}

/// Waiting time for `B_radius(x)` reusing a solver.
pub fn waiting_time_with<F: VectorField>(
    solver: &mut FrontSolver<'_, F>,
    x: Point,
    radius: f64,
    t_max: f64,
) -> Result<f64, FrontError> {
    let grid = solver.grid().clone();
    let start = grid.locate(x).ok_or(FrontError::SeedOutOfBounds)?;
    let (a, b) = grid.bounds();
    if (0..grid.dim()).any(|k| x[k] - radius < a[k] || x[k] + radius > b[k]) {
        return Err(FrontError::SeedOutOfBounds);
    }
    let ball = grid.cells_in_ball(x, radius);
    let mut target = alloc::vec![false; grid.len()];
    for &c in &ball {
        target[c] = true;
    }
    let mut remaining = ball.len();
    let mut w = f64::INFINITY;
    let info = solver.run(&[(start, 0.0)], t_max, |c, t| {
        if target[c] {
            remaining -= 1;
            if remaining == 0 {
                w = t;
                return true;
            }
        }
        false
    });
    if let Some(at) = info.truncated_at {
        if at <= w.min(t_max) {
            return Err(FrontError::Truncated { at });
        }
    }
    Ok(w)
}

#[cfg(test)]
mod tests;
