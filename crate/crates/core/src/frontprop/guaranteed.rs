//! ρ-guaranteed reachable sets.
//!
//! `ℛ_t^ρ = ℛ_t^-` for `t < ρ`, and otherwise
//! `ℛ_t^ρ = ℛ_ρ^-(ℛ_{t−ρ}^ρ) ∪ (ℛ_{t−ρ}^ρ + B̄₁)`.
//!
//! The recursion links times in the same residue class modulo `ρ`, so it is
//! run for `phases` equally spaced residues `φ_j = jρ/phases`; a cell's
//! guaranteed arrival is the earliest `φ_j + kρ` whose set contains it, capped
//! by the plain arrival (the plain front is always contained).

use super::{check_common, front_from_solver, FrontError, FrontField, FrontOptions, FrontSolver};
use crate::env::VectorField;
use crate::grid::{Grid, Mask};
use crate::math::Point;
use alloc::vec::Vec;

#[derive(Clone, Debug, PartialEq)]
pub struct GuaranteedFront {
    /// Arrival times are `θ^ρ`.
    pub front: FrontField,
    pub rho: f64,
    pub phases: u32,
}

pub fn guaranteed_evolve<F: VectorField>(
    field: &F,
    grid: &Grid,
    x: Point,
    t_max: f64,
    rho: f64,
) -> Result<GuaranteedFront, FrontError> {
    guaranteed_evolve_with(field, grid, x, t_max, rho, 8, FrontOptions::for_dim(grid.dim()))
}

pub fn guaranteed_evolve_with<F: VectorField>(
    field: &F,
    grid: &Grid,
    x: Point,
    t_max: f64,
    rho: f64,
    phases: u32,
    opts: FrontOptions,
) -> Result<GuaranteedFront, FrontError> {
    check_common(field, grid, t_max)?;
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(FrontError::BadParameter { name: "rho", value: rho });
    }
    if phases == 0 {
        return Err(FrontError::BadParameter { name: "phases", value: 0.0 });
    }
    let start = grid.locate(x).ok_or(FrontError::SeedOutOfBounds)?;
    let mut solver = FrontSolver::new(field, grid, opts.stencil_radius, false);
    let info = solver.run(&[(start, 0.0)], t_max, |_, _| false);
    let mut front = front_from_solver(&solver, info, false);
    let plain = front.arrival.clone();
    let reach = opts.stencil_radius.max(1) as f64 * grid.h() * (1.0 + 1e-9);
    let mut truncated_at = front.truncated_at;
    let boundary: Vec<usize> = (0..grid.len()).filter(|c| grid.is_boundary(*c)).collect();

    for j in 0..phases {
        let phi = rho * j as f64 / phases as f64;
        let mut set = Mask { grid: grid.clone(), bits: plain.iter().map(|a| *a <= phi).collect() };
        let mut k = 1u32;
        loop {
            let t_k = phi + rho * k as f64;
            if t_k > t_max {
                break;
            }
            // ℛ_ρ^-(A): only cells near the complement can leave A
            let mut comp = set.clone();
            for b in comp.bits.iter_mut() {
                *b = !*b;
            }
            let dc = comp.distance();
            let sources: Vec<(usize, f64)> =
                (0..grid.len()).filter(|&c| set.bits[c] && dc[c] <= reach).map(|c| (c, 0.0)).collect();
            let mut next = set.dilate(1.0);
            if !sources.is_empty() {
                solver.run(&sources, rho, |_, _| false);
                for &c in solver.settle_order() {
                    next.bits[c as usize] = true;
                }
            }
            for c in 0..grid.len() {
                if next.bits[c] && front.arrival[c] > t_k {
                    front.arrival[c] = t_k;
                }
            }
            if boundary.iter().any(|&c| next.bits[c]) {
                truncated_at = Some(truncated_at.map_or(t_k, |a: f64| a.min(t_k)));
            }
            set = next;
            k += 1;
        }
    }
    front.truncated_at = truncated_at;
    front.t_now = t_max;
    Ok(GuaranteedFront { front, rho, phases })
}
