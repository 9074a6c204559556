//! Numerical laboratory for the G equation in random finite-range environments.
//!
//! The crate is `no_std` (with `alloc`) and holds the pure computational layer:
//!
//! * [`env`]: seeded random drift fields with unit range of dependence, exact
//!   divergence control and certified norms.
//! * [`frontprop`]: controlled paths, reachable sets, first-passage and waiting
//!   times, guaranteed reachable sets and boundary diagnostics on a grid.
//! * [`flux`]: surface-flux quadrature and the small-flux event.
//! * [`percolation`]: good-site fields, clusters, closed hulls, boundaries and
//!   the skeleton-path construction.
//! * [`shape`]: effective first-passage norm, effective shape and Hamiltonian,
//!   scaling bias and the Hobby–Rice signed partition.
//! * [`homog`]: control-formula solutions, Hausdorff distances and rate fits.
//!
//! File formats, the experiment harness and the CLI live in the `gfront-lab`
//! crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod env;
pub mod flux;
pub mod frontprop;
pub mod grid;
pub mod hash;
pub mod homog;
pub mod math;
pub mod percolation;
pub mod shape;
pub mod stats;

pub use env::{
    build_environment, field_norms, BumpProfile, ConstantField, EnvError, FieldNorms,
    LatticeEnvironment, LinearField, VectorField, ZeroField,
};
pub use grid::{Grid, GridError, Mask};
pub use math::{Mat3, Point, Vector};
