//! Controlled paths `Ẋ = α + V(X)` by classical RK4.

use super::FrontError;
use crate::env::VectorField;
use crate::math::{Point, Vector};
use alloc::vec::Vec;

/// Piecewise-constant control with values in the closed unit ball.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseControl {
    pieces: Vec<(f64, Vector)>,
}

impl PiecewiseControl {
    /// `pieces` are `(duration, α)` in order of elapsed time.
    pub fn new(pieces: Vec<(f64, Vector)>) -> Result<Self, FrontError> {
        for (i, (d, a)) in pieces.iter().enumerate() {
            if !(*d > 0.0) || !d.is_finite() {
                return Err(FrontError::BadParameter { name: "piece duration", value: *d });
            }
            let n = a.norm();
            if !(n <= 1.0 + 1e-12) {
                return Err(FrontError::ControlOutsideBall { index: i, norm: n });
            }
        }
        Ok(PiecewiseControl { pieces })
    }

    pub fn constant(alpha: Vector, duration: f64) -> Result<Self, FrontError> {
        Self::new(alloc::vec![(duration, alpha)])
    }

    pub fn duration(&self) -> f64 {
        self.pieces.iter().map(|p| p.0).sum()
    }

    pub fn pieces(&self) -> &[(f64, Vector)] {
        &self.pieces
    }
}

/// Integrates from `x0` over elapsed time `|t|`; negative `t` integrates the
/// same equation backward in time. Returns the sampled path including `x0`
/// and the endpoint. Steps never straddle a control switch.
pub fn shoot_path<F: VectorField>(
    field: &F,
    x0: Point,
    control: &PiecewiseControl,
    t: f64,
    substep: f64,
) -> Result<Vec<Point>, FrontError> {
    if !(substep > 0.0) || !substep.is_finite() {
        return Err(FrontError::BadParameter { name: "substep", value: substep });
    }
    if !t.is_finite() {
        return Err(FrontError::BadParameter { name: "t", value: t });
    }
    let span = t.abs();
    if control.duration() < span * (1.0 - 1e-12) {
        return Err(FrontError::BadParameter { name: "control duration", value: control.duration() });
    }
    let dir = if t < 0.0 { -1.0 } else { 1.0 };
    let mut out = alloc::vec![x0];
    let mut x = x0;
    let mut elapsed = 0.0;
    for &(dur, alpha) in control.pieces() {
        if elapsed >= span {
            break;
        }
        let len = dur.min(span - elapsed);
        let n = (crate::math::ceil(len / substep) as usize).max(1);
        let hs = dir * len / n as f64;
        let f = |p: Point| alpha + field.value(p);
        for _ in 0..n {
            let k1 = f(x);
            let k2 = f(x + k1 * (0.5 * hs));
            let k3 = f(x + k2 * (0.5 * hs));
            let k4 = f(x + k3 * hs);
            x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (hs / 6.0);
            out.push(x);
        }
        elapsed += len;
    }
    Ok(out)
}
