//! Seeded random drift fields built from lattice bumps.
//!
//! `V(x) = A Σ_v [curl(a_v φ(x − v)) + δ b_v ∇φ(x − v)]` where the sum runs
//! over the sites of `(1/m)ℤ^d` (`m = 1` by default), `a_v`, `b_v` are i.i.d.
//! uniform on `[−1, 1]`, and `φ` is a radial polynomial bump of radius ≤ 1/2.
//! The curl part is `∇^⊥(aφ)` in 2D and `∇ × (aφ)` with a three-component
//! `a` in 3D.

use crate::hash::{site_key, unit_symmetric};
use crate::math::{self, mat_vec, powi, trace, Mat3, Point, Vector};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("dimension {0} not supported (expected 2 or 3)")]
    BadDimension(usize),
    #[error("bump radius {0} exceeds 1/2 and would break unit range of dependence")]
    RadiusTooLarge(f64),
    #[error("invalid parameter {name}: {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("bump smoothness {0} too low: at least 3 is needed for a C² profile")]
    SmoothnessTooLow(u32),
}

/// Radial bump `φ(x) = c (1 − |x|²/r²)^k` on `|x| < r`, zero outside.
///
/// `c` is chosen so that `sup |∇φ| = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BumpProfile {
    radius: f64,
    smoothness: u32,
    scale: f64,
}

impl Default for BumpProfile {
    fn default() -> Self {
        BumpProfile::new(0.45, 3).expect("default profile is valid")
    }
}

impl BumpProfile {
    pub fn new(radius: f64, smoothness: u32) -> Result<Self, EnvError> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(EnvError::InvalidParameter { name: "radius", value: radius });
        }
        if radius > 0.5 {
            return Err(EnvError::RadiusTooLarge(radius));
        }
        if smoothness < 3 {
            return Err(EnvError::SmoothnessTooLow(smoothness));
        }
        // |∇φ| = 2kc/r² (1−q)^{k−1} |x|, maximized at q* = 1/(2k−1).
        let k = smoothness as f64;
        let qs = 1.0 / (2.0 * k - 1.0);
        let g = 2.0 * k / (radius * radius) * powi(1.0 - qs, smoothness - 1) * radius * math::sqrt(qs);
        Ok(BumpProfile { radius, smoothness, scale: 1.0 / g })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn smoothness(&self) -> u32 {
        self.smoothness
    }

    /// Normalizing constant `c`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    #[inline]
    fn q(&self, y: Point) -> f64 {
        y.norm_sq() / (self.radius * self.radius)
    }

    pub fn value(&self, y: Point) -> f64 {
        let q = self.q(y);
        if q >= 1.0 {
            return 0.0;
        }
        self.scale * powi(1.0 - q, self.smoothness)
    }

    pub fn gradient(&self, y: Point) -> Vector {
        let q = self.q(y);
        if q >= 1.0 {
            return Point::ZERO;
        }
        let k = self.smoothness as f64;
        let r2 = self.radius * self.radius;
        y * (-2.0 * k * self.scale / r2 * powi(1.0 - q, self.smoothness - 1))
    }

    pub fn hessian(&self, y: Point) -> Mat3 {
        let mut h = [[0.0; 3]; 3];
        let q = self.q(y);
        if q >= 1.0 {
            return h;
        }
        let k = self.smoothness as f64;
        let r2 = self.radius * self.radius;
        let w = 1.0 - q;
        let a = -2.0 * k * self.scale / r2 * powi(w, self.smoothness - 1);
        let b = 4.0 * k * (k - 1.0) * self.scale / (r2 * r2) * powi(w, self.smoothness - 2);
        for i in 0..3 {
            for j in 0..3 {
                h[i][j] = b * y[i] * y[j] + if i == j { a } else { 0.0 };
            }
        }
        h
    }

    /// Laplacian in dimension `dim` (which must match the zero pattern of `y`).
    pub fn laplacian(&self, y: Point, dim: usize) -> f64 {
        let q = self.q(y);
        if q >= 1.0 {
            return 0.0;
        }
        let k = self.smoothness as f64;
        let r2 = self.radius * self.radius;
        let w = 1.0 - q;
        let a = -2.0 * k * self.scale / r2 * powi(w, self.smoothness - 1);
        let b = 4.0 * k * (k - 1.0) * self.scale / (r2 * r2) * powi(w, self.smoothness - 2);
        dim as f64 * a + b * y.norm_sq()
    }

    pub fn sup_value(&self) -> f64 {
        self.scale
    }

    /// Always 1 by normalization.
    pub fn sup_gradient(&self) -> f64 {
        1.0
    }

    /// Operator-norm bound of the Hessian. The eigenvalues are
    /// `−2kc/r² (1−q)^{k−2}(1 − (2k−1)q)` (radial) and `−2kc/r² (1−q)^{k−1}`
    /// (tangential); both are bounded by `2kc/r²` in absolute value.
    pub fn sup_hessian(&self) -> f64 {
        let k = self.smoothness as f64;
        let m = 2.0 * k * self.scale / (self.radius * self.radius);
        // radial branch past its sign change peaks at q = 3/(2k−1)
        let q = 3.0 / (2.0 * k - 1.0);
        let radial = m * powi(1.0 - q, self.smoothness - 2) * ((2.0 * k - 1.0) * q - 1.0);
        m.max(radial)
    }

    /// `sup |Δφ|` in dimension `dim`.
    pub fn sup_laplacian(&self, dim: usize) -> f64 {
        self.sup_hessian() * dim as f64
    }
}

/// Certified global bounds on a drift field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldNorms {
    pub sup_v: f64,
    /// `max(1, Lip V)`.
    pub lip_v: f64,
    pub sup_div: f64,
}

/// A deterministic vector field on ℝ^d with analytic derivatives.
pub trait VectorField {
    fn dim(&self) -> usize;
    fn value(&self, x: Point) -> Vector;
    fn jacobian(&self, x: Point) -> Mat3;
    fn divergence(&self, x: Point) -> f64 {
        trace(&self.jacobian(x))
    }
    fn norms(&self) -> FieldNorms;
}

impl<F: VectorField + ?Sized> VectorField for &F {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: Point) -> Vector {
        (**self).value(x)
    }
    fn jacobian(&self, x: Point) -> Mat3 {
        (**self).jacobian(x)
    }
    fn divergence(&self, x: Point) -> f64 {
        (**self).divergence(x)
    }
    fn norms(&self) -> FieldNorms {
        (**self).norms()
    }
}

/// Negated field `−V`; used for backward evolution.
#[derive(Clone, Copy, Debug)]
pub struct Reversed<F>(pub F);

impl<F: VectorField> VectorField for Reversed<F> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn value(&self, x: Point) -> Vector {
        -self.0.value(x)
    }
    fn jacobian(&self, x: Point) -> Mat3 {
        let mut j = self.0.jacobian(x);
        for row in j.iter_mut() {
            for v in row.iter_mut() {
                *v = -*v;
            }
        }
        j
    }
    fn divergence(&self, x: Point) -> f64 {
        -self.0.divergence(x)
    }
    fn norms(&self) -> FieldNorms {
        self.0.norms()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ZeroField {
    pub dim: usize,
}

impl VectorField for ZeroField {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, _: Point) -> Vector {
        Point::ZERO
    }
    fn jacobian(&self, _: Point) -> Mat3 {
        [[0.0; 3]; 3]
    }
    fn norms(&self) -> FieldNorms {
        FieldNorms { sup_v: 0.0, lip_v: 1.0, sup_div: 0.0 }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ConstantField {
    pub dim: usize,
    pub c: Vector,
}

impl VectorField for ConstantField {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, _: Point) -> Vector {
        self.c
    }
    fn jacobian(&self, _: Point) -> Mat3 {
        [[0.0; 3]; 3]
    }
    fn norms(&self) -> FieldNorms {
        FieldNorms { sup_v: self.c.norm(), lip_v: 1.0, sup_div: 0.0 }
    }
}

/// `V(x) = A x`. Unbounded, so `sup_v` is infinite.
#[derive(Clone, Copy, Debug)]
pub struct LinearField {
    pub dim: usize,
    pub a: Mat3,
}

impl VectorField for LinearField {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: Point) -> Vector {
        mat_vec(&self.a, x)
    }
    fn jacobian(&self, _: Point) -> Mat3 {
        self.a
    }
    fn norms(&self) -> FieldNorms {
        let fro: f64 = self.a.iter().flatten().map(|v| v * v).sum();
        FieldNorms {
            sup_v: f64::INFINITY,
            lip_v: math::sqrt(fro).max(1.0),
            sup_div: math::abs(trace(&self.a)),
        }
    }
}

/// Random lattice-bump environment.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeEnvironment {
    seed: u64,
    dim: usize,
    amplitude: f64,
    div_knob: f64,
    profile: BumpProfile,
    sublattice: u32,
}

/// Stream indices of the per-site coefficients.
const STREAM_CURL: u64 = 0;
const STREAM_GRAD: u64 = 3;

/// Builds the environment `V` for `seed`. See [`LatticeEnvironment`].
pub fn build_environment(
    seed: u64,
    dim: usize,
    amplitude: f64,
    div_knob: f64,
    profile: BumpProfile,
) -> Result<LatticeEnvironment, EnvError> {
    if dim != 2 && dim != 3 {
        return Err(EnvError::BadDimension(dim));
    }
    if !(amplitude >= 0.0) || !amplitude.is_finite() {
        return Err(EnvError::InvalidParameter { name: "amplitude", value: amplitude });
    }
    if !(div_knob >= 0.0) || !div_knob.is_finite() {
        return Err(EnvError::InvalidParameter { name: "div_knob", value: div_knob });
    }
    if profile.radius > 0.5 {
        return Err(EnvError::RadiusTooLarge(profile.radius));
    }
    Ok(LatticeEnvironment { seed, dim, amplitude, div_knob, profile, sublattice: 1 })
}

/// Certified bounds for `env`; they hold on all of ℝ^d, so `region` only
/// documents where the caller intends to use them.
pub fn field_norms(env: &LatticeEnvironment, region: &(Point, Point)) -> FieldNorms {
    let _ = region;
    env.norms()
}

impl LatticeEnvironment {
    /// Places bumps on `(1/m)ℤ^d` instead of `ℤ^d`. Range of dependence stays
    /// `2·radius ≤ 1`; bumps may overlap once `m ≥ 2`.
    pub fn with_sublattice(mut self, m: u32) -> Result<Self, EnvError> {
        if m == 0 {
            return Err(EnvError::InvalidParameter { name: "sublattice", value: 0.0 });
        }
        self.sublattice = m;
        Ok(self)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }
    pub fn div_knob(&self) -> f64 {
        self.div_knob
    }
    pub fn profile(&self) -> BumpProfile {
        self.profile
    }
    pub fn sublattice(&self) -> u32 {
        self.sublattice
    }

    fn pitch(&self) -> f64 {
        1.0 / self.sublattice as f64
    }

    /// Curl coefficients (one in 2D, three in 3D) and the gradient coefficient
    /// of site `v` (integer coordinates on the sublattice).
    pub fn coefficients(&self, v: [i64; 3]) -> ([f64; 3], f64) {
        let mut a = [0.0; 3];
        let ncurl = if self.dim == 2 { 1 } else { 3 };
        for (c, slot) in a.iter_mut().enumerate().take(ncurl) {
            *slot = unit_symmetric(site_key(self.seed, v, STREAM_CURL + c as u64));
        }
        let b = unit_symmetric(site_key(self.seed, v, STREAM_GRAD));
        (a, b)
    }

    /// Upper bound on the number of bump supports covering a point.
    pub fn overlap_bound(&self) -> f64 {
        let per_axis = math::floor(2.0 * self.profile.radius * self.sublattice as f64) + 1.0;
        powi(per_axis, self.dim as u32)
    }

    /// Calls `f(site, offset)` for every site whose open bump support contains `x`.
    #[inline]
    fn for_each_site(&self, x: Point, mut f: impl FnMut([i64; 3], Point)) {
        let p = self.pitch();
        let r = self.profile.radius;
        let r2 = r * r;
        let mut lo = [0i64; 3];
        let mut hi = [0i64; 3];
        for k in 0..self.dim {
            lo[k] = math::ceil((x[k] - r) / p) as i64;
            hi[k] = math::floor((x[k] + r) / p) as i64;
        }
        let kz = if self.dim == 3 { (lo[2], hi[2]) } else { (0, 0) };
        for i in lo[0]..=hi[0] {
            let y0 = x[0] - i as f64 * p;
            for j in lo[1]..=hi[1] {
                let y1 = x[1] - j as f64 * p;
                for l in kz.0..=kz.1 {
                    let y2 = if self.dim == 3 { x[2] - l as f64 * p } else { 0.0 };
                    let y = Point([y0, y1, y2]);
                    if y.norm_sq() < r2 {
                        f([i, j, l], y);
                    }
                }
            }
        }
    }

    /// Stream function `ψ = A Σ a_v φ(x − v)` (2D only; 0 in 3D).
    pub fn stream_function(&self, x: Point) -> f64 {
        if self.dim != 2 || self.amplitude == 0.0 {
            return 0.0;
        }
        let mut s = 0.0;
        self.for_each_site(x, |v, y| {
            let (a, _) = self.coefficients(v);
            s += a[0] * self.profile.value(y);
        });
        self.amplitude * s
    }

    /// Gradient potential `Φ = A δ Σ b_v φ(x − v)`, so that the compressible
    /// part equals `∇Φ`.
    pub fn potential(&self, x: Point) -> f64 {
        if self.amplitude == 0.0 || self.div_knob == 0.0 {
            return 0.0;
        }
        let mut s = 0.0;
        self.for_each_site(x, |v, y| {
            let (_, b) = self.coefficients(v);
            s += b * self.profile.value(y);
        });
        self.amplitude * self.div_knob * s
    }

    pub fn eval_field(&self, x: Point) -> Vector {
        if self.amplitude == 0.0 {
            return Point::ZERO;
        }
        let mut acc = Point::ZERO;
        let dk = self.div_knob;
        self.for_each_site(x, |v, y| {
            let (a, b) = self.coefficients(v);
            let g = self.profile.gradient(y);
            let curl = if self.dim == 2 { g.perp() * a[0] } else { g.cross(Point(a)) };
            acc += curl + g * (dk * b);
        });
        acc * self.amplitude
    }

    pub fn eval_jacobian(&self, x: Point) -> Mat3 {
        let mut j = [[0.0; 3]; 3];
        if self.amplitude == 0.0 {
            return j;
        }
        let dk = self.div_knob;
        let dim = self.dim;
        self.for_each_site(x, |v, y| {
            let (a, b) = self.coefficients(v);
            let h = self.profile.hessian(y);
            for c in 0..dim {
                if dim == 2 {
                    // V = a(−∂₂φ, ∂₁φ)
                    j[0][c] += -a[0] * h[1][c];
                    j[1][c] += a[0] * h[0][c];
                } else {
                    // V = ∇φ × a
                    j[0][c] += h[1][c] * a[2] - h[2][c] * a[1];
                    j[1][c] += h[2][c] * a[0] - h[0][c] * a[2];
                    j[2][c] += h[0][c] * a[1] - h[1][c] * a[0];
                }
                for r in 0..dim {
                    j[r][c] += dk * b * h[r][c];
                }
            }
        });
        for row in j.iter_mut() {
            for v in row.iter_mut() {
                *v *= self.amplitude;
            }
        }
        j
    }

    /// `δ A Σ b_v Δφ(x − v)`; the curl part contributes nothing by construction.
    pub fn eval_div(&self, x: Point) -> f64 {
        if self.amplitude == 0.0 || self.div_knob == 0.0 {
            return 0.0;
        }
        let mut s = 0.0;
        self.for_each_site(x, |v, y| {
            let (_, b) = self.coefficients(v);
            s += b * self.profile.laplacian(y, self.dim);
        });
        self.amplitude * self.div_knob * s
    }

    pub fn field_norms(&self) -> FieldNorms {
        let n = self.overlap_bound();
        let a = self.amplitude;
        let dk = self.div_knob;
        let (c2, c) = if self.dim == 2 { (1.0, 1.0) } else { (3.0, math::sqrt(3.0)) };
        let p = &self.profile;
        // curl part and gradient part of one bump are orthogonal
        let sup_v = n * a * math::sqrt(c2 + dk * dk) * p.sup_gradient();
        let lip = n * a * (c + dk) * p.sup_hessian();
        let sup_div = n * a * dk * p.sup_laplacian(self.dim);
        FieldNorms { sup_v, lip_v: lip.max(1.0), sup_div }
    }
}

impl VectorField for LatticeEnvironment {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: Point) -> Vector {
        self.eval_field(x)
    }
    fn jacobian(&self, x: Point) -> Mat3 {
        self.eval_jacobian(x)
    }
    fn divergence(&self, x: Point) -> f64 {
        self.eval_div(x)
    }
    fn norms(&self) -> FieldNorms {
        self.field_norms()
    }
}
