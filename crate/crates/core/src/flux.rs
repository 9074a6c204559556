//! Surface flux of a drift field through axis-aligned faces, the small-flux
//! event `E(R₁, R₀, ε)` and fluxes through subsets of `∂Q_R`.
//!
//! `Q_R = [−R, R]^d`. A face is an axis-aligned `(d−1)`-cube with a normal
//! axis and an orientation sign.

use crate::env::VectorField;
use crate::math::{self, gauss_legendre, Point};
use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FluxError {
    #[error("invalid parameter {name}: {value}")]
    BadParameter { name: &'static str, value: f64 },
}

fn bad(name: &'static str, value: f64) -> FluxError {
    FluxError::BadParameter { name, value }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FaceCube {
    pub center: Point,
    pub radius: f64,
    /// Index of the normal axis.
    pub axis: usize,
    /// `+1` or `−1`: orientation of the normal `sign · e_axis`.
    pub sign: f64,
}

impl FaceCube {
    pub fn new(center: Point, radius: f64, axis: usize, sign: f64) -> Self {
        FaceCube { center, radius, axis, sign: if sign < 0.0 { -1.0 } else { 1.0 } }
    }

    /// `(2r)^{d−1}`.
    pub fn area(&self, dim: usize) -> f64 {
        math::powi(2.0 * self.radius, dim as u32 - 1)
    }

    pub fn flipped(&self) -> Self {
        FaceCube { sign: -self.sign, ..*self }
    }
}

fn tangential_axes(dim: usize, axis: usize) -> Vec<usize> {
    (0..dim).filter(|k| *k != axis).collect()
}

/// A quadrature value with an error estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FluxValue {
    pub value: f64,
    /// `|Q(2n panels) − Q(n panels)|`.
    pub error: f64,
}

/// Tensor Gauss–Legendre on `panels^{d−1}` equal sub-faces of `face`.
fn face_quadrature<F: VectorField>(field: &F, face: &FaceCube, order: usize, panels: usize) -> f64 {
    let dim = field.dim();
    let (xs, ws) = gauss_legendre(order);
    let tang = tangential_axes(dim, face.axis);
    let w = 2.0 * face.radius / panels as f64;
    let jac = math::powi(w / 2.0, dim as u32 - 1);
    let mut total = 0.0;
    let mut p = face.center;
    let lo: Vec<f64> = tang.iter().map(|&a| face.center[a] - face.radius).collect();
    if dim == 2 {
        let a = tang[0];
        for i in 0..panels {
            let mid = lo[0] + (i as f64 + 0.5) * w;
            for (x, wt) in xs.iter().zip(&ws) {
                p[a] = mid + x * w / 2.0;
                total += wt * field.value(p)[face.axis];
            }
        }
    } else {
        let (a, b) = (tang[0], tang[1]);
        for i in 0..panels {
            let ma = lo[0] + (i as f64 + 0.5) * w;
            for j in 0..panels {
                let mb = lo[1] + (j as f64 + 0.5) * w;
                for (x, wx) in xs.iter().zip(&ws) {
                    p[a] = ma + x * w / 2.0;
                    for (y, wy) in xs.iter().zip(&ws) {
                        p[b] = mb + y * w / 2.0;
                        total += wx * wy * field.value(p)[face.axis];
                    }
                }
            }
        }
    }
    face.sign * total * jac
}

/// `∫_B V·ν` over one face. Panels are at most 1/8 wide; the error estimate
/// compares against a run with twice as many panels per axis.
pub fn cube_flux<F: VectorField>(field: &F, face: &FaceCube, order: usize) -> Result<FluxValue, FluxError> {
    if order < 2 {
        return Err(bad("quad_order", order as f64));
    }
    if !(face.radius >= 0.0) || !face.radius.is_finite() {
        return Err(bad("radius", face.radius));
    }
    if face.radius == 0.0 {
        return Ok(FluxValue { value: 0.0, error: 0.0 });
    }
    let panels = (math::ceil(2.0 * face.radius / 0.125) as usize).max(1);
    let coarse = face_quadrature(field, face, order, panels);
    let fine = face_quadrature(field, face, order, 2 * panels);
    Ok(FluxValue { value: fine, error: math::abs(fine - coarse) })
}

/// Flux out of the full cube `center + [−r, r]^d` through all `2d` faces.
pub fn closed_cube_flux<F: VectorField>(field: &F, center: Point, r: f64, order: usize) -> Result<FluxValue, FluxError> {
    let mut v = 0.0;
    let mut e = 0.0;
    for k in 0..field.dim() {
        for s in [-1.0, 1.0] {
            let mut c = center;
            c[k] += s * r;
            let f = cube_flux(field, &FaceCube::new(c, r, k, s), order)?;
            v += f.value;
            e += f.error;
        }
    }
    Ok(FluxValue { value: v, error: e })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FluxOptions {
    /// `C` in the family pitch `min(ε/(C·Lip V), R₀/4)`.
    pub pitch_const: f64,
    /// Gauss points per axis on each pitch-sized panel.
    pub order: usize,
    /// Work cap (field evaluations plus enumerated faces). The pitch is
    /// doubled until the estimate fits, and the report is marked `sampled`.
    pub budget: f64,
}

impl Default for FluxOptions {
    fn default() -> Self {
        FluxOptions { pitch_const: 4.0, order: 4, budget: 6.0e7 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FluxEventReport {
    pub r1: f64,
    pub r0: f64,
    pub eps: f64,
    pub holds: bool,
    pub worst_cube: Option<FaceCube>,
    /// `max |∫_B V·ν| / (ε|B|)` over the enumerated family.
    pub worst_ratio: f64,
    pub pitch: f64,
    /// True when the pitch was coarsened to stay within budget.
    pub sampled: bool,
    pub faces_checked: u64,
}

/// Worst flux ratio for every radius on the pitch lattice in `[R₀, R₁]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FluxProfile {
    pub r1: f64,
    pub eps: f64,
    pub pitch: f64,
    pub sampled: bool,
    pub radii: Vec<f64>,
    pub worst: Vec<(f64, FaceCube)>,
    pub faces_checked: Vec<u64>,
}

impl FluxProfile {
    /// Event report for `E(R₁, r0, ε)` using radii `≥ r0`.
    pub fn report(&self, r0: f64) -> FluxEventReport {
        let mut worst_ratio = 0.0;
        let mut worst_cube = None;
        let mut checked = 0;
        for (i, r) in self.radii.iter().enumerate() {
            if *r + 1e-12 < r0 {
                continue;
            }
            checked += self.faces_checked[i];
            let (ratio, cube) = self.worst[i];
            if ratio > worst_ratio || worst_cube.is_none() {
                worst_ratio = ratio;
                worst_cube = Some(cube);
            }
        }
        FluxEventReport {
            r1: self.r1,
            r0,
            eps: self.eps,
            holds: worst_ratio <= 1.0,
            worst_cube,
            worst_ratio,
            pitch: self.pitch,
            sampled: self.sampled,
            faces_checked: checked,
        }
    }
}

/// Tests membership in `E(R₁, R₀, ε)`: every face of radius in `[R₀, R₁]`
/// meeting `Q_{R₁}` has `|∫_B V·ν| ≤ ε|B|`, over faces with centers and radii
/// on the pitch lattice.
pub fn check_flux_event<F: VectorField>(
    field: &F,
    r1: f64,
    r0: f64,
    eps: f64,
    opts: FluxOptions,
) -> Result<FluxEventReport, FluxError> {
    Ok(flux_radius_profile(field, r1, r0, eps, opts)?.report(r0))
}

fn choose_pitch(dim: usize, r1: f64, r0: f64, eps: f64, lip: f64, opts: &FluxOptions) -> (f64, bool) {
    let target = (eps / (opts.pitch_const * lip)).min(r0 / 4.0);
    // power of two so integer radii stay on the lattice
    let mut p = math::powf(2.0, math::floor(math::ln(target) / core::f64::consts::LN_2));
    let cost = |p: f64| -> f64 {
        let n = 6.0 * r1 / p;
        let planes = dim as f64 * (2.0 * r1 / p + 1.0);
        let q = math::powi(opts.order as f64, dim as u32 - 1);
        let evals = planes * math::powi(n, dim as u32 - 1) * q;
        let radii = (r1 - r0) / p + 1.0;
        let faces = planes * radii * math::powi(4.0 * r1 / p, dim as u32 - 1);
        evals * 20.0 + faces
    };
    let mut sampled = false;
    while cost(p) > opts.budget && p < r0 / 2.0 {
        p *= 2.0;
        sampled = true;
    }
    (p, sampled)
}

pub fn flux_radius_profile<F: VectorField>(
    field: &F,
    r1: f64,
    r0: f64,
    eps: f64,
    opts: FluxOptions,
) -> Result<FluxProfile, FluxError> {
    if !(r0 >= 1.0) || !(r1 >= r0) || !r1.is_finite() {
        return Err(bad("R0/R1", r0));
    }
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(bad("eps", eps));
    }
    if opts.order < 1 {
        return Err(bad("order", opts.order as f64));
    }
    let dim = field.dim();
    let lip = field.norms().lip_v;
    let (p, sampled) = choose_pitch(dim, r1, r0, eps, lip, &opts);
    let j_lo = math::ceil(r0 / p - 1e-9) as i64;
    let j_hi = math::floor(r1 / p + 1e-9) as i64;
    let nr = (j_hi - j_lo + 1).max(0) as usize;
    let c1 = math::floor(r1 / p + 1e-9) as i64;
    let m = 3 * c1 + 1;
    let width = (2 * m + 1) as usize;
    let (xs, ws) = gauss_legendre(opts.order);
    let mut worst = vec![(0.0f64, FaceCube::new(Point::ZERO, 0.0, 0, 1.0)); nr];
    let mut checked = vec![0u64; nr];
    let mut prefix = vec![0.0f64; if dim == 2 { width + 1 } else { (width + 1) * (width + 1) }];
    for axis in 0..dim {
        let tang = tangential_axes(dim, axis);
        for iz in -c1..=c1 {
            let z = iz as f64 * p;
            // lattice coordinate k sits at k·p; panel i spans [(i−m)p, (i−m+1)p]
            if dim == 2 {
                let a = tang[0];
                prefix[0] = 0.0;
                let mut pt = Point::ZERO;
                pt[axis] = z;
                for i in 0..width {
                    let lo = (i as i64 - m) as f64 * p;
                    let mut s = 0.0;
                    for (x, w) in xs.iter().zip(&ws) {
                        pt[a] = lo + (x + 1.0) * 0.5 * p;
                        s += w * field.value(pt)[axis];
                    }
                    prefix[i + 1] = prefix[i] + s * 0.5 * p;
                }
                // P(k) for lattice coordinate k ↔ prefix[k + m]
                for (ri, j) in (j_lo..=j_hi).enumerate() {
                    let area = 2.0 * j as f64 * p;
                    let bound = c1 + j;
                    let mut best = worst[ri];
                    for ic in -bound..=bound {
                        let b = (ic + j + m) as usize;
                        let a0 = (ic - j + m) as usize;
                        let f = prefix[b] - prefix[a0];
                        let ratio = math::abs(f) / (eps * area);
                        if ratio > best.0 {
                            let mut c = Point::ZERO;
                            c[axis] = z;
                            c[a] = ic as f64 * p;
                            best = (ratio, FaceCube::new(c, j as f64 * p, axis, if f >= 0.0 { 1.0 } else { -1.0 }));
                        }
                    }
                    checked[ri] += (2 * bound + 1) as u64;
                    worst[ri] = best;
                }
            } else {
                let (a, b) = (tang[0], tang[1]);
                let w1 = width + 1;
                for v in prefix.iter_mut().take(w1) {
                    *v = 0.0;
                }
                let mut pt = Point::ZERO;
                pt[axis] = z;
                for i in 0..width {
                    prefix[(i + 1) * w1] = 0.0;
                    let lo_a = (i as i64 - m) as f64 * p;
                    let mut row = 0.0;
                    for jj in 0..width {
                        let lo_b = (jj as i64 - m) as f64 * p;
                        let mut s = 0.0;
                        for (x, wx) in xs.iter().zip(&ws) {
                            pt[a] = lo_a + (x + 1.0) * 0.5 * p;
                            for (y, wy) in xs.iter().zip(&ws) {
                                pt[b] = lo_b + (y + 1.0) * 0.5 * p;
                                s += wx * wy * field.value(pt)[axis];
                            }
                        }
                        row += s * 0.25 * p * p;
                        prefix[(i + 1) * w1 + jj + 1] = prefix[i * w1 + jj + 1] + row;
                    }
                }
                let at = |u: i64, v: i64| prefix[(u + m) as usize * w1 + (v + m) as usize];
                for (ri, j) in (j_lo..=j_hi).enumerate() {
                    let area = math::powi(2.0 * j as f64 * p, 2);
                    let bound = c1 + j;
                    let mut best = worst[ri];
                    for ia in -bound..=bound {
                        for ib in -bound..=bound {
                            let f = at(ia + j, ib + j) - at(ia - j, ib + j) - at(ia + j, ib - j) + at(ia - j, ib - j);
                            let ratio = math::abs(f) / (eps * area);
                            if ratio > best.0 {
                                let mut c = Point::ZERO;
                                c[axis] = z;
                                c[a] = ia as f64 * p;
                                c[b] = ib as f64 * p;
                                best = (ratio, FaceCube::new(c, j as f64 * p, axis, if f >= 0.0 { 1.0 } else { -1.0 }));
                            }
                        }
                    }
                    checked[ri] += ((2 * bound + 1) * (2 * bound + 1)) as u64;
                    worst[ri] = best;
                }
            }
        }
    }
    let radii = (j_lo..=j_hi).map(|j| j as f64 * p).collect();
    Ok(FluxProfile { r1, eps, pitch: p, sampled, radii, worst, faces_checked: checked })
}

/// A subset `D` of `∂Q_R` made of equal square patches: `n` patches per side
/// on each of the `2d` faces. Face `2k` is `{x_k = −R}`, face `2k + 1` is
/// `{x_k = R}`; patches are indexed row-major over the tangential axes in
/// increasing order.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryMask {
    pub dim: usize,
    pub radius: f64,
    pub n: usize,
    pub faces: Vec<Vec<bool>>,
}

impl BoundaryMask {
    pub fn new(dim: usize, radius: f64, n: usize, fill: bool) -> Self {
        let per = math::powi(n as f64, dim as u32 - 1) as usize;
        BoundaryMask { dim, radius, n, faces: vec![vec![fill; per]; 2 * dim] }
    }

    fn patch_index(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, i| acc * self.n + i)
    }

    pub fn set(&mut self, face: usize, idx: &[usize], v: bool) {
        let i = self.patch_index(idx);
        self.faces[face][i] = v;
    }

    pub fn patch_side(&self) -> f64 {
        2.0 * self.radius / self.n as f64
    }
}

/// Outward flux through the masked subset `D` and the `(d−2)`-measure of its
/// relative boundary in `∂Q_R` (a point count in 2D, a length in 3D).
pub fn boundary_subset_flux<F: VectorField>(field: &F, mask: &BoundaryMask, order: usize) -> Result<(f64, f64), FluxError> {
    let dim = mask.dim;
    if dim != field.dim() {
        return Err(bad("dim", dim as f64));
    }
    let n = mask.n as i64;
    let w = mask.patch_side();
    let mut flux = 0.0;
    // boundary pieces keyed by doubled integer coordinates on [0, 2n]^d
    let mut pieces: BTreeMap<[i64; 3], (u8, u8)> = BTreeMap::new();
    for face in 0..2 * dim {
        let k = face / 2;
        let s = if face % 2 == 0 { -1.0 } else { 1.0 };
        let kc = if face % 2 == 0 { 0 } else { 2 * n };
        let tang = tangential_axes(dim, k);
        let per = mask.faces[face].len();
        for lin in 0..per {
            let idx: Vec<i64> = if dim == 2 {
                vec![lin as i64]
            } else {
                vec![lin as i64 / n, lin as i64 % n]
            };
            let sel = mask.faces[face][lin];
            if sel {
                let mut c = Point::ZERO;
                c[k] = s * mask.radius;
                for (t, &a) in tang.iter().enumerate() {
                    c[a] = -mask.radius + (idx[t] as f64 + 0.5) * w;
                }
                flux += face_quadrature(field, &FaceCube::new(c, w / 2.0, k, s), order.max(2), 1);
            }
            // the (d−2)-pieces of this patch's boundary
            let mut add = |key: [i64; 3]| {
                let e = pieces.entry(key).or_insert((0, 0));
                e.0 += 1;
                if sel {
                    e.1 += 1;
                }
            };
            if dim == 2 {
                for end in [0, 2] {
                    let mut key = [0i64; 3];
                    key[k] = kc;
                    key[tang[0]] = 2 * idx[0] + end;
                    add(key);
                }
            } else {
                for (t, &a) in tang.iter().enumerate() {
                    let other = tang[1 - t];
                    for end in [0, 2] {
                        let mut key = [0i64; 3];
                        key[k] = kc;
                        key[a] = 2 * idx[t] + end;
                        key[other] = 2 * idx[1 - t] + 1;
                        add(key);
                    }
                }
            }
        }
    }
    let piece_measure = if dim == 2 { 1.0 } else { w };
    let mut perimeter = 0.0;
    for (total, sel) in pieces.values() {
        if *sel > 0 && *sel < *total {
            perimeter += piece_measure;
        }
    }
    Ok((flux, perimeter))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{build_environment, BumpProfile, ConstantField, ZeroField};

    #[test]
    fn constant_field_face_flux() {
        let f = ConstantField { dim: 2, c: Point::new2(1.0, 0.0) };
        let v = cube_flux(&f, &FaceCube::new(Point::ZERO, 1.5, 0, 1.0), 6).unwrap();
        assert!((v.value - 3.0).abs() < 1e-12);
        let f3 = ConstantField { dim: 3, c: Point::new3(0.0, 0.0, 2.0) };
        let v = cube_flux(&f3, &FaceCube::new(Point::ZERO, 0.5, 2, -1.0), 6).unwrap();
        assert!((v.value + 2.0).abs() < 1e-12);
    }

    #[test]
    fn divergence_free_closed_cubes() {
        for dim in [2, 3] {
            let env = build_environment(3, dim, 2.0, 0.0, BumpProfile::default()).unwrap();
            let v = closed_cube_flux(&env, Point::new3(0.3, -0.2, 0.1), 1.3, 6).unwrap();
            assert!(v.value.abs() < 1e-9 + 10.0 * v.error, "{dim}: {:?}", v);
        }
    }

    #[test]
    fn orientation_flips_sign() {
        let env = build_environment(1, 2, 2.0, 0.3, BumpProfile::default()).unwrap();
        let f = FaceCube::new(Point::new2(0.2, 0.7), 2.0, 1, 1.0);
        let a = cube_flux(&env, &f, 6).unwrap().value;
        let b = cube_flux(&env, &f.flipped(), 6).unwrap().value;
        assert_eq!(a, -b);
    }

    #[test]
    fn zero_field_event_holds() {
        let r = check_flux_event(&ZeroField { dim: 2 }, 4.0, 2.0, 0.1, FluxOptions::default()).unwrap();
        assert!(r.holds && r.worst_ratio == 0.0);
    }

    #[test]
    fn constant_field_event_ratio() {
        let f = ConstantField { dim: 2, c: Point::new2(0.5, 0.0) };
        let r = check_flux_event(&f, 4.0, 2.0, 0.2, FluxOptions::default()).unwrap();
        assert!(!r.holds);
        assert!((r.worst_ratio - 2.5).abs() < 1e-9, "{}", r.worst_ratio);
        assert_eq!(r.worst_cube.unwrap().axis, 0);
    }

    #[test]
    fn empty_and_full_boundary_masks() {
        let env = build_environment(2, 2, 2.0, 0.0, BumpProfile::default()).unwrap();
        let empty = BoundaryMask::new(2, 3.0, 12, false);
        assert_eq!(boundary_subset_flux(&env, &empty, 6).unwrap(), (0.0, 0.0));
        let full = BoundaryMask::new(2, 3.0, 48, true);
        let (fl, per) = boundary_subset_flux(&env, &full, 6).unwrap();
        assert!(fl.abs() < 1e-6 && per == 0.0, "{fl}");
        let mut half = BoundaryMask::new(3, 2.0, 4, false);
        for i in 0..4 {
            for j in 0..2 {
                half.set(1, &[i, j], true);
            }
        }
        let z3 = ZeroField { dim: 3 };
        let (_, per) = boundary_subset_flux(&z3, &half, 2).unwrap();
        // a 4 × 2 block of unit patches: perimeter 2·(4 + 2) = 12
        assert!((per - 12.0).abs() < 1e-12, "{per}");
    }
}
