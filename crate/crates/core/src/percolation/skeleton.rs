//! Skeleton of `≤ √d` hops from `x` to `y` through one open cluster.

use super::{cluster_labels, closed_hull, cubes_containing_tol, linf_offsets, PercolationField, Site};
use crate::math::{self, Point};
use alloc::collections::{BTreeSet, VecDeque};
use alloc::vec;
use alloc::vec::Vec;
use thiserror::Error;

const NEAR_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SkeletonError {
    #[error("point {0:?} is not near an open site")]
    NotNearOpen(Point),
    #[error("endpoints lie in different open clusters")]
    DifferentClusters,
    #[error("segment leaves the field's domain")]
    OutsideDomain,
    #[error("detour revisited closed component {0}")]
    CycleGuard(usize),
    #[error("outer boundary of component {0} is disconnected")]
    BrokenBoundary(usize),
    #[error("invalid skeleton: {0}")]
    Invalid(&'static str),
}

/// How a skeleton point was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SkeletonStep {
    Start,
    /// Case 1: `y` itself, within `√d`.
    Terminal,
    /// Case 2: straight advance along the segment.
    Advance,
    /// Case 3: detour around a blocking component.
    Detour,
}

impl SkeletonStep {
    pub fn tag(self) -> u8 {
        match self {
            SkeletonStep::Start => 0,
            SkeletonStep::Terminal => 1,
            SkeletonStep::Advance => 2,
            SkeletonStep::Detour => 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SkeletonPath {
    pub points: Vec<Point>,
    pub steps: Vec<SkeletonStep>,
    /// Components of `domain ∖ 𝔠` that forced a detour.
    pub detours: usize,
    /// `|cl(A)|`, `A` the sites whose cubes meet the segment.
    pub hull_size: usize,
    /// `|A|`.
    pub cover_size: usize,
}

impl SkeletonPath {
    /// Number of hops `k`.
    pub fn hops(&self) -> usize {
        self.points.len().saturating_sub(1)
    }

    pub fn length(&self) -> f64 {
        self.points.windows(2).map(|w| w[0].dist(w[1])).sum()
    }
}

/// Parameter interval of the line `x + s e` inside the closed cube of `c`.
fn cube_interval(dim: usize, x: Point, e: Point, c: Site) -> Option<(f64, f64)> {
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for k in 0..dim {
        let (a, b) = (c[k] as f64 - 0.5 - x[k], c[k] as f64 + 0.5 - x[k]);
        if e[k] == 0.0 {
            if a > NEAR_TOL || b < -NEAR_TOL {
                return None;
            }
        } else {
            let (p, q) = (a / e[k], b / e[k]);
            lo = lo.max(p.min(q));
            hi = hi.min(p.max(q));
        }
    }
    (lo <= hi + NEAR_TOL).then_some((lo, hi))
}

/// Sites whose cubes meet `x + s e`, `s ∈ [a, b]`, with their intervals
/// clipped to `[a, b]`. `None` if one lies outside the domain.
fn cover(field: &PercolationField, x: Point, e: Point, a: f64, b: f64) -> Option<Vec<(usize, f64, f64)>> {
    let dim = field.dim();
    let (p, q) = (x + e * a, x + e * b);
    let mut lo = [0i64; 3];
    let mut hi = [0i64; 3];
    for k in 0..dim {
        lo[k] = math::floor(p[k].min(q[k]) - 0.5) as i64;
        hi[k] = math::ceil(p[k].max(q[k]) + 0.5) as i64;
    }
    let mut out = Vec::new();
    for i in lo[0]..=hi[0] {
        for j in lo[1]..=hi[1] {
            for k in lo[2]..=hi[2] {
                let s = [i, j, k];
                let Some((s0, s1)) = cube_interval(dim, x, e, s) else { continue };
                let (s0, s1) = (s0.max(a), s1.min(b));
                if s0 > s1 + NEAR_TOL {
                    continue;
                }
                out.push((field.index(s)?, s0, s1.max(s0)));
            }
        }
    }
    Some(out)
}

/// Builds the skeleton `x = x₀, …, x_k = y`.
///
/// From the current segment point `x_i`: if `|y − x_i| ≤ √d` the next point
/// is `y`; otherwise if `z = x_i + √d e` lies in the solidified cluster it is
/// `z`; otherwise the last cluster point `x̃` of `[x_i, z]` is followed by
/// a walk along the outer boundary of the component `𝔉` of `domain ∖ 𝔠`
/// entered after `x̃`, ending at the boundary site over the segment that
/// maximizes `p·e`, and the path rejoins the segment at the far end of that
/// site's cube.
pub fn skeleton_path(field: &PercolationField, x: Point, y: Point) -> Result<SkeletonPath, SkeletonError> {
    let dim = field.dim();
    let sqrt_d = math::sqrt(dim as f64);
    let (labels, _) = cluster_labels(field);
    let near_open = |p: Point| -> Vec<usize> {
        cubes_containing_tol(dim, p, NEAR_TOL)
            .into_iter()
            .filter_map(|s| field.index(s))
            .filter(|&i| field.open[i])
            .map(|i| labels[i])
            .collect()
    };
    let cx = near_open(x);
    let cy = near_open(y);
    if cx.is_empty() {
        return Err(SkeletonError::NotNearOpen(x));
    }
    if cy.is_empty() {
        return Err(SkeletonError::NotNearOpen(y));
    }
    let cid = *cx.iter().filter(|c| cy.contains(c)).min().ok_or(SkeletonError::DifferentClusters)?;
    let in_c = |i: usize| labels[i] == cid;
    let near_c = |p: Point| -> bool {
        cubes_containing_tol(dim, p, NEAR_TOL).into_iter().filter_map(|s| field.index(s)).any(in_c)
    };

    let total = x.dist(y);
    let e = if total > 0.0 { (y - x) * (1.0 / total) } else { Point::ZERO };
    let whole = cover(field, x, e, 0.0, total).ok_or(SkeletonError::OutsideDomain)?;
    let a_sites: Vec<usize> = whole.iter().map(|c| c.0).collect();
    let hull_size = closed_hull(field, &a_sites).len();

    // components of domain ∖ 𝔠, computed once
    let offs = linf_offsets(dim);
    let mut comp = vec![usize::MAX; field.len()];
    let mut ncomp = 0;
    let mut nb = Vec::new();
    for s in 0..field.len() {
        if in_c(s) || comp[s] != usize::MAX {
            continue;
        }
        comp[s] = ncomp;
        let mut q = VecDeque::from([s]);
        while let Some(c) = q.pop_front() {
            field.neighbors(c, &offs, &mut nb);
            for &m in &nb {
                if !in_c(m) && comp[m] == usize::MAX {
                    comp[m] = ncomp;
                    q.push_back(m);
                }
            }
        }
        ncomp += 1;
    }

    let mut points = vec![x];
    let mut steps = vec![SkeletonStep::Start];
    let push = |p: Point, st: SkeletonStep, points: &mut Vec<Point>, steps: &mut Vec<SkeletonStep>| {
        if points.last().map_or(true, |l| l.dist(p) > 0.0) {
            points.push(p);
            steps.push(st);
        }
    };
    let mut witnessed = BTreeSet::new();
    let mut s_cur = 0.0;
    loop {
        let cur = x + e * s_cur;
        if total - s_cur <= sqrt_d {
            push(y, SkeletonStep::Terminal, &mut points, &mut steps);
            break;
        }
        let s_z = s_cur + sqrt_d;
        if near_c(x + e * s_z) {
            push(x + e * s_z, SkeletonStep::Advance, &mut points, &mut steps);
            s_cur = s_z;
            continue;
        }
        let piece = cover(field, x, e, s_cur, s_z).ok_or(SkeletonError::OutsideDomain)?;
        let s_tilde = piece.iter().filter(|c| in_c(c.0)).map(|c| c.2).fold(s_cur, f64::max);
        let x_tilde = x + e * s_tilde;
        // blocking site just past x̃
        let probe = x + e * (s_tilde + 1e-7);
        let blocker = cubes_containing_tol(dim, probe, 0.0)
            .into_iter()
            .filter_map(|s| field.index(s))
            .filter(|&i| !in_c(i))
            .min()
            .ok_or(SkeletonError::NotNearOpen(cur))?;
        let fid = comp[blocker];
        if !witnessed.insert(fid) {
            return Err(SkeletonError::CycleGuard(fid));
        }
        // ∂⁺𝔉 inside the domain (all of it lies in 𝔠)
        let mut outer = vec![false; field.len()];
        for i in 0..field.len() {
            if comp[i] == fid {
                field.neighbors(i, &offs, &mut nb);
                for &m in &nb {
                    if comp[m] != fid {
                        outer[m] = true;
                    }
                }
            }
        }
        let p1 = cubes_containing_tol(dim, x_tilde, NEAR_TOL)
            .into_iter()
            .filter_map(|s| field.index(s))
            .filter(|&i| outer[i])
            .min()
            .ok_or(SkeletonError::Invalid("no boundary cube contains the exit point"))?;
        let site_dot = |i: usize| -> f64 {
            let c = field.site(i);
            (0..dim).map(|k| c[k] as f64 * e[k]).sum()
        };
        // argmax of p·e over A ∩ ∂⁺𝔉, ties to the farther exit, then smaller index
        let mut best: Option<(usize, f64, f64)> = None;
        for &(i, _, s1) in &whole {
            if !outer[i] {
                continue;
            }
            let d = site_dot(i);
            let better = match best {
                None => true,
                Some((_, bd, bs)) => d > bd + 1e-12 || (d >= bd - 1e-12 && s1 > bs),
            };
            if better {
                best = Some((i, d, s1));
            }
        }
        let (pl, _, s_rejoin) = best.expect("p1 lies in A ∩ ∂⁺𝔉");
        // shortest walk p1 → pl inside ∂⁺𝔉, neighbors in lexicographic order
        let mut parent = vec![usize::MAX; field.len()];
        parent[p1] = p1;
        let mut q = VecDeque::from([p1]);
        while let Some(c) = q.pop_front() {
            if c == pl {
                break;
            }
            field.neighbors(c, &offs, &mut nb);
            for &m in &nb {
                if outer[m] && parent[m] == usize::MAX {
                    parent[m] = c;
                    q.push_back(m);
                }
            }
        }
        if parent[pl] == usize::MAX {
            return Err(SkeletonError::BrokenBoundary(fid));
        }
        let mut walk = vec![pl];
        while *walk.last().unwrap() != p1 {
            walk.push(parent[*walk.last().unwrap()]);
        }
        walk.reverse();
        push(x_tilde, SkeletonStep::Detour, &mut points, &mut steps);
        for &w in &walk {
            let c = field.site(w);
            let mut p = Point::ZERO;
            for k in 0..dim {
                p[k] = c[k] as f64;
            }
            push(p, SkeletonStep::Detour, &mut points, &mut steps);
        }
        let s_next = s_rejoin.min(total);
        push(x + e * s_next, SkeletonStep::Detour, &mut points, &mut steps);
        s_cur = s_next;
    }
    Ok(SkeletonPath { points, steps, detours: witnessed.len(), hull_size, cover_size: a_sites.len() })
}

/// Checks the two skeleton invariants: hops of length `≤ √d` and every point
/// inside the solidification of the open sites.
pub fn validate_skeleton(field: &PercolationField, path: &SkeletonPath) -> Result<(), SkeletonError> {
    let dim = field.dim();
    let sqrt_d = math::sqrt(dim as f64);
    if path.points.len() != path.steps.len() || path.points.is_empty() {
        return Err(SkeletonError::Invalid("malformed path"));
    }
    for w in path.points.windows(2) {
        if w[0].dist(w[1]) > sqrt_d + 1e-9 {
            return Err(SkeletonError::Invalid("hop longer than sqrt(d)"));
        }
    }
    for p in &path.points {
        let ok = cubes_containing_tol(dim, *p, NEAR_TOL)
            .into_iter()
            .filter_map(|s| field.index(s))
            .any(|i| field.open[i]);
        if !ok {
            return Err(SkeletonError::NotNearOpen(*p));
        }
    }
    Ok(())
}
