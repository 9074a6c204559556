//! Site percolation layer on boxes of `ℤ^d` with `ℓ∞` nearest-neighbor edges.
//!
//! A [`PercolationField`] stores `G(v) ∈ {0, 1}` (open/closed) on a box of
//! sites. Site sets are passed as linear indices into the field's box
//! ([`Grid`] with unit spacing); sets that may leave the box (outer
//! boundaries) are returned as integer coordinates.

mod skeleton;

pub use skeleton::{skeleton_path, validate_skeleton, SkeletonError, SkeletonPath, SkeletonStep};

use crate::env::VectorField;
use crate::frontprop::{FrontOptions, FrontSolver};
use crate::grid::Grid;
use crate::hash::{site_key, unit_interval};
use crate::math::{self, Point};
use alloc::collections::{BTreeSet, VecDeque};
use alloc::vec;
use alloc::vec::Vec;
use thiserror::Error;

pub type Site = [i64; 3];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PercolationError {
    #[error("invalid parameter {name}: {value}")]
    BadParameter { name: &'static str, value: f64 },
    #[error("front computation was truncated by its local grid at t = {0}")]
    Truncated(f64),
    #[error("box Q_(R+n) does not fit in the field's domain")]
    CubeOutsideDomain,
}

/// Where the site values came from.
#[derive(Clone, Debug, PartialEq)]
pub enum Provenance {
    Synthetic { seed: u64, p: f64 },
    Environment { seed: u64, tau: f64, probe_radius: f64, h: f64, dependence_radius: f64 },
    Explicit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PercolationField {
    /// Site box; cell centers are the integer sites.
    pub domain: Grid,
    pub open: Vec<bool>,
    pub provenance: Provenance,
}

/// `ℓ∞` neighbor offsets (`3^d − 1` of them).
pub fn linf_offsets(dim: usize) -> Vec<Site> {
    let mut out = Vec::new();
    let rz = if dim == 3 { 1 } else { 0 };
    for i in -1..=1i64 {
        for j in -1..=1i64 {
            for k in -rz..=rz {
                if i != 0 || j != 0 || k != 0 {
                    out.push([i, j, k]);
                }
            }
        }
    }
    out
}

/// Site box `[lo, hi]^d` (inclusive).
pub fn site_box(dim: usize, lo: i64, hi: i64) -> Grid {
    let n = (hi - lo + 1).max(1) as usize;
    Grid::new(dim, 1.0, [lo; 3], [n; 3]).expect("valid site box")
}

impl PercolationField {
    pub fn from_bits(domain: Grid, open: Vec<bool>) -> Self {
        assert_eq!(domain.len(), open.len());
        PercolationField { domain, open, provenance: Provenance::Explicit }
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn len(&self) -> usize {
        self.open.len()
    }

    pub fn is_empty(&self) -> bool {
        self.open.is_empty()
    }

    pub fn site(&self, i: usize) -> Site {
        self.domain.coords(i)
    }

    pub fn index(&self, s: Site) -> Option<usize> {
        self.domain.index(s)
    }

    pub fn is_open(&self, s: Site) -> Option<bool> {
        self.index(s).map(|i| self.open[i])
    }

    pub fn open_fraction(&self) -> f64 {
        self.open.iter().filter(|o| **o).count() as f64 / self.open.len() as f64
    }

    /// In-box `ℓ∞` neighbors of site `i`.
    pub fn neighbors(&self, i: usize, offsets: &[Site], out: &mut Vec<usize>) {
        out.clear();
        let c = self.domain.coords(i);
        for o in offsets {
            if let Some(j) = self.domain.index([c[0] + o[0], c[1] + o[1], c[2] + o[2]]) {
                out.push(j);
            }
        }
    }
}

/// i.i.d. Bernoulli(`p`) sites, a pure function of `(seed, site)`.
pub fn synthetic_field(seed: u64, domain: Grid, p: f64) -> Result<PercolationField, PercolationError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(PercolationError::BadParameter { name: "p", value: p });
    }
    let open = (0..domain.len()).map(|i| unit_interval(site_key(seed, domain.coords(i), 0x5045_5243)) < p).collect();
    Ok(PercolationField { domain, open, provenance: Provenance::Synthetic { seed, p } })
}

/// Probe points of `B_{√d}(v)`: the center and the `2d` points `v ± r e_k`.
pub fn probe_stencil(dim: usize, v: Point, radius: f64) -> Vec<Point> {
    let mut out = vec![v];
    for k in 0..dim {
        for s in [-1.0, 1.0] {
            let mut p = v;
            p[k] += s * radius;
            out.push(p);
        }
    }
    out
}

/// Parameters of [`good_site_field`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GoodSiteOptions {
    /// Grid spacing of the local front computations.
    pub h: f64,
    /// Probe radius, `√d` by default.
    pub probe_radius: Option<f64>,
    pub front: FrontOptions,
}

impl GoodSiteOptions {
    pub fn for_dim(dim: usize) -> Self {
        GoodSiteOptions { h: 1.0 / 8.0, probe_radius: None, front: FrontOptions::for_dim(dim) }
    }
}

/// `G(v) = 1` iff `θ(x, y) ≤ τ` for all ordered pairs of probe points of
/// `B_{√d}(v)`.
///
/// Each probe point seeds one front on a local grid large enough to contain
/// every path of duration `τ`, so values are exact for the discretized
/// problem. Site values depend on the field within `(1 + sup_v)τ + √d` of the
/// site; that radius is stored in the provenance.
pub fn good_site_field<F: VectorField>(
    field: &F,
    env_seed: u64,
    domain: Grid,
    tau: f64,
    opts: GoodSiteOptions,
) -> Result<PercolationField, PercolationError> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(PercolationError::BadParameter { name: "tau", value: tau });
    }
    let dim = domain.dim();
    let r = opts.probe_radius.unwrap_or(math::sqrt(dim as f64));
    let sup_v = field.norms().sup_v;
    let reach = (1.0 + if sup_v.is_finite() { sup_v } else { 0.0 }) * tau + 2.0 * opts.h;
    let local = Grid::covering(dim, opts.h, Point::ZERO, r + reach)
        .map_err(|_| PercolationError::BadParameter { name: "h", value: opts.h })?;
    let mut open = vec![false; domain.len()];
    for (i, slot) in open.iter_mut().enumerate() {
        let c = domain.coords(i);
        let mut v = Point::ZERO;
        for k in 0..dim {
            v[k] = c[k] as f64;
        }
        // translate the local grid to the site: cell centers stay on hℤ^d
        let shift = local.nearest_index(v);
        let lo = local.lo();
        let g = Grid::new(dim, opts.h, [lo[0] + shift[0], lo[1] + shift[1], lo[2] + shift[2]], local.shape())
            .expect("shifted grid");
        let probes = probe_stencil(dim, v, r);
        let targets: Vec<usize> = probes.iter().map(|p| g.locate(*p).expect("probe inside local grid")).collect();
        let mut solver = FrontSolver::new(field, &g, opts.front.stencil_radius, false);
        let mut good = true;
        for &src in &targets {
            let mut remaining: Vec<usize> = targets.clone();
            let mut worst = 0.0f64;
            let info = solver.run(&[(src, 0.0)], tau, |c, t| {
                if let Some(pos) = remaining.iter().position(|x| *x == c) {
                    remaining.swap_remove(pos);
                    worst = worst.max(t);
                }
                remaining.is_empty()
            });
            if !remaining.is_empty() || worst > tau {
                good = false;
                if let Some(at) = info.truncated_at {
                    if at <= tau {
                        return Err(PercolationError::Truncated(at));
                    }
                }
                break;
            }
        }
        *slot = good;
    }
    Ok(PercolationField {
        domain,
        open,
        provenance: Provenance::Environment {
            seed: env_seed,
            tau,
            probe_radius: r,
            h: opts.h,
            dependence_radius: reach + r,
        },
    })
}

/// A maximal connected set of sites with constant `G`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cluster {
    pub id: usize,
    pub open: bool,
    /// Sorted linear indices.
    pub sites: Vec<usize>,
}

/// Cluster label of every site plus the clusters themselves, ids ordered by
/// each cluster's smallest site.
pub fn cluster_labels(field: &PercolationField) -> (Vec<usize>, Vec<Cluster>) {
    let n = field.len();
    let offs = linf_offsets(field.dim());
    let mut label = vec![usize::MAX; n];
    let mut clusters = Vec::new();
    let mut queue = VecDeque::new();
    let mut nb = Vec::new();
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        let id = clusters.len();
        let color = field.open[start];
        let mut sites = vec![start];
        label[start] = id;
        queue.push_back(start);
        while let Some(c) = queue.pop_front() {
            field.neighbors(c, &offs, &mut nb);
            for &m in &nb {
                if label[m] == usize::MAX && field.open[m] == color {
                    label[m] = id;
                    sites.push(m);
                    queue.push_back(m);
                }
            }
        }
        sites.sort_unstable();
        clusters.push(Cluster { id, open: color, sites });
    }
    (label, clusters)
}

pub fn clusters(field: &PercolationField) -> Vec<Cluster> {
    cluster_labels(field).1
}

/// `cl(S)`: closed sites joined by a path of closed sites to a root, where
/// the roots are the closed sites of `S` and the closed sites adjacent to `S`.
pub fn closed_hull(field: &PercolationField, s: &[usize]) -> Vec<usize> {
    let offs = linf_offsets(field.dim());
    let mut seen = vec![false; field.len()];
    let mut queue = VecDeque::new();
    let mut nb = Vec::new();
    for &v in s {
        if !field.open[v] && !seen[v] {
            seen[v] = true;
            queue.push_back(v);
        }
        field.neighbors(v, &offs, &mut nb);
        for &m in &nb {
            if !field.open[m] && !seen[m] {
                seen[m] = true;
                queue.push_back(m);
            }
        }
    }
    while let Some(c) = queue.pop_front() {
        field.neighbors(c, &offs, &mut nb);
        for &m in &nb {
            if !field.open[m] && !seen[m] {
                seen[m] = true;
                queue.push_back(m);
            }
        }
    }
    (0..field.len()).filter(|i| seen[*i]).collect()
}

/// Inner and outer `ℓ∞` boundaries of `E` in `ℤ^d` (sorted coordinates).
pub fn boundaries(dim: usize, e: &[Site]) -> (Vec<Site>, Vec<Site>) {
    let set: BTreeSet<Site> = e.iter().copied().collect();
    let offs = linf_offsets(dim);
    let mut inner = BTreeSet::new();
    let mut outer = BTreeSet::new();
    for s in &set {
        for o in &offs {
            let q = [s[0] + o[0], s[1] + o[1], s[2] + o[2]];
            if !set.contains(&q) {
                inner.insert(*s);
                outer.insert(q);
            }
        }
    }
    (inner.into_iter().collect(), outer.into_iter().collect())
}

/// Inner and outer boundaries of `E ⊆ box` relative to the box: neighbors
/// outside the box are ignored.
pub fn boundaries_in(domain: &Grid, e: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let offs = linf_offsets(domain.dim());
    let mut member = vec![false; domain.len()];
    for &i in e {
        member[i] = true;
    }
    let mut inner = BTreeSet::new();
    let mut outer = BTreeSet::new();
    for &i in e {
        let c = domain.coords(i);
        for o in &offs {
            if let Some(j) = domain.index([c[0] + o[0], c[1] + o[1], c[2] + o[2]]) {
                if !member[j] {
                    inner.insert(i);
                    outer.insert(j);
                }
            }
        }
    }
    (inner.into_iter().collect(), outer.into_iter().collect())
}

/// Connected components (`ℓ∞` adjacency) of a subset of the box.
pub fn components(domain: &Grid, set: &[usize]) -> Vec<Vec<usize>> {
    let offs = linf_offsets(domain.dim());
    let mut member = vec![false; domain.len()];
    for &i in set {
        member[i] = true;
    }
    let mut seen = vec![false; domain.len()];
    let mut out = Vec::new();
    let mut sorted: Vec<usize> = set.to_vec();
    sorted.sort_unstable();
    for &s in &sorted {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut comp = vec![s];
        let mut q = VecDeque::from([s]);
        while let Some(c) = q.pop_front() {
            let cc = domain.coords(c);
            for o in &offs {
                if let Some(j) = domain.index([cc[0] + o[0], cc[1] + o[1], cc[2] + o[2]]) {
                    if member[j] && !seen[j] {
                        seen[j] = true;
                        comp.push(j);
                        q.push_back(j);
                    }
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

pub fn is_connected(domain: &Grid, set: &[usize]) -> bool {
    set.is_empty() || components(domain, set).len() == 1
}

/// For every component `𝔇` of `cube ∖ C`, checks that `∂⁻𝔇` and `∂⁺𝔇`
/// (taken relative to the cube) are connected.
pub fn check_unicoherence(cube: &Grid, c: &[usize]) -> bool {
    let mut in_c = vec![false; cube.len()];
    for &i in c {
        in_c[i] = true;
    }
    let rest: Vec<usize> = (0..cube.len()).filter(|i| !in_c[*i]).collect();
    components(cube, &rest).iter().all(|d| {
        let (inner, outer) = boundaries_in(cube, d);
        is_connected(cube, &inner) && is_connected(cube, &outer)
    })
}

/// `σ(E) = E + [−1/2, 1/2]^d`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Solidification {
    pub dim: usize,
    pub sites: BTreeSet<Site>,
}

pub fn solidify(dim: usize, e: &[Site]) -> Solidification {
    Solidification { dim, sites: e.iter().copied().collect() }
}

/// Sites whose closed unit cube contains `x` (up to `2^d`).
pub fn cubes_containing(dim: usize, x: Point) -> Vec<Site> {
    cubes_containing_tol(dim, x, 0.0)
}

pub(crate) fn cubes_containing_tol(dim: usize, x: Point, tol: f64) -> Vec<Site> {
    let mut cand: [[i64; 2]; 3] = [[0, 0]; 3];
    for k in 0..3 {
        if k < dim {
            let a = math::floor(x[k] + 0.5 + tol) as i64;
            let b = math::ceil(x[k] - 0.5 - tol) as i64;
            cand[k] = [a.min(b), a.max(b)];
        }
    }
    let mut out = Vec::new();
    for &i in &cand[0][..if cand[0][0] == cand[0][1] { 1 } else { 2 }] {
        for &j in &cand[1][..if cand[1][0] == cand[1][1] { 1 } else { 2 }] {
            for &k in &cand[2][..if cand[2][0] == cand[2][1] { 1 } else { 2 }] {
                let s = [i, j, k];
                if (0..dim).all(|a| math::abs(x[a] - s[a] as f64) <= 0.5 + tol) {
                    out.push(s);
                }
            }
        }
    }
    out
}

impl Solidification {
    pub fn contains(&self, x: Point) -> bool {
        cubes_containing(self.dim, x).iter().any(|s| self.sites.contains(s))
    }

    pub fn volume(&self) -> f64 {
        self.sites.len() as f64
    }
}

/// Output of [`big_open_cluster`].
#[derive(Clone, Debug, PartialEq)]
pub struct BigClusterReport {
    /// Largest open cluster of `𝒬_{R+n}` (sorted indices into the field box),
    /// `None` when there is no open site.
    pub cluster: Option<Vec<usize>>,
    /// Largest component of `𝒬_{R+n} ∖ 𝔠` meeting `𝒬_R`.
    pub max_bad: usize,
    pub n: usize,
}

impl BigClusterReport {
    /// Event `E_n`.
    pub fn holds(&self) -> bool {
        self.cluster.is_some() && self.max_bad <= self.n
    }
}

/// Largest open cluster of `𝒬_{R+n} = [−(R+n), R+n]^d` (connectivity within
/// that cube; ties go to the cluster with the smaller first site).
pub fn big_open_cluster(field: &PercolationField, r: i64, n: usize) -> Result<BigClusterReport, PercolationError> {
    let dim = field.dim();
    let outer = r + n as i64;
    let cube = site_box(dim, -outer, outer);
    let mut bits = Vec::with_capacity(cube.len());
    let mut map = Vec::with_capacity(cube.len());
    for i in 0..cube.len() {
        let s = cube.coords(i);
        let j = field.index(s).ok_or(PercolationError::CubeOutsideDomain)?;
        bits.push(field.open[j]);
        map.push(j);
    }
    let sub = PercolationField::from_bits(cube.clone(), bits);
    let cl = clusters(&sub);
    let best = cl.iter().filter(|c| c.open).max_by(|a, b| a.sites.len().cmp(&b.sites.len()).then(b.id.cmp(&a.id)));
    let Some(best) = best else {
        return Ok(BigClusterReport { cluster: None, max_bad: cube.len(), n });
    };
    let mut in_c = vec![false; cube.len()];
    for &i in &best.sites {
        in_c[i] = true;
    }
    let rest: Vec<usize> = (0..cube.len()).filter(|i| !in_c[*i]).collect();
    let mut max_bad = 0;
    for comp in components(&cube, &rest) {
        let meets = comp.iter().any(|&i| {
            let s = cube.coords(i);
            (0..dim).all(|k| s[k].abs() <= r)
        });
        if meets {
            max_bad = max_bad.max(comp.len());
        }
    }
    let mut cluster: Vec<usize> = best.sites.iter().map(|&i| map[i]).collect();
    cluster.sort_unstable();
    Ok(BigClusterReport { cluster: Some(cluster), max_bad, n })
}

#[cfg(test)]
mod tests;
