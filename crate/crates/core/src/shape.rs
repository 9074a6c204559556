//! Effective shape: `θ̄` estimation, the shape `𝒮 = {θ̄ ≤ 1}`, its support
//! function `H̄`, subadditivity defects and signed path partitions.

use crate::env::VectorField;
use crate::frontprop::{sample_directions, FrontError, FrontOptions, FrontSolver};
use crate::grid::{Grid, Mask};
use crate::math::{self, Point};
use crate::stats::{self, linear_fit};
use alloc::vec;
use alloc::vec::Vec;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShapeError {
    #[error("need at least {need} radii, got {got}")]
    TooFewRadii { need: usize, got: usize },
    #[error("need at least {need} seeds, got {got}")]
    TooFewSeeds { need: usize, got: usize },
    #[error("need at least {need} directions, got {got}")]
    TooFewDirections { need: usize, got: usize },
    #[error("theta_bar sample {index} is not positive: {value}")]
    NonPositiveTheta { index: usize, value: f64 },
    #[error("invalid parameter {name}: {value}")]
    BadParameter { name: &'static str, value: f64 },
    #[error("partition search exhausted its budget, best residual {best}")]
    PartitionBudget { best: f64 },
    #[error(transparent)]
    Front(#[from] FrontError),
}

/// Finite-size correction used to extrapolate `θ(0, R e)/R` to `R = ∞`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum BiasModel {
    /// `R^{-1/2} log² R`.
    #[default]
    SqrtLog,
    /// `1/R`.
    InverseR,
}

impl BiasModel {
    pub fn regressor(self, r: f64) -> f64 {
        match self {
            BiasModel::SqrtLog => {
                let l = math::ln(r);
                l * l / math::sqrt(r)
            }
            BiasModel::InverseR => 1.0 / r,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThetaBarEstimate {
    pub direction: Point,
    pub radii: Vec<f64>,
    /// Monte Carlo mean of `θ(0, R e)/R` per radius.
    pub means: Vec<f64>,
    pub theta_bar: f64,
    /// Half-width of the 95% bootstrap interval (seeds resampled).
    pub halfwidth: f64,
    pub bias_amplitude: f64,
    pub residuals: Vec<f64>,
    /// Set when some fit residual exceeds the half-width.
    pub flagged: bool,
    pub seeds: usize,
}

fn fit_intercept(radii: &[f64], samples: &[Vec<f64>], rows: &[usize], model: BiasModel) -> Option<(f64, f64, Vec<f64>)> {
    let xs: Vec<f64> = radii.iter().map(|r| model.regressor(*r)).collect();
    let means: Vec<f64> = (0..radii.len())
        .map(|j| rows.iter().map(|&s| samples[s][j] / radii[j]).sum::<f64>() / rows.len() as f64)
        .collect();
    let f = linear_fit(&xs, &means)?;
    Some((f.intercept, f.slope, means))
}

/// Fits `mean_R θ(0, R e)/R = θ̄ + a·g(R)`; `samples[seed][radius]`.
pub fn fit_theta_bar(
    direction: Point,
    radii: &[f64],
    samples: &[Vec<f64>],
    model: BiasModel,
    boot_reps: usize,
    boot_seed: u64,
) -> Result<ThetaBarEstimate, ShapeError> {
    if radii.len() < 2 {
        return Err(ShapeError::TooFewRadii { need: 2, got: radii.len() });
    }
    if samples.len() < 8 {
        return Err(ShapeError::TooFewSeeds { need: 8, got: samples.len() });
    }
    if let Some(w) = radii.windows(2).find(|w| !(w[1] > w[0])) {
        return Err(ShapeError::BadParameter { name: "radii", value: w[1] });
    }
    let all: Vec<usize> = (0..samples.len()).collect();
    let (theta_bar, amp, means) =
        fit_intercept(radii, samples, &all, model).ok_or(ShapeError::TooFewRadii { need: 2, got: radii.len() })?;
    let boot = stats::bootstrap(samples.len(), boot_reps, boot_seed, |rows| {
        fit_intercept(radii, samples, rows, model).map(|f| f.0)
    });
    let halfwidth = boot.map(|b| b.halfwidth()).unwrap_or(0.0);
    let residuals: Vec<f64> =
        radii.iter().zip(&means).map(|(r, m)| m - theta_bar - amp * model.regressor(*r)).collect();
    let flagged = residuals.iter().any(|r| math::abs(*r) > halfwidth);
    Ok(ThetaBarEstimate {
        direction,
        radii: radii.to_vec(),
        means,
        theta_bar,
        halfwidth,
        bias_amplitude: amp,
        residuals,
        flagged,
        seeds: samples.len(),
    })
}

/// Grid for passage times out to `r_max` with room for detours.
pub fn passage_grid(dim: usize, h: f64, r_max: f64) -> Result<Grid, ShapeError> {
    Grid::covering(dim, h, Point::ZERO, 1.25 * r_max + 2.0).map_err(|_| ShapeError::BadParameter { name: "h", value: h })
}

/// Runs `job` on growing grids until it is not truncated (at most four
/// attempts, radius ×1.6 each).
fn with_growing_grid<T>(
    dim: usize,
    h: f64,
    r_max: f64,
    mut job: impl FnMut(&Grid) -> Result<T, ShapeError>,
) -> Result<T, ShapeError> {
    let mut radius = 1.25 * r_max + 2.0;
    let mut last = None;
    for _ in 0..4 {
        let grid = Grid::covering(dim, h, Point::ZERO, radius).map_err(|_| ShapeError::BadParameter { name: "h", value: h })?;
        match job(&grid) {
            Err(ShapeError::Front(FrontError::Truncated { at })) => {
                last = Some(at);
                radius *= 1.6;
            }
            other => return other,
        }
    }
    Err(FrontError::Truncated { at: last.unwrap_or(0.0) }.into())
}

/// `θ(0, R e)` for every direction and radius from one front started at the
/// origin: `out[direction][radius]`.
pub fn passage_samples<F: VectorField>(
    field: &F,
    grid: &Grid,
    directions: &[Point],
    radii: &[f64],
    opts: FrontOptions,
) -> Result<Vec<Vec<f64>>, ShapeError> {
    let targets: Vec<Vec<usize>> = directions
        .iter()
        .map(|e| {
            radii.iter().map(|r| grid.locate(*e * *r).ok_or(FrontError::SeedOutOfBounds)).collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;
    passage_to_cells(field, grid, Point::ZERO, &targets, opts)
}

fn passage_to_cells<F: VectorField>(
    field: &F,
    grid: &Grid,
    source: Point,
    targets: &[Vec<usize>],
    opts: FrontOptions,
) -> Result<Vec<Vec<f64>>, ShapeError> {
    let src = grid.locate(source).ok_or(FrontError::SeedOutOfBounds)?;
    let mut wanted = vec![false; grid.len()];
    let mut remaining = 0usize;
    for &c in targets.iter().flatten() {
        if !wanted[c] {
            wanted[c] = true;
            remaining += 1;
        }
    }
    let mut last = 0.0f64;
    let mut solver = FrontSolver::new(field, grid, opts.stencil_radius, false);
    let info = solver.run(&[(src, 0.0)], f64::INFINITY, |c, t| {
        if wanted[c] {
            wanted[c] = false;
            remaining -= 1;
            last = t;
        }
        remaining == 0
    });
    if remaining > 0 {
        return Err(FrontError::Truncated { at: info.truncated_at.unwrap_or(info.t_reached) }.into());
    }
    if let Some(at) = info.truncated_at {
        if at <= last {
            return Err(FrontError::Truncated { at }.into());
        }
    }
    Ok(targets.iter().map(|row| row.iter().map(|&c| solver.arrival(c)).collect()).collect())
}

/// [`passage_samples`] for one environment on a grid grown until no front
/// reaches its face first.
pub fn seed_passage_samples<F: VectorField>(
    field: &F,
    directions: &[Point],
    radii: &[f64],
    h: f64,
) -> Result<Vec<Vec<f64>>, ShapeError> {
    let dim = field.dim();
    let r_max = radii.iter().copied().fold(0.0, f64::max);
    with_growing_grid(dim, h, r_max, |g| passage_samples(field, g, directions, radii, FrontOptions::for_dim(dim)))
}

/// Monte Carlo `θ̄(e)` over an environment family.
pub fn estimate_theta_bar<F, M>(
    make_env: M,
    seeds: &[u64],
    direction: Point,
    radii: &[f64],
    h: f64,
    model: BiasModel,
) -> Result<ThetaBarEstimate, ShapeError>
where
    F: VectorField,
    M: Fn(u64) -> F,
{
    let e = direction.normalized();
    let r_max = radii.iter().copied().fold(0.0, f64::max);
    let mut samples = Vec::with_capacity(seeds.len());
    for &s in seeds {
        let env = make_env(s);
        let dim = env.dim();
        let mut rows = with_growing_grid(dim, h, r_max, |g| passage_samples(&env, g, &[e], radii, FrontOptions::for_dim(dim)))?;
        samples.push(rows.remove(0));
    }
    fit_theta_bar(e, radii, &samples, model, 400, seeds.first().copied().unwrap_or(0))
}

/// `θ̄` on `n_dirs` directions from one front per seed.
pub fn estimate_theta_bar_all<F, M>(
    make_env: M,
    seeds: &[u64],
    dim: usize,
    n_dirs: usize,
    radii: &[f64],
    h: f64,
    model: BiasModel,
) -> Result<Vec<ThetaBarEstimate>, ShapeError>
where
    F: VectorField,
    M: Fn(u64) -> F,
{
    let dirs = sample_directions(dim, n_dirs);
    let mut per_dir: Vec<Vec<Vec<f64>>> = vec![Vec::with_capacity(seeds.len()); dirs.len()];
    for &s in seeds {
        let rows = seed_passage_samples(&make_env(s), &dirs, radii, h)?;
        for (d, row) in rows.into_iter().enumerate() {
            per_dir[d].push(row);
        }
    }
    dirs.iter()
        .zip(&per_dir)
        .enumerate()
        .map(|(i, (e, samples))| fit_theta_bar(*e, radii, samples, model, 400, i as u64))
        .collect()
}

/// `𝒮 = {x : θ̄(x) ≤ 1}` from directional samples.
#[derive(Clone, Debug, PartialEq)]
pub struct EffectiveShape {
    pub dim: usize,
    pub directions: Vec<Point>,
    pub theta_bar: Vec<f64>,
    pub halfwidth: Vec<f64>,
    /// `e/θ̄(e)` per direction.
    pub boundary: Vec<Point>,
    /// Convex hull vertices of `boundary` (counterclockwise, `d = 2` only).
    pub hull: Vec<Point>,
}

pub fn build_shape(directions: &[Point], theta_bar: &[f64], halfwidth: &[f64]) -> Result<EffectiveShape, ShapeError> {
    if directions.len() < 16 {
        return Err(ShapeError::TooFewDirections { need: 16, got: directions.len() });
    }
    if theta_bar.len() != directions.len() || halfwidth.len() != directions.len() {
        return Err(ShapeError::BadParameter { name: "theta_bar length", value: theta_bar.len() as f64 });
    }
    if let Some((i, v)) = theta_bar.iter().enumerate().find(|(_, v)| !(**v > 0.0) || !v.is_finite()) {
        return Err(ShapeError::NonPositiveTheta { index: i, value: *v });
    }
    let dim = if directions.iter().any(|d| d[2] != 0.0) { 3 } else { 2 };
    let mut order: Vec<usize> = (0..directions.len()).collect();
    let directions: Vec<Point> = directions.iter().map(|d| d.normalized()).collect();
    if dim == 2 {
        order.sort_by(|&a, &b| angle(directions[a]).total_cmp(&angle(directions[b])));
    }
    let dirs: Vec<Point> = order.iter().map(|&i| directions[i]).collect();
    let tb: Vec<f64> = order.iter().map(|&i| theta_bar[i]).collect();
    let hw: Vec<f64> = order.iter().map(|&i| halfwidth[i]).collect();
    let boundary: Vec<Point> = dirs.iter().zip(&tb).map(|(e, t)| *e * (1.0 / t)).collect();
    let hull = if dim == 2 { convex_hull_2d(&boundary) } else { Vec::new() };
    Ok(EffectiveShape { dim, directions: dirs, theta_bar: tb, halfwidth: hw, boundary, hull })
}

fn angle(p: Point) -> f64 {
    let a = math::atan2(p[1], p[0]);
    if a < 0.0 {
        a + 2.0 * core::f64::consts::PI
    } else {
        a
    }
}

/// Andrew's monotone chain, counterclockwise, collinear points dropped.
pub fn convex_hull_2d(points: &[Point]) -> Vec<Point> {
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: Point, a: Point, b: Point| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: alloc::boxed::Box<dyn Iterator<Item = &Point>> =
            if pass == 0 { alloc::boxed::Box::new(pts.iter()) } else { alloc::boxed::Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Distance from the origin along the ray at `dir` to a closed polygon
/// (vertices in angular order around the origin).
fn polygon_radius(poly: &[Point], dir: Point) -> f64 {
    let n = poly.len();
    let mut best = f64::INFINITY;
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        // solve s·dir = a + u(b − a), s ≥ 0, u ∈ [0, 1]
        let e = b - a;
        let det = dir[0] * (-e[1]) + e[0] * dir[1];
        if det == 0.0 {
            continue;
        }
        let s = (a[0] * (-e[1]) + e[0] * a[1]) / det;
        let u = (dir[0] * a[1] - dir[1] * a[0]) / det;
        if s > 0.0 && (-1e-12..=1.0 + 1e-12).contains(&u) {
            best = best.min(s);
        }
    }
    best
}

impl EffectiveShape {
    /// `H̄(p) = max_v p·v` over the stored boundary points.
    pub fn effective_h(&self, p: Point) -> f64 {
        self.boundary.iter().map(|v| p.dot(*v)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// `θ̄(x)` from the star-shaped boundary polygon (nearest direction in
    /// `d = 3`).
    pub fn theta_raw(&self, x: Point) -> f64 {
        let n = x.norm();
        if n == 0.0 {
            return 0.0;
        }
        let e = x * (1.0 / n);
        if self.dim == 2 {
            n / polygon_radius(&self.boundary, e)
        } else {
            let i = (0..self.directions.len())
                .max_by(|&a, &b| self.directions[a].dot(e).total_cmp(&self.directions[b].dot(e)))
                .unwrap();
            n * self.theta_bar[i]
        }
    }

    /// Gauge of the convex hull of the boundary points.
    pub fn theta_convex(&self, x: Point) -> f64 {
        let n = x.norm();
        if n == 0.0 {
            return 0.0;
        }
        if self.dim == 2 {
            n / polygon_radius(&self.hull, x * (1.0 / n))
        } else {
            // sup over sampled covectors of p·x / H̄(p)
            self.directions.iter().map(|p| p.dot(x) / self.effective_h(*p)).fold(0.0, f64::max)
        }
    }

    pub fn contains(&self, x: Point) -> bool {
        self.theta_raw(x) <= 1.0
    }

    /// Cells of `x + t𝒮` (raw or convexified) on a grid.
    pub fn scaled_mask(&self, grid: &Grid, x: Point, t: f64, convex: bool) -> Mask {
        let bits = (0..grid.len())
            .map(|c| {
                let z = grid.center(c) - x;
                let g = if convex { self.theta_convex(z) } else { self.theta_raw(z) };
                g <= t
            })
            .collect();
        Mask { grid: grid.clone(), bits }
    }
}

/// `f(x+y) − f(x) − f(y)` with `f = E θ(0, ·)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairDefect {
    pub x: Point,
    pub y: Point,
    pub f_x: f64,
    pub f_y: f64,
    pub f_xy: f64,
    pub defect: f64,
    /// Standard error of the per-seed defect mean.
    pub defect_se: f64,
    /// Per-seed maximum of the defect.
    pub max: f64,
}

impl PairDefect {
    /// `f(x) + f(y) − f(x+y)`.
    pub fn reverse(&self) -> f64 {
        -self.defect
    }
}

pub fn subadditivity_defect<F, M>(make_env: M, seeds: &[u64], pairs: &[(Point, Point)], h: f64) -> Result<Vec<PairDefect>, ShapeError>
where
    F: VectorField,
    M: Fn(u64) -> F,
{
    if seeds.is_empty() {
        return Err(ShapeError::TooFewSeeds { need: 1, got: 0 });
    }
    let r_max = pairs.iter().map(|(x, y)| x.norm().max(y.norm()).max((*x + *y).norm())).fold(1.0, f64::max);
    let mut per_seed: Vec<Vec<[f64; 3]>> = Vec::with_capacity(seeds.len());
    for &s in seeds {
        let env = make_env(s);
        let dim = env.dim();
        let rows = with_growing_grid(dim, h, r_max, |grid| {
            let targets: Vec<Vec<usize>> = pairs
                .iter()
                .map(|(x, y)| {
                    [*x, *y, *x + *y].iter().map(|p| grid.locate(*p).ok_or(FrontError::SeedOutOfBounds)).collect()
                })
                .collect::<Result<_, _>>()?;
            passage_to_cells(&env, grid, Point::ZERO, &targets, FrontOptions::for_dim(dim))
        })?;
        per_seed.push(rows.into_iter().map(|r| [r[0], r[1], r[2]]).collect());
    }
    Ok(pairs
        .iter()
        .enumerate()
        .map(|(i, (x, y))| {
            let d: Vec<f64> = per_seed.iter().map(|r| r[i][2] - r[i][0] - r[i][1]).collect();
            let f = |k: usize| per_seed.iter().map(|r| r[i][k]).sum::<f64>() / seeds.len() as f64;
            PairDefect {
                x: *x,
                y: *y,
                f_x: f(0),
                f_y: f(1),
                f_xy: f(2),
                defect: stats::mean(&d),
                defect_se: stats::std_dev(&d) / math::sqrt(d.len() as f64),
                max: d.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            }
        })
        .collect())
}

/// Piecewise-linear path on `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolylinePath {
    /// Strictly increasing, `0` first and `1` last.
    pub knots: Vec<f64>,
    pub points: Vec<Point>,
}

impl PolylinePath {
    pub fn new(knots: Vec<f64>, points: Vec<Point>) -> Result<Self, ShapeError> {
        let ok = knots.len() >= 2
            && knots.len() == points.len()
            && knots[0] == 0.0
            && *knots.last().unwrap() == 1.0
            && knots.windows(2).all(|w| w[1] > w[0]);
        if !ok {
            return Err(ShapeError::BadParameter { name: "knots", value: knots.len() as f64 });
        }
        Ok(PolylinePath { knots, points })
    }

    /// Knots spaced evenly.
    pub fn uniform(points: Vec<Point>) -> Result<Self, ShapeError> {
        let n = points.len();
        if n < 2 {
            return Err(ShapeError::BadParameter { name: "points", value: n as f64 });
        }
        let knots = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        Self::new(knots, points)
    }

    fn segment(&self, t: f64) -> usize {
        let t = t.clamp(0.0, 1.0);
        match self.knots.binary_search_by(|k| k.total_cmp(&t)) {
            Ok(i) => i.min(self.knots.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.knots.len() - 2),
        }
    }

    pub fn eval(&self, t: f64) -> Point {
        let t = t.clamp(0.0, 1.0);
        let i = self.segment(t);
        let (t0, t1) = (self.knots[i], self.knots[i + 1]);
        let u = (t - t0) / (t1 - t0);
        self.points[i] + (self.points[i + 1] - self.points[i]) * u
    }

    pub fn velocity(&self, t: f64) -> Point {
        let i = self.segment(t);
        (self.points[i + 1] - self.points[i]) * (1.0 / (self.knots[i + 1] - self.knots[i]))
    }
}

/// Breakpoints `0 = t₀ ≤ … ≤ t_{d+1} = 1` with signs such that
/// `Σ δ_k (γ(t_k) − γ(t_{k−1}))` vanishes.
#[derive(Clone, Debug, PartialEq)]
pub struct SignedPartition {
    pub breakpoints: Vec<f64>,
    pub signs: Vec<i8>,
    pub residual: f64,
    /// Point of `S^d` generating the partition (`t_k − t_{k−1} = x_k²`).
    pub sphere_point: Vec<f64>,
}

impl SignedPartition {
    /// Sum of the increments carrying sign `s`.
    pub fn signed_sum(&self, path: &PolylinePath, s: i8) -> Point {
        let mut acc = Point::ZERO;
        for k in 0..self.signs.len() {
            if self.signs[k] == s {
                acc = acc + (path.eval(self.breakpoints[k + 1]) - path.eval(self.breakpoints[k]));
            }
        }
        acc
    }
}

fn sign(v: f64) -> f64 {
    if v < 0.0 {
        -1.0
    } else {
        1.0
    }
}

fn breakpoints(x: &[f64]) -> Vec<f64> {
    let mut t = Vec::with_capacity(x.len() + 1);
    t.push(0.0);
    let mut acc = 0.0;
    for v in x {
        acc += v * v;
        t.push(acc.min(1.0));
    }
    t
}

fn odd_map(path: &PolylinePath, x: &[f64]) -> Point {
    let t = breakpoints(x);
    let mut f = Point::ZERO;
    for k in 0..x.len() {
        f = f + (path.eval(t[k + 1]) - path.eval(t[k])) * sign(x[k]);
    }
    f
}

/// `∂f/∂x_j` as columns.
fn odd_jacobian(path: &PolylinePath, x: &[f64]) -> Vec<Point> {
    let t = breakpoints(x);
    let n = x.len();
    let mut cols = vec![Point::ZERO; n];
    for (j, col) in cols.iter_mut().enumerate() {
        for k in 0..n {
            let s = sign(x[k]);
            if j <= k {
                *col = *col + path.velocity(t[k + 1]) * (2.0 * x[j] * s);
            }
            if j < k {
                *col = *col - path.velocity(t[k]) * (2.0 * x[j] * s);
            }
        }
    }
    cols
}

fn normalize(x: &mut [f64]) {
    let n = math::sqrt(x.iter().map(|v| v * v).sum::<f64>());
    for v in x.iter_mut() {
        *v /= n;
    }
}

/// Point of `S^n ⊂ ℝ^{n+1}` from hyperspherical angles.
fn sphere_from_angles(angles: &[f64]) -> Vec<f64> {
    let n = angles.len();
    let mut x = vec![0.0; n + 1];
    let mut s = 1.0;
    for i in 0..n {
        x[i] = s * math::cos(angles[i]);
        s *= math::sin(angles[i]);
    }
    x[n] = s;
    x
}

/// Solves the (d+1)×(d+1) damped normal equations.
fn lm_step(cols: &[Point], f: Point, x: &[f64], dim: usize, lambda: f64) -> Option<Vec<f64>> {
    let n = x.len();
    // rows: d components of f, then the sphere constraint
    let mut jac = vec![vec![0.0; n]; dim + 1];
    let mut r = vec![0.0; dim + 1];
    for i in 0..dim {
        for j in 0..n {
            jac[i][j] = cols[j][i];
        }
        r[i] = f[i];
    }
    for j in 0..n {
        jac[dim][j] = 2.0 * x[j];
    }
    r[dim] = x.iter().map(|v| v * v).sum::<f64>() - 1.0;
    let mut a = vec![vec![0.0; n]; n];
    let mut b = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            a[i][j] = (0..=dim).map(|k| jac[k][i] * jac[k][j]).sum();
        }
        a[i][i] += lambda * (1.0 + a[i][i]);
        b[i] = -(0..=dim).map(|k| jac[k][i] * r[k]).sum::<f64>();
    }
    solve_dense(a, b)
}

/// Gaussian elimination with partial pivoting.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| math::abs(a[i][c]).total_cmp(&math::abs(a[j][c])))?;
        if math::abs(a[p][c]) < 1e-300 {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let m = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= m * a[c][k];
            }
            b[r] -= m * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Finds a signed partition of `path` into `dim + 1` pieces with residual
/// `≤ tol`: coarse search over a `50^dim` angular grid of `S^dim`, then
/// Levenberg-Marquardt refinement from the best candidates, then an exact
/// piecewise-affine solve if the refinement stalls in a local minimum.
pub fn hobby_rice_partition(path: &PolylinePath, dim: usize, tol: f64) -> Result<SignedPartition, ShapeError> {
    if !(1..=3).contains(&dim) {
        return Err(ShapeError::BadParameter { name: "dim", value: dim as f64 });
    }
    if !(tol > 0.0) {
        return Err(ShapeError::BadParameter { name: "tol", value: tol });
    }
    const GRID: usize = 50;
    let pi = core::f64::consts::PI;
    let mut cands: Vec<(f64, Vec<f64>)> = Vec::new();
    let total = math::powi(GRID as f64, dim as u32) as usize;
    for idx in 0..total {
        let mut angles = vec![0.0; dim];
        let mut rem = idx;
        for (k, a) in angles.iter_mut().enumerate() {
            let i = rem % GRID;
            rem /= GRID;
            // last angle spans the full circle
            let span = if k + 1 == dim { 2.0 * pi } else { pi };
            *a = (i as f64 + 0.5) * span / GRID as f64;
        }
        let x = sphere_from_angles(&angles);
        let r = odd_map(path, &x).norm();
        cands.push((r, x));
    }
    cands.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best: Option<(f64, Vec<f64>)> = None;
    for (r0, x0) in cands.into_iter().take(16) {
        let mut x = x0;
        let mut r = r0;
        let mut lambda = 1e-3;
        for _ in 0..200 {
            if r <= tol * 1e-3 {
                break;
            }
            let f = odd_map(path, &x);
            let cols = odd_jacobian(path, &x);
            let Some(step) = lm_step(&cols, f, &x, dim, lambda) else { break };
            let mut trial: Vec<f64> = x.iter().zip(&step).map(|(a, b)| a + b).collect();
            normalize(&mut trial);
            let rt = odd_map(path, &trial).norm();
            if rt < r {
                x = trial;
                r = rt;
                lambda = (lambda * 0.3).max(1e-12);
            } else {
                lambda *= 10.0;
                if lambda > 1e8 {
                    break;
                }
            }
        }
        if best.as_ref().map_or(true, |b| r < b.0) {
            best = Some((r, x));
        }
        if best.as_ref().unwrap().0 <= tol * 1e-3 {
            break;
        }
    }
    let (mut residual, mut x) = best.expect("nonempty candidate list");
    if residual > tol {
        if let Some((r, xe)) = exact_partition(path, dim) {
            if r < residual {
                residual = r;
                x = xe;
            }
        }
    }
    if residual > tol {
        return Err(ShapeError::PartitionBudget { best: residual });
    }
    let signs = x.iter().map(|v| sign(*v) as i8).collect();
    Ok(SignedPartition { breakpoints: breakpoints(&x), signs, residual, sphere_point: x })
}

/// Exact search over alternating sign patterns `(+, −, +, …)`: with every
/// breakpoint confined to one path segment the map is affine, so each segment
/// assignment is a `dim × dim` least-squares solve.
fn exact_partition(path: &PolylinePath, dim: usize) -> Option<(f64, Vec<f64>)> {
    let nseg = path.points.len() - 1;
    let signs: Vec<f64> = (0..=dim).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect();
    // r(t) = Σ_k (s_k − s_{k+1}) γ(t_k) + s_d γ(1) − s_0 γ(0)
    let coef: Vec<f64> = (0..dim).map(|k| signs[k] - signs[k + 1]).collect();
    let base = path.points[nseg] * signs[dim] - path.points[0] * signs[0];
    let mut seg = vec![0usize; dim];
    let mut best: Option<(f64, Vec<f64>)> = None;
    loop {
        // rhs and columns for the current assignment
        let mut rhs = base;
        let mut cols = vec![Point::ZERO; dim];
        for k in 0..dim {
            rhs = rhs + path.points[seg[k]] * coef[k];
            cols[k] = (path.points[seg[k] + 1] - path.points[seg[k]]) * coef[k];
        }
        let mut a = vec![vec![0.0; dim]; dim];
        let mut b = vec![0.0; dim];
        for i in 0..dim {
            for j in 0..dim {
                a[i][j] = cols[i].dot(cols[j]);
            }
            a[i][i] += 1e-14;
            b[i] = -cols[i].dot(rhs);
        }
        if let Some(u) = solve_dense(a, b) {
            let mut t = vec![0.0; dim];
            let mut ok = true;
            for k in 0..dim {
                let uk = u[k].clamp(0.0, 1.0);
                ok &= u[k] > -1e-9 && u[k] < 1.0 + 1e-9;
                t[k] = path.knots[seg[k]] + uk * (path.knots[seg[k] + 1] - path.knots[seg[k]]);
            }
            ok &= t.windows(2).all(|w| w[1] >= w[0]);
            if ok {
                let mut x = vec![0.0; dim + 1];
                let mut prev = 0.0;
                for k in 0..=dim {
                    let tk = if k < dim { t[k] } else { 1.0 };
                    x[k] = signs[k] * math::sqrt((tk - prev).max(0.0));
                    prev = tk;
                }
                normalize(&mut x);
                let r = odd_map(path, &x).norm();
                if best.as_ref().map_or(true, |b| r < b.0) {
                    best = Some((r, x));
                }
            }
        }
        // next nondecreasing assignment
        let mut k = dim;
        loop {
            if k == 0 {
                return best;
            }
            k -= 1;
            if seg[k] + 1 < nseg {
                seg[k] += 1;
                for j in k + 1..dim {
                    seg[j] = seg[k];
                }
                break;
            }
        }
    }
}

/// Passage-time split of a near-geodesic from `0` to `y` by a signed
/// partition.
#[derive(Clone, Debug, PartialEq)]
pub struct HalvingReport {
    pub y: Point,
    pub theta_y: f64,
    pub theta_half: f64,
    /// Time spent on the `+` pieces and the `−` pieces.
    pub plus_time: f64,
    pub minus_time: f64,
    pub plus_displacement: Point,
    pub minus_displacement: Point,
    pub partition: Option<SignedPartition>,
}

impl HalvingReport {
    /// `θ(0, y) − 2θ(0, y/2)`.
    pub fn slack(&self) -> f64 {
        self.theta_y - 2.0 * self.theta_half
    }
}

/// Backtracks the discrete geodesic to `y`, parametrizes it by normalized
/// arrival time and splits it with [`hobby_rice_partition`].
pub fn halving_check<F: VectorField>(field: &F, grid: &Grid, y: Point, tol: f64) -> Result<HalvingReport, ShapeError> {
    let dim = grid.dim();
    if y.norm() == 0.0 {
        return Ok(HalvingReport {
            y,
            theta_y: 0.0,
            theta_half: 0.0,
            plus_time: 0.0,
            minus_time: 0.0,
            plus_displacement: Point::ZERO,
            minus_displacement: Point::ZERO,
            partition: None,
        });
    }
    let cy = grid.locate(y).ok_or(FrontError::SeedOutOfBounds)?;
    let chalf = grid.locate(y * 0.5).ok_or(FrontError::SeedOutOfBounds)?;
    let src = grid.locate(Point::ZERO).ok_or(FrontError::SeedOutOfBounds)?;
    let opts = FrontOptions::for_dim(dim);
    let mut solver = FrontSolver::new(field, grid, opts.stencil_radius, false);
    let mut left = 2;
    let info = solver.run(&[(src, 0.0)], f64::INFINITY, |c, _| {
        if c == cy || c == chalf {
            left -= 1;
        }
        left == 0 && cy != chalf
    });
    let theta_y = solver.arrival(cy);
    if !theta_y.is_finite() || info.truncated_at.is_some_and(|at| at <= theta_y) {
        return Err(FrontError::Truncated { at: info.truncated_at.unwrap_or(info.t_reached) }.into());
    }
    let parents = solver.parents();
    let mut chain = vec![cy];
    while parents[*chain.last().unwrap()] != crate::frontprop::NO_PARENT {
        chain.push(parents[*chain.last().unwrap()] as usize);
    }
    chain.reverse();
    let mut knots: Vec<f64> = chain.iter().map(|&c| solver.arrival(c) / theta_y).collect();
    knots[0] = 0.0;
    *knots.last_mut().unwrap() = 1.0;
    let points: Vec<Point> = chain.iter().map(|&c| grid.center(c)).collect();
    let path = PolylinePath::new(knots, points)?;
    let part = hobby_rice_partition(&path, dim, tol)?;
    let mut plus_time = 0.0;
    let mut minus_time = 0.0;
    for k in 0..part.signs.len() {
        let dt = theta_y * (part.breakpoints[k + 1] - part.breakpoints[k]);
        if part.signs[k] > 0 {
            plus_time += dt;
        } else {
            minus_time += dt;
        }
    }
    Ok(HalvingReport {
        y,
        theta_y,
        theta_half: solver.arrival(chalf),
        plus_time,
        minus_time,
        plus_displacement: part.signed_sum(&path, 1),
        minus_displacement: part.signed_sum(&path, -1),
        partition: Some(part),
    })
}

#[cfg(test)]
mod tests;
