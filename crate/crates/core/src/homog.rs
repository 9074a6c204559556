//! `u^ε` and `ū` through their control formulas, Hausdorff distances between
//! reachable sets and the effective shape, and empirical rate fits.

use crate::env::VectorField;
use crate::frontprop::{FrontError, FrontOptions, FrontSolver};
use crate::grid::{Grid, Mask};
use crate::math::{self, Point};
use crate::shape::{fit_theta_bar, BiasModel, EffectiveShape, ShapeError, ThetaBarEstimate};
use crate::stats::{self, linear_fit, LinearFit};
use alloc::vec;
use alloc::vec::Vec;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HomogError {
    #[error("set {0} is empty")]
    EmptySet(&'static str),
    #[error("masks live on different grids")]
    GridMismatch,
    #[error("invalid parameter {name}: {value}")]
    BadParameter { name: &'static str, value: f64 },
    #[error(transparent)]
    Front(#[from] FrontError),
    #[error(transparent)]
    Shape(#[from] ShapeError),
}

/// Lipschitz initial data presets.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialData {
    Constant(f64),
    /// `p·x`.
    Linear(Point),
    /// `−|x − apex|`.
    Cone(Point),
    /// `max_i (p_i·x + c_i)`.
    MaxLinear(Vec<(Point, f64)>),
}

impl InitialData {
    pub fn eval(&self, x: Point) -> f64 {
        match self {
            InitialData::Constant(c) => *c,
            InitialData::Linear(p) => p.dot(x),
            InitialData::Cone(a) => -x.dist(*a),
            InitialData::MaxLinear(planes) => planes.iter().map(|(p, c)| p.dot(x) + c).fold(f64::NEG_INFINITY, f64::max),
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match self {
            InitialData::Constant(_) => 0.0,
            InitialData::Linear(p) => p.norm(),
            InitialData::Cone(_) => 1.0,
            InitialData::MaxLinear(planes) => planes.iter().map(|(p, _)| p.norm()).fold(0.0, f64::max),
        }
    }
}

fn micro_grid<F: VectorField>(field: &F, center: Point, tau: f64, h: f64) -> Result<Grid, HomogError> {
    let sup_v = field.norms().sup_v;
    let speed = 1.0 + if sup_v.is_finite() { sup_v } else { 0.0 };
    Grid::covering(field.dim(), h, center, speed * tau + 2.0 * h).map_err(|_| HomogError::BadParameter { name: "h", value: h })
}

/// `u^ε(t, x) = sup { u₀(εz) : z ∈ ℛ^-_{t/ε}(x/ε) }` for several `t` from one
/// front evolved on a micro grid of spacing `h`.
pub fn solve_u_eps_times<F: VectorField>(
    field: &F,
    u0: &InitialData,
    eps: f64,
    times: &[f64],
    x: Point,
    h: f64,
) -> Result<Vec<f64>, HomogError> {
    if !(eps > 0.0) {
        return Err(HomogError::BadParameter { name: "eps", value: eps });
    }
    if let Some(t) = times.iter().find(|t| !(**t >= 0.0)) {
        return Err(HomogError::BadParameter { name: "t", value: *t });
    }
    let y = x * (1.0 / eps);
    let tau_max = times.iter().copied().fold(0.0, f64::max) / eps;
    let grid = micro_grid(field, y, tau_max, h)?;
    let src = grid.locate(y).ok_or(FrontError::SeedOutOfBounds)?;
    let mut solver = FrontSolver::new(field, &grid, FrontOptions::for_dim(grid.dim()).stencil_radius, false);
    let info = solver.run(&[(src, 0.0)], tau_max, |_, _| false);
    if let Some(at) = info.truncated_at {
        if at <= tau_max {
            return Err(FrontError::Truncated { at }.into());
        }
    }
    // running max along the settle order
    let order = solver.settle_order();
    let mut arrivals = Vec::with_capacity(order.len());
    let mut best = Vec::with_capacity(order.len());
    let mut m = f64::NEG_INFINITY;
    for &c in order {
        let c = c as usize;
        // the source cell is the exact start point
        let z = if c == src { y } else { grid.center(c) };
        m = m.max(u0.eval(z * eps));
        arrivals.push(solver.arrival(c));
        best.push(m);
    }
    Ok(times
        .iter()
        .map(|t| {
            let tau = t / eps;
            let k = arrivals.partition_point(|a| *a <= tau);
            if k == 0 {
                u0.eval(x)
            } else {
                best[k - 1]
            }
        })
        .collect())
}

pub fn solve_u_eps<F: VectorField>(field: &F, u0: &InitialData, eps: f64, t: f64, x: Point, h: f64) -> Result<f64, HomogError> {
    Ok(solve_u_eps_times(field, u0, eps, &[t], x, h)?[0])
}

/// Distance from `a` to the polygon `x + t·boundary` (0 inside).
fn polygon_distance(shape: &EffectiveShape, x: Point, t: f64, a: Point) -> f64 {
    if shape.theta_raw(a - x) <= t {
        return 0.0;
    }
    let n = shape.boundary.len();
    let mut best = f64::INFINITY;
    for i in 0..n {
        let p = x + shape.boundary[i] * t;
        let q = x + shape.boundary[(i + 1) % n] * t;
        let e = q - p;
        let s = if e.norm_sq() > 0.0 { ((a - p).dot(e) / e.norm_sq()).clamp(0.0, 1.0) } else { 0.0 };
        best = best.min(a.dist(p + e * s));
    }
    best
}

/// `ū(t, x) = sup { u₀(z) : z ∈ x + t𝒮 }`; exact for the presets in `d = 2`
/// (linear pieces peak at the boundary vertices, the cone at the nearest
/// point), vertex sampling otherwise.
pub fn solve_u_bar(shape: &EffectiveShape, u0: &InitialData, t: f64, x: Point) -> f64 {
    if t == 0.0 {
        return u0.eval(x);
    }
    match u0 {
        InitialData::Constant(c) => *c,
        InitialData::Linear(p) => p.dot(x) + t * shape.effective_h(*p),
        InitialData::MaxLinear(planes) => {
            planes.iter().map(|(p, c)| p.dot(x) + c + t * shape.effective_h(*p)).fold(f64::NEG_INFINITY, f64::max)
        }
        InitialData::Cone(a) if shape.dim == 2 => -polygon_distance(shape, x, t, *a),
        InitialData::Cone(_) => shape.boundary.iter().map(|v| u0.eval(x + *v * t)).fold(u0.eval(x), f64::max),
    }
}

/// Discrete Hausdorff distance between two masks on one grid (cell
/// centers, exact through two distance transforms).
pub fn hausdorff(a: &Mask, b: &Mask) -> Result<f64, HomogError> {
    if a.grid != b.grid {
        return Err(HomogError::GridMismatch);
    }
    if a.count() == 0 {
        return Err(HomogError::EmptySet("A"));
    }
    if b.count() == 0 {
        return Err(HomogError::EmptySet("B"));
    }
    let da = a.distance();
    let db = b.distance();
    let mut d = 0.0f64;
    for c in 0..a.grid.len() {
        if a.bits[c] {
            d = d.max(db[c]);
        }
        if b.bits[c] {
            d = d.max(da[c]);
        }
    }
    Ok(d)
}

/// `t^{-1/2} log² t`.
pub fn sqrt_log_rate(t: f64) -> f64 {
    let l = math::ln(t);
    l * l / math::sqrt(t)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShapeConvergence {
    pub times: Vec<f64>,
    /// `dist_H(ℛ^-_t(0), t𝒮)/t`, `[seed][time]`.
    pub per_seed: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    /// `log mean` against `log t`.
    pub power_fit: Option<LinearFit>,
    /// Least-squares `C` in `mean ≈ C t^{-1/2} log² t`.
    pub rate_amplitude: f64,
}

/// Per-time normalized Hausdorff distance between the reachable set and
/// `t𝒮`. The shape must come from seeds disjoint from `seeds`.
pub fn shape_convergence_experiment<F, M>(
    make_env: M,
    seeds: &[u64],
    shape: &EffectiveShape,
    times: &[f64],
    h: f64,
    convex: bool,
) -> Result<ShapeConvergence, HomogError>
where
    F: VectorField,
    M: Fn(u64) -> F,
{
    if seeds.is_empty() || times.is_empty() {
        return Err(HomogError::BadParameter { name: "seeds/times", value: 0.0 });
    }
    let t_max = times.iter().copied().fold(0.0, f64::max);
    let mut per_seed = Vec::with_capacity(seeds.len());
    for &s in seeds {
        let env = make_env(s);
        let grid = micro_grid(&env, Point::ZERO, t_max, h)?;
        let src = grid.locate(Point::ZERO).ok_or(FrontError::SeedOutOfBounds)?;
        let mut solver = FrontSolver::new(&env, &grid, FrontOptions::for_dim(grid.dim()).stencil_radius, false);
        let info = solver.run(&[(src, 0.0)], t_max, |_, _| false);
        if let Some(at) = info.truncated_at {
            if at <= t_max {
                return Err(FrontError::Truncated { at }.into());
            }
        }
        let arr = solver.arrivals();
        let mut row = Vec::with_capacity(times.len());
        for &t in times {
            let reach = Mask { grid: grid.clone(), bits: arr.iter().map(|a| *a <= t).collect() };
            let target = shape.scaled_mask(&grid, Point::ZERO, t, convex);
            row.push(hausdorff(&reach, &target)? / t);
        }
        per_seed.push(row);
    }
    let mean: Vec<f64> = (0..times.len()).map(|j| per_seed.iter().map(|r| r[j]).sum::<f64>() / seeds.len() as f64).collect();
    let lx: Vec<f64> = times.iter().map(|t| math::ln(*t)).collect();
    let ly: Vec<f64> = mean.iter().map(|m| math::ln(m.max(1e-300))).collect();
    let g: Vec<f64> = times.iter().map(|t| sqrt_log_rate(*t)).collect();
    let gg: f64 = g.iter().map(|v| v * v).sum();
    let rate_amplitude = if gg > 0.0 { g.iter().zip(&mean).map(|(a, b)| a * b).sum::<f64>() / gg } else { f64::NAN };
    Ok(ShapeConvergence { times: times.to_vec(), per_seed, mean, power_fit: linear_fit(&lx, &ly), rate_amplitude })
}

/// Probe layout of [`homog_rate_experiment`].
#[derive(Clone, Debug, PartialEq)]
pub struct RateConfig {
    /// Unit covector `p` of `u₀ = p·x`; must be a coordinate axis.
    pub axis: usize,
    /// Macroscopic horizon `T`.
    pub horizon: f64,
    pub epsilons: Vec<f64>,
    /// Micro grid spacing.
    pub h: f64,
    /// Number of probe depths along `−p`.
    pub depths: usize,
    /// Lateral probe offsets as fractions of `T/ε`.
    pub lateral: Vec<f64>,
    /// Extra lateral room on each side, as a fraction of `T/ε`.
    pub margin: f64,
}

impl RateConfig {
    pub fn new(horizon: f64, epsilons: Vec<f64>) -> Self {
        RateConfig { axis: 0, horizon, epsilons, h: 0.25, depths: 16, lateral: vec![-0.125, 0.125], margin: 0.25 }
    }
}

/// Sup errors `|u^ε − ū|` over a probe set, per seed and `ε`.
#[derive(Clone, Debug, PartialEq)]
pub struct RateReport {
    pub horizon: f64,
    pub epsilons: Vec<f64>,
    /// `H̄(p)` used for `ū`.
    pub h_bar: f64,
    /// `[seed][ε]`.
    pub per_seed: Vec<Vec<f64>>,
    /// Seed mean of the sup error per `ε`.
    pub sup_errors: Vec<f64>,
    /// Fit of `log(err / log²(T/ε))` against `log(Tε)`.
    pub fit: Option<LinearFit>,
    /// Bare power-law fit of `log err` against `log ε`.
    pub power_fit: Option<LinearFit>,
}

impl RateReport {
    pub fn exponent(&self) -> f64 {
        self.fit.map_or(f64::NAN, |f| f.slope)
    }

    /// `log C` in `err ≈ C (Tε)^β log²(T/ε)`.
    pub fn log_amplitude(&self) -> f64 {
        self.fit.map_or(f64::NAN, |f| f.intercept)
    }

    pub fn decreasing(&self) -> bool {
        // epsilons are listed from large to small
        let mut idx: Vec<usize> = (0..self.epsilons.len()).collect();
        idx.sort_by(|a, b| self.epsilons[*b].total_cmp(&self.epsilons[*a]));
        idx.windows(2).all(|w| self.sup_errors[w[1]] < self.sup_errors[w[0]])
    }
}

/// Box reaching `depth + 2` below the hyperplane `{z_axis = 0}` and
/// `±lateral` across it, with the cells on or above the plane as sources.
fn halfspace_grid(dim: usize, axis: usize, depth: f64, lateral: f64, h: f64) -> Result<(Grid, Vec<(usize, f64)>), HomogError> {
    let k = FrontOptions::for_dim(dim).stencil_radius as i64;
    let n_lat = math::ceil(lateral / h) as i64;
    let mut lo = [0i64; 3];
    let mut shape = [1usize; 3];
    for a in 0..dim {
        if a == axis {
            lo[a] = -(math::ceil((depth + 2.0) / h) as i64);
            // a stencil jump lands at most k cells past the plane
            shape[a] = (-lo[a] + k + 1) as usize;
        } else {
            lo[a] = -n_lat;
            shape[a] = (2 * n_lat + 1) as usize;
        }
    }
    let grid = Grid::new(dim, h, lo, shape).map_err(|_| HomogError::BadParameter { name: "h", value: h })?;
    let sources = (0..grid.len()).filter(|&c| grid.coords(c)[axis] >= 0).map(|c| (c, 0.0)).collect();
    Ok((grid, sources))
}

/// `H̄(e_axis)` from passage times to a half-space.
#[derive(Clone, Debug, PartialEq)]
pub struct HalfSpaceSpeed {
    /// Fit of `τ(d)/d` over depths; its intercept is `1/H̄`.
    pub fit: ThetaBarEstimate,
    pub h_bar: f64,
    pub lo: f64,
    pub hi: f64,
}

/// The support function `H̄(p) = sup_{z∈𝒮} p·z` for `p = e_axis` as the
/// large-depth speed `d/τ(d)` of the hitting time of `{p·z ≥ 0}` from `−d p`,
/// extrapolated in `d` with `model`. Five lateral probes per depth are
/// averaged within each seed.
pub fn halfspace_h_bar<F, M>(
    make_env: M,
    seeds: &[u64],
    axis: usize,
    depths: &[f64],
    h: f64,
    model: BiasModel,
) -> Result<HalfSpaceSpeed, HomogError>
where
    F: VectorField,
    M: Fn(u64) -> F,
{
    let d_max = depths.iter().copied().fold(0.0, f64::max);
    if !(d_max > 0.0) {
        return Err(HomogError::BadParameter { name: "depth", value: d_max });
    }
    let lateral = (0.25 * d_max).max(16.0);
    let mut samples = Vec::with_capacity(seeds.len());
    for &s in seeds {
        let env = make_env(s);
        let dim = env.dim();
        if axis >= dim {
            return Err(HomogError::BadParameter { name: "axis", value: axis as f64 });
        }
        let (grid, sources) = halfspace_grid(dim, axis, d_max, lateral, h)?;
        let mut solver = FrontSolver::new(&env, &grid, FrontOptions::for_dim(dim).stencil_radius, true);
        solver.run(&sources, f64::INFINITY, |_, _| false);
        let mut row = Vec::with_capacity(depths.len());
        for &d in depths {
            let mut acc = 0.0;
            for l in -2i32..=2 {
                let mut y = Point::ZERO;
                y[axis] = -d;
                if dim > 1 {
                    y[(axis + 1) % dim] = l as f64 * lateral / 5.0;
                }
                let c = grid.locate(y).ok_or(FrontError::SeedOutOfBounds)?;
                acc += solver.arrival(c);
            }
            row.push(acc / 5.0);
        }
        samples.push(row);
    }
    let mut e = Point::ZERO;
    e[axis] = 1.0;
    let fit = fit_theta_bar(e, depths, &samples, model, 400, 0x4842_4152)?;
    if !(fit.theta_bar > 0.0) {
        return Err(ShapeError::NonPositiveTheta { index: axis, value: fit.theta_bar }.into());
    }
    let h_bar = 1.0 / fit.theta_bar;
    let lo = 1.0 / (fit.theta_bar + fit.halfwidth);
    let hi = if fit.theta_bar > fit.halfwidth { 1.0 / (fit.theta_bar - fit.halfwidth) } else { f64::INFINITY };
    Ok(HalfSpaceSpeed { fit, h_bar, lo, hi })
}

/// One `(seed, ε)` cell: sup over probes of `|u^ε(t, x) − ū(t, x)|` for
/// `u₀ = p·x`.
///
/// A backward front from the half-space `{p·z ≥ 0}` gives, for every probe
/// `y`, the hitting time `τ(y)`; at `(t, x) = (ετ(y), εy)` the control
/// formula gives `u^ε = 0` exactly, so the error there is
/// `ε |τ(y) H̄(p) + p·y|`. Probes sit at depths `d_j = 0.95 (j/J) T/ε` with
/// `t ≤ T` kept.
pub fn rate_probe<F: VectorField>(field: &F, cfg: &RateConfig, eps: f64, h_bar: f64) -> Result<f64, HomogError> {
    let dim = field.dim();
    if cfg.axis >= dim {
        return Err(HomogError::BadParameter { name: "axis", value: cfg.axis as f64 });
    }
    let scale = cfg.horizon / eps;
    let h = cfg.h;
    let depth = 0.95 * scale;
    let lat = cfg.lateral.iter().map(|v| math::abs(*v)).fold(0.0, f64::max) * scale + cfg.margin * scale;
    let (grid, sources) = halfspace_grid(dim, cfg.axis, depth, lat, h)?;
    let mut probes = Vec::new();
    for j in 1..=cfg.depths {
        for &off in &cfg.lateral {
            let mut y = Point::ZERO;
            y[cfg.axis] = -depth * j as f64 / cfg.depths as f64;
            if dim > 1 {
                y[(cfg.axis + 1) % dim] = off * scale;
            }
            let c = grid.locate(y).ok_or(FrontError::SeedOutOfBounds)?;
            probes.push(c);
        }
    }
    let mut wanted = vec![false; grid.len()];
    for &c in &probes {
        wanted[c] = true;
    }
    let mut remaining = probes.iter().filter(|c| wanted[**c]).count();
    let t_cap = scale;
    let mut solver = FrontSolver::new(field, &grid, FrontOptions::for_dim(dim).stencil_radius, true);
    solver.run(&sources, t_cap, |c, _| {
        if wanted[c] {
            wanted[c] = false;
            remaining -= 1;
        }
        remaining == 0
    });
    let mut worst = 0.0f64;
    for &c in &probes {
        let tau = solver.arrival(c);
        if tau > t_cap {
            continue;
        }
        let y = grid.center(c);
        let err = eps * math::abs(tau * h_bar + y[cfg.axis]);
        worst = worst.max(err);
    }
    Ok(worst)
}

/// Sup errors per seed and `ε`, and fits of the error against
/// `(Tε)^β log²(T/ε)`.
pub fn homog_rate_experiment<F, M>(make_env: M, seeds: &[u64], cfg: &RateConfig, h_bar: f64) -> Result<RateReport, HomogError>
where
    F: VectorField,
    M: Fn(u64) -> F,
{
    let per_seed: Vec<Vec<f64>> = seeds
        .iter()
        .map(|&s| {
            let env = make_env(s);
            cfg.epsilons.iter().map(|&e| rate_probe(&env, cfg, e, h_bar)).collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;
    Ok(rate_report(cfg, h_bar, per_seed))
}

/// Aggregates `[seed][ε]` sup errors.
pub fn rate_report(cfg: &RateConfig, h_bar: f64, per_seed: Vec<Vec<f64>>) -> RateReport {
    let n = per_seed.len().max(1) as f64;
    let sup_errors: Vec<f64> = (0..cfg.epsilons.len()).map(|j| per_seed.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let t = cfg.horizon;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut lx = Vec::new();
    let mut ly = Vec::new();
    for (e, err) in cfg.epsilons.iter().zip(&sup_errors) {
        if *err > 0.0 {
            let l = math::ln(t / e);
            xs.push(math::ln(t * e));
            ys.push(math::ln(err / (l * l)));
            lx.push(math::ln(*e));
            ly.push(math::ln(*err));
        }
    }
    RateReport {
        horizon: t,
        epsilons: cfg.epsilons.clone(),
        h_bar,
        per_seed,
        sup_errors,
        fit: linear_fit(&xs, &ys),
        power_fit: linear_fit(&lx, &ly),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct T0Estimate {
    pub constant: f64,
    pub horizons: Vec<f64>,
    /// Per seed `T₀`, `None` when censored at the largest horizon.
    pub per_seed: Vec<Option<f64>>,
    /// `[seed][horizon]` of `sup_{t ≤ T} dist_H / (T^{1/2} log² T)`.
    pub ratios: Vec<Vec<f64>>,
}

impl T0Estimate {
    pub fn censored(&self) -> usize {
        self.per_seed.iter().filter(|t| t.is_none()).count()
    }

    /// Empirical `P[T₀ ≥ T]` at each horizon (censored seeds count as larger
    /// than every horizon).
    pub fn survival(&self) -> Vec<(f64, f64)> {
        let n = self.per_seed.len() as f64;
        self.horizons
            .iter()
            .map(|&h| (h, self.per_seed.iter().filter(|t| t.map_or(true, |v| v >= h)).count() as f64 / n))
            .collect()
    }

    /// Whether `log P[T₀ ≥ T]` is concave in `log^{3/2} T` on the uncensored
    /// part of the curve.
    pub fn envelope_concave(&self) -> bool {
        let pts: Vec<(f64, f64)> = self
            .survival()
            .into_iter()
            .filter(|(_, s)| *s > 0.0)
            .map(|(h, s)| (math::powf(math::ln(h), 1.5), math::ln(s)))
            .collect();
        stats::is_concave(&pts, stats::concavity_tol(self.per_seed.len(), 1.0 / self.per_seed.len().max(1) as f64))
    }
}

/// Applies the `T₀` rule to precomputed ratio rows.
pub fn t0_from_ratios(horizons: &[f64], ratios: Vec<Vec<f64>>, constant: f64) -> T0Estimate {
    let per_seed = ratios
        .iter()
        .map(|row| {
            // smallest horizon from which every later ratio stays below c
            let mut t0 = None;
            for i in (0..horizons.len()).rev() {
                if row[i] <= constant {
                    t0 = Some(horizons[i]);
                } else {
                    break;
                }
            }
            t0
        })
        .collect();
    T0Estimate { constant, horizons: horizons.to_vec(), per_seed, ratios }
}

/// Per seed `sup_{t ≤ T} dist_H(ℛ^-_t(0), t𝒮)` on probe times spaced by
/// `dt`, scaled by `T^{1/2} log² T`, then [`t0_from_ratios`].
pub fn estimate_t0<F, M>(
    make_env: M,
    seeds: &[u64],
    shape: &EffectiveShape,
    constant: f64,
    horizons: &[f64],
    dt: f64,
    h: f64,
) -> Result<T0Estimate, HomogError>
where
    F: VectorField,
    M: Fn(u64) -> F,
{
    if let Some(t) = horizons.iter().find(|t| !(**t > 1.0)) {
        return Err(HomogError::BadParameter { name: "horizon", value: *t });
    }
    if horizons.windows(2).any(|w| !(w[1] > w[0])) || horizons.is_empty() {
        return Err(HomogError::BadParameter { name: "horizons", value: horizons.len() as f64 });
    }
    let t_max = *horizons.last().unwrap();
    let n_t = math::ceil(t_max / dt) as usize;
    let times: Vec<f64> = (1..=n_t).map(|i| (i as f64 * dt).min(t_max)).collect();
    let mut ratios = Vec::with_capacity(seeds.len());
    for &s in seeds {
        let env = make_env(s);
        let grid = micro_grid(&env, Point::ZERO, t_max, h)?;
        let src = grid.locate(Point::ZERO).ok_or(FrontError::SeedOutOfBounds)?;
        let mut solver = FrontSolver::new(&env, &grid, FrontOptions::for_dim(grid.dim()).stencil_radius, false);
        let info = solver.run(&[(src, 0.0)], t_max, |_, _| false);
        if let Some(at) = info.truncated_at {
            if at <= t_max {
                return Err(FrontError::Truncated { at }.into());
            }
        }
        let arr = solver.arrivals();
        let dists: Vec<f64> = times
            .iter()
            .map(|&t| {
                let reach = Mask { grid: grid.clone(), bits: arr.iter().map(|a| *a <= t).collect() };
                hausdorff(&reach, &shape.scaled_mask(&grid, Point::ZERO, t, false))
            })
            .collect::<Result<_, _>>()?;
        let row = horizons
            .iter()
            .map(|&big_t| {
                let d = times.iter().zip(&dists).filter(|(t, _)| **t <= big_t + 1e-12).map(|(_, d)| *d).fold(0.0, f64::max);
                let l = math::ln(big_t);
                d / (math::sqrt(big_t) * l * l)
            })
            .collect();
        ratios.push(row);
    }
    Ok(t0_from_ratios(horizons, ratios, constant))
}
