//! The six canonical experiments: per-seed observables and summaries.

use std::f64::consts::PI;

use gfront_core::env::EnvError;
use gfront_core::flux::{flux_radius_profile, FluxError, FluxOptions};
use gfront_core::frontprop::{sample_directions, waiting_time_with, FrontError, FrontOptions, FrontSolver};
use gfront_core::homog::{halfspace_h_bar, rate_probe, rate_report, HomogError, RateConfig};
use gfront_core::percolation::{
    big_open_cluster, check_unicoherence, closed_hull, clusters, good_site_field, site_box, skeleton_path,
    synthetic_field, validate_skeleton, GoodSiteOptions, PercolationError, PercolationField,
};
use gfront_core::shape::{build_shape, fit_theta_bar, seed_passage_samples, BiasModel, ShapeError};
use gfront_core::stats::{self, linear_fit, stretched_exp_fit, TailWindow};
use gfront_core::{build_environment, BumpProfile, Grid, LatticeEnvironment, Point};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::config::{fmt_f64, Config, Experiment};
use crate::formats::{write_shape, ShapeRow};
use crate::records::{col, Cell, Column, RecordError, Table};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Front(#[from] FrontError),
    #[error(transparent)]
    Flux(#[from] FluxError),
    #[error(transparent)]
    Percolation(#[from] PercolationError),
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error(transparent)]
    Homog(#[from] HomogError),
    #[error(transparent)]
    Records(#[from] RecordError),
    #[error("grid of {cells} cells exceeds budget.max_cells = {cap}")]
    CellBudget { cells: u64, cap: u64 },
    #[error("key `{key}`: {reason}")]
    Param { key: &'static str, reason: String },
    #[error("cannot summarize: {0}")]
    Summary(String),
}

fn param(key: &'static str, reason: impl Into<String>) -> ExperimentError {
    ExperimentError::Param { key, reason: reason.into() }
}

pub fn make_env(cfg: &Config, seed: u64) -> Result<LatticeEnvironment, EnvError> {
    let profile = BumpProfile::new(cfg.float("bump_radius"), cfg.int("smoothness").max(0) as u32)?;
    let env = build_environment(seed, cfg.int("dim") as usize, cfg.float("amplitude"), cfg.float("div_knob"), profile)?;
    env.with_sublattice(cfg.int("sublattice").max(1) as u32)
}

fn dim(cfg: &Config) -> usize {
    cfg.int("dim") as usize
}

fn bias_model(s: &str) -> BiasModel {
    if s == "inverse-r" {
        BiasModel::InverseR
    } else {
        BiasModel::SqrtLog
    }
}

pub fn rate_config(cfg: &Config) -> RateConfig {
    RateConfig {
        axis: cfg.int("homog.axis").max(0) as usize,
        horizon: cfg.float("homog.horizon"),
        epsilons: cfg.floats("homog.eps").to_vec(),
        h: cfg.float("homog.h"),
        depths: cfg.int("homog.depths").max(1) as usize,
        lateral: cfg.floats("homog.lateral").to_vec(),
        margin: cfg.float("homog.margin"),
    }
}

/// Record columns after the key columns.
pub fn columns(e: Experiment) -> Vec<Column> {
    match e {
        Experiment::WaitingTimeTail => {
            vec![col("x0", "length"), col("x1", "length"), col("x2", "length"), col("W", "time"), col("status", "")]
        }
        Experiment::FluxTail => vec![
            col("R1", "length"),
            col("R0", "length"),
            col("eps", "velocity"),
            col("holds", "1"),
            col("worst_ratio", "1"),
            col("pitch", "length"),
            col("sampled", "1"),
        ],
        Experiment::ClusterStats => vec![
            col("open_fraction", "1"),
            col("open_clusters", "count"),
            col("closed_clusters", "count"),
            col("largest_open", "sites"),
            col("largest_closed_hull", "sites"),
            col("big_cluster_holds", "1"),
            col("max_bad", "sites"),
            col("unicoherent", "1"),
        ],
        Experiment::ShapeEstimate => {
            vec![col("direction", "index"), col("angle", "rad"), col("R", "length"), col("theta", "time")]
        }
        Experiment::HomogRate => vec![col("eps", "1"), col("sup_error", "solution"), col("h_bar", "velocity")],
        Experiment::SkeletonValidate => vec![
            col("pair", "index"),
            col("x0", "length"),
            col("x1", "length"),
            col("y0", "length"),
            col("y1", "length"),
            col("dist", "length"),
            col("hops", "count"),
            col("hull", "sites"),
            col("ratio", "1"),
            col("valid", "1"),
            col("error", ""),
        ],
    }
}

/// State computed once before the seeds run.
#[derive(Clone, Debug, PartialEq)]
pub enum Prepared {
    None,
    /// `H̄(p)` for the rate experiment and its interval.
    HBar { h_bar: f64, lo: f64, hi: f64 },
}

/// Largest grid a seed of `cfg` allocates.
pub fn cell_estimate(cfg: &Config) -> u64 {
    let d = dim(cfg) as i32;
    let side = |len: f64, h: f64| (len / h).ceil() + 1.0;
    let cells = match cfg.experiment {
        Experiment::WaitingTimeTail => side(2.0 * cfg.float("wait.grid_radius"), cfg.float("wait.h")).powi(d),
        Experiment::FluxTail => 0.0,
        Experiment::ClusterStats => (2.0 * cfg.int("perc.half") as f64 + 1.0).powi(d),
        Experiment::ShapeEstimate => {
            let r = cfg.floats("shape.radii").iter().copied().fold(0.0, f64::max);
            side(2.0 * (1.25 * r + 2.0), cfg.float("shape.h")).powi(d)
        }
        Experiment::HomogRate => {
            let rc = rate_config(cfg);
            let h = rc.h;
            let eps = rc.epsilons.iter().copied().fold(f64::INFINITY, f64::min);
            let scale = rc.horizon / eps;
            let lat = rc.lateral.iter().map(|v| v.abs()).fold(0.0, f64::max) * scale + rc.margin * scale;
            let depth = cfg.floats("homog.hbar_depths").iter().copied().fold(0.95 * scale, f64::max);
            side(depth + 2.0, h) * side(2.0 * lat.max(0.25 * depth), h).powi(d - 1)
        }
        Experiment::SkeletonValidate => (2.0 * cfg.int("skel.half") as f64 + 1.0).powi(d),
    };
    cells as u64
}

fn check_params(cfg: &Config) -> Result<(), ExperimentError> {
    let d = cfg.int("dim");
    if d != 2 && d != 3 {
        return Err(param("dim", "must be 2 or 3"));
    }
    match cfg.experiment {
        Experiment::ShapeEstimate if d != 2 => Err(param("dim", "shape-estimate builds a polygon and needs dim = 2")),
        Experiment::ShapeEstimate if cfg.floats("shape.radii").len() < 2 => Err(param("shape.radii", "needs two radii")),
        Experiment::HomogRate if cfg.int("homog.axis") < 0 || cfg.int("homog.axis") >= d => {
            Err(param("homog.axis", "must name a coordinate axis"))
        }
        Experiment::HomogRate if cfg.int("homog.hbar_seeds") < 8 => Err(param("homog.hbar_seeds", "needs at least 8")),
        Experiment::SkeletonValidate if cfg.float("skel.p") <= 0.0 || cfg.float("skel.p") > 1.0 => {
            Err(param("skel.p", "must lie in (0, 1]"))
        }
        Experiment::ClusterStats if cfg.int("perc.big_r") + cfg.int("perc.big_n") > cfg.int("perc.half") => {
            Err(param("perc.big_r", "perc.big_r + perc.big_n must not exceed perc.half"))
        }
        _ => Ok(()),
    }
}

/// Parameter and cell-budget checks.
pub fn check(cfg: &Config) -> Result<(), ExperimentError> {
    check_params(cfg)?;
    let cap = cfg.int("budget.max_cells").max(0) as u64;
    let cells = cell_estimate(cfg);
    if cap > 0 && cells > cap {
        return Err(ExperimentError::CellBudget { cells, cap });
    }
    Ok(())
}

/// Checks the config, then runs the pre-phase.
pub fn prepare(cfg: &Config) -> Result<Prepared, ExperimentError> {
    check(cfg)?;
    match cfg.experiment {
        Experiment::HomogRate => {
            let offset = cfg.int("homog.hbar_seed_offset").max(0) as u64;
            let seeds: Vec<u64> = (0..cfg.int("homog.hbar_seeds") as u64).map(|s| offset + s).collect();
            let est = halfspace_h_bar(
                |s| make_env(cfg, s).expect("environment parameters checked on the first seed"),
                &seeds,
                rate_config(cfg).axis,
                cfg.floats("homog.hbar_depths"),
                cfg.float("homog.h"),
                bias_model(cfg.choice("homog.hbar_bias")),
            )?;
            Ok(Prepared::HBar { h_bar: est.h_bar, lo: est.lo, hi: est.hi })
        }
        _ => Ok(Prepared::None),
    }
}

fn seed_rng(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ salt.rotate_left(17))
}

/// Observables of one seed.
pub fn run_seed(cfg: &Config, prep: &Prepared, seed: u64) -> Result<Vec<Vec<Cell>>, ExperimentError> {
    match cfg.experiment {
        Experiment::WaitingTimeTail => {
            let env = make_env(cfg, seed)?;
            let d = dim(cfg);
            let mut x = Point::ZERO;
            if cfg.choice("wait.base_point") == "random" {
                let mut rng = seed_rng(seed, 0x5741_4954);
                for k in 0..d {
                    x[k] = rng.random_range(0.0..1.0);
                }
            }
            let h = cfg.float("wait.h");
            let grid = Grid::covering(d, h, x, cfg.float("wait.grid_radius")).map_err(|_| param("wait.h", "bad grid"))?;
            let mut solver = FrontSolver::new(&env, &grid, FrontOptions::for_dim(d).stencil_radius, false);
            let (w, status) = match waiting_time_with(&mut solver, x, cfg.float("wait.ball_radius"), cfg.float("wait.t_max")) {
                Ok(w) if w.is_finite() => (w, "ok"),
                Ok(w) => (w, "timeout"),
                Err(FrontError::Truncated { .. }) => (f64::INFINITY, "truncated"),
                Err(e) => return Err(e.into()),
            };
            Ok(vec![vec![x[0].into(), x[1].into(), x[2].into(), w.into(), status.into()]])
        }
        Experiment::FluxTail => {
            let env = make_env(cfg, seed)?;
            let r0s = cfg.floats("flux.r0");
            let r0_min = r0s.iter().copied().fold(f64::INFINITY, f64::min);
            let opts = FluxOptions {
                pitch_const: cfg.float("flux.pitch_const"),
                order: cfg.int("flux.order").max(0) as usize,
                budget: cfg.float("flux.budget"),
            };
            let r1 = cfg.float("flux.r1");
            let eps = cfg.float("flux.eps");
            let prof = flux_radius_profile(&env, r1, r0_min, eps, opts)?;
            Ok(r0s
                .iter()
                .map(|&r0| {
                    let rep = prof.report(r0);
                    vec![r1.into(), r0.into(), eps.into(), rep.holds.into(), rep.worst_ratio.into(), rep.pitch.into(), rep.sampled.into()]
                })
                .collect())
        }
        Experiment::ClusterStats => {
            let d = dim(cfg);
            let half = cfg.int("perc.half");
            let domain = site_box(d, -half, half);
            let field = if cfg.choice("perc.source") == "environment" {
                let env = make_env(cfg, seed)?;
                let mut opts = GoodSiteOptions::for_dim(d);
                opts.h = cfg.float("perc.h");
                good_site_field(&env, seed, domain, cfg.float("perc.tau"), opts)?
            } else {
                synthetic_field(seed, domain, cfg.float("perc.p"))?
            };
            Ok(vec![cluster_row(&field, cfg.int("perc.big_r"), cfg.int("perc.big_n").max(0) as usize)?])
        }
        Experiment::ShapeEstimate => {
            let env = make_env(cfg, seed)?;
            let dirs = sample_directions(2, cfg.int("shape.directions").max(1) as usize);
            let radii = cfg.floats("shape.radii");
            let samples = seed_passage_samples(&env, &dirs, radii, cfg.float("shape.h"))?;
            let mut rows = Vec::new();
            for (i, (e, row)) in dirs.iter().zip(&samples).enumerate() {
                for (r, t) in radii.iter().zip(row) {
                    rows.push(vec![i.into(), e[1].atan2(e[0]).into(), (*r).into(), (*t).into()]);
                }
            }
            Ok(rows)
        }
        Experiment::HomogRate => {
            let Prepared::HBar { h_bar, .. } = prep else {
                return Err(ExperimentError::Summary("homog-rate needs H̄ from the pre-phase".into()));
            };
            let env = make_env(cfg, seed)?;
            let rc = rate_config(cfg);
            rc.epsilons
                .iter()
                .map(|&e| Ok(vec![e.into(), rate_probe(&env, &rc, e, *h_bar)?.into(), (*h_bar).into()]))
                .collect()
        }
        Experiment::SkeletonValidate => skeleton_rows(cfg, seed),
    }
}

fn cluster_row(field: &PercolationField, big_r: i64, big_n: usize) -> Result<Vec<Cell>, ExperimentError> {
    let cl = clusters(field);
    let open: Vec<_> = cl.iter().filter(|c| c.open).collect();
    let largest_open = open.iter().map(|c| c.sites.len()).max().unwrap_or(0);
    let largest_hull = cl.iter().filter(|c| !c.open).map(|c| closed_hull(field, &c.sites).len()).max().unwrap_or(0);
    let big = big_open_cluster(field, big_r, big_n)?;
    let uni = match open.iter().max_by_key(|c| c.sites.len()) {
        Some(c) => check_unicoherence(&field.domain, &c.sites),
        None => true,
    };
    Ok(vec![
        field.open_fraction().into(),
        open.len().into(),
        (cl.len() - open.len()).into(),
        largest_open.into(),
        largest_hull.into(),
        big.holds().into(),
        big.max_bad.into(),
        uni.into(),
    ])
}

fn skeleton_rows(cfg: &Config, seed: u64) -> Result<Vec<Vec<Cell>>, ExperimentError> {
    let d = dim(cfg);
    if d != 2 {
        return Err(param("dim", "skeleton-validate records planar pairs and needs dim = 2"));
    }
    let half = cfg.int("skel.half");
    let field = synthetic_field(seed, site_box(d, -half, half), cfg.float("skel.p"))?;
    let big = clusters(&field).into_iter().filter(|c| c.open).max_by_key(|c| c.sites.len());
    let Some(big) = big else {
        return Ok(Vec::new());
    };
    let mut rng = seed_rng(seed, 0x534b_454c);
    let max_dist = cfg.float("skel.max_dist");
    let mut rows = Vec::new();
    for pair in 0..cfg.int("skel.pairs").max(0) as usize {
        // endpoints jittered inside the cubes of two sites of the big cluster
        let pick = |rng: &mut ChaCha8Rng| {
            let c = field.domain.center(big.sites[rng.random_range(0..big.sites.len())]);
            Point::new2(c[0] + rng.random_range(-0.45..0.45), c[1] + rng.random_range(-0.45..0.45))
        };
        let x = pick(&mut rng);
        let mut y = pick(&mut rng);
        let mut tries = 0;
        while x.dist(y) > max_dist && tries < 1000 {
            y = pick(&mut rng);
            tries += 1;
        }
        if x.dist(y) > max_dist {
            continue;
        }
        let dist = x.dist(y);
        let base: Vec<Cell> = vec![pair.into(), x[0].into(), x[1].into(), y[0].into(), y[1].into(), dist.into()];
        let tail: Vec<Cell> = match skeleton_path(&field, x, y) {
            Ok(path) => {
                let valid = validate_skeleton(&field, &path);
                let ratio = path.hops() as f64 / (dist + path.hull_size as f64).max(1.0);
                vec![
                    path.hops().into(),
                    path.hull_size.into(),
                    ratio.into(),
                    valid.is_ok().into(),
                    valid.err().map(|e| e.to_string()).unwrap_or_default().as_str().into(),
                ]
            }
            Err(e) => vec![0usize.into(), 0usize.into(), f64::NAN.into(), false.into(), e.to_string().as_str().into()],
        };
        rows.push(base.into_iter().chain(tail).collect());
    }
    Ok(rows)
}

/// A plotted series.
#[derive(Clone, Debug, PartialEq)]
pub struct Plot {
    pub name: String,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub points: Vec<(f64, f64)>,
    /// Drawn as a line.
    pub curve: Vec<(f64, f64)>,
    /// Join the points into a closed polygon instead of a scatter.
    pub polygon: bool,
}

/// Summary values plus any extra files (`suffix`, contents).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Summary {
    pub entries: Vec<(String, String)>,
    pub flags: Vec<String>,
    pub files: Vec<(String, String)>,
    pub plots: Vec<Plot>,
}

impl Summary {
    fn put(&mut self, key: impl Into<String>, v: impl Into<SummaryValue>) {
        self.entries.push((key.into(), v.into().0));
    }

    fn flag(&mut self, f: impl Into<String>) {
        self.flags.push(f.into());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn get_f64(&self, key: &str) -> Option<f64> {
        self.get(key)?.parse().ok()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(&format!("{k} = {v}\n"));
        }
        for f in &self.flags {
            out.push_str(&format!("flag = {f}\n"));
        }
        out
    }
}

pub struct SummaryValue(String);

impl From<f64> for SummaryValue {
    fn from(v: f64) -> Self {
        SummaryValue(fmt_f64(v))
    }
}

impl From<usize> for SummaryValue {
    fn from(v: usize) -> Self {
        SummaryValue(v.to_string())
    }
}

impl From<bool> for SummaryValue {
    fn from(v: bool) -> Self {
        SummaryValue(v.to_string())
    }
}

impl From<String> for SummaryValue {
    fn from(v: String) -> Self {
        SummaryValue(v)
    }
}

fn bools(t: &Table, column: &str) -> Result<Vec<bool>, ExperimentError> {
    Ok(t.floats(column)?.into_iter().map(|v| v != 0.0).collect())
}

fn fraction(v: &[bool]) -> f64 {
    v.iter().filter(|b| **b).count() as f64 / v.len().max(1) as f64
}

/// Recomputes the summary of a record table (rows sorted by seed first).
pub fn summarize(cfg: &Config, table: Table) -> Result<Summary, ExperimentError> {
    let t = table.sorted_by_seed();
    let n_seeds = t.seeds().len();
    let mut s = Summary::default();
    s.put("experiment", cfg.experiment.name().to_string());
    s.put("digest", cfg.digest());
    s.put("seeds", n_seeds);
    if n_seeds == 0 {
        s.flag("no records");
        return Ok(s);
    }
    if n_seeds < 2 {
        s.flag("single seed: no confidence intervals");
    }
    match cfg.experiment {
        Experiment::WaitingTimeTail => summarize_wait(cfg, &t, &mut s)?,
        Experiment::FluxTail => summarize_flux(cfg, &t, &mut s)?,
        Experiment::ClusterStats => {
            for c in ["open_fraction", "open_clusters", "closed_clusters", "largest_open", "largest_closed_hull", "max_bad"] {
                let v = t.floats(c)?;
                s.put(format!("{c}.mean"), stats::mean(&v));
                if n_seeds >= 2 {
                    s.put(format!("{c}.sd"), stats::std_dev(&v));
                }
            }
            s.put("big_cluster_holds.fraction", fraction(&bools(&t, "big_cluster_holds")?));
            let uni = bools(&t, "unicoherent")?;
            s.put("unicoherent.fraction", fraction(&uni));
            if uni.iter().any(|b| !b) {
                s.flag("unicoherence failed on some seed");
            }
        }
        Experiment::ShapeEstimate => summarize_shape(cfg, &t, &mut s)?,
        Experiment::HomogRate => summarize_homog(cfg, &t, &mut s)?,
        Experiment::SkeletonValidate => {
            let valid = bools(&t, "valid")?;
            let ratio: Vec<f64> = t.floats("ratio")?.into_iter().filter(|r| r.is_finite()).collect();
            s.put("pairs", valid.len());
            s.put("valid", valid.iter().filter(|b| **b).count());
            let max = ratio.iter().copied().fold(0.0, f64::max);
            s.put("ratio.max", max);
            s.put("ratio.mean", if ratio.is_empty() { f64::NAN } else { stats::mean(&ratio) });
            s.put("bound_4.holds", ratio.len() == valid.len() && max <= 4.0);
            if valid.iter().any(|b| !b) {
                s.flag("some skeleton paths failed validation");
            }
        }
    }
    Ok(s)
}

fn summarize_wait(cfg: &Config, t: &Table, s: &mut Summary) -> Result<(), ExperimentError> {
    let w = t.floats("W")?;
    let status = t.texts("status")?;
    let ok: Vec<f64> = w.iter().zip(&status).filter(|(_, st)| **st == "ok").map(|(w, _)| *w).collect();
    s.put("truncated", w.len() - ok.len());
    if ok.is_empty() {
        s.flag("no finite waiting times");
        return Ok(());
    }
    let sorted = stats::sorted(&ok);
    s.put("W.mean", stats::mean(&ok));
    for q in [0.5, 0.9, 0.99] {
        s.put(format!("W.q{}", (q * 100.0f64).round() as u32), stats::quantile_sorted(&sorted, q));
    }
    s.put("W.max", *sorted.last().unwrap());
    let n = ok.len();
    let win = TailWindow { s_min: cfg.int("wait.min_count").max(1) as f64 / n as f64, s_max: cfg.float("wait.s_max"), shift: 0.0 };
    let reps = if n >= 2 { cfg.int("wait.boot_reps").max(0) as usize } else { 0 };
    let surv = stats::survival(&ok);
    let mut plot = Plot {
        name: "survival".into(),
        title: "waiting-time log-survival".into(),
        x_label: "lambda".into(),
        y_label: "log P[W >= lambda]".into(),
        points: surv.iter().filter(|(_, p)| *p > 0.0).map(|(x, p)| (*x, p.ln())).collect(),
        curve: Vec::new(),
        polygon: false,
    };
    match stretched_exp_fit(&ok, win, reps, 0x5441_494c) {
        Some(f) => {
            s.put("tail.a", f.a);
            s.put("tail.b", f.b);
            s.put("tail.r2", f.r2);
            s.put("tail.points", f.points);
            s.put("tail.concave", f.concave);
            if let Some(ci) = f.b_ci {
                s.put("tail.b_lo", ci.lo);
                s.put("tail.b_hi", ci.hi);
                s.put("tail.b_ci_contains_half", ci.contains(0.5));
                if !ci.contains(0.5) {
                    s.flag("tail exponent interval excludes 1/2: see tail.r2, tail.points and tail.concave");
                }
            }
            let (lo, hi) = (sorted[0], *sorted.last().unwrap());
            plot.curve = (0..=50).map(|i| lo + (hi - lo) * i as f64 / 50.0).map(|x| (x, -f.a * x.powf(f.b))).collect();
        }
        None => s.flag("tail fit undefined (too few distinct survival levels)"),
    }
    s.plots.push(plot);
    Ok(())
}

fn summarize_flux(cfg: &Config, t: &Table, s: &mut Summary) -> Result<(), ExperimentError> {
    let r0 = t.floats("R0")?;
    let holds = bools(t, "holds")?;
    let sampled = bools(t, "sampled")?;
    if sampled.iter().any(|b| *b) {
        s.flag("cube family coarsened to fit the flux budget");
    }
    let d = dim(cfg) as i32;
    let mut levels: Vec<f64> = r0.clone();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let mut probs = Vec::new();
    for &l in &levels {
        let idx: Vec<usize> = (0..r0.len()).filter(|&i| r0[i] == l).collect();
        let fails = idx.iter().filter(|&&i| !holds[i]).count();
        let p = fails as f64 / idx.len() as f64;
        s.put(format!("fail.R0={}", fmt_f64(l)), fails);
        s.put(format!("p_fail.R0={}", fmt_f64(l)), p);
        probs.push(p);
    }
    let strictly = probs.windows(2).all(|w| w[1] < w[0] || (w[1] == 0.0 && w[0] == 0.0));
    s.put("decreasing", probs.windows(2).all(|w| w[1] <= w[0]) && strictly);
    let pts: Vec<(f64, f64)> = levels.iter().zip(&probs).filter(|(_, p)| **p > 0.0).map(|(l, p)| (l.powi(d - 1), p.ln())).collect();
    let excluded = probs.iter().filter(|p| **p == 0.0).count();
    s.put("fit.excluded_zero", excluded);
    let (xs, ys): (Vec<f64>, Vec<f64>) = pts.iter().copied().unzip();
    let mut plot = Plot {
        name: "flux".into(),
        title: "flux-event failure".into(),
        x_label: "R0^(d-1)".into(),
        y_label: "log P[E fails]".into(),
        points: pts.clone(),
        curve: Vec::new(),
        polygon: false,
    };
    match linear_fit(&xs, &ys) {
        Some(f) => {
            s.put("fit.slope", f.slope);
            s.put("fit.intercept", f.intercept);
            s.put("fit.r2", f.r2);
            s.put("fit.points", f.n);
            plot.curve = xs.iter().map(|x| (*x, f.predict(*x))).collect();
        }
        None => s.flag("fewer than two failure levels: no tail fit"),
    }
    s.plots.push(plot);
    Ok(())
}

fn summarize_shape(cfg: &Config, t: &Table, s: &mut Summary) -> Result<(), ExperimentError> {
    let dir = t.floats("direction")?;
    let ang = t.floats("angle")?;
    let rad = t.floats("R")?;
    let theta = t.floats("theta")?;
    let seed_col = t.index("seed")?;
    let radii = cfg.floats("shape.radii");
    let n_dirs = cfg.int("shape.directions").max(1) as usize;
    let seeds = t.seeds();
    if seeds.len() < 8 {
        s.flag("fewer than 8 seeds: θ̄ fit skipped");
        return Ok(());
    }
    // samples[direction][seed][radius]
    let mut samples = vec![vec![vec![f64::NAN; radii.len()]; seeds.len()]; n_dirs];
    let mut angles = vec![0.0; n_dirs];
    for i in 0..t.rows.len() {
        let seed: u64 = t.rows[i][seed_col].parse().unwrap_or(0);
        let si = seeds.binary_search(&seed).map_err(|_| ExperimentError::Summary("seed index".into()))?;
        let di = dir[i] as usize;
        let ri = radii.iter().position(|r| *r == rad[i]).ok_or_else(|| ExperimentError::Summary(format!("radius {} not in shape.radii", rad[i])))?;
        if di >= n_dirs {
            return Err(ExperimentError::Summary(format!("direction {di} out of range")));
        }
        samples[di][si][ri] = theta[i];
        angles[di] = ang[i];
    }
    let model = bias_model(cfg.choice("shape.bias"));
    let dirs: Vec<Point> = angles.iter().map(|a| Point::new2(a.cos(), a.sin())).collect();
    let mut fits = Vec::with_capacity(n_dirs);
    for (i, (e, smp)) in dirs.iter().zip(&samples).enumerate() {
        if smp.iter().flatten().any(|v| !v.is_finite()) {
            return Err(ExperimentError::Summary(format!("direction {i} has missing samples")));
        }
        fits.push(fit_theta_bar(*e, radii, smp, model, 400, i as u64)?);
    }
    let th: Vec<f64> = fits.iter().map(|f| f.theta_bar).collect();
    let hw: Vec<f64> = fits.iter().map(|f| f.halfwidth).collect();
    s.put("theta_bar.mean", stats::mean(&th));
    s.put("theta_bar.min", th.iter().copied().fold(f64::INFINITY, f64::min));
    s.put("theta_bar.max", th.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    s.put("halfwidth.max", hw.iter().copied().fold(0.0, f64::max));
    s.put("flagged_directions", fits.iter().filter(|f| f.flagged).count());
    let shape = build_shape(&dirs, &th, &hw)?;
    let rows: Vec<ShapeRow> = angles
        .iter()
        .enumerate()
        .map(|(i, a)| ShapeRow { angle: *a, theta_bar: th[i], halfwidth: hw[i], boundary: shape.boundary[i] })
        .collect();
    let csv = write_shape(&rows);
    s.files.push(("shape.csv".into(), csv));
    let mut table = String::from("angle (rad),h_bar (velocity)\n");
    for k in 0..64 {
        let a = 2.0 * PI * k as f64 / 64.0;
        table.push_str(&format!("{},{}\n", fmt_f64(a), fmt_f64(shape.effective_h(Point::new2(a.cos(), a.sin())))));
    }
    s.files.push(("hbar.csv".into(), table));
    for (name, p) in [("h_bar.e1", Point::new2(1.0, 0.0)), ("h_bar.e2", Point::new2(0.0, 1.0))] {
        s.put(name, shape.effective_h(p));
    }
    s.plots.push(Plot {
        name: "shape".into(),
        title: "effective shape".into(),
        x_label: "x".into(),
        y_label: "y".into(),
        points: shape.boundary.iter().map(|b| (b[0], b[1])).collect(),
        curve: Vec::new(),
        polygon: true,
    });
    Ok(())
}

fn summarize_homog(cfg: &Config, t: &Table, s: &mut Summary) -> Result<(), ExperimentError> {
    let rc = rate_config(cfg);
    let eps = t.floats("eps")?;
    let err = t.floats("sup_error")?;
    let hb = t.floats("h_bar")?;
    let seed_col = t.index("seed")?;
    let seeds = t.seeds();
    let mut per_seed = vec![vec![f64::NAN; rc.epsilons.len()]; seeds.len()];
    for i in 0..t.rows.len() {
        let seed: u64 = t.rows[i][seed_col].parse().unwrap_or(0);
        let si = seeds.binary_search(&seed).map_err(|_| ExperimentError::Summary("seed index".into()))?;
        let ei = rc.epsilons.iter().position(|e| *e == eps[i]).ok_or_else(|| ExperimentError::Summary(format!("eps {} not in homog.eps", eps[i])))?;
        per_seed[si][ei] = err[i];
    }
    if per_seed.iter().flatten().any(|v| v.is_nan()) {
        return Err(ExperimentError::Summary("missing (seed, eps) cells".into()));
    }
    let h_bar = hb[0];
    let rep = rate_report(&rc, h_bar, per_seed);
    s.put("h_bar", h_bar);
    for (e, m) in rep.epsilons.iter().zip(&rep.sup_errors) {
        s.put(format!("sup_error.eps={}", fmt_f64(*e)), *m);
    }
    s.put("decreasing", rep.decreasing());
    match rep.fit {
        Some(f) => {
            s.put("exponent", f.slope);
            s.put("log_amplitude", f.intercept);
            s.put("fit.r2", f.r2);
            if f.n > 2 {
                let (lo, hi) = f.slope_ci();
                s.put("exponent.lo", lo);
                s.put("exponent.hi", hi);
                s.put("exponent.ci_contains_half", lo <= 0.5 && 0.5 <= hi);
                if !(lo <= 0.5 && 0.5 <= hi) {
                    s.flag("exponent interval excludes 1/2: compare power_exponent, fit.residuals and a finer homog.h");
                }
            }
            let residuals: Vec<String> = rep
                .epsilons
                .iter()
                .zip(&rep.sup_errors)
                .map(|(e, m)| {
                    let l = (rc.horizon / e).ln();
                    fmt_f64((m / (l * l)).ln() - f.predict((rc.horizon * e).ln()))
                })
                .collect();
            s.put("fit.residuals", residuals.join(","));
        }
        None => s.flag("rate fit undefined"),
    }
    if let Some(f) = rep.power_fit {
        s.put("power_exponent", f.slope);
    }
    let pts: Vec<(f64, f64)> = rep
        .epsilons
        .iter()
        .zip(&rep.sup_errors)
        .map(|(e, m)| {
            let l = (rc.horizon / e).ln();
            ((rc.horizon * e).ln(), (m / (l * l)).ln())
        })
        .collect();
    let curve = rep.fit.map(|f| pts.iter().map(|(x, _)| (*x, f.predict(*x))).collect()).unwrap_or_default();
    s.plots.push(Plot {
        name: "rate".into(),
        title: "homogenization error".into(),
        x_label: "log(T eps)".into(),
        y_label: "log(err / log^2(T/eps))".into(),
        points: pts,
        curve,
        polygon: false,
    });
    Ok(())
}
