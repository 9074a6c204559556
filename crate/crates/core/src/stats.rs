//! Regression, quantiles, bootstrap and survival-curve fits shared by the
//! experiments.

use crate::math;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Ordinary least squares `y = intercept + slope·x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub slope_se: f64,
    pub intercept_se: f64,
    pub n: usize,
}

impl LinearFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }

    /// Two-sided 95% interval for the slope.
    pub fn slope_ci(&self) -> (f64, f64) {
        let q = t_quantile_975(self.n.saturating_sub(2));
        (self.slope - q * self.slope_se, self.slope + q * self.slope_se)
    }

    pub fn intercept_ci(&self) -> (f64, f64) {
        let q = t_quantile_975(self.n.saturating_sub(2));
        (self.intercept - q * self.intercept_se, self.intercept + q * self.intercept_se)
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance (0 for fewer than two values).
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

pub fn std_dev(xs: &[f64]) -> f64 {
    math::sqrt(variance(xs))
}

/// Returns `None` with fewer than two points or constant `x`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let mx = mean(xs);
    let my = mean(ys);
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(ys).map(|(x, y)| {
        let r = y - intercept - slope * x;
        r * r
    }).sum();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let s2 = if n > 2 { sse / (n - 2) as f64 } else { 0.0 };
    let slope_se = math::sqrt(s2 / sxx);
    let intercept_se = math::sqrt(s2 * (1.0 / n as f64 + mx * mx / sxx));
    Some(LinearFit { slope, intercept, r2, slope_se, intercept_se, n })
}

/// 0.975 quantile of Student's t with `df` degrees of freedom.
pub fn t_quantile_975(df: usize) -> f64 {
    const TABLE: [f64; 30] = [
        12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, 2.201, 2.179, 2.160, 2.145, 2.131,
        2.120, 2.110, 2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042,
    ];
    match df {
        0 => f64::INFINITY,
        1..=30 => TABLE[df - 1],
        _ => {
            // Cornish-Fisher expansion around the normal quantile
            let z = 1.959_963_985;
            let v = df as f64;
            z + (z * z * z + z) / (4.0 * v) + (5.0 * powi5(z) + 16.0 * z * z * z + 3.0 * z) / (96.0 * v * v)
        }
    }
}

fn powi5(z: f64) -> f64 {
    z * z * z * z * z
}

/// Linear-interpolated quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let i = math::floor(pos) as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - frac) + sorted[i + 1] * frac
    } else {
        sorted[i]
    }
}

pub fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Percentile bootstrap over resampled indices.
#[derive(Clone, Debug, PartialEq)]
pub struct Bootstrap {
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
    /// Resamples where the statistic was undefined.
    pub failures: usize,
}

impl Bootstrap {
    pub fn halfwidth(&self) -> f64 {
        0.5 * (self.hi - self.lo)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// 95% percentile interval of `stat` over `reps` resamples of `0..n`.
pub fn bootstrap<S>(n: usize, reps: usize, seed: u64, mut stat: S) -> Option<Bootstrap>
where
    S: FnMut(&[usize]) -> Option<f64>,
{
    let all: Vec<usize> = (0..n).collect();
    let estimate = stat(&all)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vals = Vec::with_capacity(reps);
    let mut idx = alloc::vec![0usize; n];
    let mut failures = 0;
    for _ in 0..reps {
        for slot in idx.iter_mut() {
            *slot = rng.random_range(0..n);
        }
        match stat(&idx) {
            Some(v) if v.is_finite() => vals.push(v),
            _ => failures += 1,
        }
    }
    if vals.is_empty() {
        return None;
    }
    let s = sorted(&vals);
    Some(Bootstrap { estimate, lo: quantile_sorted(&s, 0.025), hi: quantile_sorted(&s, 0.975), failures })
}

/// Empirical survival `P[X ≥ x_i]` at each sorted sample.
pub fn survival(samples: &[f64]) -> Vec<(f64, f64)> {
    let s = sorted(samples);
    let n = s.len() as f64;
    let mut out = Vec::with_capacity(s.len());
    let mut i = 0;
    while i < s.len() {
        let x = s[i];
        out.push((x, (s.len() - i) as f64 / n));
        while i < s.len() && s[i] == x {
            i += 1;
        }
    }
    out
}

/// Fit of `log P[X ≥ λ] = −a λ^b` through `log(−log S) = log a + b log λ`.
#[derive(Clone, Debug, PartialEq)]
pub struct TailFit {
    pub a: f64,
    pub b: f64,
    pub r2: f64,
    pub points: usize,
    /// Bootstrap interval for `b`.
    pub b_ci: Option<Bootstrap>,
    /// Whether the empirical `log S` is concave in `λ` (within `tol`).
    pub concave: bool,
}

/// Fit window: survival levels in `[s_min, s_max]`, `λ > shift`. The fit
/// variable is `λ − shift`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TailWindow {
    pub s_min: f64,
    pub s_max: f64,
    pub shift: f64,
}

fn tail_points(samples: &[f64], w: TailWindow) -> (Vec<f64>, Vec<f64>) {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (x, s) in survival(samples) {
        if s >= w.s_min && s <= w.s_max && s < 1.0 && x > w.shift {
            xs.push(math::ln(x - w.shift));
            ys.push(math::ln(-math::ln(s)));
        }
    }
    (xs, ys)
}

pub fn stretched_exp_fit(samples: &[f64], w: TailWindow, boot_reps: usize, seed: u64) -> Option<TailFit> {
    let (xs, ys) = tail_points(samples, w);
    let f = linear_fit(&xs, &ys)?;
    let b_ci = if boot_reps > 0 {
        let mut buf = Vec::with_capacity(samples.len());
        bootstrap(samples.len(), boot_reps, seed, |idx| {
            buf.clear();
            buf.extend(idx.iter().map(|&i| samples[i]));
            let (x, y) = tail_points(&buf, w);
            linear_fit(&x, &y).map(|f| f.slope)
        })
    } else {
        None
    };
    let curve: Vec<(f64, f64)> = survival(samples)
        .into_iter()
        .filter(|(_, s)| *s >= w.s_min)
        .map(|(x, s)| (x, math::ln(s)))
        .collect();
    Some(TailFit {
        a: math::exp(f.intercept),
        b: f.slope,
        r2: f.r2,
        points: xs.len(),
        b_ci,
        concave: is_concave(&curve, concavity_tol(samples.len(), w.s_min)),
    })
}

/// Slack for concavity tests on an empirical log-survival with `n` samples
/// down to level `s_min`: one standard error of `log S` there.
pub fn concavity_tol(n: usize, s_min: f64) -> f64 {
    math::sqrt((1.0 - s_min) / (s_min * n as f64))
}

/// `true` if no point lies more than `tol` above the chord of any pair of
/// neighbors in the upper-hull sense: the least concave majorant stays
/// within `tol` of the data.
pub fn is_concave(points: &[(f64, f64)], tol: f64) -> bool {
    if points.len() < 3 {
        return true;
    }
    // least concave majorant via an upper hull
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for &p in points {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            if (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0) >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    let mut j = 0;
    for &(x, y) in points {
        while j + 1 < hull.len() && hull[j + 1].0 < x {
            j += 1;
        }
        let maj = if j + 1 < hull.len() {
            let (a, b) = (hull[j], hull[j + 1]);
            if b.0 == a.0 { a.1.max(b.1) } else { a.1 + (b.1 - a.1) * (x - a.0) / (b.0 - a.0) }
        } else {
            hull[j].1
        };
        if maj - y > tol {
            return false;
        }
    }
    true
}
