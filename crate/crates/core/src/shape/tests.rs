use super::*;
use crate::env::{build_environment, BumpProfile, ConstantField, ZeroField};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Root of `|e − θ c| = θ` by bisection on `θ ∈ (0, 100]`.
fn constant_drift_theta(e: Point, c: Point) -> f64 {
    let g = |t: f64| (e - c * t).norm() - t;
    let (mut lo, mut hi) = (1e-9, 100.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn zero_field_theta_bar_is_one() {
    let h = 1.0 / 8.0;
    let radii = [2.0, 4.0, 8.0];
    let seeds: Vec<u64> = (0..8).collect();
    for e in sample_directions(2, 12) {
        let est = estimate_theta_bar(|_| ZeroField { dim: 2 }, &seeds, e, &radii, h, BiasModel::SqrtLog).unwrap();
        assert!((est.theta_bar - 1.0).abs() <= 2.0 * h / 2.0, "{e:?} {}", est.theta_bar);
        assert_eq!(est.halfwidth, 0.0);
    }
}

#[test]
fn constant_drift_theta_bar_matches_root() {
    let h = 1.0 / 8.0;
    let c = Point::new2(0.3, -0.2);
    let radii = [2.0, 4.0, 6.0];
    let seeds: Vec<u64> = (0..8).collect();
    for e in sample_directions(2, 8) {
        let est = estimate_theta_bar(|_| ConstantField { dim: 2, c }, &seeds, e, &radii, h, BiasModel::InverseR).unwrap();
        let want = constant_drift_theta(e, c);
        assert!((est.theta_bar - want).abs() <= 3.0 * h / radii[0], "{e:?}: {} vs {}", est.theta_bar, want);
    }
}

#[test]
fn theta_bar_split_samples_agree() {
    let make = |s: u64| build_environment(s, 2, 2.0, 0.0, BumpProfile::default()).unwrap();
    let e = Point::new2(1.0, 0.0);
    let radii = [2.0, 4.0, 6.0];
    let a: Vec<u64> = (0..12).collect();
    let b: Vec<u64> = (100..112).collect();
    for model in [BiasModel::SqrtLog, BiasModel::InverseR] {
        let ea = estimate_theta_bar(make, &a, e, &radii, 0.25, model).unwrap();
        let eb = estimate_theta_bar(make, &b, e, &radii, 0.25, model).unwrap();
        assert!(ea.halfwidth > 0.0);
        assert!((ea.theta_bar - eb.theta_bar).abs() <= ea.halfwidth + eb.halfwidth, "{ea:?} {eb:?}");
    }
}

#[test]
fn fit_preconditions() {
    let s = vec![vec![1.0, 2.0]; 8];
    assert!(matches!(fit_theta_bar(Point::axis(0), &[1.0], &s, BiasModel::SqrtLog, 0, 0), Err(ShapeError::TooFewRadii { .. })));
    assert!(matches!(fit_theta_bar(Point::axis(0), &[1.0, 2.0], &s[..3], BiasModel::SqrtLog, 0, 0), Err(ShapeError::TooFewSeeds { .. })));
    let e = fit_theta_bar(Point::axis(0), &[2.0, 4.0], &vec![vec![3.0, 5.0]; 8], BiasModel::InverseR, 50, 0).unwrap();
    // means 1.5 and 1.25 on 1/R = 0.5, 0.25: intercept 1
    assert!((e.theta_bar - 1.0).abs() < 1e-12 && (e.bias_amplitude - 1.0).abs() < 1e-12);
}

fn circle_shape(n: usize, c: Point) -> EffectiveShape {
    let dirs = sample_directions(2, n);
    let tb: Vec<f64> = dirs.iter().map(|e| constant_drift_theta(*e, c)).collect();
    build_shape(&dirs, &tb, &vec![0.0; n]).unwrap()
}

#[test]
fn shape_of_translated_ball() {
    let ball = circle_shape(64, Point::ZERO);
    let ang_err = 1.0 - (core::f64::consts::PI / 64.0).cos();
    let c = Point::new2(0.4, 0.1);
    let moved = circle_shape(64, c);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..200 {
        let p = Point::new2(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        assert!((ball.effective_h(p) - p.norm()).abs() <= ang_err * p.norm() + 1e-12);
        // boundary points on the moved circle are spaced by at most this arc
        let arc = (1.0 + c.norm()) / (1.0 - c.norm()) * core::f64::consts::PI / 64.0;
        assert!((moved.effective_h(p) - p.norm() - p.dot(c)).abs() <= (1.0 - arc.cos()) * p.norm() + 1e-12);
        assert_eq!(ball.effective_h(p * 2.0), 2.0 * ball.effective_h(p));
        assert!(ball.effective_h(p) + ball.effective_h(-p) >= 0.0);
    }
    assert!((ball.theta_raw(Point::new2(0.0, 2.0)) - 2.0).abs() < 1e-12);
    assert!(ball.contains(Point::new2(0.5, 0.5)) && !ball.contains(Point::new2(0.8, 0.8)));
}

#[test]
fn unit_ball_support_is_exact_on_stored_direction() {
    let mut dirs = sample_directions(2, 20);
    dirs.push(Point::new2(0.6, 0.8));
    let n = dirs.len();
    let shape = build_shape(&dirs, &vec![1.0; n], &vec![0.0; n]).unwrap();
    assert!((shape.effective_h(Point::new2(3.0, 4.0)) - 5.0).abs() < 1e-12);
}

#[test]
fn build_shape_rejects_bad_input() {
    let dirs = sample_directions(2, 16);
    let mut tb = vec![1.0; 16];
    tb[3] = 0.0;
    assert!(matches!(build_shape(&dirs, &tb, &[0.0; 16]), Err(ShapeError::NonPositiveTheta { index: _, value: _ })));
    assert!(matches!(build_shape(&dirs[..8], &[1.0; 8], &[0.0; 8]), Err(ShapeError::TooFewDirections { .. })));
}

fn random_shape(rng: &mut ChaCha8Rng) -> EffectiveShape {
    let dirs = sample_directions(2, 32);
    let tb: Vec<f64> = (0..32).map(|_| rng.random_range(0.5..2.0)).collect();
    build_shape(&dirs, &tb, &vec![0.0; 32]).unwrap()
}

#[test]
fn support_matches_dense_resampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..10 {
        let s = random_shape(&mut rng);
        let n = s.boundary.len();
        let dense: Vec<Point> = (0..n)
            .flat_map(|i| {
                let (a, b) = (s.boundary[i], s.boundary[(i + 1) % n]);
                (0..50).map(move |k| a + (b - a) * (k as f64 / 50.0))
            })
            .collect();
        for _ in 0..50 {
            let p = Point::new2(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let oracle = dense.iter().map(|v| p.dot(*v)).fold(f64::NEG_INFINITY, f64::max);
            assert!((s.effective_h(p) - oracle).abs() < 1e-12);
        }
        // the convex gauge is at most the raw one and equals 1 on hull vertices
        for v in &s.hull {
            assert!((s.theta_convex(*v) - 1.0).abs() < 1e-9);
        }
        for v in &s.boundary {
            assert!(s.theta_convex(*v) <= s.theta_raw(*v) + 1e-9);
            assert!((s.theta_raw(*v) - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn support_convexity_sweep() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let s = random_shape(&mut rng);
    for _ in 0..10_000 {
        let p = Point::new2(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
        let q = Point::new2(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
        assert!(s.effective_h((p + q) * 0.5) <= 0.5 * (s.effective_h(p) + s.effective_h(q)) + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prop_support_homogeneous(seed in any::<u64>(), px in -4.0f64..4.0, py in -4.0f64..4.0, lambda in 0.01f64..50.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_shape(&mut rng);
        let p = Point::new2(px, py);
        let a = s.effective_h(p * lambda);
        let b = lambda * s.effective_h(p);
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
    }

    #[test]
    fn prop_shape_monotone(seed in any::<u64>(), px in -4.0f64..4.0, py in -4.0f64..4.0, grow in 1.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_shape(&mut rng);
        let bigger_theta: Vec<f64> = s.theta_bar.iter().map(|t| t * grow).collect();
        let t = build_shape(&s.directions, &bigger_theta, &s.halfwidth).unwrap();
        let p = Point::new2(px, py);
        prop_assert!(t.effective_h(p) <= s.effective_h(p) + 1e-12 || s.effective_h(p) < 0.0);
        let x = Point::new2(px, py) * 0.2;
        prop_assert!(!t.contains(x) || s.contains(x));
    }

    #[test]
    fn prop_partition_postconditions(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let path = random_path(&mut rng, 3);
        let part = hobby_rice_partition(&path, 2, 1e-9).unwrap();
        prop_assert!(part.residual <= 1e-9);
        let s: f64 = part.sphere_point.iter().map(|v| v * v).sum();
        prop_assert!((s - 1.0).abs() <= 1e-12);
        prop_assert!(part.breakpoints.windows(2).all(|w| w[1] >= w[0]));
        let recomputed = (part.signed_sum(&path, 1) - part.signed_sum(&path, -1)).norm();
        prop_assert!(recomputed <= 1e-9 + 1e-12);
    }
}

#[test]
fn subadditivity_zero_field_collinear() {
    let h = 1.0 / 8.0;
    let pairs = [
        (Point::new2(2.0, 0.0), Point::new2(3.0, 0.0)),
        (Point::new2(1.5, 1.5), Point::new2(2.0, 2.0)),
        (Point::new2(0.0, -4.0), Point::new2(0.0, -2.0)),
    ];
    let d = subadditivity_defect(|_| ZeroField { dim: 2 }, &[0], &pairs, h).unwrap();
    for p in &d {
        assert!(p.defect.abs() <= 4.0 * h, "{p:?}");
    }
}

#[test]
fn subadditivity_defect_random_bounded() {
    let make = |s: u64| build_environment(s, 2, 2.0, 0.0, BumpProfile::default()).unwrap();
    let seeds: Vec<u64> = (0..8).collect();
    let pairs = [(Point::new2(4.0, 0.0), Point::new2(4.0, 0.0)), (Point::new2(8.0, 0.0), Point::new2(8.0, 0.0))];
    let d = subadditivity_defect(make, &seeds, &pairs, 0.25).unwrap();
    for p in &d {
        assert!(p.f_xy <= p.f_x + p.f_y + 3.0, "{p:?}");
        assert!(p.reverse() == -p.defect);
    }
}

fn random_path(rng: &mut ChaCha8Rng, segments: usize) -> PolylinePath {
    let mut pts = vec![Point::ZERO];
    for _ in 0..segments {
        let last = *pts.last().unwrap();
        pts.push(last + Point::new2(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    }
    let mut knots: Vec<f64> = (0..segments - 1).map(|_| rng.random_range(0.05..0.95)).collect();
    knots.sort_by(f64::total_cmp);
    knots.insert(0, 0.0);
    knots.push(1.0);
    PolylinePath::new(knots, pts).unwrap()
}

/// Minimum residual over 2³ sign patterns and a 200² breakpoint grid.
fn brute_force_partition(path: &PolylinePath) -> f64 {
    let grid: Vec<f64> = (0..200).map(|i| i as f64 / 199.0).collect();
    let mut best = f64::INFINITY;
    for signs in 0..8u32 {
        let s = |k: u32| if signs >> k & 1 == 1 { -1.0 } else { 1.0 };
        for &t1 in &grid {
            for &t2 in &grid {
                if t2 < t1 {
                    continue;
                }
                let (a, b, c, d) = (path.eval(0.0), path.eval(t1), path.eval(t2), path.eval(1.0));
                let r = ((b - a) * s(0) + (c - b) * s(1) + (d - c) * s(2)).norm();
                best = best.min(r);
            }
        }
    }
    best
}

#[test]
fn partition_beats_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..10 {
        let path = random_path(&mut rng, 3);
        let part = hobby_rice_partition(&path, 2, 1e-6).unwrap();
        let oracle = brute_force_partition(&path);
        assert!(part.residual <= 1e-6);
        assert!(part.residual <= oracle + 1e-3);
    }
}

#[test]
fn partition_examples() {
    let w = Point::new2(0.6, -0.8);
    let line = PolylinePath::uniform(vec![Point::ZERO, w]).unwrap();
    let p = hobby_rice_partition(&line, 2, 1e-8).unwrap();
    let x = &p.sphere_point;
    let signed: f64 = x.iter().map(|v| v * v * sign(*v)).sum();
    assert!(signed.abs() <= 1e-8);
    let half = p.signed_sum(&line, 1);
    assert!((half - w * 0.5).norm() <= 1e-8);

    let lp = PolylinePath::uniform(vec![Point::ZERO, Point::new2(1.0, 0.0), Point::new2(1.0, 1.0), Point::ZERO]).unwrap();
    let p = hobby_rice_partition(&lp, 2, 1e-8).unwrap();
    assert!(p.residual <= 1e-8);
    assert_eq!(p.breakpoints.len(), 4);
    assert_eq!(*p.breakpoints.last().unwrap(), 1.0);

    assert!(PolylinePath::new(vec![0.0, 0.5], vec![Point::ZERO, Point::ZERO]).is_err());
    assert!(hobby_rice_partition(&line, 2, 0.0).is_err());
}

#[test]
fn halving_zero_field() {
    let h = 1.0 / 16.0;
    let g = Grid::centered(2, h, 80).unwrap();
    let y = Point::new2(3.0, 1.0);
    let r = halving_check(&ZeroField { dim: 2 }, &g, y, 1e-9).unwrap();
    assert!((r.plus_time - y.norm() / 2.0).abs() <= 4.0 * h);
    assert!((r.minus_time - y.norm() / 2.0).abs() <= 4.0 * h);
    let r0 = halving_check(&ZeroField { dim: 2 }, &g, Point::ZERO, 1e-9).unwrap();
    assert_eq!((r0.theta_y, r0.slack()), (0.0, 0.0));
    assert!(r0.partition.is_none());
}

#[test]
fn halving_random_envs() {
    let g = Grid::centered(2, 1.0 / 8.0, 96).unwrap();
    let y = Point::new2(6.0, 0.0);
    for seed in 0..5 {
        let env = build_environment(seed, 2, 2.0, 0.0, BumpProfile::default()).unwrap();
        let r = halving_check(&env, &g, y, 1e-9).unwrap();
        assert!((r.plus_time + r.minus_time - r.theta_y).abs() <= 1e-9);
        let yc = g.center(g.locate(y).unwrap());
        assert!((r.plus_displacement - yc * 0.5).norm() <= 1e-8);
        assert!((r.minus_displacement - yc * 0.5).norm() <= 1e-8);
        assert!(r.slack().is_finite());
    }
}
