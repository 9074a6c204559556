use super::*;
use crate::env::{build_environment, BumpProfile, ConstantField, LinearField, ZeroField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1.0 / 16.0;

fn zero2() -> ZeroField {
    ZeroField { dim: 2 }
}

#[test]
fn zero_field_arrival_is_distance() {
    let g = Grid::centered(2, H, 96).unwrap();
    let f = evolve_front(&zero2(), &g, &[Point::ZERO], 5.0).unwrap();
    let mut worst: f64 = 0.0;
    for c in 0..g.len() {
        let r = g.center(c).norm();
        if r <= 4.9 {
            worst = worst.max((f.arrival[c] - r).abs());
        }
    }
    assert!(worst <= 2.0 * H, "{worst}");
    assert!(f.truncated_at.is_none());
    assert_eq!(first_passage(&f, Point::ZERO), 0.0);
}

#[test]
fn constant_drift_arrival() {
    let g = Grid::centered(2, H, 200).unwrap();
    let v = ConstantField { dim: 2, c: Point::new2(0.5, 0.0) };
    let f = evolve_front(&v, &g, &[Point::ZERO], 10.0).unwrap();
    for r in [2.0, 4.0, 8.0] {
        let ahead = first_passage(&f, Point::new2(r, 0.0));
        let behind = first_passage(&f, Point::new2(-r, 0.0));
        assert!((ahead - r / 1.5).abs() <= 3.0 * H, "{ahead}");
        if r / 0.5 <= 10.0 {
            assert!((behind - r / 0.5).abs() <= 3.0 * H, "{behind}");
        }
    }
}

#[test]
fn backward_constant_drift_mirrors_forward() {
    let g = Grid::centered(2, H, 48).unwrap();
    let v = ConstantField { dim: 2, c: Point::new2(0.3, -0.2) };
    let w = ConstantField { dim: 2, c: Point::new2(-0.3, 0.2) };
    let b = evolve_front_backward(&v, &g, &[Point::ZERO], 2.0).unwrap();
    let f = evolve_front(&w, &g, &[Point::ZERO], 2.0).unwrap();
    assert_eq!(b.arrival, f.arrival);
    let z = evolve_front_backward(&zero2(), &g, &[Point::ZERO], 2.0).unwrap();
    let zf = evolve_front(&zero2(), &g, &[Point::ZERO], 2.0).unwrap();
    assert_eq!(z.arrival, zf.arrival);
}

#[test]
fn forward_backward_duality() {
    let env = build_environment(5, 2, 2.0, 0.0, BumpProfile::default()).unwrap();
    let g = Grid::centered(2, H, 64).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..10 {
        let x = Point::new2(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let fx = evolve_front(&env, &g, &[x], 2.0).unwrap();
        for _ in 0..5 {
            let y = Point::new2(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5));
            let t = first_passage(&fx, y);
            if !t.is_finite() {
                continue;
            }
            let by = evolve_front_backward(&env, &g, &[g.center(g.locate(y).unwrap())], 2.0).unwrap();
            // the graph is exactly reversed, so both directions agree on cell pairs
            let back = first_passage(&by, g.center(g.locate(x).unwrap()));
            assert!((back - t).abs() < 1e-9, "{back} {t}");
        }
    }
}

#[test]
fn shoot_path_straight_line_and_reverse() {
    let c = PiecewiseControl::constant(Point::axis(0), 1.0).unwrap();
    let p = shoot_path(&zero2(), Point::ZERO, &c, 1.0, 0.01).unwrap();
    assert!(p.last().unwrap().dist(Point::axis(0)) < 1e-9);
    let q = shoot_path(&zero2(), Point::ZERO, &c, -1.0, 0.01).unwrap();
    assert!(q.last().unwrap().dist(-Point::axis(0)) < 1e-9);
    assert!(PiecewiseControl::constant(Point::new2(1.0, 0.1), 1.0).is_err());
}

fn mat_exp(a: &crate::math::Mat3, t: f64) -> crate::math::Mat3 {
    // scaling and squaring with a long Taylor series
    let s = 10;
    let sc = t / (1u32 << s) as f64;
    let mut term = [[0.0; 3]; 3];
    let mut sum = [[0.0; 3]; 3];
    for i in 0..3 {
        term[i][i] = 1.0;
        sum[i][i] = 1.0;
    }
    for k in 1..30 {
        let mut nt = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for l in 0..3 {
                    nt[i][j] += term[i][l] * a[l][j] * sc / k as f64;
                }
            }
        }
        term = nt;
        for i in 0..3 {
            for j in 0..3 {
                sum[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..s {
        let mut sq = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for l in 0..3 {
                    sq[i][j] += sum[i][l] * sum[l][j];
                }
            }
        }
        sum = sq;
    }
    sum
}

#[test]
fn shoot_path_linear_field_matches_matrix_exponential() {
    let a = [[0.1, -0.7, 0.0], [0.5, -0.2, 0.0], [0.0, 0.0, 0.0]];
    let field = LinearField { dim: 2, a };
    let x0 = Point::new2(0.3, -1.1);
    let c = PiecewiseControl::constant(Point::ZERO, 3.0).unwrap();
    let p = shoot_path(&field, x0, &c, 3.0, 0.01).unwrap();
    let want = crate::math::mat_vec(&mat_exp(&a, 3.0), x0);
    assert!(p.last().unwrap().dist(want) < 1e-6);
}

#[test]
fn guaranteed_front_contains_plain_front() {
    let g = Grid::centered(2, H, 64).unwrap();
    let env = build_environment(2, 2, 2.0, 0.0, BumpProfile::default()).unwrap();
    let plain = evolve_front(&env, &g, &[Point::ZERO], 2.0).unwrap();
    let gf = guaranteed_evolve(&env, &g, Point::ZERO, 2.0, 0.5).unwrap();
    for c in 0..g.len() {
        assert!(gf.front.arrival[c] <= plain.arrival[c]);
    }
    let same = guaranteed_evolve(&env, &g, Point::ZERO, 1.0, 1.5).unwrap();
    let p1 = evolve_front(&env, &g, &[Point::ZERO], 1.0).unwrap();
    assert_eq!(same.front.arrival, p1.arrival);
}

#[test]
fn guaranteed_zero_field_radius() {
    // V ≡ 0: ℛ_t^ρ is the ball of radius (t − kρ) + k with k = ⌊t/ρ⌋
    let g = Grid::centered(2, H, 112).unwrap();
    let rho = 0.25;
    let gf = guaranteed_evolve(&zero2(), &g, Point::ZERO, 1.6, rho).unwrap();
    for t in [0.3, 0.75, 1.0, 1.4] {
        let k = (t / rho as f64).floor();
        let want = t + k * (1.0 - rho);
        let m = gf.front.mask_at(t);
        let mut rin = f64::INFINITY;
        let mut rout: f64 = 0.0;
        for c in 0..g.len() {
            let r = g.center(c).norm();
            if m.bits[c] {
                rout = rout.max(r);
            } else {
                rin = rin.min(r);
            }
        }
        assert!(rin >= want - 2.0 * H - rho / 8.0 && rout <= want + 2.0 * H, "t {t}: {rin} {rout} {want}");
    }
}

#[test]
fn volume_and_boundary_of_unit_disk() {
    let g = Grid::centered(2, H, 40).unwrap();
    let f = evolve_front(&zero2(), &g, &[Point::ZERO], 1.2).unwrap();
    let v = reachable_volume(&f, 1.0);
    assert!((v - core::f64::consts::PI).abs() <= 8.0 * H, "{v}");
    assert!(reachable_volume(&f, 0.5) <= v);
    let b = boundary_growth_profile(&f, &zero2(), 1.0);
    let tau = 2.0 * core::f64::consts::PI;
    assert!((b.total - tau).abs() <= 0.15 * tau, "{}", b.total);
    assert_eq!(b.total, b.drift_not_inward);
}

#[test]
fn waiting_time_simple_fields() {
    let g = Grid::centered(2, H, 40).unwrap();
    let w = waiting_time(&zero2(), &g, Point::ZERO, 5.0).unwrap();
    assert!((w - 0.5).abs() <= 2.0 * H, "{w}");
    let c = ConstantField { dim: 2, c: Point::new2(0.5, 0.0) };
    let w = waiting_time(&c, &g, Point::ZERO, 5.0).unwrap();
    assert!((w - 1.0).abs() <= 3.0 * H, "{w}");
    let small = Grid::centered(2, H, 9).unwrap();
    assert!(matches!(waiting_time(&c, &small, Point::ZERO, 5.0), Err(FrontError::Truncated { .. })));
}

#[test]
fn truncation_is_reported() {
    let g = Grid::centered(2, H, 16).unwrap();
    let f = evolve_front(&zero2(), &g, &[Point::ZERO], 3.0).unwrap();
    let at = f.truncated_at.unwrap();
    assert!((at - 1.0).abs() < 2.0 * H);
    assert!(f.check_valid_until(0.5).is_ok());
    assert!(f.check_valid_until(2.0).is_err());
}

#[test]
fn cone_check_zero_field() {
    let r = cone_check(&zero2(), Point::ZERO, H).unwrap();
    assert!(r.holds);
}

#[test]
fn errors_on_bad_input() {
    let g = Grid::centered(2, H, 8).unwrap();
    assert_eq!(evolve_front(&zero2(), &g, &[], 1.0), Err(FrontError::EmptySeed));
    assert_eq!(evolve_front(&zero2(), &g, &[Point::new2(9.0, 0.0)], 1.0), Err(FrontError::SeedOutOfBounds));
    let z3 = ZeroField { dim: 3 };
    assert!(matches!(evolve_front(&z3, &g, &[Point::ZERO], 1.0), Err(FrontError::DimensionMismatch { .. })));
}
