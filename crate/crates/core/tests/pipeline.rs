//! Cross-module properties through the public API.

use gfront_core::frontprop::{evolve_front, first_passage};
use gfront_core::percolation::{clusters, good_site_field, site_box, GoodSiteOptions};
use gfront_core::{build_environment, BumpProfile, Grid, Point, VectorField, ZeroField};
use proptest::prelude::*;

fn cell_point(grid: &Grid, i: i64, j: i64) -> Point {
    Point::new2(i as f64 * grid.h(), j as f64 * grid.h())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn multi_seed_front_is_pointwise_min(seed in 0u64..1000, a in (-12i64..12, -12i64..12), b in (-12i64..12, -12i64..12)) {
        let env = build_environment(seed, 2, 1.5, 0.0, BumpProfile::default()).unwrap();
        let grid = Grid::centered(2, 0.25, 20).unwrap();
        let (pa, pb) = (cell_point(&grid, a.0, a.1), cell_point(&grid, b.0, b.1));
        let both = evolve_front(&env, &grid, &[pa, pb], 6.0).unwrap();
        let fa = evolve_front(&env, &grid, &[pa], 6.0).unwrap();
        let fb = evolve_front(&env, &grid, &[pb], 6.0).unwrap();
        for c in 0..grid.len() {
            let m = fa.arrival[c].min(fb.arrival[c]);
            prop_assert!(both.arrival[c] == m || (both.arrival[c] - m).abs() < 1e-12);
        }
    }

    #[test]
    fn passage_times_satisfy_triangle_inequality(seed in 0u64..1000, y in (-8i64..8, -8i64..8), z in (-8i64..8, -8i64..8)) {
        let env = build_environment(seed, 2, 1.5, 0.0, BumpProfile::default()).unwrap();
        let grid = Grid::centered(2, 0.25, 24).unwrap();
        let (py, pz) = (cell_point(&grid, y.0, y.1), cell_point(&grid, z.0, z.1));
        let from_x = evolve_front(&env, &grid, &[Point::ZERO], 20.0).unwrap();
        let from_y = evolve_front(&env, &grid, &[py], 20.0).unwrap();
        let xz = first_passage(&from_x, pz);
        let xy = first_passage(&from_x, py);
        let yz = first_passage(&from_y, pz);
        if xy.is_finite() && yz.is_finite() {
            prop_assert!(xz <= xy + yz + 1e-9, "{xz} > {xy} + {yz}");
        }
    }

    #[test]
    fn zero_divergence_at_zero_knob(seed in 0u64..1000, x in -20.0f64..20.0, y in -20.0f64..20.0) {
        let env = build_environment(seed, 2, 2.0, 0.0, BumpProfile::default()).unwrap();
        prop_assert!(env.divergence(Point::new2(x, y)).abs() < 1e-9);
    }
}

#[test]
fn good_sites_of_free_motion_follow_the_threshold() {
    // probe points are at most 2√2 apart, so τ = 3 makes every site good
    let zero = ZeroField { dim: 2 };
    let domain = site_box(2, -3, 3);
    let opts = GoodSiteOptions::for_dim(2);
    let all = good_site_field(&zero, 0, domain.clone(), 3.0, opts.clone()).unwrap();
    assert_eq!(all.open_fraction(), 1.0);
    assert_eq!(clusters(&all).len(), 1);
    let none = good_site_field(&zero, 0, domain, 1.0, opts).unwrap();
    assert_eq!(none.open_fraction(), 0.0);
}
