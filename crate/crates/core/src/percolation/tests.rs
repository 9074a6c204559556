use super::*;
use crate::env::{build_environment, BumpProfile, ZeroField};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

fn random_field(rng: &mut ChaCha8Rng, lo: i64, hi: i64, p: f64) -> PercolationField {
    let g = site_box(2, lo, hi);
    let bits = (0..g.len()).map(|_| rng.random::<f64>() < p).collect();
    PercolationField::from_bits(g, bits)
}

fn linf(a: Site, b: Site) -> i64 {
    (0..3).map(|k| (a[k] - b[k]).abs()).max().unwrap()
}

/// Labels by repeated min-propagation until nothing changes.
fn oracle_labels(sites: &[Site], color: &[bool]) -> Vec<usize> {
    let mut lab: Vec<usize> = (0..sites.len()).collect();
    loop {
        let mut changed = false;
        for i in 0..sites.len() {
            for j in 0..sites.len() {
                if i != j && color[i] == color[j] && linf(sites[i], sites[j]) == 1 && lab[j] < lab[i] {
                    lab[i] = lab[j];
                    changed = true;
                }
            }
        }
        if !changed {
            return lab;
        }
    }
}

fn field_sites(f: &PercolationField) -> Vec<Site> {
    (0..f.len()).map(|i| f.site(i)).collect()
}

#[test]
fn clusters_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trial in 0..1100 {
        let (lo, hi) = if trial < 1000 { (0, 3) } else { (0, 4) };
        let f = random_field(&mut rng, lo, hi, 0.5);
        let sites = field_sites(&f);
        let lab = oracle_labels(&sites, &f.open);
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, l) in lab.iter().enumerate() {
            groups.entry(*l).or_default().push(i);
        }
        let expect: Vec<Vec<usize>> = groups.into_values().collect();
        let got: Vec<Vec<usize>> = clusters(&f).into_iter().map(|c| c.sites).collect();
        assert_eq!(got, expect);
    }
}

#[test]
fn cluster_examples() {
    let g = site_box(2, 0, 5);
    let f = PercolationField::from_bits(g.clone(), vec![true; g.len()]);
    assert_eq!(clusters(&f).len(), 1);
    let cb: Vec<bool> = (0..g.len()).map(|i| {
        let s = g.coords(i);
        (s[0] + s[1]) % 2 == 0
    }).collect();
    let f = PercolationField::from_bits(g, cb);
    let cl = clusters(&f);
    assert_eq!(cl.len(), 2);
    assert!(cl[0].open && !cl[1].open);
}

#[test]
fn hull_matches_cluster_union() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for trial in 0..1100 {
        let hi = if trial < 1000 { 3 } else { 4 };
        let f = random_field(&mut rng, 0, hi, 0.6);
        let sites = field_sites(&f);
        let lab = oracle_labels(&sites, &f.open);
        let s: Vec<usize> = (0..f.len()).filter(|_| rng.random::<f64>() < 0.2).collect();
        // closed clusters touching S or a neighbor of S
        let mut roots = BTreeSet::new();
        for &v in &s {
            for j in 0..f.len() {
                if !f.open[j] && linf(sites[v], sites[j]) <= 1 {
                    roots.insert(lab[j]);
                }
            }
        }
        let expect: Vec<usize> = (0..f.len()).filter(|&j| !f.open[j] && roots.contains(&lab[j])).collect();
        assert_eq!(closed_hull(&f, &s), expect);
    }
}

#[test]
fn hull_examples() {
    let g = site_box(2, 0, 4);
    let open = PercolationField::from_bits(g.clone(), vec![true; g.len()]);
    assert!(closed_hull(&open, &[3, 7]).is_empty());
    let closed = PercolationField::from_bits(g.clone(), vec![false; g.len()]);
    assert_eq!(closed_hull(&closed, &[3]).len(), g.len());
}

fn oracle_boundaries(e: &[Site]) -> (Vec<Site>, Vec<Site>) {
    let set: BTreeSet<Site> = e.iter().copied().collect();
    let lo = e.iter().map(|s| s[0].min(s[1])).min().unwrap() - 2;
    let hi = e.iter().map(|s| s[0].max(s[1])).max().unwrap() + 2;
    let all: Vec<Site> = (lo..=hi).flat_map(|i| (lo..=hi).map(move |j| [i, j, 0])).collect();
    let dist = |x: Site, inside: bool| -> i64 {
        all.iter().filter(|q| set.contains(*q) != inside).map(|q| linf(x, *q)).min().unwrap()
    };
    let inner = all.iter().copied().filter(|x| set.contains(x) && dist(*x, true) == 1).collect();
    let outer = all.iter().copied().filter(|x| !set.contains(x) && dist(*x, false) == 1).collect();
    (inner, outer)
}

#[test]
fn boundaries_match_distance_definition() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..1000 {
        let e: Vec<Site> = (0..6)
            .flat_map(|i| (0..6).map(move |j| [i, j, 0]))
            .filter(|_| rng.random::<f64>() < 0.4)
            .collect();
        if e.is_empty() {
            continue;
        }
        let (inner, outer) = boundaries(2, &e);
        assert_eq!((inner.clone(), outer.clone()), oracle_boundaries(&e));
        assert!(outer.len() <= 9 * inner.len());
    }
    let (i, o) = boundaries(2, &[[0, 0, 0]]);
    assert_eq!(i.len(), 1);
    assert_eq!(o.len(), 8);
    let (i, o) = boundaries(3, &[[0, 0, 0]]);
    assert_eq!((i.len(), o.len()), (1, 26));
    let full: Vec<Site> = (0..5).flat_map(|i| (0..5).map(move |j| [i, j, 0])).collect();
    let (i, o) = boundaries(2, &full);
    assert_eq!(i.len(), 16);
    assert_eq!(o.len(), 7 * 7 - 25);
}

fn random_connected(rng: &mut ChaCha8Rng, cube: &Grid) -> Vec<usize> {
    let offs = linf_offsets(2);
    let n = rng.random_range(1..40);
    let start = rng.random_range(0..cube.len());
    let mut set = vec![start];
    let mut member = vec![false; cube.len()];
    member[start] = true;
    while set.len() < n {
        let c = cube.coords(set[rng.random_range(0..set.len())]);
        let o = offs[rng.random_range(0..offs.len())];
        if let Some(j) = cube.index([c[0] + o[0], c[1] + o[1], 0]) {
            if !member[j] {
                member[j] = true;
                set.push(j);
            }
        }
    }
    set
}

#[test]
fn unicoherence_on_random_sets() {
    let cube = site_box(2, 0, 7);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..10_000 {
        let c = random_connected(&mut rng, &cube);
        assert!(is_connected(&cube, &c));
        assert!(check_unicoherence(&cube, &c), "{:?}", c);
    }
    let five = site_box(2, 0, 4);
    assert!(check_unicoherence(&five, &[five.index([2, 2, 0]).unwrap()]));
    let plus: Vec<usize> = (0..5)
        .flat_map(|k| [[k, 2, 0], [2, k, 0]])
        .map(|s| five.index(s).unwrap())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    assert!(check_unicoherence(&five, &plus));
    let five3 = site_box(3, 0, 4);
    assert!(check_unicoherence(&five3, &[five3.index([2, 2, 2]).unwrap()]));
}

#[test]
fn solidification_membership() {
    let s = solidify(2, &[[0, 0, 0]]);
    assert!(s.contains(Point::new2(0.4, -0.5)));
    assert!(!s.contains(Point::new2(0.4, -0.51)));
    assert!(!solidify(2, &[]).contains(Point::ZERO));
    let e = [[0, 0, 0], [1, 0, 0], [5, 5, 0]];
    assert_eq!(solidify(2, &e).volume(), 3.0);
    assert_eq!(cubes_containing(2, Point::new2(0.5, 0.5)).len(), 4);
    assert_eq!(cubes_containing(2, Point::new2(0.2, 0.5)).len(), 2);
}

#[test]
fn synthetic_field_statistics() {
    let g = site_box(2, -50, 49);
    assert!(synthetic_field(1, g.clone(), 1.0).unwrap().open.iter().all(|o| *o));
    assert!(synthetic_field(1, g.clone(), 0.0).unwrap().open.iter().all(|o| !*o));
    let p = 0.7;
    let f = synthetic_field(3, g.clone(), p).unwrap();
    let n = f.len() as f64;
    assert!((f.open_fraction() - p).abs() <= 3.0 * (p * (1.0 - p) / n).sqrt());
    assert_eq!(f, synthetic_field(3, g.clone(), p).unwrap());
    assert!(synthetic_field(3, g, 1.5).is_err());
}

#[test]
fn big_cluster_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..300 {
        let f = random_field(&mut rng, -2, 2, 0.6);
        let (r, n) = if trial % 2 == 0 { (1, 1) } else { (0, 2) };
        let rep = big_open_cluster(&f, r, n).unwrap();
        let sites = field_sites(&f);
        let lab = oracle_labels(&sites, &f.open);
        let mut sizes: BTreeMap<usize, usize> = BTreeMap::new();
        for i in 0..f.len() {
            if f.open[i] {
                *sizes.entry(lab[i]).or_default() += 1;
            }
        }
        let Some(best) = sizes.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))) else {
            assert!(rep.cluster.is_none() && !rep.holds());
            continue;
        };
        let cl: Vec<usize> = (0..f.len()).filter(|&i| f.open[i] && lab[i] == *best.0).collect();
        assert_eq!(rep.cluster.as_ref().unwrap(), &cl);
        let not_c: Vec<bool> = (0..f.len()).map(|i| !cl.contains(&i)).collect();
        let l2 = oracle_labels(&sites, &not_c);
        let mut bad: BTreeMap<usize, (usize, bool)> = BTreeMap::new();
        for i in 0..f.len() {
            if not_c[i] {
                let ent = bad.entry(l2[i]).or_default();
                ent.0 += 1;
                ent.1 |= sites[i][0].abs() <= r && sites[i][1].abs() <= r;
            }
        }
        let max_bad = bad.values().filter(|b| b.1).map(|b| b.0).max().unwrap_or(0);
        assert_eq!(rep.max_bad, max_bad);
    }
    let g = site_box(2, -3, 3);
    let all = PercolationField::from_bits(g.clone(), vec![true; g.len()]);
    let rep = big_open_cluster(&all, 2, 1).unwrap();
    assert_eq!((rep.cluster.unwrap().len(), rep.max_bad), (g.len(), 0));
    let none = PercolationField::from_bits(g.clone(), vec![false; g.len()]);
    assert!(big_open_cluster(&none, 2, 1).unwrap().cluster.is_none());
    assert_eq!(big_open_cluster(&none, 3, 1), Err(PercolationError::CubeOutsideDomain));
}

#[test]
fn good_sites_zero_field() {
    let g = site_box(2, 0, 2);
    let z = ZeroField { dim: 2 };
    let opts = GoodSiteOptions::for_dim(2);
    let f = good_site_field(&z, 0, g.clone(), 3.0, opts).unwrap();
    assert!(f.open.iter().all(|o| *o));
    let f = good_site_field(&z, 0, g.clone(), 0.0, opts).unwrap();
    assert!(f.open.iter().all(|o| !*o));
    assert!(good_site_field(&z, 0, g, -1.0, opts).is_err());
}

#[test]
fn good_sites_monotone_in_tau() {
    let g = site_box(2, 0, 2);
    let opts = GoodSiteOptions { h: 0.25, ..GoodSiteOptions::for_dim(2) };
    for seed in 0..6u64 {
        let env = build_environment(seed, 2, 2.0, 0.0, BumpProfile::default()).unwrap();
        let mut prev: Option<Vec<bool>> = None;
        for tau in [0.5, 1.5, 3.0, 6.0] {
            let f = good_site_field(&env, seed, g.clone(), tau, opts).unwrap();
            if let Some(p) = &prev {
                assert!(p.iter().zip(&f.open).all(|(a, b)| !*a || *b));
            }
            prev = Some(f.open);
        }
    }
}

fn open_field(lo: [i64; 2], hi: [i64; 2], closed: &[[i64; 2]]) -> PercolationField {
    let g = Grid::new(2, 1.0, [lo[0], lo[1], 0], [(hi[0] - lo[0] + 1) as usize, (hi[1] - lo[1] + 1) as usize, 1]).unwrap();
    let mut bits = vec![true; g.len()];
    for c in closed {
        bits[g.index([c[0], c[1], 0]).unwrap()] = false;
    }
    PercolationField::from_bits(g, bits)
}

#[test]
fn skeleton_straight_line() {
    let f = open_field([-3, -3], [14, 3], &[]);
    let p = skeleton_path(&f, Point::ZERO, Point::new2(10.0, 0.0)).unwrap();
    validate_skeleton(&f, &p).unwrap();
    assert_eq!(p.hops(), libm::ceil(10.0 / 2f64.sqrt()) as usize);
    assert!(p.steps[1..p.steps.len() - 1].iter().all(|s| *s == SkeletonStep::Advance));
    assert_eq!(*p.steps.last().unwrap(), SkeletonStep::Terminal);
    assert_eq!(p.detours, 0);
}

/// Shortest open-site path (Euclidean hop weights) between the sites holding
/// two points, plus the two end legs.
fn bfs_oracle_length(f: &PercolationField, x: Point, y: Point) -> f64 {
    let sx = f.index([libm::round(x[0]) as i64, libm::round(x[1]) as i64, 0]).unwrap();
    let sy = f.index([libm::round(y[0]) as i64, libm::round(y[1]) as i64, 0]).unwrap();
    let mut dist = vec![f64::INFINITY; f.len()];
    dist[sx] = 0.0;
    let mut done = vec![false; f.len()];
    for _ in 0..f.len() {
        let Some(u) = (0..f.len()).filter(|i| !done[*i] && dist[*i].is_finite()).min_by(|a, b| dist[*a].total_cmp(&dist[*b])) else { break };
        done[u] = true;
        for v in 0..f.len() {
            let (a, b) = (f.site(u), f.site(v));
            if f.open[v] && linf(a, b) == 1 {
                let w = (((a[0] - b[0]).pow(2) + (a[1] - b[1]).pow(2)) as f64).sqrt();
                dist[v] = dist[v].min(dist[u] + w);
            }
        }
    }
    dist[sy] + x.dist(f.center(sx)) + y.dist(f.center(sy))
}

trait Center {
    fn center(&self, i: usize) -> Point;
}
impl Center for PercolationField {
    fn center(&self, i: usize) -> Point {
        self.domain.center(i)
    }
}

#[test]
fn skeleton_detours_around_block() {
    let block = [[4, 0], [5, 0], [4, -1], [5, -1]];
    let f = open_field([-3, -4], [14, 4], &block);
    let (x, y) = (Point::ZERO, Point::new2(10.0, 0.0));
    let p = skeleton_path(&f, x, y).unwrap();
    validate_skeleton(&f, &p).unwrap();
    assert_eq!(p.detours, 1);
    assert!(p.steps.contains(&SkeletonStep::Detour));
    let oracle = bfs_oracle_length(&f, x, y);
    assert!(p.length() <= 3.0 * oracle, "{} vs {}", p.length(), oracle);
    assert!(p.length() <= x.dist(y) + 8.0);
}

#[test]
fn skeleton_rejects_split_clusters() {
    let wall: Vec<[i64; 2]> = (-3..=3).map(|j| [5, j]).collect();
    let f = open_field([-3, -3], [14, 3], &wall);
    assert_eq!(skeleton_path(&f, Point::ZERO, Point::new2(10.0, 0.0)), Err(SkeletonError::DifferentClusters));
    let f = open_field([-3, -3], [14, 3], &[[0, 0]]);
    assert!(matches!(skeleton_path(&f, Point::ZERO, Point::new2(10.0, 0.0)), Err(SkeletonError::NotNearOpen(_))));
}

/// Random pairs in the largest open cluster of an i.i.d. field.
fn skeleton_sweep(seed: u64, p: f64, pairs: usize) -> Vec<(f64, SkeletonPath)> {
    let g = site_box(2, -30, 30);
    let f = synthetic_field(seed, g, p).unwrap();
    let big = clusters(&f).into_iter().filter(|c| c.open).max_by_key(|c| c.sites.len()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < pairs {
        let a = f.center(big.sites[rng.random_range(0..big.sites.len())]);
        let b = f.center(big.sites[rng.random_range(0..big.sites.len())]);
        let jitter = |q: Point, rng: &mut ChaCha8Rng| Point::new2(q[0] + rng.random_range(-0.5..0.5), q[1] + rng.random_range(-0.5..0.5));
        let (x, y) = (jitter(a, &mut rng), jitter(b, &mut rng));
        if x.dist(y) > 40.0 {
            continue;
        }
        let path = skeleton_path(&f, x, y).unwrap();
        validate_skeleton(&f, &path).unwrap();
        out.push((x.dist(y), path));
    }
    out
}

#[test]
fn skeleton_sweep_high_density() {
    for seed in 0..2 {
        for (len, path) in skeleton_sweep(seed, 0.95, 60) {
            assert!(path.hops() as f64 <= 4.0 * (len + path.hull_size as f64));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn prop_clusters_partition(seed in any::<u64>(), p in 0.0f64..1.0) {
        let f = synthetic_field(seed, site_box(2, 0, 9), p).unwrap();
        let mut seen = vec![0u8; f.len()];
        for c in clusters(&f) {
            for &s in &c.sites {
                seen[s] += 1;
                prop_assert_eq!(f.open[s], c.open);
            }
            prop_assert!(is_connected(&f.domain, &c.sites));
        }
        prop_assert!(seen.iter().all(|s| *s == 1));
    }

    #[test]
    fn prop_hull_closed(seed in any::<u64>(), p in 0.3f64..0.9, pick in 0usize..100) {
        let f = synthetic_field(seed, site_box(2, 0, 9), p).unwrap();
        let hull = closed_hull(&f, &[pick]);
        let member: BTreeSet<usize> = hull.iter().copied().collect();
        let offs = linf_offsets(2);
        let mut nb = Vec::new();
        for &h in &hull {
            prop_assert!(!f.open[h]);
            f.neighbors(h, &offs, &mut nb);
            for &m in &nb {
                prop_assert!(f.open[m] || member.contains(&m));
            }
        }
    }

    #[test]
    fn prop_skeleton_valid(seed in any::<u64>(), p in 0.8f64..1.0, ax in -10i64..10, ay in -10i64..10, bx in -10i64..10, by in -10i64..10) {
        let f = synthetic_field(seed, site_box(2, -14, 14), p).unwrap();
        let (x, y) = (Point::new2(ax as f64 + 0.3, ay as f64), Point::new2(bx as f64, by as f64 - 0.2));
        match skeleton_path(&f, x, y) {
            Ok(path) => {
                prop_assert!(validate_skeleton(&f, &path).is_ok());
                prop_assert_eq!(path.points[0], x);
                prop_assert_eq!(*path.points.last().unwrap(), y);
            }
            Err(SkeletonError::DifferentClusters) | Err(SkeletonError::NotNearOpen(_)) => {}
            Err(e) => prop_assert!(false, "{}", e),
        }
    }
}
