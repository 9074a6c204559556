use std::fs;
use std::path::Path;
use std::process::Command;

use gfront_lab::config::{Config, Experiment};
use gfront_lab::harness::run;
use gfront_lab::records::{encode_rows, header_line, read_table, Table};
use gfront_lab::report::{records_path, report, sidecar};
use gfront_lab::experiments::columns;

fn cfg(exp: Experiment, out: &Path, seeds: &str, workers: usize, extra: &[(&str, &str)]) -> Config {
    let mut c = Config::defaults(exp);
    c.set("out", out.to_str().unwrap()).unwrap();
    c.set("seeds", seeds).unwrap();
    c.set("workers", &workers.to_string()).unwrap();
    if exp == Experiment::WaitingTimeTail {
        c.set("wait.grid_radius", "3").unwrap();
        c.set("wait.h", "0.125").unwrap();
    }
    for (k, v) in extra {
        c.set(k, v).unwrap();
    }
    c
}

fn body(c: &Config) -> String {
    Table::body(&records_path(c.out(), c)).unwrap()
}

#[test]
fn bodies_do_not_depend_on_worker_count() {
    for exp in [Experiment::WaitingTimeTail, Experiment::ClusterStats, Experiment::SkeletonValidate] {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let c1 = cfg(exp, a.path(), "0..12", 1, &[]);
        let c8 = cfg(exp, b.path(), "0..12", 8, &[]);
        assert_eq!(c1.digest(), c8.digest());
        run(&c1).unwrap();
        run(&c8).unwrap();
        assert_eq!(body(&c1), body(&c8), "{exp}");
        let s1 = fs::read_to_string(sidecar(&records_path(a.path(), &c1), "summary.txt")).unwrap();
        let s8 = fs::read_to_string(sidecar(&records_path(b.path(), &c8), "summary.txt")).unwrap();
        assert_eq!(s1, s8);
    }
}

#[test]
fn rerun_is_idempotent() {
    let d = tempfile::tempdir().unwrap();
    let c = cfg(Experiment::WaitingTimeTail, d.path(), "0..6", 3, &[]);
    let first = run(&c).unwrap();
    assert_eq!(first.ran, (0..6).collect::<Vec<_>>());
    let before = body(&c);
    let again = run(&c).unwrap();
    assert!(again.ran.is_empty());
    assert_eq!(again.skipped, 6);
    assert_eq!(body(&c), before);
}

#[test]
fn split_range_matches_one_shot() {
    let whole = tempfile::tempdir().unwrap();
    let split = tempfile::tempdir().unwrap();
    let c = cfg(Experiment::WaitingTimeTail, whole.path(), "0..10", 4, &[]);
    run(&c).unwrap();
    let c_a = cfg(Experiment::WaitingTimeTail, split.path(), "0..4", 2, &[]);
    let c_b = cfg(Experiment::WaitingTimeTail, split.path(), "4..10", 5, &[]);
    run(&c_a).unwrap();
    run(&c_b).unwrap();
    assert_eq!(records_path(split.path(), &c_a), records_path(split.path(), &c_b));
    assert_eq!(body(&c), body(&c_b));
    // an overlapping range only computes the missing seeds
    let c_c = cfg(Experiment::WaitingTimeTail, split.path(), "8..12", 1, &[]);
    assert_eq!(run(&c_c).unwrap().ran, vec![10, 11]);
}

#[test]
fn interrupted_seed_is_recomputed() {
    let whole = tempfile::tempdir().unwrap();
    let cut = tempfile::tempdir().unwrap();
    let c = cfg(Experiment::WaitingTimeTail, whole.path(), "0..5", 2, &[]);
    run(&c).unwrap();
    let c2 = cfg(Experiment::WaitingTimeTail, cut.path(), "0..5", 2, &[]);
    let path = records_path(cut.path(), &c2);
    let full = fs::read_to_string(records_path(whole.path(), &c)).unwrap();
    // keep three complete rows and half of the fourth
    let lines: Vec<&str> = full.split_inclusive('\n').collect();
    let partial = format!("{}{}", lines[..4].concat(), &lines[4][..lines[4].len() / 2]);
    fs::write(&path, partial).unwrap();
    let out = run(&c2).unwrap();
    assert_eq!(out.skipped, 3);
    assert_eq!(out.ran, vec![3, 4]);
    assert_eq!(body(&c), body(&c2));
}

#[test]
fn zero_amplitude_waiting_time_is_half() {
    let d = tempfile::tempdir().unwrap();
    let c = cfg(Experiment::WaitingTimeTail, d.path(), "0..8", 4, &[("amplitude", "0"), ("wait.h", "0.0625")]);
    let out = run(&c).unwrap();
    let t = read_table(&out.records).unwrap();
    for w in t.floats("W").unwrap() {
        assert!((w - 0.5).abs() <= 2.0 * 0.0625, "W = {w}");
    }
    assert!(t.texts("status").unwrap().iter().all(|s| *s == "ok"));
    // every seed has the same W, so no tail can be fitted
    assert!(out.summary.flags.iter().any(|f| f.contains("tail fit undefined")));
    assert!(out.summary.get("tail.b").is_none());
}

#[test]
fn single_seed_is_flagged_without_intervals() {
    let d = tempfile::tempdir().unwrap();
    let c = cfg(Experiment::ClusterStats, d.path(), "5..6", 1, &[]);
    let out = run(&c).unwrap();
    assert!(out.summary.flags.iter().any(|f| f.starts_with("single seed")));
    assert!(out.summary.get("open_fraction.mean").is_some());
    assert!(out.summary.get("open_fraction.sd").is_none());
}

fn ols(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let (sx, sy) = (xs.iter().sum::<f64>(), ys.iter().sum::<f64>());
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    (slope, (sy - slope * sx) / n)
}

#[test]
fn report_fit_matches_independent_least_squares() {
    let d = tempfile::tempdir().unwrap();
    let c = cfg(Experiment::HomogRate, d.path(), "0..3", 1, &[]);
    let eps = c.floats("homog.eps").to_vec();
    let horizon = c.float("homog.horizon");
    let records = records_path(d.path(), &c);
    let per_seed = [[0.31, 0.2, 0.13, 0.1], [0.29, 0.22, 0.12, 0.07], [0.33, 0.19, 0.16, 0.08]];
    let mut text = header_line(&columns(Experiment::HomogRate));
    for (s, errs) in per_seed.iter().enumerate() {
        let rows: Vec<_> = eps.iter().zip(errs).map(|(e, v)| vec![(*e).into(), (*v).into(), 1.25.into()]).collect();
        text.push_str(&encode_rows("homog-rate", &c.digest(), s as u64, &rows));
    }
    fs::write(&records, text).unwrap();
    fs::write(sidecar(&records, "config"), c.to_text()).unwrap();
    let all = report(d.path()).unwrap();
    assert_eq!(all.len(), 1);
    let s = &all[0].1;
    let mean: Vec<f64> = (0..4).map(|j| per_seed.iter().map(|r| r[j]).sum::<f64>() / 3.0).collect();
    let xs: Vec<f64> = eps.iter().map(|e| (horizon * e).ln()).collect();
    let ys: Vec<f64> = eps.iter().zip(&mean).map(|(e, m)| (m / (horizon / e).ln().powi(2)).ln()).collect();
    let (slope, intercept) = ols(&xs, &ys);
    assert!((s.get_f64("exponent").unwrap() - slope).abs() < 1e-9);
    assert!((s.get_f64("log_amplitude").unwrap() - intercept).abs() < 1e-9);
    let lx: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let ly: Vec<f64> = mean.iter().map(|m| m.ln()).collect();
    assert!((s.get_f64("power_exponent").unwrap() - ols(&lx, &ly).0).abs() < 1e-9);
    assert!(sidecar(&records, "rate.svg").exists());
    assert!(d.path().join("report.txt").exists());
}

#[test]
fn report_names_missing_columns() {
    let d = tempfile::tempdir().unwrap();
    let c = cfg(Experiment::HomogRate, d.path(), "0..1", 1, &[]);
    let records = records_path(d.path(), &c);
    fs::write(&records, "experiment,digest,seed,eps (1)\nhomog-rate,x,0,0.25\n").unwrap();
    fs::write(sidecar(&records, "config"), c.to_text()).unwrap();
    let err = report(d.path()).unwrap_err().to_string();
    assert!(err.contains("sup_error"), "{err}");
}

fn gfront(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_gfront")).args(args).output().unwrap();
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stderr).into_owned())
}

#[test]
fn exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let dir = d.path().to_str().unwrap();
    let (code, err) = gfront(&["waiting-time-tail", "--out", dir, "--set", "wait.hh=1"]);
    assert_eq!(code, 1);
    assert!(err.contains("wait.hh"));
    let cfg_path = d.path().join("bad.cfg");
    fs::write(&cfg_path, "amplitude = 2\nwait.t_max = soon\n").unwrap();
    let (code, err) = gfront(&["waiting-time-tail", "--config", cfg_path.to_str().unwrap(), "--out", dir]);
    assert_eq!(code, 1);
    assert!(err.contains("wait.t_max"), "{err}");
    let (code, _) = gfront(&["cluster-stats", "--out", dir, "--seeds", "0..2", "--set", "budget.max_cells=10"]);
    assert_eq!(code, 2);
    let (code, err) = gfront(&["cluster-stats", "--out", dir, "--seeds", "0..3", "--set", "budget.wall_seconds=1e-9"]);
    assert_eq!(code, 2, "{err}");
    let (code, _) = gfront(&["cluster-stats", "--out", dir, "--seeds", "0..3", "--workers", "2"]);
    assert_eq!(code, 0);
    let (code, _) = gfront(&["report", dir]);
    assert_eq!(code, 0);
    let empty = tempfile::tempdir().unwrap();
    let (code, err) = gfront(&["report", empty.path().to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("no record files"));
}
