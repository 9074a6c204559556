//! Seed-parallel runner. Workers compute seeds in any order; a single
//! writer appends them in seed order, so record bodies do not depend on the
//! worker count. Seeds already present in the record file are skipped.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::config::{fmt_f64, Config};
use crate::experiments::{self, columns, prepare, run_seed, summarize, ExperimentError, Prepared, Summary};
use crate::records::{encode_rows, header_line, read_table, Cell, RecordError, RecordFile};
use crate::report::{records_path, sidecar, write_outputs, ReportError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error(transparent)]
    Records(#[from] RecordError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("seed {seed}: {source}")]
    Seed { seed: u64, source: ExperimentError },
}

impl HarnessError {
    /// True for errors caused by the configuration rather than the run.
    pub fn is_config(&self) -> bool {
        matches!(self, HarnessError::Experiment(ExperimentError::Param { .. }))
    }

    pub fn is_budget(&self) -> bool {
        matches!(self, HarnessError::Experiment(ExperimentError::CellBudget { .. }))
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.into(), source }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub records: PathBuf,
    /// Seeds computed by this invocation.
    pub ran: Vec<u64>,
    /// Seeds found already done.
    pub skipped: usize,
    /// Seeds left undone because the wall budget ran out.
    pub pending: Vec<u64>,
    pub summary: Summary,
}

impl RunOutcome {
    pub fn truncated(&self) -> bool {
        !self.pending.is_empty()
    }
}

/// The H̄ pre-phase is cached next to the records so resumed runs reuse it.
fn load_or_prepare(cfg: &Config, records: &Path) -> Result<Prepared, HarnessError> {
    let path = sidecar(records, "prep");
    if let Ok(text) = fs::read_to_string(&path) {
        let vals: BTreeMap<&str, f64> = text
            .lines()
            .filter_map(|l| l.split_once('='))
            .filter_map(|(k, v)| Some((k.trim(), v.trim().parse().ok()?)))
            .collect();
        if let (Some(&h_bar), Some(&lo), Some(&hi)) = (vals.get("h_bar"), vals.get("lo"), vals.get("hi")) {
            experiments::check(cfg)?;
            return Ok(Prepared::HBar { h_bar, lo, hi });
        }
    }
    let prep = prepare(cfg)?;
    if let Prepared::HBar { h_bar, lo, hi } = prep {
        let text = format!("h_bar = {}\nlo = {}\nhi = {}\n", fmt_f64(h_bar), fmt_f64(lo), fmt_f64(hi));
        fs::write(&path, text).map_err(io_err(&path))?;
    }
    Ok(prep)
}

type SeedResult = (usize, Result<Vec<Vec<Cell>>, ExperimentError>, Duration);

/// Runs every pending seed of `cfg`, then writes the summary.
pub fn run(cfg: &Config) -> Result<RunOutcome, HarnessError> {
    experiments::check(cfg)?;
    let out = cfg.out();
    fs::create_dir_all(out).map_err(io_err(out))?;
    let records = records_path(out, cfg);
    let cfg_path = sidecar(&records, "config");
    fs::write(&cfg_path, cfg.to_text()).map_err(io_err(&cfg_path))?;

    let header = header_line(&columns(cfg.experiment));
    let (mut file, done) = RecordFile::open(&records, &header)?;
    let seeds: Vec<u64> = cfg.seeds().filter(|s| !done.contains(s)).collect();
    let skipped = cfg.seeds().filter(|s| done.contains(s)).count();

    let mut ran = Vec::new();
    let mut failure = None;
    if !seeds.is_empty() {
        let prep = load_or_prepare(cfg, &records)?;
        let timing_path = sidecar(&records, "timing.csv");
        let fresh = !timing_path.exists();
        let mut timing = OpenOptions::new().create(true).append(true).open(&timing_path).map_err(io_err(&timing_path))?;
        if fresh {
            timing.write_all(b"seed,wall (s)\n").map_err(io_err(&timing_path))?;
        }
        let budget = cfg.float("budget.wall_seconds");
        let deadline = (budget > 0.0).then(|| Instant::now() + Duration::from_secs_f64(budget));
        let name = cfg.experiment.name();
        let digest = cfg.digest();
        let next = AtomicUsize::new(0);
        let stop = AtomicBool::new(false);
        let (tx, rx) = mpsc::channel::<SeedResult>();
        std::thread::scope(|scope| -> Result<(), HarnessError> {
            for _ in 0..cfg.workers().min(seeds.len()) {
                let tx = tx.clone();
                let (next, stop, seeds, prep) = (&next, &stop, &seeds, &prep);
                scope.spawn(move || loop {
                    if stop.load(Ordering::SeqCst) || deadline.is_some_and(|d| Instant::now() >= d) {
                        break;
                    }
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= seeds.len() {
                        break;
                    }
                    let t0 = Instant::now();
                    let res = run_seed(cfg, prep, seeds[i]);
                    if res.is_err() {
                        stop.store(true, Ordering::SeqCst);
                    }
                    if tx.send((i, res, t0.elapsed())).is_err() {
                        break;
                    }
                });
            }
            drop(tx);
            // reorder buffer: rows are written only once every earlier seed is
            let mut buffer = BTreeMap::new();
            let mut write_at = 0;
            for (i, res, dt) in rx {
                buffer.insert(i, (res, dt));
                while let Some((res, dt)) = buffer.remove(&write_at) {
                    let seed = seeds[write_at];
                    match res {
                        Ok(rows) => {
                            file.append(&encode_rows(name, &digest, seed, &rows))?;
                            writeln!(timing, "{seed},{:.3}", dt.as_secs_f64()).map_err(io_err(&timing_path))?;
                            ran.push(seed);
                        }
                        Err(e) => {
                            stop.store(true, Ordering::SeqCst);
                            failure.get_or_insert(HarnessError::Seed { seed, source: e });
                        }
                    }
                    write_at += 1;
                }
            }
            Ok(())
        })?;
    }
    if let Some(e) = failure {
        return Err(e);
    }
    let pending: Vec<u64> = seeds.iter().copied().filter(|s| !ran.contains(s)).collect();
    let mut summary = summarize(cfg, read_table(&records)?)?;
    if !pending.is_empty() {
        summary.flags.push(format!("wall budget exhausted: {} of {} seeds pending", pending.len(), cfg.seeds().count()));
    }
    write_outputs(&records, &summary)?;
    Ok(RunOutcome { records, ran, skipped, pending, summary })
}
