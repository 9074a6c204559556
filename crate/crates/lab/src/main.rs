use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gfront_core::frontprop::{evolve_front, FrontError};
use gfront_core::percolation::{good_site_field, site_box, skeleton_path, synthetic_field, GoodSiteOptions};
use gfront_core::{Grid, Point};
use gfront_lab::config::{Config, ConfigError, Experiment};
use gfront_lab::experiments::make_env;
use gfront_lab::formats::{write_field, write_front, write_skeleton};
use gfront_lab::harness::{self, HarnessError};
use gfront_lab::report::report;

/// Monte Carlo experiments for the G equation in random environments.
#[derive(Parser)]
#[command(name = "gfront", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Tail of the local waiting time W.
    WaitingTimeTail(RunArgs),
    /// Failure probability of the small-flux event against R0.
    FluxTail(RunArgs),
    /// Open/closed cluster statistics of a site field.
    ClusterStats(RunArgs),
    /// Effective first-passage norm and shape.
    ShapeEstimate(RunArgs),
    /// Homogenization error against epsilon.
    HomogRate(RunArgs),
    /// Skeleton paths on synthetic fields.
    SkeletonValidate(RunArgs),
    /// Recompute summaries, tables and plots of a results directory.
    Report { dir: PathBuf },
    /// Write a single front, site field or skeleton path to a file.
    Dump(DumpArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Config file (`key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed range `A..B` (B exclusive).
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    workers: Option<usize>,
    /// Override a key: `--set amplitude=1.5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Print the summary and refresh the directory report afterwards.
    #[arg(long)]
    report: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum DumpKind {
    /// Arrival field of `waiting-time-tail` settings, evolved to `--time`.
    Front,
    /// Site field of `cluster-stats` settings.
    Field,
    /// Skeleton path of `skeleton-validate` settings between two points.
    Skeleton,
}

#[derive(Args)]
struct DumpArgs {
    kind: DumpKind,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 4.0)]
    time: f64,
    /// Skeleton endpoints, `x,y`.
    #[arg(long, allow_hyphen_values = true)]
    from: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    to: Option<String>,
    /// Output file.
    #[arg(long, short)]
    output: PathBuf,
}

fn load(exp: Experiment, path: Option<&PathBuf>, sets: &[String]) -> Result<Config, ConfigError> {
    let mut cfg = match path {
        Some(p) => Config::load(exp, p)?,
        None => Config::defaults(exp),
    };
    for s in sets {
        let (k, v) = s.split_once('=').ok_or(ConfigError::Syntax { line: 0 })?;
        cfg.set(k.trim(), v)?;
    }
    Ok(cfg)
}

fn run(exp: Experiment, a: RunArgs) -> ExitCode {
    let mut sets = a.set;
    if let Some(o) = &a.out {
        sets.push(format!("out={}", o.display()));
    }
    if let Some(s) = &a.seeds {
        sets.push(format!("seeds={s}"));
    }
    if let Some(w) = a.workers {
        sets.push(format!("workers={w}"));
    }
    let cfg = match load(exp, a.config.as_ref(), &sets) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(1);
        }
    };
    match harness::run(&cfg) {
        Ok(outcome) => {
            eprintln!(
                "{}: {} seeds run, {} already done",
                outcome.records.display(),
                outcome.ran.len(),
                outcome.skipped
            );
            if a.report {
                print!("{}", outcome.summary.to_text());
                if let Err(e) = report(cfg.out()) {
                    eprintln!("report: {e}");
                    return ExitCode::from(1);
                }
            }
            if outcome.truncated() {
                eprintln!("wall budget exhausted; {} seeds pending", outcome.pending.len());
                return ExitCode::from(2);
            }
            ExitCode::SUCCESS
        }
        Err(e) if e.is_budget() => {
            eprintln!("budget: {e}");
            ExitCode::from(2)
        }
        Err(e @ HarnessError::Experiment(_)) if e.is_config() => {
            eprintln!("config error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn parse_point(s: Option<&String>, what: &str) -> Result<Point, String> {
    let s = s.ok_or(format!("--{what} is required"))?;
    let v: Vec<f64> = s.split(',').map(|t| t.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| format!("--{what}: `{s}`"))?;
    match v[..] {
        [x, y] => Ok(Point::new2(x, y)),
        _ => Err(format!("--{what} needs two coordinates")),
    }
}

fn dump(a: DumpArgs) -> Result<(), String> {
    let exp = match a.kind {
        DumpKind::Front => Experiment::WaitingTimeTail,
        DumpKind::Field => Experiment::ClusterStats,
        DumpKind::Skeleton => Experiment::SkeletonValidate,
    };
    let cfg = load(exp, a.config.as_ref(), &a.set).map_err(|e| format!("config error: {e}"))?;
    let dim = cfg.int("dim") as usize;
    let text = match a.kind {
        DumpKind::Front => {
            let env = make_env(&cfg, a.seed).map_err(|e| e.to_string())?;
            let grid = Grid::covering(dim, cfg.float("wait.h"), Point::ZERO, cfg.float("wait.grid_radius")).map_err(|e| e.to_string())?;
            let front = evolve_front(&env, &grid, &[Point::ZERO], a.time).map_err(|e: FrontError| e.to_string())?;
            write_front(&front, a.seed)
        }
        DumpKind::Field => {
            let half = cfg.int("perc.half");
            let domain = site_box(dim, -half, half);
            let field = if cfg.choice("perc.source") == "environment" {
                let env = make_env(&cfg, a.seed).map_err(|e| e.to_string())?;
                let mut opts = GoodSiteOptions::for_dim(dim);
                opts.h = cfg.float("perc.h");
                good_site_field(&env, a.seed, domain, cfg.float("perc.tau"), opts)
            } else {
                synthetic_field(a.seed, domain, cfg.float("perc.p"))
            };
            write_field(&field.map_err(|e| e.to_string())?)
        }
        DumpKind::Skeleton => {
            let half = cfg.int("skel.half");
            let field = synthetic_field(a.seed, site_box(2, -half, half), cfg.float("skel.p")).map_err(|e| e.to_string())?;
            let x = parse_point(a.from.as_ref(), "from")?;
            let y = parse_point(a.to.as_ref(), "to")?;
            write_skeleton(&skeleton_path(&field, x, y).map_err(|e| e.to_string())?, 2)
        }
    };
    std::fs::write(&a.output, text).map_err(|e| format!("{}: {e}", a.output.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::WaitingTimeTail(a) => run(Experiment::WaitingTimeTail, a),
        Cmd::FluxTail(a) => run(Experiment::FluxTail, a),
        Cmd::ClusterStats(a) => run(Experiment::ClusterStats, a),
        Cmd::ShapeEstimate(a) => run(Experiment::ShapeEstimate, a),
        Cmd::HomogRate(a) => run(Experiment::HomogRate, a),
        Cmd::SkeletonValidate(a) => run(Experiment::SkeletonValidate, a),
        Cmd::Report { dir } => match report(&dir) {
            Ok(all) => {
                for (path, s) in all {
                    println!("[{}]\n{}", path.display(), s.to_text());
                }
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("report: {e}");
                ExitCode::from(1)
            }
        },
        Cmd::Dump(a) => match dump(a) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("{e}");
                ExitCode::from(1)
            }
        },
    }
}
