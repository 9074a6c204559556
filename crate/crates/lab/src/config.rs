//! Flat `key = value` experiment configuration.
//!
//! Every key has a fixed type and default. Unknown keys, duplicates and
//! values of the wrong type are rejected with a diagnostic naming the key.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Experiment {
    WaitingTimeTail,
    FluxTail,
    ClusterStats,
    ShapeEstimate,
    HomogRate,
    SkeletonValidate,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::WaitingTimeTail,
        Experiment::FluxTail,
        Experiment::ClusterStats,
        Experiment::ShapeEstimate,
        Experiment::HomogRate,
        Experiment::SkeletonValidate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::WaitingTimeTail => "waiting-time-tail",
            Experiment::FluxTail => "flux-tail",
            Experiment::ClusterStats => "cluster-stats",
            Experiment::ShapeEstimate => "shape-estimate",
            Experiment::HomogRate => "homog-rate",
            Experiment::SkeletonValidate => "skeleton-validate",
        }
    }

    /// Prefix of the keys owned by this experiment.
    fn prefix(self) -> &'static str {
        match self {
            Experiment::WaitingTimeTail => "wait.",
            Experiment::FluxTail => "flux.",
            Experiment::ClusterStats => "perc.",
            Experiment::ShapeEstimate => "shape.",
            Experiment::HomogRate => "homog.",
            Experiment::SkeletonValidate => "skel.",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| ConfigError::BadValue { key: "experiment".into(), value: s.into(), expected: "an experiment name" })
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { key: String, line: usize },
    #[error("line {line}: duplicate key `{key}`")]
    Duplicate { key: String, line: usize },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("key `{key}`: cannot read `{value}` as {expected}")]
    BadValue { key: String, value: String, expected: &'static str },
    #[error("key `experiment`: config is for `{found}`, not `{want}`")]
    WrongExperiment { found: Experiment, want: Experiment },
    #[error("unknown key `{key}`")]
    UnknownSetting { key: String },
    #[error("key `experiment`: missing")]
    MissingExperiment,
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Int,
    Float,
    FloatList,
    Seeds,
    Path,
    Choice(&'static [&'static str]),
}

impl Kind {
    fn expected(self) -> &'static str {
        match self {
            Kind::Int => "an integer",
            Kind::Float => "a number",
            Kind::FloatList => "a comma-separated list of numbers",
            Kind::Seeds => "a seed range A..B",
            Kind::Path => "a path",
            Kind::Choice(_) => "one of the listed choices",
        }
    }
}

struct KeySpec {
    name: &'static str,
    kind: Kind,
    default: &'static str,
    /// Part of the digest (everything except where and how a run executes).
    digest: bool,
}

const fn key(name: &'static str, kind: Kind, default: &'static str) -> KeySpec {
    KeySpec { name, kind, default, digest: true }
}

const fn run_key(name: &'static str, kind: Kind, default: &'static str) -> KeySpec {
    KeySpec { name, kind, default, digest: false }
}

const MODELS: &[&str] = &["sqrt-log", "inverse-r"];

const KEYS: &[KeySpec] = &[
    run_key("experiment", Kind::Choice(&[]), ""),
    run_key("seeds", Kind::Seeds, "0..100"),
    run_key("out", Kind::Path, "results"),
    run_key("workers", Kind::Int, "1"),
    run_key("budget.wall_seconds", Kind::Float, "0"),
    key("budget.max_cells", Kind::Int, "0"),
    key("dim", Kind::Int, "2"),
    key("amplitude", Kind::Float, "2"),
    key("div_knob", Kind::Float, "0"),
    key("bump_radius", Kind::Float, "0.45"),
    key("smoothness", Kind::Int, "3"),
    key("sublattice", Kind::Int, "1"),
    key("wait.h", Kind::Float, "0.0625"),
    key("wait.base_point", Kind::Choice(&["random", "origin"]), "random"),
    key("wait.grid_radius", Kind::Float, "8"),
    key("wait.ball_radius", Kind::Float, "0.5"),
    key("wait.t_max", Kind::Float, "200"),
    key("wait.s_max", Kind::Float, "0.9"),
    key("wait.min_count", Kind::Int, "5"),
    key("wait.boot_reps", Kind::Int, "400"),
    key("flux.r1", Kind::Float, "8"),
    key("flux.r0", Kind::FloatList, "2,3,4,5"),
    key("flux.eps", Kind::Float, "0.2"),
    key("flux.pitch_const", Kind::Float, "4"),
    key("flux.order", Kind::Int, "4"),
    key("flux.budget", Kind::Float, "60000000"),
    key("perc.source", Kind::Choice(&["synthetic", "environment"]), "synthetic"),
    key("perc.p", Kind::Float, "0.9"),
    key("perc.half", Kind::Int, "8"),
    key("perc.tau", Kind::Float, "1"),
    key("perc.h", Kind::Float, "0.125"),
    key("perc.big_r", Kind::Int, "4"),
    key("perc.big_n", Kind::Int, "4"),
    key("shape.h", Kind::Float, "0.25"),
    key("shape.directions", Kind::Int, "32"),
    key("shape.radii", Kind::FloatList, "4,8,16"),
    key("shape.bias", Kind::Choice(MODELS), "sqrt-log"),
    key("homog.h", Kind::Float, "0.25"),
    key("homog.horizon", Kind::Float, "8"),
    key("homog.eps", Kind::FloatList, "0.25,0.125,0.0625,0.03125"),
    key("homog.axis", Kind::Int, "0"),
    key("homog.depths", Kind::Int, "16"),
    key("homog.lateral", Kind::FloatList, "-0.125,0.125"),
    key("homog.margin", Kind::Float, "0.25"),
    key("homog.hbar_seeds", Kind::Int, "16"),
    key("homog.hbar_seed_offset", Kind::Int, "1000000"),
    key("homog.hbar_depths", Kind::FloatList, "64,128,256,512"),
    key("homog.hbar_bias", Kind::Choice(MODELS), "inverse-r"),
    key("skel.p", Kind::Float, "0.95"),
    key("skel.half", Kind::Int, "30"),
    key("skel.pairs", Kind::Int, "10"),
    key("skel.max_dist", Kind::Float, "40"),
];

fn spec(name: &str) -> Option<&'static KeySpec> {
    KEYS.iter().find(|k| k.name == name)
}

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Int(i64),
    Float(f64),
    FloatList(Vec<f64>),
    Seeds(Range<u64>),
    Path(PathBuf),
    Choice(String),
}

/// Shortest text that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:?}")
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Float(v) => f.write_str(&fmt_f64(*v)),
            Value::FloatList(v) => f.write_str(&v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(",")),
            Value::Seeds(r) => write!(f, "{}..{}", r.start, r.end),
            Value::Path(p) => write!(f, "{}", p.display()),
            Value::Choice(s) => f.write_str(s),
        }
    }
}

pub fn parse_seeds(s: &str) -> Option<Range<u64>> {
    let (a, b) = s.split_once("..")?;
    let a: u64 = a.trim().parse().ok()?;
    let b: u64 = b.trim().parse().ok()?;
    (a <= b).then_some(a..b)
}

fn parse_value(spec: &KeySpec, raw: &str) -> Result<Value, ConfigError> {
    let bad = || ConfigError::BadValue { key: spec.name.into(), value: raw.into(), expected: spec.kind.expected() };
    let float = |s: &str| s.trim().parse::<f64>().ok().filter(|v| v.is_finite());
    Ok(match spec.kind {
        Kind::Int => Value::Int(raw.parse().map_err(|_| bad())?),
        Kind::Float => Value::Float(float(raw).ok_or_else(bad)?),
        Kind::FloatList => {
            Value::FloatList(raw.split(',').map(float).collect::<Option<Vec<_>>>().filter(|v| !v.is_empty()).ok_or_else(bad)?)
        }
        Kind::Seeds => Value::Seeds(parse_seeds(raw).ok_or_else(bad)?),
        Kind::Path => {
            if raw.is_empty() {
                return Err(bad());
            }
            Value::Path(PathBuf::from(raw))
        }
        Kind::Choice(choices) => {
            if spec.name == "experiment" {
                Experiment::from_str(raw)?;
            } else if !choices.contains(&raw) {
                return Err(bad());
            }
            Value::Choice(raw.into())
        }
    })
}

/// Fully resolved configuration of one experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub experiment: Experiment,
    values: BTreeMap<&'static str, Value>,
}

impl Config {
    /// Defaults for every key of `experiment`.
    pub fn defaults(experiment: Experiment) -> Self {
        let mut values = BTreeMap::new();
        for k in KEYS {
            if k.name == "experiment" {
                continue;
            }
            values.insert(k.name, parse_value(k, k.default).expect("default values parse"));
        }
        Config { experiment, values }
    }

    /// Parses `text` on top of the defaults.
    pub fn parse(experiment: Experiment, text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Config::defaults(experiment);
        let mut seen = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { line: line_no })?;
            let (k, v) = (k.trim(), v.trim());
            let s = spec(k).ok_or_else(|| ConfigError::UnknownKey { key: k.into(), line: line_no })?;
            if seen.insert(k.to_string(), line_no).is_some() {
                return Err(ConfigError::Duplicate { key: k.into(), line: line_no });
            }
            let value = parse_value(s, v)?;
            if s.name == "experiment" {
                let found = Experiment::from_str(v)?;
                if found != experiment {
                    return Err(ConfigError::WrongExperiment { found, want: experiment });
                }
                continue;
            }
            cfg.values.insert(s.name, value);
        }
        Ok(cfg)
    }

    pub fn load(experiment: Experiment, path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Config::parse(experiment, &text)
    }

    /// Parses a file that names its own experiment (a config sidecar).
    pub fn parse_any(text: &str) -> Result<Self, ConfigError> {
        let name = text
            .lines()
            .filter_map(|l| l.split('#').next()?.split_once('='))
            .find(|(k, _)| k.trim() == "experiment")
            .map(|(_, v)| v.trim())
            .ok_or(ConfigError::MissingExperiment)?;
        Config::parse(Experiment::from_str(name)?, text)
    }

    pub fn load_any(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Config::parse_any(&text)
    }

    /// Sets one key from text, with the same checks as the file parser.
    pub fn set(&mut self, key: &str, raw: &str) -> Result<(), ConfigError> {
        let s = spec(key).ok_or_else(|| ConfigError::UnknownSetting { key: key.into() })?;
        if s.name == "experiment" {
            return Err(ConfigError::BadValue { key: key.into(), value: raw.into(), expected: "the subcommand" });
        }
        let v = parse_value(s, raw.trim())?;
        self.values.insert(s.name, v);
        Ok(())
    }

    fn get(&self, key: &str) -> &Value {
        self.values.get(key).unwrap_or_else(|| panic!("no config key {key}"))
    }

    pub fn int(&self, key: &str) -> i64 {
        match self.get(key) {
            Value::Int(v) => *v,
            v => panic!("{key} is not an integer: {v:?}"),
        }
    }

    pub fn float(&self, key: &str) -> f64 {
        match self.get(key) {
            Value::Float(v) => *v,
            v => panic!("{key} is not a number: {v:?}"),
        }
    }

    pub fn floats(&self, key: &str) -> &[f64] {
        match self.get(key) {
            Value::FloatList(v) => v,
            v => panic!("{key} is not a list: {v:?}"),
        }
    }

    pub fn choice(&self, key: &str) -> &str {
        match self.get(key) {
            Value::Choice(v) => v,
            v => panic!("{key} is not a choice: {v:?}"),
        }
    }

    pub fn seeds(&self) -> Range<u64> {
        match self.get("seeds") {
            Value::Seeds(r) => r.clone(),
            v => panic!("seeds: {v:?}"),
        }
    }

    pub fn out(&self) -> &Path {
        match self.get("out") {
            Value::Path(p) => p,
            v => panic!("out: {v:?}"),
        }
    }

    pub fn workers(&self) -> usize {
        self.int("workers").max(1) as usize
    }

    fn in_scope(&self, name: &str) -> bool {
        let owned = Experiment::ALL.iter().find(|e| name.starts_with(e.prefix()));
        owned.is_none_or(|e| *e == self.experiment)
    }

    /// Canonical text: the experiment line, then every digest key of this
    /// experiment in sorted order.
    pub fn canonical(&self) -> String {
        let mut out = format!("experiment = {}\n", self.experiment);
        for (k, v) in &self.values {
            let s = spec(k).expect("known key");
            if s.digest && self.in_scope(k) {
                out.push_str(&format!("{k} = {v}\n"));
            }
        }
        out
    }

    /// Every key of this experiment, run keys included, in sorted order.
    pub fn to_text(&self) -> String {
        let mut out = format!("experiment = {}\n", self.experiment);
        for (k, v) in &self.values {
            if self.in_scope(k) {
                out.push_str(&format!("{k} = {v}\n"));
            }
        }
        out
    }

    /// SHA-256 of the build version and [`Config::canonical`], hex encoded.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(concat!("gfront-lab ", env!("CARGO_PKG_VERSION"), "\n"));
        h.update(self.canonical());
        hex::encode(h.finalize())
    }

    /// First 12 hex digits of the digest, used in file names.
    pub fn short_digest(&self) -> String {
        self.digest()[..12].to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse_for_every_experiment() {
        for e in Experiment::ALL {
            let c = Config::defaults(e);
            assert_eq!(c.experiment, e);
            assert_eq!(c.seeds(), 0..100);
            assert_eq!(Config::parse(e, &c.to_text()).unwrap(), c);
        }
    }

    #[test]
    fn unknown_key_is_named() {
        let err = Config::parse(Experiment::FluxTail, "dim = 2\nflux.epsilon = 0.2\n").unwrap_err();
        assert!(err.to_string().contains("`flux.epsilon`"), "{err}");
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn type_errors_name_the_key() {
        for (text, key) in [
            ("amplitude = two", "amplitude"),
            ("dim = 2.5", "dim"),
            ("flux.r0 = 2,,3", "flux.r0"),
            ("seeds = 5..2", "seeds"),
            ("shape.bias = cubic", "shape.bias"),
            ("experiment = nonsense", "experiment"),
            ("amplitude = nan", "amplitude"),
        ] {
            let err = Config::parse(Experiment::ShapeEstimate, text).unwrap_err();
            assert!(err.to_string().contains(&format!("`{key}`")), "{text}: {err}");
        }
        assert!(matches!(Config::parse(Experiment::FluxTail, "dim"), Err(ConfigError::Syntax { line: 1 })));
        assert!(matches!(Config::parse(Experiment::FluxTail, "dim=2\ndim=3"), Err(ConfigError::Duplicate { .. })));
        assert!(matches!(
            Config::parse(Experiment::FluxTail, "experiment = homog-rate"),
            Err(ConfigError::WrongExperiment { .. })
        ));
    }

    #[test]
    fn digest_ignores_order_comments_and_run_keys() {
        let a = Config::parse(Experiment::FluxTail, "amplitude = 2.0\nflux.eps = 0.2 # fixed\n\ndim = 2").unwrap();
        let b = Config::parse(Experiment::FluxTail, "dim=2\n# comment\nflux.eps=0.20\nseeds = 5..9\nworkers = 8\nout = /tmp/x\namplitude=2")
            .unwrap();
        assert_eq!(a.digest(), b.digest());
        let c = Config::parse(Experiment::FluxTail, "flux.eps = 0.25").unwrap();
        assert_ne!(a.digest(), c.digest());
        // keys of other experiments do not move the digest
        let d = Config::parse(Experiment::FluxTail, "homog.horizon = 4").unwrap();
        assert_eq!(a.digest(), d.digest());
        assert_ne!(Config::defaults(Experiment::ClusterStats).digest(), Config::defaults(Experiment::FluxTail).digest());
        assert_eq!(a.digest().len(), 64);
    }

    #[test]
    fn float_text_round_trips() {
        for v in [0.1, 1.0 / 3.0, 1e-300, 6.0e7, -2.5, 0.0625] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
    }
}
