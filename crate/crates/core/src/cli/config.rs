//! Experiment configuration: a TOML document with a fixed key schema, CLI
//! overrides on top, and validation that reports every problem at once.
//!
//! ```toml
//! experiment = "remainder_scaling"
//! seed = 1
//! paths = 2000
//! bootstrap = 1000
//! workers = 4            # hint only; never changes results
//! out = "results"
//!
//! [grid]
//! h = 0.0009765625
//! origin = [-0.125, -0.125]   # optional, derived from the probe when absent
//! n = 1280                     # optional
//!
//! [model]
//! u0 = "constant(0.5)"
//! u1 = "zero"
//! F = "tanh"
//!
//! [probe]
//! base = [0.0, 1.0]
//! epsilons = [0.125, 0.0625, 0.03125, 0.015625]   # or eps_max + eps_count
//! p = [2, 4]
//!
//! [decay_probe]
//! kappa = 0.5
//! m = 1.0
//! n_max = 8
//!
//! [limits]
//! max_n = 4096
//! max_paths = 1000000
//! ```

use std::collections::BTreeSet;
use std::f64::consts::SQRT_2;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{ConfigErrors, ConfigIssue, Error, Result};
use crate::geometry::{
    map_original_stencil, InitialData, Nonlinearity, OriginalDifference, Profile, Sign, Stencil,
};
use crate::noise::{steps_of, GridSpec, MAX_SIDE};

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "NULLWAVE_OUT";
pub const DEFAULT_OUT: &str = "nullwave-out";

pub const MIN_PATHS: usize = 30;
pub const MIN_BOOTSTRAP: usize = 1000;
/// Scaling windows start this many lattice steps above `h`.
pub const MIN_EPS_STEPS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    VarianceZ,
    RemainderScaling,
    OriginalCoords,
    OneParamFailure,
    Holder,
    DecayProbe,
    SolveOnce,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::VarianceZ,
        ExperimentKind::RemainderScaling,
        ExperimentKind::OriginalCoords,
        ExperimentKind::OneParamFailure,
        ExperimentKind::Holder,
        ExperimentKind::DecayProbe,
        ExperimentKind::SolveOnce,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::VarianceZ => "variance_z",
            ExperimentKind::RemainderScaling => "remainder_scaling",
            ExperimentKind::OriginalCoords => "original_coords",
            ExperimentKind::OneParamFailure => "one_param_failure",
            ExperimentKind::Holder => "holder",
            ExperimentKind::DecayProbe => "decay_probe",
            ExperimentKind::SolveOnce => "solve_once",
        }
    }

    /// Experiments whose ε window must sit between `8h` and `(x₂ − x₁)/4`.
    fn is_scaling(self) -> bool {
        matches!(
            self,
            ExperimentKind::RemainderScaling
                | ExperimentKind::OriginalCoords
                | ExperimentKind::OneParamFailure
                | ExperimentKind::Holder
        )
    }

    /// Experiments built on second moments only.
    fn second_moment_only(self) -> bool {
        matches!(
            self,
            ExperimentKind::VarianceZ | ExperimentKind::OneParamFailure | ExperimentKind::Holder
        )
    }

    fn default_h(self) -> f64 {
        match self {
            ExperimentKind::VarianceZ => 0.025,
            ExperimentKind::RemainderScaling | ExperimentKind::OriginalCoords => 1.0 / 1024.0,
            ExperimentKind::OneParamFailure | ExperimentKind::Holder => 1.0 / 512.0,
            ExperimentKind::DecayProbe => 1.0 / 65536.0,
            ExperimentKind::SolveOnce => 1.0 / 64.0,
        }
    }

    fn default_paths(self) -> usize {
        match self {
            ExperimentKind::VarianceZ | ExperimentKind::DecayProbe => 100_000,
            ExperimentKind::SolveOnce => 1,
            _ => 2000,
        }
    }

    fn default_epsilons(self) -> Vec<f64> {
        let dyadic = [0.125, 0.0625, 0.03125, 0.015625];
        match self {
            ExperimentKind::VarianceZ => vec![0.05, 0.1, 0.2],
            ExperimentKind::OriginalCoords => dyadic.iter().map(|e| e / SQRT_2).collect(),
            ExperimentKind::DecayProbe | ExperimentKind::SolveOnce => Vec::new(),
            _ => dyadic.to_vec(),
        }
    }

    fn default_p(self) -> Vec<f64> {
        match self {
            ExperimentKind::RemainderScaling => vec![2.0, 4.0],
            ExperimentKind::DecayProbe | ExperimentKind::SolveOnce => Vec::new(),
            _ => vec![2.0],
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let key = s.trim().replace('-', "_");
        let key = if key == "original_coordinates" {
            "original_coords".to_string()
        } else {
            key
        };
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == key)
            .ok_or_else(|| {
                let names: Vec<_> = ExperimentKind::ALL.iter().map(|k| k.name()).collect();
                format!(
                    "unknown experiment `{s}`; expected one of {}",
                    names.join(", ")
                )
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecaySettings {
    pub kappa: f64,
    pub m: f64,
    pub n_max: usize,
}

impl Default for DecaySettings {
    fn default() -> Self {
        Self {
            kappa: 0.5,
            m: 1.0,
            n_max: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Limits {
    pub max_n: usize,
    pub max_paths: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            max_n: 4096,
            max_paths: 1_000_000,
        }
    }
}

/// A validated experiment description. Everything that influences results is
/// serialized into the report; the worker hint and output directory are not,
/// so they cannot change a single output byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub paths: usize,
    pub bootstrap: usize,
    pub h: f64,
    /// The materialized lattice; absent for the decay probe, which samples
    /// nested squares directly.
    pub grid: Option<GridSpec>,
    pub data: InitialData,
    #[serde(rename = "F")]
    pub f: Nonlinearity,
    /// Base point in null coordinates.
    pub base: (f64, f64),
    pub epsilons: Vec<f64>,
    pub p: Vec<f64>,
    pub decay: DecaySettings,
    pub limits: Limits,
    #[serde(skip)]
    pub workers: Option<usize>,
    #[serde(skip)]
    pub out: PathBuf,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub paths: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
}

impl ExperimentConfig {
    pub fn grid(&self) -> Result<GridSpec> {
        self.grid.ok_or_else(|| {
            Error::Config(format!(
                "experiment `{}` has no materialized grid",
                self.experiment
            ))
        })
    }

    /// Lattice index of the base point.
    pub fn base_index(&self) -> Result<(usize, usize)> {
        let grid = self.grid()?;
        Ok((grid.index1(self.base.0)?, grid.index2(self.base.1)?))
    }

    /// Lattice steps of each configured ε (`√2·ε` for the original frame).
    pub fn steps(&self) -> Result<Vec<usize>> {
        self.epsilons
            .iter()
            .map(|&e| match self.experiment {
                ExperimentKind::OriginalCoords => steps_of(SQRT_2 * e, self.h),
                _ => steps_of(e, self.h),
            })
            .collect()
    }

    /// `(target, snapped ε, steps)` for `ε_n = e^{-n}`, `n = 1..=n_max`.
    pub fn decay_scales(&self) -> Vec<(f64, f64, usize)> {
        (1..=self.decay.n_max)
            .map(|n| {
                let target = (-(n as f64)).exp();
                let steps = ((target / self.h).round() as usize).max(1);
                (target, steps as f64 * self.h, steps)
            })
            .collect()
    }

    /// Every stencil the experiment will apply at the base point.
    pub fn stencils(&self) -> Result<Vec<Stencil>> {
        let steps = self.steps()?;
        let mut out = Vec::new();
        match self.experiment {
            ExperimentKind::VarianceZ | ExperimentKind::RemainderScaling => {
                for &r in &steps {
                    out.push(Stencil::mixed(Sign::Plus, r));
                    out.push(Stencil::mixed(Sign::Minus, r));
                }
                if self.experiment == ExperimentKind::RemainderScaling {
                    out.push(Stencil::mixed(Sign::Plus, 1));
                }
            }
            ExperimentKind::OriginalCoords => {
                for &e in &self.epsilons {
                    for kind in [OriginalDifference::Delta1, OriginalDifference::Delta2] {
                        out.push(map_original_stencil(kind, e, self.h)?);
                    }
                }
            }
            ExperimentKind::OneParamFailure => {
                out.extend(steps.iter().map(|&r| Stencil::first_axis(r)));
            }
            ExperimentKind::Holder => {
                for &r in &steps {
                    out.push(Stencil::first_axis(r));
                    out.push(Stencil::second_axis(r));
                }
            }
            ExperimentKind::DecayProbe | ExperimentKind::SolveOnce => {}
        }
        Ok(out)
    }

    /// Refuses work beyond the configured resource caps.
    pub fn check_limits(&self) -> Result<()> {
        if let Some(grid) = self.grid {
            if grid.n > self.limits.max_n {
                return Err(Error::ResourceCap(format!(
                    "grid needs n = {} cells per axis, above the cap max_n = {}; \
                     increase h, shrink the ε range, or raise limits.max_n",
                    grid.n, self.limits.max_n
                )));
            }
        }
        if self.paths > self.limits.max_paths {
            return Err(Error::ResourceCap(format!(
                "{} paths requested, above the cap max_paths = {}",
                self.paths, self.limits.max_paths
            )));
        }
        Ok(())
    }
}

/// Reads, parses and validates a configuration file.
pub fn load_config(path: &Path, overrides: &Overrides) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text, overrides).map_err(Error::from)
}

/// Parses the TOML text, applies overrides and validates the result. On
/// failure, returns every problem found, each addressed by its key path.
pub fn parse_config(
    text: &str,
    overrides: &Overrides,
) -> std::result::Result<ExperimentConfig, ConfigErrors> {
    let mut errors = ConfigErrors::default();
    let table: Table = match text.parse() {
        Ok(t) => t,
        Err(e) => {
            errors.push(
                ConfigIssue::new("<document>", format!("not valid TOML: {}", e.message()))
                    .hint("the file uses `key = value` lines and `[section]` headers"),
            );
            return Err(errors);
        }
    };
    let mut r = Reader { errors };
    let raw = r.read(&table);
    let config = r.resolve(raw, overrides);
    match config {
        Some(c) if r.errors.is_empty() => Ok(c),
        _ => Err(r.errors),
    }
}

/// Values as written in the file; `None` means "use the default".
#[derive(Default)]
struct Raw {
    experiment: Option<ExperimentKind>,
    seed: Option<u64>,
    paths: Option<usize>,
    bootstrap: Option<usize>,
    workers: Option<usize>,
    out: Option<PathBuf>,
    h: Option<f64>,
    origin: Option<(f64, f64)>,
    n: Option<usize>,
    u0: Option<Profile>,
    u1: Option<Profile>,
    f: Option<Nonlinearity>,
    base: Option<(f64, f64)>,
    epsilons: Option<Vec<f64>>,
    eps_max: Option<f64>,
    eps_count: Option<usize>,
    p: Option<Vec<f64>>,
    decay: DecaySettings,
    limits: Limits,
}

struct Reader {
    errors: ConfigErrors,
}

const TOP_KEYS: &[&str] = &["experiment", "seed", "paths", "bootstrap", "workers", "out"];
const SECTIONS: &[(&str, &[&str])] = &[
    ("grid", &["h", "origin", "n"]),
    ("model", &["u0", "u1", "F"]),
    ("probe", &["base", "epsilons", "eps_max", "eps_count", "p"]),
    ("decay_probe", &["kappa", "m", "n_max"]),
    ("limits", &["max_n", "max_paths"]),
];

impl Reader {
    fn issue(&mut self, key: &str, message: impl Into<String>, hint: Option<String>) {
        let mut issue = ConfigIssue::new(key, message);
        if let Some(h) = hint {
            issue = issue.hint(h);
        }
        self.errors.push(issue);
    }

    fn read(&mut self, table: &Table) -> Raw {
        let mut raw = Raw::default();
        for (key, value) in table {
            match key.as_str() {
                "experiment" => {
                    if let Some(s) = self.string(key, value) {
                        match s.parse() {
                            Ok(k) => raw.experiment = Some(k),
                            Err(msg) => self.issue(key, msg, None),
                        }
                    }
                }
                "seed" => raw.seed = self.uint(key, value).map(|v| v as u64),
                "paths" => raw.paths = self.uint(key, value),
                "bootstrap" => raw.bootstrap = self.uint(key, value),
                "workers" => raw.workers = self.uint(key, value),
                "out" => raw.out = self.string(key, value).map(PathBuf::from),
                section if SECTIONS.iter().any(|(s, _)| *s == section) => match value {
                    Value::Table(t) => self.read_section(section, t, &mut raw),
                    _ => self.issue(section, "expected a [section] table", None),
                },
                other => self.unknown(
                    other,
                    TOP_KEYS.iter().chain(SECTIONS.iter().map(|(s, _)| s)),
                ),
            }
        }
        raw
    }

    fn read_section(&mut self, section: &str, table: &Table, raw: &mut Raw) {
        let allowed = SECTIONS
            .iter()
            .find(|(s, _)| *s == section)
            .map(|(_, k)| *k)
            .unwrap_or(&[]);
        for (key, value) in table {
            let path = format!("{section}.{key}");
            let path = path.as_str();
            match (section, key.as_str()) {
                ("grid", "h") => raw.h = self.float(path, value),
                ("grid", "origin") => raw.origin = self.pair(path, value),
                ("grid", "n") => raw.n = self.uint(path, value),
                ("model", "u0") => raw.u0 = self.preset(path, value, parse_profile),
                ("model", "u1") => raw.u1 = self.preset(path, value, parse_profile),
                ("model", "F") => raw.f = self.preset(path, value, parse_nonlinearity),
                ("probe", "base") => raw.base = self.pair(path, value),
                ("probe", "epsilons") => raw.epsilons = self.floats(path, value),
                ("probe", "eps_max") => raw.eps_max = self.float(path, value),
                ("probe", "eps_count") => raw.eps_count = self.uint(path, value),
                ("probe", "p") => raw.p = self.floats(path, value),
                ("decay_probe", "kappa") => {
                    raw.decay.kappa = self.float(path, value).unwrap_or(raw.decay.kappa)
                }
                ("decay_probe", "m") => {
                    raw.decay.m = self.float(path, value).unwrap_or(raw.decay.m)
                }
                ("decay_probe", "n_max") => {
                    raw.decay.n_max = self.uint(path, value).unwrap_or(raw.decay.n_max)
                }
                ("limits", "max_n") => {
                    raw.limits.max_n = self.uint(path, value).unwrap_or(raw.limits.max_n)
                }
                ("limits", "max_paths") => {
                    raw.limits.max_paths = self.uint(path, value).unwrap_or(raw.limits.max_paths)
                }
                _ => self.unknown(path, allowed.iter()),
            }
        }
    }

    fn unknown<'a>(&mut self, key: &str, allowed: impl Iterator<Item = &'a &'a str>) {
        let allowed: Vec<&str> = allowed.copied().collect();
        self.issue(
            key,
            "unknown key",
            Some(format!("allowed here: {}", allowed.join(", "))),
        );
    }

    fn string(&mut self, key: &str, value: &Value) -> Option<String> {
        match value {
            Value::String(s) => Some(s.clone()),
            _ => {
                self.issue(
                    key,
                    format!("expected a string, got {}", value.type_str()),
                    None,
                );
                None
            }
        }
    }

    fn uint(&mut self, key: &str, value: &Value) -> Option<usize> {
        match value {
            Value::Integer(i) if *i >= 0 => Some(*i as usize),
            _ => {
                self.issue(
                    key,
                    format!("expected a non-negative integer, got {value}"),
                    None,
                );
                None
            }
        }
    }

    fn float(&mut self, key: &str, value: &Value) -> Option<f64> {
        match value {
            Value::Float(x) if x.is_finite() => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            _ => {
                self.issue(key, format!("expected a finite number, got {value}"), None);
                None
            }
        }
    }

    fn floats(&mut self, key: &str, value: &Value) -> Option<Vec<f64>> {
        let Value::Array(items) = value else {
            self.issue(
                key,
                format!("expected an array of numbers, got {}", value.type_str()),
                None,
            );
            return None;
        };
        let before = self.errors.issues().len();
        let out: Vec<f64> = items
            .iter()
            .enumerate()
            .filter_map(|(i, v)| self.float(&format!("{key}[{i}]"), v))
            .collect();
        (self.errors.issues().len() == before).then_some(out)
    }

    fn pair(&mut self, key: &str, value: &Value) -> Option<(f64, f64)> {
        match self.floats(key, value)?.as_slice() {
            &[a, b] => Some((a, b)),
            other => {
                self.issue(
                    key,
                    format!("expected two numbers [x₁, x₂], got {}", other.len()),
                    None,
                );
                None
            }
        }
    }

    fn preset<T>(
        &mut self,
        key: &str,
        value: &Value,
        parse: fn(&str) -> std::result::Result<T, String>,
    ) -> Option<T> {
        let s = self.string(key, value)?;
        match parse(&s) {
            Ok(v) => Some(v),
            Err(msg) => {
                self.issue(key, msg, None);
                None
            }
        }
    }

    fn resolve(&mut self, raw: Raw, overrides: &Overrides) -> Option<ExperimentConfig> {
        let Some(experiment) = raw.experiment else {
            if !self.errors.issues().iter().any(|i| i.key == "experiment") {
                let names: Vec<_> = ExperimentKind::ALL.iter().map(|k| k.name()).collect();
                self.issue(
                    "experiment",
                    "missing required key",
                    Some(format!("one of {}", names.join(", "))),
                );
            }
            return None;
        };
        let h = raw.h.unwrap_or_else(|| experiment.default_h());
        if !(h > 0.0) {
            self.issue(
                "grid.h",
                format!("lattice step must be positive, got {h}"),
                None,
            );
            return None;
        }
        let base = raw.base.unwrap_or((0.0, 1.0));
        let mut epsilons = match (raw.epsilons, raw.eps_max, raw.eps_count) {
            (Some(list), None, None) => list,
            (None, Some(max), count) => {
                let count = count.unwrap_or(4);
                (0..count).map(|k| max / f64::powi(2.0, k as i32)).collect()
            }
            (None, None, Some(_)) => {
                self.issue("probe.eps_count", "needs probe.eps_max", None);
                Vec::new()
            }
            (None, None, None) => experiment.default_epsilons(),
            (Some(_), _, _) => {
                self.issue(
                    "probe.epsilons",
                    "give either an explicit list or eps_max/eps_count, not both",
                    None,
                );
                Vec::new()
            }
        };
        if matches!(
            experiment,
            ExperimentKind::DecayProbe | ExperimentKind::SolveOnce
        ) && !epsilons.is_empty()
        {
            self.issue(
                "probe.epsilons",
                format!("not used by `{experiment}`"),
                None,
            );
            epsilons.clear();
        }
        let p = raw.p.unwrap_or_else(|| experiment.default_p());
        let data = InitialData::new(
            raw.u0.unwrap_or(Profile::Constant { value: 0.5 }),
            raw.u1.unwrap_or(Profile::Zero),
        );
        let mut config = ExperimentConfig {
            experiment,
            seed: overrides.seed.or(raw.seed).unwrap_or(1),
            paths: overrides
                .paths
                .or(raw.paths)
                .unwrap_or_else(|| experiment.default_paths()),
            bootstrap: raw.bootstrap.unwrap_or(MIN_BOOTSTRAP),
            h,
            grid: None,
            data,
            f: raw.f.unwrap_or(Nonlinearity::Tanh),
            base,
            epsilons,
            p,
            decay: raw.decay,
            limits: raw.limits,
            workers: overrides.workers.or(raw.workers),
            out: overrides
                .out
                .clone()
                .or(raw.out)
                .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
        };
        self.validate_common(&config);
        if experiment == ExperimentKind::DecayProbe {
            self.validate_decay(&config);
        } else {
            config.grid = self.build_grid(&config, raw.origin, raw.n);
            if experiment != ExperimentKind::SolveOnce {
                self.validate_probe(&config);
            }
        }
        Some(config)
    }

    fn validate_common(&mut self, c: &ExperimentConfig) {
        let exp = c.experiment;
        if exp == ExperimentKind::SolveOnce {
            if c.paths != 1 {
                self.issue(
                    "paths",
                    "solve_once dumps exactly one path",
                    Some("remove `paths`".into()),
                );
            }
        } else if c.paths < MIN_PATHS {
            self.issue(
                "paths",
                format!("{} paths is too few for any statistic", c.paths),
                Some(format!("use at least {MIN_PATHS}")),
            );
        }
        if c.bootstrap < MIN_BOOTSTRAP {
            self.issue(
                "bootstrap",
                format!("{} resamples is too few", c.bootstrap),
                Some(format!("use at least {MIN_BOOTSTRAP}")),
            );
        }
        if c.workers == Some(0) {
            self.issue("workers", "worker hint must be at least 1", None);
        }
        if let Err(e) = c.data.u0.validate() {
            self.issue("model.u0", e.to_string(), None);
        }
        if let Err(e) = c.data.u1.validate() {
            self.issue("model.u1", e.to_string(), None);
        }
        if let Err(e) = c.f.validate() {
            self.issue("model.F", e.to_string(), None);
        }
        if c.base.1 < c.base.0 {
            self.issue(
                "probe.base",
                "base point must satisfy x₂ ≥ x₁ (nonnegative time)",
                None,
            );
        }
        for (i, &p) in c.p.iter().enumerate() {
            if !(p.is_finite() && p >= 2.0) {
                self.issue(
                    &format!("probe.p[{i}]"),
                    format!("p = {p} must be a finite number ≥ 2"),
                    None,
                );
            }
        }
        if exp.second_moment_only() && c.p != [2.0] {
            self.issue(
                "probe.p",
                format!("`{exp}` measures second moments only"),
                Some("set p = [2]".into()),
            );
        }
        if !matches!(exp, ExperimentKind::DecayProbe | ExperimentKind::SolveOnce) && c.p.is_empty()
        {
            self.issue("probe.p", "at least one p is needed", None);
        }
    }

    fn validate_decay(&mut self, c: &ExperimentConfig) {
        let d = c.decay;
        if !(d.kappa >= 0.0) {
            self.issue(
                "decay_probe.kappa",
                format!("κ = {} must be ≥ 0", d.kappa),
                None,
            );
        }
        if !(d.m > 0.0) {
            self.issue("decay_probe.m", format!("M = {} must be > 0", d.m), None);
        }
        if d.n_max < 2 {
            self.issue("decay_probe.n_max", "need at least two scales", None);
            return;
        }
        let scales = c.decay_scales();
        if scales[0].1 > MAX_SIDE {
            self.issue(
                "grid.h",
                "largest probe square exceeds the supported side",
                None,
            );
        }
        if scales.windows(2).any(|w| w[0].2 <= w[1].2) {
            let coarsest = (-(d.n_max as f64)).exp();
            self.issue(
                "grid.h",
                format!(
                    "h = {} cannot resolve ε = e^-{} as a distinct lattice scale",
                    c.h, d.n_max
                ),
                Some(format!("use h ≤ {:.3e}", coarsest / 4.0)),
            );
        }
    }

    /// Uses the explicit grid when given (and checks it), otherwise the
    /// smallest diagonal grid that holds every stencil around the base point.
    fn build_grid(
        &mut self,
        c: &ExperimentConfig,
        origin: Option<(f64, f64)>,
        n: Option<usize>,
    ) -> Option<GridSpec> {
        let h = c.h;
        let separation = c.base.1 - c.base.0;
        let m = match steps_of(separation, h) {
            Ok(m) => m,
            Err(_) => {
                let k = (separation / h).round();
                self.issue(
                    "probe.base",
                    format!("x₂ − x₁ = {separation} is not a multiple of h = {h}"),
                    Some(format!("nearest valid x₂ is {}", c.base.0 + k * h)),
                );
                return None;
            }
        };
        let r_max = match c.steps() {
            Ok(steps) => steps.into_iter().max().unwrap_or(0),
            Err(_) => {
                self.report_misaligned(c);
                return None;
            }
        };
        let (auto_origin, auto_n) = match c.experiment {
            ExperimentKind::SolveOnce => (0.0, 64),
            ExperimentKind::OneParamFailure => (c.base.0, m),
            ExperimentKind::Holder => (c.base.0, m + r_max),
            _ => (c.base.0 - r_max as f64 * h, m + 2 * r_max),
        };
        let origin = origin.unwrap_or((auto_origin, auto_origin));
        if origin.0 != origin.1 {
            self.issue(
                "grid.origin",
                format!("origin {origin:?} is off the diagonal"),
                Some("the lattice diagonal must lie on x₁ = x₂; use equal coordinates".into()),
            );
            return None;
        }
        let n = n.unwrap_or(auto_n).max(2);
        match GridSpec::diagonal(origin.0, n, h) {
            Ok(g) => Some(g),
            Err(e) => {
                self.issue("grid", e.to_string(), None);
                None
            }
        }
    }

    fn report_misaligned(&mut self, c: &ExperimentConfig) {
        for (i, &e) in c.epsilons.iter().enumerate() {
            let key = format!("probe.epsilons[{i}]");
            let err = if c.experiment == ExperimentKind::OriginalCoords {
                map_original_stencil(OriginalDifference::Delta1, e, c.h).err()
            } else {
                steps_of(e, c.h).err()
            };
            if let Some(err) = err {
                self.issue(
                    &key,
                    format!("ε = {e}: {err}"),
                    Some("every ε must be a multiple of grid.h".into()),
                );
            }
        }
    }

    fn validate_probe(&mut self, c: &ExperimentConfig) {
        let exp = c.experiment;
        let Some(grid) = c.grid else { return };
        let base = match (grid.index1(c.base.0), grid.index2(c.base.1)) {
            (Ok(i), Ok(j)) => (i, j),
            (a, b) => {
                let msg = a
                    .err()
                    .or(b.err())
                    .map(|e| e.to_string())
                    .unwrap_or_default();
                self.issue(
                    "probe.base",
                    msg,
                    Some("base must be a lattice point inside the grid".into()),
                );
                return;
            }
        };
        let distinct: BTreeSet<u64> = c.epsilons.iter().map(|e| e.to_bits()).collect();
        if distinct.len() < 3 {
            self.issue(
                "probe.epsilons",
                "need at least three distinct ε values to fit a slope",
                None,
            );
        }
        if c.epsilons.iter().any(|&e| !(e > 0.0)) {
            self.issue("probe.epsilons", "every ε must be positive", None);
        }
        let Ok(steps) = c.steps() else {
            self.report_misaligned(c);
            return;
        };
        if exp.is_scaling() {
            let separation = c.base.1 - c.base.0;
            for (i, (&e, &r)) in c.epsilons.iter().zip(&steps).enumerate() {
                let lattice_eps = r as f64 * c.h;
                if r < MIN_EPS_STEPS {
                    self.issue(
                        &format!("probe.epsilons[{i}]"),
                        format!("ε = {e} spans {r} lattice steps, below the scheme-error floor {MIN_EPS_STEPS}h"),
                        Some(format!("use ε ≥ {} or a smaller grid.h", MIN_EPS_STEPS as f64 * c.h)),
                    );
                }
                if lattice_eps > separation / 4.0 {
                    self.issue(
                        &format!("probe.epsilons[{i}]"),
                        format!("ε = {e} exceeds (x₂ − x₁)/4 = {}", separation / 4.0),
                        Some("shrink ε or move the base point further from the diagonal".into()),
                    );
                }
            }
        }
        let stencils = match c.stencils() {
            Ok(s) => s,
            Err(e) => {
                self.issue("probe.epsilons", e.to_string(), None);
                return;
            }
        };
        let n = grid.n as isize;
        for s in &stencils {
            let bad = s.points().iter().find(|p| {
                let i = base.0 as isize + p.offset.0;
                let j = base.1 as isize + p.offset.1;
                !(0 <= i && i <= j && j <= n)
            });
            if let Some(p) = bad {
                let i = base.0 as isize + p.offset.0;
                let j = base.1 as isize + p.offset.1;
                self.issue(
                    "probe.epsilons",
                    format!("stencil point ({i}, {j}) around base {base:?} falls outside 0 ≤ i ≤ j ≤ {n}"),
                    Some("enlarge the grid, drop grid.origin/grid.n to size it automatically, or shrink ε".into()),
                );
                break;
            }
        }
    }
}

/// Splits `name(a, b, …)` into the lowercase name and its numeric arguments.
fn split_call(s: &str) -> std::result::Result<(String, Vec<f64>), String> {
    let s = s.trim();
    let (name, args) = match s.find('(') {
        Some(open) => {
            let inner = s[open + 1..]
                .strip_suffix(')')
                .ok_or_else(|| format!("`{s}`: missing closing parenthesis"))?;
            let args = inner
                .split(',')
                .map(str::trim)
                .filter(|a| !a.is_empty())
                .map(|a| {
                    a.parse::<f64>()
                        .map_err(|_| format!("`{s}`: `{a}` is not a number"))
                })
                .collect::<std::result::Result<Vec<_>, _>>()?;
            (&s[..open], args)
        }
        None => (s, Vec::new()),
    };
    Ok((name.trim().to_ascii_lowercase().replace('-', "_"), args))
}

fn arity(s: &str, args: &[f64], n: usize) -> std::result::Result<(), String> {
    if args.len() == n {
        Ok(())
    } else {
        Err(format!("`{s}` takes {n} argument(s), got {}", args.len()))
    }
}

/// Parses `zero`, `constant(c)`, `sine(a, k)` or `tanh_ramp(h, w)`.
pub fn parse_profile(s: &str) -> std::result::Result<Profile, String> {
    let (name, args) = split_call(s)?;
    let profile = match name.as_str() {
        "zero" => {
            arity(s, &args, 0)?;
            Profile::Zero
        }
        "constant" => {
            arity(s, &args, 1)?;
            Profile::Constant { value: args[0] }
        }
        "sine" => {
            arity(s, &args, 2)?;
            Profile::Sine {
                amplitude: args[0],
                frequency: args[1],
            }
        }
        "tanh_ramp" => {
            arity(s, &args, 2)?;
            Profile::TanhRamp {
                height: args[0],
                width: args[1],
            }
        }
        _ => {
            return Err(format!(
                "unknown profile preset `{s}`; expected zero, constant(c), sine(a, k) or tanh_ramp(h, w)"
            ))
        }
    };
    profile.validate().map_err(|e| e.to_string())?;
    Ok(profile)
}

/// Parses `one`, `identity`, `sin`, `tanh` or `affine(a, b)`.
pub fn parse_nonlinearity(s: &str) -> std::result::Result<Nonlinearity, String> {
    let (name, args) = split_call(s)?;
    let f = match name.as_str() {
        "one" => Nonlinearity::One,
        "identity" => Nonlinearity::Identity,
        "sin" => Nonlinearity::Sin,
        "tanh" => Nonlinearity::Tanh,
        "affine" => {
            arity(s, &args, 2)?;
            Nonlinearity::Affine {
                a: args[0],
                b: args[1],
            }
        }
        _ => {
            return Err(format!(
                "unknown nonlinearity `{s}`; expected one, identity, sin, tanh or affine(a, b)"
            ))
        }
    };
    if !matches!(f, Nonlinearity::Affine { .. }) {
        arity(s, &args, 0)?;
    }
    f.validate().map_err(|e| e.to_string())?;
    Ok(f)
}
