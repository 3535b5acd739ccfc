//! Orchestration: runs an experiment on a worker pool and writes its reports.
//!
//! Output files (all deterministic functions of the configuration):
//!
//! * `summary.json` — a [`RunReport`];
//! * `<observable>.csv` — one row per `(ε, p, sign)` with columns
//!   `epsilon,p,sign,norm,ci_lo,ci_hi,n_paths`;
//! * `decay_probe.csv` — one row per scale of the decay probe;
//! * for `solve_once`: `v.csv`, `z.csv`, `v0.csv` with columns
//!   `i,j,x1,x2,t,x,value`, and `solve_once.json` recording seed and model.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cli::config::{ExperimentConfig, ExperimentKind};
use crate::error::{Error, Result};
use crate::geometry::{InitialData, Nonlinearity};
use crate::noise::{GridSpec, NoiseField};
use crate::solver::{
    lattice_coordinates, solve_linear, solve_marching, tabulate_v0, SolutionField,
};
use crate::stats::experiments::run_experiment;
use crate::stats::report::{Check, DecayProbeReport, ScalingReport, Verdict};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub version: String,
    pub experiment: ExperimentKind,
    pub config: ExperimentConfig,
    pub reports: Vec<ScalingReport>,
    pub checks: Vec<Check>,
    pub decay_probe: Option<DecayProbeReport>,
    pub warnings: Vec<String>,
    pub verdict: Verdict,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.verdict.passed()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct CsvRow<'a> {
    epsilon: f64,
    p: f64,
    sign: &'a str,
    norm: f64,
    ci_lo: f64,
    ci_hi: f64,
    n_paths: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldDumpInfo {
    pub version: String,
    pub seed: u64,
    pub path: u64,
    pub grid: GridSpec,
    pub data: InitialData,
    #[serde(rename = "F")]
    pub f: Nonlinearity,
    pub files: Vec<String>,
}

/// Runs `f` on a pool of `workers` threads (the machine's default when absent).
fn with_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Executes the configured experiment. The worker count only changes speed.
pub fn run(config: &ExperimentConfig) -> Result<RunReport> {
    config.check_limits()?;
    let outcome = with_pool(config.workers, || run_experiment(config))??;
    let verdict = outcome.verdict();
    Ok(RunReport {
        schema_version: SCHEMA_VERSION,
        version: env!("CARGO_PKG_VERSION").to_string(),
        experiment: config.experiment,
        config: config.clone(),
        reports: outcome.reports,
        checks: outcome.checks,
        decay_probe: outcome.decay_probe,
        warnings: outcome.warnings,
        verdict,
    })
}

/// Writes `summary.json` and the CSV tables; returns the files written.
pub fn write_outputs(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let summary = dir.join("summary.json");
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    fs::write(&summary, json)?;
    written.push(summary);

    let mut observables: Vec<&str> = Vec::new();
    for r in &report.reports {
        if !observables.contains(&r.observable.as_str()) {
            observables.push(&r.observable);
        }
    }
    for observable in observables {
        let path = dir.join(format!("{observable}.csv"));
        let mut w = csv::Writer::from_path(&path).map_err(csv_error)?;
        for r in report.reports.iter().filter(|r| r.observable == observable) {
            for row in &r.rows {
                w.serialize(CsvRow {
                    epsilon: row.epsilon,
                    p: r.p,
                    sign: &r.sign,
                    norm: row.norm,
                    ci_lo: row.ci_lo,
                    ci_hi: row.ci_hi,
                    n_paths: row.n_paths,
                })
                .map_err(csv_error)?;
            }
        }
        w.flush()?;
        written.push(path);
    }
    if let Some(decay) = &report.decay_probe {
        let path = dir.join("decay_probe.csv");
        let mut w = csv::Writer::from_path(&path).map_err(csv_error)?;
        for row in &decay.rows {
            w.serialize(row).map_err(csv_error)?;
        }
        w.flush()?;
        written.push(path);
    }
    Ok(written)
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Data(format!("CSV output failed: {other:?}")),
    }
}

#[derive(Serialize)]
struct FieldRow {
    i: usize,
    j: usize,
    x1: f64,
    x2: f64,
    t: f64,
    x: f64,
    value: f64,
}

fn write_field(field: &SolutionField, path: &Path) -> Result<()> {
    let grid = *field.grid();
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    for (i, j, value) in field.iter() {
        let (x1, x2, t, x) = lattice_coordinates(&grid, i, j);
        w.serialize(FieldRow {
            i,
            j,
            x1,
            x2,
            t,
            x,
            value,
        })
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Dumps path 0's `v`, `Z̃` and `V₀` over the whole grid.
pub fn solve_once(config: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    if config.experiment != ExperimentKind::SolveOnce {
        return Err(Error::Config(format!(
            "solve-once needs experiment = \"solve_once\", got `{}`",
            config.experiment
        )));
    }
    config.check_limits()?;
    let grid = config.grid()?;
    let path = 0;
    let noise = NoiseField::sample(grid, config.seed, path)?;
    let fields = [
        ("v.csv", solve_marching(&noise, &config.data, &config.f)?),
        ("z.csv", solve_linear(&noise)?),
        ("v0.csv", tabulate_v0(&grid, &config.data)?),
    ];
    fs::create_dir_all(&config.out)?;
    let mut written = Vec::new();
    for (name, field) in &fields {
        let p = config.out.join(name);
        write_field(field, &p)?;
        written.push(p);
    }
    let info = FieldDumpInfo {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: config.seed,
        path,
        grid,
        data: config.data,
        f: config.f,
        files: fields.iter().map(|(n, _)| n.to_string()).collect(),
    };
    let p = config.out.join("solve_once.json");
    let mut json = serde_json::to_string_pretty(&info)?;
    json.push('\n');
    fs::write(&p, json)?;
    written.push(p);
    Ok(written)
}
