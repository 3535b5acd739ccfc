use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use nullwave::cli::{
    load_config, run, solve_once, write_outputs, ExperimentConfig, Overrides, RunReport,
};
use nullwave::stats::Verdict;
use nullwave::Error;

/// Stochastic wave equation experiments in null coordinates.
#[derive(Debug, Parser)]
#[command(name = "nullwave", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the experiment described by a config file and write its reports.
    Run(RunArgs),
    /// Check a config file and print the resolved configuration.
    Validate { config: PathBuf },
    /// Dump one path's v, Z̃ and V₀ fields as CSV.
    SolveOnce {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    config: PathBuf,
    /// Number of Monte Carlo paths (overrides the file).
    #[arg(long)]
    paths: Option<usize>,
    /// Master seed (overrides the file).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides the file and NULLWAVE_OUT).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; affects speed only, never results.
    #[arg(long)]
    workers: Option<usize>,
}

const EXIT_VERDICT_FAIL: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

fn exit_code(err: &Error) -> ExitCode {
    match err {
        Error::Config(_) | Error::Invalid(_) | Error::ResourceCap(_) => ExitCode::from(EXIT_CONFIG),
        _ => ExitCode::from(EXIT_RUNTIME),
    }
}

fn load(path: &Path, overrides: &Overrides) -> Result<ExperimentConfig, ExitCode> {
    load_config(path, overrides).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        exit_code(&e)
    })
}

fn print_summary(report: &RunReport) {
    for r in &report.reports {
        let slope = r.slope.map_or("-".to_string(), |s| format!("{s:.4}"));
        println!(
            "{:<22} {:>3} p={:<3} slope={slope:<8} {:?}",
            r.observable, r.sign, r.p, r.verdict
        );
    }
    if let Some(d) = &report.decay_probe {
        for row in &d.rows {
            println!(
                "decay n={} eps={:.6} empirical={:.5} exact={:.5} bound={:.5} ci={} bound_ok={}",
                row.n, row.eps, row.empirical, row.exact, row.bound, row.within_ci, row.below_bound
            );
        }
        println!(
            "decay divergence_fraction={:.4} {:?}",
            d.divergence_fraction, d.verdict
        );
    }
    for c in &report.checks {
        println!(
            "check {:<40} value={:.6e} target={:.6e} tol={:.3e} {}",
            c.name,
            c.value,
            c.target,
            c.tolerance,
            if c.pass { "pass" } else { "FAIL" }
        );
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    println!("verdict: {:?}", report.verdict);
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => {
            let overrides = Overrides {
                paths: args.paths,
                seed: args.seed,
                out: args.out,
                workers: args.workers,
            };
            let config = match load(&args.config, &overrides) {
                Ok(c) => c,
                Err(code) => return code,
            };
            let started = Instant::now();
            let report = match run(&config) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("error: {e}");
                    return exit_code(&e);
                }
            };
            if let Err(e) = write_outputs(&report, &config.out) {
                eprintln!("error: writing reports to {}: {e}", config.out.display());
                return ExitCode::from(EXIT_RUNTIME);
            }
            print_summary(&report);
            eprintln!(
                "wall time {:.2} s; reports in {}",
                started.elapsed().as_secs_f64(),
                config.out.display()
            );
            if report.verdict == Verdict::Fail {
                ExitCode::from(EXIT_VERDICT_FAIL)
            } else {
                ExitCode::SUCCESS
            }
        }
        Command::Validate { config } => {
            let config = match load(&config, &Overrides::default()) {
                Ok(c) => c,
                Err(code) => return code,
            };
            if let Err(e) = config.check_limits() {
                eprintln!("error: {e}");
                return exit_code(&e);
            }
            match serde_json::to_string_pretty(&config) {
                Ok(json) => {
                    println!("{json}");
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_RUNTIME)
                }
            }
        }
        Command::SolveOnce { config, seed, out } => {
            let overrides = Overrides {
                seed,
                out,
                ..Overrides::default()
            };
            let config = match load(&config, &overrides) {
                Ok(c) => c,
                Err(code) => return code,
            };
            match solve_once(&config) {
                Ok(files) => {
                    for f in files {
                        println!("{}", f.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    exit_code(&e)
                }
            }
        }
    }
}
