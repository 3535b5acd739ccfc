use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::stats::estimate::{bootstrap_norms, lp_norm, percentile_interval};
use crate::stats::regression::fit_slope;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// Exact linearization (constant `F` or a vanishing solution): nothing to fit.
    Degenerate,
}

impl Verdict {
    pub fn passed(self) -> bool {
        !matches!(self, Verdict::Fail)
    }

    pub fn combine(self, other: Verdict) -> Verdict {
        match (self, other) {
            (Verdict::Fail, _) | (_, Verdict::Fail) => Verdict::Fail,
            (Verdict::Degenerate, _) | (_, Verdict::Degenerate) => Verdict::Degenerate,
            _ => Verdict::Pass,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub epsilon: f64,
    pub norm: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n_paths: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub h: f64,
    pub grid_n: usize,
    pub grid_origin: (f64, f64),
    pub paths: usize,
    pub master_seed: u64,
    pub bootstrap_resamples: usize,
}

/// How a fitted exponent is judged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SlopeRule {
    /// Pass iff `lo ≤ slope ≤ hi`.
    Window { lo: f64, hi: f64 },
    /// Pass iff `slope ≥ lo`; above `steep` is noted but not a failure.
    AtLeast { lo: f64, steep: f64 },
    /// Reported only; the experiment judges it together with other reports.
    Informational,
}

/// Log-log scaling of `‖X_ε‖_{L^p(Ω)}` (raised to `fit_power`) against `ε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub observable: String,
    pub sign: String,
    pub p: f64,
    /// The slope is fitted to `log(norm^fit_power)`; 2 turns an `L²` norm into a second moment.
    pub fit_power: f64,
    pub rows: Vec<ScalingRow>,
    pub slope: Option<f64>,
    pub slope_stderr: Option<f64>,
    pub slope_ci: Option<(f64, f64)>,
    pub declared_exponent: f64,
    pub rule: SlopeRule,
    pub verdict: Verdict,
    pub notes: Vec<String>,
    pub metadata: ReportMetadata,
}

/// Norms below this are treated as exact zeros.
pub const DEGENERATE_NORM: f64 = 1e-12;

pub struct ScalingInput<'a> {
    pub observable: &'a str,
    pub sign: &'a str,
    pub p: f64,
    pub fit_power: f64,
    pub epsilons: &'a [f64],
    /// `samples[e][path]`
    pub samples: &'a [Vec<f64>],
    pub declared_exponent: f64,
    pub rule: SlopeRule,
    pub degenerate: bool,
    pub bootstrap_seed: u64,
    pub metadata: ReportMetadata,
}

impl ScalingReport {
    pub fn build(input: ScalingInput<'_>) -> Result<Self> {
        let ScalingInput {
            observable,
            sign,
            p,
            fit_power,
            epsilons,
            samples,
            declared_exponent,
            rule,
            degenerate,
            bootstrap_seed,
            metadata,
        } = input;
        let norms = samples
            .iter()
            .map(|s| lp_norm(s, p))
            .collect::<Result<Vec<_>>>()?;
        let draws = bootstrap_norms(samples, p, metadata.bootstrap_resamples, bootstrap_seed)?;
        let rows = epsilons
            .iter()
            .zip(&norms)
            .enumerate()
            .map(|(e, (&epsilon, &norm))| {
                let column: Vec<f64> = draws.iter().map(|d| d[e]).collect();
                let (ci_lo, ci_hi) = percentile_interval(&column, 0.95).unwrap_or((norm, norm));
                ScalingRow {
                    epsilon,
                    norm,
                    ci_lo,
                    ci_hi,
                    n_paths: samples[e].len(),
                }
            })
            .collect::<Vec<_>>();

        let mut notes = Vec::new();
        let all_zero = norms.iter().all(|&n| n < DEGENERATE_NORM);
        if degenerate || all_zero {
            notes.push(
                "degenerate case: the remainder vanishes identically (exact linearization), no slope fitted"
                    .to_string(),
            );
            return Ok(Self {
                observable: observable.into(),
                sign: sign.into(),
                p,
                fit_power,
                rows,
                slope: None,
                slope_stderr: None,
                slope_ci: None,
                declared_exponent,
                rule,
                verdict: Verdict::Degenerate,
                notes,
                metadata,
            });
        }

        let points: Vec<(f64, f64)> = epsilons.iter().zip(&norms).map(|(&e, &n)| (e, n)).collect();
        let fit = fit_slope(&points)?;
        let slope = fit_power * fit.slope;
        let stderr = fit_power * fit.stderr;
        let boot_slopes: Vec<f64> = draws
            .iter()
            .filter_map(|d| {
                let pts: Vec<(f64, f64)> = epsilons.iter().zip(d).map(|(&e, &n)| (e, n)).collect();
                fit_slope(&pts).ok().map(|f| fit_power * f.slope)
            })
            .collect();
        let slope_ci = percentile_interval(&boot_slopes, 0.95);

        let verdict = match rule {
            SlopeRule::Window { lo, hi } => {
                if (lo..=hi).contains(&slope) {
                    Verdict::Pass
                } else {
                    Verdict::Fail
                }
            }
            SlopeRule::AtLeast { lo, steep } => {
                if slope > steep {
                    notes.push(format!(
                        "steeper than theory requires: slope {slope:.4} exceeds {steep} (informational)"
                    ));
                }
                if slope >= lo {
                    Verdict::Pass
                } else {
                    Verdict::Fail
                }
            }
            SlopeRule::Informational => Verdict::Pass,
        };
        Ok(Self {
            observable: observable.into(),
            sign: sign.into(),
            p,
            fit_power,
            rows,
            slope: Some(slope),
            slope_stderr: Some(stderr),
            slope_ci,
            declared_exponent,
            rule,
            verdict,
            notes,
            metadata,
        })
    }
}

/// A single pass/fail comparison of a measured value against a target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub target: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    /// `|value − target| ≤ tolerance`.
    pub fn within(name: impl Into<String>, value: f64, target: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            target,
            tolerance,
            pass: (value - target).abs() <= tolerance,
        }
    }

    /// `value ≥ floor`.
    pub fn at_least(name: impl Into<String>, value: f64, floor: f64) -> Self {
        Self {
            name: name.into(),
            value,
            target: floor,
            tolerance: 0.0,
            pass: value >= floor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub n: usize,
    pub eps_target: f64,
    /// `ε_n` snapped to the lattice; used in every formula.
    pub eps: f64,
    pub steps: usize,
    /// Fraction of paths with `|δδZ̃|² ≤ M ε^{2+2κ}`.
    pub empirical: f64,
    /// `erf(√(2M) ε^κ)`
    pub exact: f64,
    /// `√(8M/π) ε^κ`
    pub bound: f64,
    pub std_err: f64,
    pub within_ci: bool,
    pub below_bound: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayProbeReport {
    pub kappa: f64,
    pub m: f64,
    pub h: f64,
    pub paths: usize,
    pub rows: Vec<DecayRow>,
    /// Fraction of paths whose running maximum of `|δδZ̃(ε_n)|/ε_n^{1+κ}`
    /// over the second half of the `n` range exceeds that of the first half.
    pub divergence_fraction: f64,
    pub divergence_required: Option<f64>,
    pub verdict: Verdict,
}
