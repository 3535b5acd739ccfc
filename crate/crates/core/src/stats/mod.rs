//! Monte Carlo estimators, log-log slope fitting and the experiments that
//! measure local linearization, regularity and tail behavior.

pub mod estimate;
pub mod experiments;
pub mod regression;
pub mod report;

pub use estimate::{lp_norm, mean_estimate, pairwise_sum, MeanEstimate};
pub use experiments::{
    experiment_decay_probe, experiment_holder, experiment_one_param_failure,
    experiment_original_coordinates, experiment_remainder_scaling, experiment_variance_z,
    run_experiment, ExperimentOutcome,
};
pub use regression::{fit_slope, SlopeFit};
pub use report::{
    Check, DecayProbeReport, DecayRow, ReportMetadata, ScalingReport, ScalingRow, SlopeRule,
    Verdict,
};
