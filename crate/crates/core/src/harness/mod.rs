//! Seeded synthetic experiments comparing MLE, hard-constrained and
//! probabilistically constrained estimators, written as long-format CSV.

mod run;
mod spec;

pub use run::{
    cell_seed, format_g10, mean_metric, run_cell, run_experiment, write_csv, MetricsRow, CSV_HEADER, ERROR_METRIC,
};
pub use spec::{
    builtin_gaussian_spec, builtin_multinomial_spec, builtin_regression_spec, builtin_sets, builtin_spec,
    draw_regression_beta, EstimatorKind, ExperimentSpec, Family, Metric, Scenario, Selection,
    REGRESSION_DIM,
};
