//! Point estimators: unconstrained and hard-constrained maximum likelihood
//! baselines, and MAP / empirical Bayes estimators whose hyperparameters are
//! restricted to the inverted probabilistic-constraint sets.

use serde::{Deserialize, Serialize};

use crate::dirichlet::DirichletHyper;
use crate::gaussian::GaussianHyper;

mod alpha_search;
pub mod gaussian_prior;
pub mod multinomial;
pub mod regression;

pub use gaussian_prior::{
    constrained_mle_gaussian_means, map_gaussian_means, mle_gaussian_means, CovarianceMode, GaussianMapConfig,
    GaussianMeansData,
};
pub use multinomial::{
    constrained_mle_multinomial, dirichlet_theta_step, eb_dirichlet_multinomial, map_dirichlet_multinomial,
    mle_multinomial, DirichletFitConfig, MultinomialData,
};
pub use regression::{
    constrained_ridge, map_regression, ridge_regression, select_map_regression, select_map_regression_scored, select_ridge,
    select_ridge_scored, MapSelection, RegressionData, RegressionGrids,
};

/// Fitted hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hyper {
    Dirichlet(DirichletHyper),
    Gaussian(GaussianHyper),
}

/// Output of every estimator that has an iterative or hyperparameter part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub theta: Vec<f64>,
    pub hyper: Option<Hyper>,
    /// Objective after initialization and after every sweep.
    pub objective_trace: Vec<f64>,
    /// Per-constraint margins at exit; nonnegative means satisfied.
    pub feasibility: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl EstimationResult {
    /// A plain point estimate with no hyperparameters.
    pub fn point(theta: Vec<f64>) -> Self {
        Self {
            theta,
            hyper: None,
            objective_trace: Vec::new(),
            feasibility: Vec::new(),
            iterations: 0,
            converged: true,
        }
    }

    /// True when the trace never drops by more than `slack`.
    pub fn trace_is_monotone(&self, slack: f64) -> bool {
        self.objective_trace
            .windows(2)
            .all(|w| w[1] >= w[0] - slack * (1.0 + w[0].abs()))
    }
}

/// Margin below which a converged fit is still reported as feasible.
pub const FEASIBILITY_SLACK: f64 = 1e-6;
