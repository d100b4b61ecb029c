//! Bayesian parameter estimation under probabilistic linear constraints.
//!
//! A constraint `P(aᵀθ ≤ b) ≥ η` on the prior of `θ` is inverted into a
//! feasible set for the prior's hyperparameters, and estimation then runs
//! over hyperparameters restricted to the intersection of those sets.
//!
//! * [`dirichlet`]: Dirichlet priors, evaluated by Edgeworth expansion,
//!   characteristic-function inversion or Monte Carlo.
//! * [`gaussian`]: Gaussian priors, where the inversion is an exact
//!   second-order-cone condition on `(μ, Σ)`.
//! * [`bregman`]: LogDet Bregman projections for full-covariance updates.
//! * [`estimators`]: MLE baselines and constrained MAP / empirical Bayes.
//! * [`harness`]: seeded synthetic experiments writing CSV metrics.

pub mod bregman;
pub mod constraints;
pub mod dirichlet;
pub mod error;
pub mod estimators;
pub mod gaussian;
pub mod harness;
pub mod linalg;
pub mod qp;
pub mod stats;

pub use constraints::{ConstraintSet, LinearConstraint, ProbabilisticConstraint};
pub use dirichlet::{DirichletHyper, ProbabilityMethod};
pub use error::{Error, Result};
pub use gaussian::{Covariance, GaussianHyper};
pub use stats::{QuadratureConfig, RngHandle};
