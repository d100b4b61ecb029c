//! Prior probability of a linear constraint under a Gaussian prior.
//!
//! For `θ ~ N(μ, Σ)`, `aᵀθ ~ N(aᵀμ, aᵀΣa)`, so
//! `P(aᵀθ ≤ b) ≥ η  ⇔  aᵀμ + Φ⁻¹(η)·√(aᵀΣa) ≤ b`, a second-order-cone
//! condition on the hyperparameters. The condition is exact, and convex in
//! `(μ, Σ^{1/2})` only when `η ≥ ½`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::constraints::{ConstraintSet, LinearConstraint, ProbabilisticConstraint};
use crate::dirichlet::McEstimate;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{cholesky, inverse_spd, quad_form};
use crate::stats::random::{MvnSampler, RngHandle};
use crate::stats::special::{norm_cdf, norm_quantile};

/// Prior covariance, either dense or diagonal.
#[derive(Debug, Clone, PartialEq)]
pub enum Covariance {
    Full(DMatrix<f64>),
    Diagonal(DVector<f64>),
}

impl Covariance {
    pub fn dim(&self) -> usize {
        match self {
            Covariance::Full(m) => m.nrows(),
            Covariance::Diagonal(d) => d.len(),
        }
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        match self {
            Covariance::Full(m) => m.clone(),
            Covariance::Diagonal(d) => DMatrix::from_diagonal(d),
        }
    }

    /// Σ⁻¹; elementwise for the diagonal variant, by Cholesky otherwise.
    pub fn precision(&self) -> Result<DMatrix<f64>> {
        match self {
            Covariance::Full(m) => inverse_spd(m),
            Covariance::Diagonal(d) => Ok(DMatrix::from_diagonal(&d.map(|v| 1.0 / v))),
        }
    }

    /// aᵀΣa
    pub fn variance_along(&self, a: &DVector<f64>) -> f64 {
        match self {
            Covariance::Full(m) => quad_form(m, a),
            Covariance::Diagonal(d) => a.iter().zip(d.iter()).map(|(x, s)| x * x * s).sum(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Covariance::Full(m) => cholesky(m).map(|_| ()),
            Covariance::Diagonal(d) => {
                if d.iter().all(|v| *v > 0.0 && v.is_finite()) {
                    Ok(())
                } else {
                    Err(Error::Domain("diagonal covariance entries must be positive".into()))
                }
            }
        }
    }
}

/// Gaussian prior hyperparameters `(μ, Σ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GaussianRecord", into = "GaussianRecord")]
pub struct GaussianHyper {
    mu: DVector<f64>,
    sigma: Covariance,
}

/// Wire form: `{mu, sigma}` with a row-major nested `sigma`, or `{mu, sigma_diag}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianRecord {
    pub mu: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_diag: Option<Vec<f64>>,
}

impl TryFrom<GaussianRecord> for GaussianHyper {
    type Error = Error;
    fn try_from(r: GaussianRecord) -> Result<Self> {
        let mu = DVector::from_vec(r.mu);
        match (r.sigma, r.sigma_diag) {
            (Some(rows), None) => {
                let n = rows.len();
                if rows.iter().any(|row| row.len() != n) {
                    return Err(Error::Domain("sigma must be a square matrix".into()));
                }
                let flat: Vec<f64> = rows.into_iter().flatten().collect();
                GaussianHyper::new(mu, DMatrix::from_row_slice(n, n, &flat))
            }
            (None, Some(d)) => GaussianHyper::diagonal(mu, DVector::from_vec(d)),
            _ => Err(Error::Config("give exactly one of sigma or sigma_diag".into())),
        }
    }
}

impl From<GaussianHyper> for GaussianRecord {
    fn from(h: GaussianHyper) -> Self {
        let mu = h.mu.iter().copied().collect();
        match h.sigma {
            Covariance::Full(m) => GaussianRecord {
                mu,
                sigma: Some(m.row_iter().map(|r| r.iter().copied().collect()).collect()),
                sigma_diag: None,
            },
            Covariance::Diagonal(d) => GaussianRecord {
                mu,
                sigma: None,
                sigma_diag: Some(d.iter().copied().collect()),
            },
        }
    }
}

impl GaussianHyper {
    /// Dense covariance; must be symmetric (to 1e−12 relative) and positive definite.
    pub fn new(mu: DVector<f64>, sigma: DMatrix<f64>) -> Result<Self> {
        Self::from_covariance(mu, Covariance::Full(sigma))
    }

    pub fn diagonal(mu: DVector<f64>, variances: DVector<f64>) -> Result<Self> {
        Self::from_covariance(mu, Covariance::Diagonal(variances))
    }

    pub fn from_covariance(mu: DVector<f64>, sigma: Covariance) -> Result<Self> {
        check_dim(mu.len(), sigma.dim())?;
        if mu.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("prior mean must be finite".into()));
        }
        sigma.validate().map_err(|e| match e {
            Error::Decomposition(msg) => Error::Domain(format!("covariance rejected: {msg}")),
            other => other,
        })?;
        Ok(Self { mu, sigma })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn sigma(&self) -> &Covariance {
        &self.sigma
    }

    /// Mean and standard deviation of `aᵀθ`.
    fn projected(&self, c: &LinearConstraint) -> Result<(f64, f64)> {
        check_dim(self.dim(), c.dim())?;
        if c.is_degenerate() {
            return Err(Error::Degenerate("constraint has all-zero coefficients".into()));
        }
        let a = DVector::from_column_slice(c.a());
        Ok((a.dot(&self.mu), self.sigma.variance_along(&a).sqrt()))
    }
}

/// `b − aᵀμ − Φ⁻¹(η)·√(aᵀΣa)`; nonnegative exactly when `(μ, Σ)` satisfies the constraint.
pub fn soc_margin(h: &GaussianHyper, pc: &ProbabilisticConstraint) -> Result<f64> {
    let (mean, sd) = h.projected(pc.linear())?;
    Ok(pc.b() - mean - norm_quantile(pc.eta()) * sd)
}

/// `Φ((b − aᵀμ)/√(aᵀΣa))`
pub fn prob_leq(h: &GaussianHyper, c: &LinearConstraint) -> Result<f64> {
    let (mean, sd) = h.projected(c)?;
    Ok(norm_cdf((c.b() - mean) / sd))
}

pub fn prob_leq_montecarlo(
    h: &GaussianHyper,
    c: &LinearConstraint,
    n_samples: usize,
    rng: &mut RngHandle,
) -> Result<McEstimate> {
    h.projected(c)?;
    if n_samples == 0 {
        return Err(Error::Domain("Monte Carlo needs at least one sample".into()));
    }
    let sampler = MvnSampler::new(h.mu.clone(), &h.sigma.to_matrix())?;
    let a = DVector::from_column_slice(c.a());
    let hits = (0..n_samples)
        .filter(|_| a.dot(&sampler.sample(rng)) <= c.b())
        .count();
    Ok(McEstimate::from_hits(hits, n_samples))
}

/// Per-constraint membership report for a constraint set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Membership {
    pub margins: Vec<f64>,
    pub satisfied: Vec<bool>,
    pub all: bool,
}

/// Membership of `(μ, Σ)` in the intersection of the sets; vacuous for an empty set.
pub fn in_feasible_set(h: &GaussianHyper, set: &ConstraintSet) -> Result<Membership> {
    let margins = set
        .iter()
        .map(|pc| soc_margin(h, pc))
        .collect::<Result<Vec<_>>>()?;
    let satisfied: Vec<bool> = margins.iter().map(|m| *m >= 0.0).collect();
    let all = satisfied.iter().all(|s| *s);
    Ok(Membership {
        margins,
        satisfied,
        all,
    })
}
