//! MAP estimation with a Gaussian prior `θ ~ N(μ, Σ)` whose hyperparameters
//! are held in the second-order-cone feasible set, for any likelihood that is
//! quadratic in θ (Gaussian means with known variance, linear regression).
//!
//! The objective is
//! `ℓ(θ) − ½(θ−μ)ᵀΣ⁻¹(θ−μ) + ½ ln|Σ⁻¹| − ½ tr(Σ⁻¹Λ)`,
//! the log posterior under the Wishart hyperprior on `Σ⁻¹` and a flat prior on `μ`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{EstimationResult, Hyper, FEASIBILITY_SLACK};
use crate::bregman::{cyclic_project, trace_bound_from_constraint, TraceConstraint, WishartHyperprior};
use crate::constraints::{ConstraintSet, LinearConstraint};
use crate::error::{check_dim, Error, Result};
use crate::gaussian::{soc_margin, Covariance, GaussianHyper};
use crate::linalg::{cholesky, inverse_spd, logdet_spd};
use crate::qp::QuadraticProgram;
use crate::stats::special::norm_quantile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovarianceMode {
    #[default]
    Diagonal,
    Full,
}

impl std::str::FromStr for CovarianceMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "diagonal" => Ok(Self::Diagonal),
            "full" => Ok(Self::Full),
            other => Err(Error::Config(format!("unknown covariance mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaussianMapConfig {
    pub mode: CovarianceMode,
    pub max_iter: usize,
    pub tol: f64,
    pub projection_sweeps: usize,
    pub projection_tol: f64,
}

impl Default for GaussianMapConfig {
    fn default() -> Self {
        Self {
            mode: CovarianceMode::Diagonal,
            max_iter: 500,
            tol: 1e-10,
            projection_sweeps: 100,
            projection_tol: 1e-12,
        }
    }
}

/// `ℓ(θ) = −½θᵀDθ + rᵀθ + c`.
#[derive(Debug, Clone)]
pub(crate) struct QuadraticLikelihood {
    pub precision: DMatrix<f64>,
    pub linear: DVector<f64>,
    pub constant: f64,
}

impl QuadraticLikelihood {
    pub fn value(&self, theta: &DVector<f64>) -> f64 {
        -0.5 * theta.dot(&(&self.precision * theta)) + self.linear.dot(theta) + self.constant
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }
}

struct State {
    theta: DVector<f64>,
    mu: DVector<f64>,
    sigma: DMatrix<f64>,
}

fn log_posterior(lik: &QuadraticLikelihood, lambda: &DMatrix<f64>, s: &State) -> Result<f64> {
    let prec = inverse_spd(&s.sigma)?;
    let dev = &s.theta - &s.mu;
    Ok(lik.value(&s.theta) - 0.5 * dev.dot(&(&prec * &dev)) - 0.5 * logdet_spd(&s.sigma)?
        - 0.5 * (&prec * lambda).trace())
}

fn constraint_rows(cs: &ConstraintSet, n: usize) -> (DMatrix<f64>, DVector<f64>) {
    let mut g = DMatrix::zeros(cs.len(), n);
    let mut h = DVector::zeros(cs.len());
    for (k, pc) in cs.iter().enumerate() {
        g.row_mut(k).copy_from_slice(pc.a());
        h[k] = pc.b();
    }
    (g, h)
}

/// A mean with positive slack on every constraint, near `target`.
fn interior_mean(cs: &ConstraintSet, target: &DVector<f64>) -> Result<DVector<f64>> {
    let n = target.len();
    let (g, h) = constraint_rows(cs, n);
    let norms: Vec<f64> = cs.iter().map(|pc| pc.a().iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    let mut rho = 1.0;
    while rho >= 1e-8 {
        let shrunk = DVector::from_fn(cs.len(), |k, _| h[k] - rho * norms[k]);
        match QuadraticProgram::new(DMatrix::identity(n, n), -target)
            .with_inequalities(g.clone(), shrunk)
            .solve(None)
        {
            Ok(sol) => return Ok(sol.x),
            Err(Error::Infeasible(_)) => rho *= 0.25,
            Err(e) => return Err(e),
        }
    }
    Err(Error::Infeasible(
        "constraint polytope has empty interior; no prior mean can meet confidence above one half".into(),
    ))
}

fn trace_constraints(cs: &ConstraintSet, mu: &DVector<f64>) -> Result<Vec<TraceConstraint>> {
    cs.iter().map(|pc| trace_bound_from_constraint(pc, mu.as_slice())).collect()
}

/// Feasible covariance nearest (in the mode's sense) to `base`.
fn sigma_candidate(
    base: &DMatrix<f64>,
    tcs: &[TraceConstraint],
    cfg: &GaussianMapConfig,
) -> Result<DMatrix<f64>> {
    match cfg.mode {
        CovarianceMode::Full => Ok(cyclic_project(base, tcs, cfg.projection_sweeps, cfg.projection_tol)?.sigma),
        CovarianceMode::Diagonal => {
            let mut s: Vec<f64> = base.diagonal().iter().copied().collect();
            // shrinking only lowers every other quadratic form, so one pass suffices
            for tc in tcs {
                let v: f64 = tc.a().iter().zip(&s).map(|(a, s)| a * a * s).sum();
                if v > tc.z() {
                    let f = tc.z() / v;
                    for (si, a) in s.iter_mut().zip(tc.a()) {
                        if *a != 0.0 {
                            *si *= f;
                        }
                    }
                }
            }
            Ok(DMatrix::from_diagonal(&DVector::from_vec(s)))
        }
    }
}

fn hyper_of(mu: &DVector<f64>, sigma: &DMatrix<f64>, mode: CovarianceMode) -> Result<GaussianHyper> {
    match mode {
        CovarianceMode::Full => GaussianHyper::new(mu.clone(), sigma.clone()),
        CovarianceMode::Diagonal => GaussianHyper::from_covariance(mu.clone(), Covariance::Diagonal(sigma.diagonal())),
    }
}

/// Coordinate ascent over `(θ, μ, Σ)`.
pub(crate) fn gaussian_prior_map(
    lik: &QuadraticLikelihood,
    cs: &ConstraintSet,
    prior: &WishartHyperprior,
    cfg: &GaussianMapConfig,
) -> Result<EstimationResult> {
    let n = lik.dim();
    cs.check_dim(n)?;
    check_dim(n, prior.dim())?;
    if let Some(pc) = cs.iter().find(|pc| pc.eta() <= 0.5) {
        return Err(Error::Unsupported(format!(
            "Gaussian MAP needs every confidence above 0.5, got {}",
            pc.eta()
        )));
    }
    let lambda = prior.lambda();

    // start: a lightly regularized likelihood maximizer, an interior mean, and a projected covariance
    let reg = 1e-8 * (1.0 + lik.precision.diagonal().amax());
    let theta0 = cholesky(&(&lik.precision + DMatrix::identity(n, n) * reg))?.solve(&lik.linear);
    let mu0 = if cs.is_empty() { theta0.clone() } else { interior_mean(cs, &theta0)? };
    let dev = &theta0 - &mu0;
    let sigma0 = sigma_candidate(&(lambda + &dev * dev.transpose()), &trace_constraints(cs, &mu0)?, cfg)?;
    let mut s = State {
        theta: theta0,
        mu: mu0,
        sigma: sigma0,
    };
    let mut value = log_posterior(lik, lambda, &s)?;
    let mut trace = vec![value];
    let (g, h) = constraint_rows(cs, n);
    let quantiles: Vec<f64> = cs.iter().map(|pc| norm_quantile(pc.eta())).collect();
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..cfg.max_iter {
        iterations += 1;
        let prec = inverse_spd(&s.sigma)?;

        // θ-step: (D + P)⁻¹(r + Pμ)
        let lhs = &lik.precision + &prec;
        s.theta = cholesky(&lhs)?.solve(&(&lik.linear + &prec * &s.mu));

        // μ-step: nearest mean to θ in the P metric with aᵀμ ≤ b − q√(aᵀΣa)
        if cs.is_empty() {
            s.mu = s.theta.clone();
        } else {
            let rhs = DVector::from_fn(cs.len(), |k, _| {
                let a = DVector::from_column_slice(cs.as_slice()[k].a());
                h[k] - quantiles[k] * a.dot(&(&s.sigma * &a)).sqrt()
            });
            let qp = QuadraticProgram::new(prec.clone(), -(&prec * &s.theta)).with_inequalities(g.clone(), rhs);
            s.mu = qp.solve(Some(&s.mu))?.x;
        }

        // Σ-step: surrogate projection, kept only where it does not lower the objective
        let dev = &s.theta - &s.mu;
        let base = lambda + &dev * dev.transpose();
        let cand = sigma_candidate(&base, &trace_constraints(cs, &s.mu)?, cfg)?;
        let before = log_posterior(lik, lambda, &s)?;
        let old = std::mem::replace(&mut s.sigma, cand.clone());
        let mut accepted = log_posterior(lik, lambda, &s)? >= before;
        let mut t = 0.5;
        while !accepted && t > 1e-6 {
            // the constraints are linear in Σ, so the segment stays feasible
            s.sigma = &old * (1.0 - t) + &cand * t;
            accepted = log_posterior(lik, lambda, &s)? >= before;
            t *= 0.5;
        }
        if !accepted {
            s.sigma = old;
        }

        let next = log_posterior(lik, lambda, &s)?;
        trace.push(next);
        let gain = next - value;
        value = next;
        if gain <= cfg.tol * (1.0 + value.abs()) {
            converged = true;
            break;
        }
    }

    let hyper = hyper_of(&s.mu, &s.sigma, cfg.mode)?;
    let feasibility = cs.iter().map(|pc| soc_margin(&hyper, pc)).collect::<Result<Vec<_>>>()?;
    converged &= feasibility.iter().all(|m| *m >= -FEASIBILITY_SLACK);
    Ok(EstimationResult {
        theta: s.theta.iter().copied().collect(),
        hyper: Some(Hyper::Gaussian(hyper)),
        objective_trace: trace,
        feasibility,
        iterations,
        converged,
    })
}

/// Samples per group, each from `N(θⱼ, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct GaussianMeansData {
    groups: Vec<Vec<f64>>,
}

impl TryFrom<Vec<Vec<f64>>> for GaussianMeansData {
    type Error = Error;
    fn try_from(groups: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(groups)
    }
}

impl From<GaussianMeansData> for Vec<Vec<f64>> {
    fn from(d: GaussianMeansData) -> Self {
        d.groups
    }
}

impl GaussianMeansData {
    pub fn new(groups: Vec<Vec<f64>>) -> Result<Self> {
        if groups.is_empty() || groups.iter().any(|g| g.is_empty()) {
            return Err(Error::Domain("every group needs at least one sample".into()));
        }
        if groups.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Domain("samples must be finite".into()));
        }
        Ok(Self { groups })
    }

    pub fn groups(&self) -> &[Vec<f64>] {
        &self.groups
    }

    pub fn dim(&self) -> usize {
        self.groups.len()
    }

    fn likelihood(&self) -> QuadraticLikelihood {
        let n = self.dim();
        let counts = DVector::from_fn(n, |j, _| self.groups[j].len() as f64);
        let sums = DVector::from_fn(n, |j, _| self.groups[j].iter().sum::<f64>());
        let sq: f64 = self.groups.iter().flatten().map(|v| v * v).sum();
        let total: f64 = counts.sum();
        QuadraticLikelihood {
            precision: DMatrix::from_diagonal(&counts),
            linear: sums,
            constant: -0.5 * sq - 0.5 * total * (2.0 * std::f64::consts::PI).ln(),
        }
    }
}

/// Sample means.
pub fn mle_gaussian_means(d: &GaussianMeansData) -> Vec<f64> {
    d.groups.iter().map(|g| g.iter().sum::<f64>() / g.len() as f64).collect()
}

/// Maximum likelihood over the polytope `hard`.
pub fn constrained_mle_gaussian_means(d: &GaussianMeansData, hard: &[LinearConstraint]) -> Result<Vec<f64>> {
    let lik = d.likelihood();
    let n = lik.dim();
    let mut g = DMatrix::zeros(hard.len(), n);
    let mut h = DVector::zeros(hard.len());
    for (k, c) in hard.iter().enumerate() {
        check_dim(n, c.dim())?;
        g.row_mut(k).copy_from_slice(c.a());
        h[k] = c.b();
    }
    let sol = QuadraticProgram::new(lik.precision.clone(), -&lik.linear)
        .with_inequalities(g, h)
        .solve(None)?;
    Ok(sol.x.iter().copied().collect())
}

/// MAP of `(θ, μ, Σ)` for group means under the constrained Gaussian prior.
pub fn map_gaussian_means(
    d: &GaussianMeansData,
    cs: &ConstraintSet,
    prior: &WishartHyperprior,
    cfg: &GaussianMapConfig,
) -> Result<EstimationResult> {
    gaussian_prior_map(&d.likelihood(), cs, prior, cfg)
}
