//! Linear regression `y ~ N(θᵀx, σ²)`: ridge baselines and constrained-prior MAP.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::gaussian_prior::{gaussian_prior_map, GaussianMapConfig, QuadraticLikelihood};
use super::EstimationResult;
use crate::bregman::WishartHyperprior;
use crate::constraints::{ConstraintSet, LinearConstraint};
use crate::error::{check_dim, Error, Result};
use crate::linalg::cholesky;
use crate::qp::QuadraticProgram;

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionData {
    x: DMatrix<f64>,
    y: DVector<f64>,
    sigma2: f64,
}

impl RegressionData {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>, sigma2: f64) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(Error::Domain("need at least one observation".into()));
        }
        check_dim(x.nrows(), y.len())?;
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::Domain(format!("noise variance must be positive, got {sigma2}")));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Domain("design and targets must be finite".into()));
        }
        Ok(Self { x, y, sigma2 })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn with_sigma2(&self, sigma2: f64) -> Result<Self> {
        Self::new(self.x.clone(), self.y.clone(), sigma2)
    }

    /// Rows `[start, start + len)`.
    fn rows(&self, start: usize, len: usize) -> Result<Self> {
        Self::new(self.x.rows(start, len).into_owned(), self.y.rows(start, len).into_owned(), self.sigma2)
    }

    fn gram(&self, ridge: f64) -> DMatrix<f64> {
        self.x.transpose() * &self.x + DMatrix::identity(self.dim(), self.dim()) * (ridge * self.sigma2)
    }

    fn likelihood(&self) -> QuadraticLikelihood {
        let m = self.x.nrows() as f64;
        QuadraticLikelihood {
            precision: self.x.transpose() * &self.x / self.sigma2,
            linear: self.x.transpose() * &self.y / self.sigma2,
            constant: -0.5 * self.y.norm_squared() / self.sigma2
                - 0.5 * m * (2.0 * std::f64::consts::PI * self.sigma2).ln(),
        }
    }

    pub fn mse(&self, theta: &[f64]) -> f64 {
        let pred = &self.x * DVector::from_column_slice(theta);
        (pred - &self.y).norm_squared() / self.x.nrows() as f64
    }
}

fn check_ridge(ridge: f64) -> Result<()> {
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::Domain(format!("ridge must be nonnegative, got {ridge}")));
    }
    Ok(())
}

/// `θ = (XᵀX + ridge·σ²·I)⁻¹Xᵀy`.
pub fn ridge_regression(d: &RegressionData, ridge: f64) -> Result<Vec<f64>> {
    check_ridge(ridge)?;
    let chol = cholesky(&d.gram(ridge))
        .map_err(|_| Error::Rank(format!("normal equations singular at ridge {ridge}")))?;
    Ok(chol.solve(&(d.x.transpose() * &d.y)).iter().copied().collect())
}

/// Ridge least squares subject to hard linear constraints.
pub fn constrained_ridge(d: &RegressionData, ridge: f64, hard: &[LinearConstraint]) -> Result<Vec<f64>> {
    check_ridge(ridge)?;
    let n = d.dim();
    let gram = d.gram(ridge);
    cholesky(&gram).map_err(|_| Error::Rank(format!("normal equations singular at ridge {ridge}")))?;
    let mut g = DMatrix::zeros(hard.len(), n);
    let mut h = DVector::zeros(hard.len());
    for (k, c) in hard.iter().enumerate() {
        check_dim(n, c.dim())?;
        g.row_mut(k).copy_from_slice(c.a());
        h[k] = c.b();
    }
    let sol = QuadraticProgram::new(gram, -(d.x.transpose() * &d.y))
        .with_inequalities(g, h)
        .solve(None)?;
    Ok(sol.x.iter().copied().collect())
}

/// MAP of `(θ, μ, Σ)` with the noise variance fixed at `d.sigma2()`.
pub fn map_regression(
    d: &RegressionData,
    cs: &ConstraintSet,
    prior: &WishartHyperprior,
    cfg: &GaussianMapConfig,
) -> Result<EstimationResult> {
    gaussian_prior_map(&d.likelihood(), cs, prior, cfg)
}

/// Candidate values for held-out model selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegressionGrids {
    pub ridge: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub tau: Vec<f64>,
    /// Fraction of the training rows, taken from the end, used for scoring.
    pub holdout_fraction: f64,
}

impl Default for RegressionGrids {
    fn default() -> Self {
        Self {
            ridge: vec![0.001, 0.01, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 100.0],
            sigma2: vec![0.5, 1.0, 2.0],
            tau: vec![0.01, 0.05, 0.1, 0.2, 0.3],
            holdout_fraction: 0.2,
        }
    }
}

impl RegressionGrids {
    fn split(&self, d: &RegressionData) -> Result<(RegressionData, RegressionData)> {
        let m = d.x.nrows();
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return Err(Error::Config(format!("holdout fraction {} not in (0,1)", self.holdout_fraction)));
        }
        let held = ((m as f64 * self.holdout_fraction).ceil() as usize).max(1);
        if held >= m {
            return Err(Error::Domain(format!("{m} rows are too few for a held-out split")));
        }
        Ok((d.rows(0, m - held)?, d.rows(m - held, held)?))
    }
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Picks the ridge value with the lowest held-out MSE (smallest wins ties),
/// then refits on all rows. With `hard`, the constrained fit is used throughout.
pub fn select_ridge(
    d: &RegressionData,
    grids: &RegressionGrids,
    hard: Option<&[LinearConstraint]>,
) -> Result<(f64, Vec<f64>)> {
    let (fit, held) = grids.split(d)?;
    let (r, _) = select_ridge_scored(&fit, &held, grids, hard)?;
    Ok((r, solve_ridge(d, r, hard)?))
}

fn solve_ridge(d: &RegressionData, r: f64, hard: Option<&[LinearConstraint]>) -> Result<Vec<f64>> {
    match hard {
        Some(h) => constrained_ridge(d, r, h),
        None => ridge_regression(d, r),
    }
}

/// Fits every ridge value on `fit` and keeps the one with the lowest MSE on
/// `score` (smallest wins ties). No refit.
pub fn select_ridge_scored(
    fit: &RegressionData,
    score: &RegressionData,
    grids: &RegressionGrids,
    hard: Option<&[LinearConstraint]>,
) -> Result<(f64, Vec<f64>)> {
    let mut best: Option<(f64, f64, Vec<f64>)> = None;
    for r in sorted(&grids.ridge) {
        let theta = match solve_ridge(fit, r, hard) {
            Ok(theta) => theta,
            Err(Error::Rank(_)) => continue,
            Err(e) => return Err(e),
        };
        let mse = score.mse(&theta);
        if best.as_ref().is_none_or(|(_, s, _)| mse < *s) {
            best = Some((r, mse, theta));
        }
    }
    let (r, _, theta) = best.ok_or_else(|| Error::Rank("every ridge value gave a singular system".into()))?;
    Ok((r, theta))
}

/// Selected hyperparameters and the corresponding fit.
#[derive(Debug, Clone, PartialEq)]
pub struct MapSelection {
    pub sigma2: f64,
    pub tau: f64,
    pub result: EstimationResult,
}

/// Grid search over `σ²` and `Λ = τI` by held-out MSE, then a refit on all rows.
pub fn select_map_regression(
    d: &RegressionData,
    cs: &ConstraintSet,
    grids: &RegressionGrids,
    cfg: &GaussianMapConfig,
) -> Result<MapSelection> {
    let (fit, held) = grids.split(d)?;
    let MapSelection { sigma2, tau, .. } = select_map_regression_scored(&fit, &held, cs, grids, cfg)?;
    let prior = WishartHyperprior::scaled_identity(tau, d.dim())?;
    let result = map_regression(&d.with_sigma2(sigma2)?, cs, &prior, cfg)?;
    Ok(MapSelection { sigma2, tau, result })
}

/// Fits every `(σ², τ)` pair on `fit` and keeps the lowest MSE on `score`
/// (smallest `σ²`, then smallest `τ`, wins ties). No refit.
pub fn select_map_regression_scored(
    fit: &RegressionData,
    score: &RegressionData,
    cs: &ConstraintSet,
    grids: &RegressionGrids,
    cfg: &GaussianMapConfig,
) -> Result<MapSelection> {
    let n = fit.dim();
    let mut best: Option<(f64, MapSelection)> = None;
    let mut last_err = None;
    for s2 in sorted(&grids.sigma2) {
        for tau in sorted(&grids.tau) {
            let prior = WishartHyperprior::scaled_identity(tau, n)?;
            match map_regression(&fit.with_sigma2(s2)?, cs, &prior, cfg) {
                Ok(result) => {
                    let mse = score.mse(&result.theta);
                    if best.as_ref().is_none_or(|(s, _)| mse < *s) {
                        best = Some((mse, MapSelection { sigma2: s2, tau, result }));
                    }
                }
                Err(e @ (Error::Infeasible(_) | Error::Unsupported(_) | Error::DimensionMismatch { .. })) => {
                    return Err(e)
                }
                Err(e) => last_err = Some(e),
            }
        }
    }
    best.map(|(_, sel)| sel)
        .ok_or_else(|| last_err.unwrap_or_else(|| Error::Config("empty hyperparameter grid".into())))
}
