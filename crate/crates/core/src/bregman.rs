//! LogDet Bregman divergence and projections of a covariance matrix onto
//! sets of the form `aᵀΣa ≤ z`.
//!
//! Projecting `S₀` onto one such half-space in LogDet divergence has the
//! closed form `Σ⁻¹ = S₀⁻¹ + ν aaᵀ`; on the covariance side this is a
//! Sherman–Morrison rank-one downdate, so no inverse is formed per step.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::constraints::ProbabilisticConstraint;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{cholesky, inverse_spd, quad_form, symmetrize};
use crate::stats::special::norm_quantile;

/// Sweeps between full refactorizations in [`cyclic_project`].
pub const REFRESH_INTERVAL: usize = 50;

fn spd_or_domain(m: &DMatrix<f64>, what: &str) -> Result<()> {
    cholesky(m)
        .map(|_| ())
        .map_err(|e| Error::Domain(format!("{what}: {e}")))
}

/// `tr(XY⁻¹) − ln det(XY⁻¹) − n`.
pub fn logdet_divergence(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<f64> {
    check_dim(y.nrows(), x.nrows())?;
    let cx = cholesky(x).map_err(|e| Error::Domain(format!("first argument: {e}")))?;
    let cy = cholesky(y).map_err(|e| Error::Domain(format!("second argument: {e}")))?;
    let n = x.nrows() as f64;
    let ld = |c: &nalgebra::Cholesky<f64, nalgebra::Dyn>| {
        2.0 * c.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
    };
    let trace = cy.solve(x).trace();
    // clamp away the rounding residue when X ≈ Y
    Ok((trace - (ld(&cx) - ld(&cy)) - n).max(0.0))
}

/// Scale matrix `Λ` of the Wishart hyperprior on `Σ⁻¹`.
#[derive(Debug, Clone, PartialEq)]
pub struct WishartHyperprior {
    lambda: DMatrix<f64>,
}

impl WishartHyperprior {
    pub fn new(lambda: DMatrix<f64>) -> Result<Self> {
        spd_or_domain(&lambda, "Wishart scale")?;
        Ok(Self { lambda })
    }

    /// `Λ = τI`
    pub fn scaled_identity(tau: f64, n: usize) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) || n == 0 {
            return Err(Error::Domain(format!("need tau > 0 and n ≥ 1, got tau={tau}, n={n}")));
        }
        Ok(Self {
            lambda: DMatrix::identity(n, n) * tau,
        })
    }

    pub fn lambda(&self) -> &DMatrix<f64> {
        &self.lambda
    }

    pub fn dim(&self) -> usize {
        self.lambda.nrows()
    }
}

/// The convex set `{Σ : aᵀΣa ≤ z}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceConstraint {
    a: Vec<f64>,
    z: f64,
}

impl TraceConstraint {
    pub fn new(a: Vec<f64>, z: f64) -> Result<Self> {
        if !(z > 0.0 && z.is_finite()) {
            return Err(Error::Domain(format!("trace bound must be positive, got {z}")));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("coefficients must be finite".into()));
        }
        if a.iter().all(|v| *v == 0.0) {
            return Err(Error::Degenerate("trace constraint with a = 0".into()));
        }
        Ok(Self { a, z })
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    /// `aᵀΣa − z`, positive when violated.
    pub fn violation(&self, sigma: &DMatrix<f64>) -> f64 {
        quad_form(sigma, &DVector::from_column_slice(&self.a)) - self.z
    }
}

/// For fixed `μ`, the probabilistic constraint holds iff `aᵀΣa ≤ ((b − aᵀμ)/Φ⁻¹(η))²`.
pub fn trace_bound_from_constraint(pc: &ProbabilisticConstraint, mu: &[f64]) -> Result<TraceConstraint> {
    check_dim(pc.dim(), mu.len())?;
    if pc.eta() <= 0.5 {
        return Err(Error::Unsupported(format!(
            "covariance bound needs eta > 0.5, got {}",
            pc.eta()
        )));
    }
    let gap = pc.b() - crate::linalg::dot(pc.a(), mu);
    if gap <= 0.0 {
        return Err(Error::Infeasible(format!(
            "b − aᵀμ = {gap} ≤ 0; no covariance satisfies the constraint at this mean"
        )));
    }
    let q = norm_quantile(pc.eta());
    TraceConstraint::new(pc.a().to_vec(), (gap / q).powi(2))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingleProjection {
    pub sigma: DMatrix<f64>,
    /// Multiplier on `aaᵀ` added to the precision; zero when already feasible.
    pub nu: f64,
}

/// `Σ − ν Σaaᵀ Σ / (1 + ν aᵀΣa)`, returning the update and `ν`.
fn rank_one_downdate(sigma: &mut DMatrix<f64>, a: &DVector<f64>, z: f64) -> f64 {
    let sa = &*sigma * a;
    let p = a.dot(&sa);
    if p <= z {
        return 0.0;
    }
    let nu = (p - z) / (z * p);
    let scale = nu / (1.0 + nu * p);
    sigma.ger(-scale, &sa, &sa, 1.0);
    symmetrize(sigma);
    nu
}

/// LogDet projection of `base` onto `{Σ : aᵀΣa ≤ z}`.
pub fn project_single(base: &DMatrix<f64>, tc: &TraceConstraint) -> Result<SingleProjection> {
    spd_or_domain(base, "projection base")?;
    check_dim(base.nrows(), tc.dim())?;
    let mut sigma = base.clone();
    let nu = rank_one_downdate(&mut sigma, &DVector::from_column_slice(tc.a()), tc.z());
    Ok(SingleProjection { sigma, nu })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CyclicProjection {
    pub sigma: DMatrix<f64>,
    pub sweeps: usize,
    /// Largest `aᵀΣa − z` over the constraints at exit.
    pub max_violation: f64,
    pub converged: bool,
    /// Per-constraint violation at exit; positive entries remain unsatisfied.
    pub violations: Vec<f64>,
}

/// Cycles single projections over `tcs` until every violation is at most `tol`.
///
/// Plain cyclic projection: the limit is feasible but need not be the
/// Bregman projection onto the intersection.
pub fn cyclic_project(
    base: &DMatrix<f64>,
    tcs: &[TraceConstraint],
    max_sweeps: usize,
    tol: f64,
) -> Result<CyclicProjection> {
    spd_or_domain(base, "projection base")?;
    for tc in tcs {
        check_dim(base.nrows(), tc.dim())?;
    }
    if !(tol >= 0.0) {
        return Err(Error::Domain(format!("tolerance must be nonnegative, got {tol}")));
    }
    let dirs: Vec<DVector<f64>> = tcs.iter().map(|t| DVector::from_column_slice(t.a())).collect();
    let violations_of = |s: &DMatrix<f64>| tcs.iter().map(|t| t.violation(s)).collect::<Vec<_>>();

    let mut sigma = base.clone();
    let mut precision = inverse_spd(base)?;
    let mut sweeps = 0;
    let mut violations = violations_of(&sigma);
    while violations.iter().any(|v| *v > tol) && sweeps < max_sweeps {
        for (tc, a) in tcs.iter().zip(&dirs) {
            let nu = rank_one_downdate(&mut sigma, a, tc.z());
            if nu > 0.0 {
                precision.ger(nu, a, a, 1.0);
            }
        }
        sweeps += 1;
        if sweeps % REFRESH_INTERVAL == 0 {
            symmetrize(&mut precision);
            sigma = inverse_spd(&precision)?;
        }
        violations = violations_of(&sigma);
    }
    let max_violation = violations.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(CyclicProjection {
        converged: violations.iter().all(|v| *v <= tol),
        sigma,
        sweeps,
        max_violation,
        violations,
    })
}
